//! One-hot control vectors over a line-oriented TCP link to the robot.
//!
//! Requests are `int ("," int)* "\n"`; the server answers each line with
//! `ACK <name>\n` or `ERR <reason>\n`.

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::error::{Error, Result};

pub const DEFAULT_PORT: u16 = 9559;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlVector {
    slots: Vec<u8>,
}

impl ControlVector {
    /// `class_idx` is 1-based.
    pub fn one_hot(class_idx: usize, n: usize) -> Result<Self> {
        if n == 0 || class_idx == 0 || class_idx > n {
            return Err(Error::Argument(format!("class index {class_idx} out of range 1..={n}")));
        }
        let mut slots = vec![0; n];
        slots[class_idx - 1] = 1;
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[u8] {
        &self.slots
    }

    pub fn class_index(&self) -> usize {
        self.slots.iter().position(|&s| s == 1).expect("one-hot") + 1
    }
}

pub fn encode(class_idx: usize, n: usize) -> Result<Vec<u8>> {
    let v = ControlVector::one_hot(class_idx, n)?;
    let mut s = v.slots.iter().map(u8::to_string).collect::<Vec<_>>().join(",");
    s.push('\n');
    Ok(s.into_bytes())
}

/// 1-based index of the single `1`. A trailing newline is optional.
pub fn decode(message: &[u8]) -> Result<usize> {
    let text = std::str::from_utf8(message).map_err(|_| Error::Protocol("not utf-8".into()))?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    let body = body.strip_suffix('\r').unwrap_or(body);
    if body.trim().is_empty() {
        return Err(Error::Protocol("empty".into()));
    }
    let mut hot = None;
    let mut ones = 0;
    for (i, tok) in body.split(',').enumerate() {
        let v: i64 = tok.trim().parse().map_err(|_| Error::Protocol(format!("not an integer: {:?}", tok.trim())))?;
        match v {
            0 => {}
            1 => {
                ones += 1;
                hot = Some(i + 1);
            }
            _ => return Err(Error::Protocol("not one-hot".into())),
        }
    }
    match (ones, hot) {
        (1, Some(i)) => Ok(i),
        _ => Err(Error::Protocol("not one-hot".into())),
    }
}

/// Gesture names, index-aligned with class labels (label 1 is the first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GestureTable {
    names: Vec<String>,
}

impl GestureTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Argument("gesture table is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.trim().is_empty() || n.contains('\n') {
                return Err(Error::Argument(format!("invalid gesture name {n:?}")));
            }
            if names[..i].contains(n) {
                return Err(Error::Argument(format!("duplicate gesture name {n:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, class_idx: usize) -> Option<&str> {
        class_idx.checked_sub(1).and_then(|i| self.names.get(i)).map(String::as_str)
    }
}

/// The reply line (without newline) for one request line.
pub fn respond(table: &GestureTable, line: &[u8]) -> std::result::Result<String, String> {
    let idx = decode(line).map_err(|e| match e {
        Error::Protocol(reason) => reason,
        other => other.to_string(),
    })?;
    table.name(idx).map(str::to_owned).ok_or_else(|| format!("unknown gesture {idx}"))
}

/// Mock robot: performs (logs) the named gesture for every valid request.
pub struct RobotServer {
    listener: TcpListener,
    table: Arc<GestureTable>,
    performed: Arc<Mutex<Vec<String>>>,
    stop: Arc<AtomicBool>,
}

impl RobotServer {
    pub fn bind(addr: impl ToSocketAddrs, table: GestureTable) -> Result<Self> {
        let listener = TcpListener::bind(addr).map_err(Error::Transport)?;
        Ok(Self {
            listener,
            table: Arc::new(table),
            performed: Arc::new(Mutex::new(Vec::new())),
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener.local_addr().map_err(Error::Transport)
    }

    /// Accepts connections until stopped; each connection gets its own thread.
    pub fn run(&self) -> Result<()> {
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let table = Arc::clone(&self.table);
            let performed = Arc::clone(&self.performed);
            thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                if let Err(e) = serve_connection(stream, &table, &performed) {
                    log::warn!("connection {peer}: {e}");
                }
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let performed = Arc::clone(&self.performed);
        let stop = Arc::clone(&self.stop);
        let thread = thread::spawn(move || self.run());
        Ok(ServerHandle { addr, performed, stop, thread: Some(thread) })
    }
}

fn serve_connection(stream: TcpStream, table: &GestureTable, performed: &Mutex<Vec<String>>) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        let reply = match respond(table, &line) {
            Ok(name) => {
                log::info!("PERFORM {name}");
                performed.lock().expect("performed log poisoned").push(name.clone());
                format!("ACK {name}\n")
            }
            Err(reason) => format!("ERR {reason}\n"),
        };
        writer.write_all(reply.as_bytes())?;
        writer.flush()?;
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    performed: Arc<Mutex<Vec<String>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Names performed so far, in arrival order.
    pub fn performed(&self) -> Vec<String> {
        self.performed.lock().expect("performed log poisoned").clone()
    }

    pub fn shutdown(mut self) -> Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> Result<()> {
        let Some(thread) = self.thread.take() else {
            return Ok(());
        };
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        if let Ok(s) = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1)) {
            let _ = s.shutdown(Shutdown::Both);
        }
        thread.join().map_err(|_| Error::Protocol("server thread panicked".into()))?
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

/// Sends one control vector and returns the reply line without its newline.
pub fn send(host: &str, port: u16, class_idx: usize, n: usize, timeout: Duration) -> Result<String> {
    let msg = encode(class_idx, n)?;
    let addrs: Vec<SocketAddr> = (host, port).to_socket_addrs().map_err(Error::Transport)?.collect();
    let mut last = None;
    let mut stream = None;
    for a in addrs {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => {
                stream = Some(s);
                break;
            }
            Err(e) => last = Some(e),
        }
    }
    let stream = stream.ok_or_else(|| {
        Error::Transport(last.unwrap_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no address")))
    })?;
    stream.set_read_timeout(Some(timeout)).map_err(Error::Transport)?;
    stream.set_write_timeout(Some(timeout)).map_err(Error::Transport)?;
    let mut writer = stream.try_clone().map_err(Error::Transport)?;
    writer.write_all(&msg).map_err(Error::Transport)?;
    let mut reply = String::new();
    BufReader::new(stream).read_line(&mut reply).map_err(Error::Transport)?;
    if reply.is_empty() {
        return Err(Error::Transport(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "connection closed without a reply",
        )));
    }
    Ok(reply.trim_end_matches(['\r', '\n']).to_string())
}
