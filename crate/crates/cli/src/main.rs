//! `gesture`: command-line front end for gesture-core.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use gesture_core::classifier::{cross_validate, GestureDatabase, KnnParams, Kind};
use gesture_core::control::{self, GestureTable, RobotServer};
use gesture_core::dataset::{build_db, load_frames};
use gesture_core::pipeline::{self, PipelineConfig};
use gesture_core::{pnm, synth, Error, Result};

#[derive(Parser)]
#[command(name = "gesture", version, about = "Hand gesture recognition and robot control")]
struct Cli {
    /// JSON pipeline configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Static,
    Dynamic,
    Sequence,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Static => Kind::Static7,
            KindArg::Dynamic => Kind::Dynamic12,
            KindArg::Sequence => Kind::Sequence60,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Classify a static hand image (PPM).
    Static {
        image: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// Write intermediate masks here.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
    /// Gate a frame directory and classify it with the matching database.
    Dynamic {
        frames: PathBuf,
        /// Dynamic12 and/or Sequence60 databases; repeat the flag for both.
        #[arg(long, required = true)]
        db: Vec<PathBuf>,
    },
    /// Extract every sample under a dataset root into a CSV database.
    BuildDb {
        root: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Output CSV path.
        #[arg(long)]
        db: PathBuf,
    },
    /// Cross-validated recognition rates for one or more k.
    Xval {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        folds: Option<usize>,
        /// Print CSV instead of text tables.
        #[arg(long)]
        csv: bool,
    },
    /// Track motion and print the centroid transition and gate decision.
    Gate { frames: PathBuf },
    /// Write per-pair flow components and motion masks as PGM images.
    FlowDump {
        frames: PathBuf,
        #[arg(long)]
        dump_dir: PathBuf,
    },
    /// Send a one-hot control vector to the robot.
    Send {
        /// 1-based class index.
        class: usize,
        /// Vector length; defaults to the number of configured gesture names.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = control::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = 5.0)]
        timeout: f64,
    },
    /// Run the mock robot server with the configured gesture names.
    ServeRobot {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = control::DEFAULT_PORT)]
        port: u16,
    },
    /// Write the synthetic dataset (static/, small/, large/).
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        variants: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the effective configuration as JSON.
    Config,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn fmt_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(",")
}

fn print_recognition(r: &pipeline::Recognition) {
    println!("label: {}", r.prediction.label);
    if let Some(name) = &r.name {
        println!("name: {name}");
    }
    println!("vector: {}", fmt_vector(&r.vector));
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Static { image, db, dump_dir } => {
            let db = GestureDatabase::load(&db)?;
            let img = pnm::read_image(&image).map_err(Error::in_stage("read"))?;
            let r = pipeline::run_static(&img, &db, &cfg, dump_dir.as_deref())?;
            print_recognition(&r);
        }
        Command::Dynamic { frames, db } => {
            let dbs = db.iter().map(GestureDatabase::load).collect::<Result<Vec<_>>>()?;
            let seq = load_frames(&frames).map_err(Error::in_stage("read"))?;
            let r = pipeline::run_dynamic(&seq, &dbs, &cfg)?;
            println!("gate: {:?} (transition {:.4})", r.gate.decision, r.gate.transition);
            println!("database: {}", r.kind.name());
            print_recognition(&r.recognition);
        }
        Command::BuildDb { root, kind, db } => {
            let (built, report) = build_db(&root, kind.into(), &cfg)?;
            for (path, e) in &report.failures {
                eprintln!("skipped {}: {e}", path.display());
            }
            built.save(&db)?;
            println!("{} rows written to {}, {} failed", report.ok, db.display(), report.failures.len());
        }
        Command::Xval { db, k, seed, folds, csv } => {
            let db = GestureDatabase::load(&db)?;
            let seed = seed.unwrap_or(cfg.classifier.seed);
            let folds = folds.unwrap_or(cfg.classifier.folds);
            for k in k {
                let p = KnnParams { k, ..cfg.classifier.knn.clone() };
                let report = cross_validate(&db, &p, folds, seed)?;
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
                if csv {
                    println!("# k={k}");
                    print!("{}", report.to_csv());
                } else {
                    println!("k = {k}, {folds} folds, average {:.2}%", report.average * 100.0);
                    print!("{}", report.to_text(&cfg.gesture_names));
                }
            }
        }
        Command::Gate { frames } => {
            let seq = load_frames(&frames).map_err(Error::in_stage("read"))?;
            let g = pipeline::gate(&seq, &cfg)?;
            println!("transition: {:.4}", g.transition);
            println!("decision: {:?}", g.decision);
        }
        Command::FlowDump { frames, dump_dir } => {
            let seq = load_frames(&frames).map_err(Error::in_stage("read"))?;
            let written = pipeline::flow_dump(&seq, &cfg, &dump_dir)?;
            println!("{} images written to {}", written.len(), dump_dir.display());
        }
        Command::Send { class, n, host, port, timeout } => {
            if !(timeout > 0.0 && timeout.is_finite()) {
                return Err(Error::Argument(format!("timeout must be positive, got {timeout}")));
            }
            let n = n.unwrap_or(cfg.gesture_names.len());
            let reply = control::send(&host, port, class, n, Duration::from_secs_f64(timeout))?;
            println!("{reply}");
            if reply.starts_with("ERR") {
                return Err(Error::Protocol(reply));
            }
        }
        Command::ServeRobot { host, port } => {
            let table = GestureTable::new(cfg.gesture_names.clone())?;
            let server = RobotServer::bind((host.as_str(), port), table)?;
            println!("listening on {}", server.local_addr()?);
            server.run()?;
        }
        Command::Synth { out, variants, seed } => {
            if variants == 0 {
                return Err(Error::Argument("variants must be at least 1".into()));
            }
            synth::write_dataset(&out, variants, seed)?;
            println!("synthetic dataset written to {}", out.display());
        }
        Command::Config => println!("{}", cfg.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_no_signal() { 3 } else { 2 })
        }
    }
}
