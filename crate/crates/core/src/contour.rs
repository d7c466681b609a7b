//! Ordered outer contours and moving-average smoothing.

use crate::error::{Error, Result};
use crate::imaging::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

// Clockwise on screen (y down), starting west.
const RING: [(isize, isize); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn ring_index(dx: isize, dy: isize) -> usize {
    RING.iter().position(|&d| d == (dx, dy)).expect("offset is an 8-neighbor")
}

/// Moore-neighbor trace of the outer boundary of the component containing
/// the topmost-leftmost foreground pixel, clockwise, starting at that pixel.
/// The closing step back to the start is implied, not repeated.
pub fn trace_boundary(mask: &BinaryMask) -> Result<Vec<(usize, usize)>> {
    let start = mask
        .foreground()
        .next()
        .ok_or_else(|| Error::Contour("no foreground to trace".into()))?;
    let fg = |x: isize, y: isize| mask.get_or_bg(x, y);
    let mut out = vec![start];
    let (mut cx, mut cy) = (start.0 as isize, start.1 as isize);
    // Direction from the current pixel to its background backtrack pixel.
    let mut back = 0usize;
    let mut second: Option<(isize, isize)> = None;
    let limit = 4 * mask.count() + 8;
    for _ in 0..limit {
        let mut found = None;
        for i in 1..=8 {
            let d = (back + i) % 8;
            let (nx, ny) = (cx + RING[d].0, cy + RING[d].1);
            if fg(nx, ny) {
                found = Some((d, nx, ny));
                break;
            }
        }
        let Some((d, nx, ny)) = found else {
            // Isolated pixel.
            return Ok(out);
        };
        let prev = (cx + RING[(d + 7) % 8].0, cy + RING[(d + 7) % 8].1);
        if (cx, cy) == (start.0 as isize, start.1 as isize) {
            match second {
                None => second = Some((nx, ny)),
                Some(s) if s == (nx, ny) => {
                    out.pop();
                    return Ok(out);
                }
                Some(_) => {}
            }
        }
        back = ring_index(prev.0 - nx, prev.1 - ny);
        cx = nx;
        cy = ny;
        out.push((nx as usize, ny as usize));
    }
    Err(Error::Contour("boundary trace did not close".into()))
}

pub fn trace_points(mask: &BinaryMask) -> Result<Vec<Point>> {
    Ok(trace_boundary(mask)?.into_iter().map(|(x, y)| Point::new(x as f64, y as f64)).collect())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn properly_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let eps = 1e-12;
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) && ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps))
}

/// Rejects loops that are open (the closing gap is more than twice the
/// longest step) or whose segments cross each other. Retraced and touching
/// segments, as produced by tracing one-pixel-wide parts, are accepted.
pub fn validate_loop(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Contour("empty contour".into()));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Contour("non-finite contour point".into()));
    }
    let n = points.len();
    if n < 3 {
        return Ok(());
    }
    let longest = points.windows(2).map(|w| w[0].distance(w[1])).fold(0.0, f64::max);
    let gap = points[n - 1].distance(points[0]);
    if gap > 2.0 * longest + 1e-9 {
        return Err(Error::Contour(format!("open trace: closing gap {gap:.3} vs longest step {longest:.3}")));
    }
    let seg = |i: usize| (points[i], points[(i + 1) % n]);
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if properly_cross(a, b, c, d) {
                return Err(Error::Contour(format!("self-crossing between segments {i} and {j}")));
            }
        }
    }
    Ok(())
}

/// Circular moving average over `window` consecutive points. Loops no longer
/// than the window collapse to their mean.
pub fn smooth_contour(contour: &[Point], window: usize) -> Result<Vec<Point>> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::Argument(format!("smoothing window must be odd and at least 3, got {window}")));
    }
    validate_loop(contour)?;
    let n = contour.len();
    if n <= window {
        let mx = contour.iter().map(|p| p.x).sum::<f64>() / n as f64;
        let my = contour.iter().map(|p| p.y).sum::<f64>() / n as f64;
        return Ok(vec![Point::new(mx, my); n]);
    }
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            let (mut sx, mut sy) = (0.0, 0.0);
            for k in 0..window {
                let p = contour[(i + n + k - half) % n];
                sx += p.x;
                sy += p.y;
            }
            Point::new(sx / window as f64, sy / window as f64)
        })
        .collect())
}

pub fn loop_length(points: &[Point]) -> f64 {
    let n = points.len();
    (0..n).map(|i| points[i].distance(points[(i + 1) % n])).sum()
}
