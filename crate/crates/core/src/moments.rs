//! Geometric moments and the 7-element static shape vector.
//!
//! The vector is `[P⁴/Imin, A²/Imax, A²/Imin, Dmax/Dmin, P²/A,
//! (Imin+Imax)/A², (Imax−Imin)/(Imax+Imin)]` where `A` is the pixel area, `P`
//! the boundary pixel count, `Imax`/`Imin` the principal second moments and
//! `Dmax`/`Dmin` the extreme distances from the centroid to the contour.
//! Moments use discrete sums over the filled silhouette.

use serde::{Deserialize, Serialize};

use crate::contour::{smooth_contour, trace_points, Point};
use crate::error::{Error, Result};
use crate::hand::centroid;
use crate::imaging::BinaryMask;

pub const STATIC_DIM: usize = 7;

/// Extents below this are treated as zero.
const MIN_EXTENT: f64 = 1e-6;

pub fn raw_moment(mask: &BinaryMask, p: u32, q: u32) -> f64 {
    mask.foreground().map(|(x, y)| (x as f64).powi(p as i32) * (y as f64).powi(q as i32)).sum()
}

pub fn central_moment(mask: &BinaryMask, p: u32, q: u32) -> Result<f64> {
    let (cx, cy) = centroid(mask)?;
    Ok(mask.foreground().map(|(x, y)| (x as f64 - cx).powi(p as i32) * (y as f64 - cy).powi(q as i32)).sum())
}

/// Second-order central moments `(mu20, mu02, mu11)` in one pass.
fn second_moments(mask: &BinaryMask) -> Result<(f64, f64, f64)> {
    let (cx, cy) = centroid(mask)?;
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for (x, y) in mask.foreground() {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
    }
    Ok((m20, m02, m11))
}

fn principal_from(m20: f64, m02: f64, m11: f64) -> Result<(f64, f64)> {
    let root = (4.0 * m11 * m11 + (m20 - m02) * (m20 - m02)).sqrt();
    let imax = (m20 + m02 + root) / 2.0;
    let imin = (m20 + m02 - root) / 2.0;
    if imin <= 1e-9 * imax.max(1.0) {
        return Err(Error::Degenerate("pixels are collinear (Imin is zero)".into()));
    }
    Ok((imax, imin))
}

/// Principal second moments `(Imax, Imin)`.
pub fn principal_moments(mask: &BinaryMask) -> Result<(f64, f64)> {
    let (m20, m02, m11) = second_moments(mask)?;
    principal_from(m20, m02, m11)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtentMode {
    /// Max and min Euclidean distance from the centroid to contour pixels.
    #[default]
    Radial,
    /// Per-axis extreme offsets of foreground pixels, combined as
    /// `sqrt(dx² + dy²)` for the max pair and for the min pair.
    PerAxis,
}

/// Boundary pixels: foreground with a background 4-neighbor.
pub fn boundary_points(mask: &BinaryMask) -> Vec<Point> {
    mask.foreground()
        .filter(|&(x, y)| mask.is_boundary(x, y))
        .map(|(x, y)| Point::new(x as f64, y as f64))
        .collect()
}

/// Extreme radial distances from `center` to a point set.
pub fn extents_from_points(points: &[Point], center: (f64, f64)) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::Degenerate("empty contour".into()));
    }
    let c = Point::new(center.0, center.1);
    let (mut dmax, mut dmin) = (f64::MIN, f64::MAX);
    for &p in points {
        let d = p.distance(c);
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    check_extents(dmax, dmin)
}

fn check_extents(dmax: f64, dmin: f64) -> Result<(f64, f64)> {
    if dmin < MIN_EXTENT {
        return Err(Error::Degenerate(format!("minimum extent {dmin} is zero")));
    }
    Ok((dmax, dmin))
}

/// `(Dmax, Dmin)` of a silhouette.
pub fn radial_extents(mask: &BinaryMask, mode: ExtentMode) -> Result<(f64, f64)> {
    let c = centroid(mask)?;
    match mode {
        ExtentMode::Radial => extents_from_points(&boundary_points(mask), c),
        ExtentMode::PerAxis => {
            let (mut xmax, mut ymax, mut xmin, mut ymin) = (0.0f64, 0.0f64, f64::MAX, f64::MAX);
            for (x, y) in mask.foreground() {
                let (dx, dy) = ((x as f64 - c.0).abs(), (y as f64 - c.1).abs());
                xmax = xmax.max(dx);
                ymax = ymax.max(dy);
                xmin = xmin.min(dx);
                ymin = ymin.min(dy);
            }
            check_extents(xmax.hypot(ymax), xmin.hypot(ymin))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeOptions {
    pub extent_mode: ExtentMode,
    /// When set, radial extents are measured on the traced outer contour
    /// smoothed with this odd window instead of the raw boundary pixels.
    pub smooth_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticVector {
    pub values: [f64; STATIC_DIM],
    pub label: Option<u32>,
}

/// The intermediate quantities the vector is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeStats {
    pub area: f64,
    pub perimeter: f64,
    pub imax: f64,
    pub imin: f64,
    pub dmax: f64,
    pub dmin: f64,
}

impl ShapeStats {
    pub fn vector(&self) -> [f64; STATIC_DIM] {
        let ShapeStats { area: a, perimeter: p, imax, imin, dmax, dmin } = *self;
        [
            p.powi(4) / imin,
            a * a / imax,
            a * a / imin,
            dmax / dmin,
            p * p / a,
            (imin + imax) / (a * a),
            (imax - imin) / (imax + imin),
        ]
    }
}

pub fn shape_stats(mask: &BinaryMask, opts: &ShapeOptions) -> Result<ShapeStats> {
    let (m20, m02, m11) = second_moments(mask)?;
    let (imax, imin) = principal_from(m20, m02, m11)?;
    let area = mask.count() as f64;
    let perimeter = mask.foreground().filter(|&(x, y)| mask.is_boundary(x, y)).count() as f64;
    let (dmax, dmin) = match (opts.smooth_window, opts.extent_mode) {
        (Some(w), ExtentMode::Radial) => {
            let smoothed = smooth_contour(&trace_points(mask)?, w)?;
            extents_from_points(&smoothed, centroid(mask)?)?
        }
        (_, mode) => radial_extents(mask, mode)?,
    };
    Ok(ShapeStats { area, perimeter, imax, imin, dmax, dmin })
}

pub fn static_vector(mask: &BinaryMask) -> Result<StaticVector> {
    static_vector_with(mask, &ShapeOptions::default())
}

pub fn static_vector_with(mask: &BinaryMask, opts: &ShapeOptions) -> Result<StaticVector> {
    let stats = shape_stats(mask, opts)?;
    Ok(StaticVector { values: stats.vector(), label: None })
}
