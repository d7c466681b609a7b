//! Hand extraction: chamfer distance transform, distance-based feature
//! pixels, hand component selection, wrist cut and recentering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{connected_components, morphology, BinaryMask, Connectivity, MorphOp};

/// Chamfer weight of an orthogonal step.
pub const ORTHO: u32 = 3;
/// Chamfer weight of a diagonal step.
pub const DIAG: u32 = 4;

/// Distance from each foreground pixel to the nearest background pixel, in
/// chamfer units (3 per orthogonal step). Background pixels hold 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    dist: Vec<u32>,
}

impl DistanceMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u32] {
        &self.dist
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.dist[y * self.width + x]
    }
}

/// 3-4 chamfer distance transform computed with one forward and one backward
/// raster pass. Pixels outside the frame count as background.
pub fn chamfer_dt(mask: &BinaryMask) -> DistanceMap {
    let (w, h) = (mask.width(), mask.height());
    let mut d: Vec<u32> = mask.bits().iter().map(|&b| if b { u32::MAX / 2 } else { 0 }).collect();
    let at = |d: &[u32], x: isize, y: isize| -> u32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            d[y as usize * w + x as usize]
        }
    };
    const FORWARD: [(isize, isize, u32); 4] = [(-1, 0, ORTHO), (-1, -1, DIAG), (0, -1, ORTHO), (1, -1, DIAG)];
    const BACKWARD: [(isize, isize, u32); 4] = [(1, 0, ORTHO), (1, 1, DIAG), (0, 1, ORTHO), (-1, 1, DIAG)];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if d[i] == 0 {
                continue;
            }
            let best = FORWARD.iter().map(|&(dx, dy, c)| at(&d, x as isize + dx, y as isize + dy) + c).min().unwrap();
            d[i] = d[i].min(best);
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            if d[i] == 0 {
                continue;
            }
            let best = BACKWARD.iter().map(|&(dx, dy, c)| at(&d, x as isize + dx, y as isize + dy) + c).min().unwrap();
            d[i] = d[i].min(best);
        }
    }
    DistanceMap { width: w, height: h, dist: d }
}

/// A local maximum of the distance map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeaturePixel {
    pub x: usize,
    pub y: usize,
    /// Distance in orthogonal steps, `round(dist / 3)`.
    pub value: u32,
}

/// Foreground pixels whose distance is ≥ all eight neighbors. Neighbors
/// outside the frame never disqualify a pixel. Returned in raster order.
pub fn feature_pixels(dt: &DistanceMap) -> Vec<FeaturePixel> {
    let (w, h) = (dt.width, dt.height);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = dt.get(x, y);
            if v == 0 {
                continue;
            }
            let mut is_max = true;
            'scan: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    if dt.get(nx as usize, ny as usize) > v {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                let value = (v as f64 / ORTHO as f64).round() as u32;
                out.push(FeaturePixel { x, y, value });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandParams {
    /// Feature pixels are kept when `feat_lo <= value <= feat_hi`.
    pub feat_lo: u32,
    pub feat_hi: u32,
    /// Erosion applied before splitting touching blobs; 0 disables it.
    pub erosion_radius: usize,
    pub min_feature_count: usize,
    /// Distance from the centroid to the cut line, as a fraction of the
    /// centroid-to-finger distance.
    pub cut_fraction: f64,
    pub frame_size: usize,
    /// Fingers point up (toward smaller y). Set to false for hands pointing down.
    pub fingers_up: bool,
}

impl Default for HandParams {
    fn default() -> Self {
        Self {
            feat_lo: 4,
            feat_hi: 12,
            erosion_radius: 0,
            min_feature_count: 1,
            cut_fraction: 0.75,
            frame_size: 176,
            fingers_up: true,
        }
    }
}

impl HandParams {
    pub fn validate(&self) -> Result<()> {
        if self.feat_lo > self.feat_hi {
            return Err(Error::Argument("feat_lo must not exceed feat_hi".into()));
        }
        if !(self.cut_fraction > 0.0 && self.cut_fraction <= 1.0) {
            return Err(Error::Argument(format!("cut_fraction {} outside (0, 1]", self.cut_fraction)));
        }
        if self.frame_size == 0 {
            return Err(Error::Argument("frame_size must be positive".into()));
        }
        Ok(())
    }

    pub fn in_interval(&self, f: &FeaturePixel) -> bool {
        (self.feat_lo..=self.feat_hi).contains(&f.value)
    }
}

/// Picks the component carrying the most in-interval feature pixels.
///
/// With a nonzero `erosion_radius` the mask is eroded first so touching blobs
/// separate; the winner is then grown back by the same radius inside the
/// original mask. Ties go to the larger component, then to raster order.
pub fn select_hand(mask: &BinaryMask, feats: &[FeaturePixel], p: &HandParams) -> Result<BinaryMask> {
    let work = if p.erosion_radius > 0 {
        morphology(mask, MorphOp::Erode, p.erosion_radius)?
    } else {
        mask.clone()
    };
    let table = connected_components(&work, Connectivity::Eight);
    if table.count() == 0 {
        return Err(Error::NoHand("mask has no foreground components".into()));
    }
    let mut counts = vec![0usize; table.count()];
    for f in feats.iter().filter(|f| p.in_interval(f)) {
        let l = table.label(f.x, f.y);
        if l != 0 {
            counts[l as usize - 1] += 1;
        }
    }
    let best = (1..=table.count() as u32)
        .max_by(|&a, &b| {
            let (ia, ib) = (a as usize - 1, b as usize - 1);
            counts[ia]
                .cmp(&counts[ib])
                .then(table.size(a).cmp(&table.size(b)))
                .then(b.cmp(&a))
        })
        .expect("at least one component");
    let n = counts[best as usize - 1];
    if n < p.min_feature_count.max(1) {
        return Err(Error::NoHand(format!(
            "best component has {n} feature pixels, need {}",
            p.min_feature_count.max(1)
        )));
    }
    let chosen = table.mask(best);
    if p.erosion_radius == 0 {
        return Ok(chosen);
    }
    let grown = morphology(&chosen, MorphOp::Dilate, p.erosion_radius)?;
    Ok(BinaryMask::from_fn(mask.width(), mask.height(), |x, y| grown.get(x, y) && mask.get(x, y)))
}

/// Mean foreground coordinate.
pub fn centroid(mask: &BinaryMask) -> Result<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (x, y) in mask.foreground() {
        sx += x as f64;
        sy += y as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("centroid of an empty mask".into()));
    }
    Ok((sx / n as f64, sy / n as f64))
}

/// Geometry of a wrist cut, kept for inspection and dumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutLine {
    pub centroid: (f64, f64),
    pub finger_mean: (f64, f64),
    pub pivot: (f64, f64),
}

impl CutLine {
    /// True when `(x, y)` lies on the retained (finger) side, line included.
    pub fn keeps(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (self.finger_mean.0 - self.centroid.0, self.finger_mean.1 - self.centroid.1);
        (x - self.pivot.0) * dx + (y - self.pivot.1) * dy >= 0.0
    }
}

/// Computes the cut line: the perpendicular to centroid→finger-mean through
/// `P = C - round(fraction * (M - C))`, which lies on the wrist side of C.
pub fn cut_line(mask: &BinaryMask, p: &HandParams, feats: &[FeaturePixel]) -> Result<CutLine> {
    let c = centroid(mask)?;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for f in feats.iter().filter(|f| p.in_interval(f) && mask.get(f.x, f.y)) {
        let finger_side = if p.fingers_up { (f.y as f64) < c.1 } else { (f.y as f64) > c.1 };
        if finger_side {
            sx += f.x as f64;
            sy += f.y as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Orientation("no feature pixels on the finger side of the centroid".into()));
    }
    let m = (sx / n as f64, sy / n as f64);
    if m == c {
        return Err(Error::Orientation("finger mean coincides with the centroid".into()));
    }
    let pivot = (c.0 - (p.cut_fraction * (m.0 - c.0)).round(), c.1 - (p.cut_fraction * (m.1 - c.1)).round());
    Ok(CutLine { centroid: c, finger_mean: m, pivot })
}

/// Removes everything beyond the cut line (forearm side).
pub fn wrist_cut(mask: &BinaryMask, p: &HandParams, feats: &[FeaturePixel]) -> Result<BinaryMask> {
    let line = cut_line(mask, p, feats)?;
    Ok(BinaryMask::from_fn(mask.width(), mask.height(), |x, y| mask.get(x, y) && line.keeps(x as f64, y as f64)))
}

/// Copies the foreground into a `frame_size x frame_size` mask with its
/// centroid moved to the frame center.
pub fn recenter(mask: &BinaryMask, frame_size: usize) -> Result<BinaryMask> {
    let (cx, cy) = centroid(mask)?;
    let center = frame_size as f64 / 2.0;
    let shift_x = (center - cx).round() as isize;
    let shift_y = (center - cy).round() as isize;
    let mut out = BinaryMask::new(frame_size, frame_size);
    for (x, y) in mask.foreground() {
        let (nx, ny) = (x as isize + shift_x, y as isize + shift_y);
        if nx < 0 || ny < 0 || nx >= frame_size as isize || ny >= frame_size as isize {
            return Err(Error::Size(format!("hand does not fit in a {frame_size}x{frame_size} frame")));
        }
        out.set(nx as usize, ny as usize, true);
    }
    Ok(out)
}
