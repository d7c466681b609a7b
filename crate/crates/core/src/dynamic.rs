//! Key frames, difference images and motion descriptors for dynamic gestures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{connected_components, morphology, threshold, BinaryMask, ColorSpace, Connectivity, Image, MorphOp};

pub const MOTION_DIM: usize = 12;
pub const STATES: usize = 5;
pub const SEQUENCE_DIM: usize = MOTION_DIM * STATES;

/// An ordered run of equally sized frames. Gray copies are kept for analysis.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Image>,
    gray: Vec<Image>,
    fps: Option<f64>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Image>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::SequenceTooShort(format!("{} frame(s), need at least 2", frames.len())));
        }
        if let Some((i, _)) = frames.iter().enumerate().find(|(_, f)| !f.same_size(&frames[0])) {
            return Err(Error::Argument(format!("frame {i} differs in size from frame 0")));
        }
        let gray = frames.iter().map(Image::to_gray).collect();
        Ok(Self { frames, gray, fps: None })
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = Some(fps);
        self
    }

    pub fn fps(&self) -> Option<f64> {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn gray(&self, i: usize) -> &Image {
        &self.gray[i]
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn reversed(&self) -> FrameSequence {
        Self {
            frames: self.frames.iter().rev().cloned().collect(),
            gray: self.gray.iter().rev().cloned().collect(),
            fps: self.fps,
        }
    }
}

fn require_gray(img: &Image, what: &str) -> Result<()> {
    if img.colorspace() != ColorSpace::Gray {
        return Err(Error::Precondition(format!("{what} needs a gray image, got {:?}", img.colorspace())));
    }
    Ok(())
}

pub fn histogram(img: &Image, n_bins: usize) -> Result<Vec<u64>> {
    require_gray(img, "histogram")?;
    if n_bins == 0 || 256 % n_bins != 0 {
        return Err(Error::Argument(format!("bin count {n_bins} does not divide 256")));
    }
    let width = 256 / n_bins;
    let mut h = vec![0u64; n_bins];
    for &v in img.data() {
        h[v as usize / width] += 1;
    }
    Ok(h)
}

/// `Σ min(h1, h2) / Σ h1`. Not symmetric when the masses differ.
pub fn histogram_intersection(h1: &[u64], h2: &[u64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::Argument(format!("bin counts differ: {} vs {}", h1.len(), h2.len())));
    }
    let total: u64 = h1.iter().sum();
    if total == 0 {
        return Err(Error::Degenerate("first histogram is empty".into()));
    }
    let common: u64 = h1.iter().zip(h2).map(|(&a, &b)| a.min(b)).sum();
    Ok(common as f64 / total as f64)
}

/// `d(i) = 1 − HI(H(i), H(i + lag))` for every frame with a lagged partner.
pub fn dissimilarity_curve(seq: &FrameSequence, lag: usize, n_bins: usize) -> Result<Vec<f64>> {
    if lag == 0 {
        return Err(Error::Argument("lag must be at least 1".into()));
    }
    let hists = (0..seq.len()).map(|i| histogram(seq.gray(i), n_bins)).collect::<Result<Vec<_>>>()?;
    (0..seq.len().saturating_sub(lag))
        .map(|i| histogram_intersection(&hists[i], &hists[i + lag]).map(|hi| 1.0 - hi))
        .collect()
}

/// Indices strictly above both neighbors. A flat top counts once, at its first
/// index, when both sides of the plateau are lower.
pub fn local_maxima(d: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < d.len() {
        if d[i] > d[i - 1] {
            let mut j = i;
            while j + 1 < d.len() && d[j + 1] == d[i] {
                j += 1;
            }
            if j + 1 < d.len() && d[j + 1] < d[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Local maxima split into consecutive runs of `group`; the argmax of each run
/// (first on ties).
pub fn group_maxima(d: &[f64], maxima: &[usize], group: usize) -> Result<Vec<usize>> {
    if group == 0 {
        return Err(Error::Argument("group must be at least 1".into()));
    }
    Ok(maxima
        .chunks(group)
        .map(|run| run.iter().copied().fold(run[0], |best, i| if d[i] > d[best] { i } else { best }))
        .collect())
}

pub fn key_frame_candidates(seq: &FrameSequence, lag: usize, group: usize, n_bins: usize) -> Result<Vec<usize>> {
    if group == 0 {
        return Err(Error::Argument("group must be at least 1".into()));
    }
    let d = dissimilarity_curve(seq, lag, n_bins)?;
    if d.len() < 3 {
        return Err(Error::SequenceTooShort(format!(
            "{} frames with lag {lag} give {} curve samples, need 3",
            seq.len(),
            d.len()
        )));
    }
    group_maxima(&d, &local_maxima(&d), group)
}

/// The candidate pair whose histograms intersect least; ties go to the
/// earliest pair in scan order.
pub fn pick_two_keyframes(seq: &FrameSequence, candidates: &[usize], n_bins: usize) -> Result<(usize, usize)> {
    if candidates.len() < 2 {
        return Err(Error::InsufficientCandidates(candidates.len()));
    }
    if let Some(&bad) = candidates.iter().find(|&&c| c >= seq.len()) {
        return Err(Error::Argument(format!("candidate {bad} is past the last frame")));
    }
    let hists = candidates.iter().map(|&c| histogram(seq.gray(c), n_bins)).collect::<Result<Vec<_>>>()?;
    let mut best = (f64::INFINITY, candidates[0], candidates[1]);
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            let hi = histogram_intersection(&hists[a], &hists[b])?;
            if hi < best.0 {
                best = (hi, candidates[a], candidates[b]);
            }
        }
    }
    Ok((best.1, best.2))
}

pub fn difference_image(fa: &Image, fb: &Image) -> Result<Image> {
    require_gray(fa, "difference_image")?;
    require_gray(fb, "difference_image")?;
    if !fa.same_size(fb) {
        return Err(Error::Argument(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            fa.width(),
            fa.height(),
            fb.width(),
            fb.height()
        )));
    }
    let data = fa.data().iter().zip(fb.data()).map(|(&a, &b)| a.abs_diff(b)).collect();
    Image::new(fa.width(), fa.height(), ColorSpace::Gray, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionParams {
    /// Difference values at or above this are motion.
    pub threshold: u8,
    pub min_size: usize,
    pub max_regions: usize,
    /// Closing radius applied to the thresholded mask; 0 disables it.
    pub close_radius: usize,
}

impl Default for RegionParams {
    fn default() -> Self {
        Self { threshold: 25, min_size: 40, max_regions: 2, close_radius: 3 }
    }
}

impl RegionParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.max_regions) {
            return Err(Error::Argument(format!("max_regions must be 1 or 2, got {}", self.max_regions)));
        }
        Ok(())
    }
}

fn mask_centroid_x(mask: &BinaryMask) -> f64 {
    let (sum, n) = mask.foreground().fold((0usize, 0usize), |(s, n), (x, _)| (s + x, n + 1));
    sum as f64 / n as f64
}

/// Threshold, label 8-connected regions, drop small ones and keep the largest
/// `max_regions`, ordered left to right by centroid.
pub fn motion_regions(diff: &Image, p: &RegionParams) -> Result<Vec<BinaryMask>> {
    p.validate()?;
    let mut mask = threshold(diff, p.threshold)?;
    if p.close_radius > 0 {
        mask = morphology(&mask, MorphOp::Close, p.close_radius)?;
    }
    let table = connected_components(&mask, Connectivity::Eight);
    let mut regions: Vec<BinaryMask> = table
        .by_size_desc()
        .into_iter()
        .filter(|&id| table.size(id) >= p.min_size)
        .take(p.max_regions)
        .map(|id| table.mask(id))
        .collect();
    if regions.is_empty() {
        return Err(Error::NoMotion { state: None });
    }
    let mut keyed: Vec<(f64, BinaryMask)> = regions.drain(..).map(|m| (mask_centroid_x(&m), m)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(keyed.into_iter().map(|(_, m)| m).collect())
}

/// `[x̄1, ȳ1, x̄2, ȳ2, σx1, σy1, σx2, σy2, |x̄1−x̄2|, |ȳ1−ȳ2|, i1, i2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionVector {
    pub values: [f64; MOTION_DIM],
    pub label: Option<u32>,
}

struct RegionStats {
    x: f64,
    y: f64,
    sx: f64,
    sy: f64,
    intensity: f64,
}

fn region_stats(diff: &Image, region: &BinaryMask) -> Result<RegionStats> {
    let (mut w, mut wx, mut wy, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (x, y) in region.foreground() {
        let d = diff.sample(x, y) as f64;
        w += d;
        wx += d * x as f64;
        wy += d * y as f64;
        n += 1;
    }
    if w == 0.0 {
        return Err(Error::Degenerate("motion region has zero total difference".into()));
    }
    let (cx, cy) = (wx / w, wy / w);
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in region.foreground() {
        let d = diff.sample(x, y) as f64;
        sx += d * (x as f64 - cx).abs();
        sy += d * (y as f64 - cy).abs();
    }
    Ok(RegionStats { x: cx, y: cy, sx: sx / w, sy: sy / w, intensity: w / n as f64 })
}

/// One region fills the second-region slots with zeros, so slots 9 and 10
/// hold the first region's coordinates.
pub fn motion_vector(diff: &Image, regions: &[BinaryMask]) -> Result<MotionVector> {
    require_gray(diff, "motion_vector")?;
    if regions.is_empty() || regions.len() > 2 {
        return Err(Error::Argument(format!("need 1 or 2 regions, got {}", regions.len())));
    }
    if let Some(r) = regions.iter().find(|r| r.width() != diff.width() || r.height() != diff.height()) {
        return Err(Error::Argument(format!("region is {}x{}, difference image differs", r.width(), r.height())));
    }
    let a = region_stats(diff, &regions[0])?;
    let b = match regions.get(1) {
        Some(r) => region_stats(diff, r)?,
        None => RegionStats { x: 0.0, y: 0.0, sx: 0.0, sy: 0.0, intensity: 0.0 },
    };
    Ok(MotionVector {
        values: [a.x, a.y, b.x, b.y, a.sx, a.sy, b.sx, b.sy, (a.x - b.x).abs(), (a.y - b.y).abs(), a.intensity, b.intensity],
        label: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceVector {
    pub states: [MotionVector; STATES],
    pub label: Option<u32>,
}

impl SequenceVector {
    pub fn values(&self) -> Vec<f64> {
        self.states.iter().flat_map(|s| s.values).collect()
    }
}

/// Frame indices `round(j·(N−1)/5)` for `j = 0..=5`.
pub fn state_frames(n: usize) -> [usize; STATES + 1] {
    std::array::from_fn(|j| ((j * (n - 1)) as f64 / STATES as f64).round() as usize)
}

pub fn sequence_vector(seq: &FrameSequence, p: &RegionParams) -> Result<SequenceVector> {
    if seq.len() < STATES + 1 {
        return Err(Error::SequenceTooShort(format!("{} frames, need at least {}", seq.len(), STATES + 1)));
    }
    let idx = state_frames(seq.len());
    let mut states = [MotionVector { values: [0.0; MOTION_DIM], label: None }; STATES];
    for (s, state) in states.iter_mut().enumerate() {
        let diff = difference_image(seq.gray(idx[s]), seq.gray(idx[s + 1]))?;
        let regions = motion_regions(&diff, p).map_err(|e| match e {
            Error::NoMotion { .. } => Error::NoMotion { state: Some(s) },
            other => other,
        })?;
        *state = motion_vector(&diff, &regions)?;
    }
    Ok(SequenceVector { states, label: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    CoAxial,
    BiAxial,
}

pub fn coaxial_split(regions: &[BinaryMask], size_t: usize) -> Result<Axis> {
    let largest = regions
        .iter()
        .map(BinaryMask::count)
        .max()
        .ok_or_else(|| Error::Argument("coaxial split needs at least one region".into()))?;
    Ok(if largest >= size_t { Axis::BiAxial } else { Axis::CoAxial })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicParams {
    pub lag: usize,
    pub group: usize,
    pub bins: usize,
    pub regions: RegionParams,
    pub coaxial_size: usize,
}

impl Default for DynamicParams {
    fn default() -> Self {
        Self { lag: 2, group: 5, bins: 64, regions: RegionParams::default(), coaxial_size: 300 }
    }
}

impl DynamicParams {
    pub fn validate(&self) -> Result<()> {
        if self.lag == 0 || self.group == 0 {
            return Err(Error::Argument("lag and group must be at least 1".into()));
        }
        if self.bins == 0 || 256 % self.bins != 0 {
            return Err(Error::Argument(format!("bin count {} does not divide 256", self.bins)));
        }
        self.regions.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallMotion {
    pub vector: MotionVector,
    pub key_frames: (usize, usize),
    pub axis: Axis,
}

/// Key frames for a short gesture. When grouping leaves fewer than two
/// candidates, every local maximum is offered, then every curve sample.
pub fn select_key_frames(seq: &FrameSequence, p: &DynamicParams) -> Result<(usize, usize)> {
    let d = dissimilarity_curve(seq, p.lag, p.bins)?;
    if d.len() < 3 {
        return Err(Error::SequenceTooShort(format!("{} curve samples, need 3", d.len())));
    }
    let maxima = local_maxima(&d);
    let grouped = group_maxima(&d, &maxima, p.group)?;
    let candidates = if grouped.len() >= 2 {
        grouped
    } else if maxima.len() >= 2 {
        maxima
    } else {
        (0..d.len()).collect()
    };
    pick_two_keyframes(seq, &candidates, p.bins)
}

pub fn small_motion(seq: &FrameSequence, p: &DynamicParams) -> Result<SmallMotion> {
    p.validate()?;
    let (a, b) = select_key_frames(seq, p)?;
    let diff = difference_image(seq.gray(a), seq.gray(b))?;
    let regions = motion_regions(&diff, &p.regions)?;
    let axis = coaxial_split(&regions, p.coaxial_size)?;
    Ok(SmallMotion { vector: motion_vector(&diff, &regions)?, key_frames: (a, b), axis })
}
