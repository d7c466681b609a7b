//! Horn–Schunck optical flow, largest-region tracking and the amplitude gate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamic::FrameSequence;
use crate::error::{Error, Result};
use crate::imaging::{
    connected_components, median_filter, morphology, BBox, BinaryMask, ColorSpace, Connectivity, Image, MorphOp,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, u: vec![0.0; width * height], v: vec![0.0; width * height] }
    }

    pub fn from_parts(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::Argument(format!("flow rasters do not match {width}x{height}")));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::Argument("flow contains non-finite values".into()));
        }
        Ok(Self { width, height, u, v })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        let (u, v) = self.at(x, y);
        u.hypot(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub alpha: f64,
    pub iterations: usize,
    pub vel_threshold: f64,
    pub median_window: usize,
    /// 0 disables the closing step.
    pub close_radius: usize,
    pub min_region: usize,
    pub gate_threshold: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            iterations: 100,
            vel_threshold: 0.5,
            median_window: 5,
            close_radius: 2,
            min_region: 30,
            gate_threshold: 40.0,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Argument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::Argument("iterations must be at least 1".into()));
        }
        if self.median_window < 3 || self.median_window.is_multiple_of(2) {
            return Err(Error::Argument(format!("median window must be odd and at least 3, got {}", self.median_window)));
        }
        if !(self.vel_threshold >= 0.0 && self.gate_threshold >= 0.0) {
            return Err(Error::Argument("thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub ix: Vec<f64>,
    pub iy: Vec<f64>,
    pub it: Vec<f64>,
}

fn check_pair(f1: &Image, f2: &Image) -> Result<()> {
    for f in [f1, f2] {
        if f.colorspace() != ColorSpace::Gray {
            return Err(Error::Precondition(format!("optical flow needs gray frames, got {:?}", f.colorspace())));
        }
    }
    if !f1.same_size(f2) {
        return Err(Error::Argument(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            f1.width(),
            f1.height(),
            f2.width(),
            f2.height()
        )));
    }
    Ok(())
}

/// Averages of four first differences over the 2×2×2 cube at each pixel,
/// with the far row and column clamped to the frame.
pub fn derivatives(f1: &Image, f2: &Image) -> Result<Derivatives> {
    check_pair(f1, f2)?;
    let (w, h) = (f1.width(), f1.height());
    let (a, b) = (f1.data(), f2.data());
    let n = w * h;
    let (mut ix, mut iy, mut it) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in 0..h {
        let y1 = (y + 1).min(h - 1);
        for x in 0..w {
            let x1 = (x + 1).min(w - 1);
            let g = |img: &[u8], xx: usize, yy: usize| img[yy * w + xx] as f64;
            let (a00, a10, a01, a11) = (g(a, x, y), g(a, x1, y), g(a, x, y1), g(a, x1, y1));
            let (b00, b10, b01, b11) = (g(b, x, y), g(b, x1, y), g(b, x, y1), g(b, x1, y1));
            let i = y * w + x;
            ix[i] = 0.25 * ((a10 - a00) + (a11 - a01) + (b10 - b00) + (b11 - b01));
            iy[i] = 0.25 * ((a01 - a00) + (a11 - a10) + (b01 - b00) + (b11 - b10));
            it[i] = 0.25 * ((b00 - a00) + (b10 - a10) + (b01 - a01) + (b11 - a11));
        }
    }
    Ok(Derivatives { ix, iy, it })
}

const W_ORTHO: f64 = 1.0 / 6.0;
const W_DIAG: f64 = 1.0 / 12.0;
const NEIGHBORS: [(isize, isize, f64); 8] = [
    (-1, 0, W_ORTHO),
    (1, 0, W_ORTHO),
    (0, -1, W_ORTHO),
    (0, 1, W_ORTHO),
    (-1, -1, W_DIAG),
    (1, -1, W_DIAG),
    (-1, 1, W_DIAG),
    (1, 1, W_DIAG),
];

/// Copies `src` into a buffer with a one-pixel replicated border.
fn pad_replicate(src: &[f64], w: usize, h: usize, dst: &mut [f64]) {
    let pw = w + 2;
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut dst[(y + 1) * pw..(y + 2) * pw];
        out[1..=w].copy_from_slice(row);
        out[0] = row[0];
        out[w + 1] = row[w - 1];
    }
    dst.copy_within(pw..2 * pw, 0);
    dst.copy_within(h * pw..(h + 1) * pw, (h + 1) * pw);
}

fn neighborhood_average(padded: &[f64], w: usize, h: usize, out: &mut [f64]) {
    let pw = w + 2;
    for y in 0..h {
        let (up, mid, down) = (&padded[y * pw..], &padded[(y + 1) * pw..], &padded[(y + 2) * pw..]);
        let dst = &mut out[y * w..(y + 1) * w];
        for x in 0..w {
            let ortho = mid[x] + mid[x + 2] + up[x + 1] + down[x + 1];
            let diag = up[x] + up[x + 2] + down[x] + down[x + 2];
            dst[x] = W_ORTHO * ortho + W_DIAG * diag;
        }
    }
}

/// Iterative Horn–Schunck solver. Each step reads only the previous field.
#[derive(Debug, Clone)]
pub struct HornSchunck {
    width: usize,
    height: usize,
    alpha: f64,
    d: Derivatives,
    flow: FlowField,
    padded: Vec<f64>,
    ubar: Vec<f64>,
    vbar: Vec<f64>,
}

impl HornSchunck {
    pub fn new(f1: &Image, f2: &Image, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
        }
        let d = derivatives(f1, f2)?;
        let (w, h) = (f1.width(), f1.height());
        Ok(Self {
            width: w,
            height: h,
            alpha,
            d,
            flow: FlowField::zeros(w, h),
            padded: vec![0.0; (w + 2) * (h + 2)],
            ubar: vec![0.0; w * h],
            vbar: vec![0.0; w * h],
        })
    }

    pub fn step(&mut self) {
        let (w, h) = (self.width, self.height);
        pad_replicate(&self.flow.u, w, h, &mut self.padded);
        neighborhood_average(&self.padded, w, h, &mut self.ubar);
        pad_replicate(&self.flow.v, w, h, &mut self.padded);
        neighborhood_average(&self.padded, w, h, &mut self.vbar);
        let a2 = self.alpha * self.alpha;
        let Derivatives { ix, iy, it } = &self.d;
        for i in 0..w * h {
            let (ub, vb) = (self.ubar[i], self.vbar[i]);
            let k = (ix[i] * ub + iy[i] * vb + it[i]) / (a2 + ix[i] * ix[i] + iy[i] * iy[i]);
            self.flow.u[i] = ub - ix[i] * k;
            self.flow.v[i] = vb - iy[i] * k;
        }
    }

    pub fn flow(&self) -> &FlowField {
        &self.flow
    }

    pub fn into_flow(self) -> FlowField {
        self.flow
    }

    /// `Σ (Ix u + Iy v + It)² + α² · ½ Σ_p Σ_q w_pq ((u_p − u_q)² + (v_p − v_q)²)`
    /// over the same clamped 8-neighborhood the solver averages over.
    pub fn energy(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let Derivatives { ix, iy, it } = &self.d;
        let FlowField { u, v, .. } = &self.flow;
        let mut data = 0.0;
        let mut smooth = 0.0;
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                let r = ix[p] * u[p] + iy[p] * v[p] + it[p];
                data += r * r;
                for &(dx, dy, wt) in &NEIGHBORS {
                    let qx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let qy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let q = qy * w + qx;
                    smooth += wt * ((u[p] - u[q]).powi(2) + (v[p] - v[q]).powi(2));
                }
            }
        }
        data + self.alpha * self.alpha * 0.5 * smooth
    }
}

pub fn horn_schunck(f1: &Image, f2: &Image, p: &FlowParams) -> Result<FlowField> {
    if p.iterations == 0 {
        return Err(Error::Argument("iterations must be at least 1".into()));
    }
    let mut solver = HornSchunck::new(f1, f2, p.alpha)?;
    for _ in 0..p.iterations {
        solver.step();
    }
    Ok(solver.into_flow())
}

/// Speed threshold, then median filter, then closing.
pub fn motion_mask(flow: &FlowField, p: &FlowParams) -> Result<BinaryMask> {
    let raw = BinaryMask::from_fn(flow.width, flow.height, |x, y| flow.magnitude(x, y) >= p.vel_threshold);
    let filtered = median_filter(&raw, p.median_window)?;
    if p.close_radius == 0 {
        return Ok(filtered);
    }
    morphology(&filtered, MorphOp::Close, p.close_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackRecord {
    pub bbox: Option<BBox>,
    pub centroid: Option<(f64, f64)>,
    pub area: usize,
}

impl TrackRecord {
    pub fn is_empty(&self) -> bool {
        self.centroid.is_none()
    }
}

fn record_for(mask: &BinaryMask, min_region: usize) -> TrackRecord {
    let table = connected_components(mask, Connectivity::Eight);
    let Some(&id) = table.by_size_desc().first() else {
        return TrackRecord::default();
    };
    if table.size(id) < min_region {
        return TrackRecord::default();
    }
    let (mut sx, mut sy) = (0usize, 0usize);
    let labels = table.labels();
    for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == id) {
        sx += i % mask.width();
        sy += i / mask.width();
    }
    let n = table.size(id);
    TrackRecord {
        bbox: Some(table.bbox(id)),
        centroid: Some((sx as f64 / n as f64, sy as f64 / n as f64)),
        area: n,
    }
}

/// Flow and motion mask for frames `i` and `i + 1`.
pub fn pair_mask(seq: &FrameSequence, i: usize, p: &FlowParams) -> Result<(FlowField, BinaryMask)> {
    let flow = horn_schunck(seq.gray(i), seq.gray(i + 1), p)?;
    let mask = motion_mask(&flow, p)?;
    Ok((flow, mask))
}

/// One record per consecutive frame pair: the largest moving region, or an
/// empty record when nothing large enough moves.
pub fn track(seq: &FrameSequence, p: &FlowParams) -> Result<Vec<TrackRecord>> {
    p.validate()?;
    let records = (0..seq.len() - 1)
        .into_par_iter()
        .map(|i| pair_mask(seq, i, p).map(|(_, mask)| record_for(&mask, p.min_region)))
        .collect::<Result<Vec<_>>>()?;
    if records.iter().all(TrackRecord::is_empty) {
        return Err(Error::NoMotion { state: None });
    }
    Ok(records)
}

pub fn centroid_transition(first: &TrackRecord, last: &TrackRecord) -> Result<f64> {
    match (first.centroid, last.centroid) {
        (Some(a), Some(b)) => Ok((b.0 - a.0).hypot(b.1 - a.1)),
        _ => Err(Error::Argument("centroid transition needs two nonempty records".into())),
    }
}

/// Transition between the first and last nonempty records of a track.
pub fn track_transition(records: &[TrackRecord]) -> Result<f64> {
    let first = records.iter().find(|r| !r.is_empty());
    let last = records.iter().rev().find(|r| !r.is_empty());
    match (first, last) {
        (Some(a), Some(b)) => centroid_transition(a, b),
        _ => Err(Error::NoMotion { state: None }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Small,
    Large,
}

pub fn amplitude_gate(transition: f64, p: &FlowParams) -> Result<GateDecision> {
    if !(transition >= 0.0) {
        return Err(Error::Argument(format!("transition must be non-negative, got {transition}")));
    }
    Ok(if transition < p.gate_threshold { GateDecision::Small } else { GateDecision::Large })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub records: Vec<TrackRecord>,
    pub transition: f64,
    pub decision: GateDecision,
}

pub fn gate_sequence(seq: &FrameSequence, p: &FlowParams) -> Result<GateOutcome> {
    let records = track(seq, p)?;
    let transition = track_transition(&records)?;
    let decision = amplitude_gate(transition, p)?;
    Ok(GateOutcome { records, transition, decision })
}

/// Sample value `128 + 16·c`, rounded and clamped, for each flow component.
pub fn flow_to_images(flow: &FlowField) -> Result<(Image, Image)> {
    let map = |c: &[f64]| c.iter().map(|&x| (128.0 + 16.0 * x).round().clamp(0.0, 255.0) as u8).collect::<Vec<_>>();
    Ok((
        Image::new(flow.width, flow.height, ColorSpace::Gray, map(&flow.u))?,
        Image::new(flow.width, flow.height, ColorSpace::Gray, map(&flow.v))?,
    ))
}
