//! Seeded synthetic gestures with known ground truth.
//!
//! Static samples are RGB hands (palm, finger capsules, forearm) rendered
//! with hard edges on a blue-gray background. Dynamic samples are gray frame
//! sequences of Gaussian blobs moving over a static textured background.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamic::FrameSequence;
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ColorSpace, Image};
use crate::pnm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StaticArchetype {
    Fist,
    Point,
    Victory,
    Three,
    Four,
    Open,
    ThumbPinky,
}

impl StaticArchetype {
    pub const ALL: [StaticArchetype; 7] = [
        StaticArchetype::Fist,
        StaticArchetype::Point,
        StaticArchetype::Victory,
        StaticArchetype::Three,
        StaticArchetype::Four,
        StaticArchetype::Open,
        StaticArchetype::ThumbPinky,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StaticArchetype::Fist => "fist",
            StaticArchetype::Point => "point",
            StaticArchetype::Victory => "victory",
            StaticArchetype::Three => "three",
            StaticArchetype::Four => "four",
            StaticArchetype::Open => "open",
            StaticArchetype::ThumbPinky => "thumb_pinky",
        }
    }

    fn fingers(self) -> &'static [Finger] {
        use Finger::*;
        match self {
            StaticArchetype::Fist => &[Thumb],
            StaticArchetype::Point => &[Index],
            StaticArchetype::Victory => &[Index, Middle],
            StaticArchetype::Three => &[Index, Middle, Ring],
            StaticArchetype::Four => &[Index, Middle, Ring, Pinky],
            StaticArchetype::Open => &[Thumb, Index, Middle, Ring, Pinky],
            StaticArchetype::ThumbPinky => &[Thumb, Pinky],
        }
    }

    /// Finger length factor; a fist only shows a tucked thumb.
    fn reach(self) -> f64 {
        match self {
            StaticArchetype::Fist => 0.5,
            _ => 1.0,
        }
    }

    /// Extra splay in degrees for spread-finger shapes.
    fn splay(self) -> f64 {
        match self {
            StaticArchetype::Victory => 11.0,
            StaticArchetype::Open => 7.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    /// Base point, angle from vertical (degrees, positive leans right),
    /// length and radius in hand units.
    fn geometry(self) -> ((f64, f64), f64, f64, f64) {
        match self {
            Finger::Thumb => ((-19.0, 2.0), -52.0, 28.0, 5.5),
            Finger::Index => ((-14.0, -16.0), -4.0, 38.0, 5.0),
            Finger::Middle => ((-4.5, -16.0), 0.0, 42.0, 5.0),
            Finger::Ring => ((5.0, -16.0), 3.0, 38.0, 5.0),
            Finger::Pinky => ((14.0, -15.0), 8.0, 30.0, 4.5),
        }
    }

    fn splay_sign(self) -> f64 {
        match self {
            Finger::Thumb | Finger::Index => -1.0,
            Finger::Middle => 0.4,
            Finger::Ring | Finger::Pinky => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticSpec {
    pub archetype: StaticArchetype,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Standard deviation of per-sample additive noise, in gray levels.
    pub noise: f64,
    /// Adds a skin-colored head disk away from the hand.
    pub head: bool,
}

impl StaticSpec {
    pub fn new(archetype: StaticArchetype, seed: u64) -> Self {
        Self { archetype, seed, width: 176, height: 144, noise: 2.0, head: seed.is_multiple_of(3) }
    }
}

#[derive(Debug, Clone)]
pub struct StaticSample {
    pub image: Image,
    /// Every skin pixel (hand, forearm and head) as rendered.
    pub mask: BinaryMask,
    pub archetype: StaticArchetype,
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn rounded_rect(p: (f64, f64), hw: f64, hh: f64, r: f64) -> bool {
    let qx = (p.0.abs() - (hw - r)).max(0.0);
    let qy = (p.1.abs() - (hh - r)).max(0.0);
    p.0.abs() <= hw && p.1.abs() <= hh && qx.hypot(qy) <= r
}

struct HandShape {
    fingers: Vec<((f64, f64), (f64, f64), f64)>,
    center: (f64, f64),
    cos: f64,
    sin: f64,
    scale: f64,
}

impl HandShape {
    fn contains(&self, x: f64, y: f64) -> bool {
        // Image to hand coordinates.
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let p = ((self.cos * dx + self.sin * dy) / self.scale, (-self.sin * dx + self.cos * dy) / self.scale);
        if rounded_rect(p, 21.0, 19.0, 5.0) {
            return true;
        }
        if p.0.abs() <= 12.5 && p.1 >= 10.0 {
            return true;
        }
        self.fingers.iter().any(|&(a, b, r)| seg_dist(p, a, b) <= r)
    }
}

pub fn gen_static(spec: &StaticSpec) -> Result<StaticSample> {
    if spec.width < 120 || spec.height < 110 {
        return Err(Error::Argument(format!("static canvas {}x{} is too small", spec.width, spec.height)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0000 ^ (spec.archetype as u64) << 40);
    let splay = spec.archetype.splay();
    let fingers = spec
        .archetype
        .fingers()
        .iter()
        .map(|&f| {
            let (base, angle, len, radius) = f.geometry();
            let a = (angle + splay * f.splay_sign() + rng.gen_range(-4.0..4.0)).to_radians();
            let len = len * spec.archetype.reach() * rng.gen_range(0.92..1.08);
            let tip = (base.0 + len * a.sin(), base.1 - len * a.cos());
            (base, tip, radius)
        })
        .collect();
    let theta = rng.gen_range(-8.0f64..8.0).to_radians();
    let shape = HandShape {
        fingers,
        center: (
            spec.width as f64 / 2.0 + rng.gen_range(-10.0..10.0),
            spec.height as f64 * 0.58 + rng.gen_range(-4.0..4.0),
        ),
        cos: theta.cos(),
        sin: theta.sin(),
        scale: rng.gen_range(0.9..1.06),
    };
    let skin = [rng.gen_range(212.0..228.0), rng.gen_range(158.0..172.0), rng.gen_range(122.0..138.0)];
    let back = [rng.gen_range(44.0..56.0), rng.gen_range(54.0..62.0), rng.gen_range(74.0..86.0)];
    let head = spec.head.then(|| (spec.width as f64 - 26.0, 26.0, rng.gen_range(16.0..20.0)));
    let noise = Normal::new(0.0, spec.noise.max(0.0)).map_err(|e| Error::Argument(e.to_string()))?;

    let mask = BinaryMask::from_fn(spec.width, spec.height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        shape.contains(fx, fy) || head.is_some_and(|(hx, hy, r)| (fx - hx).hypot(fy - hy) <= r)
    });
    let mut data = Vec::with_capacity(spec.width * spec.height * 3);
    for (i, &on) in mask.bits().iter().enumerate() {
        let base = if on { skin } else { back };
        let shade = if on { 0.0 } else { 8.0 * (i % spec.width) as f64 / spec.width as f64 };
        for c in base {
            let n = if spec.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            data.push((c + shade + n).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(StaticSample { image: Image::new(spec.width, spec.height, ColorSpace::Rgb, data)?, mask, archetype: spec.archetype })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmallArchetype {
    ByeBoth,
    ByeRight,
    ByeLeft,
    Stop,
    Nod,
    Shake,
}

impl SmallArchetype {
    pub const ALL: [SmallArchetype; 6] = [
        SmallArchetype::ByeBoth,
        SmallArchetype::ByeRight,
        SmallArchetype::ByeLeft,
        SmallArchetype::Stop,
        SmallArchetype::Nod,
        SmallArchetype::Shake,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SmallArchetype::ByeBoth => "bye_both",
            SmallArchetype::ByeRight => "bye_right",
            SmallArchetype::ByeLeft => "bye_left",
            SmallArchetype::Stop => "stop",
            SmallArchetype::Nod => "yes_nod",
            SmallArchetype::Shake => "no_shake",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LargeArchetype {
    SweepRight,
    SweepLeft,
    RaiseUp,
    LowerDown,
    DiagDownRight,
    DiagUpLeft,
    DiagUpRight,
    DiagDownLeft,
    Arc,
}

impl LargeArchetype {
    pub const ALL: [LargeArchetype; 9] = [
        LargeArchetype::SweepRight,
        LargeArchetype::SweepLeft,
        LargeArchetype::RaiseUp,
        LargeArchetype::LowerDown,
        LargeArchetype::DiagDownRight,
        LargeArchetype::DiagUpLeft,
        LargeArchetype::DiagUpRight,
        LargeArchetype::DiagDownLeft,
        LargeArchetype::Arc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LargeArchetype::SweepRight => "sweep_right",
            LargeArchetype::SweepLeft => "sweep_left",
            LargeArchetype::RaiseUp => "raise_up",
            LargeArchetype::LowerDown => "lower_down",
            LargeArchetype::DiagDownRight => "diag_down_right",
            LargeArchetype::DiagUpLeft => "diag_up_left",
            LargeArchetype::DiagUpRight => "diag_up_right",
            LargeArchetype::DiagDownLeft => "diag_down_left",
            LargeArchetype::Arc => "arc",
        }
    }

    /// Start and end in unit-square coordinates; the arc passes over the top.
    fn endpoints(self) -> ((f64, f64), (f64, f64)) {
        let (l, r, t, b, cx, cy) = (0.19, 0.81, 0.17, 0.83, 0.5, 0.5);
        match self {
            LargeArchetype::SweepRight | LargeArchetype::Arc => ((l, cy), (r, cy)),
            LargeArchetype::SweepLeft => ((r, cy), (l, cy)),
            LargeArchetype::RaiseUp => ((cx, b), (cx, t)),
            LargeArchetype::LowerDown => ((cx, t), (cx, b)),
            LargeArchetype::DiagDownRight => ((l, t), (r, b)),
            LargeArchetype::DiagUpLeft => ((r, b), (l, t)),
            LargeArchetype::DiagUpRight => ((l, b), (r, t)),
            LargeArchetype::DiagDownLeft => ((r, t), (l, b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionArchetype {
    Small(SmallArchetype),
    Large(LargeArchetype),
}

impl MotionArchetype {
    pub fn name(self) -> &'static str {
        match self {
            MotionArchetype::Small(a) => a.name(),
            MotionArchetype::Large(a) => a.name(),
        }
    }

    pub fn is_large(self) -> bool {
        matches!(self, MotionArchetype::Large(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    pub archetype: MotionArchetype,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub noise: f64,
    /// Amplitude of the static background texture, in gray levels.
    pub texture: f64,
}

impl SequenceSpec {
    pub fn new(archetype: MotionArchetype, seed: u64) -> Self {
        Self { archetype, seed, width: 160, height: 120, n_frames: 21, noise: 2.0, texture: 20.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: FrameSequence,
    /// Center of the primary (largest) mover in each frame.
    pub path: Vec<(f64, f64)>,
    /// Distance between the first and last path points.
    pub transition: f64,
    pub archetype: MotionArchetype,
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
    amplitude: f64,
}

struct MotionPlan {
    archetype: MotionArchetype,
    jitter: (f64, f64),
    amp: f64,
    phase: f64,
    sigma: f64,
    width: f64,
    height: f64,
}

impl MotionPlan {
    /// Movers at normalized time `t` in [0, 1]; the first is the primary one.
    fn blobs(&self, t: f64) -> Vec<Blob> {
        let (w, h) = (self.width, self.height);
        let (jx, jy) = self.jitter;
        let wave = (2.0 * PI * 2.0 * t + self.phase).sin();
        let hand = |x: f64, y: f64, sigma: f64| Blob { x: x + jx, y: y + jy, sigma, amplitude: 120.0 };
        match self.archetype {
            MotionArchetype::Small(a) => {
                // Rotating hands and heads foreshorten in step with the swing.
                let turn = 1.0 + 0.2 * wave;
                let head_turn = 1.0 + 0.2 * wave;
                match a {
                    SmallArchetype::ByeBoth => vec![
                        hand(0.31 * w + self.amp * wave, 0.5 * h, (self.sigma + 1.5) * turn),
                        hand(0.70 * w - self.amp * wave, 0.5 * h, (self.sigma - 1.0) * turn),
                    ],
                    SmallArchetype::ByeRight => vec![hand(0.70 * w + self.amp * wave, 0.46 * h, self.sigma * turn)],
                    SmallArchetype::ByeLeft => vec![hand(0.30 * w + self.amp * wave, 0.46 * h, self.sigma * turn)],
                    SmallArchetype::Stop => vec![hand(0.5 * w, 0.55 * h, self.sigma + 2.5 * wave)],
                    SmallArchetype::Nod => vec![Blob {
                        x: 0.5 * w + jx,
                        y: 0.27 * h + jy + 0.45 * self.amp * wave,
                        sigma: 6.0 * head_turn,
                        amplitude: 105.0,
                    }],
                    SmallArchetype::Shake => vec![Blob {
                        x: 0.5 * w + jx + 0.45 * self.amp * wave,
                        y: 0.27 * h + jy,
                        sigma: 6.0 * head_turn,
                        amplitude: 105.0,
                    }],
                }
            }
            MotionArchetype::Large(a) => {
                let ((x0, y0), (x1, y1)) = a.endpoints();
                let (x, y) = match a {
                    LargeArchetype::Arc => {
                        let ang = PI * (1.0 - t);
                        (0.5 + 0.31 * ang.cos(), 0.62 - 0.45 * ang.sin())
                    }
                    _ => (x0 + (x1 - x0) * t, y0 + (y1 - y0) * t),
                };
                vec![hand(x * w, y * h, self.sigma)]
            }
        }
    }
}

pub fn gen_sequence(spec: &SequenceSpec) -> Result<SyntheticSequence> {
    if spec.n_frames < 6 {
        return Err(Error::SequenceTooShort(format!("{} frames, need at least 6", spec.n_frames)));
    }
    if spec.width < 64 || spec.height < 48 {
        return Err(Error::Argument(format!("sequence canvas {}x{} is too small", spec.width, spec.height)));
    }
    // Jitter depends on the seed only, so one person moves alike across gestures.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xd1_0000);
    let plan = MotionPlan {
        archetype: spec.archetype,
        jitter: (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
        amp: rng.gen_range(11.0..15.0),
        phase: rng.gen_range(0.0..2.0 * PI),
        sigma: rng.gen_range(6.5..7.5),
        width: spec.width as f64,
        height: spec.height as f64,
    };
    let noise = Normal::new(0.0, spec.noise.max(0.0)).map_err(|e| Error::Argument(e.to_string()))?;
    let (w, h) = (spec.width, spec.height);
    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut path = Vec::with_capacity(spec.n_frames);
    for i in 0..spec.n_frames {
        let t = i as f64 / (spec.n_frames - 1) as f64;
        let blobs = plan.blobs(t);
        path.push((blobs[0].x, blobs[0].y));
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (fx, fy) = (x as f64, y as f64);
                let mut v = 30.0
                    + 0.35 * fx
                    + 0.25 * fy
                    + spec.texture * 0.5 * ((0.9 * fx + 0.3 * fy).sin() + (0.35 * fx - 0.8 * fy).cos());
                for b in &blobs {
                    let r2 = (fx - b.x).powi(2) + (fy - b.y).powi(2);
                    v += b.amplitude * (-r2 / (2.0 * b.sigma * b.sigma)).exp();
                }
                if spec.noise > 0.0 {
                    v += noise.sample(&mut rng);
                }
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        frames.push(Image::new(w, h, ColorSpace::Gray, data)?);
    }
    let (a, b) = (path[0], path[spec.n_frames - 1]);
    Ok(SyntheticSequence {
        frames: FrameSequence::new(frames)?,
        transition: (b.0 - a.0).hypot(b.1 - a.1),
        path,
        archetype: spec.archetype,
    })
}

/// Class names in label order: static shapes, then small motions, then large.
pub fn corpus_names() -> Vec<String> {
    StaticArchetype::ALL
        .iter()
        .map(|a| a.name())
        .chain(SmallArchetype::ALL.iter().map(|a| a.name()))
        .chain(LargeArchetype::ALL.iter().map(|a| a.name()))
        .map(String::from)
        .collect()
}

/// Seed of variant `v`; variants stand in for different people.
pub fn variant_seed(base: u64, v: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(v as u64 * 7919 + 1)
}

/// Writes `static/`, `small/` and `large/` trees under `root`, each laid out
/// as `<class>/<person>/<sample>`. Static samples are PPM files; dynamic
/// samples are directories of numbered PGM frames.
pub fn write_dataset(root: &Path, variants: usize, base_seed: u64) -> Result<()> {
    for a in StaticArchetype::ALL {
        for v in 0..variants {
            let dir = root.join("static").join(a.name()).join(format!("p{:02}", v + 1));
            fs::create_dir_all(&dir)?;
            let s = gen_static(&StaticSpec::new(a, variant_seed(base_seed, v)))?;
            pnm::write_image(dir.join("sample_01.ppm"), &s.image)?;
        }
    }
    let motions = SmallArchetype::ALL
        .iter()
        .map(|&a| ("small", MotionArchetype::Small(a)))
        .chain(LargeArchetype::ALL.iter().map(|&a| ("large", MotionArchetype::Large(a))));
    for (group, a) in motions {
        for v in 0..variants {
            let dir = root.join(group).join(a.name()).join(format!("p{:02}", v + 1)).join("sample_01");
            write_frames(&dir, &gen_sequence(&SequenceSpec::new(a, variant_seed(base_seed, v)))?.frames)?;
        }
    }
    Ok(())
}

pub fn write_frames(dir: &Path, seq: &FrameSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in seq.frames().iter().enumerate() {
        let ext = if f.channels() == 1 { "pgm" } else { "ppm" };
        pnm::write_image(dir.join(format!("frame_{:04}.{ext}", i + 1)), f)?;
    }
    Ok(())
}
