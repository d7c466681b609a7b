//! End-to-end recognition: configuration, the static chain, the dynamic
//! gate and routing, and classification against stored databases.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{GestureDatabase, KnnParams, Kind, Prediction};
use crate::dynamic::{sequence_vector, small_motion, DynamicParams, FrameSequence, SmallMotion};
use crate::error::{Error, Result};
use crate::flow::{gate_sequence, FlowParams, GateDecision, GateOutcome};
use crate::hand::{chamfer_dt, feature_pixels, recenter, select_hand, wrist_cut, HandParams};
use crate::imaging::{rgb_to_ycbcr, BinaryMask, ColorSpace, Image};
use crate::moments::{static_vector_with, ShapeOptions, StaticVector};
use crate::pnm;
use crate::skin::{filter_noise, gray_world, skin_mask, SkinParams};
use crate::synth::corpus_names;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    #[serde(flatten)]
    pub knn: KnnParams,
    pub folds: usize,
    pub seed: u64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self { knn: KnnParams::default(), folds: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub skin: SkinParams,
    pub hand: HandParams,
    pub shape: ShapeOptions,
    pub flow: FlowParams,
    pub dynamic: DynamicParams,
    pub classifier: ClassifierParams,
    /// Class names; label `i` names `gesture_names[i - 1]`. Dataset class
    /// directories are matched against this list.
    pub gesture_names: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            skin: SkinParams::default(),
            hand: HandParams::default(),
            shape: ShapeOptions::default(),
            flow: FlowParams::default(),
            dynamic: DynamicParams::default(),
            classifier: ClassifierParams::default(),
            gesture_names: corpus_names(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.skin.validate()?;
        self.hand.validate()?;
        self.flow.validate()?;
        self.dynamic.validate()?;
        if self.classifier.knn.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if let Some(w) = self.shape.smooth_window {
            if w < 3 || w % 2 == 0 {
                return Err(Error::Argument(format!("smoothing window must be odd and at least 3, got {w}")));
            }
        }
        if self.gesture_names.is_empty() {
            return Err(Error::Argument("gesture_names is empty".into()));
        }
        for (i, n) in self.gesture_names.iter().enumerate() {
            if self.gesture_names[..i].contains(n) {
                return Err(Error::Argument(format!("duplicate gesture name {n:?}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn label_name(&self, label: u32) -> Option<&str> {
        (label as usize).checked_sub(1).and_then(|i| self.gesture_names.get(i)).map(String::as_str)
    }

    pub fn label_of(&self, name: &str) -> Option<u32> {
        self.gesture_names.iter().position(|n| n == name).map(|i| i as u32 + 1)
    }
}

/// Writes named intermediate images when a dump directory is set.
struct Dumper<'a>(Option<&'a Path>);

impl Dumper<'_> {
    fn image(&self, name: &str, img: &Image) -> Result<()> {
        match self.0 {
            Some(dir) => pnm::write_image(dir.join(name), img),
            None => Ok(()),
        }
    }

    fn mask(&self, name: &str, mask: &BinaryMask) -> Result<()> {
        match self.0 {
            Some(dir) => pnm::write_mask(dir.join(name), mask),
            None => Ok(()),
        }
    }
}

pub const DUMP_SKIN: &str = "02_skin.pgm";
pub const DUMP_FILTERED: &str = "03_filtered.pgm";
pub const DUMP_HAND: &str = "04_hand.pgm";
pub const DUMP_CUT: &str = "05_cut.pgm";
pub const DUMP_RECENTERED: &str = "06_recentered.pgm";

/// RGB image to static shape vector. Intermediate images go to `dump_dir`.
pub fn static_features(img: &Image, cfg: &PipelineConfig, dump_dir: Option<&Path>) -> Result<StaticVector> {
    let dump = Dumper(dump_dir);
    if let Some(dir) = dump_dir {
        std::fs::create_dir_all(dir)?;
    }
    if img.colorspace() != ColorSpace::Rgb {
        return Err(Error::in_stage("input")(Error::Precondition(format!(
            "static recognition needs an RGB image, got {:?}",
            img.colorspace()
        ))));
    }
    let balanced = if cfg.skin.apply_gray_world {
        let b = gray_world(img).map_err(Error::in_stage("gray_world"))?;
        dump.image("01_balanced.ppm", &b)?;
        b
    } else {
        img.clone()
    };
    let ycc = rgb_to_ycbcr(&balanced).map_err(Error::in_stage("rgb_to_ycbcr"))?;
    let raw = skin_mask(&ycc, &cfg.skin).map_err(Error::in_stage("skin_mask"))?;
    dump.mask(DUMP_SKIN, &raw)?;
    let filtered = filter_noise(&raw, &cfg.skin);
    dump.mask(DUMP_FILTERED, &filtered)?;
    static_features_from_skin(&filtered, cfg, dump_dir)
}

/// Resumes the static chain from a cleaned skin mask.
pub fn static_features_from_skin(skin: &BinaryMask, cfg: &PipelineConfig, dump_dir: Option<&Path>) -> Result<StaticVector> {
    let dump = Dumper(dump_dir);
    let feats = feature_pixels(&chamfer_dt(skin));
    let hand = select_hand(skin, &feats, &cfg.hand).map_err(Error::in_stage("select_hand"))?;
    dump.mask(DUMP_HAND, &hand)?;
    let hand_feats = feature_pixels(&chamfer_dt(&hand));
    let cut = wrist_cut(&hand, &cfg.hand, &hand_feats).map_err(Error::in_stage("wrist_cut"))?;
    dump.mask(DUMP_CUT, &cut)?;
    let centered = recenter(&cut, cfg.hand.frame_size).map_err(Error::in_stage("recenter"))?;
    dump.mask(DUMP_RECENTERED, &centered)?;
    static_features_from_hand(&centered, cfg)
}

/// Shape vector of an already extracted hand mask.
pub fn static_features_from_hand(hand: &BinaryMask, cfg: &PipelineConfig) -> Result<StaticVector> {
    static_vector_with(hand, &cfg.shape).map_err(Error::in_stage("static_vector"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    pub vector: Vec<f64>,
    pub prediction: Prediction,
    pub name: Option<String>,
}

fn classify(db: &GestureDatabase, vector: Vec<f64>, cfg: &PipelineConfig) -> Result<Recognition> {
    let norm = db.normalize().map_err(Error::in_stage("classify"))?;
    let knn = KnnParams { k: cfg.classifier.knn.k.min(norm.len()), ..cfg.classifier.knn.clone() };
    let prediction = norm.classify(&vector, &knn).map_err(Error::in_stage("classify"))?;
    let name = cfg.label_name(prediction.label).map(str::to_owned);
    Ok(Recognition { vector, prediction, name })
}

fn require_kind(db: &GestureDatabase, kind: Kind) -> Result<()> {
    if db.kind() != kind {
        return Err(Error::Database(format!("expected a {} database, got {}", kind.name(), db.kind().name())));
    }
    Ok(())
}

pub fn run_static(img: &Image, db: &GestureDatabase, cfg: &PipelineConfig, dump_dir: Option<&Path>) -> Result<Recognition> {
    require_kind(db, Kind::Static7)?;
    let v = static_features(img, cfg, dump_dir)?;
    classify(db, v.values.to_vec(), cfg)
}

pub fn small_features(seq: &FrameSequence, cfg: &PipelineConfig) -> Result<SmallMotion> {
    small_motion(seq, &cfg.dynamic).map_err(Error::in_stage("small_motion"))
}

pub fn large_features(seq: &FrameSequence, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    cfg.dynamic.validate()?;
    Ok(sequence_vector(seq, &cfg.dynamic.regions).map_err(Error::in_stage("sequence_vector"))?.values())
}

pub fn gate(seq: &FrameSequence, cfg: &PipelineConfig) -> Result<GateOutcome> {
    gate_sequence(seq, &cfg.flow).map_err(Error::in_stage("gate"))
}

pub const MIN_DYNAMIC_FRAMES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRecognition {
    pub gate: GateOutcome,
    pub kind: Kind,
    pub recognition: Recognition,
}

/// Gates the sequence, then classifies it with the database matching the
/// decision: small motions use two-key-frame vectors, large motions use
/// five-state vectors.
pub fn run_dynamic(seq: &FrameSequence, dbs: &[GestureDatabase], cfg: &PipelineConfig) -> Result<DynamicRecognition> {
    if seq.len() < MIN_DYNAMIC_FRAMES {
        return Err(Error::SequenceTooShort(format!("{} frames, need at least {MIN_DYNAMIC_FRAMES}", seq.len())));
    }
    let gated = gate(seq, cfg)?;
    let kind = match gated.decision {
        GateDecision::Small => Kind::Dynamic12,
        GateDecision::Large => Kind::Sequence60,
    };
    let db = dbs
        .iter()
        .find(|d| d.kind() == kind)
        .ok_or_else(|| Error::Database(format!("motion gated {:?} but no {} database was given", gated.decision, kind.name())))?;
    let vector = match kind {
        Kind::Dynamic12 => small_features(seq, cfg)?.vector.values.to_vec(),
        _ => large_features(seq, cfg)?,
    };
    Ok(DynamicRecognition { gate: gated, kind, recognition: classify(db, vector, cfg)? })
}

/// Feature vector of one dataset sample for the given database kind.
pub fn sample_vector(kind: Kind, path: &Path, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    match kind {
        Kind::Static7 => {
            let img = pnm::read_image(path).map_err(Error::in_stage("read"))?;
            Ok(static_features(&img, cfg, None)?.values.to_vec())
        }
        Kind::Dynamic12 => {
            let seq = crate::dataset::load_frames(path).map_err(Error::in_stage("read"))?;
            Ok(small_features(&seq, cfg)?.vector.values.to_vec())
        }
        Kind::Sequence60 => {
            let seq = crate::dataset::load_frames(path).map_err(Error::in_stage("read"))?;
            large_features(&seq, cfg)
        }
    }
}

/// Writes `u_NNNN.pgm`, `v_NNNN.pgm` and `mask_NNNN.pgm` for every frame
/// pair and returns the written paths.
pub fn flow_dump(seq: &FrameSequence, cfg: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for i in 0..seq.len() - 1 {
        let (flow, mask) = crate::flow::pair_mask(seq, i, &cfg.flow).map_err(Error::in_stage("flow"))?;
        let (u, v) = crate::flow::flow_to_images(&flow)?;
        for (name, img) in [("u", u), ("v", v), ("mask", mask.to_image())] {
            let path = dir.join(format!("{name}_{:04}.pgm", i + 1));
            pnm::write_image(&path, &img)?;
            written.push(path);
        }
    }
    Ok(written)
}
