//! On-disk dataset layout and database construction.
//!
//! ```text
//! <root>/<class>/<person>/<sample>.ppm        static
//! <root>/<class>/<person>/<sample>/*.pgm      dynamic, one file per frame
//! ```
//!
//! Class directories are matched against the configured gesture names; the
//! label of a sample is the 1-based position of its class name.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classifier::{GestureDatabase, Kind};
use crate::dynamic::FrameSequence;
use crate::error::{Error, Result};
use crate::pipeline::{sample_vector, PipelineConfig};
use crate::pnm;

fn is_frame_file(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
            .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Frames of a directory, in file-name order.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let files: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| is_frame_file(p)).collect();
    if files.is_empty() {
        return Err(Error::SequenceTooShort(format!("no frames in {}", dir.display())));
    }
    let frames = files.iter().map(pnm::read_image).collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub label: u32,
    pub class: String,
    pub person: String,
    pub path: PathBuf,
}

/// Lists samples under `root`. Static samples are image files; dynamic
/// samples are directories. Unknown class directories are skipped.
pub fn scan(root: impl AsRef<Path>, kind: Kind, cfg: &PipelineConfig) -> Result<Vec<Sample>> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Argument(format!("{} is not a directory", root.display())));
    }
    let mut out = Vec::new();
    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let class = class_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let Some(label) = cfg.label_of(&class) else {
            log::warn!("skipping unknown class directory {}", class_dir.display());
            continue;
        };
        for person_dir in sorted_entries(&class_dir)?.into_iter().filter(|p| p.is_dir()) {
            let person = person_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            for path in sorted_entries(&person_dir)? {
                let is_sample = match kind {
                    Kind::Static7 => is_frame_file(&path),
                    _ => path.is_dir(),
                };
                if is_sample {
                    out.push(Sample { label, class: class.clone(), person: person.clone(), path });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct IngestReport {
    pub ok: usize,
    pub failures: Vec<(PathBuf, Error)>,
}

/// Extracts every sample under `root` into a database. Samples that fail are
/// reported and left out; having no usable sample at all is an error.
pub fn build_db(root: impl AsRef<Path>, kind: Kind, cfg: &PipelineConfig) -> Result<(GestureDatabase, IngestReport)> {
    cfg.validate()?;
    let root = root.as_ref();
    let samples = scan(root, kind, cfg)?;
    let results: Vec<_> = samples.par_iter().map(|s| sample_vector(kind, &s.path, cfg)).collect();
    let mut db = GestureDatabase::new(kind);
    let mut failures = Vec::new();
    for (s, r) in samples.into_iter().zip(results) {
        match r {
            Ok(features) => db.push(features, s.label, Some(s.person))?,
            Err(e) => {
                log::warn!("{}: {e}", s.path.display());
                failures.push((s.path, e));
            }
        }
    }
    if db.is_empty() {
        return Err(Error::Database(format!(
            "no usable {} samples under {} ({} failed)",
            kind.name(),
            root.display(),
            failures.len()
        )));
    }
    let ok = db.len();
    Ok((db, IngestReport { ok, failures }))
}
