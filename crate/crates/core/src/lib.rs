//! Hand gesture recognition toolkit.
//!
//! The crate covers the whole chain from raw frames to a robot command:
//!
//! * [`imaging`]: rasters, color conversion, resampling, labeling, morphology.
//! * [`skin`]: gray-world light compensation and YCbCr skin masks.
//! * [`hand`] and [`contour`]: chamfer distance transform, feature pixels,
//!   hand selection, wrist cut, recentering and contour smoothing.
//! * [`moments`]: geometric moments and the 7-element static shape vector.
//! * [`dynamic`]: key frames, difference images and motion descriptors.
//! * [`flow`]: Horn-Schunck optical flow, tracking and the amplitude gate.
//! * [`classifier`]: KNN voting and k-fold cross-validation.
//! * [`control`]: the one-hot control vector codec, TCP client and mock robot.
//! * [`synth`]: deterministic synthetic gestures with ground truth.
//! * [`pipeline`] and [`dataset`]: end-to-end orchestration and file layout.

pub mod classifier;
pub mod contour;
pub mod control;
pub mod dataset;
pub mod dynamic;
pub mod error;
pub mod flow;
pub mod hand;
pub mod imaging;
pub mod moments;
pub mod pipeline;
pub mod pnm;
pub mod skin;
pub mod synth;

pub use error::{Error, Result};
pub use imaging::{BinaryMask, ColorSpace, Image};
