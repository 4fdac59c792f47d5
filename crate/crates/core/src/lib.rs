//! Cardio-respiratory vitals from near-infrared sleep video.
//!
//! The pipeline exploits spatial redundancy: the frame is cut into
//! multi-scale blocks, every block yields a PPG trace (spatial mean) and a
//! motion trace (block-wise optical flow), sliding-window power spectra are
//! scored by SNR, and the best blocks are fused into global signals from
//! which heart rate and respiratory rate are read. Defocus blur is modelled
//! as a disc point-spread function so the whole chain can be exercised on
//! synthetic scenes with known ground truth, including the privacy-preserving
//! blurry regime.

pub mod error;
pub mod eval;
pub mod flow;
pub mod fuse;
pub mod grid;
pub mod interp;
pub mod optics;
pub mod ppg;
pub mod spectra;
pub mod synth;
pub mod vidio;

pub use error::{Error, Result};
