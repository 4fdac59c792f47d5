//! Per-block PPG extraction from the single IR channel: spatial mean per
//! frame, then per-analysis-window AC/DC normalization and linear detrend.
//! AC/DC makes traces comparable across blocks with different DC, which the
//! SNR-weighted fusion relies on.

use crate::error::{Error, Result};
use crate::grid::{block_mean, Block};
use crate::vidio::VideoClip;

/// DC below this is treated as near-black; the window is unusable.
pub const MIN_USABLE_DC: f64 = 1.0;

/// Raw per-block intensity trace. Normalization happens per analysis
/// window via [`PpgTrace::window_norm`] because sliding windows overlap.
#[derive(Debug, Clone)]
pub struct PpgTrace {
    pub block_id: usize,
    pub c_raw: Vec<f64>,
}

/// One normalized window of a PPG trace.
#[derive(Debug, Clone)]
pub struct PpgWindow {
    pub samples: Vec<f64>,
    /// False when the window's DC was near-black.
    pub usable: bool,
}

impl PpgTrace {
    /// AC/DC-normalize and linearly detrend the window starting at `start`.
    pub fn window_norm(&self, start: usize, len: usize) -> Result<PpgWindow> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.c_raw.len())
            .ok_or_else(|| Error::Bounds(format!("window [{start}, +{len}) outside trace")))?;
        if len == 0 {
            return Err(Error::Config("empty normalization window".into()));
        }
        let seg = &self.c_raw[start..end];
        let mean = seg.iter().sum::<f64>() / len as f64;
        if mean < MIN_USABLE_DC {
            return Ok(PpgWindow {
                samples: vec![0.0; len],
                usable: false,
            });
        }
        let acdc: Vec<f64> = seg.iter().map(|&v| (v - mean) / mean).collect();
        Ok(PpgWindow {
            samples: detrend_linear(&acdc),
            usable: true,
        })
    }
}

/// Spatial mean of the block in every frame, concatenated in time.
pub fn extract_trace(clip: &VideoClip, block: &Block) -> Result<PpgTrace> {
    if clip.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if block.x0 + block.size > clip.width() || block.y0 + block.size > clip.height() {
        return Err(Error::Bounds(format!(
            "block at ({}, {}) size {} outside {}x{} frame",
            block.x0,
            block.y0,
            block.size,
            clip.width(),
            clip.height()
        )));
    }
    let c_raw = clip.frames.iter().map(|f| block_mean(f, block)).collect();
    Ok(PpgTrace { block_id: 0, c_raw })
}

/// Remove the least-squares line; preserves zero mean.
pub fn detrend_linear(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return x.iter().map(|_| 0.0).collect();
    }
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        num += dt * (v - x_mean);
        den += dt * dt;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    x.iter()
        .enumerate()
        .map(|(i, &v)| v - x_mean - slope * (i as f64 - t_mean))
        .collect()
}
