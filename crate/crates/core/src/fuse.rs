//! SNR heatmaps, automatic RoI selection, local-to-global combination,
//! motion gating and per-window HR/RR estimation.
//!
//! Pulsatile-skin detection is realized as SNR-threshold selection on the
//! PPG heatmap; breath blocks come from the motion heatmap with the better
//! of the dx/dy axes per block. Gating uses the whole-frame mean motion:
//! per-block metrics would trip on local noise while the target is gross
//! body movement.

use crate::error::{Error, Result};
use crate::flow::{self, MotionTrace};
use crate::grid::{self, BlockGrid};
use crate::ppg::{self, PpgTrace};
use crate::spectra::{
    band_peak, single_spectrum, snr_db, Band, Spectrum, TraceKind, WindowPlan, SNR_FLOOR_DB,
};
use crate::vidio::VideoClip;
use rayon::prelude::*;
use serde::Serialize;

/// Whole pipeline configuration; defaults follow the CLI surface.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub scales: Vec<u32>,
    pub window_s: f64,
    pub hop_s: f64,
    pub hr_band: Band,
    pub rr_band: Band,
    /// Up to this many blocks are fused per modality.
    pub roi_k: usize,
    /// Selection floor in dB.
    pub min_snr_db: f64,
    pub gating: GatingConfig,
    pub max_displacement: f64,
    /// Use the arctangent trace for respiration instead of the dx/dy axes.
    pub rr_from_theta: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scales: grid::DEFAULT_SCALES.to_vec(),
            window_s: 10.0,
            hop_s: 1.0,
            hr_band: Band::hr_default(),
            rr_band: Band::rr_default(),
            roi_k: 10,
            min_snr_db: 0.0,
            gating: GatingConfig::default(),
            max_displacement: flow::DEFAULT_MAX_DISPLACEMENT,
            rr_from_theta: false,
        }
    }
}

/// Motion-intensity bound above which a window is excluded as non-sleep
/// movement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingConfig {
    pub threshold: f64,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig { threshold: 1.0 }
    }
}

impl GatingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!(
                "gate threshold must be positive, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    PpgHr,
    MotionRr,
}

/// Per-block SNR for one window and one modality.
#[derive(Debug, Clone)]
pub struct SnrHeatmap {
    pub window_index: usize,
    pub modality: Modality,
    /// One value per grid block, floored at -40 dB.
    pub snr_db: Vec<f64>,
    /// For motion_rr: which axis won per block.
    pub axis: Option<Vec<TraceKind>>,
}

/// Per-window estimate record; the CLI serializes these as NDJSON.
#[derive(Debug, Clone, Serialize)]
pub struct VitalEstimate {
    pub window_index: usize,
    pub t_center_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_bpm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rr_bpm: Option<f64>,
    pub hr_quality_db: f64,
    pub rr_quality_db: f64,
    pub gated: bool,
    pub motion_intensity: f64,
}

/// Spectra of one block's traces within one window.
#[derive(Debug, Clone)]
pub struct BlockWindowSpectra {
    pub block_id: usize,
    /// None when the PPG window was unusable (near-black DC).
    pub ppg: Option<Spectrum>,
    pub dx: Spectrum,
    pub dy: Spectrum,
    pub theta: Option<Spectrum>,
}

/// Build the per-block SNR heatmap for one modality. Every grid block must
/// be present exactly once, in grid order.
pub fn build_heatmap(
    spectra: &[BlockWindowSpectra],
    n_blocks: usize,
    band: &Band,
    modality: Modality,
    window_index: usize,
) -> Result<SnrHeatmap> {
    if spectra.len() != n_blocks {
        return Err(Error::IncompleteInput(format!(
            "{} block spectra for a {} block grid",
            spectra.len(),
            n_blocks
        )));
    }
    for (i, s) in spectra.iter().enumerate() {
        if s.block_id != i {
            return Err(Error::IncompleteInput(format!(
                "block {} found at position {i}",
                s.block_id
            )));
        }
    }

    let mut snr = Vec::with_capacity(n_blocks);
    let mut axis = Vec::with_capacity(n_blocks);
    for s in spectra {
        match modality {
            Modality::PpgHr => {
                let v = match &s.ppg {
                    Some(spec) => snr_db(spec, band, true)?,
                    None => SNR_FLOOR_DB,
                };
                snr.push(v);
            }
            Modality::MotionRr => {
                if let Some(theta) = &s.theta {
                    snr.push(snr_db(theta, band, false)?);
                    axis.push(TraceKind::MotionDx); // placeholder, theta mode
                } else {
                    let vx = snr_db(&s.dx, band, false)?;
                    let vy = snr_db(&s.dy, band, false)?;
                    if vy > vx {
                        snr.push(vy);
                        axis.push(TraceKind::MotionDy);
                    } else {
                        snr.push(vx);
                        axis.push(TraceKind::MotionDx);
                    }
                }
            }
        }
    }

    Ok(SnrHeatmap {
        window_index,
        modality,
        snr_db: snr,
        axis: match modality {
            Modality::MotionRr => Some(axis),
            Modality::PpgHr => None,
        },
    })
}

/// The up-to-k highest-SNR blocks at or above `min_snr_db`; ties break by
/// block index so selection is deterministic.
pub fn select_roi(map: &SnrHeatmap, k: usize, min_snr_db: f64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..map.snr_db.len())
        .filter(|&i| map.snr_db[i] >= min_snr_db)
        .collect();
    ids.sort_by(|&a, &b| {
        map.snr_db[b]
            .partial_cmp(&map.snr_db[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    ids.truncate(k);
    ids
}

/// Weighted average of the selected windows, weights proportional to
/// linear-scale SNR, re-normalized to zero mean. Empty selection yields
/// no global trace.
pub fn combine_global(windows: &[(&[f64], f64)]) -> Option<Vec<f64>> {
    let first = windows.first()?;
    let len = first.0.len();
    let mut acc = vec![0.0; len];
    let mut total_w = 0.0;
    for (samples, snr_db) in windows {
        debug_assert_eq!(samples.len(), len);
        let w = 10f64.powf(snr_db / 10.0);
        total_w += w;
        for (a, &s) in acc.iter_mut().zip(samples.iter()) {
            *a += w * s;
        }
    }
    if total_w <= 0.0 {
        return None;
    }
    for a in &mut acc {
        *a /= total_w;
    }
    let mean = acc.iter().sum::<f64>() / len as f64;
    for a in &mut acc {
        *a -= mean;
    }
    Some(acc)
}

/// Motion intensity of one window: the per-frame displacements are
/// integrated to a trajectory relative to the window start and the metric
/// is the population standard deviation of its magnitude. Subtle breathing
/// stays well under 1; a body shift of tens of pixels exceeds it.
pub fn motion_metric(dx: &[f64], dy: &[f64]) -> f64 {
    debug_assert_eq!(dx.len(), dy.len());
    let n = dx.len() + 1; // include the zero starting point
    let mut mags = Vec::with_capacity(n);
    let mut px = 0.0;
    let mut py = 0.0;
    mags.push(0.0);
    for (&vx, &vy) in dx.iter().zip(dy) {
        px += vx;
        py += vy;
        mags.push((px * px + py * py).sqrt());
    }
    let mean = mags.iter().sum::<f64>() / n as f64;
    (mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n as f64).sqrt()
}

/// Everything one window of the pipeline needs to produce an estimate.
pub struct WindowInput<'a> {
    pub window_index: usize,
    pub t_center_s: f64,
    /// Normalized per-block PPG windows; None where unusable.
    pub ppg_windows: &'a [Option<Vec<f64>>],
    pub dx_windows: &'a [Vec<f64>],
    pub dy_windows: &'a [Vec<f64>],
    pub theta_windows: Option<&'a [Vec<f64>]>,
    /// Whole-frame mean motion over the window.
    pub global_dx: &'a [f64],
    pub global_dy: &'a [f64],
}

/// Gate on global motion, then fuse the best blocks per modality and read
/// the rates off the combined spectra.
pub fn estimate_window(
    input: &WindowInput,
    plan: &WindowPlan,
    fps: f64,
    cfg: &PipelineConfig,
) -> Result<VitalEstimate> {
    let motion_intensity = motion_metric(input.global_dx, input.global_dy);
    if motion_intensity > cfg.gating.threshold {
        return Ok(VitalEstimate {
            window_index: input.window_index,
            t_center_s: input.t_center_s,
            hr_bpm: None,
            rr_bpm: None,
            hr_quality_db: SNR_FLOOR_DB,
            rr_quality_db: SNR_FLOOR_DB,
            gated: true,
            motion_intensity,
        });
    }

    let n_blocks = input.dx_windows.len();
    let spectra = window_spectra(input, plan, fps)?;

    // heart rate from the PPG heatmap
    let hr_map = build_heatmap(&spectra, n_blocks, &cfg.hr_band, Modality::PpgHr, input.window_index)?;
    let hr_roi = select_roi(&hr_map, cfg.roi_k, cfg.min_snr_db);
    let hr_selection: Vec<(&[f64], f64)> = hr_roi
        .iter()
        .filter_map(|&id| {
            input.ppg_windows[id]
                .as_ref()
                .map(|w| (w.as_slice(), hr_map.snr_db[id]))
        })
        .collect();
    let (hr_bpm, hr_quality_db) = match combine_global(&hr_selection) {
        Some(global) => {
            // the combined trace is one window long; spectrum index 0
            let spec = single_spectrum(&global, plan, fps, TraceKind::Ppg, input.window_index)?;
            let (_, bpm) = band_peak(&spec, &cfg.hr_band)?;
            (Some(bpm), snr_db(&spec, &cfg.hr_band, true)?)
        }
        None => (None, SNR_FLOOR_DB),
    };

    // respiration from the motion heatmap, best axis per block
    let rr_map = build_heatmap(
        &spectra,
        n_blocks,
        &cfg.rr_band,
        Modality::MotionRr,
        input.window_index,
    )?;
    let rr_roi = select_roi(&rr_map, cfg.roi_k, cfg.min_snr_db);
    let rr_selection: Vec<(&[f64], f64)> = rr_roi
        .iter()
        .map(|&id| {
            let samples: &[f64] = if let Some(theta) = input.theta_windows {
                &theta[id]
            } else {
                match rr_map.axis.as_ref().expect("motion map carries axes")[id] {
                    TraceKind::MotionDy => &input.dy_windows[id],
                    _ => &input.dx_windows[id],
                }
            };
            (samples, rr_map.snr_db[id])
        })
        .collect();
    let (rr_bpm, rr_quality_db) = match combine_global(&rr_selection) {
        Some(global) => {
            let spec = single_spectrum(&global, plan, fps, TraceKind::MotionDx, input.window_index)?;
            let (_, bpm) = band_peak(&spec, &cfg.rr_band)?;
            (Some(bpm), snr_db(&spec, &cfg.rr_band, false)?)
        }
        None => (None, SNR_FLOOR_DB),
    };

    Ok(VitalEstimate {
        window_index: input.window_index,
        t_center_s: input.t_center_s,
        hr_bpm,
        rr_bpm,
        hr_quality_db,
        rr_quality_db,
        gated: false,
        motion_intensity,
    })
}

fn window_spectra(
    input: &WindowInput,
    plan: &WindowPlan,
    fps: f64,
) -> Result<Vec<BlockWindowSpectra>> {
    (0..input.dx_windows.len())
        .map(|id| {
            let ppg = match &input.ppg_windows[id] {
                Some(w) => Some(single_spectrum(w, plan, fps, TraceKind::Ppg, input.window_index)?),
                None => None,
            };
            let dx = single_spectrum(
                &input.dx_windows[id],
                plan,
                fps,
                TraceKind::MotionDx,
                input.window_index,
            )?;
            let dy = single_spectrum(
                &input.dy_windows[id],
                plan,
                fps,
                TraceKind::MotionDy,
                input.window_index,
            )?;
            let theta = match input.theta_windows {
                Some(thetas) => Some(single_spectrum(
                    &thetas[id],
                    plan,
                    fps,
                    TraceKind::MotionDx,
                    input.window_index,
                )?),
                None => None,
            };
            Ok(BlockWindowSpectra {
                block_id: id,
                ppg,
                dx,
                dy,
                theta,
            })
        })
        .collect()
}

/// Precomputed per-clip state: traces for every block plus the global
/// motion signal.
pub struct ClipAnalysis {
    pub grid: BlockGrid,
    pub plan: WindowPlan,
    pub fps: f64,
    pub ppg_traces: Vec<PpgTrace>,
    pub motion_traces: Vec<MotionTrace>,
    pub global_dx: Vec<f64>,
    pub global_dy: Vec<f64>,
}

/// Extract every per-block trace of the clip once.
pub fn analyze_clip(clip: &VideoClip, cfg: &PipelineConfig) -> Result<ClipAnalysis> {
    cfg.gating.validate()?;
    let plan = WindowPlan::from_seconds(cfg.window_s, cfg.hop_s, clip.fps as f64)?;
    if clip.len() < plan.window_len {
        return Err(Error::InsufficientData {
            needed: plan.window_len,
            got: clip.len(),
        });
    }
    let grid = grid::build_grid(clip.width(), clip.height(), &cfg.scales)?;
    if grid.is_empty() {
        return Err(Error::Config("no usable scales for this frame size".into()));
    }

    let mut ppg_traces: Vec<PpgTrace> = grid
        .blocks
        .par_iter()
        .map(|b| ppg::extract_trace(clip, b))
        .collect::<Result<_>>()?;
    for (id, t) in ppg_traces.iter_mut().enumerate() {
        t.block_id = id;
    }
    let motion_traces = flow::clip_traces(clip, &grid, cfg.max_displacement)?;

    // whole-frame mean motion: average of the finest-scale blocks
    let finest = grid.finest_scale_blocks();
    let n_pairs = clip.len() - 1;
    let mut global_dx = vec![0.0; n_pairs];
    let mut global_dy = vec![0.0; n_pairs];
    for &id in &finest {
        for t in 0..n_pairs {
            global_dx[t] += motion_traces[id].dx[t];
            global_dy[t] += motion_traces[id].dy[t];
        }
    }
    let scale = 1.0 / finest.len().max(1) as f64;
    for v in global_dx.iter_mut().chain(global_dy.iter_mut()) {
        *v *= scale;
    }

    Ok(ClipAnalysis {
        grid,
        plan,
        fps: clip.fps as f64,
        ppg_traces,
        motion_traces,
        global_dx,
        global_dy,
    })
}

/// Full pipeline: per-block traces, then one estimate per sliding window.
pub fn process_clip(clip: &VideoClip, cfg: &PipelineConfig) -> Result<Vec<VitalEstimate>> {
    let analysis = analyze_clip(clip, cfg)?;
    let plan = &analysis.plan;
    let n_windows = plan.window_count(clip.len());

    (0..n_windows)
        .into_par_iter()
        .map(|w| {
            let start = plan.window_start(w);
            let len = plan.window_len;
            let n_blocks = analysis.grid.len();

            let mut ppg_windows: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_blocks);
            for trace in &analysis.ppg_traces {
                let norm = trace.window_norm(start, len)?;
                ppg_windows.push(norm.usable.then_some(norm.samples));
            }
            // motion traces have length frames-1; window w covers pairs
            // [start, start+len-1)
            let seg_len = len - 1;
            let dx_windows: Vec<Vec<f64>> = analysis
                .motion_traces
                .iter()
                .map(|t| t.dx[start..start + seg_len].to_vec())
                .collect();
            let dy_windows: Vec<Vec<f64>> = analysis
                .motion_traces
                .iter()
                .map(|t| t.dy[start..start + seg_len].to_vec())
                .collect();
            let theta_windows: Option<Vec<Vec<f64>>> = cfg.rr_from_theta.then(|| {
                analysis
                    .motion_traces
                    .iter()
                    .map(|t| t.theta[start..start + seg_len].to_vec())
                    .collect()
            });

            // motion windows are one sample short of the plan; spectra pad
            // them to the window length (zero-padding tolerates this), so
            // extend by repeating the last sample to keep lengths uniform
            let input = WindowInput {
                window_index: w,
                t_center_s: plan.window_center_s(w, analysis.fps),
                ppg_windows: &ppg_windows,
                dx_windows: &pad_to(&dx_windows, len),
                dy_windows: &pad_to(&dy_windows, len),
                theta_windows: theta_windows.as_deref().map(|t| {
                    // theta reuses the same padding
                    t
                }),
                global_dx: &analysis.global_dx[start..start + seg_len],
                global_dy: &analysis.global_dy[start..start + seg_len],
            };
            let padded_theta = theta_windows.as_ref().map(|t| pad_to(t, len));
            let input = WindowInput {
                theta_windows: padded_theta.as_deref(),
                ..input
            };
            estimate_window(&input, plan, analysis.fps, cfg)
        })
        .collect()
}

/// Repeat each window's final sample so every segment reaches `len`.
fn pad_to(windows: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    windows
        .iter()
        .map(|w| {
            let mut out = w.clone();
            while out.len() < len {
                out.push(*out.last().unwrap_or(&0.0));
            }
            out
        })
        .collect()
}
