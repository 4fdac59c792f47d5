//! Per-block inter-frame motion estimation: a two-parameter least-squares
//! translation solve (Lucas-Kanade normal equations) over each block with
//! one bilinear-warp refinement pass. Produces the dx/dy traces and the
//! combined arctangent trace the downstream respiration analysis consumes.

use crate::error::{Error, Result};
use crate::grid::{Block, BlockGrid};
use crate::interp::bilinear;
use crate::vidio::{Frame, VideoClip};
use rayon::prelude::*;

/// Respiratory motion is small; larger estimates indicate body movement
/// and are clamped so they cannot corrupt spectra (gating handles them).
pub const DEFAULT_MAX_DISPLACEMENT: f64 = 8.0;

/// Normal-matrix condition number above which a block counts as flat.
const MAX_CONDITION: f64 = 1e6;

/// One frame-pair flow estimate for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub dx: f64,
    pub dy: f64,
    /// Degenerate normal matrix: the block had no usable gradient.
    pub low_texture: bool,
    /// The estimate hit the displacement cap.
    pub capped: bool,
}

impl FlowSample {
    fn zero(low_texture: bool) -> Self {
        FlowSample {
            dx: 0.0,
            dy: 0.0,
            low_texture,
            capped: false,
        }
    }
}

/// Per-block motion trace across a clip; all series have length frames-1.
#[derive(Debug, Clone)]
pub struct MotionTrace {
    pub block_id: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    /// atan2(dy, dx), zero where both displacements are zero.
    pub theta: Vec<f64>,
    pub low_texture: Vec<bool>,
    pub capped: Vec<bool>,
}

impl MotionTrace {
    fn with_capacity(block_id: usize, n: usize) -> Self {
        MotionTrace {
            block_id,
            dx: Vec::with_capacity(n),
            dy: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            low_texture: Vec::with_capacity(n),
            capped: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, s: FlowSample) {
        self.dx.push(s.dx);
        self.dy.push(s.dy);
        self.theta.push(if s.dx == 0.0 && s.dy == 0.0 {
            0.0
        } else {
            s.dy.atan2(s.dx)
        });
        self.low_texture.push(s.low_texture);
        self.capped.push(s.capped);
    }
}

/// Central-difference spatial gradients of a plane, edges clamped.
pub(crate) fn gradients(plane: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ix = vec![0.0; plane.len()];
    let mut iy = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(width - 1);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(height - 1);
            ix[y * width + x] = 0.5 * (plane[y * width + xp] - plane[y * width + xm]);
            iy[y * width + x] = 0.5 * (plane[yp * width + x] - plane[ym * width + x]);
        }
    }
    (ix, iy)
}

struct PairContext<'a> {
    prev: &'a [f64],
    curr: &'a [f64],
    ix: &'a [f64],
    iy: &'a [f64],
    width: usize,
    height: usize,
}

impl PairContext<'_> {
    /// Least-squares translation solve over the block. `offset` warps the
    /// current frame before the temporal difference (refinement pass).
    fn solve(&self, block: &Block, offset: (f64, f64)) -> Option<(f64, f64)> {
        let mut gxx = 0.0;
        let mut gxy = 0.0;
        let mut gyy = 0.0;
        let mut bx = 0.0;
        let mut by = 0.0;
        let warped = offset != (0.0, 0.0);
        for y in block.y0..block.y0 + block.size {
            for x in block.x0..block.x0 + block.size {
                let idx = y as usize * self.width + x as usize;
                let gx = self.ix[idx];
                let gy = self.iy[idx];
                let cur = if warped {
                    bilinear(
                        self.curr,
                        self.width,
                        self.height,
                        x as f64 + offset.0,
                        y as f64 + offset.1,
                    )
                } else {
                    self.curr[idx]
                };
                let it = cur - self.prev[idx];
                gxx += gx * gx;
                gxy += gx * gy;
                gyy += gy * gy;
                bx -= gx * it;
                by -= gy * it;
            }
        }

        let trace = gxx + gyy;
        let det = gxx * gyy - gxy * gxy;
        let disc = ((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy).sqrt();
        let lambda_min = 0.5 * (trace - disc);
        let lambda_max = 0.5 * (trace + disc);
        if lambda_min <= 0.0 || lambda_max / lambda_min > MAX_CONDITION || det <= 0.0 {
            return None;
        }
        Some(((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det))
    }

    fn estimate(&self, block: &Block, cap: f64) -> FlowSample {
        let Some((dx0, dy0)) = self.solve(block, (0.0, 0.0)) else {
            return FlowSample::zero(true);
        };
        // one refinement pass with the current frame warped back
        let (mut dx, mut dy) = match self.solve(block, (dx0, dy0)) {
            Some((rx, ry)) => (dx0 + rx, dy0 + ry),
            None => (dx0, dy0),
        };
        let mut capped = false;
        if dx.abs() > cap {
            dx = dx.signum() * cap;
            capped = true;
        }
        if dy.abs() > cap {
            dy = dy.signum() * cap;
            capped = true;
        }
        FlowSample {
            dx,
            dy,
            low_texture: false,
            capped,
        }
    }
}

fn check_block(block: &Block, width: u32, height: u32) -> Result<()> {
    if block.x0 + block.size > width || block.y0 + block.size > height {
        return Err(Error::Bounds(format!(
            "block at ({}, {}) size {} outside {}x{} frame",
            block.x0, block.y0, block.size, width, height
        )));
    }
    Ok(())
}

/// Flow of `curr` relative to `prev` for one block.
pub fn estimate_block_flow(
    prev: &Frame,
    curr: &Frame,
    block: &Block,
    max_displacement: f64,
) -> Result<FlowSample> {
    if prev.width() != curr.width() || prev.height() != curr.height() {
        return Err(Error::Config(format!(
            "frame dimensions differ: {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            curr.width(),
            curr.height()
        )));
    }
    check_block(block, prev.width(), prev.height())?;
    let (w, h) = (prev.width() as usize, prev.height() as usize);
    let prev_plane = prev.to_plane();
    let curr_plane = curr.to_plane();
    let (ix, iy) = gradients(&prev_plane, w, h);
    let ctx = PairContext {
        prev: &prev_plane,
        curr: &curr_plane,
        ix: &ix,
        iy: &iy,
        width: w,
        height: h,
    };
    Ok(ctx.estimate(block, max_displacement))
}

/// Same solve on real-valued planes, for pre-quantization paths and tests.
pub fn estimate_flow_planes(
    prev: &[f64],
    curr: &[f64],
    width: usize,
    height: usize,
    block: &Block,
    max_displacement: f64,
) -> FlowSample {
    let (ix, iy) = gradients(prev, width, height);
    let ctx = PairContext {
        prev,
        curr,
        ix: &ix,
        iy: &iy,
        width,
        height,
    };
    ctx.estimate(block, max_displacement)
}

/// Trace one block across every consecutive frame pair.
pub fn trace_block(clip: &VideoClip, block: &Block, max_displacement: f64) -> Result<MotionTrace> {
    if clip.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: clip.len(),
        });
    }
    check_block(block, clip.width(), clip.height())?;
    let mut trace = MotionTrace::with_capacity(0, clip.len() - 1);
    for pair in clip.frames.windows(2) {
        trace.push(estimate_block_flow(&pair[0], &pair[1], block, max_displacement)?);
    }
    Ok(trace)
}

/// Trace every grid block across the clip. Gradients are computed once per
/// frame pair and shared by all blocks; pairs run in parallel and the
/// output layout is deterministic.
pub fn clip_traces(
    clip: &VideoClip,
    grid: &BlockGrid,
    max_displacement: f64,
) -> Result<Vec<MotionTrace>> {
    if clip.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: clip.len(),
        });
    }
    if grid.frame_width != clip.width() || grid.frame_height != clip.height() {
        return Err(Error::Config(format!(
            "grid built for {}x{}, clip is {}x{}",
            grid.frame_width,
            grid.frame_height,
            clip.width(),
            clip.height()
        )));
    }
    let (w, h) = (clip.width() as usize, clip.height() as usize);
    let n_pairs = clip.len() - 1;

    let per_pair: Vec<Vec<FlowSample>> = (0..n_pairs)
        .into_par_iter()
        .map(|t| {
            let prev = clip.frames[t].to_plane();
            let curr = clip.frames[t + 1].to_plane();
            let (ix, iy) = gradients(&prev, w, h);
            let ctx = PairContext {
                prev: &prev,
                curr: &curr,
                ix: &ix,
                iy: &iy,
                width: w,
                height: h,
            };
            grid.blocks
                .iter()
                .map(|b| ctx.estimate(b, max_displacement))
                .collect()
        })
        .collect();

    let mut traces: Vec<MotionTrace> = (0..grid.len())
        .map(|id| MotionTrace::with_capacity(id, n_pairs))
        .collect();
    for samples in &per_pair {
        for (trace, &s) in traces.iter_mut().zip(samples) {
            trace.push(s);
        }
    }
    Ok(traces)
}
