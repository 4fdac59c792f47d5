//! Synthetic sleep-scene generator with known ground truth: an elliptical
//! pulsating "face", a textured "chest" translating with breathing, a
//! static textured background, optional bedsheet occlusion, gross-motion
//! events and sensor noise. Replicates the clear/blurry x covered/uncovered
//! x posture condition grid at desk scale.
//!
//! Rendering is deterministic: textures come from one seeded stream and
//! per-frame noise from per-frame streams, so parallel rendering cannot
//! change the bytes.

use crate::error::{Error, Result};
use crate::interp::bilinear;
use crate::optics;
use crate::spectra::WindowPlan;
use crate::vidio::{self, BitDepth, Frame, VideoClip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Bedsheet model: transmission factor applied to body/chest texture.
const COVER_TRANSMISSION: f64 = 0.85;
/// Bedsheet diffusion: disc radius for the cloth pre-smoothing (a
/// 3-pixel-wide disc).
const COVER_DIFFUSION_RADIUS: f64 = 1.5;
/// In-plane breathing amplitude factor at the 90 degree (supine-like)
/// orientation, where chest motion is mostly toward the camera.
const SUPINE_AMPLITUDE_FACTOR: f64 = 0.3;

/// One gross body movement: the whole body shifts along +x by
/// `displacement_px`, ramped up and back down across the event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionEvent {
    pub start_s: f64,
    pub end_s: f64,
    pub displacement_px: f64,
}

/// Full description of one synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub duration_s: f64,
    pub hr_bpm: f64,
    pub rr_bpm: f64,
    /// Fractional AC/DC pulse amplitude on the face region.
    pub pulse_amplitude: f64,
    /// Chest displacement amplitude in pixels.
    pub breath_amplitude: f64,
    /// Additive Gaussian sensor noise, intensity units.
    pub noise_sigma: f64,
    /// Scene DC level; the NIR LED power knob.
    pub dc_level: f64,
    pub covered: bool,
    /// Chest-motion orientation in degrees; 90 is supine-like.
    pub posture_deg: f64,
    pub motion_events: Vec<MotionEvent>,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 160,
            height: 128,
            fps: 20.0,
            duration_s: 60.0,
            hr_bpm: 72.0,
            rr_bpm: 15.0,
            pulse_amplitude: 0.005,
            breath_amplitude: 2.0,
            noise_sigma: 1.0,
            dc_level: 120.0,
            covered: false,
            posture_deg: 0.0,
            motion_events: Vec::new(),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 48 || self.height < 48 {
            return Err(Error::Config(format!(
                "frame {}x{} below the 48 px minimum",
                self.width, self.height
            )));
        }
        if !(self.fps > 0.0) || !(self.duration_s > 0.0) || self.n_frames() < 2 {
            return Err(Error::Config("need a positive duration and fps".into()));
        }
        if !(42.0..=180.0).contains(&self.hr_bpm) {
            return Err(Error::Config(format!(
                "hr {} outside [42, 180] bpm",
                self.hr_bpm
            )));
        }
        if !(6.0..=42.0).contains(&self.rr_bpm) {
            return Err(Error::Config(format!(
                "rr {} outside [6, 42] bpm",
                self.rr_bpm
            )));
        }
        if self.hr_bpm / 60.0 >= self.fps / 2.0 || self.rr_bpm / 60.0 >= self.fps / 2.0 {
            return Err(Error::Config("rate at or above Nyquist".into()));
        }
        if !(0.0..=0.05).contains(&self.pulse_amplitude) {
            return Err(Error::Config(format!(
                "pulse amplitude {} outside [0, 0.05]",
                self.pulse_amplitude
            )));
        }
        if !(0.0..=10.0).contains(&self.breath_amplitude) {
            return Err(Error::Config(format!(
                "breath amplitude {} outside [0, 10] px",
                self.breath_amplitude
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise sigma must be non-negative".into()));
        }
        if !(20.0..=200.0).contains(&self.dc_level) {
            return Err(Error::Config(format!(
                "dc level {} outside [20, 200]",
                self.dc_level
            )));
        }
        if !(0.0..=90.0).contains(&self.posture_deg) {
            return Err(Error::Config(format!(
                "posture {} outside [0, 90] degrees",
                self.posture_deg
            )));
        }
        let mut prev_end = 0.0;
        for ev in &self.motion_events {
            if !(ev.start_s < ev.end_s) || ev.start_s < 0.0 || ev.end_s > self.duration_s {
                return Err(Error::Config(format!(
                    "motion event [{}, {}] outside clip",
                    ev.start_s, ev.end_s
                )));
            }
            if ev.start_s < prev_end {
                return Err(Error::Config("motion events overlap".into()));
            }
            if ev.displacement_px < 0.0 {
                return Err(Error::Config("event displacement must be >= 0".into()));
            }
            prev_end = ev.end_s;
        }
        Ok(())
    }
}

/// Scene geometry in pixel coordinates, derived from the frame size.
#[derive(Debug, Clone)]
struct Layout {
    body_x0: f64,
    body_x1: f64,
    body_y0: f64,
    body_y1: f64,
    face_cx: f64,
    face_cy: f64,
    face_rx: f64,
    face_ry: f64,
    chest_x0: f64,
    chest_x1: f64,
    chest_y0: f64,
    chest_y1: f64,
}

impl Layout {
    fn for_config(cfg: &SceneConfig) -> Result<Layout> {
        let (w, h) = (cfg.width as f64, cfg.height as f64);
        let l = Layout {
            body_x0: 0.15 * w,
            body_x1: 0.85 * w,
            body_y0: 0.08 * h,
            body_y1: 0.95 * h,
            face_cx: 0.50 * w,
            face_cy: 0.24 * h,
            face_rx: 0.19 * w,
            face_ry: 0.155 * h,
            chest_x0: 0.28 * w,
            chest_x1: 0.72 * w,
            chest_y0: 0.42 * h,
            chest_y1: 0.75 * h,
        };
        let max_event = cfg
            .motion_events
            .iter()
            .map(|e| e.displacement_px)
            .fold(0.0, f64::max);
        if l.body_x1 + max_event + cfg.breath_amplitude >= w {
            return Err(Error::Layout(format!(
                "body with {max_event} px event and {} px breathing exceeds frame width {w}",
                cfg.breath_amplitude
            )));
        }
        if l.body_y1 + cfg.breath_amplitude >= h {
            return Err(Error::Layout("body exceeds frame height".into()));
        }
        Ok(l)
    }

    fn in_body(&self, x: f64, y: f64) -> bool {
        x >= self.body_x0 && x < self.body_x1 && y >= self.body_y0 && y < self.body_y1
    }

    fn in_chest(&self, x: f64, y: f64) -> bool {
        x >= self.chest_x0 && x < self.chest_x1 && y >= self.chest_y0 && y < self.chest_y1
    }

    fn face_rho2(&self, x: f64, y: f64) -> f64 {
        let nx = (x - self.face_cx) / self.face_rx;
        let ny = (y - self.face_cy) / self.face_ry;
        nx * nx + ny * ny
    }
}

/// Per-window reference series plus region/event masks.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub hr_bpm: Vec<f64>,
    pub rr_bpm: Vec<f64>,
    /// Per frame: true while a motion event is active.
    pub motion_event_mask: Vec<bool>,
    /// Per pixel, row-major: pulsatile skin.
    pub skin_mask: Vec<bool>,
    /// Per pixel, row-major: breathing chest.
    pub chest_mask: Vec<bool>,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub window_len: usize,
    pub hop: usize,
}

impl GroundTruth {
    pub fn window_count(&self) -> usize {
        self.hr_bpm.len()
    }

    /// Center time of reference window `i`, seconds.
    pub fn window_center_s(&self, i: usize) -> f64 {
        (i * self.hop) as f64 / self.fps + self.window_len as f64 / (2.0 * self.fps)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the first uniform is kept away from 0
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Smooth seeded texture: a coarse grid of uniform values in [-1, 1]
/// bilinearly upsampled. `cell` controls the correlation length.
fn value_noise(width: usize, height: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = width / cell + 2;
    let gh = height / cell + 2;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let gx = x as f64 / cell as f64;
            let gy = y as f64 / cell as f64;
            out[y * width + x] = bilinear(&grid, gw, gh, gx, gy);
        }
    }
    out
}

/// Normalization constant so the pulse waveform has unit peak.
fn pulse_peak() -> f64 {
    let mut peak: f64 = 0.0;
    for i in 0..4096 {
        let u = 2.0 * std::f64::consts::PI * i as f64 / 4096.0;
        peak = peak.max((u.sin() - 0.3 * (2.0 * u).sin()).abs());
    }
    peak
}

/// Event offset along +x at time `t`: smoothstep up over the first half of
/// the event, back down over the second, so the scene is stationary
/// outside the event window.
fn event_offset(events: &[MotionEvent], t: f64) -> f64 {
    for ev in events {
        if t >= ev.start_s && t < ev.end_s {
            let u = (t - ev.start_s) / (ev.end_s - ev.start_s);
            let ramp = if u < 0.5 { u * 2.0 } else { (1.0 - u) * 2.0 };
            let s = ramp * ramp * (3.0 - 2.0 * ramp);
            return ev.displacement_px * s;
        }
    }
    0.0
}

struct SceneTextures {
    background: Vec<f64>,
    body: Vec<f64>,
    chest: Vec<f64>,
    face_dc: Vec<f64>,
}

fn build_textures(cfg: &SceneConfig, layout: &Layout) -> SceneTextures {
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let dc = cfg.dc_level;

    let bg_noise = value_noise(w, h, 5, &mut rng);
    let body_noise = value_noise(w, h, 5, &mut rng);
    let chest_noise = value_noise(w, h, 4, &mut rng);

    let background: Vec<f64> = bg_noise.iter().map(|&n| 0.65 * dc + 18.0 * n).collect();
    let mut body: Vec<f64> = body_noise.iter().map(|&n| 0.80 * dc + 16.0 * n).collect();
    let mut chest: Vec<f64> = chest_noise.iter().map(|&n| 0.90 * dc + 22.0 * n).collect();

    // bedsheet: dim and diffuse what lies under the cloth; displacement
    // still propagates because the textures translate unchanged
    if cfg.covered {
        let psf = optics::disc_psf(COVER_DIFFUSION_RADIUS).expect("fixed radius");
        body = optics::blur_plane(&body, w, h, &psf);
        chest = optics::blur_plane(&chest, w, h, &psf);
        for v in body.iter_mut().chain(chest.iter_mut()) {
            *v *= COVER_TRANSMISSION;
        }
    }

    let mut face_dc = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let rho2 = layout.face_rho2(x as f64, y as f64).min(1.0);
            face_dc[y * w + x] = dc * (1.08 - 0.30 * rho2);
        }
    }

    SceneTextures {
        background,
        body,
        chest,
        face_dc,
    }
}

fn render_noiseless_planes(cfg: &SceneConfig, layout: &Layout) -> Vec<Vec<f64>> {
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let tex = build_textures(cfg, layout);
    let peak = pulse_peak();
    let f_hr = cfg.hr_bpm / 60.0;
    let f_rr = cfg.rr_bpm / 60.0;
    let theta = cfg.posture_deg.to_radians();
    let amp = cfg.breath_amplitude
        * if cfg.posture_deg >= 89.5 {
            SUPINE_AMPLITUDE_FACTOR
        } else {
            1.0
        };

    (0..cfg.n_frames())
        .into_par_iter()
        .map(|fi| {
            let t = fi as f64 / cfg.fps;
            let pulse = {
                let u = 2.0 * std::f64::consts::PI * f_hr * t;
                (u.sin() - 0.3 * (2.0 * u).sin()) / peak
            };
            let gain = 1.0 + cfg.pulse_amplitude * pulse;
            let breath = amp * (2.0 * std::f64::consts::PI * f_rr * t).sin();
            let (bdx, bdy) = (breath * theta.cos(), breath * theta.sin());
            let ex = event_offset(&cfg.motion_events, t);

            let mut plane = vec![0.0; w * h];
            for y in 0..h {
                for x in 0..w {
                    // body-local coordinates undo the event shift
                    let bx = x as f64 - ex;
                    let by = y as f64;
                    let mut v = tex.background[y * w + x];
                    if layout.in_body(bx, by) {
                        v = bilinear(&tex.body, w, h, bx, by);
                        let cx = bx - bdx;
                        let cy = by - bdy;
                        if layout.in_chest(cx, cy) {
                            v = bilinear(&tex.chest, w, h, cx, cy);
                        }
                        if layout.face_rho2(bx, by) <= 1.0 {
                            v = bilinear(&tex.face_dc, w, h, bx, by) * gain;
                        }
                    }
                    plane[y * w + x] = v;
                }
            }
            plane
        })
        .collect()
}

/// Add per-frame seeded sensor noise and quantize to 8-bit frames.
/// Stream `1 + frame_index` of the seed keeps determinism independent of
/// scheduling.
pub fn noise_and_quantize(
    planes: &[Vec<f64>],
    width: u32,
    height: u32,
    sigma: f64,
    seed: u64,
) -> Result<Vec<Frame>> {
    planes
        .par_iter()
        .enumerate()
        .map(|(fi, plane)| {
            let quantized: Vec<f64> = if sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + fi as u64);
                plane.iter().map(|&v| v + sigma * gaussian(&mut rng)).collect()
            } else {
                plane.clone()
            };
            Frame::from_plane(width, height, BitDepth::Eight, &quantized)
        })
        .collect()
}

fn ground_truth(cfg: &SceneConfig, layout: &Layout) -> GroundTruth {
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let n_frames = cfg.n_frames();
    let plan = WindowPlan::default_for_fps(cfg.fps).expect("valid fps");
    let windows = plan.window_count(n_frames);

    let mut skin_mask = vec![false; w * h];
    let mut chest_mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            skin_mask[y * w + x] = layout.face_rho2(xf, yf) <= 1.0;
            chest_mask[y * w + x] = layout.in_chest(xf, yf);
        }
    }

    let motion_event_mask = (0..n_frames)
        .map(|fi| {
            let t = fi as f64 / cfg.fps;
            cfg.motion_events
                .iter()
                .any(|ev| t >= ev.start_s && t < ev.end_s)
        })
        .collect();

    GroundTruth {
        hr_bpm: vec![cfg.hr_bpm; windows],
        rr_bpm: vec![cfg.rr_bpm; windows],
        motion_event_mask,
        skin_mask,
        chest_mask,
        width: cfg.width,
        height: cfg.height,
        fps: cfg.fps,
        window_len: plan.window_len,
        hop: plan.hop,
    }
}

/// Render the scene: clip plus ground truth. Deterministic for a given
/// config (including seed).
pub fn render_scene(cfg: &SceneConfig) -> Result<(VideoClip, GroundTruth)> {
    cfg.validate()?;
    let layout = Layout::for_config(cfg)?;
    let planes = render_noiseless_planes(cfg, &layout);
    let frames = noise_and_quantize(&planes, cfg.width, cfg.height, cfg.noise_sigma, cfg.seed)?;
    let label = format!(
        "{}-{}",
        if cfg.covered { "covered" } else { "uncovered" },
        "clear"
    );
    let clip = VideoClip::new(frames, cfg.fps as f32, label)?;
    Ok((clip, ground_truth(cfg, &layout)))
}

// ---------------------------------------------------------------------------
// condition suite + manifest
// ---------------------------------------------------------------------------

/// Condition tag bound to each corpus clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub covered: bool,
    pub blur_radius: f64,
    pub posture_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip: PathBuf,
    pub truth: PathBuf,
    pub condition: Condition,
}

pub const POSTURE_ANGLES: [f64; 3] = [0.0, 60.0, 90.0];

/// Rate offsets cycled across scenes so the reference series vary and the
/// benchmark's correlation statistics are informative.
const HR_OFFSETS: [f64; 5] = [-8.0, -4.0, 0.0, 4.0, 8.0];
const RR_OFFSETS: [f64; 5] = [-3.0, -1.0, 0.0, 2.0, 3.0];

/// Render the {covered, uncovered} x {clear + blur radii} x posture corpus
/// and write clips, truth files and `manifest.json` under `out_dir`.
///
/// Sensor noise is applied after optical blur, matching the capture order
/// of a defocused camera, so blur degrades like it does on hardware.
pub fn render_condition_suite(
    base: &SceneConfig,
    postures: usize,
    blur_radii: &[f64],
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    base.validate()?;
    if postures == 0 || postures > POSTURE_ANGLES.len() {
        return Err(Error::Config(format!(
            "postures must be 1..={}, got {postures}",
            POSTURE_ANGLES.len()
        )));
    }
    for &r in blur_radii {
        if r <= 0.0 {
            return Err(Error::Config(format!(
                "blur radius {r} must be positive (radius 0 is the clear variant)"
            )));
        }
    }

    let clips_dir = out_dir.join("clips");
    let truth_dir = out_dir.join("truth");
    fs::create_dir_all(&clips_dir).map_err(|e| Error::io(&clips_dir, e))?;
    fs::create_dir_all(&truth_dir).map_err(|e| Error::io(&truth_dir, e))?;

    let mut entries = Vec::new();
    let mut scene_idx = 0usize;
    for covered in [false, true] {
        for &posture in &POSTURE_ANGLES[..postures] {
            let mut cfg = base.clone();
            cfg.covered = covered;
            cfg.posture_deg = posture;
            cfg.seed = base
                .seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(scene_idx as u64 + 1));
            cfg.hr_bpm = (base.hr_bpm + HR_OFFSETS[scene_idx % HR_OFFSETS.len()])
                .clamp(42.0, 170.0);
            cfg.rr_bpm = (base.rr_bpm + RR_OFFSETS[scene_idx % RR_OFFSETS.len()])
                .clamp(6.0, 40.0);
            cfg.validate()?;
            let layout = Layout::for_config(&cfg)?;

            let cov_tag = if covered { "cov" } else { "unc" };
            let truth_rel = PathBuf::from(format!("truth/{cov_tag}_p{:02}.json", posture as u32));
            let truth = ground_truth(&cfg, &layout);
            save_ground_truth(&truth, &out_dir.join(&truth_rel))?;

            let planes = render_noiseless_planes(&cfg, &layout);
            let mut variants: Vec<f64> = vec![0.0];
            variants.extend_from_slice(blur_radii);

            for radius in variants {
                let blurred;
                let source = if radius > 0.0 {
                    let psf = optics::disc_psf(radius)?;
                    blurred = planes
                        .par_iter()
                        .map(|p| {
                            optics::blur_plane(p, cfg.width as usize, cfg.height as usize, &psf)
                        })
                        .collect::<Vec<_>>();
                    &blurred
                } else {
                    &planes
                };
                let frames = noise_and_quantize(
                    source,
                    cfg.width,
                    cfg.height,
                    cfg.noise_sigma,
                    cfg.seed,
                )?;
                let label = format!(
                    "{}-{}",
                    if covered { "covered" } else { "uncovered" },
                    if radius > 0.0 { "blurry" } else { "clear" }
                );
                let clip = VideoClip::new(frames, cfg.fps as f32, label)?;
                let clip_rel = PathBuf::from(format!(
                    "clips/{cov_tag}_p{:02}_r{}.bvr",
                    posture as u32,
                    format_radius(radius)
                ));
                vidio::write_clip(&clip, &out_dir.join(&clip_rel))?;
                entries.push(ManifestEntry {
                    clip: clip_rel,
                    truth: truth_rel.clone(),
                    condition: Condition {
                        covered,
                        blur_radius: radius,
                        posture_deg: posture,
                    },
                });
            }
            scene_idx += 1;
        }
    }

    write_manifest(&entries, &out_dir.join("manifest.json"))?;
    Ok(entries)
}

fn format_radius(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{}", r as u64)
    } else {
        format!("{:.1}", r).replace('.', "_")
    }
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(entries)?;
    atomic_write(path, &json)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&data)?)
}

/// Write bytes via a temp sibling and rename, so partial files never
/// appear under the final name.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = vidio::temp_sibling(path);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = f.write_all(bytes).and_then(|_| f.flush()) {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(&tmp, e));
    }
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// ground-truth serialization (masks as run-length-encoded bitmaps)
// ---------------------------------------------------------------------------

/// Run lengths alternate false/true and start with a (possibly zero)
/// false run.
pub fn rle_encode(mask: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for &bit in mask {
        if bit == current {
            count += 1;
        } else {
            runs.push(count);
            current = bit;
            count = 1;
        }
    }
    runs.push(count);
    runs
}

pub fn rle_decode(runs: &[u32], expected_len: usize) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(expected_len);
    let mut value = false;
    for &run in runs {
        out.extend(std::iter::repeat(value).take(run as usize));
        value = !value;
    }
    if out.len() != expected_len {
        return Err(Error::Config(format!(
            "RLE decodes to {} values, expected {expected_len}",
            out.len()
        )));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthFile {
    hr_bpm: Vec<f64>,
    rr_bpm: Vec<f64>,
    width: u32,
    height: u32,
    fps: f64,
    window_len: usize,
    hop: usize,
    n_frames: usize,
    motion_event_mask: Vec<u32>,
    skin_mask: Vec<u32>,
    chest_mask: Vec<u32>,
}

pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let file = GroundTruthFile {
        hr_bpm: truth.hr_bpm.clone(),
        rr_bpm: truth.rr_bpm.clone(),
        width: truth.width,
        height: truth.height,
        fps: truth.fps,
        window_len: truth.window_len,
        hop: truth.hop,
        n_frames: truth.motion_event_mask.len(),
        motion_event_mask: rle_encode(&truth.motion_event_mask),
        skin_mask: rle_encode(&truth.skin_mask),
        chest_mask: rle_encode(&truth.chest_mask),
    };
    atomic_write(path, &serde_json::to_vec(&file)?)
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: GroundTruthFile = serde_json::from_slice(&data)?;
    let n_pixels = file.width as usize * file.height as usize;
    Ok(GroundTruth {
        hr_bpm: file.hr_bpm,
        rr_bpm: file.rr_bpm,
        motion_event_mask: rle_decode(&file.motion_event_mask, file.n_frames)?,
        skin_mask: rle_decode(&file.skin_mask, n_pixels)?,
        chest_mask: rle_decode(&file.chest_mask, n_pixels)?,
        width: file.width,
        height: file.height,
        fps: file.fps,
        window_len: file.window_len,
        hop: file.hop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> SceneConfig {
        SceneConfig {
            duration_s: 12.0,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn all_modulation_off_gives_identical_frames() {
        let cfg = SceneConfig {
            pulse_amplitude: 0.0,
            breath_amplitude: 0.0,
            noise_sigma: 0.0,
            duration_s: 2.0,
            ..SceneConfig::default()
        };
        let (clip, _) = render_scene(&cfg).unwrap();
        for f in &clip.frames[1..] {
            assert_eq!(f.pixels(), clip.frames[0].pixels());
        }
    }

    #[test]
    fn determinism_same_seed_same_bytes() {
        let cfg = quick_cfg();
        let (a, ta) = render_scene(&cfg).unwrap();
        let (b, tb) = render_scene(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn different_seed_changes_pixels() {
        let (a, _) = render_scene(&quick_cfg()).unwrap();
        let (b, _) = render_scene(&SceneConfig {
            seed: 99,
            ..quick_cfg()
        })
        .unwrap();
        assert_ne!(a.frames[0].pixels(), b.frames[0].pixels());
    }

    #[test]
    fn motion_event_mask_covers_exact_frame_range() {
        let cfg = SceneConfig {
            motion_events: vec![MotionEvent {
                start_s: 4.0,
                end_s: 5.0,
                displacement_px: 20.0,
            }],
            duration_s: 12.0,
            ..SceneConfig::default()
        };
        let (_, truth) = render_scene(&cfg).unwrap();
        for (fi, &m) in truth.motion_event_mask.iter().enumerate() {
            let t = fi as f64 / cfg.fps;
            assert_eq!(m, (4.0..5.0).contains(&t), "frame {fi}");
        }
    }

    #[test]
    fn ground_truth_window_count_matches_plan() {
        let cfg = SceneConfig {
            duration_s: 60.0,
            ..SceneConfig::default()
        };
        let (_, truth) = render_scene(&cfg).unwrap();
        assert_eq!(truth.window_count(), (1200 - 200) / 20 + 1);
        assert_eq!(truth.hr_bpm.len(), 51);
    }

    #[test]
    fn masks_are_disjoint_and_nonempty() {
        let (_, truth) = render_scene(&quick_cfg()).unwrap();
        let skin = truth.skin_mask.iter().filter(|&&b| b).count();
        let chest = truth.chest_mask.iter().filter(|&&b| b).count();
        assert!(skin > 500, "skin mask too small: {skin}");
        assert!(chest > 1000, "chest mask too small: {chest}");
        let overlap = truth
            .skin_mask
            .iter()
            .zip(&truth.chest_mask)
            .filter(|(&a, &b)| a && b)
            .count();
        assert_eq!(overlap, 0);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(render_scene(&SceneConfig {
            hr_bpm: 700.0,
            ..SceneConfig::default()
        })
        .is_err());
        assert!(render_scene(&SceneConfig {
            rr_bpm: 2.0,
            ..SceneConfig::default()
        })
        .is_err());
        assert!(render_scene(&SceneConfig {
            pulse_amplitude: 0.2,
            ..SceneConfig::default()
        })
        .is_err());
        // 30 px event pushes the body outside the frame
        assert!(matches!(
            render_scene(&SceneConfig {
                motion_events: vec![MotionEvent {
                    start_s: 1.0,
                    end_s: 2.0,
                    displacement_px: 40.0
                }],
                ..quick_cfg()
            }),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn rle_roundtrip_and_edge_cases() {
        for mask in [
            vec![],
            vec![false; 7],
            vec![true; 5],
            vec![true, false, true, true, false],
        ] {
            let runs = rle_encode(&mask);
            assert_eq!(rle_decode(&runs, mask.len()).unwrap(), mask);
        }
        assert!(rle_decode(&[3], 5).is_err());
    }

    #[test]
    fn ground_truth_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (_, truth) = render_scene(&quick_cfg()).unwrap();
        let path = dir.path().join("t.json");
        save_ground_truth(&truth, &path).unwrap();
        let back = load_ground_truth(&path).unwrap();
        assert_eq!(back, truth);
    }

    #[test]
    fn condition_suite_shape_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let base = SceneConfig {
            duration_s: 11.0,
            ..SceneConfig::default()
        };
        let entries = render_condition_suite(&base, 3, &[3.0], dir.path()).unwrap();
        assert_eq!(entries.len(), 12, "2 covered x 2 radii x 3 postures");
        for e in &entries {
            assert!(dir.path().join(&e.clip).exists());
            assert!(dir.path().join(&e.truth).exists());
        }

        // second run into another directory must produce identical bytes
        let dir2 = tempfile::tempdir().unwrap();
        let entries2 = render_condition_suite(&base, 3, &[3.0], dir2.path()).unwrap();
        for (a, b) in entries.iter().zip(&entries2) {
            assert_eq!(a.clip, b.clip);
            let ba = fs::read(dir.path().join(&a.clip)).unwrap();
            let bb = fs::read(dir2.path().join(&b.clip)).unwrap();
            assert_eq!(ba, bb, "clip {:?} differs between runs", a.clip);
        }
        let ma = fs::read(dir.path().join("manifest.json")).unwrap();
        let mb = fs::read(dir2.path().join("manifest.json")).unwrap();
        assert_eq!(ma, mb);
    }
}
