//! Sliding-window Fourier analysis: power spectra, band-limited peak
//! frequency, and SNR in dB for PPG and motion traces.
//!
//! Defaults: 10 s windows hopped by 1 s, Hann taper, zero-padding to 2048
//! samples (~0.59 bpm grid at 20 fps, below the 1 bpm reporting grain).
//! No parabolic peak interpolation; the bin grid is the resolution budget.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const SNR_FLOOR_DB: f64 = -40.0;

/// Which trace a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Ppg,
    MotionDx,
    MotionDy,
}

/// Sliding-window layout. All lengths are in frames.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    pub window_len: usize,
    pub hop: usize,
    pub zero_pad_to: usize,
}

impl WindowPlan {
    /// Window/hop given in seconds; zero-padding picks the first power of
    /// two >= max(2048, window length).
    pub fn from_seconds(window_s: f64, hop_s: f64, fps: f64) -> Result<Self> {
        if !(window_s > 0.0) || !(hop_s > 0.0) || !(fps > 0.0) {
            return Err(Error::Config(
                "window, hop and fps must all be positive".into(),
            ));
        }
        let window_len = (window_s * fps).round() as usize;
        let hop = (hop_s * fps).round() as usize;
        let zero_pad_to = 2048usize.max(window_len.next_power_of_two());
        let plan = WindowPlan {
            window_len,
            hop,
            zero_pad_to,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// The default 10 s / 1 s plan at a given frame rate.
    pub fn default_for_fps(fps: f64) -> Result<Self> {
        Self::from_seconds(10.0, 1.0, fps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.hop == 0 {
            return Err(Error::Config("window and hop must be non-zero".into()));
        }
        if self.hop > self.window_len {
            return Err(Error::Config(format!(
                "hop {} exceeds window length {}",
                self.hop, self.window_len
            )));
        }
        if self.zero_pad_to < self.window_len {
            return Err(Error::Config(format!(
                "zero-pad target {} below window length {}",
                self.zero_pad_to, self.window_len
            )));
        }
        if !self.zero_pad_to.is_power_of_two() {
            return Err(Error::Config(format!(
                "zero-pad target {} is not a power of two",
                self.zero_pad_to
            )));
        }
        Ok(())
    }

    /// Number of windows a trace of `len` samples yields.
    pub fn window_count(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    pub fn window_start(&self, index: usize) -> usize {
        index * self.hop
    }

    /// Center time of window `index` in seconds.
    pub fn window_center_s(&self, index: usize, fps: f64) -> f64 {
        (self.window_start(index) as f64 + self.window_len as f64 / 2.0) / fps
    }

    /// Signal-region half-width for SNR, in padded bins: +-2 bins at the
    /// window's native resolution (the Hann mainlobe width), mapped onto
    /// the zero-padded grid.
    pub fn snr_half_width(&self) -> usize {
        ((2 * self.zero_pad_to) as f64 / self.window_len as f64).ceil() as usize
    }
}

/// One-sided power spectrum of one window of one trace.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub power: Vec<f64>,
    /// Bin spacing in Hz: fps / zero_pad_to.
    pub bin_hz: f64,
    pub window_index: usize,
    pub source: TraceKind,
    /// Signal-region half-width in bins, carried from the plan.
    pub snr_half_width: usize,
}

impl Spectrum {
    pub fn nyquist_hz(&self) -> f64 {
        (self.power.len() - 1) as f64 * self.bin_hz
    }

    pub fn freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }
}

/// A frequency search band in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0) || !(hi > lo) {
            return Err(Error::Config(format!(
                "band [{lo}, {hi}] must satisfy 0 < lo < hi"
            )));
        }
        Ok(Band { lo, hi })
    }

    /// Heart-rate default: 42-180 bpm.
    pub fn hr_default() -> Band {
        Band { lo: 0.70, hi: 3.00 }
    }

    /// Respiration default: 6-42 bpm, wide enough for large RR errors.
    pub fn rr_default() -> Band {
        Band { lo: 0.10, hi: 0.70 }
    }

    fn bins(&self, spec: &Spectrum) -> Result<(usize, usize)> {
        if self.hi > spec.nyquist_hz() + 1e-9 {
            return Err(Error::Config(format!(
                "band upper edge {} Hz beyond Nyquist {} Hz",
                self.hi,
                spec.nyquist_hz()
            )));
        }
        let lo = (self.lo / spec.bin_hz).ceil() as usize;
        let hi = ((self.hi / spec.bin_hz).floor() as usize).min(spec.power.len() - 1);
        if hi < lo + 2 {
            return Err(Error::Config(format!(
                "band [{}, {}] Hz spans fewer than 3 bins",
                self.lo, self.hi
            )));
        }
        Ok((lo, hi))
    }
}

/// Hann taper, symmetric form.
fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Power spectrum of every sliding window of a trace: per window the mean
/// is subtracted, the Hann taper applied, the result zero-padded and
/// transformed; power is |X|^2 over the one-sided grid.
pub fn windowed_spectrum(
    trace: &[f64],
    plan: &WindowPlan,
    fps: f64,
    source: TraceKind,
) -> Result<Vec<Spectrum>> {
    plan.validate()?;
    if trace.len() < plan.window_len {
        return Err(Error::InsufficientData {
            needed: plan.window_len,
            got: trace.len(),
        });
    }
    let count = plan.window_count(trace.len());
    let mut out = Vec::with_capacity(count);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(plan.zero_pad_to);
    let taper = hann(plan.window_len);

    for w in 0..count {
        let start = plan.window_start(w);
        let seg = &trace[start..start + plan.window_len];
        out.push(single_spectrum_with(seg, plan, fps, source, w, &*fft, &taper));
    }
    Ok(out)
}

/// Spectrum of one already-extracted window segment. The segment may be up
/// to one hop shorter than the plan's window (motion traces run one sample
/// short of the frame count); the taper is sized to the segment.
pub fn single_spectrum(
    segment: &[f64],
    plan: &WindowPlan,
    fps: f64,
    source: TraceKind,
    window_index: usize,
) -> Result<Spectrum> {
    plan.validate()?;
    if segment.len() + plan.hop < plan.window_len || segment.len() > plan.zero_pad_to {
        return Err(Error::InsufficientData {
            needed: plan.window_len,
            got: segment.len(),
        });
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(plan.zero_pad_to);
    let taper = hann(segment.len());
    Ok(single_spectrum_with(
        segment,
        plan,
        fps,
        source,
        window_index,
        &*fft,
        &taper,
    ))
}

fn single_spectrum_with(
    segment: &[f64],
    plan: &WindowPlan,
    fps: f64,
    source: TraceKind,
    window_index: usize,
    fft: &dyn rustfft::Fft<f64>,
    taper: &[f64],
) -> Spectrum {
    let mean = segment.iter().sum::<f64>() / segment.len() as f64;
    let mut buf = vec![Complex::new(0.0, 0.0); plan.zero_pad_to];
    for (i, (&v, &w)) in segment.iter().zip(taper).enumerate() {
        buf[i] = Complex::new((v - mean) * w, 0.0);
    }
    fft.process(&mut buf);
    let half = plan.zero_pad_to / 2;
    let power: Vec<f64> = buf[..=half].iter().map(|c| c.norm_sqr()).collect();
    Spectrum {
        power,
        bin_hz: fps / plan.zero_pad_to as f64,
        window_index,
        source,
        snr_half_width: plan.snr_half_width(),
    }
}

/// Frequency (Hz and bpm) of the maximum power bin inside the band.
/// Ties break toward the lower frequency.
pub fn band_peak(spec: &Spectrum, band: &Band) -> Result<(f64, f64)> {
    let (lo, hi) = band.bins(spec)?;
    let mut best = lo;
    for k in lo..=hi {
        if spec.power[k] > spec.power[best] {
            best = k;
        }
    }
    let hz = spec.freq(best);
    Ok((hz, hz * 60.0))
}

/// SNR in dB: power within the signal region around the band peak (plus
/// the first harmonic's region when requested and below Nyquist) against
/// the remaining in-band power. Floored at -40 dB.
pub fn snr_db(spec: &Spectrum, band: &Band, include_harmonic: bool) -> Result<f64> {
    let (lo, hi) = band.bins(spec)?;
    let mut best = lo;
    for k in lo..=hi {
        if spec.power[k] > spec.power[best] {
            best = k;
        }
    }
    let hw = spec.snr_half_width;
    let in_signal = |k: usize| -> bool {
        let d0 = k.abs_diff(best);
        if d0 <= hw {
            return true;
        }
        if include_harmonic {
            let harmonic = 2 * best;
            if harmonic <= spec.power.len() - 1 && k.abs_diff(harmonic) <= hw {
                return true;
            }
        }
        false
    };

    let mut signal = 0.0;
    let mut noise = 0.0;
    for k in lo..=hi {
        if in_signal(k) {
            signal += spec.power[k];
        } else {
            noise += spec.power[k];
        }
    }
    // the harmonic region may extend beyond the band; count it as signal
    if include_harmonic {
        let harmonic = 2 * best;
        if harmonic <= spec.power.len() - 1 {
            for k in harmonic.saturating_sub(hw)..=(harmonic + hw).min(spec.power.len() - 1) {
                if !(lo..=hi).contains(&k) {
                    signal += spec.power[k];
                }
            }
        }
    }

    if signal <= 0.0 {
        return Ok(SNR_FLOOR_DB);
    }
    let noise = noise.max(signal * 1e-12);
    Ok((10.0 * (signal / noise).log10()).max(SNR_FLOOR_DB))
}
