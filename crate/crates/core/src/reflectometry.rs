//! Modem-side joint time-frequency domain reflectometry.
//!
//! A stored Gaussian-enveloped chirp is convolved with the reflection impulse
//! response to obtain the equivalent received signal, which is then
//! cross-correlated with the chirp and envelope-detected. Peaks in the
//! resulting waveform mark impedance discontinuities; their positions are
//! converted to distances by ratio against the known branch-point echo.

// Needed for float math without std; unused when dev-dependencies pull std in.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fft::{self, FftPlan};
use crate::netmodel::{impulse_response, FrequencyGrid, TimeGrid};
use crate::C64;

/// Gaussian-enveloped linear chirp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    pub f_low: f64,
    pub f_high: f64,
    /// s
    pub duration: f64,
    /// s
    pub gaussian_sigma: f64,
    /// Hz
    pub sample_rate: f64,
}

impl Default for ChirpParams {
    fn default() -> Self {
        Self {
            f_low: 2e6,
            f_high: 30e6,
            duration: 5e-6,
            gaussian_sigma: 5e-6 / 6.0,
            sample_rate: 100e6,
        }
    }
}

impl ChirpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(domain("sample_rate", self.sample_rate));
        }
        if !(self.f_low > 0.0 && self.f_low < self.f_high) {
            return Err(domain("f_low", self.f_low));
        }
        if self.f_high > self.sample_rate / 2.0 {
            return Err(Error::Nyquist {
                f_high: self.f_high,
                nyquist: self.sample_rate / 2.0,
            });
        }
        if !(self.duration > 0.0) {
            return Err(domain("duration", self.duration));
        }
        if !(self.gaussian_sigma > 0.0) {
            return Err(domain("gaussian_sigma", self.gaussian_sigma));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        libm::round(self.duration * self.sample_rate) as usize + 1
    }

    /// Instantaneous frequency of the sweep at time `t`.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_low + (self.f_high - self.f_low) * t / self.duration
    }

    /// Width of the envelope smoothing window, `ceil(f_s / f_high)` samples.
    pub fn envelope_width(&self) -> usize {
        libm::ceil(self.sample_rate / self.f_high - 1e-9) as usize
    }
}

/// Samples `s_gc(t) = g(t) c(t)` over `t in [0, duration]`.
pub fn gaussian_chirp(p: &ChirpParams) -> Result<Vec<f64>> {
    p.validate()?;
    let dt = 1.0 / p.sample_rate;
    let rate = (p.f_high - p.f_low) / p.duration;
    let center = p.duration / 2.0;
    Ok((0..p.num_samples())
        .map(|n| {
            let t = n as f64 * dt;
            let phase = 2.0 * PI * (p.f_low * t + 0.5 * rate * t * t);
            let x = (t - center) / p.gaussian_sigma;
            (-0.5 * x * x).exp() * phase.cos()
        })
        .collect())
}

/// Equivalent received signal: linear convolution of the chirp with the
/// reflection impulse response.
pub fn synthesize_rx(s_gc: &[f64], h_ref: &[f64]) -> Vec<f64> {
    fft::convolve(s_gc, h_ref)
}

/// `u[t] = sum_tau s[tau] rx[t + tau]` for lags `0 .. rx.len()`.
pub fn cross_correlate(s_gc: &[f64], rx: &[f64]) -> Vec<f64> {
    fft::correlate(s_gc, rx)
}

fn moving_average_forward(x: &[f64], width: usize) -> Vec<f64> {
    // Mirror padding: x[-m] = x[m].
    let n = x.len();
    let at = |i: isize| -> f64 {
        let j = i.unsigned_abs();
        x[j.min(n - 1)]
    };
    let mut out = Vec::with_capacity(n);
    let mut acc: f64 = (0..width as isize).map(|k| at(-k)).sum();
    out.push(acc / width as f64);
    for i in 1..n as isize {
        acc += at(i) - at(i - width as isize);
        out.push(acc / width as f64);
    }
    out
}

/// Envelope of a correlation output: `|u|` smoothed by a forward-backward
/// moving average of `width` samples (zero phase, non-negative).
pub fn envelope(u: &[f64], width: usize) -> Vec<f64> {
    if u.is_empty() {
        return Vec::new();
    }
    let width = width.max(1);
    let mag: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    let mut fwd = moving_average_forward(&mag, width);
    fwd.reverse();
    let mut out = moving_average_forward(&fwd, width);
    out.reverse();
    // Round-off can leave tiny negative values after the running sums.
    for v in out.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// A detected local maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    /// Sub-sample position from a parabolic fit through the three samples
    /// around `index`.
    pub position: f64,
    pub magnitude: f64,
}

/// Peak-detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub rel_threshold: f64,
    pub min_separation: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            rel_threshold: 0.02,
            min_separation: 20,
        }
    }
}

fn refine(h: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= h.len() {
        return i as f64;
    }
    let (a, b, c) = (h[i - 1], h[i], h[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return i as f64;
    }
    let off = 0.5 * (a - c) / den;
    i as f64 + off.clamp(-0.5, 0.5)
}

/// Local maxima above `rel_threshold * max(h)`, thinned greedily so that no
/// two survivors are closer than `min_separation` samples (larger magnitude
/// wins, ties go to the earlier index). Sorted by index.
pub fn detect_peaks(h: &[f64], rel_threshold: f64, min_separation: usize) -> Result<Vec<Peak>> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(domain("rel_threshold", rel_threshold));
    }
    let max = h.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Ok(Vec::new());
    }
    let floor = rel_threshold * max;
    let n = h.len();
    let mut cands: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = h[i];
            if v < floor || v <= 0.0 {
                return false;
            }
            let left_ok = i == 0 || v > h[i - 1];
            let right_ok = i + 1 == n || v >= h[i + 1];
            left_ok && right_ok
        })
        .collect();
    cands.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in cands {
        if kept.iter().all(|&k| k.abs_diff(c) >= min_separation) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    Ok(kept
        .into_iter()
        .map(|i| Peak {
            index: i,
            position: refine(h, i),
            magnitude: h[i],
        })
        .collect())
}

/// Waveform produced by the reflectometry chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JtfdrTrace {
    pub samples: Vec<f64>,
    /// s
    pub dt: f64,
    pub peaks: Vec<Peak>,
}

/// `l0 * n_i / n_bp` for every position.
pub fn ratio_distances(positions: &[f64], n_bp: f64, l0: f64) -> Result<Vec<f64>> {
    if !(n_bp > 0.0) {
        return Err(Error::LocalizationUnavailable("branch-point echo at lag zero"));
    }
    Ok(positions.iter().map(|&n| l0 * n / n_bp).collect())
}

/// Result of ratio localization.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub bp: Peak,
    /// Distances (m) of the peaks strictly between the origin echo and the
    /// branch-point echo, ordered by index.
    pub distances: Vec<f64>,
}

/// Locates interior discontinuities relative to the branch point `l0` metres
/// away. The branch-point echo is the last detected peak no later than
/// `expected_bp * (1 + tolerance)` and no earlier than
/// `expected_bp * (1 - tolerance)`; the first peak is the origin echo.
pub fn localize(peaks: &[Peak], l0: f64, expected_bp: f64, tolerance: f64) -> Result<Localization> {
    if peaks.len() < 2 {
        return Err(Error::LocalizationUnavailable("fewer than two peaks"));
    }
    let hi = expected_bp * (1.0 + tolerance);
    let lo = expected_bp * (1.0 - tolerance);
    let bp_idx = peaks
        .iter()
        .rposition(|p| p.position <= hi && p.position >= lo)
        .filter(|&i| i > 0)
        .ok_or(Error::LocalizationUnavailable("no branch-point echo near the expected lag"))?;
    let bp = peaks[bp_idx];
    let interior: Vec<f64> = peaks[1..bp_idx].iter().map(|p| p.position).collect();
    Ok(Localization {
        bp,
        distances: ratio_distances(&interior, bp.position, l0)?,
    })
}

/// Reusable reflectometry chain for a fixed chirp and time grid.
#[derive(Debug, Clone)]
pub struct Jtfdr {
    pub chirp: ChirpParams,
    pub time: TimeGrid,
    pub peaks: PeakParams,
    chirp_samples: Vec<f64>,
    plan: FftPlan,
    /// `|S|^2` on the padded grid.
    chirp_power: Vec<f64>,
}

impl Jtfdr {
    pub fn new(chirp: ChirpParams, time: TimeGrid, peaks: PeakParams) -> Result<Self> {
        if (chirp.sample_rate - time.sample_rate).abs() > 1e-9 * time.sample_rate {
            return Err(Error::InvalidParameter {
                name: "sample_rate",
                reason: alloc::format!(
                    "chirp at {} Hz but time grid at {} Hz",
                    chirp.sample_rate,
                    time.sample_rate
                ),
            });
        }
        let chirp_samples = gaussian_chirp(&chirp)?;
        let l = chirp_samples.len();
        // rx = s * h spans n_fft + l - 1 lags; negative correlation lags down
        // to -(l - 1) must not alias onto them.
        let plan = FftPlan::new((time.n_fft + 2 * l).next_power_of_two());
        let mut buf = vec![C64::new(0.0, 0.0); plan.len()];
        for (b, &s) in buf.iter_mut().zip(&chirp_samples) {
            b.re = s;
        }
        plan.forward(&mut buf);
        let chirp_power = buf.iter().map(|c| c.norm_sqr()).collect();
        Ok(Self {
            chirp,
            time,
            peaks,
            chirp_samples,
            plan,
            chirp_power,
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(ChirpParams::default(), TimeGrid::default(), PeakParams::default())
            .expect("default reflectometry parameters are valid")
    }

    pub fn chirp_samples(&self) -> &[f64] {
        &self.chirp_samples
    }

    /// Correlation output `u` for a real reflection impulse response, first
    /// `h.len()` lags. Equal to `cross_correlate(s, synthesize_rx(s, h))`
    /// truncated, computed as `IFFT(|S|^2 H)`.
    pub fn correlation(&self, h: &[f64]) -> Vec<f64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.plan.len()];
        for (b, &v) in buf.iter_mut().zip(h) {
            b.re = v;
        }
        self.plan.forward(&mut buf);
        for (b, &p) in buf.iter_mut().zip(&self.chirp_power) {
            *b *= p;
        }
        self.plan.inverse(&mut buf);
        buf.truncate(h.len());
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Envelope waveform for a real reflection impulse response (no peaks).
    pub fn waveform(&self, h: &[f64]) -> Vec<f64> {
        envelope(&self.correlation(h), self.chirp.envelope_width())
    }

    /// Full chain from a band-limited `H_ref` spectrum.
    pub fn trace(&self, h_ref: &[C64], grid: &FrequencyGrid) -> Result<JtfdrTrace> {
        let h = impulse_response(h_ref, grid, &self.time)?;
        let samples = self.waveform(&h);
        let peaks = detect_peaks(&samples, self.peaks.rel_threshold, self.peaks.min_separation)?;
        Ok(JtfdrTrace {
            samples,
            dt: self.time.dt(),
            peaks,
        })
    }
}
