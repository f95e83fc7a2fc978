use serde::{Deserialize, Serialize};

/// Sampling of the time-domain waveforms derived from band spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_fft: usize,
    /// Hz
    pub sample_rate: f64,
}

impl TimeGrid {
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.n_fft as f64
    }
}

impl Default for TimeGrid {
    /// 4096 points at 100 MHz: 24.414 kHz bins, 10 ns samples.
    fn default() -> Self {
        Self {
            n_fft: 4096,
            sample_rate: 100e6,
        }
    }
}

/// Uniform frequency grid aligned to FFT bins: `f_k = (first_bin + k) * delta_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub first_bin: usize,
    pub delta_f: f64,
    pub count: usize,
}

impl FrequencyGrid {
    /// Every FFT bin of `time` inside `[f_low, f_high]`.
    pub fn for_band(f_low: f64, f_high: f64, time: &TimeGrid) -> Self {
        let delta_f = time.bin_width();
        let first_bin = libm::ceil(f_low / delta_f - 1e-9) as usize;
        let last_bin = libm::floor(f_high / delta_f + 1e-9) as usize;
        Self {
            first_bin,
            delta_f,
            count: last_bin + 1 - first_bin,
        }
    }

    /// The 2-30 MHz broadband PLC band.
    pub fn plc_band(time: &TimeGrid) -> Self {
        Self::for_band(2e6, 30e6, time)
    }

    pub fn f_start(&self) -> f64 {
        self.first_bin as f64 * self.delta_f
    }

    pub fn frequency(&self, i: usize) -> f64 {
        (self.first_bin + i) as f64 * self.delta_f
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.frequency(i))
    }
}
