//! Frequency-domain channel model of a T-network of degraded cable sections.
//!
//! Each uniform section becomes a telegrapher two-port; sections are cascaded
//! along the transmitter-to-receiver path while side branches fold into shunt
//! impedances.

mod grid;
mod network;
mod pul;
mod twoport;

pub use grid::{FrequencyGrid, TimeGrid};
pub use network::{
    reflection_ctf, solve_network, Branch, BranchId, ChannelObservation, NetworkResponse, NetworkScenario,
    WtPerturbation, NUM_PLMS,
};
pub use pul::{abcd_section, pul_parameters, PulParams, COPPER_CONDUCTIVITY};
pub use twoport::{path_response, Abcd};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::C64;

pub(crate) fn impulse_response_complex(h: &[C64], grid: &FrequencyGrid, time: &TimeGrid) -> Result<Vec<C64>> {
    if h.len() != grid.count {
        return Err(Error::Dimension {
            what: "band spectrum",
            expected: grid.count,
            got: h.len(),
        });
    }
    let bin_width = time.sample_rate / time.n_fft as f64;
    if (bin_width - grid.delta_f).abs() > 1e-9 * bin_width {
        return Err(Error::InvalidParameter {
            name: "delta_f",
            reason: alloc::format!("grid spacing {} Hz differs from f_s/N = {bin_width} Hz", grid.delta_f),
        });
    }
    let last = grid.first_bin + grid.count;
    if grid.first_bin == 0 || last > time.n_fft / 2 {
        return Err(Error::InvalidParameter {
            name: "frequency grid",
            reason: alloc::format!("bins {}..{last} do not fit below Nyquist of {}", grid.first_bin, time.n_fft),
        });
    }
    let n = time.n_fft;
    let mut spec = vec![C64::new(0.0, 0.0); n];
    for (i, &v) in h.iter().enumerate() {
        let k = grid.first_bin + i;
        spec[k] = v;
        spec[n - k] = v.conj();
    }
    FftPlan::new(n).inverse(&mut spec);
    Ok(spec)
}

/// Real impulse response of a band-limited spectrum: the band is embedded
/// into a Hermitian-symmetric `n_fft`-point spectrum (zero elsewhere) and
/// inverse transformed. Sample `n` sits at time `n / sample_rate`.
pub fn impulse_response(h: &[C64], grid: &FrequencyGrid, time: &TimeGrid) -> Result<Vec<f64>> {
    Ok(impulse_response_complex(h, grid, time)?.into_iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn argmax_abs(x: &[f64]) -> usize {
        x.iter()
            .enumerate()
            .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
            .0
    }

    #[test]
    fn flat_band_peaks_at_origin() {
        let tg = TimeGrid::default();
        let grid = FrequencyGrid::plc_band(&tg);
        let h = vec![C64::new(1.0, 0.0); grid.count];
        let x = impulse_response(&h, &grid, &tg).unwrap();
        assert_eq!(x.len(), 4096);
        assert_eq!(argmax_abs(&x), 0);
    }

    #[test]
    fn pure_delay_peaks_at_delay() {
        let tg = TimeGrid::default();
        let grid = FrequencyGrid::plc_band(&tg);
        let tau = 1e-6;
        let h: Vec<C64> = grid
            .frequencies()
            .map(|f| C64::from_polar(1.0, -2.0 * PI * f * tau))
            .collect();
        let x = impulse_response(&h, &grid, &tg).unwrap();
        assert_eq!(argmax_abs(&x), 100);
    }

    #[test]
    fn hermitian_residue_is_negligible() {
        let tg = TimeGrid::default();
        let grid = FrequencyGrid::plc_band(&tg);
        let h: Vec<C64> = grid
            .frequencies()
            .enumerate()
            .map(|(i, f)| C64::from_polar(1.0 / (1.0 + i as f64 * 0.01), -2.0 * PI * f * 3.3e-6 + 0.2))
            .collect();
        let x = impulse_response_complex(&h, &grid, &tg).unwrap();
        let peak = x.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let residue = x.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        assert!(residue < 1e-10 * peak, "residue {residue} peak {peak}");
    }

    #[test]
    fn rejects_mismatched_grid() {
        let tg = TimeGrid::default();
        let grid = FrequencyGrid::plc_band(&tg);
        let h = vec![C64::new(1.0, 0.0); grid.count - 1];
        assert!(impulse_response(&h, &grid, &tg).is_err());
        let other = TimeGrid {
            n_fft: 2048,
            sample_rate: 100e6,
        };
        let h = vec![C64::new(1.0, 0.0); grid.count];
        assert!(impulse_response(&h, &grid, &other).is_err());
    }
}
