//! Radix-2 FFT and the transform-based linear convolution / correlation
//! built on it.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::C64;

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<C64>,
    rev: Vec<u32>,
}

impl FftPlan {
    /// Panics if `n` is not a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                C64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let bits = n.trailing_zeros();
        let rev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Self { n, twiddles, rev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X[k] = sum x[n] e^{-j 2 pi k n / N}`.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, false);
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }

    fn transform(&self, data: &mut [C64], inverse: bool) {
        assert_eq!(data.len(), self.n);
        for i in 0..self.n {
            let j = self.rev[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let step = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

fn padded_spectrum(x: &[f64], plan: &FftPlan) -> Vec<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); plan.len()];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    plan.forward(&mut buf);
    buf
}

/// Linear convolution, length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let plan = FftPlan::new(out_len.next_power_of_two());
    let fa = padded_spectrum(a, &plan);
    let mut fb = padded_spectrum(b, &plan);
    for (y, x) in fb.iter_mut().zip(&fa) {
        *y *= x;
    }
    plan.inverse(&mut fb);
    fb.truncate(out_len);
    fb.into_iter().map(|c| c.re).collect()
}

/// Non-negative-lag cross-correlation `u[t] = sum_tau s[tau] * r[t + tau]`,
/// `t = 0 .. r.len()`.
pub fn correlate(s: &[f64], r: &[f64]) -> Vec<f64> {
    if r.is_empty() {
        return Vec::new();
    }
    if s.is_empty() {
        return vec![0.0; r.len()];
    }
    // Negative lags wrap to the top of the buffer; pad so they never alias
    // onto lags 0..r.len().
    let plan = FftPlan::new((r.len() + s.len()).next_power_of_two());
    let fs = padded_spectrum(s, &plan);
    let mut fr = padded_spectrum(r, &plan);
    for (y, x) in fr.iter_mut().zip(&fs) {
        *y *= x.conj();
    }
    plan.inverse(&mut fr);
    fr.truncate(r.len());
    fr.into_iter().map(|c| c.re).collect()
}
