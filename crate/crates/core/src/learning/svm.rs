//! Soft-margin support vector machines solved with SMO.
//!
//! Both machines are instances of
//!
//! ```text
//! min 1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a <= C
//! ```
//!
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Classification uses `p = -1`;
//! epsilon-regression doubles the variables (`a` and `a*`) with
//! `p = eps -/+ z`. The working pair is chosen with second-order
//! information and the loop stops when the maximal KKT violation drops below
//! the tolerance.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma |x - z|^2)`
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                libm::exp(-gamma * d2)
            }
        }
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Kernel rows kept in the cache.
    pub cache_rows: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
            cache_rows: 4096,
        }
    }
}

/// Kernel rows over the base samples, computed on demand and evicted
/// first-in first-out.
struct KernelCache<'a> {
    x: &'a [Vec<f64>],
    kernel: Kernel,
    rows: Vec<Option<Vec<f64>>>,
    order: alloc::collections::VecDeque<usize>,
    capacity: usize,
    diag: Vec<f64>,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a [Vec<f64>], kernel: Kernel, capacity: usize) -> Self {
        let diag = x.iter().map(|r| kernel.eval(r, r)).collect();
        Self {
            x,
            kernel,
            rows: vec![None; x.len()],
            order: alloc::collections::VecDeque::new(),
            capacity: capacity.max(2),
            diag,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.rows[old] = None;
                }
            }
            let xi = &self.x[i];
            let r = self.x.iter().map(|xj| self.kernel.eval(xi, xj)).collect();
            self.rows[i] = Some(r);
            self.order.push_back(i);
        }
        self.rows[i].as_deref().expect("row just filled")
    }
}

struct Dual {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    gap: f64,
}

/// Solves the dual over `2 * n` (regression) or `n` (classification)
/// variables; variable `t` refers to base sample `t % n`.
fn solve(
    cache: &mut KernelCache<'_>,
    y: &[f64],
    p: &[f64],
    params: &SvmParams,
) -> Dual {
    let l = y.len();
    let n = cache.x.len();
    let c = params.c;
    let mut alpha = vec![0.0; l];
    let mut grad = p.to_vec();
    let tau = 1e-12;
    let mut iterations = 0;
    let mut gap;
    let q_diag = |t: usize, cache: &KernelCache<'_>| cache.diag[t % n];
    let up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
    let low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c);
    loop {
        // i: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if up(t, &alpha) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..l {
            if low(t, &alpha) {
                gmin = gmin.min(-y[t] * grad[t]);
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || gap < params.tolerance || iterations >= params.max_iterations {
            break;
        }
        // j: second-order choice in I_low.
        let ki: Vec<f64> = cache.row(i % n).to_vec();
        let kii = q_diag(i, cache);
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..l {
            if !low(t, &alpha) {
                continue;
            }
            let v = -y[t] * grad[t];
            let b = gmax - v;
            if b > 0.0 {
                let mut a = kii + q_diag(t, cache) - 2.0 * ki[t % n];
                if a <= 0.0 {
                    a = tau;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            break;
        }
        iterations += 1;
        let kj: Vec<f64> = cache.row(j % n).to_vec();
        let kij = ki[j % n];
        let kjj = q_diag(j, cache);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kii + kjj - 2.0 * kij;
            if quad <= 0.0 {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * kij;
            if quad <= 0.0 {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..l {
            let b = t % n;
            grad[t] += y[t] * (y[i] * ki[b] * di + y[j] * kj[b] * dj);
        }
    }
    // Offset from free variables, midpoint of the feasible interval otherwise.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..l {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Dual {
        alpha,
        rho,
        iterations,
        gap,
    }
}

/// Trained kernel expansion `f(x) = sum coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Maximal KKT violation at termination.
    pub kkt_gap: f64,
    pub iterations: usize,
    /// Applied to regression outputs: `mean + scale * f(x)`.
    pub target_mean: f64,
    pub target_scale: f64,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let s: f64 = self.support.iter().zip(&self.coef).map(|(sv, c)| c * self.kernel.eval(sv, x)).sum();
        s - self.rho
    }

    /// Regression output in target units.
    pub fn regress(&self, x: &[f64]) -> f64 {
        self.target_mean + self.target_scale * self.decision(x)
    }

    pub fn converged(&self, tolerance: f64) -> bool {
        self.kkt_gap <= tolerance
    }
}

fn check_rows(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            what: "labels",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientSamples {
            task: String::from("svm"),
            n_samples: x.len(),
            n_features: x.first().map_or(0, |r| r.len()),
        });
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            what: "feature row",
            expected: d,
            got: r.len(),
        });
    }
    Ok(())
}

fn collect_support(x: &[Vec<f64>], coef: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut support = Vec::new();
    let mut kept = Vec::new();
    for (row, c) in x.iter().zip(coef) {
        if c != 0.0 {
            support.push(row.clone());
            kept.push(c);
        }
    }
    (support, kept)
}

/// Soft-margin classifier; `y` holds `+1` / `-1`.
pub fn train_svc(x: &[Vec<f64>], y: &[f64], kernel: Kernel, params: &SvmParams) -> Result<SvmModel> {
    check_rows(x, y)?;
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: String::from("classification labels must be +1 or -1"),
        });
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass(String::from("svc")));
    }
    let mut cache = KernelCache::new(x, kernel, params.cache_rows);
    let p = vec![-1.0; x.len()];
    let dual = solve(&mut cache, y, &p, params);
    let coef = dual.alpha.iter().zip(y).map(|(a, yi)| a * yi).collect();
    let (support, coef) = collect_support(x, coef);
    Ok(SvmModel {
        kernel,
        support,
        coef,
        rho: dual.rho,
        kkt_gap: dual.gap,
        iterations: dual.iterations,
        target_mean: 0.0,
        target_scale: 1.0,
    })
}

/// Epsilon-insensitive regression. Targets are standardized internally, so
/// `epsilon` is in units of the target standard deviation.
pub fn train_svr(x: &[Vec<f64>], y: &[f64], kernel: Kernel, epsilon: f64, params: &SvmParams) -> Result<SvmModel> {
    check_rows(x, y)?;
    if !(epsilon >= 0.0) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
        });
    }
    let n = x.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = libm::sqrt(y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64);
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let z: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
    let mut signs = vec![1.0; 2 * n];
    let mut p = vec![0.0; 2 * n];
    for i in 0..n {
        p[i] = epsilon - z[i];
        p[i + n] = epsilon + z[i];
        signs[i + n] = -1.0;
    }
    let mut cache = KernelCache::new(x, kernel, params.cache_rows);
    let dual = solve(&mut cache, &signs, &p, params);
    let coef = (0..n).map(|i| dual.alpha[i] - dual.alpha[i + n]).collect();
    let (support, coef) = collect_support(x, coef);
    Ok(SvmModel {
        kernel,
        support,
        coef,
        rho: dual.rho,
        kkt_gap: dual.gap,
        iterations: dual.iterations,
        target_mean: mean,
        target_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![-1.0, -1.0, 1.0, 1.0],
        )
    }

    #[test]
    fn two_points_linear() {
        let x = vec![vec![-1.0, 0.0], vec![1.0, 0.5]];
        let y = vec![-1.0, 1.0];
        let m = train_svc(&x, &y, Kernel::Linear, &SvmParams::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!(yi * m.decision(xi) >= 0.0);
        }
        assert!(m.converged(1e-3));
    }

    #[test]
    fn xor_rbf_separates() {
        let (x, y) = xor();
        let m = train_svc(&x, &y, Kernel::Rbf { gamma: 1.0 }, &SvmParams::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!(yi * m.decision(xi) > 0.0);
        }
    }

    #[test]
    fn duplicated_points_keep_decision() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![libm::sin(t) * 2.0, libm::cos(1.3 * t)]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] + 0.5 * r[1] > 0.2 { 1.0 } else { -1.0 }).collect();
        let k = Kernel::Rbf { gamma: 0.5 };
        let p = SvmParams {
            tolerance: 1e-6,
            ..Default::default()
        };
        let m1 = train_svc(&x, &y, k, &p).unwrap();
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().copied());
        // Doubling every point doubles the data term; halving C restores the
        // same optimum.
        let p2 = SvmParams { c: p.c / 2.0, ..p };
        let m2 = train_svc(&x2, &y2, k, &p2).unwrap();
        for xi in &x {
            assert!((m1.decision(xi) - m2.decision(xi)).abs() < 1e-3);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_svc(&x, &[1.0, 1.0], Kernel::Linear, &SvmParams::default()),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn svr_exact_line() {
        let x: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 / 5.0 - 2.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - 1.0).collect();
        let eps = 0.01;
        let m = train_svr(&x, &y, Kernel::Linear, eps, &SvmParams::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            // eps is in standardized units.
            assert!((m.regress(xi) - yi).abs() <= (eps + 1e-6 + 1e-3) * m.target_scale);
        }
    }

    #[test]
    fn svr_constant_target() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![4.2; 10];
        let m = train_svr(&x, &y, Kernel::Rbf { gamma: 1.0 }, 0.01, &SvmParams::default()).unwrap();
        for xi in &x {
            assert!((m.regress(xi) - 4.2).abs() <= 0.01);
        }
    }

    #[test]
    fn svr_noisy_sine() {
        let mut seed = 3u64;
        let mut noise = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.2
        };
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0 * 2.0 * core::f64::consts::PI]).collect();
        let y: Vec<f64> = x.iter().map(|r| libm::sin(r[0]) + noise()).collect();
        let m = train_svr(&x, &y, Kernel::Rbf { gamma: 1.0 }, 0.01, &SvmParams::default()).unwrap();
        let mean = y.iter().sum::<f64>() / 20.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 20.0;
        let mse = x.iter().zip(&y).map(|(xi, yi)| (m.regress(xi) - yi).powi(2)).sum::<f64>() / 20.0;
        assert!(mse < var, "mse {mse} var {var}");
    }
}
