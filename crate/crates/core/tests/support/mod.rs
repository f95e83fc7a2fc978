//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use plmdiag_core::dielectric::{series_permittivity, wt_permittivity, LocalDegradation};
use plmdiag_core::netmodel::{pul_parameters, Branch, BranchId, NetworkScenario, WtPerturbation, NUM_PLMS};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use plmdiag_core::C64;
use std::f64::consts::PI;

/// Dense complex Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        assert!(p.norm() > 0.0, "singular nodal matrix");
        for row in col + 1..n {
            let m = a[row][col] / p;
            if m.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let t = a[col][k];
                a[row][k] -= m * t;
            }
            let t = b[col];
            b[row] -= m * t;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Uniform pieces `(length, gamma)` of a branch from its PLM end.
fn pieces(b: &Branch) -> Vec<(f64, f64)> {
    let g = b.profile.gamma_homo;
    let mut out = match b.profile.local {
        None => vec![(b.length_m, g)],
        Some(ld) => {
            let s = ld.start_m.min(b.length_m);
            let e = (ld.start_m + ld.length_m).min(b.length_m);
            vec![(s, g), (e - s, ld.gamma_local), (b.length_m - e, g)]
        }
    };
    out.retain(|p| p.0 > 0.0);
    out
}

/// Nodal admittance-matrix solution of the T-network at one frequency.
pub struct Nodal {
    /// Input impedance at each PLM port (modem itself excluded).
    pub z_in: [C64; NUM_PLMS],
    /// `h[k]`: receiver voltage at PLM `(k + 1) % 3` for a unit EMF behind
    /// `z_plm` at PLM `k`, every other port loaded with `z_plm`.
    pub h: [C64; NUM_PLMS],
}

pub fn solve_nodal(scn: &NetworkScenario, f: f64) -> Nodal {
    let w = 2.0 * PI * f;
    let raw = wt_permittivity(f, &scn.material).unwrap();
    let p = scn.perturbation;
    let eps_wt = C64::new(raw.re * p.magnitude, raw.im * p.magnitude * p.loss_tangent);
    // Nodes: PLMs 0..3, branch point 3, BE ends 4..7, then interior joints.
    let bp = NUM_PLMS;
    let be = |k: usize| NUM_PLMS + 1 + k;
    let mut n_nodes = 2 * NUM_PLMS + 1;
    let mut stamps: Vec<(usize, usize, C64, C64)> = Vec::new();
    let mut add_branch = |b: &Branch, from: usize, to: usize, n_nodes: &mut usize| {
        let parts = pieces(b);
        let mut prev = from;
        for (i, &(len, g)) in parts.iter().enumerate() {
            let next = if i + 1 == parts.len() {
                to
            } else {
                *n_nodes += 1;
                *n_nodes - 1
            };
            let eps = series_permittivity(g, eps_wt, scn.material.eps_pe).unwrap();
            let pul = pul_parameters(&scn.cable, eps, f).unwrap();
            let z = C64::new(pul.r, w * pul.l);
            let y = C64::new(pul.g, w * pul.c);
            let gamma = (z * y).sqrt();
            let zc = (z / y).sqrt();
            let e1 = (-gamma * len).exp();
            let e2 = e1 * e1;
            let one = C64::new(1.0, 0.0);
            let y_self = (one + e2) / (one - e2) / zc;
            let y_mut = -(e1 * 2.0) / (one - e2) / zc;
            stamps.push((prev, next, y_self, y_mut));
            prev = next;
        }
    };
    for k in 0..NUM_PLMS {
        add_branch(&scn.trunks[k], k, bp, &mut n_nodes);
        add_branch(&scn.extensions[k], k, be(k), &mut n_nodes);
    }
    let base = {
        let mut m = vec![vec![C64::new(0.0, 0.0); n_nodes]; n_nodes];
        for &(a, b, ys, ym) in &stamps {
            m[a][a] += ys;
            m[b][b] += ys;
            m[a][b] += ym;
            m[b][a] += ym;
        }
        for k in 0..NUM_PLMS {
            m[be(k)][be(k)] += scn.loads[k].inv();
        }
        m
    };
    let y_plm = scn.z_plm.inv();
    let mut z_in = [C64::new(0.0, 0.0); NUM_PLMS];
    let mut h = [C64::new(0.0, 0.0); NUM_PLMS];
    for tx in 0..NUM_PLMS {
        let mut m = base.clone();
        for k in 0..NUM_PLMS {
            if k != tx {
                m[k][k] += y_plm;
            }
        }
        let mut i = vec![C64::new(0.0, 0.0); n_nodes];
        i[tx] = C64::new(1.0, 0.0);
        z_in[tx] = solve_dense(m.clone(), i.clone())[tx];
        m[tx][tx] += y_plm;
        i[tx] = y_plm;
        h[tx] = solve_dense(m, i)[(tx + 1) % NUM_PLMS];
    }
    Nodal { z_in, h }
}

/// `sum_k a[k] b[n - k]`, all `n`.
pub fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `sum_k s[k] r[k + n]` for lags `n = 0..r.len()`.
pub fn direct_correlation(s: &[f64], r: &[f64]) -> Vec<f64> {
    (0..r.len())
        .map(|n| s.iter().enumerate().filter_map(|(k, x)| r.get(k + n).map(|y| x * y)).sum())
        .collect()
}

pub fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Small T-network with random lengths, loads, aging and an optional
/// degradation on any branch.
pub fn random_topology(rng: &mut ChaCha8Rng) -> NetworkScenario {
    let loads = std::array::from_fn(|_| C64::new(rng.random_range(1.0..80.0), rng.random_range(-60.0..60.0)));
    let mut scn = NetworkScenario::symmetric(100.0, 0.0, loads);
    for id in NetworkScenario::branch_ids() {
        let b = scn.branch_mut(id);
        b.length_m = rng.random_range(20.0..800.0);
        b.profile.gamma_homo = rng.random_range(0.0..0.05);
    }
    if rng.random::<bool>() {
        let id = if rng.random::<bool>() {
            BranchId::Trunk(rng.random_range(0..3))
        } else {
            BranchId::Extension(rng.random_range(0..3))
        };
        let b = scn.branch_mut(id);
        let length_m = rng.random_range(0.1..0.9) * b.length_m;
        b.profile.local = Some(LocalDegradation {
            gamma_local: rng.random_range(0.1..1.0),
            start_m: rng.random_range(0.0..(b.length_m - length_m)),
            length_m,
        });
    }
    scn.z_plm = C64::new(rng.random_range(20.0..100.0), 0.0);
    scn.perturbation = WtPerturbation {
        magnitude: rng.random_range(0.8..1.2),
        loss_tangent: rng.random_range(0.8..1.2),
    };
    scn
}
