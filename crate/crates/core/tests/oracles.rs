mod support;

use plmdiag_core::dielectric::{equivalent_age, homogeneous_depth, max_field, CableSpec, MaterialParams};
use plmdiag_core::netmodel::{solve_network, FrequencyGrid, TimeGrid};
use plmdiag_core::reflectometry::{cross_correlate, gaussian_chirp, synthesize_rx, ChirpParams};
use plmdiag_core::SECONDS_PER_YEAR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{direct_convolution, direct_correlation, random_topology, rel_err, solve_nodal};

#[test]
fn network_solver_matches_nodal_analysis() {
    let time = TimeGrid::default();
    let grid = FrequencyGrid::plc_band(&time);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let scn = random_topology(&mut rng);
        let r = solve_network(&scn, &grid).unwrap();
        for i in (0..grid.count).step_by(37).chain([grid.count - 1]) {
            let nodal = solve_nodal(&scn, grid.frequency(i));
            for k in 0..3 {
                worst = worst.max(rel_err(r.z_in[k][i], nodal.z_in[k]));
                worst = worst.max(rel_err(r.h_pair[k][i], nodal.h[k]));
            }
        }
    }
    assert!(worst <= 1e-9, "worst relative deviation {worst:e}");
}

#[test]
fn transforms_match_direct_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = gaussian_chirp(&ChirpParams::default()).unwrap();
    for n in [1usize, 17, 600, 4096] {
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = synthesize_rx(&s, &h);
        let slow = direct_convolution(&s, &h);
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = fast.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-9 * scale, "convolution n={n}: {err:e}");
        let fast = cross_correlate(&s, &slow);
        let slow = direct_correlation(&s, &slow);
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = fast.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-9 * scale, "correlation n={n}: {err:e}");
    }
}

#[test]
fn equivalent_age_inverts_depth() {
    let p = MaterialParams::nominal();
    let f = max_field(&CableSpec::n2xsey()).unwrap();
    for years in [1e-3, 0.5, 1.0, 7.3, 30.0, 40.0] {
        let t = years * SECONDS_PER_YEAR;
        for field in [1e5, f, 1e7] {
            let back = equivalent_age(homogeneous_depth(t, field, &p).unwrap(), field, &p).unwrap();
            assert!((back - t).abs() <= 1e-9 * t, "t = {t}, F = {field}");
        }
    }
}
