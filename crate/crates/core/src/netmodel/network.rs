use alloc::vec::Vec;

use cache::SmallCache;
use serde::{Deserialize, Serialize};

use super::{abcd_section, path_response, pul_parameters, Abcd, FrequencyGrid, PulParams};
use crate::dielectric::{series_permittivity, wt_permittivity, AgingProfile, CableSpec, MaterialParams};
use crate::error::{domain, Error, Result};
use crate::C64;

/// Number of modems on the T-network.
pub const NUM_PLMS: usize = 3;

/// One cable branch, oriented from its PLM end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub length_m: f64,
    pub profile: AgingProfile,
}

impl Branch {
    pub fn new(length_m: f64, gamma_homo: f64) -> Self {
        Self {
            length_m,
            profile: AgingProfile::homogeneous(gamma_homo),
        }
    }

    /// Uniform sub-sections `(length, gamma)` from the PLM end outwards.
    fn sections(&self) -> impl Iterator<Item = (f64, f64)> {
        let homo = self.profile.gamma_homo;
        let parts = match &self.profile.local {
            None => [(self.length_m, homo), (0.0, homo), (0.0, homo)],
            Some(ld) => {
                let start = ld.start_m.clamp(0.0, self.length_m);
                let end = ld.end_m().clamp(start, self.length_m);
                [(start, homo), (end - start, ld.gamma_local), (self.length_m - end, homo)]
            }
        };
        parts.into_iter().filter(|(len, _)| *len > 0.0)
    }
}

/// Multiplicative deviation applied to the WT-region permittivity: the real
/// part is scaled by `magnitude`, the loss tangent by `loss_tangent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtPerturbation {
    pub magnitude: f64,
    pub loss_tangent: f64,
}

impl Default for WtPerturbation {
    fn default() -> Self {
        Self {
            magnitude: 1.0,
            loss_tangent: 1.0,
        }
    }
}

impl WtPerturbation {
    fn apply(&self, eps: C64) -> C64 {
        C64::new(eps.re * self.magnitude, eps.im * self.magnitude * self.loss_tangent)
    }
}

/// T-network: PLM `k` connects to the branch point through `trunks[k]` and to
/// its branch-extension load `loads[k]` through `extensions[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub trunks: [Branch; NUM_PLMS],
    pub extensions: [Branch; NUM_PLMS],
    /// Branch-extension load impedances (Ohm).
    pub loads: [C64; NUM_PLMS],
    /// Modem port impedance (Ohm).
    pub z_plm: C64,
    pub cable: CableSpec,
    pub material: MaterialParams,
    #[serde(default)]
    pub perturbation: WtPerturbation,
    pub seed: u64,
    pub draw_index: u64,
}

/// Location of a branch in the T-network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchId {
    /// PLM `k` to the branch point.
    Trunk(usize),
    /// PLM `k` to its branch extension.
    Extension(usize),
}

impl BranchId {
    pub fn plm(&self) -> usize {
        match *self {
            BranchId::Trunk(k) | BranchId::Extension(k) => k,
        }
    }

    /// Categorical code `0..6`: trunks first.
    pub fn code(&self) -> usize {
        match *self {
            BranchId::Trunk(k) => k,
            BranchId::Extension(k) => NUM_PLMS + k,
        }
    }
}

impl NetworkScenario {
    /// Symmetric network with all branches `length_m` long, homogeneous
    /// aging `gamma_homo` and the given loads.
    pub fn symmetric(length_m: f64, gamma_homo: f64, loads: [C64; NUM_PLMS]) -> Self {
        let b = Branch::new(length_m, gamma_homo);
        Self {
            trunks: [b; NUM_PLMS],
            extensions: [b; NUM_PLMS],
            loads,
            z_plm: C64::new(50.0, 0.0),
            cable: CableSpec::n2xsey(),
            material: MaterialParams::nominal(),
            perturbation: WtPerturbation::default(),
            seed: 0,
            draw_index: 0,
        }
    }

    pub fn branch(&self, id: BranchId) -> &Branch {
        match id {
            BranchId::Trunk(k) => &self.trunks[k],
            BranchId::Extension(k) => &self.extensions[k],
        }
    }

    pub fn branch_mut(&mut self, id: BranchId) -> &mut Branch {
        match id {
            BranchId::Trunk(k) => &mut self.trunks[k],
            BranchId::Extension(k) => &mut self.extensions[k],
        }
    }

    pub fn branch_ids() -> impl Iterator<Item = BranchId> {
        (0..NUM_PLMS)
            .map(BranchId::Trunk)
            .chain((0..NUM_PLMS).map(BranchId::Extension))
    }

    /// The branch carrying the localized degradation, if any.
    pub fn ld_branch(&self) -> Option<BranchId> {
        Self::branch_ids().find(|id| self.branch(*id).profile.local.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        self.cable.validate()?;
        self.material.validate()?;
        if !(self.z_plm.re > 0.0) {
            return Err(domain("Re(z_plm)", self.z_plm.re));
        }
        let mut n_ld = 0;
        for id in Self::branch_ids() {
            let b = self.branch(id);
            if !(b.length_m > 0.0 && b.length_m.is_finite()) {
                return Err(domain("branch length", b.length_m));
            }
            b.profile.validate()?;
            if let Some(ld) = &b.profile.local {
                n_ld += 1;
                if ld.end_m() > b.length_m + 1e-9 {
                    return Err(domain("localized degradation end", ld.end_m()));
                }
            }
        }
        if n_ld > 1 {
            return Err(Error::InvalidParameter {
                name: "aging profiles",
                reason: alloc::format!("{n_ld} localized degradations; at most one is supported"),
            });
        }
        for z in &self.loads {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(domain("load impedance", z.re));
            }
        }
        Ok(())
    }
}

/// Channel quantities observed at one modem port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelObservation {
    pub grid: FrequencyGrid,
    /// End-to-end response from `observer` to `receiver`.
    pub h_f: Vec<C64>,
    /// Input impedance at the observer port.
    pub z_in: Vec<C64>,
    /// Reflection channel transfer function at the observer port.
    pub h_ref: Vec<C64>,
    pub observer: usize,
    pub receiver: usize,
}

/// All port impedances and pairwise transfer functions of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkResponse {
    pub grid: FrequencyGrid,
    pub z_plm: C64,
    pub z_in: [Vec<C64>; NUM_PLMS],
    /// `h_pair[k]` is the response between PLM `k` and PLM `(k + 1) % 3`.
    pub h_pair: [Vec<C64>; NUM_PLMS],
}

impl NetworkResponse {
    /// Transfer function between two distinct PLMs (the network is reciprocal
    /// and both ports share `z_plm`, so the direction does not matter).
    pub fn h_f(&self, a: usize, b: usize) -> &[C64] {
        assert!(a != b && a < NUM_PLMS && b < NUM_PLMS);
        let k = if (a + 1) % NUM_PLMS == b { a } else { b };
        &self.h_pair[k]
    }

    pub fn observation(&self, observer: usize, receiver: usize) -> Result<ChannelObservation> {
        let z_in = self.z_in[observer].clone();
        let h_ref = reflection_ctf(&z_in, self.z_plm)?;
        Ok(ChannelObservation {
            grid: self.grid,
            h_f: self.h_f(observer, receiver).to_vec(),
            z_in,
            h_ref,
            observer,
            receiver,
        })
    }
}

mod cache {
    /// Tiny linear cache keyed by exact `f64` equality.
    pub struct SmallCache<V: Copy, const N: usize> {
        keys: [f64; N],
        vals: [Option<V>; N],
        len: usize,
    }

    impl<V: Copy, const N: usize> SmallCache<V, N> {
        pub fn new() -> Self {
            Self {
                keys: [f64::NAN; N],
                vals: [None; N],
                len: 0,
            }
        }

        pub fn get_or_insert<E>(&mut self, key: f64, f: impl FnOnce() -> Result<V, E>) -> Result<V, E> {
            for i in 0..self.len {
                if self.keys[i] == key {
                    return Ok(self.vals[i].unwrap());
                }
            }
            let v = f()?;
            if self.len < N {
                self.keys[self.len] = key;
                self.vals[self.len] = Some(v);
                self.len += 1;
            }
            Ok(v)
        }
    }
}

fn parallel(a: C64, b: C64) -> C64 {
    // Admittance sum; robust when either impedance is zero.
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    (a.inv() + b.inv()).inv()
}

/// Solves the T-network at every grid frequency.
pub fn solve_network(scn: &NetworkScenario, grid: &FrequencyGrid) -> Result<NetworkResponse> {
    scn.validate()?;
    let mut z_in: [Vec<C64>; NUM_PLMS] = Default::default();
    let mut h_pair: [Vec<C64>; NUM_PLMS] = Default::default();
    for v in z_in.iter_mut().chain(h_pair.iter_mut()) {
        v.reserve_exact(grid.count);
    }
    for index in 0..grid.count {
        let f = grid.frequency(index);
        let singular = |_| Error::SingularNetwork { index, frequency: f };
        let eps_wt = scn.perturbation.apply(wt_permittivity(f, &scn.material)?);
        let mut pul_cache: SmallCache<PulParams, 4> = SmallCache::new();
        let mut branch_abcd = |b: &Branch| -> Result<Abcd> {
            let mut m = Abcd::identity();
            for (len, gamma) in b.sections() {
                let pul = pul_cache.get_or_insert(gamma, || {
                    let eps = series_permittivity(gamma, eps_wt, scn.material.eps_pe)?;
                    pul_parameters(&scn.cable, eps, f)
                })?;
                m = m.cascade(&abcd_section(&pul, len, f)?);
            }
            Ok(m)
        };

        let mut trunk = [Abcd::identity(); NUM_PLMS];
        let mut z_ext = [C64::new(0.0, 0.0); NUM_PLMS];
        for k in 0..NUM_PLMS {
            trunk[k] = branch_abcd(&scn.trunks[k])?;
            let ext = branch_abcd(&scn.extensions[k])?;
            z_ext[k] = ext
                .input_impedance(scn.loads[k])
                .ok_or(Error::SingularNetwork { index, frequency: f })?;
        }
        // Impedance at each PLM node excluding its trunk: modem port in
        // parallel with the extension branch.
        let z_node: [C64; NUM_PLMS] = core::array::from_fn(|k| parallel(scn.z_plm, z_ext[k]));
        // Impedance seen from the branch point into trunk k.
        let mut z_up = [C64::new(0.0, 0.0); NUM_PLMS];
        for k in 0..NUM_PLMS {
            z_up[k] = trunk[k]
                .reversed()
                .input_impedance(z_node[k])
                .ok_or(Error::SingularNetwork { index, frequency: f })?;
        }

        for tx in 0..NUM_PLMS {
            let rx = (tx + 1) % NUM_PLMS;
            let other = (tx + 2) % NUM_PLMS;
            let y_ext = if z_ext[tx].norm() == 0.0 {
                return Err(Error::SingularNetwork { index, frequency: f });
            } else {
                z_ext[tx].inv()
            };
            let y_side = if z_up[other].norm() == 0.0 {
                return Err(Error::SingularNetwork { index, frequency: f });
            } else {
                z_up[other].inv()
            };
            let path = Abcd::shunt_admittance(y_ext)
                .cascade(&trunk[tx])
                .cascade(&Abcd::shunt_admittance(y_side))
                .cascade(&trunk[rx].reversed());
            let (v_rx, zin) = path_response(&path, scn.z_plm, z_node[rx]).map_err(singular)?;
            if !(v_rx.re.is_finite() && v_rx.im.is_finite() && zin.re.is_finite() && zin.im.is_finite()) {
                return Err(Error::SingularNetwork { index, frequency: f });
            }
            h_pair[tx].push(v_rx);
            z_in[tx].push(zin);
        }
    }
    Ok(NetworkResponse {
        grid: *grid,
        z_plm: scn.z_plm,
        z_in,
        h_pair,
    })
}

/// `H_ref = (Z_in - Z_plm) / (Z_in + Z_plm)` per frequency point.
pub fn reflection_ctf(z_in: &[C64], z_plm: C64) -> Result<Vec<C64>> {
    if !(z_plm.re > 0.0) {
        return Err(domain("Re(z_plm)", z_plm.re));
    }
    z_in.iter()
        .map(|&z| {
            let den = z + z_plm;
            if den.norm() < 1e-12 * z_plm.norm() {
                Err(Error::Singular {
                    what: "reflection coefficient",
                    magnitude: den.norm(),
                })
            } else {
                Ok((z - z_plm) / den)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dielectric::LocalDegradation;
    use crate::netmodel::TimeGrid;

    fn loads() -> [C64; 3] {
        [C64::new(20.0, 10.0), C64::new(45.0, -30.0), C64::new(5.0, 40.0)]
    }

    #[test]
    fn reflection_examples() {
        let z = C64::new(50.0, 0.0);
        assert_eq!(reflection_ctf(&[z], z).unwrap()[0], C64::new(0.0, 0.0));
        let open = reflection_ctf(&[C64::new(1e15, 0.0)], z).unwrap()[0];
        assert!((open - C64::new(1.0, 0.0)).norm() < 1e-12);
        let short = reflection_ctf(&[C64::new(0.0, 0.0)], z).unwrap()[0];
        assert_eq!(short, C64::new(-1.0, 0.0));
        assert!(reflection_ctf(&[-z], z).is_err());
        assert!(reflection_ctf(&[z], C64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn response_is_reciprocal_in_pairs() {
        let tg = TimeGrid::default();
        let grid = FrequencyGrid::for_band(2e6, 3e6, &tg);
        let scn = NetworkScenario::symmetric(500.0, 0.02, loads());
        let r = solve_network(&scn, &grid).unwrap();
        assert_eq!(r.h_f(0, 1), r.h_f(1, 0));
        assert_eq!(r.z_in[0].len(), grid.count);
        let obs = r.observation(2, 0).unwrap();
        assert_eq!(obs.h_f, r.h_pair[2]);
    }

    #[test]
    fn symmetric_loads_give_symmetric_ports() {
        let tg = TimeGrid::default();
        let grid = FrequencyGrid::for_band(2e6, 3e6, &tg);
        let z = C64::new(30.0, -12.0);
        let scn = NetworkScenario::symmetric(500.0, 0.01, [z; 3]);
        let r = solve_network(&scn, &grid).unwrap();
        for i in 0..grid.count {
            assert!((r.z_in[0][i] - r.z_in[1][i]).norm() < 1e-9 * r.z_in[0][i].norm());
            assert!((r.h_pair[0][i] - r.h_pair[1][i]).norm() < 1e-9);
        }
    }

    #[test]
    fn validation_rejects_two_lds() {
        let mut scn = NetworkScenario::symmetric(500.0, 0.01, loads());
        let ld = LocalDegradation {
            gamma_local: 0.5,
            start_m: 100.0,
            length_m: 100.0,
        };
        scn.trunks[0].profile.local = Some(ld);
        scn.validate().unwrap();
        scn.extensions[1].profile.local = Some(ld);
        assert!(scn.validate().is_err());
    }

    #[test]
    fn ld_must_fit_in_branch() {
        let mut scn = NetworkScenario::symmetric(500.0, 0.01, loads());
        scn.trunks[0].profile.local = Some(LocalDegradation {
            gamma_local: 0.5,
            start_m: 400.0,
            length_m: 200.0,
        });
        assert!(scn.validate().is_err());
    }
}
