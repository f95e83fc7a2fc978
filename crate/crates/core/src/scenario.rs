//! Seeded random scenarios and labeled samples.
//!
//! Every draw uses its own ChaCha8 stream: the generator is keyed by the
//! configuration seed and the stream number is the draw index, so sample `i`
//! is the same no matter which worker produces it or in which order.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dielectric::{
    equivalent_age_of_gamma, AgingProfile, CableSpec, LocalDegradation, MaterialParams, GAMMA_HOMO_MAX,
    GAMMA_LOCAL_MIN,
};
use crate::error::{Error, Result};
use crate::netmodel::{
    solve_network, BranchId, ChannelObservation, FrequencyGrid, NetworkScenario, TimeGrid, WtPerturbation,
    NUM_PLMS,
};
use crate::C64;

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        (self.lo + u * (self.hi - self.lo)).clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    fn check(&self, name: &'static str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::InvalidParameter {
                name,
                reason: alloc::format!("[{}, {}] is not a valid range", self.lo, self.hi),
            });
        }
        Ok(())
    }

    fn within(&self, name: &'static str, lo: f64, hi: f64) -> Result<()> {
        self.check(name)?;
        if self.lo < lo || self.hi > hi {
            return Err(Error::InvalidParameter {
                name,
                reason: alloc::format!("[{}, {}] must lie inside [{lo}, {hi}]", self.lo, self.hi),
            });
        }
        Ok(())
    }
}

/// Sampling ranges and topology for scenario generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub gamma_homo: Range,
    pub gamma_local: Range,
    /// Length of the localized degradation (m).
    pub lwt_m: Range,
    /// Offset of the degradation center from the branch center (m).
    pub ld_center_offset_m: Range,
    pub load_re: Range,
    pub load_im: Range,
    /// PLM to branch point (m).
    pub trunk_length_m: f64,
    /// PLM to branch-extension load (m).
    pub extension_length_m: f64,
    /// Fraction of positive samples in classification datasets.
    pub positive_fraction: f64,
    /// Exact class balance by index instead of independent draws.
    pub balanced: bool,
    /// Fraction of identification negatives that carry a degradation on a
    /// branch not adjacent to the observing PLM.
    pub remote_ld_fraction: f64,
    pub z_plm_ohm: f64,
    /// Factor on the WT-region permittivity, drawn per sample.
    pub wt_magnitude: Range,
    /// Factor on the WT-region loss tangent, drawn per sample.
    pub wt_loss_tangent: Range,
    /// Standard deviation of complex Gaussian noise added to `H_f` and
    /// `H_ref`, relative to their RMS value. Zero disables it.
    pub channel_noise: f64,
    pub time: TimeGrid,
    pub cable: CableSpec,
    pub material: MaterialParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            gamma_homo: Range::new(0.0, GAMMA_HOMO_MAX),
            gamma_local: Range::new(GAMMA_LOCAL_MIN, 1.0),
            lwt_m: Range::new(100.0, 300.0),
            ld_center_offset_m: Range::new(-100.0, 100.0),
            load_re: Range::new(0.0, 50.0),
            load_im: Range::new(-50.0, 50.0),
            trunk_length_m: 500.0,
            extension_length_m: 500.0,
            positive_fraction: 0.5,
            balanced: true,
            remote_ld_fraction: 0.5,
            z_plm_ohm: 50.0,
            wt_magnitude: Range::new(1.0, 1.0),
            wt_loss_tangent: Range::new(1.0, 1.0),
            channel_noise: 0.0,
            time: TimeGrid::default(),
            cable: CableSpec::n2xsey(),
            material: MaterialParams::nominal(),
        }
    }
}

const AUX_WORD_OFFSET: u128 = 1 << 40;
const PERTURBATION_SLOT: u64 = 0;
const NOISE_SLOT: u64 = 1;

/// Retries allowed when a drawn degradation cannot fit its branch.
pub const MAX_GEOMETRY_RETRIES: u32 = 16;

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.gamma_homo.within("gamma_homo", 0.0, GAMMA_HOMO_MAX)?;
        self.gamma_local.within("gamma_local", GAMMA_LOCAL_MIN, 1.0)?;
        if self.gamma_local.lo <= self.gamma_homo.hi {
            return Err(Error::InvalidParameter {
                name: "gamma_local",
                reason: String::from("must exceed every homogeneous depth"),
            });
        }
        self.lwt_m.check("lwt_m")?;
        if !(self.lwt_m.lo > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lwt_m",
                reason: String::from("degradation length must be positive"),
            });
        }
        self.ld_center_offset_m.check("ld_center_offset_m")?;
        self.load_re.check("load_re")?;
        if self.load_re.lo < 0.0 {
            return Err(Error::InvalidParameter {
                name: "load_re",
                reason: String::from("load resistance must be non-negative"),
            });
        }
        self.load_im.check("load_im")?;
        for (name, v) in [
            ("trunk_length_m", self.trunk_length_m),
            ("extension_length_m", self.extension_length_m),
            ("z_plm_ohm", self.z_plm_ohm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: alloc::format!("{v} must be positive"),
                });
            }
        }
        for (name, v) in [
            ("positive_fraction", self.positive_fraction),
            ("remote_ld_fraction", self.remote_ld_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: alloc::format!("{v} must lie in [0, 1]"),
                });
            }
        }
        for (name, r) in [("wt_magnitude", self.wt_magnitude), ("wt_loss_tangent", self.wt_loss_tangent)] {
            r.check(name)?;
            if !(r.lo > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: String::from("factors must be positive"),
                });
            }
        }
        if !(self.channel_noise >= 0.0 && self.channel_noise.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "channel_noise",
                reason: alloc::format!("{} must be a non-negative number", self.channel_noise),
            });
        }
        if !self.time.n_fft.is_power_of_two() || !(self.time.sample_rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "time",
                reason: String::from("n_fft must be a power of two and sample_rate positive"),
            });
        }
        if FrequencyGrid::plc_band(&self.time).first_bin + FrequencyGrid::plc_band(&self.time).count
            >= self.time.n_fft / 2
        {
            return Err(Error::Nyquist {
                f_high: 30e6,
                nyquist: self.time.sample_rate / 2.0,
            });
        }
        self.cable.validate()?;
        self.material.validate()
    }

    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid::plc_band(&self.time)
    }

    /// Generator for draw `index`.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Generator for the auxiliary draws (perturbation, noise) of `index`.
    /// It reads the same stream far past the words used by scenario
    /// sampling, so enabling these knobs never changes the scenario drawn.
    pub fn aux_rng(&self, index: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = self.rng(index);
        rng.set_word_pos(AUX_WORD_OFFSET * (slot as u128 + 1));
        rng
    }

    fn base_network(&self, gamma_homo: f64, loads: [C64; NUM_PLMS], index: u64) -> NetworkScenario {
        let mut scn = NetworkScenario::symmetric(self.trunk_length_m, gamma_homo, loads);
        for ext in scn.extensions.iter_mut() {
            ext.length_m = self.extension_length_m;
        }
        scn.z_plm = C64::new(self.z_plm_ohm, 0.0);
        scn.cable = self.cable;
        scn.material = self.material;
        scn.seed = self.seed;
        scn.draw_index = index;
        scn
    }

    /// Whether draw `index` of a classification dataset is a positive.
    pub fn is_positive<R: Rng>(&self, index: u64, rng: &mut R) -> bool {
        if self.balanced {
            let p = self.positive_fraction;
            libm::floor((index + 1) as f64 * p) > libm::floor(index as f64 * p)
        } else {
            rng.random::<f64>() < self.positive_fraction
        }
    }
}

/// Where a draw places its localized degradation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LdPlacement {
    None,
    On(BranchId),
}

/// Draws a localized degradation inside a branch of `branch_len` metres.
fn draw_ld<R: Rng>(cfg: &ScenarioConfig, branch_len: f64, gamma_homo: f64, rng: &mut R) -> Result<LocalDegradation> {
    for _ in 0..MAX_GEOMETRY_RETRIES {
        let gamma_local = cfg.gamma_local.sample(rng).max(gamma_homo + 1e-6);
        let length_m = cfg.lwt_m.sample(rng);
        let center = branch_len / 2.0 + cfg.ld_center_offset_m.sample(rng);
        if length_m > branch_len {
            continue;
        }
        let start_m = (center - length_m / 2.0).clamp(0.0, branch_len - length_m);
        return Ok(LocalDegradation {
            gamma_local,
            start_m,
            length_m,
        });
    }
    Err(Error::InfeasibleGeometry {
        attempts: MAX_GEOMETRY_RETRIES,
        reason: "degradation longer than its branch",
    })
}

/// Deterministic scenario for `(cfg.seed, draw_index)` with the degradation
/// placed as requested.
pub fn sample_with_placement<R: Rng>(
    cfg: &ScenarioConfig,
    draw_index: u64,
    placement: LdPlacement,
    rng: &mut R,
) -> Result<NetworkScenario> {
    let gamma_homo = cfg.gamma_homo.sample(rng);
    let loads: [C64; NUM_PLMS] = core::array::from_fn(|_| {
        let re = cfg.load_re.sample(rng);
        let im = cfg.load_im.sample(rng);
        C64::new(re, im)
    });
    let mut scn = cfg.base_network(gamma_homo, loads, draw_index);
    if let LdPlacement::On(id) = placement {
        let len = scn.branch(id).length_m;
        let ld = draw_ld(cfg, len, gamma_homo, rng)?;
        scn.branch_mut(id).profile.local = Some(ld);
    }
    let mut aux = cfg.aux_rng(draw_index, PERTURBATION_SLOT);
    scn.perturbation = WtPerturbation {
        magnitude: cfg.wt_magnitude.sample(&mut aux),
        loss_tangent: cfg.wt_loss_tangent.sample(&mut aux),
    };
    scn.validate()?;
    Ok(scn)
}

/// Scenario for draw `draw_index`: a degradation is present with probability
/// `cfg.positive_fraction` on a uniformly chosen branch.
pub fn sample_scenario(cfg: &ScenarioConfig, draw_index: u64) -> Result<NetworkScenario> {
    cfg.validate()?;
    let mut rng = cfg.rng(draw_index);
    let placement = if rng.random::<f64>() < cfg.positive_fraction {
        let code = rng.random_range(0..2 * NUM_PLMS);
        LdPlacement::On(branch_from_code(code))
    } else {
        LdPlacement::None
    };
    sample_with_placement(cfg, draw_index, placement, &mut rng)
}

pub fn branch_from_code(code: usize) -> BranchId {
    if code < NUM_PLMS {
        BranchId::Trunk(code)
    } else {
        BranchId::Extension(code - NUM_PLMS)
    }
}

/// Learning task; fixes the sampling rule, the observing PLM and the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskId {
    /// Stage 1 at PLM `k`: degradation on either branch adjacent to `k`.
    LdIdentify(usize),
    /// Stage 2: the next PLM decides between PLM 0's trunk and extension.
    BranchLocate,
    GammaHomo,
    GammaLocal,
    Target,
    Product,
}

impl TaskId {
    pub const ALL: [TaskId; 8] = [
        TaskId::LdIdentify(0),
        TaskId::LdIdentify(1),
        TaskId::LdIdentify(2),
        TaskId::BranchLocate,
        TaskId::GammaHomo,
        TaskId::GammaLocal,
        TaskId::Target,
        TaskId::Product,
    ];

    pub fn is_classification(&self) -> bool {
        matches!(self, TaskId::LdIdentify(_) | TaskId::BranchLocate)
    }

    /// PLM whose port provides the features.
    pub fn observer(&self) -> usize {
        match *self {
            TaskId::LdIdentify(k) => k,
            TaskId::BranchLocate => 1,
            _ => 0,
        }
    }

    /// Far end of the end-to-end response used by the task.
    pub fn receiver(&self) -> usize {
        (self.observer() + 1) % NUM_PLMS
    }

    /// Training label: `+1/-1` for classification, the target value otherwise.
    pub fn label(&self, l: &Labels) -> f64 {
        let sign = |b: bool| if b { 1.0 } else { -1.0 };
        match *self {
            TaskId::LdIdentify(k) => sign(l.ld_branch.is_some_and(|b| b.plm() == k)),
            TaskId::BranchLocate => sign(matches!(l.ld_branch, Some(BranchId::Trunk(_)))),
            TaskId::GammaHomo => l.gamma_homo,
            TaskId::GammaLocal => l.gamma_local,
            TaskId::Target => l.target_m,
            TaskId::Product => l.product,
        }
    }

    /// Tasks whose datasets follow the same sampling rule can share files.
    pub fn sampling_family(&self) -> TaskId {
        match self {
            TaskId::GammaLocal | TaskId::Target | TaskId::Product => TaskId::GammaLocal,
            t => *t,
        }
    }

    /// Degradation placement for draw `index`.
    pub fn placement<R: Rng>(&self, cfg: &ScenarioConfig, index: u64, rng: &mut R) -> LdPlacement {
        match *self {
            TaskId::LdIdentify(k) => {
                if cfg.is_positive(index, rng) {
                    if rng.random::<bool>() {
                        LdPlacement::On(BranchId::Trunk(k))
                    } else {
                        LdPlacement::On(BranchId::Extension(k))
                    }
                } else if rng.random::<f64>() < cfg.remote_ld_fraction {
                    let others: Vec<BranchId> = NetworkScenario::branch_ids().filter(|b| b.plm() != k).collect();
                    LdPlacement::On(others[rng.random_range(0..others.len())])
                } else {
                    LdPlacement::None
                }
            }
            TaskId::BranchLocate => {
                if cfg.is_positive(index, rng) {
                    LdPlacement::On(BranchId::Trunk(0))
                } else {
                    LdPlacement::On(BranchId::Extension(0))
                }
            }
            TaskId::GammaHomo => LdPlacement::None,
            TaskId::GammaLocal | TaskId::Target | TaskId::Product => LdPlacement::On(BranchId::Trunk(0)),
        }
    }

    pub fn sample(&self, cfg: &ScenarioConfig, index: u64) -> Result<NetworkScenario> {
        cfg.validate()?;
        let mut rng = cfg.rng(index);
        let placement = self.placement(cfg, index, &mut rng);
        sample_with_placement(cfg, index, placement, &mut rng)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::LdIdentify(k) => write!(f, "ld-identify-p{}", k + 1),
            TaskId::BranchLocate => f.write_str("branch-locate"),
            TaskId::GammaHomo => f.write_str("gamma-homo"),
            TaskId::GammaLocal => f.write_str("gamma-local"),
            TaskId::Target => f.write_str("target"),
            TaskId::Product => f.write_str("product"),
        }
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ld-identify-p1" => TaskId::LdIdentify(0),
            "ld-identify-p2" => TaskId::LdIdentify(1),
            "ld-identify-p3" => TaskId::LdIdentify(2),
            "branch-locate" => TaskId::BranchLocate,
            "gamma-homo" => TaskId::GammaHomo,
            "gamma-local" => TaskId::GammaLocal,
            "target" => TaskId::Target,
            "product" => TaskId::Product,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "task",
                    reason: alloc::format!("unknown task '{s}'"),
                })
            }
        })
    }
}

/// Ground-truth labels of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub ld_present: bool,
    pub ld_branch: Option<BranchId>,
    /// Zero when no degradation is present.
    pub gamma_local: f64,
    pub gamma_homo: f64,
    /// Equivalent age (s) of `gamma_homo` under nominal conditions.
    pub t_eq: f64,
    /// Distance of the degradation's near end from its PLM (m).
    pub target_m: f64,
    pub lwt_m: f64,
    /// `lwt_m * gamma_local`.
    pub product: f64,
}

impl Labels {
    pub fn of(scn: &NetworkScenario) -> Result<Self> {
        let ld_branch = scn.ld_branch();
        let gamma_homo = scn.trunks[0].profile.gamma_homo;
        let t_eq = equivalent_age_of_gamma(gamma_homo, &CableSpec::n2xsey(), &MaterialParams::nominal())?;
        let (gamma_local, target_m, lwt_m) = match ld_branch.and_then(|b| scn.branch(b).profile.local) {
            Some(ld) => (ld.gamma_local, ld.start_m, ld.length_m),
            None => (0.0, 0.0, 0.0),
        };
        Ok(Self {
            ld_present: ld_branch.is_some(),
            ld_branch,
            gamma_local,
            gamma_homo,
            t_eq,
            target_m,
            lwt_m,
            product: lwt_m * gamma_local,
        })
    }
}

/// One scenario with the channel observations a task needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub scenario: NetworkScenario,
    pub observations: Vec<ChannelObservation>,
    pub labels: Labels,
}

impl LabeledSample {
    /// Solves the network and keeps the observations at `observers`.
    pub fn from_scenario(scenario: NetworkScenario, grid: &FrequencyGrid, observers: &[usize]) -> Result<Self> {
        let response = solve_network(&scenario, grid)?;
        let observations = observers
            .iter()
            .map(|&k| response.observation(k, (k + 1) % NUM_PLMS))
            .collect::<Result<Vec<_>>>()?;
        let labels = Labels::of(&scenario)?;
        Ok(Self {
            scenario,
            observations,
            labels,
        })
    }

    pub fn observation(&self, plm: usize) -> Option<&ChannelObservation> {
        self.observations.iter().find(|o| o.observer == plm)
    }
}

/// Sample `index` of a task dataset, with channel noise when configured.
pub fn generate_sample(cfg: &ScenarioConfig, task: TaskId, index: u64) -> Result<LabeledSample> {
    let scn = task.sample(cfg, index)?;
    let mut s = LabeledSample::from_scenario(scn, &cfg.grid(), &[task.observer()])?;
    if cfg.channel_noise > 0.0 {
        let mut rng = cfg.aux_rng(index, NOISE_SLOT);
        let z_plm = s.scenario.z_plm;
        for obs in s.observations.iter_mut() {
            add_noise(&mut obs.h_f, cfg.channel_noise, &mut rng);
            add_noise(&mut obs.h_ref, cfg.channel_noise, &mut rng);
            for (z, h) in obs.z_in.iter_mut().zip(&obs.h_ref) {
                *z = z_plm * (C64::new(1.0, 0.0) + h) / (C64::new(1.0, 0.0) - h);
            }
        }
    }
    Ok(s)
}

fn add_noise<R: Rng>(h: &mut [C64], relative: f64, rng: &mut R) {
    let rms = libm::sqrt(h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len().max(1) as f64);
    // Per-component deviation so that E|n|^2 = (relative * rms)^2.
    let sd = relative * rms / core::f64::consts::SQRT_2;
    for z in h.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += C64::new(re * sd, im * sd);
    }
}

/// Labels and observations of one dataset entry; what a dataset file keeps
/// of a [`LabeledSample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: u64,
    pub labels: Labels,
    pub observations: Vec<ChannelObservation>,
}

impl Record {
    pub fn observation(&self, plm: usize) -> Option<&ChannelObservation> {
        self.observations.iter().find(|o| o.observer == plm)
    }
}

impl LabeledSample {
    pub fn into_record(self) -> Record {
        Record {
            index: self.scenario.draw_index,
            labels: self.labels,
            observations: self.observations,
        }
    }
}

/// Records `range` of a task dataset, generated sequentially.
pub fn generate_records(cfg: &ScenarioConfig, task: TaskId, range: core::ops::Range<u64>) -> Result<Vec<Record>> {
    range
        .map(|i| generate_sample(cfg, task, i).map(LabeledSample::into_record))
        .collect()
}

/// Reference localization geometry: 500 m branches, a `gamma_local = 0.1`
/// degradation from 211 m to 377 m on PLM 1's trunk and purely resistive
/// 50 Ohm extension loads, the edge of the sampled load range closest to the
/// line impedance.
pub fn fig5_scenario() -> NetworkScenario {
    let gamma_homo = 0.01;
    let mut scn = NetworkScenario::symmetric(500.0, gamma_homo, [C64::new(50.0, 0.0); NUM_PLMS]);
    scn.trunks[0].profile = AgingProfile {
        gamma_homo,
        local: Some(LocalDegradation {
            gamma_local: 0.1,
            start_m: 211.0,
            length_m: 166.0,
        }),
    };
    scn
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_ld_when_probability_zero() {
        let cfg = ScenarioConfig {
            positive_fraction: 0.0,
            ..Default::default()
        };
        for i in 0..50 {
            let s = sample_scenario(&cfg, i).unwrap();
            assert!(s.ld_branch().is_none());
            assert!(cfg.gamma_homo.contains(s.trunks[0].profile.gamma_homo));
        }
    }

    #[test]
    fn deterministic_per_index() {
        let cfg = ScenarioConfig::default();
        assert_eq!(sample_scenario(&cfg, 17).unwrap(), sample_scenario(&cfg, 17).unwrap());
        assert_ne!(sample_scenario(&cfg, 17).unwrap(), sample_scenario(&cfg, 18).unwrap());
        let other = ScenarioConfig {
            seed: 2,
            ..Default::default()
        };
        assert_ne!(sample_scenario(&cfg, 17).unwrap(), sample_scenario(&other, 17).unwrap());
    }

    #[test]
    fn gamma_local_mean() {
        let cfg = ScenarioConfig::default();
        let n = 10_000;
        let mut sum = 0.0;
        for i in 0..n {
            let s = TaskId::GammaLocal.sample(&cfg, i).unwrap();
            sum += s.trunks[0].profile.local.unwrap().gamma_local;
        }
        assert!((sum / n as f64 - 0.55).abs() < 0.01, "{}", sum / n as f64);
    }

    #[test]
    fn values_stay_in_range_and_ld_inside_branch() {
        let cfg = ScenarioConfig::default();
        for i in 0..500 {
            let s = sample_scenario(&cfg, i).unwrap();
            for z in &s.loads {
                assert!(cfg.load_re.contains(z.re) && cfg.load_im.contains(z.im));
            }
            if let Some(id) = s.ld_branch() {
                let b = s.branch(id);
                let ld = b.profile.local.unwrap();
                assert!(ld.start_m >= 0.0 && ld.end_m() <= b.length_m + 1e-9);
                assert!(cfg.gamma_local.contains(ld.gamma_local));
                assert!(cfg.lwt_m.contains(ld.length_m));
                let center = ld.start_m + ld.length_m / 2.0;
                assert!((center - b.length_m / 2.0).abs() <= 100.0 + 1e-9);
            }
        }
    }

    #[test]
    fn balanced_classes_are_exact() {
        let cfg = ScenarioConfig::default();
        let pos = (0..1000)
            .filter(|&i| {
                let s = TaskId::LdIdentify(0).sample(&cfg, i).unwrap();
                TaskId::LdIdentify(0).label(&Labels::of(&s).unwrap()) > 0.0
            })
            .count();
        assert_eq!(pos, 500);
    }

    #[test]
    fn infeasible_geometry_is_reported() {
        let cfg = ScenarioConfig {
            trunk_length_m: 50.0,
            ..Default::default()
        };
        assert!(matches!(
            TaskId::Target.sample(&cfg, 0),
            Err(Error::InfeasibleGeometry { .. })
        ));
    }

    #[test]
    fn task_names_round_trip() {
        for t in TaskId::ALL {
            assert_eq!(alloc::string::ToString::to_string(&t).parse::<TaskId>().unwrap(), t);
        }
        assert!("nope".parse::<TaskId>().is_err());
    }

    #[test]
    fn labels_match_profile() {
        let s = fig5_scenario();
        let l = Labels::of(&s).unwrap();
        assert!(l.ld_present);
        assert_eq!(l.ld_branch, Some(BranchId::Trunk(0)));
        assert_eq!(l.target_m, 211.0);
        assert_eq!(l.product, 166.0 * 0.1);
        assert_eq!(TaskId::LdIdentify(0).label(&l), 1.0);
        assert_eq!(TaskId::LdIdentify(1).label(&l), -1.0);
        assert_eq!(TaskId::BranchLocate.label(&l), 1.0);
    }

    #[test]
    fn rejects_bad_ranges() {
        let cfg = ScenarioConfig {
            gamma_homo: Range::new(0.0, 0.2),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            gamma_local: Range::new(0.05, 1.0),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
