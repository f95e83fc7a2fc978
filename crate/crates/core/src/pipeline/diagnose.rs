use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{t_eq_years, ModelBundle};
use crate::dielectric::GAMMA_LOCAL_MIN;
use crate::error::{Error, Result};
use crate::learning::extract;
use crate::netmodel::{BranchId, ChannelObservation, NUM_PLMS};
use crate::reflectometry::Jtfdr;
use crate::scenario::TaskId;
use crate::SECONDS_PER_YEAR;

/// Smallest product (m) accepted before dividing by `gamma_local`.
const MIN_PRODUCT_M: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileType {
    Homogeneous,
    Localized,
}

/// Outcome of one diagnosis. Exactly one of the homogeneous fields
/// (`gamma_homo`, `t_eq_s`) or the localized fields (`branch`,
/// `gamma_local`, `target_m`, `lwt_m`) is populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub profile: ProfileType,
    pub votes: [bool; NUM_PLMS],
    /// Stage-1 decision values.
    pub scores: [f64; NUM_PLMS],
    pub branch: Option<BranchId>,
    pub gamma_homo: Option<f64>,
    pub t_eq_s: Option<f64>,
    pub gamma_local: Option<f64>,
    pub target_m: Option<f64>,
    pub product: Option<f64>,
    pub lwt_m: Option<f64>,
    pub provenance: Vec<String>,
}

/// `product / gamma_local`.
pub fn length_from_product(product: f64, gamma_local: f64) -> Result<f64> {
    if !(gamma_local > 0.0) {
        return Err(Error::Domain {
            what: "gamma_local",
            value: gamma_local,
        });
    }
    if !(product > 0.0) {
        return Err(Error::Domain {
            what: "product",
            value: product,
        });
    }
    Ok(product / gamma_local)
}

impl DiagnosisReport {
    /// Verdict exclusivity and `lwt_m > 0`.
    pub fn validate(&self) -> Result<()> {
        let homo = [self.gamma_homo.is_some(), self.t_eq_s.is_some()];
        let local = [
            self.branch.is_some(),
            self.gamma_local.is_some(),
            self.target_m.is_some(),
            self.product.is_some(),
            self.lwt_m.is_some(),
        ];
        let ok = match self.profile {
            ProfileType::Homogeneous => homo.iter().all(|&b| b) && !local.iter().any(|&b| b),
            ProfileType::Localized => local.iter().all(|&b| b) && !homo.iter().any(|&b| b),
        };
        if !ok {
            return Err(Error::InvalidParameter {
                name: "report",
                reason: String::from("both or neither verdict paths populated"),
            });
        }
        if let Some(l) = self.lwt_m {
            if !(l > 0.0) {
                return Err(Error::Domain { what: "lwt_m", value: l });
            }
        }
        Ok(())
    }

    /// Human-readable multi-line record.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let votes: Vec<String> = (0..NUM_PLMS)
            .map(|k| {
                alloc::format!(
                    "PLM{}={} ({:+.3})",
                    k + 1,
                    if self.votes[k] { "present" } else { "absent" },
                    self.scores[k]
                )
            })
            .collect();
        let _ = writeln!(s, "stage-1 votes: {}", votes.join(", "));
        match self.profile {
            ProfileType::Homogeneous => {
                let _ = writeln!(s, "verdict: homogeneous aging");
                let _ = writeln!(s, "gamma_homo: {:.5}", self.gamma_homo.unwrap_or(f64::NAN));
                let t = self.t_eq_s.unwrap_or(f64::NAN);
                let _ = writeln!(s, "equivalent age: {:.3e} s ({:.2} years)", t, t / SECONDS_PER_YEAR);
            }
            ProfileType::Localized => {
                let _ = writeln!(s, "verdict: localized degradation");
                if let Some(b) = self.branch {
                    let _ = writeln!(s, "branch: {}", branch_name(b));
                }
                let _ = writeln!(s, "gamma_local: {:.4}", self.gamma_local.unwrap_or(f64::NAN));
                let _ = writeln!(s, "target: {:.1} m", self.target_m.unwrap_or(f64::NAN));
                let _ = writeln!(s, "length: {:.1} m", self.lwt_m.unwrap_or(f64::NAN));
            }
        }
        for p in &self.provenance {
            let _ = writeln!(s, "  - {p}");
        }
        s
    }

    /// Single `key=value` line; absent values are written as `-`.
    pub fn to_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| String::from("-"), |x| alloc::format!("{x:.6e}"));
        let votes: String = self.votes.iter().map(|&v| if v { '1' } else { '0' }).collect();
        alloc::format!(
            "profile={} votes={} branch={} gamma_homo={} t_eq_s={} gamma_local={} target_m={} product={} lwt_m={}",
            match self.profile {
                ProfileType::Homogeneous => "homogeneous",
                ProfileType::Localized => "localized",
            },
            votes,
            self.branch.map_or_else(|| String::from("-"), branch_name),
            opt(self.gamma_homo),
            opt(self.t_eq_s),
            opt(self.gamma_local),
            opt(self.target_m),
            opt(self.product),
            opt(self.lwt_m),
        )
    }
}

fn branch_name(b: BranchId) -> String {
    match b {
        BranchId::Trunk(k) => alloc::format!("PLM{}-BP", k + 1),
        BranchId::Extension(k) => alloc::format!("PLM{}-BE{}", k + 1, k + 1),
    }
}

/// Output of `task`'s model on the observation of PLM `plm`. Task models are
/// trained at a fixed PLM; the symmetric topology lets them serve any PLM
/// whose observation uses the same relative receiver.
fn run(
    bundle: &ModelBundle,
    task: TaskId,
    obs: &[ChannelObservation],
    plm: usize,
    jt: &Jtfdr,
) -> Result<f64> {
    let o = obs.iter().find(|o| o.observer == plm).ok_or_else(|| Error::MissingObservation {
        task: task.to_string(),
        plm,
    })?;
    if o.receiver != (plm + 1) % NUM_PLMS {
        return Err(Error::InvalidParameter {
            name: "observation",
            reason: alloc::format!("PLM {} observation must use PLM {} as receiver", plm + 1, (plm + 1) % NUM_PLMS + 1),
        });
    }
    let x = extract(o, &bundle.pipeline.settings(task).features, jt, None)?;
    bundle.model(task)?.output(&x)
}

/// Runs the multi-stage diagnosis on the observations of all three PLMs.
pub fn diagnose(observations: &[ChannelObservation], bundle: &ModelBundle, jt: &Jtfdr) -> Result<DiagnosisReport> {
    let mut provenance = Vec::new();
    let mut votes = [false; NUM_PLMS];
    let mut scores = [0.0; NUM_PLMS];
    for k in 0..NUM_PLMS {
        scores[k] = run(bundle, TaskId::LdIdentify(k), observations, k, jt)?;
        votes[k] = scores[k] >= 0.0;
    }
    provenance.push(alloc::format!("stage 1: {} classifiers at PLM1..PLM3", bundle.pipeline.ld_identify.algorithm.name()));
    let fired: Vec<usize> = (0..NUM_PLMS).filter(|&k| votes[k]).collect();
    let mut report = DiagnosisReport {
        profile: ProfileType::Homogeneous,
        votes,
        scores,
        branch: None,
        gamma_homo: None,
        t_eq_s: None,
        gamma_local: None,
        target_m: None,
        product: None,
        lwt_m: None,
        provenance,
    };
    match fired.as_slice() {
        [] => {
            let raw = run(bundle, TaskId::GammaHomo, observations, 0, jt)?;
            let g = raw.clamp(0.0, crate::dielectric::GAMMA_HOMO_MAX);
            report.provenance.push(alloc::format!("no votes: homogeneous path, gamma_homo at PLM1 (raw {raw:.5})"));
            report.provenance.push(String::from("t_eq from nominal cable parameters"));
            report.gamma_homo = Some(g);
            report.t_eq_s = Some(t_eq_years(g)? * SECONDS_PER_YEAR);
        }
        &[i] => {
            let j = (i + 1) % NUM_PLMS;
            let s = run(bundle, TaskId::BranchLocate, observations, j, jt)?;
            let branch = if s >= 0.0 {
                BranchId::Trunk(i)
            } else {
                BranchId::Extension(i)
            };
            report.profile = ProfileType::Localized;
            report.provenance.push(alloc::format!(
                "stage 2: PLM{} resolves PLM{} trunk vs extension (score {s:+.3}) -> {}",
                j + 1,
                i + 1,
                branch_name(branch)
            ));
            if matches!(branch, BranchId::Extension(_)) {
                report
                    .provenance
                    .push(String::from("regressors trained on trunk degradations applied to an extension branch"));
            }
            let raw_g = run(bundle, TaskId::GammaLocal, observations, i, jt)?;
            let raw_t = run(bundle, TaskId::Target, observations, i, jt)?;
            let raw_p = run(bundle, TaskId::Product, observations, i, jt)?;
            let g = raw_g.clamp(GAMMA_LOCAL_MIN, 1.0);
            let t = raw_t.max(0.0);
            let p = raw_p.max(MIN_PRODUCT_M);
            report.provenance.push(alloc::format!("stage 3: regressions at PLM{}", i + 1));
            for (name, raw, used) in [("gamma_local", raw_g, g), ("target_m", raw_t, t), ("product", raw_p, p)] {
                if raw != used {
                    report.provenance.push(alloc::format!("{name} clamped from {raw:.4} to {used:.4}"));
                }
            }
            report.branch = Some(branch);
            report.gamma_local = Some(g);
            report.target_m = Some(t);
            report.product = Some(p);
            report.lwt_m = Some(length_from_product(p, g)?);
        }
        _ => {
            return Err(Error::AmbiguousVotes { votes: votes.to_vec() });
        }
    }
    report.validate()?;
    Ok(report)
}
