//! Feature extraction from channel observations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{impulse_response, ChannelObservation};
use crate::reflectometry::{detect_peaks, Jtfdr, JtfdrTrace, Peak};
use crate::C64;

/// `[mean, m2, m3, m4]` with `m_k` the k-th central moment.
pub fn moments(x: &[f64]) -> Result<[f64; 4]> {
    if x.is_empty() {
        return Err(Error::Empty("moments"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Ok([mean, m2 / n, m3 / n, m4 / n])
}

/// Phase of `h` with `2 pi` jumps between neighbours removed.
pub fn unwrapped_phase(h: &[C64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(h.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for z in h {
        let p = z.arg();
        if let Some(q) = prev {
            let mut d = p - q;
            while d > PI {
                d -= 2.0 * PI;
                offset -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
                offset += 2.0 * PI;
            }
        }
        prev = Some(p);
        out.push(p + offset);
    }
    out
}

/// How peak pairs are ordered in a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakOrder {
    /// K largest, descending magnitude.
    Magnitude,
    /// K largest, then re-sorted by time.
    Time,
    /// First K in time.
    Earliest,
}

/// `(position * dt, magnitude)` of the `k` largest peaks, padded with
/// `(-1, 0)`.
pub fn peak_features(peaks: &[Peak], dt: f64, k: usize, order: PeakOrder) -> Vec<f64> {
    let mut top: Vec<&Peak> = peaks.iter().collect();
    if order == PeakOrder::Earliest {
        top.sort_by_key(|p| p.index);
        top.truncate(k);
    } else {
        top.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.index.cmp(&b.index)));
        top.truncate(k);
        if order == PeakOrder::Time {
            top.sort_by_key(|p| p.index);
        }
    }
    let mut out = Vec::with_capacity(2 * k);
    for p in &top {
        out.push(p.position * dt);
        out.push(p.magnitude);
    }
    for _ in top.len()..k {
        out.push(-1.0);
        out.push(0.0);
    }
    out
}

/// One block of a feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FeatureGroup {
    /// Moments of `|H_f|`.
    MagHf,
    /// Moments of the unwrapped phase of `H_f`.
    PhaseHf,
    MagHref,
    PhaseHref,
    /// Peaks of the reflectometry envelope.
    JtfdrPeaks { k: usize, order: PeakOrder },
    /// Peaks of `|h_ref(t)|`, i.e. plain time-domain reflectometry.
    HrefPeaks { k: usize, order: PeakOrder },
    /// Peaks of `|h_f(t)|`.
    HfPeaks { k: usize, order: PeakOrder },
    /// Variance of the reflectometry envelope.
    JtfdrVariance,
}

impl FeatureGroup {
    pub fn len(&self) -> usize {
        match *self {
            FeatureGroup::MagHf | FeatureGroup::PhaseHf | FeatureGroup::MagHref | FeatureGroup::PhaseHref => 4,
            FeatureGroup::JtfdrPeaks { k, .. } | FeatureGroup::HrefPeaks { k, .. } | FeatureGroup::HfPeaks { k, .. } => {
                2 * k
            }
            FeatureGroup::JtfdrVariance => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn names(&self, out: &mut Vec<String>) {
        let moment_names = |prefix: &str, out: &mut Vec<String>| {
            for m in ["mean", "m2", "m3", "m4"] {
                out.push(format!("{prefix}.{m}"));
            }
        };
        let peak_names = |prefix: &str, k: usize, out: &mut Vec<String>| {
            for i in 0..k {
                out.push(format!("{prefix}.peak{i}.time"));
                out.push(format!("{prefix}.peak{i}.mag"));
            }
        };
        match *self {
            FeatureGroup::MagHf => moment_names("abs_hf", out),
            FeatureGroup::PhaseHf => moment_names("arg_hf", out),
            FeatureGroup::MagHref => moment_names("abs_href", out),
            FeatureGroup::PhaseHref => moment_names("arg_href", out),
            FeatureGroup::JtfdrPeaks { k, .. } => peak_names("jtfdr", k, out),
            FeatureGroup::HrefPeaks { k, .. } => peak_names("h_ref", k, out),
            FeatureGroup::HfPeaks { k, .. } => peak_names("h_f", k, out),
            FeatureGroup::JtfdrVariance => out.push(String::from("jtfdr.var")),
        }
    }
}

/// Upper bound on the features of one task.
pub const MAX_FEATURES: usize = 16;

/// Ordered list of feature groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub groups: Vec<FeatureGroup>,
}

/// Default number of peaks per peak group.
pub const TOP_PEAKS: usize = 5;

impl FeatureSet {
    pub fn new(groups: Vec<FeatureGroup>) -> Result<Self> {
        let s = Self { groups };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension();
        if n == 0 || n > MAX_FEATURES {
            return Err(Error::InvalidParameter {
                name: "feature set",
                reason: format!("{n} features; must be between 1 and {MAX_FEATURES}"),
            });
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dimension());
        for g in &self.groups {
            g.names(&mut out);
        }
        out
    }

    /// Reflectometry peaks plus reflection magnitude moments.
    pub fn jtfdr() -> Self {
        Self {
            groups: alloc::vec![
                FeatureGroup::JtfdrPeaks {
                    k: TOP_PEAKS,
                    order: PeakOrder::Magnitude
                },
                FeatureGroup::MagHref,
            ],
        }
    }

    /// Same layout as [`FeatureSet::jtfdr`] with raw `|h_ref|` peaks.
    pub fn raw_href() -> Self {
        Self {
            groups: alloc::vec![
                FeatureGroup::HrefPeaks {
                    k: TOP_PEAKS,
                    order: PeakOrder::Magnitude
                },
                FeatureGroup::MagHref,
            ],
        }
    }

    /// [`FeatureSet::jtfdr`] with the envelope variance and `|H_f|` moments.
    pub fn branch() -> Self {
        Self {
            groups: alloc::vec![
                FeatureGroup::JtfdrPeaks {
                    k: TOP_PEAKS,
                    order: PeakOrder::Magnitude
                },
                FeatureGroup::JtfdrVariance,
                FeatureGroup::MagHf,
            ],
        }
    }

    /// All spectral moments.
    pub fn spectral() -> Self {
        Self {
            groups: alloc::vec![
                FeatureGroup::MagHf,
                FeatureGroup::PhaseHf,
                FeatureGroup::MagHref,
                FeatureGroup::PhaseHref,
            ],
        }
    }

    /// Earliest reflectometry peaks plus reflection magnitude moments.
    pub fn timed_jtfdr() -> Self {
        Self {
            groups: alloc::vec![
                FeatureGroup::JtfdrPeaks {
                    k: TOP_PEAKS,
                    order: PeakOrder::Earliest
                },
                FeatureGroup::MagHref,
            ],
        }
    }

    fn needs_jtfdr(&self) -> bool {
        self.groups
            .iter()
            .any(|g| matches!(g, FeatureGroup::JtfdrPeaks { .. } | FeatureGroup::JtfdrVariance))
    }
}

/// Feature values with their names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

fn abs_peaks(h: &[f64], jt: &Jtfdr) -> Result<Vec<Peak>> {
    let a: Vec<f64> = h.iter().map(|v| v.abs()).collect();
    detect_peaks(&a, jt.peaks.rel_threshold, jt.peaks.min_separation)
}

/// Computes `set` from one observation. `trace` may carry a precomputed
/// reflectometry trace of the same observation.
pub fn extract(
    obs: &ChannelObservation,
    set: &FeatureSet,
    jt: &Jtfdr,
    trace: Option<&JtfdrTrace>,
) -> Result<Vec<f64>> {
    set.validate()?;
    let owned;
    let trace = match trace {
        Some(t) => Some(t),
        None if set.needs_jtfdr() => {
            owned = jt.trace(&obs.h_ref, &obs.grid)?;
            Some(&owned)
        }
        None => None,
    };
    let dt = jt.time.dt();
    let mut out = Vec::with_capacity(set.dimension());
    for g in &set.groups {
        match *g {
            FeatureGroup::MagHf => {
                let m: Vec<f64> = obs.h_f.iter().map(|z| z.norm()).collect();
                out.extend_from_slice(&moments(&m)?);
            }
            FeatureGroup::PhaseHf => out.extend_from_slice(&moments(&unwrapped_phase(&obs.h_f))?),
            FeatureGroup::MagHref => {
                let m: Vec<f64> = obs.h_ref.iter().map(|z| z.norm()).collect();
                out.extend_from_slice(&moments(&m)?);
            }
            FeatureGroup::PhaseHref => out.extend_from_slice(&moments(&unwrapped_phase(&obs.h_ref))?),
            FeatureGroup::JtfdrPeaks { k, order } => {
                let t = trace.expect("trace computed when needed");
                out.extend(peak_features(&t.peaks, t.dt, k, order));
            }
            FeatureGroup::HrefPeaks { k, order } => {
                let h = impulse_response(&obs.h_ref, &obs.grid, &jt.time)?;
                out.extend(peak_features(&abs_peaks(&h, jt)?, dt, k, order));
            }
            FeatureGroup::HfPeaks { k, order } => {
                let h = impulse_response(&obs.h_f, &obs.grid, &jt.time)?;
                out.extend(peak_features(&abs_peaks(&h, jt)?, dt, k, order));
            }
            FeatureGroup::JtfdrVariance => {
                let t = trace.expect("trace computed when needed");
                out.push(moments(&t.samples)?[1]);
            }
        }
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: "feature value",
            value: out[i],
        });
    }
    Ok(out)
}

/// [`extract`] with feature names attached.
pub fn build_features(obs: &ChannelObservation, set: &FeatureSet, jt: &Jtfdr) -> Result<FeatureVector> {
    Ok(FeatureVector {
        values: extract(obs, set, jt, None)?,
        names: set.names(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_examples() {
        assert_eq!(moments(&[3.0; 5]).unwrap(), [3.0, 0.0, 0.0, 0.0]);
        assert_eq!(moments(&[-1.0, 1.0]).unwrap(), [0.0, 1.0, 0.0, 1.0]);
        assert!(moments(&[]).is_err());
        let a = moments(&[1.0, 5.0, -2.0, 0.5]).unwrap();
        let b = moments(&[0.5, -2.0, 1.0, 5.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn unwrap_linear_phase() {
        let h: Vec<C64> = (0..200).map(|k| C64::from_polar(1.0, -0.3 * k as f64)).collect();
        let p = unwrapped_phase(&h);
        for (k, v) in p.iter().enumerate() {
            assert!((v + 0.3 * k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn peak_padding_and_order() {
        let pk = |i: usize, m: f64| Peak {
            index: i,
            position: i as f64,
            magnitude: m,
        };
        let f = peak_features(&[pk(10, 2.0)], 0.5, 3, PeakOrder::Magnitude);
        assert_eq!(f, [5.0, 2.0, -1.0, 0.0, -1.0, 0.0]);
        let peaks = [pk(0, 1.0), pk(30, 0.2), pk(60, 0.1), pk(90, 3.0), pk(120, 0.05)];
        let f = peak_features(&peaks, 1.0, 4, PeakOrder::Magnitude);
        let mags: Vec<f64> = f.chunks(2).map(|c| c[1]).collect();
        assert!(mags.windows(2).all(|w| w[0] >= w[1]));
        let f = peak_features(&peaks, 1.0, 4, PeakOrder::Time);
        let times: Vec<f64> = f.chunks(2).map(|c| c[0]).collect();
        assert_eq!(times, [0.0, 30.0, 60.0, 90.0]);
        let f = peak_features(&peaks, 1.0, 2, PeakOrder::Earliest);
        assert_eq!(f, [0.0, 1.0, 30.0, 0.2]);
    }

    #[test]
    fn default_sets_fit_the_limit() {
        for s in [
            FeatureSet::jtfdr(),
            FeatureSet::raw_href(),
            FeatureSet::branch(),
            FeatureSet::spectral(),
            FeatureSet::timed_jtfdr(),
        ] {
            assert!(s.dimension() <= MAX_FEATURES);
            assert_eq!(s.names().len(), s.dimension());
        }
        assert!(FeatureSet::new(alloc::vec![FeatureGroup::JtfdrPeaks {
            k: 9,
            order: PeakOrder::Time
        }])
        .is_err());
    }
}
