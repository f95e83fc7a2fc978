//! Features and self-contained learners.

mod boost;
mod features;
mod metrics;
mod standardize;
mod svm;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use boost::{
    train_adaboost, train_l2boost, AdaBoostModel, AdaBoostParams, L2BoostModel, L2BoostParams, RegressionTree,
    Stump, LEAF,
};
pub use features::{
    build_features, extract, moments, peak_features, unwrapped_phase, FeatureGroup, FeatureSet, FeatureVector,
    PeakOrder, MAX_FEATURES, TOP_PEAKS,
};
pub use metrics::{
    classification_metrics, detection_at_false_alarm, fit_line, regression_metrics, ClassificationMetrics,
    RegressionMetrics,
};
pub use standardize::Standardizer;
pub use svm::{train_svc, train_svr, Kernel, SvmModel, SvmParams};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// Learner family with its own settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "algorithm")]
pub enum Algorithm {
    /// Gaussian kernel width defaults to `1 / dimension` when `rbf_gamma`
    /// is `None`.
    Svc {
        rbf: bool,
        rbf_gamma: Option<f64>,
        c: f64,
    },
    Svr {
        rbf: bool,
        rbf_gamma: Option<f64>,
        c: f64,
        epsilon: f64,
    },
    AdaBoost {
        rounds: usize,
    },
    L2Boost {
        stages: usize,
        shrinkage: f64,
        max_depth: usize,
    },
}

impl Algorithm {
    pub fn svc_rbf() -> Self {
        Algorithm::Svc {
            rbf: true,
            rbf_gamma: None,
            c: 10.0,
        }
    }

    pub fn svr_linear() -> Self {
        Algorithm::Svr {
            rbf: false,
            rbf_gamma: None,
            c: 10.0,
            epsilon: 0.01,
        }
    }

    pub fn adaboost() -> Self {
        Algorithm::AdaBoost { rounds: 100 }
    }

    pub fn l2boost() -> Self {
        Algorithm::L2Boost {
            stages: 200,
            shrinkage: 0.1,
            max_depth: 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Svc { rbf: true, .. } => "svc-rbf",
            Algorithm::Svc { rbf: false, .. } => "svc-linear",
            Algorithm::Svr { rbf: true, .. } => "svr-rbf",
            Algorithm::Svr { rbf: false, .. } => "svr-linear",
            Algorithm::AdaBoost { .. } => "adaboost",
            Algorithm::L2Boost { .. } => "l2boost",
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, Algorithm::Svc { .. } | Algorithm::AdaBoost { .. })
    }
}

/// Fitted learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Svc(SvmModel),
    Svr(SvmModel),
    AdaBoost(AdaBoostModel),
    L2Boost(L2BoostModel),
}

impl Model {
    /// Classifier margin or regression output on standardized features.
    pub fn output(&self, z: &[f64]) -> f64 {
        match self {
            Model::Svc(m) => m.decision(z),
            Model::Svr(m) => m.regress(z),
            Model::AdaBoost(m) => m.decision(z),
            Model::L2Boost(m) => m.predict(z),
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, Model::Svc(_) | Model::AdaBoost(_))
    }
}

/// Trains `algorithm` on standardized rows `z`.
pub fn fit(z: &[Vec<f64>], y: &[f64], algorithm: &Algorithm) -> Result<Model> {
    let d = z.first().map_or(1, |r| r.len().max(1));
    let kernel = |rbf: bool, g: Option<f64>| {
        if rbf {
            Kernel::Rbf {
                gamma: g.unwrap_or(1.0 / d as f64),
            }
        } else {
            Kernel::Linear
        }
    };
    Ok(match *algorithm {
        Algorithm::Svc { rbf, rbf_gamma, c } => {
            let p = SvmParams {
                c,
                ..Default::default()
            };
            Model::Svc(train_svc(z, y, kernel(rbf, rbf_gamma), &p)?)
        }
        Algorithm::Svr {
            rbf,
            rbf_gamma,
            c,
            epsilon,
        } => {
            let p = SvmParams {
                c,
                ..Default::default()
            };
            Model::Svr(train_svr(z, y, kernel(rbf, rbf_gamma), epsilon, &p)?)
        }
        Algorithm::AdaBoost { rounds } => Model::AdaBoost(train_adaboost(z, y, &AdaBoostParams { rounds })?),
        Algorithm::L2Boost {
            stages,
            shrinkage,
            max_depth,
        } => Model::L2Boost(train_l2boost(
            z,
            y,
            &L2BoostParams {
                stages,
                shrinkage,
                max_depth,
                min_leaf: 1,
            },
        )?),
    })
}

/// Provenance recorded with a model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train: usize,
    pub seed: u64,
}

/// Model with everything needed to apply it to raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub task: String,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub model: Model,
    pub meta: TrainingMeta,
}

/// Container format version written by [`TrainedModel::encode`].
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"PLMM";

impl TrainedModel {
    /// Standardizes `x` with the training statistics and trains.
    pub fn train(
        task: &str,
        feature_names: Vec<String>,
        x: &[Vec<f64>],
        y: &[f64],
        algorithm: &Algorithm,
        seed: u64,
    ) -> Result<Self> {
        let standardizer = Standardizer::fit(x)?;
        if feature_names.len() != standardizer.dimension() {
            return Err(Error::Dimension {
                what: "feature names",
                expected: standardizer.dimension(),
                got: feature_names.len(),
            });
        }
        let z = standardizer.apply_all(x)?;
        let model = fit(&z, y, algorithm)?;
        Ok(Self {
            task: String::from(task),
            feature_names,
            standardizer,
            model,
            meta: TrainingMeta {
                n_train: x.len(),
                seed,
            },
        })
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        Ok(self.model.output(&self.standardizer.apply(x)?))
    }

    /// `+1` / `-1` for classifiers (zero margin counts as positive).
    pub fn classify(&self, x: &[f64]) -> Result<f64> {
        let v = self.output(x)?;
        Ok(if v >= 0.0 { 1.0 } else { -1.0 })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(MODEL_FORMAT_VERSION);
        w.str(&self.task);
        w.usize(self.feature_names.len());
        for n in &self.feature_names {
            w.str(n);
        }
        w.f64s(&self.standardizer.mean);
        w.f64s(&self.standardizer.std);
        w.usize(self.meta.n_train);
        w.u64(self.meta.seed);
        match &self.model {
            Model::Svc(m) => {
                w.u8(0);
                encode_svm(&mut w, m);
            }
            Model::Svr(m) => {
                w.u8(1);
                encode_svm(&mut w, m);
            }
            Model::AdaBoost(m) => {
                w.u8(2);
                w.usize(m.stumps.len());
                for s in &m.stumps {
                    w.usize(s.feature);
                    w.f64(s.threshold);
                    w.f64(s.polarity);
                }
                w.f64s(&m.alphas);
                w.f64s(&m.errors);
            }
            Model::L2Boost(m) => {
                w.u8(3);
                w.f64(m.base);
                w.f64(m.shrinkage);
                w.f64s(&m.train_mse);
                w.usize(m.trees.len());
                for t in &m.trees {
                    w.usize(t.len());
                    for k in 0..t.len() {
                        w.u64(t.feature[k] as u64);
                        w.f64(t.threshold[k]);
                        w.f64(t.value[k]);
                        w.u64(t.left[k] as u64);
                        w.u64(t.right[k] as u64);
                    }
                }
            }
        }
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Decode("not a model container"));
        }
        let version = r.u32()?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let task = r.str()?;
        let n_names = r.usize()?;
        if n_names > bytes.len() {
            return Err(Error::Decode("feature-name count exceeds data"));
        }
        let feature_names = (0..n_names).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let mean = r.f64s()?;
        let std = r.f64s()?;
        if mean.len() != feature_names.len() || std.len() != feature_names.len() {
            return Err(Error::Decode("standardizer does not match feature names"));
        }
        let meta = TrainingMeta {
            n_train: r.usize()?,
            seed: r.u64()?,
        };
        let d = feature_names.len();
        let model = match r.u8()? {
            0 => Model::Svc(decode_svm(&mut r, d)?),
            1 => Model::Svr(decode_svm(&mut r, d)?),
            2 => {
                let n = r.usize()?;
                if n > bytes.len() {
                    return Err(Error::Decode("stump count exceeds data"));
                }
                let mut stumps = Vec::with_capacity(n);
                for _ in 0..n {
                    let feature = r.usize()?;
                    if feature >= d {
                        return Err(Error::Decode("stump feature out of range"));
                    }
                    stumps.push(Stump {
                        feature,
                        threshold: r.f64()?,
                        polarity: r.f64()?,
                    });
                }
                let alphas = r.f64s()?;
                let errors = r.f64s()?;
                if alphas.len() != n || errors.len() != n {
                    return Err(Error::Decode("stage weights do not match stumps"));
                }
                Model::AdaBoost(AdaBoostModel { stumps, alphas, errors })
            }
            3 => {
                let base = r.f64()?;
                let shrinkage = r.f64()?;
                let train_mse = r.f64s()?;
                let n_trees = r.usize()?;
                if n_trees > bytes.len() {
                    return Err(Error::Decode("tree count exceeds data"));
                }
                let mut trees = Vec::with_capacity(n_trees);
                for _ in 0..n_trees {
                    let n = r.usize()?;
                    if n == 0 || n > bytes.len() {
                        return Err(Error::Decode("bad tree size"));
                    }
                    let mut t = RegressionTree {
                        feature: Vec::with_capacity(n),
                        threshold: Vec::with_capacity(n),
                        value: Vec::with_capacity(n),
                        left: Vec::with_capacity(n),
                        right: Vec::with_capacity(n),
                    };
                    for _ in 0..n {
                        t.feature.push(r.u64()? as usize);
                        t.threshold.push(r.f64()?);
                        t.value.push(r.f64()?);
                        t.left.push(r.u64()? as usize);
                        t.right.push(r.u64()? as usize);
                    }
                    // Children must point forward so prediction terminates.
                    for k in 0..n {
                        let (l, rt) = (t.left[k], t.right[k]);
                        let leaf = l == LEAF && rt == LEAF;
                        let ok = leaf || (l > k && l < n && rt > k && rt < n && t.feature[k] < d);
                        if !ok {
                            return Err(Error::Decode("malformed regression tree"));
                        }
                    }
                    trees.push(t);
                }
                Model::L2Boost(L2BoostModel {
                    base,
                    shrinkage,
                    trees,
                    train_mse,
                })
            }
            _ => return Err(Error::Decode("unknown model kind")),
        };
        if !r.is_empty() {
            return Err(Error::Decode("trailing bytes after model"));
        }
        Ok(Self {
            task,
            feature_names,
            standardizer: Standardizer { mean, std },
            model,
            meta,
        })
    }
}

fn encode_svm(w: &mut Writer, m: &SvmModel) {
    match m.kernel {
        Kernel::Linear => {
            w.u8(0);
            w.f64(0.0);
        }
        Kernel::Rbf { gamma } => {
            w.u8(1);
            w.f64(gamma);
        }
    }
    w.f64(m.rho);
    w.f64(m.kkt_gap);
    w.usize(m.iterations);
    w.f64(m.target_mean);
    w.f64(m.target_scale);
    w.f64s(&m.coef);
    for sv in &m.support {
        for &v in sv {
            w.f64(v);
        }
    }
}

fn decode_svm(r: &mut Reader<'_>, d: usize) -> Result<SvmModel> {
    let kind = r.u8()?;
    let gamma = r.f64()?;
    let kernel = match kind {
        0 => Kernel::Linear,
        1 => Kernel::Rbf { gamma },
        _ => return Err(Error::Decode("unknown kernel")),
    };
    let rho = r.f64()?;
    let kkt_gap = r.f64()?;
    let iterations = r.usize()?;
    let target_mean = r.f64()?;
    let target_scale = r.f64()?;
    let coef = r.f64s()?;
    let mut support = Vec::with_capacity(coef.len());
    for _ in 0..coef.len() {
        let mut sv = Vec::with_capacity(d);
        for _ in 0..d {
            sv.push(r.f64()?);
        }
        support.push(sv);
    }
    Ok(SvmModel {
        kernel,
        support,
        coef,
        rho,
        kkt_gap,
        iterations,
        target_mean,
        target_scale,
    })
}
