//! Multi-stage diagnosis: per-task training, the cooperative inference rule,
//! training-size sweeps and the robustness harness.

mod diagnose;
mod sweep;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use diagnose::{diagnose, length_from_product, DiagnosisReport, ProfileType};
pub use sweep::{
    ld_start_salience, ntr_sweep, robustness_eval, summarize_sweep, sweep_point, RobustnessRow, Salience, SweepRow,
    SweepTable,
};

use crate::dielectric::{equivalent_age_of_gamma, CableSpec, MaterialParams, GAMMA_HOMO_MAX};
use crate::error::{Error, Result};
use crate::learning::{
    classification_metrics, extract, regression_metrics, Algorithm, ClassificationMetrics, FeatureGroup,
    FeatureSet, Model, PeakOrder, RegressionMetrics, TrainedModel, TOP_PEAKS,
};
use crate::reflectometry::{ChirpParams, Jtfdr, PeakParams};
use crate::scenario::{Record, ScenarioConfig, TaskId};
use crate::SECONDS_PER_YEAR;

/// KKT tolerance every trained SVM must reach.
pub const KKT_TOLERANCE: f64 = 1e-3;

/// Feature set and learner of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSettings {
    pub features: FeatureSet,
    pub algorithm: Algorithm,
}

impl TaskSettings {
    pub fn new(features: FeatureSet, algorithm: Algorithm) -> Self {
        Self { features, algorithm }
    }
}

/// Per-task choices and training guards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Shared by the three per-PLM identification classifiers.
    pub ld_identify: TaskSettings,
    pub branch_locate: TaskSettings,
    pub gamma_homo: TaskSettings,
    pub gamma_local: TaskSettings,
    pub target: TaskSettings,
    pub product: TaskSettings,
    /// Training samples required per feature.
    pub min_samples_per_feature: f64,
    /// Smallest accepted fraction of either class in classification data.
    pub min_class_fraction: f64,
    pub chirp: ChirpParams,
    pub peaks: PeakParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let time_peaks = FeatureSet {
            groups: alloc::vec![FeatureGroup::JtfdrPeaks {
                k: TOP_PEAKS,
                order: PeakOrder::Time
            }],
        };
        Self {
            ld_identify: TaskSettings::new(FeatureSet::jtfdr(), Algorithm::adaboost()),
            branch_locate: TaskSettings::new(FeatureSet::branch(), Algorithm::adaboost()),
            gamma_homo: TaskSettings::new(FeatureSet::spectral(), Algorithm::l2boost()),
            gamma_local: TaskSettings::new(time_peaks, Algorithm::l2boost()),
            target: TaskSettings::new(FeatureSet::timed_jtfdr(), Algorithm::l2boost()),
            product: TaskSettings::new(FeatureSet::spectral(), Algorithm::l2boost()),
            min_samples_per_feature: 10.0,
            min_class_fraction: 0.1,
            chirp: ChirpParams::default(),
            peaks: PeakParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn settings(&self, task: TaskId) -> &TaskSettings {
        match task {
            TaskId::LdIdentify(_) => &self.ld_identify,
            TaskId::BranchLocate => &self.branch_locate,
            TaskId::GammaHomo => &self.gamma_homo,
            TaskId::GammaLocal => &self.gamma_local,
            TaskId::Target => &self.target,
            TaskId::Product => &self.product,
        }
    }

    pub fn settings_mut(&mut self, task: TaskId) -> &mut TaskSettings {
        match task {
            TaskId::LdIdentify(_) => &mut self.ld_identify,
            TaskId::BranchLocate => &mut self.branch_locate,
            TaskId::GammaHomo => &mut self.gamma_homo,
            TaskId::GammaLocal => &mut self.gamma_local,
            TaskId::Target => &mut self.target,
            TaskId::Product => &mut self.product,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for task in TaskId::ALL {
            let s = self.settings(task);
            s.features.validate()?;
            if s.algorithm.is_classifier() != task.is_classification() {
                return Err(Error::InvalidParameter {
                    name: "algorithm",
                    reason: alloc::format!("{task} needs a {}", kind_name(task)),
                });
            }
            validate_algorithm(&s.algorithm)?;
        }
        if !(self.min_samples_per_feature >= 0.0 && self.min_samples_per_feature.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "min_samples_per_feature",
                reason: alloc::format!("{} must be non-negative", self.min_samples_per_feature),
            });
        }
        if !(0.0..0.5).contains(&self.min_class_fraction) {
            return Err(Error::InvalidParameter {
                name: "min_class_fraction",
                reason: alloc::format!("{} must lie in [0, 0.5)", self.min_class_fraction),
            });
        }
        self.chirp.validate()?;
        if !(self.peaks.rel_threshold > 0.0 && self.peaks.rel_threshold < 1.0) {
            return Err(Error::InvalidParameter {
                name: "rel_threshold",
                reason: alloc::format!("{} must lie in (0, 1)", self.peaks.rel_threshold),
            });
        }
        Ok(())
    }

    /// Reflectometry chain on the time grid of `scenario`.
    pub fn jtfdr(&self, scenario: &ScenarioConfig) -> Result<Jtfdr> {
        Jtfdr::new(self.chirp, scenario.time, self.peaks)
    }
}

fn kind_name(task: TaskId) -> &'static str {
    if task.is_classification() {
        "classifier"
    } else {
        "regressor"
    }
}

fn validate_algorithm(a: &Algorithm) -> Result<()> {
    let positive = |name: &'static str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name,
                reason: alloc::format!("{v} must be positive"),
            })
        }
    };
    match *a {
        Algorithm::Svc { rbf_gamma, c, .. } => {
            positive("c", c)?;
            if let Some(g) = rbf_gamma {
                positive("rbf_gamma", g)?;
            }
        }
        Algorithm::Svr {
            rbf_gamma, c, epsilon, ..
        } => {
            positive("c", c)?;
            positive("epsilon", epsilon)?;
            if let Some(g) = rbf_gamma {
                positive("rbf_gamma", g)?;
            }
        }
        Algorithm::AdaBoost { rounds } => positive("rounds", rounds as f64)?,
        Algorithm::L2Boost {
            stages,
            shrinkage,
            max_depth,
        } => {
            positive("stages", stages as f64)?;
            positive("max_depth", max_depth as f64)?;
            if !(shrinkage > 0.0 && shrinkage <= 1.0) {
                return Err(Error::InvalidParameter {
                    name: "shrinkage",
                    reason: alloc::format!("{shrinkage} must lie in (0, 1]"),
                });
            }
        }
    }
    Ok(())
}

/// Feature matrix and labels of `task` over `records`.
pub fn task_matrix(
    records: &[Record],
    task: TaskId,
    features: &FeatureSet,
    jt: &Jtfdr,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let plm = task.observer();
    let mut x = Vec::with_capacity(records.len());
    let mut y = Vec::with_capacity(records.len());
    for r in records {
        let obs = r.observation(plm).ok_or_else(|| Error::MissingObservation {
            task: task.to_string(),
            plm,
        })?;
        x.push(extract(obs, features, jt, None)?);
        y.push(task.label(&r.labels));
    }
    Ok((x, y))
}

/// Held-out performance of one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskMetrics {
    Classification(ClassificationMetrics),
    /// For `gamma-homo` these compare equivalent ages in years.
    Regression(RegressionMetrics),
}

/// Training summary recorded in a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub n_train: usize,
    pub n_features: usize,
    pub samples_per_feature: f64,
    pub n_test: usize,
    pub metrics: Option<TaskMetrics>,
}

/// Equivalent age (years) of a predicted homogeneous depth, clamped to the
/// physical range first.
pub fn t_eq_years(gamma_homo: f64) -> Result<f64> {
    let g = gamma_homo.clamp(0.0, GAMMA_HOMO_MAX);
    Ok(equivalent_age_of_gamma(g, &CableSpec::n2xsey(), &MaterialParams::nominal())? / SECONDS_PER_YEAR)
}

/// Model outputs on `records`.
pub fn predict(model: &TrainedModel, task: TaskId, records: &[Record], features: &FeatureSet, jt: &Jtfdr) -> Result<Vec<f64>> {
    let (x, _) = task_matrix(records, task, features, jt)?;
    x.iter().map(|v| model.output(v)).collect()
}

/// Metrics of `model` on `records`.
pub fn evaluate_task(
    model: &TrainedModel,
    task: TaskId,
    records: &[Record],
    features: &FeatureSet,
    jt: &Jtfdr,
) -> Result<TaskMetrics> {
    let out = predict(model, task, records, features, jt)?;
    metrics_of(task, &out, records)
}

/// Metrics of raw model outputs against the labels of `records`.
pub fn metrics_of(task: TaskId, out: &[f64], records: &[Record]) -> Result<TaskMetrics> {
    if task.is_classification() {
        let pred: Vec<f64> = out.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let actual: Vec<f64> = records.iter().map(|r| task.label(&r.labels)).collect();
        return Ok(TaskMetrics::Classification(classification_metrics(&pred, &actual)?));
    }
    if task == TaskId::GammaHomo {
        let pred = out.iter().map(|&g| t_eq_years(g)).collect::<Result<Vec<_>>>()?;
        let actual: Vec<f64> = records.iter().map(|r| r.labels.t_eq / SECONDS_PER_YEAR).collect();
        return Ok(TaskMetrics::Regression(regression_metrics(&pred, &actual)?));
    }
    let actual: Vec<f64> = records.iter().map(|r| task.label(&r.labels)).collect();
    Ok(TaskMetrics::Regression(regression_metrics(out, &actual)?))
}

/// Trains one task with the training guards and the solver audit, then
/// evaluates it on `test` when that is non-empty.
pub fn train_task(
    task: TaskId,
    train: &[Record],
    test: &[Record],
    seed: u64,
    cfg: &PipelineConfig,
    jt: &Jtfdr,
) -> Result<(TrainedModel, TaskReport)> {
    let settings = cfg.settings(task);
    settings.features.validate()?;
    let d = settings.features.dimension();
    let n = train.len();
    if (n as f64) < cfg.min_samples_per_feature * d as f64 {
        return Err(Error::InsufficientSamples {
            task: task.to_string(),
            n_samples: n,
            n_features: d,
        });
    }
    let (x, y) = task_matrix(train, task, &settings.features, jt)?;
    if task.is_classification() {
        let pos = y.iter().filter(|&&v| v > 0.0).count() as f64 / n as f64;
        if pos == 0.0 || pos == 1.0 {
            return Err(Error::SingleClass(task.to_string()));
        }
        if pos.min(1.0 - pos) < cfg.min_class_fraction {
            return Err(Error::ClassImbalance {
                task: task.to_string(),
                fraction: pos,
            });
        }
    }
    let model = TrainedModel::train(
        &task.to_string(),
        settings.features.names(),
        &x,
        &y,
        &settings.algorithm,
        seed,
    )?;
    audit(&model)?;
    let metrics = if test.is_empty() {
        None
    } else {
        Some(evaluate_task(&model, task, test, &settings.features, jt)?)
    };
    let report = TaskReport {
        task: task.to_string(),
        n_train: n,
        n_features: d,
        samples_per_feature: n as f64 / d as f64,
        n_test: test.len(),
        metrics,
    };
    Ok((model, report))
}

fn audit(model: &TrainedModel) -> Result<()> {
    match &model.model {
        Model::Svc(m) | Model::Svr(m) if !m.converged(KKT_TOLERANCE) => Err(Error::NotConverged {
            task: model.task.clone(),
            gap: m.kkt_gap,
            tolerance: KKT_TOLERANCE,
        }),
        _ => Ok(()),
    }
}

/// Trained models with the configuration they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub pipeline: PipelineConfig,
    pub scenario: ScenarioConfig,
    /// Keyed by task name.
    pub models: BTreeMap<String, TrainedModel>,
    pub reports: Vec<TaskReport>,
}

impl ModelBundle {
    /// Checks that every model matches the configured feature definition of
    /// its task.
    pub fn assemble(
        pipeline: PipelineConfig,
        scenario: ScenarioConfig,
        parts: Vec<(TrainedModel, TaskReport)>,
    ) -> Result<Self> {
        let mut models = BTreeMap::new();
        let mut reports = Vec::with_capacity(parts.len());
        for (m, r) in parts {
            let task: TaskId = m.task.parse()?;
            if m.feature_names != pipeline.settings(task).features.names() {
                return Err(Error::InvalidParameter {
                    name: "bundle",
                    reason: alloc::format!("{task} model features differ from the configured feature set"),
                });
            }
            models.insert(m.task.clone(), m);
            reports.push(r);
        }
        Ok(Self {
            pipeline,
            scenario,
            models,
            reports,
        })
    }

    pub fn model(&self, task: TaskId) -> Result<&TrainedModel> {
        self.models
            .get(&task.to_string())
            .ok_or_else(|| Error::MissingModel(task.to_string()))
    }

    pub fn jtfdr(&self) -> Result<Jtfdr> {
        self.pipeline.jtfdr(&self.scenario)
    }

    /// Whether every task needed by [`diagnose`] is present.
    pub fn is_complete(&self) -> bool {
        TaskId::ALL.iter().all(|t| self.models.contains_key(&t.to_string()))
    }
}

/// Training and held-out records of one task.
#[derive(Debug, Clone, Copy)]
pub struct TaskData<'a> {
    pub task: TaskId,
    pub train: &'a [Record],
    pub test: &'a [Record],
}

/// Trains every task in `data` sequentially.
pub fn train_pipeline(data: &[TaskData<'_>], scenario: &ScenarioConfig, cfg: &PipelineConfig) -> Result<ModelBundle> {
    cfg.validate()?;
    let jt = cfg.jtfdr(scenario)?;
    let parts = data
        .iter()
        .map(|d| train_task(d.task, d.train, d.test, scenario.seed, cfg, &jt))
        .collect::<Result<Vec<_>>>()?;
    ModelBundle::assemble(cfg.clone(), scenario.clone(), parts)
}

/// Seed for an independent dataset derived from `base`: `salt = 0` is the
/// held-out set, sweeps use `1..`.
pub fn derived_seed(base: u64, salt: u64) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(u64::MAX - salt);
    rng.next_u64()
}

/// Copy of `cfg` drawing from an independent seed.
pub fn with_seed(cfg: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    ScenarioConfig { seed, ..cfg.clone() }
}

/// Seed of the held-out set belonging to training seed `seed`.
pub fn test_seed(seed: u64) -> u64 {
    derived_seed(seed, 0)
}
