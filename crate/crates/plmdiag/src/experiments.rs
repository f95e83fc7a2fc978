//! Desk-scale experiment harness: held-out evaluation, training-size sweeps
//! and the tables behind `reproduce`.

use std::path::{Path, PathBuf};

use plmdiag_core::dielectric::{propagation_velocity, total_permittivity};
use plmdiag_core::learning::{regression_metrics, Algorithm, FeatureSet, RegressionMetrics, TrainedModel};
use plmdiag_core::netmodel::{impulse_response, solve_network};
use plmdiag_core::pipeline::{
    predict, summarize_sweep, sweep_point, t_eq_years, test_seed, train_task, with_seed, PipelineConfig,
    SweepTable, TaskReport, TaskSettings,
};
use plmdiag_core::reflectometry::{detect_peaks, localize, Jtfdr, Localization};
use plmdiag_core::scenario::{fig5_scenario, Record, ScenarioConfig, TaskId};
use plmdiag_core::SECONDS_PER_YEAR;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::generate_records_par;
use crate::error::{Error, Result};

pub const FIGURE_IDS: [&str; 10] = [
    "fig5", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig15", "fig16", "fig17",
];

/// A CSV table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, headers: &[&str]) -> Self {
        Self {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.csv", self.name));
        let csv_err = |e: csv::Error| Error::Runtime(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&self.headers).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn train_records(scenario: &ScenarioConfig, task: TaskId, n: usize) -> Result<Vec<Record>> {
    Ok(generate_records_par(scenario, task, 0..n as u64)?)
}

/// Held-out records: same distribution, independent seed.
pub fn test_records(scenario: &ScenarioConfig, task: TaskId, n: usize) -> Result<Vec<Record>> {
    train_records(&with_seed(scenario, test_seed(scenario.seed)), task, n)
}

/// Trains `task` with `settings` in place of the configured ones.
pub fn train_with(
    cfg: &RunConfig,
    task: TaskId,
    settings: &TaskSettings,
    train: &[Record],
    test: &[Record],
) -> Result<(TrainedModel, TaskReport)> {
    let mut p = cfg.pipeline.clone();
    *p.settings_mut(task) = settings.clone();
    let jt = p.jtfdr(&cfg.scenario)?;
    Ok(train_task(task, train, test, cfg.scenario.seed, &p, &jt)?)
}

/// Predicted and actual values in the units the figures use: equivalent age
/// in years for `gamma-homo`, raw labels otherwise.
pub fn scatter(
    model: &TrainedModel,
    task: TaskId,
    records: &[Record],
    features: &FeatureSet,
    jt: &Jtfdr,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let out = predict(model, task, records, features, jt)?;
    if task == TaskId::GammaHomo {
        let pred = out.iter().map(|&g| t_eq_years(g)).collect::<plmdiag_core::Result<Vec<_>>>()?;
        let actual = records.iter().map(|r| r.labels.t_eq / SECONDS_PER_YEAR).collect();
        return Ok((pred, actual));
    }
    Ok((out, records.iter().map(|r| task.label(&r.labels)).collect()))
}

/// Training-size sweep with grid points trained in parallel; same result
/// as [`plmdiag_core::pipeline::ntr_sweep`].
pub fn sweep(
    task: TaskId,
    grid: &[usize],
    n_test: usize,
    delta: f64,
    scenario: &ScenarioConfig,
    pipeline: &PipelineConfig,
) -> Result<SweepTable> {
    crate::config::validate_grid(grid).map_err(Error::Usage)?;
    let test = test_records(scenario, task, n_test)?;
    let gen = |c: &ScenarioConfig, t: TaskId, r: std::ops::Range<u64>| {
        generate_records_par(c, t, r).map_err(|e| match e {
            crate::dataset::DatasetError::Generate { source, .. } => source,
            other => plmdiag_core::Error::InvalidParameter {
                name: "dataset",
                reason: other.to_string(),
            },
        })
    };
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(k, &n)| sweep_point(task, n, k, &test, scenario, pipeline, &gen))
        .collect::<plmdiag_core::Result<Vec<_>>>()?;
    Ok(summarize_sweep(task, rows, delta)?)
}

/// Lag (samples) of the branch-point echo for a line of depth `gamma_homo`,
/// using the velocity at the chirp's center frequency.
pub fn expected_bp_lag(gamma_homo: f64, l0: f64, scenario: &ScenarioConfig, jt: &Jtfdr) -> Result<f64> {
    let f_c = 0.5 * (jt.chirp.f_low + jt.chirp.f_high);
    let v = propagation_velocity(total_permittivity(gamma_homo, f_c, &scenario.material)?)?;
    Ok(2.0 * l0 / v / jt.time.dt())
}

/// Ratio localization of a trace taken at a PLM whose trunk is `l0` long.
pub fn localize_trace(
    peaks: &[plmdiag_core::reflectometry::Peak],
    gamma_homo: f64,
    l0: f64,
    scenario: &ScenarioConfig,
    jt: &Jtfdr,
) -> Result<Localization> {
    let bp = expected_bp_lag(gamma_homo, l0, scenario, jt)?;
    Ok(localize(peaks, l0, bp, 0.1)?)
}

fn gamma_bins(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let r = cfg.scenario.gamma_local;
    let n = cfg.run.gamma_bins;
    let w = (r.hi - r.lo) / n as f64;
    (0..n).map(|i| (r.lo + w * i as f64, r.lo + w * (i + 1) as f64)).collect()
}

fn in_bin(g: f64, (lo, hi): (f64, f64), last: bool) -> bool {
    g >= lo && (g < hi || (last && g <= hi))
}

fn fit_row(panel: &str, m: &RegressionMetrics) -> Vec<String> {
    vec![panel.to_string(), num(m.slope), num(m.intercept), num(m.r2), num(m.mse)]
}

pub fn reproduce(id: &str, cfg: &RunConfig) -> Result<Vec<Table>> {
    match id {
        "fig5" => fig5(cfg),
        "fig7" => fig7(cfg),
        "fig8" => scatter_figure(cfg, "fig8", &[("a", TaskId::GammaHomo), ("b", TaskId::GammaLocal)]),
        "fig9" => fig9(cfg),
        "fig10" => scatter_figure(cfg, "fig10", &[("a", TaskId::Target), ("b", TaskId::Product)]),
        "fig11" => fig11(cfg),
        "fig12" => fig12(cfg),
        "fig15" => sweep_figure(cfg, "fig15", TaskId::LdIdentify(0)),
        "fig16" => sweep_figure(cfg, "fig16", TaskId::GammaHomo),
        "fig17" => sweep_figure(cfg, "fig17", TaskId::GammaLocal),
        _ => Err(Error::Usage(format!(
            "unknown figure id {id:?}; valid ids: {}",
            FIGURE_IDS.join(", ")
        ))),
    }
}

/// Reflectometry envelope and `-|h_ref|` of the reference degradation at
/// PLM 1, each normalized to its origin peak, plus the localized peaks.
fn fig5(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = fig5_scenario();
    let jt = cfg.pipeline.jtfdr(&cfg.scenario)?;
    let grid = cfg.scenario.grid();
    let obs = solve_network(&scn, &grid)?.observation(0, 1)?;
    let trace = jt.trace(&obs.h_ref, &grid)?;
    let h: Vec<f64> = impulse_response(&obs.h_ref, &grid, &jt.time)?.iter().map(|v| v.abs()).collect();
    let h_peaks = detect_peaks(&h, jt.peaks.rel_threshold, jt.peaks.min_separation)?;
    let a_jt = trace.peaks.first().map_or(1.0, |p| p.magnitude);
    let a_h = h_peaks.first().map_or(1.0, |p| p.magnitude);
    let mut t = Table::new("fig5", &["sample", "time_us", "h_jtfdr", "neg_abs_href"]);
    for (i, (j, r)) in trace.samples.iter().zip(&h).enumerate() {
        t.push(vec![i.to_string(), num(i as f64 * trace.dt * 1e6), num(j / a_jt), num(-r / a_h)]);
    }
    let mut p = Table::new("fig5-peaks", &["label", "sample", "position", "magnitude", "distance_m"]);
    let l0 = scn.trunks[0].length_m;
    let loc = localize_trace(&trace.peaks, scn.trunks[0].profile.gamma_homo, l0, &cfg.scenario, &jt)?;
    let bp_at = trace.peaks.iter().position(|q| q.index == loc.bp.index).unwrap_or(0);
    for (k, q) in trace.peaks[..=bp_at].iter().enumerate() {
        let label = char::from(b'A' + (k as u8).min(25)).to_string();
        let d = if k == 0 {
            0.0
        } else if k == bp_at {
            l0
        } else {
            loc.distances[k - 1]
        };
        p.push(vec![label, q.index.to_string(), num(q.position), num(q.magnitude / a_jt), num(d)]);
    }
    Ok(vec![t, p])
}

/// Stage-1 detection per `gamma_local` bin and false alarms for every
/// feature set and algorithm at PLM 1.
fn fig7(cfg: &RunConfig) -> Result<Vec<Table>> {
    let task = TaskId::LdIdentify(0);
    let train = train_records(&cfg.scenario, task, cfg.run.n_train)?;
    let test = test_records(&cfg.scenario, task, cfg.run.n_test)?;
    let combos: Vec<(&str, FeatureSet, Algorithm)> = [("jtfdr", FeatureSet::jtfdr()), ("raw-href", FeatureSet::raw_href())]
        .into_iter()
        .flat_map(|(n, f)| [Algorithm::adaboost(), Algorithm::svc_rbf()].map(|a| (n, f.clone(), a)))
        .collect();
    let outputs = combos
        .par_iter()
        .map(|(_, f, a)| {
            let s = TaskSettings::new(f.clone(), *a);
            let (m, _) = train_with(cfg, task, &s, &train, &[])?;
            let jt = cfg.pipeline.jtfdr(&cfg.scenario)?;
            Ok(predict(&m, task, &test, f, &jt)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "fig7",
        &["feature_set", "algorithm", "gamma_lo", "gamma_hi", "n_positive", "detection", "false_alarm"],
    );
    let bins = gamma_bins(cfg);
    for ((name, _, alg), out) in combos.iter().zip(&outputs) {
        let neg: Vec<bool> = test
            .iter()
            .zip(out)
            .filter(|(r, _)| task.label(&r.labels) < 0.0)
            .map(|(_, &o)| o >= 0.0)
            .collect();
        let fa = neg.iter().filter(|&&b| b).count() as f64 / neg.len().max(1) as f64;
        for (b, &bin) in bins.iter().enumerate() {
            let hits: Vec<bool> = test
                .iter()
                .zip(out)
                .filter(|(r, _)| task.label(&r.labels) > 0.0 && in_bin(r.labels.gamma_local, bin, b + 1 == bins.len()))
                .map(|(_, &o)| o >= 0.0)
                .collect();
            let det = hits.iter().filter(|&&h| h).count() as f64 / hits.len().max(1) as f64;
            t.push(vec![
                name.to_string(),
                alg.name().to_string(),
                num(bin.0),
                num(bin.1),
                hits.len().to_string(),
                num(det),
                num(fa),
            ]);
        }
    }
    Ok(vec![t])
}

/// Branch location per `gamma_local` bin with the stage-1 features and with
/// the extended branch features.
fn fig9(cfg: &RunConfig) -> Result<Vec<Table>> {
    let task = TaskId::BranchLocate;
    let train = train_records(&cfg.scenario, task, cfg.run.n_train)?;
    let test = test_records(&cfg.scenario, task, cfg.run.n_test)?;
    let alg = cfg.pipeline.branch_locate.algorithm;
    let sets = [("a", FeatureSet::jtfdr()), ("b", FeatureSet::branch())];
    let outputs = sets
        .par_iter()
        .map(|(_, f)| {
            let (m, _) = train_with(cfg, task, &TaskSettings::new(f.clone(), alg), &train, &[])?;
            let jt = cfg.pipeline.jtfdr(&cfg.scenario)?;
            Ok(predict(&m, task, &test, f, &jt)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "fig9",
        &["panel", "gamma_lo", "gamma_hi", "n_trunk", "n_extension", "detection", "false_alarm"],
    );
    let bins = gamma_bins(cfg);
    for ((panel, _), out) in sets.iter().zip(&outputs) {
        for (b, &bin) in bins.iter().enumerate() {
            let (mut tp, mut np, mut fp, mut nn) = (0, 0, 0, 0);
            for (r, &o) in test.iter().zip(out) {
                if !in_bin(r.labels.gamma_local, bin, b + 1 == bins.len()) {
                    continue;
                }
                if task.label(&r.labels) > 0.0 {
                    np += 1;
                    tp += usize::from(o >= 0.0);
                } else {
                    nn += 1;
                    fp += usize::from(o >= 0.0);
                }
            }
            t.push(vec![
                panel.to_string(),
                num(bin.0),
                num(bin.1),
                np.to_string(),
                nn.to_string(),
                num(tp as f64 / np.max(1) as f64),
                num(fp as f64 / nn.max(1) as f64),
            ]);
        }
    }
    Ok(vec![t])
}

/// Predicted-vs-actual scatter and fitted line for each `(panel, task)`
/// with the configured settings.
fn scatter_figure(cfg: &RunConfig, name: &str, panels: &[(&str, TaskId)]) -> Result<Vec<Table>> {
    let jt = cfg.pipeline.jtfdr(&cfg.scenario)?;
    let results = panels
        .par_iter()
        .map(|&(_, task)| {
            let train = train_records(&cfg.scenario, task.sampling_family(), cfg.run.n_train)?;
            let test = test_records(&cfg.scenario, task.sampling_family(), cfg.run.n_test)?;
            let s = cfg.pipeline.settings(task);
            let (m, _) = train_with(cfg, task, s, &train, &[])?;
            scatter(&m, task, &test, &s.features, &jt)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(name, &["panel", "task", "actual", "predicted"]);
    let mut f = Table::new(format!("{name}-fit"), &["panel", "slope", "intercept", "r2", "mse"]);
    for (&(panel, task), (pred, actual)) in panels.iter().zip(&results) {
        for (a, p) in actual.iter().zip(pred) {
            t.push(vec![panel.to_string(), task.to_string(), num(*a), num(*p)]);
        }
        f.push(fit_row(panel, &regression_metrics(pred, actual)?));
    }
    Ok(vec![t, f])
}

/// `gamma_local` from the reflectometry peaks with a linear and a Gaussian
/// kernel SVR.
fn fig11(cfg: &RunConfig) -> Result<Vec<Table>> {
    let task = TaskId::GammaLocal;
    let jt = cfg.pipeline.jtfdr(&cfg.scenario)?;
    let train = train_records(&cfg.scenario, task, cfg.run.n_train)?;
    let test = test_records(&cfg.scenario, task, cfg.run.n_test)?;
    let features = cfg.pipeline.gamma_local.features.clone();
    let linear = Algorithm::svr_linear();
    let rbf = match linear {
        Algorithm::Svr { c, epsilon, .. } => Algorithm::Svr {
            rbf: true,
            rbf_gamma: None,
            c,
            epsilon,
        },
        a => a,
    };
    let panels = [("a", linear), ("b", rbf)];
    let results = panels
        .par_iter()
        .map(|(_, a)| {
            let (m, _) = train_with(cfg, task, &TaskSettings::new(features.clone(), *a), &train, &[])?;
            scatter(&m, task, &test, &features, &jt)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("fig11", &["panel", "algorithm", "actual", "predicted"]);
    let mut f = Table::new("fig11-fit", &["panel", "slope", "intercept", "r2", "mse"]);
    for ((panel, a), (pred, actual)) in panels.iter().zip(&results) {
        for (x, y) in actual.iter().zip(pred) {
            t.push(vec![panel.to_string(), a.name().to_string(), num(*x), num(*y)]);
        }
        f.push(fit_row(panel, &regression_metrics(pred, actual)?));
    }
    Ok(vec![t, f])
}

/// Scenario config for perturbed test data.
pub fn perturbed(cfg: &RunConfig) -> ScenarioConfig {
    ScenarioConfig {
        wt_loss_tangent: cfg.run.robustness_loss_tangent,
        wt_magnitude: cfg.run.robustness_magnitude,
        ..cfg.scenario.clone()
    }
}

/// Equivalent age and target location trained on nominal data, evaluated on
/// nominal and on perturbed test data.
fn fig12(cfg: &RunConfig) -> Result<Vec<Table>> {
    let jt = cfg.pipeline.jtfdr(&cfg.scenario)?;
    let panels = [("a", TaskId::GammaHomo), ("b", TaskId::Target)];
    let pert = perturbed(cfg);
    let results = panels
        .par_iter()
        .map(|&(_, task)| {
            let fam = task.sampling_family();
            let train = train_records(&cfg.scenario, fam, cfg.run.n_train)?;
            let nominal = test_records(&cfg.scenario, fam, cfg.run.n_test)?;
            let perturbed = test_records(&pert, fam, cfg.run.n_test)?;
            let s = cfg.pipeline.settings(task);
            let (m, _) = train_with(cfg, task, s, &train, &[])?;
            Ok([
                scatter(&m, task, &nominal, &s.features, &jt)?,
                scatter(&m, task, &perturbed, &s.features, &jt)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("fig12", &["panel", "condition", "actual", "predicted"]);
    let mut f = Table::new("fig12-fit", &["panel", "condition", "slope", "intercept", "r2", "mse"]);
    for ((panel, _), pair) in panels.iter().zip(&results) {
        for (cond, (pred, actual)) in ["nominal", "perturbed"].iter().zip(pair) {
            for (x, y) in actual.iter().zip(pred) {
                t.push(vec![panel.to_string(), cond.to_string(), num(*x), num(*y)]);
            }
            let mut row = fit_row(panel, &regression_metrics(pred, actual)?);
            row.insert(1, cond.to_string());
            f.push(row);
        }
    }
    Ok(vec![t, f])
}

pub fn sweep_tables(name: &str, s: &SweepTable) -> Vec<Table> {
    let mut t = Table::new(name, &["n_train", &s.metric_name, &s.secondary_name, "saturated"]);
    for r in &s.rows {
        t.push(vec![r.n_train.to_string(), num(r.metric), num(r.secondary), r.saturated.to_string()]);
    }
    let mut sum = Table::new(format!("{name}-summary"), &["task", "metric", "delta", "saturation_point", "monotone"]);
    sum.push(vec![
        s.task.clone(),
        s.metric_name.clone(),
        num(s.delta),
        s.saturation.map_or_else(|| String::from("none"), |n| n.to_string()),
        s.monotone.to_string(),
    ]);
    vec![t, sum]
}

fn sweep_figure(cfg: &RunConfig, name: &str, task: TaskId) -> Result<Vec<Table>> {
    let s = sweep(
        task,
        &cfg.run.sweep_grid,
        cfg.run.sweep_n_test,
        cfg.run.sweep_delta,
        &cfg.scenario,
        &cfg.pipeline,
    )?;
    Ok(sweep_tables(name, &s))
}
