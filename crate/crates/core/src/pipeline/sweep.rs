use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::{derived_seed, evaluate_task, test_seed, train_task, with_seed, ModelBundle, PipelineConfig, TaskMetrics};
use crate::dielectric::{propagation_velocity, total_permittivity};
use crate::error::{Error, Result};
use crate::netmodel::{impulse_response, ChannelObservation};
use crate::reflectometry::Jtfdr;
use crate::scenario::{Labels, Record, ScenarioConfig, TaskId};

/// One grid point of a training-size sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_train: usize,
    /// Detection rate for classifiers, `R^2` for regressors.
    pub metric: f64,
    /// False-alarm rate for classifiers, fitted slope for regressors.
    pub secondary: f64,
    /// Whether the metric is within the band of the final grid value.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub task: String,
    pub metric_name: String,
    pub secondary_name: String,
    pub delta: f64,
    pub rows: Vec<SweepRow>,
    /// First `n_train` whose metric is within `delta` of the final value.
    pub saturation: Option<usize>,
    /// No metric drops by more than `delta` from one point to the next.
    pub monotone: bool,
}

fn headline(m: &TaskMetrics) -> (f64, f64) {
    match m {
        TaskMetrics::Classification(c) => (c.detection, c.false_alarm),
        TaskMetrics::Regression(r) => (r.r2, r.slope),
    }
}

/// Trains on a fresh dataset of `n_train` draws (grid position `k`) and
/// evaluates on `test`.
pub fn sweep_point<G>(
    task: TaskId,
    n_train: usize,
    k: usize,
    test: &[Record],
    scenario: &ScenarioConfig,
    cfg: &PipelineConfig,
    generate: &G,
) -> Result<SweepRow>
where
    G: Fn(&ScenarioConfig, TaskId, Range<u64>) -> Result<Vec<Record>>,
{
    let jt = cfg.jtfdr(scenario)?;
    let train_cfg = with_seed(scenario, derived_seed(scenario.seed, k as u64 + 1));
    let train = generate(&train_cfg, task, 0..n_train as u64)?;
    let (model, _) = train_task(task, &train, &[], train_cfg.seed, cfg, &jt)?;
    let features = &cfg.settings(task).features;
    let (metric, secondary) = headline(&evaluate_task(&model, task, test, features, &jt)?);
    Ok(SweepRow {
        n_train,
        metric,
        secondary,
        saturated: false,
    })
}

/// Marks saturation and monotonicity on finished rows.
pub fn summarize_sweep(task: TaskId, mut rows: Vec<SweepRow>, delta: f64) -> Result<SweepTable> {
    let last = rows.last().ok_or(Error::Empty("training-size grid"))?.metric;
    let mut saturation = None;
    for r in rows.iter_mut() {
        r.saturated = (r.metric - last).abs() <= delta;
    }
    // Saturated from this point on, not merely touching the band once.
    for i in 0..rows.len() {
        if rows[i..].iter().all(|r| r.saturated) {
            saturation = Some(rows[i].n_train);
            break;
        }
    }
    let monotone = rows.windows(2).all(|w| w[1].metric >= w[0].metric - delta);
    let (metric_name, secondary_name) = if task.is_classification() {
        ("detection", "false_alarm")
    } else {
        ("r2", "slope")
    };
    Ok(SweepTable {
        task: alloc::format!("{task}"),
        metric_name: String::from(metric_name),
        secondary_name: String::from(secondary_name),
        delta,
        rows,
        saturation,
        monotone,
    })
}

/// Performance against training-set size. Each grid point draws a fresh
/// training set; all share one held-out set of `n_test` draws.
pub fn ntr_sweep<G>(
    task: TaskId,
    grid: &[usize],
    n_test: usize,
    delta: f64,
    scenario: &ScenarioConfig,
    cfg: &PipelineConfig,
    generate: G,
) -> Result<SweepTable>
where
    G: Fn(&ScenarioConfig, TaskId, Range<u64>) -> Result<Vec<Record>>,
{
    if grid.is_empty() {
        return Err(Error::Empty("training-size grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: String::from("training sizes must be strictly increasing"),
        });
    }
    let test = generate(&with_seed(scenario, test_seed(scenario.seed)), task, 0..n_test as u64)?;
    let rows = grid
        .iter()
        .enumerate()
        .map(|(k, &n)| sweep_point(task, n, k, &test, scenario, cfg, &generate))
        .collect::<Result<Vec<_>>>()?;
    summarize_sweep(task, rows, delta)
}

/// Metrics of one bundle model on nominal and on perturbed held-out data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub nominal: TaskMetrics,
    pub perturbed: TaskMetrics,
}

/// Train-on-nominal, test-on-perturbed comparison for `task`.
pub fn robustness_eval(bundle: &ModelBundle, task: TaskId, nominal: &[Record], perturbed: &[Record]) -> Result<RobustnessRow> {
    let jt = bundle.jtfdr()?;
    let model = bundle.model(task)?;
    let features = &bundle.pipeline.settings(task).features;
    Ok(RobustnessRow {
        nominal: evaluate_task(model, task, nominal, features, &jt)?,
        perturbed: evaluate_task(model, task, perturbed, features, &jt)?,
    })
}

/// Peak-to-floor ratios of the echo from a degradation's near end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Salience {
    pub jtfdr: f64,
    pub href: f64,
}

/// Largest value within `guard` samples of `center` divided by the median of
/// the samples in `window` that are farther than `guard` from every index in
/// `exclude`.
fn peak_to_floor(x: &[f64], center: usize, window: Range<usize>, exclude: &[usize], guard: usize) -> Option<f64> {
    let lo = center.saturating_sub(guard);
    let hi = (center + guard + 1).min(x.len());
    let peak = x.get(lo..hi)?.iter().cloned().fold(0.0, f64::max);
    let start = window.start;
    let mut floor: Vec<f64> = x
        .get(window)?
        .iter()
        .enumerate()
        .map(|(i, &v)| (start + i, v))
        .filter(|&(i, _)| exclude.iter().all(|&e| i.abs_diff(e) > guard))
        .map(|(_, v)| v)
        .collect();
    if floor.len() < 8 {
        return None;
    }
    floor.sort_by(f64::total_cmp);
    let median = floor[floor.len() / 2];
    (median > 0.0).then(|| peak / median)
}

/// Salience of the degradation's near-end echo in the reflectometry trace
/// and in `|h_ref|`. Echo positions come from the labels and the
/// homogeneous propagation velocity; the floor excludes the port, the
/// degradation's two ends and the branch point. `None` when the geometry
/// leaves too little floor to measure.
pub fn ld_start_salience(
    obs: &ChannelObservation,
    labels: &Labels,
    scenario: &ScenarioConfig,
    jt: &Jtfdr,
) -> Result<Option<Salience>> {
    if !labels.ld_present {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: String::from("no localized degradation"),
        });
    }
    let f_c = 0.5 * (jt.chirp.f_low + jt.chirp.f_high);
    let v = propagation_velocity(total_permittivity(labels.gamma_homo, f_c, &scenario.material)?)?;
    let v_ld = propagation_velocity(total_permittivity(labels.gamma_local, f_c, &scenario.material)?)?;
    let dt = jt.time.dt();
    let start = 2.0 * labels.target_m / v / dt;
    let end = start + 2.0 * labels.lwt_m / v_ld / dt;
    let bp = end + 2.0 * (scenario.trunk_length_m - labels.target_m - labels.lwt_m).max(0.0) / v / dt;
    let guard = jt.peaks.min_separation;
    let idx = |t: f64| libm::round(t) as usize;
    let window = guard..idx(bp).saturating_sub(guard);
    let exclude = [idx(start), idx(end), idx(bp)];
    let trace = jt.trace(&obs.h_ref, &obs.grid)?;
    let h: Vec<f64> = impulse_response(&obs.h_ref, &obs.grid, &jt.time)?
        .iter()
        .map(|v| v.abs())
        .collect();
    let a = peak_to_floor(&trace.samples, idx(start), window.clone(), &exclude, guard);
    let b = peak_to_floor(&h, idx(start), window, &exclude, guard);
    Ok(match (a, b) {
        (Some(jtfdr), Some(href)) => Some(Salience { jtfdr, href }),
        _ => None,
    })
}
