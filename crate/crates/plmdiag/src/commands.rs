//! The five CLI commands as library calls.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plmdiag_core::netmodel::{solve_network, ChannelObservation, NetworkScenario, NUM_PLMS};
use plmdiag_core::pipeline::{diagnose, train_task, DiagnosisReport, ModelBundle, ProfileType, TaskMetrics, TaskReport};
use plmdiag_core::scenario::{fig5_scenario, sample_scenario, ScenarioConfig, TaskId};
use plmdiag_core::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{load_bundle, save_bundle};
use crate::checksum::{checksum64, hex64};
use crate::config::RunConfig;
use crate::dataset::{generate_dataset, load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::experiments::{self, localize_trace, sweep_tables, Table};
use crate::trace::write_trace;

pub const DATA_MANIFEST: &str = "manifest.json";

/// Dataset families (one file per split) that cover `tasks`; every task
/// when `tasks` is empty.
pub fn families(tasks: &[TaskId]) -> Vec<TaskId> {
    let src: &[TaskId] = if tasks.is_empty() { &TaskId::ALL } else { tasks };
    let mut out: Vec<TaskId> = Vec::new();
    for t in src {
        let f = t.sampling_family();
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}

pub fn dataset_path(dir: &Path, split: &str, family: TaskId) -> PathBuf {
    dir.join(split).join(format!("{family}.plmd"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub task: String,
    pub split: String,
    pub file: String,
    pub records: usize,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub format: String,
    pub version: u32,
    pub train_seed: u64,
    pub test_seed: u64,
    pub files: Vec<DatasetEntry>,
}

/// Writes `train/` and `test/` datasets for the families of `tasks` plus a
/// manifest with whole-file checksums.
pub fn cmd_generate(cfg: &RunConfig, out: &Path, tasks: &[TaskId]) -> Result<DataManifest> {
    let test_cfg = plmdiag_core::pipeline::with_seed(&cfg.scenario, plmdiag_core::pipeline::test_seed(cfg.scenario.seed));
    let mut files = Vec::new();
    for family in families(tasks) {
        for (split, scn, n) in [("train", &cfg.scenario, cfg.run.n_train), ("test", &test_cfg, cfg.run.n_test)] {
            let path = dataset_path(out, split, family);
            generate_dataset(scn, family, n, &path)?;
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            files.push(DatasetEntry {
                task: family.to_string(),
                split: split.to_string(),
                file: format!("{split}/{family}.plmd"),
                records: n,
                checksum: hex64(checksum64(&bytes)),
            });
        }
    }
    let manifest = DataManifest {
        format: String::from("plmdiag-datasets"),
        version: 1,
        train_seed: cfg.scenario.seed,
        test_seed: test_cfg.seed,
        files,
    };
    let path = out.join(DATA_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn load_family(data: &Path, split: &str, family: TaskId) -> Result<Dataset> {
    let path = dataset_path(data, split, family);
    if !path.exists() {
        return Err(Error::Runtime(format!(
            "missing {split} dataset for {family}: {} (run `plmdiag generate` first)",
            path.display()
        )));
    }
    let ds = load_dataset(&path)?;
    if ds.header.task != family.to_string() {
        return Err(Error::Format {
            path,
            reason: format!("holds task {}, expected {family}", ds.header.task),
        });
    }
    Ok(ds)
}

fn metrics_table(reports: &[TaskReport]) -> Table {
    let headers = [
        "task",
        "n_train",
        "n_features",
        "samples_per_feature",
        "n_test",
        "detection",
        "false_alarm",
        "slope",
        "intercept",
        "r2",
        "mse",
    ];
    let mut rows = Vec::new();
    for r in reports {
        let mut row = vec![
            r.task.clone(),
            r.n_train.to_string(),
            r.n_features.to_string(),
            r.samples_per_feature.to_string(),
            r.n_test.to_string(),
        ];
        let blank = || String::new();
        match &r.metrics {
            Some(TaskMetrics::Classification(c)) => {
                row.extend([c.detection.to_string(), c.false_alarm.to_string(), blank(), blank(), blank(), blank()])
            }
            Some(TaskMetrics::Regression(m)) => row.extend([
                blank(),
                blank(),
                m.slope.to_string(),
                m.intercept.to_string(),
                m.r2.to_string(),
                m.mse.to_string(),
            ]),
            None => row.extend(std::iter::repeat_with(blank).take(6)),
        }
        rows.push(row);
    }
    Table {
        name: String::from("metrics"),
        headers: headers.iter().map(|h| h.to_string()).collect(),
        rows,
    }
}

/// Trains every task from the datasets under `data` and writes the bundle
/// (models, manifest, `metrics.csv`, resolved `config.toml`) to
/// `bundle_dir`. The scenario section comes from the datasets.
pub fn cmd_train(cfg: &RunConfig, data: &Path, bundle_dir: &Path) -> Result<ModelBundle> {
    let mut sets: BTreeMap<String, (Dataset, Dataset)> = BTreeMap::new();
    for family in families(&[]) {
        let train = load_family(data, "train", family)?;
        let test = load_family(data, "test", family)?;
        sets.insert(family.to_string(), (train, test));
    }
    let scenario: ScenarioConfig = sets.values().next().expect("at least one family").0.header.config.clone();
    if let Some((name, _)) = sets.iter().find(|(_, (tr, _))| tr.header.config != scenario) {
        return Err(Error::Runtime(format!("train dataset for {name} was generated with a different config")));
    }
    cfg.pipeline.validate()?;
    let jt = cfg.pipeline.jtfdr(&scenario)?;
    let parts = TaskId::ALL
        .par_iter()
        .map(|&task| {
            let (train, test) = &sets[&task.sampling_family().to_string()];
            train_task(task, &train.records, &test.records, scenario.seed, &cfg.pipeline, &jt)
        })
        .collect::<plmdiag_core::Result<Vec<_>>>()?;
    let bundle = ModelBundle::assemble(cfg.pipeline.clone(), scenario, parts)?;
    save_bundle(bundle_dir, &bundle)?;
    metrics_table(&bundle.reports).write_csv(bundle_dir)?;
    let resolved = RunConfig {
        scenario: bundle.scenario.clone(),
        ..cfg.clone()
    };
    let path = bundle_dir.join("config.toml");
    std::fs::write(&path, resolved.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(bundle)
}

/// Where the networks to diagnose come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    /// TOML serialization of a network scenario.
    File(PathBuf),
    /// Draw `index` of the bundle's scenario config.
    Index(u64),
    /// `fig5` or `healthy`.
    Preset(String),
}

pub const PRESETS: [&str; 2] = ["fig5", "healthy"];

fn preset(name: &str, scenario: &ScenarioConfig) -> Result<NetworkScenario> {
    match name {
        "fig5" => Ok(fig5_scenario()),
        "healthy" => {
            let mut s = NetworkScenario::symmetric(scenario.trunk_length_m, 0.0, [C64::new(30.0, 5.0); NUM_PLMS]);
            s.z_plm = C64::new(scenario.z_plm_ohm, 0.0);
            Ok(s)
        }
        _ => Err(Error::Usage(format!("unknown preset {name:?}; valid presets: {}", PRESETS.join(", ")))),
    }
}

pub fn read_scenario(path: &Path) -> Result<NetworkScenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse = |reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason,
    };
    let s: NetworkScenario = toml::from_str(&text).map_err(|e| parse(e.to_string()))?;
    s.validate().map_err(|e| parse(e.to_string()))?;
    Ok(s)
}

pub fn write_scenario(path: &Path, s: &NetworkScenario) -> Result<()> {
    let text = toml::to_string_pretty(s).map_err(|e| Error::Runtime(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn resolve(src: &ScenarioSource, sampling: &ScenarioConfig) -> Result<(String, NetworkScenario)> {
    Ok(match src {
        ScenarioSource::File(p) => {
            let name = p.file_stem().map_or_else(|| String::from("scenario"), |s| s.to_string_lossy().into_owned());
            (name, read_scenario(p)?)
        }
        ScenarioSource::Index(i) => (format!("index-{i}"), sample_scenario(sampling, *i)?),
        ScenarioSource::Preset(n) => (n.clone(), preset(n, sampling)?),
    })
}

/// One diagnosed network.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosed {
    pub name: String,
    pub outcome: std::result::Result<DiagnosisReport, String>,
    pub line: String,
}

/// Text report with the reflectometry distances at the voting PLM.
fn report_text(
    r: &DiagnosisReport,
    obs: &[ChannelObservation],
    bundle: &ModelBundle,
    jt: &plmdiag_core::reflectometry::Jtfdr,
) -> String {
    let mut s = r.to_text();
    if r.profile != ProfileType::Localized {
        return s;
    }
    let Some(plm) = r.branch.map(|b| b.plm()) else {
        return s;
    };
    let scn = &bundle.scenario;
    let g = 0.5 * (scn.gamma_homo.lo + scn.gamma_homo.hi);
    let trace = jt.trace(&obs[plm].h_ref, &obs[plm].grid);
    let loc = trace
        .map_err(Error::from)
        .and_then(|t| localize_trace(&t.peaks, g, scn.trunk_length_m, scn, jt));
    match loc {
        Ok(l) => {
            let d: Vec<String> = l.distances.iter().map(|d| format!("{d:.1} m")).collect();
            let _ = writeln!(
                s,
                "reflectometry at PLM{}: branch-point echo at sample {:.1}; echoes at {}",
                plm + 1,
                l.bp.position,
                if d.is_empty() { String::from("none") } else { d.join(", ") }
            );
        }
        Err(e) => {
            let _ = writeln!(s, "reflectometry at PLM{}: unavailable ({e})", plm + 1);
        }
    }
    s
}

/// Diagnoses every source, writing `reports/<name>.txt`, `reports.lines`
/// and per-PLM traces under `out`. Scenarios that cannot be diagnosed are
/// recorded and reported as one error after all others are written.
pub fn cmd_diagnose(bundle_dir: &Path, sources: &[ScenarioSource], seed: Option<u64>, out: &Path) -> Result<Vec<Diagnosed>> {
    if sources.is_empty() {
        return Err(Error::Usage(String::from("nothing to diagnose: give --scenario, --index or --preset")));
    }
    let bundle = load_bundle(bundle_dir)?;
    if !bundle.is_complete() {
        return Err(Error::Runtime(format!("bundle {} is missing task models", bundle_dir.display())));
    }
    let jt = bundle.jtfdr()?;
    let mut sampling = bundle.scenario.clone();
    if let Some(s) = seed {
        sampling.seed = s;
    }
    let networks = sources.iter().map(|s| resolve(s, &sampling)).collect::<Result<Vec<_>>>()?;
    let grid = bundle.scenario.grid();
    let reports_dir = out.join("reports");
    let traces_dir = out.join("traces");
    for d in [&reports_dir, &traces_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut lines = String::new();
    let mut done = Vec::new();
    for (name, scn) in networks {
        let resp = solve_network(&scn, &grid)?;
        let obs = (0..NUM_PLMS)
            .map(|k| resp.observation(k, (k + 1) % NUM_PLMS))
            .collect::<plmdiag_core::Result<Vec<_>>>()?;
        for (k, o) in obs.iter().enumerate() {
            let t = jt.trace(&o.h_ref, &o.grid)?;
            write_trace(&traces_dir.join(format!("{name}-plm{}.trace", k + 1)), &t)?;
        }
        let (outcome, line, text) = match diagnose(&obs, &bundle, &jt) {
            Ok(r) => {
                let line = format!("scenario={name} {}", r.to_line());
                let text = report_text(&r, &obs, &bundle, &jt);
                (Ok(r), line, text)
            }
            Err(e) => {
                let msg = e.to_string();
                (Err(msg.clone()), format!("scenario={name} error=\"{msg}\""), format!("error: {msg}\n"))
            }
        };
        let path = reports_dir.join(format!("{name}.txt"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        lines.push_str(&line);
        lines.push('\n');
        done.push(Diagnosed { name, outcome, line });
    }
    let path = out.join("reports.lines");
    std::fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    let failed: Vec<&str> = done.iter().filter(|d| d.outcome.is_err()).map(|d| d.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(Error::Runtime(format!(
            "{} of {} scenarios could not be diagnosed: {}",
            failed.len(),
            done.len(),
            failed.join(", ")
        )));
    }
    Ok(done)
}

/// Writes the CSV tables of every figure in `ids` to `out`.
pub fn cmd_reproduce(cfg: &RunConfig, ids: &[String], out: &Path) -> Result<Vec<PathBuf>> {
    if ids.is_empty() {
        return Err(Error::Usage(format!(
            "no figure id given; valid ids: {}",
            experiments::FIGURE_IDS.join(", ")
        )));
    }
    if let Some(bad) = ids.iter().find(|i| !experiments::FIGURE_IDS.contains(&i.as_str())) {
        return Err(Error::Usage(format!(
            "unknown figure id {bad:?}; valid ids: {}",
            experiments::FIGURE_IDS.join(", ")
        )));
    }
    let mut paths = Vec::new();
    for id in ids {
        for t in experiments::reproduce(id, cfg)? {
            paths.push(t.write_csv(out)?);
        }
    }
    Ok(paths)
}

/// Training-size sweep of `task` written to `sweep-<task>.csv` and
/// `sweep-<task>-summary.csv`.
pub fn cmd_sweep(cfg: &RunConfig, task: TaskId, out: &Path) -> Result<(plmdiag_core::pipeline::SweepTable, Vec<PathBuf>)> {
    let s = experiments::sweep(
        task,
        &cfg.run.sweep_grid,
        cfg.run.sweep_n_test,
        cfg.run.sweep_delta,
        &cfg.scenario,
        &cfg.pipeline,
    )?;
    let paths = sweep_tables(&format!("sweep-{task}"), &s)
        .iter()
        .map(|t| t.write_csv(out))
        .collect::<Result<Vec<_>>>()?;
    Ok((s, paths))
}
