//! Model files and bundle directories.
//!
//! A model file is the versioned binary container of
//! [`TrainedModel::encode`]. A bundle is a directory holding one
//! `<task>.model` per task and a `manifest.json` with the configuration,
//! per-file checksums and the training reports.

use std::collections::BTreeMap;
use std::path::Path;

use plmdiag_core::learning::TrainedModel;
use plmdiag_core::pipeline::{ModelBundle, PipelineConfig, TaskReport};
use plmdiag_core::scenario::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::checksum::{checksum64, hex64};
use crate::error::{Error, Result};

pub const BUNDLE_FORMAT: &str = "plmdiag-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub task: String,
    pub file: String,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub models: Vec<ModelEntry>,
    pub reports: Vec<TaskReport>,
}

pub fn save_model(path: &Path, m: &TrainedModel) -> Result<()> {
    std::fs::write(path, m.encode()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TrainedModel::decode(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn save_bundle(dir: &Path, b: &ModelBundle) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut models = Vec::new();
    for (task, m) in &b.models {
        let file = format!("{task}.model");
        let bytes = m.encode();
        let path = dir.join(&file);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        models.push(ModelEntry {
            task: task.clone(),
            file,
            checksum: hex64(checksum64(&bytes)),
        });
    }
    let manifest = Manifest {
        format: BUNDLE_FORMAT.to_string(),
        version: BUNDLE_VERSION,
        scenario: b.scenario.clone(),
        pipeline: b.pipeline.clone(),
        models,
        reports: b.reports.clone(),
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_bundle(dir: &Path) -> Result<ModelBundle> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |reason: String| Error::Format {
        path: path.clone(),
        reason,
    };
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if v.get("format").and_then(|f| f.as_str()) != Some(BUNDLE_FORMAT) {
        return Err(bad(format!("not a {BUNDLE_FORMAT} manifest")));
    }
    match v.get("version").and_then(|x| x.as_u64()) {
        Some(n) if n == BUNDLE_VERSION as u64 => {}
        other => return Err(bad(format!("unsupported bundle version {other:?} (expected {BUNDLE_VERSION})"))),
    }
    let m: Manifest = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
    let mut parts = Vec::new();
    let mut reports: BTreeMap<&str, &TaskReport> = m.reports.iter().map(|r| (r.task.as_str(), r)).collect();
    for e in &m.models {
        let p = dir.join(&e.file);
        let bytes = std::fs::read(&p).map_err(|err| Error::io(&p, err))?;
        if hex64(checksum64(&bytes)) != e.checksum {
            return Err(Error::Format {
                path: p,
                reason: String::from("checksum does not match the manifest"),
            });
        }
        let model = TrainedModel::decode(&bytes).map_err(|err| Error::Format {
            path: p.clone(),
            reason: err.to_string(),
        })?;
        if model.task != e.task {
            return Err(Error::Format {
                path: p,
                reason: format!("holds task {}, manifest says {}", model.task, e.task),
            });
        }
        let report = reports
            .remove(e.task.as_str())
            .cloned()
            .ok_or_else(|| bad(format!("no report for {}", e.task)))?;
        parts.push((model, report));
    }
    if let Some(t) = reports.keys().next() {
        return Err(bad(format!("report for {t} has no model file")));
    }
    let mut b = ModelBundle::assemble(m.pipeline, m.scenario, parts)?;
    // Keep the manifest's report order.
    b.reports = m.reports;
    Ok(b)
}
