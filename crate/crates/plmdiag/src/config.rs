//! Run configuration: a TOML file with `[scenario]`, `[pipeline]` and `[run]`
//! sections, overlaid by environment variables and `--set` flags.

use std::path::Path;

use plmdiag_core::pipeline::PipelineConfig;
use plmdiag_core::scenario::{Range, ScenarioConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

/// Environment variables with this prefix override config keys; `__`
/// separates path segments, e.g. `PLMDIAG_CFG__RUN__N_TRAIN=500`.
pub const ENV_PREFIX: &str = "PLMDIAG_CFG__";

/// Experiment sizes and harness settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunParams {
    pub n_train: usize,
    pub n_test: usize,
    pub sweep_grid: Vec<usize>,
    pub sweep_n_test: usize,
    pub sweep_delta: f64,
    /// Factor ranges on the WT permittivity used for robustness test data.
    pub robustness_loss_tangent: Range,
    pub robustness_magnitude: Range,
    /// Number of equal-width `gamma_local` bins in detection tables.
    pub gamma_bins: usize,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            n_train: 2000,
            n_test: 500,
            sweep_grid: vec![200, 500, 1000, 2000],
            sweep_n_test: 1000,
            sweep_delta: 0.02,
            robustness_loss_tangent: Range::new(0.8, 1.2),
            robustness_magnitude: Range::new(1.0, 1.0),
            gamma_bins: 9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub run: RunParams,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {reason}"))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.pipeline.validate()?;
        self.pipeline.jtfdr(&self.scenario)?;
        let r = &self.run;
        if r.n_train == 0 {
            return Err(invalid("run.n_train", "must be positive"));
        }
        if r.n_test == 0 {
            return Err(invalid("run.n_test", "must be positive"));
        }
        if r.sweep_n_test == 0 {
            return Err(invalid("run.sweep_n_test", "must be positive"));
        }
        validate_grid(&r.sweep_grid).map_err(|e| invalid("run.sweep_grid", e))?;
        if !(r.sweep_delta > 0.0 && r.sweep_delta < 1.0) {
            return Err(invalid("run.sweep_delta", format!("{} must lie in (0, 1)", r.sweep_delta)));
        }
        for (name, range) in [
            ("run.robustness_loss_tangent", r.robustness_loss_tangent),
            ("run.robustness_magnitude", r.robustness_magnitude),
        ] {
            if !(range.lo > 0.0 && range.lo <= range.hi && range.hi.is_finite()) {
                return Err(invalid(name, format!("[{}, {}] must be positive and ordered", range.lo, range.hi)));
            }
        }
        if r.gamma_bins == 0 {
            return Err(invalid("run.gamma_bins", "must be positive"));
        }
        Ok(())
    }

    /// Loads `path` (defaults when `None`), applies `env` overrides whose
    /// names start with [`ENV_PREFIX`], then `sets` (`key.path=value`), and
    /// validates the result.
    pub fn load<I>(path: Option<&Path>, env: I, sets: &[String]) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                // Parse into the typed config first so unknown keys and type
                // errors are reported with their line.
                toml::from_str::<RunConfig>(&text).map_err(|e| Error::Parse {
                    path: p.to_path_buf(),
                    reason: e.to_string(),
                })?;
                toml::from_str::<Table>(&text).map_err(|e| Error::Parse {
                    path: p.to_path_buf(),
                    reason: e.to_string(),
                })?
            }
            None => Table::new(),
        };
        let mut env: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        env.sort();
        for (k, v) in env {
            let key = k[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect::<Vec<_>>().join(".");
            set_path(&mut table, &key, &v).map_err(|e| Error::Config(format!("{k}: {e}")))?;
        }
        for s in sets {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
            set_path(&mut table, key.trim(), value.trim()).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        }
        let cfg = RunConfig::deserialize(Value::Table(table)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable in TOML")
    }
}

pub fn validate_grid(grid: &[usize]) -> std::result::Result<(), String> {
    if grid.is_empty() {
        return Err(String::from("grid is empty"));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(String::from("training sizes must be positive and strictly increasing"));
    }
    Ok(())
}

/// Parses `raw` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, raw: &str) -> std::result::Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed key {key:?}"));
    }
    let mut t = table;
    for p in &parts[..parts.len() - 1] {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry.as_table_mut().ok_or_else(|| format!("{p} is not a section"))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }

    #[test]
    fn overrides_apply_in_order() {
        let env = vec![
            ("PLMDIAG_CFG__RUN__N_TRAIN".to_string(), "300".to_string()),
            ("PLMDIAG_CFG__SCENARIO__SEED".to_string(), "9".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let sets = vec!["scenario.seed=11".to_string(), "scenario.gamma_local = { lo = 0.2, hi = 0.4 }".to_string()];
        let cfg = RunConfig::load(None, env, &sets).unwrap();
        assert_eq!(cfg.run.n_train, 300);
        assert_eq!(cfg.scenario.seed, 11);
        assert_eq!(cfg.scenario.gamma_local, Range::new(0.2, 0.4));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::load(None, no_env(), &["run.n_trian=5".to_string()]).unwrap_err();
        assert!(e.to_string().contains("n_trian"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn invalid_ranges_name_the_field() {
        let e = RunConfig::load(None, no_env(), &["scenario.gamma_local={lo=0.5, hi=0.2}".to_string()]).unwrap_err();
        assert!(e.to_string().contains("gamma_local"), "{e}");
        assert_eq!(e.exit_code(), 1);
        let e = RunConfig::load(None, no_env(), &["run.sweep_grid=[500, 200]".to_string()]).unwrap_err();
        assert!(e.to_string().contains("sweep_grid"), "{e}");
    }

    #[test]
    fn file_errors_carry_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "[run]\nn_train = 10\nbogus = 1\n").unwrap();
        let e = RunConfig::load(Some(&p), no_env(), &[]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn shipped_config_loads() {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");
        let cfg = RunConfig::load(Some(&p), no_env(), &[]).unwrap();
        assert_eq!(cfg.run.robustness_loss_tangent, Range::new(0.8, 1.2));
        assert_eq!(cfg.pipeline, PipelineConfig::default());
    }
}
