use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plmdiag::commands::{self, ScenarioSource};
use plmdiag::config::RunConfig;
use plmdiag::core::pipeline::TaskMetrics;
use plmdiag::core::scenario::TaskId;
use plmdiag::error::{Error, Result, EXIT_VALIDATION};

/// Cable diagnostics with power line modems: simulation, training and
/// diagnosis.
///
/// Config keys can also be set through environment variables named
/// PLMDIAG_CFG__<SECTION>__<KEY> (e.g. PLMDIAG_CFG__RUN__N_TRAIN=500).
#[derive(Debug, Parser)]
#[command(name = "plmdiag", version)]
struct Cli {
    /// TOML run configuration ([scenario], [pipeline], [run]).
    #[arg(long, global = true, env = "PLMDIAG_CONFIG")]
    config: Option<PathBuf>,

    /// Base seed; overrides scenario.seed.
    #[arg(long, global = true, env = "PLMDIAG_SEED")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, env = "PLMDIAG_OUT", default_value = "plmdiag-out")]
    out: PathBuf,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "PLMDIAG_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Config override `section.key=value`, repeatable; value is TOML.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate train and test datasets.
    Generate {
        /// Restrict to the dataset families of these tasks.
        #[arg(long = "task", value_parser = parse_task)]
        tasks: Vec<TaskId>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
    },
    /// Train every pipeline task and write a model bundle.
    Train {
        /// Directory written by `generate`.
        #[arg(long)]
        data: PathBuf,
        /// Bundle directory (default: <out>/bundle).
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Diagnose networks with a trained bundle.
    Diagnose {
        #[arg(long)]
        bundle: PathBuf,
        /// TOML network scenario file, repeatable.
        #[arg(long = "scenario")]
        scenarios: Vec<PathBuf>,
        /// Draw index of the bundle's scenario config, repeatable.
        #[arg(long = "index")]
        indices: Vec<u64>,
        /// Built-in network: fig5 or healthy, repeatable.
        #[arg(long = "preset")]
        presets: Vec<String>,
    },
    /// Regenerate the CSV tables behind a figure.
    Reproduce {
        /// fig5, fig7, fig8, fig9, fig10, fig11, fig12, fig15, fig16, fig17.
        #[arg(required = true)]
        figures: Vec<String>,
    },
    /// Performance against training-set size.
    Sweep {
        #[arg(long, value_parser = parse_task)]
        task: TaskId,
        /// Comma-separated training sizes (default: run.sweep_grid).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
    },
}

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn parse_task(s: &str) -> std::result::Result<TaskId, String> {
    s.parse::<TaskId>().map_err(|e| e.to_string())
}

fn describe(m: &TaskMetrics) -> String {
    match m {
        TaskMetrics::Classification(c) => format!(
            "detection={:.3} false_alarm={:.3} accuracy={:.3}",
            c.detection, c.false_alarm, c.accuracy
        ),
        TaskMetrics::Regression(r) => format!(
            "r2={:.4} slope={:.4} intercept={:.4} mse={:.4e}",
            r.r2, r.slope, r.intercept, r.mse
        ),
    }
}

fn load_config(cli: &Cli, extra: &[String]) -> Result<RunConfig> {
    let mut sets = cli.sets.clone();
    if let Some(seed) = cli.seed {
        sets.push(format!("scenario.seed={seed}"));
    }
    sets.extend_from_slice(extra);
    RunConfig::load(cli.config.as_deref(), std::env::vars(), &sets)
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| Error::Runtime(e.to_string()))?;
    match &cli.command {
        Command::Generate { tasks, n_train, n_test } => {
            let mut extra = Vec::new();
            if let Some(n) = n_train {
                extra.push(format!("run.n_train={n}"));
            }
            if let Some(n) = n_test {
                extra.push(format!("run.n_test={n}"));
            }
            let cfg = load_config(&cli, &extra)?;
            let m = commands::cmd_generate(&cfg, &cli.out, tasks)?;
            for f in &m.files {
                out!("{} {} records={} checksum={}", f.file, f.split, f.records, f.checksum);
            }
        }
        Command::Train { data, bundle } => {
            let cfg = load_config(&cli, &[])?;
            let dir = bundle.clone().unwrap_or_else(|| cli.out.join("bundle"));
            let b = commands::cmd_train(&cfg, data, &dir)?;
            for r in &b.reports {
                out!(
                    "{} n_train={} features={} ratio={:.1} metrics={}",
                    r.task,
                    r.n_train,
                    r.n_features,
                    r.samples_per_feature,
                    r.metrics.as_ref().map_or_else(|| String::from("-"), describe)
                );
            }
            out!("bundle written to {}", dir.display());
        }
        Command::Diagnose {
            bundle,
            scenarios,
            indices,
            presets,
        } => {
            let sources: Vec<ScenarioSource> = scenarios
                .iter()
                .cloned()
                .map(ScenarioSource::File)
                .chain(indices.iter().map(|&i| ScenarioSource::Index(i)))
                .chain(presets.iter().cloned().map(ScenarioSource::Preset))
                .collect();
            let result = commands::cmd_diagnose(bundle, &sources, cli.seed, &cli.out);
            if let Ok(done) = &result {
                for d in done {
                    out!("{}", d.line);
                }
            }
            result?;
        }
        Command::Reproduce { figures } => {
            let cfg = load_config(&cli, &[])?;
            for p in commands::cmd_reproduce(&cfg, figures, &cli.out)? {
                out!("{}", p.display());
            }
        }
        Command::Sweep {
            task,
            grid,
            n_test,
            delta,
        } => {
            let mut extra = Vec::new();
            if let Some(g) = grid {
                let items: Vec<String> = g.iter().map(|n| n.to_string()).collect();
                extra.push(format!("run.sweep_grid=[{}]", items.join(",")));
            }
            if let Some(n) = n_test {
                extra.push(format!("run.sweep_n_test={n}"));
            }
            if let Some(d) = delta {
                extra.push(format!("run.sweep_delta={d}"));
            }
            let cfg = load_config(&cli, &extra)?;
            let (s, paths) = commands::cmd_sweep(&cfg, *task, &cli.out)?;
            for r in &s.rows {
                out!(
                    "n_train={} {}={:.4} {}={:.4} saturated={}",
                    r.n_train, s.metric_name, r.metric, s.secondary_name, r.secondary, r.saturated
                );
            }
            out!(
                "saturation={} monotone={}",
                s.saturation.map_or_else(|| String::from("none"), |n| n.to_string()),
                s.monotone
            );
            for p in paths {
                out!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
