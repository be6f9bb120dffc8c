use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rwrs_core::dependence::{covariance_bound_check, CovarianceRow, DependenceError};
use rwrs_core::experiments::{
    run_slln, run_theorem3, scaling_alpha, scaling_occupancy, subsequence_diagnostic, variance_bound_check,
    ExperimentError, ExperimentReport, NamedFit, Row, ScalingReport, SubsequenceReport, VarianceBoundReport,
};
use rwrs_core::stats::{loglog_fit, LinearFit};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, FileConfig, LabConfig, Mode};
use crate::rules::RuleResult;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const ROWS_HEADER: &str = "n,replica,Z,Z_centered,Z_norm,alpha0,sumN2,max_abs_S,window_ok,lil_ok";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Dependence(#[from] DependenceError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
}

impl RunError {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            RunError::Config(e) => json!({"error": "config", "path": e.path, "message": e.message}),
            RunError::Experiment(e) => json!({"error": "experiment", "message": e.to_string()}),
            RunError::Dependence(e) => json!({"error": "dependence", "message": e.to_string()}),
            RunError::Io { path, source } => {
                json!({"error": "io", "path": path.display().to_string(), "message": source.to_string()})
            }
            RunError::ThreadPool(m) => json!({"error": "threads", "message": m}),
        }
    }
}

/// Result of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Slln(ExperimentReport),
    Theorem3(ExperimentReport),
    ScalingAlpha(ScalingReport),
    ScalingOccupancy(ScalingReport),
    /// Scaling fit over configured points instead of a simulation.
    Synthetic { mode: Mode, points: Vec<(f64, f64)>, fit: Option<LinearFit> },
    Subseq(SubsequenceReport),
    Varbound(VarianceBoundReport),
    Covbound(Vec<CovarianceRow>),
}

fn named(name: &str, fit: &Option<LinearFit>) -> Option<NamedFit> {
    fit.clone().map(|fit| NamedFit {
        name: name.to_string(),
        fit,
    })
}

impl Outcome {
    pub fn mode(&self) -> Mode {
        match self {
            Outcome::Slln(_) => Mode::Slln,
            Outcome::Theorem3(_) => Mode::Theorem3,
            Outcome::ScalingAlpha(_) => Mode::ScalingAlpha,
            Outcome::ScalingOccupancy(_) => Mode::ScalingOccupancy,
            Outcome::Synthetic { mode, .. } => *mode,
            Outcome::Subseq(_) => Mode::Subseq,
            Outcome::Varbound(_) => Mode::Varbound,
            Outcome::Covbound(_) => Mode::Covbound,
        }
    }

    pub fn rows(&self) -> &[Row] {
        match self {
            Outcome::Slln(r) | Outcome::Theorem3(r) => &r.rows,
            Outcome::ScalingAlpha(r) | Outcome::ScalingOccupancy(r) => &r.rows,
            Outcome::Subseq(r) => &r.rows,
            Outcome::Varbound(r) => &r.rows,
            Outcome::Synthetic { .. } | Outcome::Covbound(_) => &[],
        }
    }

    pub fn experiment_report(&self) -> Option<&ExperimentReport> {
        match self {
            Outcome::Slln(r) | Outcome::Theorem3(r) => Some(r),
            _ => None,
        }
    }

    /// Fitted slopes. Scaling runs report `mean` (log of the first moment
    /// against log n) and `second_moment`; the subsequence run reports
    /// `log_summand` against the subsequence index.
    pub fn slopes(&self) -> Vec<NamedFit> {
        match self {
            Outcome::Slln(r) | Outcome::Theorem3(r) => r.slopes.clone(),
            Outcome::ScalingAlpha(r) | Outcome::ScalingOccupancy(r) => named("mean", &r.fit)
                .into_iter()
                .chain(named("second_moment", &r.p2_fit))
                .collect(),
            Outcome::Synthetic { fit, .. } => named("mean", fit).into_iter().collect(),
            Outcome::Subseq(r) => named("log_summand", &r.decay_fit).into_iter().collect(),
            Outcome::Varbound(_) | Outcome::Covbound(_) => Vec::new(),
        }
    }

    pub fn warnings(&self) -> &[String] {
        self.experiment_report().map(|r| r.warnings.as_slice()).unwrap_or(&[])
    }

    fn report_json(&self) -> serde_json::Result<serde_json::Value> {
        match self {
            Outcome::Slln(r) | Outcome::Theorem3(r) => serde_json::to_value(r),
            Outcome::ScalingAlpha(r) | Outcome::ScalingOccupancy(r) => serde_json::to_value(r),
            Outcome::Synthetic { points, .. } => Ok(json!({ "points": points })),
            Outcome::Subseq(r) => serde_json::to_value(r),
            Outcome::Varbound(r) => serde_json::to_value(r),
            Outcome::Covbound(rows) => Ok(json!({ "rows": rows })),
        }
    }
}

/// Runs one subcommand on the current rayon pool.
pub fn execute(mode: Mode, config: &LabConfig) -> Result<Outcome, RunError> {
    let e = &config.experiment;
    if let (Mode::ScalingAlpha | Mode::ScalingOccupancy, Some(points)) = (mode, &config.synthetic_points) {
        return Ok(Outcome::Synthetic {
            mode,
            points: points.clone(),
            fit: loglog_fit(points),
        });
    }
    Ok(match mode {
        Mode::Slln => Outcome::Slln(run_slln(e)?),
        Mode::Theorem3 => Outcome::Theorem3(run_theorem3(e)?),
        Mode::ScalingAlpha => Outcome::ScalingAlpha(scaling_alpha(e)?),
        Mode::ScalingOccupancy => Outcome::ScalingOccupancy(scaling_occupancy(e)?),
        Mode::Subseq => Outcome::Subseq(subsequence_diagnostic(e, e.epsilon)?),
        Mode::Varbound => Outcome::Varbound(variance_bound_check(e)?),
        Mode::Covbound => Outcome::Covbound(covariance_bound_check(&e.scenery, &config.lags, config.samples, e.base_seed)?),
    })
}

/// `rows.csv` contents: fixed column order, shortest round-trip decimal
/// formatting, LF line endings.
pub fn rows_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(ROWS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n, r.replica, r.z, r.z_centered, r.z_norm, r.alpha0, r.sum_n2, r.max_abs_s, r.window_ok, r.lil_ok
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub config_path: Option<String>,
    pub resolved_config: FileConfig,
    pub tool_version: &'static str,
    pub base_seed: u64,
    pub output_dir: String,
    pub started: String,
    pub finished: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub base_seed: u64,
    pub passed: bool,
    pub failures: Vec<RuleResult>,
    pub rules: Vec<RuleResult>,
    pub slopes: Vec<NamedFit>,
    pub warnings: Vec<String>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
    text.push('\n');
    write_file(path, text)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs `mode` and writes `manifest.json`, `rows.csv` and `summary.json`
/// into `out_dir`. `threads = None` uses the global rayon pool.
pub fn run(
    mode: Mode,
    config: &LabConfig,
    config_path: Option<&Path>,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunSummary, RunError> {
    if let Some(declared) = config.mode {
        if declared != mode {
            return Err(ConfigError {
                path: "mode".into(),
                message: format!("configuration is declared for {}, not {}", declared.name(), mode.name()),
            }
            .into());
        }
    }
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut manifest = RunManifest {
        subcommand: mode.name(),
        config_path: config_path.map(|p| p.display().to_string()),
        resolved_config: config.to_file_config(),
        tool_version: TOOL_VERSION,
        base_seed: config.experiment.base_seed,
        output_dir: out_dir.display().to_string(),
        started: now(),
        finished: None,
    };
    let manifest_path = out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;

    let outcome = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunError::ThreadPool(e.to_string()))?
            .install(|| execute(mode, config))?,
        None => execute(mode, config)?,
    };

    let results: Vec<RuleResult> = config.rules.iter().map(|r| r.evaluate(&outcome)).collect();
    let summary = RunSummary {
        subcommand: mode.name(),
        tool_version: TOOL_VERSION,
        base_seed: config.experiment.base_seed,
        passed: results.iter().all(|r| r.passed),
        failures: results.iter().filter(|r| !r.passed).cloned().collect(),
        rules: results,
        slopes: outcome.slopes(),
        warnings: outcome.warnings().to_vec(),
    };

    write_file(&out_dir.join("rows.csv"), rows_csv(outcome.rows()))?;
    let mut summary_json = serde_json::to_value(&summary).expect("summary serializes");
    summary_json["report"] = outcome.report_json().expect("reports serialize");
    write_json(&out_dir.join("summary.json"), &summary_json)?;

    manifest.finished = Some(now());
    write_json(&manifest_path, &manifest)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting() {
        let row = Row {
            n: 4,
            replica: 0,
            z: 2.5,
            z_centered: -0.0,
            z_norm: 1e-20,
            alpha0: 7,
            sum_n2: 7,
            max_abs_s: 2,
            window_ok: true,
            lil_ok: false,
        };
        assert_eq!(
            rows_csv(&[row]),
            "n,replica,Z,Z_centered,Z_norm,alpha0,sumN2,max_abs_S,window_ok,lil_ok\n4,0,2.5,-0,0.00000000000000000001,7,7,2,true,false\n"
        );
    }
}
