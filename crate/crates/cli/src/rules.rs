//! Acceptance rules configured per run. The exit status reflects these and
//! nothing else.

use serde::{Deserialize, Serialize};

use crate::run::Outcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rule {
    /// A named slope in `[min, max]`; either end may be omitted.
    SlopeRange {
        slope: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    /// Median of the normalized column strictly decreasing along `n_grid`.
    MedianDecreasing {},
    /// 90th percentile of the normalized column strictly decreasing.
    Q90Decreasing {},
    /// Mean of `Z_centered` within 3 standard errors of 0 at every `n`.
    CenteredMeanWithin3se {},
    /// `Z_centered` exactly 0 in every row.
    CenteredAllZero {},
    /// Truncation mismatch counts within 3 standard errors of the prediction.
    MismatchWithin3se {},
    /// Every covariance row within its bound plus 3 standard errors.
    CovarianceWithinBound {},
    /// Every variance-bound ratio at most `1 + 3 SE`.
    VarianceRatioWithin {},
    /// Observed summand ratio within `tolerance` of the expected ratio.
    DecayRatioNear { tolerance: f64 },
    /// Fraction of replicas above the iterated-logarithm envelope at the
    /// largest `n` is below `max_fraction`.
    LilExceedBelow { max_fraction: f64 },
    /// Fraction of replicas leaving the `n^(e + delta)` window at the largest
    /// `n` is below `max_fraction`.
    WindowFailBelow { max_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleResult {
    #[serde(flatten)]
    pub rule: Rule,
    pub passed: bool,
    pub detail: String,
}

fn check(rule: &Rule, outcome: &Outcome) -> Result<(bool, String), String> {
    let na = || format!("not applicable to {}", outcome.mode().name());
    match rule {
        Rule::SlopeRange { slope, min, max } => {
            let fits = outcome.slopes();
            let fit = fits
                .iter()
                .find(|f| &f.name == slope)
                .ok_or_else(|| format!("no slope named `{slope}`"))?;
            let v = fit.fit.slope;
            let ok = min.is_none_or(|m| v >= m) && max.is_none_or(|m| v <= m);
            Ok((ok, format!("{slope} = {v}")))
        }
        Rule::MedianDecreasing {} | Rule::Q90Decreasing {} => {
            let report = outcome.experiment_report().ok_or_else(na)?;
            let (ok, values): (bool, Vec<f64>) = if matches!(rule, Rule::MedianDecreasing {}) {
                (
                    report.median_strictly_decreasing(),
                    report.levels.iter().map(|l| l.median_abs_norm).collect(),
                )
            } else {
                (
                    report.q90_strictly_decreasing(),
                    report.levels.iter().map(|l| l.q90_abs_norm).collect(),
                )
            };
            Ok((ok, format!("{values:?}")))
        }
        Rule::CenteredMeanWithin3se {} => {
            let report = outcome.experiment_report().ok_or_else(na)?;
            let worst = report
                .levels
                .iter()
                .map(|l| l.mean_centered.abs() / l.se_centered)
                .fold(0.0, f64::max);
            Ok((report.centered_mean_within_3se(), format!("max |mean| / SE = {worst}")))
        }
        Rule::CenteredAllZero {} => {
            let rows = outcome.rows();
            let nonzero = rows.iter().filter(|r| r.z_centered != 0.0).count();
            Ok((nonzero == 0, format!("{nonzero} nonzero rows")))
        }
        Rule::MismatchWithin3se {} => {
            let report = outcome.experiment_report().filter(|r| !r.truncation.is_empty()).ok_or_else(na)?;
            let failing: Vec<usize> = report
                .truncation
                .iter()
                .filter(|t| t.within_3se != Some(true))
                .map(|t| t.n)
                .collect();
            Ok((failing.is_empty(), format!("failing n: {failing:?}")))
        }
        Rule::CovarianceWithinBound {} => {
            let Outcome::Covbound(rows) = outcome else {
                return Err(na());
            };
            let failing: Vec<usize> = rows.iter().filter(|r| !r.within).map(|r| r.lag).collect();
            Ok((failing.is_empty(), format!("failing lags: {failing:?}")))
        }
        Rule::VarianceRatioWithin {} => {
            let Outcome::Varbound(report) = outcome else {
                return Err(na());
            };
            let failing: Vec<usize> = report.levels.iter().filter(|l| !l.within).map(|l| l.n).collect();
            Ok((report.all_within(), format!("failing n: {failing:?}")))
        }
        Rule::DecayRatioNear { tolerance } => {
            let Outcome::Subseq(report) = outcome else {
                return Err(na());
            };
            let ratio = report.decay_ratio.ok_or("no summands to fit")?;
            let ok = (ratio - report.expected_ratio).abs() <= *tolerance;
            Ok((ok, format!("ratio {ratio}, expected {}", report.expected_ratio)))
        }
        Rule::LilExceedBelow { max_fraction } | Rule::WindowFailBelow { max_fraction } => {
            let rows = outcome.rows();
            let n = rows.iter().map(|r| r.n).max().ok_or("no rows")?;
            let at_n: Vec<_> = rows.iter().filter(|r| r.n == n).collect();
            let lil = matches!(rule, Rule::LilExceedBelow { .. });
            let bad = at_n.iter().filter(|r| if lil { !r.lil_ok } else { !r.window_ok }).count();
            let fraction = bad as f64 / at_n.len() as f64;
            Ok((fraction < *max_fraction, format!("fraction {fraction} at n = {n}")))
        }
    }
}

impl Rule {
    pub fn evaluate(&self, outcome: &Outcome) -> RuleResult {
        let (passed, detail) = check(self, outcome).unwrap_or_else(|e| (false, e));
        RuleResult {
            rule: self.clone(),
            passed,
            detail,
        }
    }
}
