//! Group means with t-based confidence intervals, Student-t quantiles and
//! Levene's homogeneity-of-variance test.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::index::ResilienceClass;
use crate::panel::{Panel, PanelRow, RowOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("probability {0} outside (0, 1)")]
    DomainError(f64),
    #[error("degrees of freedom must be positive")]
    InvalidDegreesOfFreedom,
    #[error("all within-group absolute deviations are zero")]
    DegenerateGroups,
    #[error("unknown selector {0:?}")]
    UnknownSelector(String),
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// The `p`-quantile of Student's t, by bracketing and bisecting the CDF.
pub fn t_quantile(p: f64, df: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::DomainError(p));
    }
    if df.is_nan() || df <= 0.0 || !df.is_finite() {
        return Err(StatsError::InvalidDegreesOfFreedom);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // symmetric: solve the upper half, reflect for p < 0.5
    let upper = p.max(1.0 - p);
    let sign = if p > 0.5 { 1.0 } else { -1.0 };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while t_cdf(hi, df) < upper {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t_cdf(mid, df) < upper {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

/// CDF of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    beta_reg(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group_label: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub level: f64,
}

impl GroupStats {
    /// False for groups with fewer than two observations.
    pub fn interval_defined(&self) -> bool {
        self.ci_low.is_some() && self.ci_high.is_some()
    }

    pub fn half_width(&self) -> Option<f64> {
        Some(self.ci_high? - self.mean?)
    }

    fn undefined(label: &str, values: &[f64], level: f64) -> Self {
        let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
        Self { group_label: label.to_string(), n: values.len(), mean, sd: None, ci_low: None, ci_high: None, level }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// `mean +/- t_{(1+level)/2, n-1} * sd / sqrt(n)`.
pub fn confidence_interval(values: &[f64], level: f64) -> Result<GroupStats, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::DomainError(level));
    }
    if values.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: values.len() });
    }
    let n = values.len();
    let (mean, sd) = mean_sd(values);
    let t = t_quantile((1.0 + level) / 2.0, (n - 1) as f64)?;
    let half = t * sd / (n as f64).sqrt();
    Ok(GroupStats {
        group_label: String::new(),
        n,
        mean: Some(mean),
        sd: Some(sd),
        ci_low: Some(mean - half),
        ci_high: Some(mean + half),
        level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeveneCenter {
    #[default]
    Mean,
    /// Brown-Forsythe variant.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeveneResult {
    pub w_statistic: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[m - 1] + sorted[m])
    } else {
        sorted[m]
    }
}

pub fn levene_test(groups: &[Vec<f64>], center: LeveneCenter) -> Result<LeveneResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: groups.len() });
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(StatsError::InsufficientData { needed: 2, got: g.len() });
    }
    let k = groups.len();
    let total: usize = groups.iter().map(Vec::len).sum();

    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Mean => g.iter().sum::<f64>() / g.len() as f64,
                LeveneCenter::Median => median(g),
            };
            g.iter().map(|y| (y - c).abs()).collect()
        })
        .collect();
    let group_means: Vec<f64> = deviations.iter().map(|z| z.iter().sum::<f64>() / z.len() as f64).collect();
    let grand_mean = deviations.iter().flatten().sum::<f64>() / total as f64;

    let between: f64 =
        deviations.iter().zip(&group_means).map(|(z, m)| z.len() as f64 * (m - grand_mean) * (m - grand_mean)).sum();
    let within: f64 =
        deviations.iter().zip(&group_means).map(|(z, m)| z.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sum();

    let df1 = k - 1;
    let df2 = total - k;
    if within == 0.0 {
        if between == 0.0 {
            return Err(StatsError::DegenerateGroups);
        }
        return Ok(LeveneResult { w_statistic: f64::INFINITY, df1, df2, p_value: 0.0 });
    }
    let w = (df2 as f64 / df1 as f64) * between / within;
    let p_value = (1.0 - f_cdf(w, df1 as f64, df2 as f64)).clamp(0.0, 1.0);
    Ok(LeveneResult { w_statistic: w, df1, df2, p_value })
}

/// What value a panel row contributes to an error-bar group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selector {
    IR,
    REn,
    REc,
    REv,
    Covariate(String),
}

impl Selector {
    pub const COMPONENTS: [Selector; 4] = [Selector::IR, Selector::REn, Selector::REc, Selector::REv];

    pub fn parse(name: &str, panel: &Panel) -> Result<Self, StatsError> {
        match name {
            "i_r" => Ok(Self::IR),
            "r_en" => Ok(Self::REn),
            "r_ec" => Ok(Self::REc),
            "r_ev" => Ok(Self::REv),
            other if panel.covariate_codes.iter().any(|c| c == other) => Ok(Self::Covariate(other.to_string())),
            other => Err(StatsError::UnknownSelector(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::IR => "i_r",
            Self::REn => "r_en",
            Self::REc => "r_ec",
            Self::REv => "r_ev",
            Self::Covariate(code) => code,
        }
    }

    pub fn value(&self, row: &PanelRow) -> Option<f64> {
        let record = match &row.outcome {
            RowOutcome::Computed(r) => Some(r),
            RowOutcome::NotComputable { .. } => None,
        };
        match self {
            Self::IR => record.map(|r| r.i_r),
            Self::REn => record.map(|r| r.vector.r_en),
            Self::REc => record.map(|r| r.vector.r_ec),
            Self::REv => record.map(|r| r.vector.r_ev),
            Self::Covariate(code) => row.covariates.get(code).copied().flatten(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    ResilienceClass,
    Continent,
}

/// One [`GroupStats`] per group, Low/Medium/High or continents in
/// alphabetical order. Rows missing the selected value are left out of that
/// group only.
pub fn grouped_errorbars(
    panel: &Panel,
    selector: &Selector,
    group_by: GroupBy,
    level: f64,
) -> Result<Vec<GroupStats>, StatsError> {
    if let Selector::Covariate(code) = selector {
        if !panel.covariate_codes.contains(code) {
            return Err(StatsError::UnknownSelector(code.clone()));
        }
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::DomainError(level));
    }
    let groups: Vec<(String, Vec<f64>)> = match group_by {
        GroupBy::ResilienceClass => ResilienceClass::ALL
            .iter()
            .map(|class| {
                let values = panel
                    .rows
                    .iter()
                    .filter(|row| row.class() == Some(*class))
                    .filter_map(|row| selector.value(row))
                    .collect();
                (class.label().to_string(), values)
            })
            .collect(),
        GroupBy::Continent => panel
            .continents()
            .into_iter()
            .map(|continent| {
                let values = panel
                    .rows
                    .iter()
                    .filter(|row| row.continent == continent)
                    .filter_map(|row| selector.value(row))
                    .collect();
                (continent.label().to_string(), values)
            })
            .collect(),
    };
    groups
        .into_iter()
        .map(|(label, values)| {
            if values.len() < 2 {
                return Ok(GroupStats::undefined(&label, &values, level));
            }
            let mut stats = confidence_interval(&values, level)?;
            stats.group_label = label;
            Ok(stats)
        })
        .collect()
}
