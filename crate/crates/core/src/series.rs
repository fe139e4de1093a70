//! Annual indicator series and their segmentation around a shock year.
//!
//! A shock at year `t_k` splits the contiguous, gap-free run of observations
//! that spans it into a reference period (years `<= t_k`) and a performance
//! period (years `> t_k`). Time-indices are 1-based positions in that run.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Year = i32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series {country}/{indicator} has no non-missing values")]
    Empty { country: String, indicator: String },
    #[error("series {country}/{indicator} has a non-finite value at {year}")]
    NonFinite { country: String, indicator: String, year: Year },
    #[error("invalid split policy: {0}")]
    InvalidPolicy(String),
}

/// One country's annual values for one indicator. Missing years are explicit
/// `None` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries {
    country_code: String,
    indicator_code: String,
    values: BTreeMap<Year, Option<f64>>,
}

impl AnnualSeries {
    pub fn new(
        country_code: impl Into<String>,
        indicator_code: impl Into<String>,
        values: BTreeMap<Year, Option<f64>>,
    ) -> Result<Self, SeriesError> {
        let country_code = country_code.into();
        let indicator_code = indicator_code.into();
        for (&year, v) in &values {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(SeriesError::NonFinite { country: country_code, indicator: indicator_code, year });
                }
            }
        }
        if values.values().all(Option::is_none) {
            return Err(SeriesError::Empty { country: country_code, indicator: indicator_code });
        }
        Ok(Self { country_code, indicator_code, values })
    }

    /// Consecutive years starting at `first_year`.
    pub fn from_values(
        country_code: impl Into<String>,
        indicator_code: impl Into<String>,
        first_year: Year,
        values: &[Option<f64>],
    ) -> Result<Self, SeriesError> {
        let map = values.iter().enumerate().map(|(i, v)| (first_year + i as Year, *v)).collect();
        Self::new(country_code, indicator_code, map)
    }

    pub fn country_code(&self) -> &str {
        &self.country_code
    }

    pub fn indicator_code(&self) -> &str {
        &self.indicator_code
    }

    pub fn values(&self) -> &BTreeMap<Year, Option<f64>> {
        &self.values
    }

    pub fn get(&self, year: Year) -> Option<f64> {
        self.values.get(&year).copied().flatten()
    }

    pub fn first_year(&self) -> Year {
        *self.values.keys().next().expect("non-empty by construction")
    }

    pub fn last_year(&self) -> Year {
        *self.values.keys().next_back().expect("non-empty by construction")
    }

    /// Iterator over the non-missing `(year, value)` observations.
    pub fn observations(&self) -> impl Iterator<Item = (Year, f64)> + '_ {
        self.values.iter().filter_map(|(&y, v)| v.map(|v| (y, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShockEvent {
    pub name: String,
    pub reference_year: Year,
    pub scale_label: String,
}

impl ShockEvent {
    pub fn new(name: impl Into<String>, reference_year: Year, scale_label: impl Into<String>) -> Self {
        Self { name: name.into(), reference_year, scale_label: scale_label.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Continent {
    Africa,
    Asia,
    Europe,
    #[serde(rename = "North America")]
    NorthAmerica,
    Oceania,
    #[serde(rename = "South America")]
    SouthAmerica,
}

impl Continent {
    pub const ALL: [Continent; 6] = [
        Continent::Africa,
        Continent::Asia,
        Continent::Europe,
        Continent::NorthAmerica,
        Continent::Oceania,
        Continent::SouthAmerica,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Continent::Africa => "Africa",
            Continent::Asia => "Asia",
            Continent::Europe => "Europe",
            Continent::NorthAmerica => "North America",
            Continent::Oceania => "Oceania",
            Continent::SouthAmerica => "South America",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == label.trim())
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryMeta {
    pub country_code: String,
    pub name: String,
    pub continent: Continent,
}

pub type CountryMetaMap = BTreeMap<String, CountryMeta>;

/// How the reference level `c_R` is taken from the reference segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMode {
    #[default]
    Max,
    /// Arithmetic mean of the reference segment. `t_cR` is then the latest
    /// reference index whose value is at least the mean.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub min_ref: usize,
    pub min_perf: usize,
    #[serde(default)]
    pub level_mode: LevelMode,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        Self { min_ref: 3, min_perf: 2, level_mode: LevelMode::Max }
    }
}

impl SplitPolicy {
    pub fn validate(&self) -> Result<(), SeriesError> {
        if self.min_ref == 0 || self.min_perf == 0 {
            return Err(SeriesError::InvalidPolicy(format!(
                "min_ref and min_perf must be >= 1 (got {} and {})",
                self.min_ref, self.min_perf
            )));
        }
        Ok(())
    }
}

/// Why a country-shock pair yields no resilience record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotComputableReason {
    InsufficientReference,
    InsufficientPerformance,
    GapAtShock,
    NoData,
    DegenerateLevels,
}

impl NotComputableReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::InsufficientReference => "insufficient_reference",
            Self::InsufficientPerformance => "insufficient_performance",
            Self::GapAtShock => "gap_at_shock",
            Self::NoData => "no_data",
            Self::DegenerateLevels => "degenerate_levels",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::InsufficientReference,
            Self::InsufficientPerformance,
            Self::GapAtShock,
            Self::NoData,
            Self::DegenerateLevels,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

impl fmt::Display for NotComputableReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("not computable: {reason}")]
pub struct NotComputable {
    pub reason: NotComputableReason,
}

impl From<NotComputableReason> for NotComputable {
    fn from(reason: NotComputableReason) -> Self {
        Self { reason }
    }
}

/// The reference/performance split of one series at one shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockWindow {
    first_year: Year,
    reference_segment: Vec<(usize, f64)>,
    performance_segment: Vec<(usize, f64)>,
    c_r: f64,
    t_cr: usize,
    m_p: f64,
    n: usize,
    n_p: usize,
}

impl ShockWindow {
    /// Builds a window from raw segment values. Index 1 is the first
    /// reference value; `first_year` is the calendar year of index 1.
    pub fn from_segments(
        first_year: Year,
        reference: &[f64],
        performance: &[f64],
        level_mode: LevelMode,
    ) -> Result<Self, NotComputable> {
        if reference.is_empty() {
            return Err(NotComputableReason::InsufficientReference.into());
        }
        if performance.is_empty() {
            return Err(NotComputableReason::InsufficientPerformance.into());
        }
        let k = reference.len();
        let reference_segment: Vec<(usize, f64)> = reference.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect();
        let performance_segment: Vec<(usize, f64)> =
            performance.iter().enumerate().map(|(i, &v)| (k + i + 1, v)).collect();

        let ref_max = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let c_r = match level_mode {
            LevelMode::Max => ref_max,
            LevelMode::Mean => reference.iter().sum::<f64>() / k as f64,
        };
        // latest attainment; with Mean the latest index at or above the level
        let t_cr = reference_segment
            .iter()
            .rev()
            .find(|&&(_, v)| match level_mode {
                LevelMode::Max => v == c_r,
                LevelMode::Mean => v >= c_r,
            })
            .map(|&(i, _)| i)
            // mean of finite values never exceeds their max
            .unwrap_or(k);
        let m_p = performance.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        Ok(Self {
            first_year,
            n: k + performance.len(),
            n_p: performance.len(),
            reference_segment,
            performance_segment,
            c_r,
            t_cr,
            m_p,
        })
    }

    pub fn reference_segment(&self) -> &[(usize, f64)] {
        &self.reference_segment
    }

    pub fn performance_segment(&self) -> &[(usize, f64)] {
        &self.performance_segment
    }

    pub fn c_r(&self) -> f64 {
        self.c_r
    }

    pub fn t_cr(&self) -> usize {
        self.t_cr
    }

    pub fn m_p(&self) -> f64 {
        self.m_p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn first_year(&self) -> Year {
        self.first_year
    }

    /// Calendar year of a time-index.
    pub fn year_of(&self, index: usize) -> Year {
        self.first_year + index as Year - 1
    }

    /// First and last calendar year of the performance period.
    pub fn performance_years(&self) -> (Year, Year) {
        let k = self.reference_segment.len();
        (self.year_of(k + 1), self.year_of(self.n))
    }
}

/// Returns `(c_R, t_cR, M_P)`.
pub fn window_levels(window: &ShockWindow) -> (f64, usize, f64) {
    (window.c_r, window.t_cr, window.m_p)
}

/// Splits `series` at `shock` into a reference and a performance segment.
pub fn split_at_shock(
    series: &AnnualSeries,
    shock: &ShockEvent,
    policy: &SplitPolicy,
) -> Result<ShockWindow, NotComputable> {
    use NotComputableReason::*;

    let k = shock.reference_year;
    let present = |y: Year| series.get(y).is_some();
    let mut obs = series.observations().peekable();
    if obs.peek().is_none() {
        return Err(NoData.into());
    }
    let has_before = series.observations().any(|(y, _)| y <= k);
    let has_after = series.observations().any(|(y, _)| y > k);

    if !present(k) {
        return Err(match (has_before, has_after) {
            (true, true) => GapAtShock,
            (false, _) => InsufficientReference,
            (true, false) => InsufficientPerformance,
        }
        .into());
    }
    let mut start = k;
    while present(start - 1) {
        start -= 1;
    }
    if !present(k + 1) {
        if has_after {
            return Err(GapAtShock.into());
        }
        // both sides short: the reference shortfall is reported first
        let ref_len = (k - start + 1) as usize;
        return Err(if ref_len < policy.min_ref { InsufficientReference } else { InsufficientPerformance }.into());
    }
    let mut end = k + 1;
    while present(end + 1) {
        end += 1;
    }

    let reference: Vec<f64> = (start..=k).filter_map(|y| series.get(y)).collect();
    let performance: Vec<f64> = (k + 1..=end).filter_map(|y| series.get(y)).collect();
    if reference.len() < policy.min_ref {
        return Err(InsufficientReference.into());
    }
    if performance.len() < policy.min_perf {
        return Err(InsufficientPerformance.into());
    }
    ShockWindow::from_segments(start, &reference, &performance, policy.level_mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(first: Year, last: Year, f: impl Fn(Year) -> f64) -> AnnualSeries {
        let values = (first..=last).map(|y| (y, Some(f(y)))).collect();
        AnnualSeries::new("AAA", "NY.GDP.MKTP.KD", values).unwrap()
    }

    fn shock(year: Year) -> ShockEvent {
        ShockEvent::new("test", year, "Global")
    }

    #[test]
    fn full_range_split() {
        let s = full(1960, 2020, |y| (y - 1950) as f64);
        let w = split_at_shock(&s, &shock(1997), &SplitPolicy::default()).unwrap();
        assert_eq!(w.reference_segment().len(), 38);
        assert_eq!(w.performance_segment().len(), 23);
        assert_eq!(w.n(), 61);
        assert_eq!(w.n_p(), 23);
        assert_eq!(w.year_of(38), 1997);
        assert_eq!(w.performance_years(), (1998, 2020));
    }

    #[test]
    fn late_start_is_insufficient_reference() {
        let s = full(2010, 2020, |_| 1.0);
        let err = split_at_shock(&s, &shock(1997), &SplitPolicy::default()).unwrap_err();
        assert_eq!(err.reason, NotComputableReason::InsufficientReference);
    }

    #[test]
    fn short_tail_is_insufficient_performance() {
        let s = full(1960, 1998, |_| 1.0);
        let err = split_at_shock(&s, &shock(1997), &SplitPolicy::default()).unwrap_err();
        assert_eq!(err.reason, NotComputableReason::InsufficientPerformance);
        let s = full(1960, 1990, |_| 1.0);
        let err = split_at_shock(&s, &shock(1997), &SplitPolicy::default()).unwrap_err();
        assert_eq!(err.reason, NotComputableReason::InsufficientPerformance);
    }

    #[test]
    fn gap_across_shock() {
        let mut values: BTreeMap<Year, Option<f64>> = (1960..=2020).map(|y| (y, Some(1.0))).collect();
        values.insert(1998, None);
        let s = AnnualSeries::new("AAA", "X", values.clone()).unwrap();
        let err = split_at_shock(&s, &shock(1997), &SplitPolicy::default()).unwrap_err();
        assert_eq!(err.reason, NotComputableReason::GapAtShock);

        values.insert(1998, Some(1.0));
        values.insert(1997, None);
        let s = AnnualSeries::new("AAA", "X", values).unwrap();
        let err = split_at_shock(&s, &shock(1997), &SplitPolicy::default()).unwrap_err();
        assert_eq!(err.reason, NotComputableReason::GapAtShock);
    }

    #[test]
    fn interior_gap_elsewhere_truncates_run() {
        let mut values: BTreeMap<Year, Option<f64>> = (1960..=2020).map(|y| (y, Some(1.0))).collect();
        values.insert(1980, None);
        values.insert(2010, None);
        let s = AnnualSeries::new("AAA", "X", values).unwrap();
        let w = split_at_shock(&s, &shock(1997), &SplitPolicy::default()).unwrap();
        assert_eq!(w.first_year(), 1981);
        assert_eq!(w.reference_segment().len(), 17);
        assert_eq!(w.performance_years(), (1998, 2009));
    }

    #[test]
    fn all_missing_is_rejected_at_construction() {
        let values = (1960..=1965).map(|y| (y, None)).collect();
        assert!(matches!(AnnualSeries::new("AAA", "X", values), Err(SeriesError::Empty { .. })));
    }

    #[test]
    fn levels_direct_max() {
        let w = ShockWindow::from_segments(2000, &[1.0, 3.0, 2.0], &[2.0, 4.0], LevelMode::Max).unwrap();
        assert_eq!(window_levels(&w), (3.0, 2, 4.0));
        assert_eq!(w.n_p(), 2);
        assert_eq!(w.n(), 5);
    }

    #[test]
    fn split_matches_segments() {
        let s = AnnualSeries::from_values("AAA", "X", 2000, &[Some(1.0), Some(3.0), Some(2.0), Some(2.0), Some(4.0)])
            .unwrap();
        let policy = SplitPolicy { min_ref: 3, min_perf: 2, ..Default::default() };
        let w = split_at_shock(&s, &shock(2002), &policy).unwrap();
        assert_eq!(window_levels(&w), (3.0, 2, 4.0));
    }

    #[test]
    fn tie_takes_latest_attainment() {
        let w = ShockWindow::from_segments(2000, &[3.0, 3.0, 1.0], &[2.0], LevelMode::Max).unwrap();
        assert_eq!(w.t_cr(), 2);
    }

    #[test]
    fn single_point_segments() {
        let s = AnnualSeries::from_values("AAA", "X", 2000, &[Some(5.0), Some(5.0)]).unwrap();
        let policy = SplitPolicy { min_ref: 1, min_perf: 1, ..Default::default() };
        let w = split_at_shock(&s, &shock(2000), &policy).unwrap();
        assert_eq!(window_levels(&w), (5.0, 1, 5.0));
    }

    #[test]
    fn mean_level_mode() {
        let w = ShockWindow::from_segments(2000, &[1.0, 5.0, 3.0], &[2.0], LevelMode::Mean).unwrap();
        assert_eq!(w.c_r(), 3.0);
        assert_eq!(w.t_cr(), 3);
    }

    #[test]
    fn policy_validation() {
        assert!(SplitPolicy { min_ref: 0, min_perf: 1, level_mode: LevelMode::Max }.validate().is_err());
        assert!(SplitPolicy::default().validate().is_ok());
    }

    #[test]
    fn continent_labels_round_trip() {
        for c in Continent::ALL {
            assert_eq!(Continent::from_label(c.label()), Some(c));
        }
        assert_eq!(Continent::from_label("Antarctica"), None);
    }
}
