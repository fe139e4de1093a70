//! Country x shock panel of resilience records with attached covariates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{compute_record, ResilienceClass, ResilienceRecord, SignConvention};
use crate::ingest::SourceDescriptor;
use crate::series::{
    split_at_shock, AnnualSeries, Continent, CountryMetaMap, NotComputableReason, SeriesError, ShockEvent, SplitPolicy,
    Year,
};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("duplicate country {0} in series set")]
    DuplicateCountry(String),
    #[error("country {0} has no continent assignment")]
    UnknownContinent(String),
    #[error("no shocks configured")]
    NoShocks,
    #[error("unknown covariate code {0}")]
    UnknownCovariateCode(String),
    #[error("duplicate covariate series for {country}/{code}")]
    DuplicateCovariateSeries { country: String, code: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Covariate codes in their fixed column order.
pub const COVARIATE_CODES: [&str; 14] =
    ["POP", "URB", "URB2", "LF", "EMP", "GDPpc", "GVA", "AGVA", "BGVA", "CGVA", "TRD", "FCE", "TXR", "TNR"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RowOutcome {
    Computed(ResilienceRecord),
    NotComputable { reason: NotComputableReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub country_code: String,
    pub shock_name: String,
    pub shock_year: Year,
    pub outcome: RowOutcome,
    pub covariates: BTreeMap<String, Option<f64>>,
    pub continent: Continent,
    /// First and last year of the performance period, when the split succeeded.
    pub performance_years: Option<(Year, Year)>,
}

impl PanelRow {
    pub fn record(&self) -> Option<&ResilienceRecord> {
        match &self.outcome {
            RowOutcome::Computed(r) => Some(r),
            RowOutcome::NotComputable { .. } => None,
        }
    }

    pub fn class(&self) -> Option<ResilienceClass> {
        self.record().map(|r| r.class)
    }

    pub fn not_computable_reason(&self) -> Option<NotComputableReason> {
        match self.outcome {
            RowOutcome::NotComputable { reason } => Some(reason),
            RowOutcome::Computed(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CovariateAlignment {
    /// Value at the shock year, else the nearest year within `window` years
    /// (nearer first, earlier on ties).
    ShockYear { window: i32 },
    /// Mean over the row's performance period.
    PerformanceMean,
}

impl Default for CovariateAlignment {
    fn default() -> Self {
        Self::ShockYear { window: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSettings {
    pub policy: SplitPolicy,
    pub sign_convention: SignConvention,
    pub covariate_codes: Vec<String>,
}

impl Default for PanelSettings {
    fn default() -> Self {
        Self {
            policy: SplitPolicy::default(),
            sign_convention: SignConvention::Corrected,
            covariate_codes: COVARIATE_CODES.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelConfigSnapshot {
    pub shocks: Vec<ShockEvent>,
    pub policy: SplitPolicy,
    pub sign_convention: SignConvention,
    pub covariate_alignment: Option<CovariateAlignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub rows: Vec<PanelRow>,
    pub covariate_codes: Vec<String>,
    pub provenance: Vec<SourceDescriptor>,
    pub config_snapshot: PanelConfigSnapshot,
    /// Countries excluded before construction because they had no data.
    pub dropped_countries: Vec<String>,
}

pub fn build_panel(
    series_set: &[AnnualSeries],
    shocks: &[ShockEvent],
    meta: &CountryMetaMap,
    settings: &PanelSettings,
) -> Result<Panel, PanelError> {
    if shocks.is_empty() {
        return Err(PanelError::NoShocks);
    }
    settings.policy.validate()?;
    let mut seen = BTreeSet::new();
    for s in series_set {
        if !seen.insert(s.country_code()) {
            return Err(PanelError::DuplicateCountry(s.country_code().to_string()));
        }
        if !meta.contains_key(s.country_code()) {
            return Err(PanelError::UnknownContinent(s.country_code().to_string()));
        }
    }

    let mut shocks = shocks.to_vec();
    shocks.sort_by(|a, b| a.reference_year.cmp(&b.reference_year).then_with(|| a.name.cmp(&b.name)));
    let empty_covariates: BTreeMap<String, Option<f64>> =
        settings.covariate_codes.iter().map(|c| (c.clone(), None)).collect();

    let mut rows: Vec<PanelRow> = series_set
        .par_iter()
        .flat_map_iter(|series| {
            let continent = meta[series.country_code()].continent;
            let empty_covariates = &empty_covariates;
            shocks.iter().map(move |shock| {
                let (outcome, performance_years) = match split_at_shock(series, shock, &settings.policy) {
                    Ok(window) => match compute_record(&window, settings.sign_convention) {
                        Ok(record) => (RowOutcome::Computed(record), Some(window.performance_years())),
                        Err(_) => (
                            RowOutcome::NotComputable { reason: NotComputableReason::DegenerateLevels },
                            Some(window.performance_years()),
                        ),
                    },
                    Err(nc) => (RowOutcome::NotComputable { reason: nc.reason }, None),
                };
                PanelRow {
                    country_code: series.country_code().to_string(),
                    shock_name: shock.name.clone(),
                    shock_year: shock.reference_year,
                    outcome,
                    covariates: empty_covariates.clone(),
                    continent,
                    performance_years,
                }
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.country_code
            .cmp(&b.country_code)
            .then(a.shock_year.cmp(&b.shock_year))
            .then_with(|| a.shock_name.cmp(&b.shock_name))
    });

    Ok(Panel {
        rows,
        covariate_codes: settings.covariate_codes.clone(),
        provenance: Vec::new(),
        config_snapshot: PanelConfigSnapshot {
            shocks,
            policy: settings.policy,
            sign_convention: settings.sign_convention,
            covariate_alignment: None,
        },
        dropped_countries: Vec::new(),
    })
}

/// A covariate series tagged with the covariate code it feeds.
#[derive(Debug, Clone)]
pub struct CovariateSeries {
    pub code: String,
    pub series: AnnualSeries,
}

fn aligned_value(series: &AnnualSeries, row: &PanelRow, alignment: CovariateAlignment) -> Option<f64> {
    match alignment {
        CovariateAlignment::ShockYear { window } => {
            let year = row.shock_year;
            std::iter::once(0)
                .chain((1..=window.max(0)).flat_map(|d| [-d, d]))
                .find_map(|offset| series.get(year + offset))
        }
        CovariateAlignment::PerformanceMean => {
            let (first, last) = row.performance_years?;
            let values: Vec<f64> = (first..=last).filter_map(|y| series.get(y)).collect();
            (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

/// Fills each row's covariates from `covariate_series`. Resilience records
/// are left untouched.
pub fn attach_covariates(
    mut panel: Panel,
    covariate_series: &[CovariateSeries],
    alignment: CovariateAlignment,
) -> Result<Panel, PanelError> {
    let mut by_key: HashMap<(&str, &str), &AnnualSeries> = HashMap::new();
    for cs in covariate_series {
        if !panel.covariate_codes.contains(&cs.code) {
            return Err(PanelError::UnknownCovariateCode(cs.code.clone()));
        }
        let key = (cs.series.country_code(), cs.code.as_str());
        if by_key.insert(key, &cs.series).is_some() {
            return Err(PanelError::DuplicateCovariateSeries { country: key.0.to_string(), code: key.1.to_string() });
        }
    }
    for row in &mut panel.rows {
        let filled: BTreeMap<String, Option<f64>> = row
            .covariates
            .keys()
            .map(|code| {
                let value = by_key
                    .get(&(row.country_code.as_str(), code.as_str()))
                    .and_then(|s| aligned_value(s, row, alignment));
                (code.clone(), value)
            })
            .collect();
        row.covariates = filled;
    }
    panel.config_snapshot.covariate_alignment = Some(alignment);
    Ok(panel)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl Panel {
    /// Continents present in the panel, alphabetically.
    pub fn continents(&self) -> Vec<Continent> {
        self.rows.iter().map(|r| r.continent).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn countries(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.country_code.as_str()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn shock_years(&self) -> Vec<Year> {
        self.config_snapshot.shocks.iter().map(|s| s.reference_year).collect()
    }

    pub fn computable_count(&self) -> usize {
        self.rows.iter().filter(|r| r.record().is_some()).count()
    }

    /// Column order: country, shock, year, r_en, r_ec, r_ev, i_r, class,
    /// not_computable_reason, one column per covariate, continent.
    pub fn csv_header(&self) -> Vec<String> {
        let mut header: Vec<String> =
            ["country", "shock", "year", "r_en", "r_ec", "r_ev", "i_r", "class", "not_computable_reason"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        header.extend(self.covariate_codes.iter().cloned());
        header.push("continent".to_string());
        header
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
        w.write_record(self.csv_header())?;
        for row in &self.rows {
            let mut fields = vec![row.country_code.clone(), row.shock_name.clone(), row.shock_year.to_string()];
            match &row.outcome {
                RowOutcome::Computed(r) => fields.extend([
                    r.vector.r_en.to_string(),
                    r.vector.r_ec.to_string(),
                    r.vector.r_ev.to_string(),
                    r.i_r.to_string(),
                    r.class.to_string(),
                    String::new(),
                ]),
                RowOutcome::NotComputable { reason } => {
                    fields.extend(std::iter::repeat_n(String::new(), 5));
                    fields.push(reason.to_string());
                }
            }
            for code in &self.covariate_codes {
                fields.push(fmt_opt(row.covariates.get(code).copied().flatten()));
            }
            fields.push(row.continent.to_string());
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, PanelError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String, PanelError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self, PanelError> {
        Ok(serde_json::from_str(s)?)
    }
}
