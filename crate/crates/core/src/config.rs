//! Run configuration: a single JSON document. Relative paths resolve
//! against the directory holding the config file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::SignConvention;
use crate::panel::{CovariateAlignment, COVARIATE_CODES};
use crate::series::{Continent, ShockEvent, SplitPolicy, Year};
use crate::stats::LeveneCenter;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

pub const GDP_INDICATOR: &str = "NY.GDP.MKTP.KD";

/// Default WDI code per covariate.
pub const DEFAULT_COVARIATE_INDICATORS: [(&str, &str); 14] = [
    ("POP", "SP.POP.TOTL"),
    ("URB", "SP.URB.TOTL"),
    ("URB2", "EN.URB.LCTY.UR.ZS"),
    ("LF", "SL.TLF.TOTL.IN"),
    ("EMP", "SL.EMP.TOTL.SP.ZS"),
    ("GDPpc", "NY.GDP.PCAP.KD"),
    ("GVA", "NY.GDP.FCST.KD"),
    ("AGVA", "NV.AGR.TOTL.KD"),
    ("BGVA", "NV.IND.TOTL.KD"),
    ("CGVA", "NV.SRV.TOTL.KD"),
    ("TRD", "NE.TRD.GNFS.ZS"),
    ("FCE", "NE.CON.TOTL.KD"),
    ("TXR", "GC.TAX.TOTL.GD.ZS"),
    ("TNR", "NY.GDP.TOTL.RT.ZS"),
];

pub fn default_covariate_indicator(code: &str) -> Option<&'static str> {
    DEFAULT_COVARIATE_INDICATORS.iter().find(|(c, _)| *c == code).map(|(_, i)| *i)
}

pub const CONFIDENCE_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

/// Where an indicator comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Wide-format CSV, or an API snapshot when the name ends in `.api.json`.
    File {
        path: PathBuf,
        /// Row filter when the file holds several indicators.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indicator: Option<String>,
    },
    /// Indicator API; the snapshot in the cache directory is reused when present.
    Fetch {
        indicator: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_url: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        countries: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSource {
    pub code: String,
    pub source: SourceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    pub name: String,
    pub year: Year,
    #[serde(default)]
    pub scale: String,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn yes() -> bool {
    true
}

impl ShockSpec {
    pub fn to_event(&self) -> ShockEvent {
        ShockEvent::new(self.name.clone(), self.year, self.scale.clone())
    }
}

/// The fifteen-crisis calendar, 1970–2020. Multi-year crises use their start
/// year. The 1973 oil crisis ships disabled so that fourteen shocks are
/// active by default.
pub fn default_shocks() -> Vec<ShockSpec> {
    [
        ("Oil crisis", 1973, "Global", false),
        ("Latin American debt crisis", 1980, "International", true),
        ("Black Monday", 1987, "Global", true),
        ("Norwegian banking crisis", 1988, "National/International", true),
        ("United States Savings & Loan crisis", 1989, "National/International", true),
        ("Japanese financial crisis (asset price bubble)", 1990, "National/International", true),
        ("Scandinavian banking crisis", 1991, "International/Regional", true),
        ("Black Wednesday", 1992, "International", true),
        ("The economic crisis in Mexico", 1994, "National/International", true),
        ("Asian Financial Crisis", 1997, "International", true),
        ("Russian financial crisis", 1998, "National/International", true),
        ("Argentina economic crisis", 1999, "National/International", true),
        ("Turkish economic crisis", 2000, "National/International", true),
        ("Bursting of the dot-com bubble", 2001, "Global", true),
        ("Worldwide financial crisis", 2007, "Global", true),
    ]
    .into_iter()
    .map(|(name, year, scale, enabled)| ShockSpec { name: name.to_string(), year, scale: scale.to_string(), enabled })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub gdp: SourceSpec,
    #[serde(default)]
    pub covariates: Vec<CovariateSource>,
    /// `iso3,name,continent` table; the bundled table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continents: Option<PathBuf>,
    /// Per-country continent reassignments applied on top of the table.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub continent_overrides: BTreeMap<String, Continent>,
    /// Boundaries file to receive class properties.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geojson: Option<PathBuf>,
    #[serde(default = "default_first_year")]
    pub first_year: Year,
    #[serde(default = "default_last_year")]
    pub last_year: Year,
}

fn default_first_year() -> Year {
    1960
}

fn default_last_year() -> Year {
    2020
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default = "default_shocks")]
    pub shocks: Vec<ShockSpec>,
    #[serde(default)]
    pub policy: SplitPolicy,
    #[serde(default)]
    pub sign_convention: SignConvention,
    #[serde(default = "default_level")]
    pub confidence_level: f64,
    #[serde(default)]
    pub covariate_alignment: CovariateAlignment,
    /// Also report Levene's test across classes for every measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levene: Option<LeveneCenter>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory relative paths resolve against; the config file's directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_level() -> f64 {
    0.95
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn with_gdp(gdp: SourceSpec) -> Self {
        Self {
            data: DataConfig {
                gdp,
                covariates: Vec::new(),
                continents: None,
                continent_overrides: BTreeMap::new(),
                geojson: None,
                first_year: default_first_year(),
                last_year: default_last_year(),
            },
            shocks: default_shocks(),
            policy: SplitPolicy::default(),
            sign_convention: SignConvention::default(),
            confidence_level: default_level(),
            covariate_alignment: CovariateAlignment::default(),
            levene: None,
            output_dir: default_output_dir(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads and validates a config file. Paths stay as written; see
    /// [`RunConfig::resolve`].
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_json_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_relative() {
            self.base_dir.join(path)
        } else {
            path.to_path_buf()
        }
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn enabled_shocks(&self) -> Vec<ShockEvent> {
        self.shocks.iter().filter(|s| s.enabled).map(ShockSpec::to_event).collect()
    }

    pub fn covariate_codes(&self) -> Vec<String> {
        self.data.covariates.iter().map(|c| c.code.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.data;
        if d.first_year >= d.last_year {
            return Err(invalid(format!("data range {}..{} is empty", d.first_year, d.last_year)));
        }
        let enabled = self.enabled_shocks();
        if enabled.is_empty() {
            return Err(invalid("at least one shock must be enabled"));
        }
        let mut names = BTreeSet::new();
        for s in &self.shocks {
            if !names.insert(s.name.as_str()) {
                return Err(invalid(format!("duplicate shock name {:?}", s.name)));
            }
        }
        for s in &enabled {
            if !(d.first_year..=d.last_year).contains(&s.reference_year) {
                return Err(invalid(format!(
                    "shock {:?} ({}) lies outside the data range {}..{}",
                    s.name, s.reference_year, d.first_year, d.last_year
                )));
            }
        }
        if !CONFIDENCE_LEVELS.iter().any(|l| (l - self.confidence_level).abs() < 1e-12) {
            return Err(invalid(format!("confidence level {} is not one of 0.90, 0.95, 0.99", self.confidence_level)));
        }
        self.policy.validate().map_err(|e| invalid(e.to_string()))?;
        let mut codes = BTreeSet::new();
        for c in &d.covariates {
            if !COVARIATE_CODES.contains(&c.code.as_str()) {
                return Err(invalid(format!("unknown covariate code {:?}", c.code)));
            }
            if !codes.insert(c.code.as_str()) {
                return Err(invalid(format!("covariate {:?} listed twice", c.code)));
            }
        }
        if let CovariateAlignment::ShockYear { window } = self.covariate_alignment {
            if window < 0 {
                return Err(invalid("covariate alignment window must be non-negative"));
            }
        }
        Ok(())
    }
}
