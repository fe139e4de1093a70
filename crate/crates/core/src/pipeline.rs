//! Batch pipeline: load sources, build the panel, run every analysis and
//! write the output tree. The stage functions are what the CLI subcommands
//! call, so chaining them reproduces `run_pipeline` exactly.
//!
//! Output tree (all CSV with CRLF line endings):
//!
//! | file | content |
//! |---|---|
//! | `panel.csv`, `panel.json` | the country x shock panel |
//! | `class_errorbars_components.csv` | i_r and components grouped by class |
//! | `class_errorbars_covariates.csv` | covariates grouped by class |
//! | `levene_by_class.csv` | only when Levene is configured |
//! | `trajectories.csv` | per-country classes across shocks, Fixed/Commute status |
//! | `choropleth.csv` (+ `choropleth.geojson`) | ISO3 join for maps |
//! | `class_shares.csv` | Fixed/Commute shares by continent and class |
//! | `shifts.csv` | net class shifts per continent and shock year |
//! | `continent_errorbars.csv` | i_r and components grouped by continent |
//! | `charts/*.svg` | one error-bar chart per table measure |
//! | `run_manifest.json` | config, sources, output hashes, timestamp |

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, SourceSpec};
use crate::geo::{
    class_share_tabulation, continent_errorbars, fixed_commute_status, join_geojson, shift_pyramid,
    write_choropleth_join, CountryTrajectory, GeoError, MeasureStats,
};
use crate::index::ResilienceClass;
use crate::ingest::{
    default_country_continents, fetch_indicators, load_api_snapshot, load_country_continents, parse_wdi_file,
    sha256_hex, FetchRequest, HttpGet, IngestError, RetryPolicy, SourceDescriptor, SourceKind, WdiTable,
    DEFAULT_API_BASE,
};
use crate::panel::{attach_covariates, build_panel, CovariateSeries, Panel, PanelError, PanelSettings};
use crate::render::errorbar_svg;
use crate::series::{AnnualSeries, CountryMeta, CountryMetaMap};
use crate::stats::{grouped_errorbars, levene_test, GroupBy, LeveneCenter, Selector, StatsError};
use crate::validate::{validate_panel, ValidationReport};

pub const CACHE_ENV: &str = "RESILIENCE_CACHE_DIR";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Ingest { context: String, source: IngestError },
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("no snapshot for {indicator} in {dir} and fetching is disabled")]
    MissingSnapshot { indicator: String, dir: PathBuf },
    #[error("{0}")]
    Data(String),
    #[error("panel failed {} invariant check(s)", .0.violations.len())]
    Invariant(ValidationReport),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// 2 validation, 3 data, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Ingest { .. } | Self::Panel(_) | Self::MissingSnapshot { .. } | Self::Data(_) | Self::Io { .. } => 3,
            Self::Json(_) => 3,
            Self::Invariant(_) | Self::Stats(_) | Self::Geo(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "validation",
            Self::Invariant(_) | Self::Stats(_) | Self::Geo(_) => "invariant",
            _ => "data",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn ingest_err(context: impl Into<String>) -> impl FnOnce(IngestError) -> PipelineError {
    let context = context.into();
    move |source| PipelineError::Ingest { context, source }
}

/// Everything the compute stage needs, already restricted to the configured
/// year range and to countries in the continent table.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub gdp: Vec<AnnualSeries>,
    pub covariates: Vec<CovariateSeries>,
    pub meta: CountryMetaMap,
    pub provenance: Vec<SourceDescriptor>,
    /// Codes in the GDP source that are not countries (regional and income
    /// aggregates), left out.
    pub excluded_codes: Vec<String>,
    /// Countries in the table whose GDP row has no value in range.
    pub dropped_countries: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub cache_dir: Option<PathBuf>,
    /// Fetch missing snapshots over the network.
    pub allow_fetch: bool,
    pub retry: RetryPolicy,
}

pub fn default_cache_dir(cfg: &RunConfig) -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| cfg.resolved_output_dir().join("cache"))
}

fn snapshot_path(cache: &Path, indicator: &str) -> PathBuf {
    cache.join(format!("{indicator}.api.json"))
}

fn fetch_request(cfg: &RunConfig, spec: &SourceSpec) -> Option<FetchRequest> {
    let SourceSpec::Fetch { indicator, base_url, countries } = spec else {
        return None;
    };
    let mut req = FetchRequest::new(indicator, cfg.data.first_year, cfg.data.last_year);
    req.base_url = base_url.clone().unwrap_or_else(|| DEFAULT_API_BASE.to_string());
    req.countries = countries.clone();
    Some(req)
}

fn all_sources(cfg: &RunConfig) -> Vec<(String, &SourceSpec)> {
    std::iter::once(("GDP".to_string(), &cfg.data.gdp))
        .chain(cfg.data.covariates.iter().map(|c| (c.code.clone(), &c.source)))
        .collect()
}

/// Fetches every `fetch` source whose snapshot is not cached yet, two at a
/// time. Returns the snapshot paths written.
pub fn prefetch(
    cfg: &RunConfig,
    client: &dyn HttpGet,
    cache: &Path,
    retry: &RetryPolicy,
) -> Result<Vec<PathBuf>, PipelineError> {
    let pending: Vec<FetchRequest> = all_sources(cfg)
        .into_iter()
        .filter_map(|(_, spec)| fetch_request(cfg, spec))
        .filter(|req| !snapshot_path(cache, &req.indicator_code).exists())
        .collect();
    let mut written = Vec::new();
    for (req, out) in pending.iter().zip(fetch_indicators(client, &pending, retry, cache, 2)) {
        let out = out.map_err(ingest_err(format!("fetching {}", req.indicator_code)))?;
        written.push(out.snapshot_path);
    }
    Ok(written)
}

fn load_source(
    cfg: &RunConfig,
    spec: &SourceSpec,
    cache: &Path,
) -> Result<(WdiTable, SourceDescriptor), PipelineError> {
    match spec {
        SourceSpec::File { path, indicator } => {
            let resolved = cfg.resolve(path);
            let location = path.to_string_lossy().replace('\\', "/");
            let ctx = format!("reading {}", resolved.display());
            let mut table =
                if location.ends_with(".api.json") { load_api_snapshot(&resolved) } else { parse_wdi_file(&resolved) }
                    .map_err(ingest_err(ctx.clone()))?;
            let indicators: std::collections::BTreeSet<&str> =
                table.series.iter().map(|s| s.indicator_code()).collect();
            let code = match indicator {
                Some(code) => code.clone(),
                None if indicators.len() <= 1 => indicators.into_iter().next().unwrap_or_default().to_string(),
                None => {
                    return Err(PipelineError::Data(format!(
                        "{location} holds several indicators ({indicators:?}); set `indicator`"
                    )))
                }
            };
            table.series.retain(|s| s.indicator_code() == code);
            table.empty_rows.retain(|(_, ind)| *ind == code);
            let descriptor = SourceDescriptor::for_file(&resolved, &location, &code).map_err(ingest_err(ctx))?;
            Ok((table, descriptor))
        }
        SourceSpec::Fetch { indicator, .. } => {
            let snap = snapshot_path(cache, indicator);
            if !snap.exists() {
                return Err(PipelineError::MissingSnapshot { indicator: indicator.clone(), dir: cache.to_path_buf() });
            }
            let ctx = format!("reading snapshot {}", snap.display());
            let table = load_api_snapshot(&snap).map_err(ingest_err(ctx.clone()))?;
            let req = fetch_request(cfg, spec).expect("fetch spec");
            let mut descriptor = SourceDescriptor::for_file(&snap, &req.url(), indicator).map_err(ingest_err(ctx))?;
            descriptor.kind = SourceKind::Http;
            Ok((table, descriptor))
        }
    }
}

fn clip_to_range(series: &AnnualSeries, first: i32, last: i32) -> Option<AnnualSeries> {
    let values = series.values().range(first..=last).map(|(&y, &v)| (y, v)).collect();
    AnnualSeries::new(series.country_code(), series.indicator_code(), values).ok()
}

pub fn load_meta(cfg: &RunConfig) -> Result<CountryMetaMap, PipelineError> {
    let mut meta = match &cfg.data.continents {
        Some(path) => {
            let resolved = cfg.resolve(path);
            let file = fs::File::open(&resolved).map_err(io_err(&resolved))?;
            load_country_continents(file).map_err(ingest_err(format!("reading {}", resolved.display())))?
        }
        None => default_country_continents(),
    };
    for (code, &continent) in &cfg.data.continent_overrides {
        meta.entry(code.clone()).and_modify(|m| m.continent = continent).or_insert_with(|| CountryMeta {
            country_code: code.clone(),
            name: code.clone(),
            continent,
        });
    }
    Ok(meta)
}

/// Reads every configured source. `fetch` sources are fetched first when
/// `opts.allow_fetch` is set and a client is given; otherwise they must
/// already be in the cache.
pub fn load_inputs(cfg: &RunConfig, opts: &LoadOptions, client: Option<&dyn HttpGet>) -> Result<Inputs, PipelineError> {
    let cache = opts.cache_dir.clone().unwrap_or_else(|| default_cache_dir(cfg));
    if let (true, Some(client)) = (opts.allow_fetch, client) {
        prefetch(cfg, client, &cache, &opts.retry)?;
    }
    let meta = load_meta(cfg)?;
    let (first, last) = (cfg.data.first_year, cfg.data.last_year);

    let (gdp_table, gdp_desc) = load_source(cfg, &cfg.data.gdp, &cache)?;
    let mut provenance = vec![gdp_desc];
    let mut excluded_codes = Vec::new();
    let mut dropped_countries: Vec<String> =
        gdp_table.empty_rows.iter().filter(|(c, _)| meta.contains_key(c)).map(|(c, _)| c.clone()).collect();
    let mut gdp = Vec::new();
    for s in &gdp_table.series {
        if !meta.contains_key(s.country_code()) {
            excluded_codes.push(s.country_code().to_string());
            continue;
        }
        match clip_to_range(s, first, last) {
            Some(clipped) => gdp.push(clipped),
            None => dropped_countries.push(s.country_code().to_string()),
        }
    }
    excluded_codes.extend(gdp_table.empty_rows.iter().filter(|(c, _)| !meta.contains_key(c)).map(|(c, _)| c.clone()));
    excluded_codes.sort();
    excluded_codes.dedup();
    dropped_countries.sort();
    dropped_countries.dedup();

    let mut covariates = Vec::new();
    for cov in &cfg.data.covariates {
        let (table, desc) = load_source(cfg, &cov.source, &cache)?;
        provenance.push(desc);
        covariates.extend(
            table
                .series
                .iter()
                .filter(|s| meta.contains_key(s.country_code()))
                .filter_map(|s| clip_to_range(s, first, last))
                .map(|series| CovariateSeries { code: cov.code.clone(), series }),
        );
    }
    Ok(Inputs { gdp, covariates, meta, provenance, excluded_codes, dropped_countries })
}

pub fn compute_panel(cfg: &RunConfig, inputs: &Inputs) -> Result<Panel, PipelineError> {
    let settings = PanelSettings {
        policy: cfg.policy,
        sign_convention: cfg.sign_convention,
        covariate_codes: cfg.covariate_codes(),
    };
    let panel = build_panel(&inputs.gdp, &cfg.enabled_shocks(), &inputs.meta, &settings)?;
    let mut panel = attach_covariates(panel, &inputs.covariates, cfg.covariate_alignment)?;
    panel.provenance = inputs.provenance.clone();
    panel.dropped_countries = inputs.dropped_countries.clone();
    let report = validate_panel(&panel);
    if !report.is_ok() {
        return Err(PipelineError::Invariant(report));
    }
    Ok(panel)
}

/// Continent table reconstructed from the panel rows.
pub fn meta_from_panel(panel: &Panel) -> CountryMetaMap {
    panel
        .rows
        .iter()
        .map(|r| {
            (
                r.country_code.clone(),
                CountryMeta {
                    country_code: r.country_code.clone(),
                    name: r.country_code.clone(),
                    continent: r.continent,
                },
            )
        })
        .collect()
}

fn write_file(out_dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
    let path = out_dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(PathBuf::from(name))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn errorbar_csv(rows: &[MeasureStats]) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let mut rec = |fields: Vec<String>| w.write_record(fields).map_err(|e| PipelineError::Data(e.to_string()));
    rec(["measure", "group", "n", "mean", "sd", "ci_low", "ci_high", "level"].map(String::from).to_vec())?;
    for m in rows {
        let g = &m.stats;
        rec(vec![
            m.measure.clone(),
            g.group_label.clone(),
            g.n.to_string(),
            fmt_opt(g.mean),
            fmt_opt(g.sd),
            fmt_opt(g.ci_low),
            fmt_opt(g.ci_high),
            g.level.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| PipelineError::Data(e.to_string()))
}

fn class_bars(panel: &Panel, selectors: &[Selector], level: f64) -> Result<Vec<MeasureStats>, PipelineError> {
    let mut out = Vec::new();
    for sel in selectors {
        for stats in grouped_errorbars(panel, sel, GroupBy::ResilienceClass, level)? {
            out.push(MeasureStats { measure: sel.name().to_string(), stats });
        }
    }
    Ok(out)
}

fn covariate_selectors(panel: &Panel) -> Vec<Selector> {
    panel.covariate_codes.iter().cloned().map(Selector::Covariate).collect()
}

/// Levene's test across the three classes, one line per measure. Measures
/// with fewer than two classes of two or more values are reported as not
/// applicable.
fn levene_csv(panel: &Panel, center: LeveneCenter) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let to_err = |e: csv::Error| PipelineError::Data(e.to_string());
    w.write_record(["measure", "center", "groups", "w_statistic", "df1", "df2", "p_value", "note"]).map_err(to_err)?;
    let center_name = match center {
        LeveneCenter::Mean => "mean",
        LeveneCenter::Median => "median",
    };
    let selectors: Vec<Selector> = Selector::COMPONENTS.iter().cloned().chain(covariate_selectors(panel)).collect();
    for sel in &selectors {
        let groups: Vec<Vec<f64>> = ResilienceClass::ALL
            .iter()
            .map(|c| {
                panel.rows.iter().filter(|r| r.class() == Some(*c)).filter_map(|r| sel.value(r)).collect::<Vec<f64>>()
            })
            .filter(|g| g.len() >= 2)
            .collect();
        let k = groups.len().to_string();
        let fields = match levene_test(&groups, center) {
            Ok(r) => vec![
                r.w_statistic.to_string(),
                r.df1.to_string(),
                r.df2.to_string(),
                r.p_value.to_string(),
                String::new(),
            ],
            Err(e) => vec![String::new(), String::new(), String::new(), String::new(), e.to_string()],
        };
        let mut rec = vec![sel.name().to_string(), center_name.to_string(), k];
        rec.extend(fields);
        w.write_record(&rec).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| PipelineError::Data(e.to_string()))
}

pub fn write_panel(out_dir: &Path, panel: &Panel) -> Result<Vec<PathBuf>, PipelineError> {
    Ok(vec![
        write_file(out_dir, "panel.csv", panel.to_csv_string()?.as_bytes())?,
        write_file(out_dir, "panel.json", panel.to_json_string()?.as_bytes())?,
    ])
}

pub fn write_class_errorbars(
    out_dir: &Path,
    panel: &Panel,
    level: f64,
    levene: Option<LeveneCenter>,
) -> Result<Vec<PathBuf>, PipelineError> {
    let components = class_bars(panel, &Selector::COMPONENTS, level)?;
    let covariates = class_bars(panel, &covariate_selectors(panel), level)?;
    let mut files = vec![
        write_file(out_dir, "class_errorbars_components.csv", &errorbar_csv(&components)?)?,
        write_file(out_dir, "class_errorbars_covariates.csv", &errorbar_csv(&covariates)?)?,
    ];
    if let Some(center) = levene {
        files.push(write_file(out_dir, "levene_by_class.csv", &levene_csv(panel, center)?)?);
    }
    Ok(files)
}

fn trajectories_csv(panel: &Panel, trajectories: &[CountryTrajectory]) -> Result<Vec<u8>, PipelineError> {
    let meta = meta_from_panel(panel);
    let mut years = panel.shock_years();
    years.sort_unstable();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let to_err = |e: csv::Error| PipelineError::Data(e.to_string());
    let mut header: Vec<String> = ["country", "continent", "status", "average_class"].map(String::from).to_vec();
    header.extend(years.iter().map(|y| y.to_string()));
    w.write_record(&header).map_err(to_err)?;
    for t in trajectories {
        let by_year: BTreeMap<i32, Option<ResilienceClass>> = t.classes_by_shock.iter().copied().collect();
        let mut rec = vec![
            t.country_code.clone(),
            meta.get(&t.country_code).map(|m| m.continent.to_string()).unwrap_or_default(),
            t.status.label().to_string(),
            t.average_class.map(|c| c.label().to_string()).unwrap_or_default(),
        ];
        rec.extend(
            years.iter().map(|y| by_year.get(y).copied().flatten().map(|c| c.label().to_string()).unwrap_or_default()),
        );
        w.write_record(&rec).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| PipelineError::Data(e.to_string()))
}

/// Trajectories, the choropleth join (and GeoJSON join when a boundaries
/// file is given) and the Fixed/Commute share table.
pub fn write_fixed_commute(
    out_dir: &Path,
    panel: &Panel,
    geojson: Option<&Path>,
) -> Result<Vec<PathBuf>, PipelineError> {
    let trajectories = fixed_commute_status(panel);
    let meta = meta_from_panel(panel);
    let mut files = vec![write_file(out_dir, "trajectories.csv", &trajectories_csv(panel, &trajectories)?)?];

    let mut buf = Vec::new();
    write_choropleth_join(&trajectories, &mut buf)?;
    files.push(write_file(out_dir, "choropleth.csv", &buf)?);

    if let Some(path) = geojson {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut collection: serde_json::Value = serde_json::from_str(&text)?;
        join_geojson(&mut collection, &trajectories)?;
        let mut out = serde_json::to_vec_pretty(&collection)?;
        out.push(b'\n');
        files.push(write_file(out_dir, "choropleth.geojson", &out)?);
    }

    let mut buf = Vec::new();
    class_share_tabulation(&trajectories, &meta)?.write_csv(&mut buf)?;
    files.push(write_file(out_dir, "class_shares.csv", &buf)?);
    Ok(files)
}

pub fn write_shifts(out_dir: &Path, panel: &Panel) -> Result<Vec<PathBuf>, PipelineError> {
    let records = shift_pyramid(panel, &meta_from_panel(panel))?;
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut buf);
        let to_err = |e: csv::Error| PipelineError::Data(e.to_string());
        w.write_record(["continent", "shock_year", "net_shift"]).map_err(to_err)?;
        for r in &records {
            w.write_record([r.continent.to_string(), r.shock_year.to_string(), r.net_shift.to_string()])
                .map_err(to_err)?;
        }
        w.flush().map_err(|e| PipelineError::Data(e.to_string()))?;
    }
    Ok(vec![write_file(out_dir, "shifts.csv", &buf)?])
}

pub fn write_continents(out_dir: &Path, panel: &Panel, level: f64) -> Result<Vec<PathBuf>, PipelineError> {
    let rows = continent_errorbars(panel, level)?;
    Ok(vec![write_file(out_dir, "continent_errorbars.csv", &errorbar_csv(&rows)?)?])
}

fn chart_name(prefix: &str, measure: &str) -> String {
    let safe: String = measure.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    format!("charts/{prefix}_{safe}.svg")
}

fn group_by_measure(rows: Vec<MeasureStats>) -> Vec<(String, Vec<crate::stats::GroupStats>)> {
    let mut out: Vec<(String, Vec<crate::stats::GroupStats>)> = Vec::new();
    for m in rows {
        match out.last_mut() {
            Some((name, groups)) if *name == m.measure => groups.push(m.stats),
            _ => out.push((m.measure, vec![m.stats])),
        }
    }
    out
}

/// One chart per measure: by class (components and covariates) and by
/// continent (components).
pub fn write_charts(out_dir: &Path, panel: &Panel, level: f64) -> Result<Vec<PathBuf>, PipelineError> {
    let pct = (level * 100.0).round();
    let mut files = Vec::new();
    let by_class = class_bars(
        panel,
        &Selector::COMPONENTS.iter().cloned().chain(covariate_selectors(panel)).collect::<Vec<_>>(),
        level,
    )?;
    for (measure, groups) in group_by_measure(by_class) {
        let svg = errorbar_svg(&format!("{measure} by resilience class ({pct}% CI)"), &measure, &groups);
        files.push(write_file(out_dir, &chart_name("class", &measure), svg.as_bytes())?);
    }
    for (measure, groups) in group_by_measure(continent_errorbars(panel, level)?) {
        let svg = errorbar_svg(&format!("{measure} by continent ({pct}% CI)"), &measure, &groups);
        files.push(write_file(out_dir, &chart_name("continent", &measure), svg.as_bytes())?);
    }
    Ok(files)
}

/// Every analysis output for a built panel, in manifest order.
pub fn write_analyses(out_dir: &Path, cfg: &RunConfig, panel: &Panel) -> Result<Vec<PathBuf>, PipelineError> {
    let geojson = cfg.data.geojson.as_ref().map(|p| cfg.resolve(p));
    let mut files = write_class_errorbars(out_dir, panel, cfg.confidence_level, cfg.levene)?;
    files.extend(write_fixed_commute(out_dir, panel, geojson.as_deref())?);
    files.extend(write_shifts(out_dir, panel)?);
    files.extend(write_continents(out_dir, panel, cfg.confidence_level)?);
    files.extend(write_charts(out_dir, panel, cfg.confidence_level)?);
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The only field that differs between identical runs.
    pub generated_at: String,
    pub config: RunConfig,
    pub sources: Vec<SourceDescriptor>,
    pub countries: usize,
    pub shocks: usize,
    pub rows: usize,
    pub computable_rows: usize,
    pub excluded_codes: Vec<String>,
    pub dropped_countries: Vec<String>,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
}

pub fn run_pipeline(
    cfg: &RunConfig,
    opts: &LoadOptions,
    client: Option<&dyn HttpGet>,
) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg, opts, client)?;
    let panel = compute_panel(cfg, &inputs)?;
    let out_dir = cfg.resolved_output_dir();
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;

    let mut files = write_panel(&out_dir, &panel)?;
    files.extend(write_analyses(&out_dir, cfg, &panel)?);
    let outputs = files
        .iter()
        .map(|rel| {
            let full = out_dir.join(rel);
            let bytes = fs::read(&full).map_err(io_err(&full))?;
            Ok(OutputEntry { path: rel.to_string_lossy().replace('\\', "/"), sha256: sha256_hex(&bytes) })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: cfg.clone(),
        sources: panel.provenance.clone(),
        countries: panel.countries().len(),
        shocks: panel.config_snapshot.shocks.len(),
        rows: panel.rows.len(),
        computable_rows: panel.computable_count(),
        excluded_codes: inputs.excluded_codes.clone(),
        dropped_countries: inputs.dropped_countries.clone(),
        outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    let path = out_dir.join("run_manifest.json");
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(&bytes).map_err(io_err(&path))?;
    Ok(RunSummary { output_dir: out_dir, manifest })
}

/// Machine-readable failure report printed by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<ValidationReport>,
}

impl From<&PipelineError> for ErrorReport {
    fn from(e: &PipelineError) -> Self {
        Self {
            status: "error",
            kind: e.kind(),
            exit_code: e.exit_code(),
            message: e.to_string(),
            violations: match e {
                PipelineError::Invariant(r) => Some(r.clone()),
                _ => None,
            },
        }
    }
}
