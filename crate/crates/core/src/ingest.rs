//! Data acquisition: World Bank wide-format CSV, the indicator JSON API and
//! the country/continent table.
//!
//! The API path never feeds computation directly. Pages are written to a
//! snapshot file first and the snapshot is parsed like any other file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::series::{AnnualSeries, Continent, CountryMeta, CountryMetaMap, SeriesError, Year};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty file")]
    EmptyFile,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    /// `row` is the 1-based line in the file.
    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("duplicate country code {0}")]
    DuplicateCode(String),
    #[error("unknown continent label {label:?} for {code}")]
    UnknownContinentLabel { code: String, label: String },
    #[error("http error: status {0}")]
    HttpError(u16),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected payload shape: {0}")]
    SchemaError(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    File,
    Http,
}

/// Where a series came from. File sources always carry a content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub kind: SourceKind,
    pub location: String,
    pub indicator_code: String,
    pub retrieved_at: Option<String>,
    pub content_hash: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl SourceDescriptor {
    /// Describes a local file. When a fetch sidecar (`<file>.source.json`)
    /// sits next to it, the original retrieval time is carried over.
    pub fn for_file(path: &Path, location: &str, indicator_code: &str) -> Result<Self, IngestError> {
        let bytes = fs::read(path)?;
        let retrieved_at = fs::read_to_string(sidecar_path(path))
            .ok()
            .and_then(|s| serde_json::from_str::<SourceDescriptor>(&s).ok())
            .and_then(|d| d.retrieved_at);
        Ok(Self {
            kind: SourceKind::File,
            location: location.to_string(),
            indicator_code: indicator_code.to_string(),
            retrieved_at,
            content_hash: Some(sha256_hex(&bytes)),
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".source.json");
    path.with_file_name(name)
}

/// Parsed contents of one wide-format file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WdiTable {
    pub series: Vec<AnnualSeries>,
    pub country_names: BTreeMap<String, String>,
    pub indicator_names: BTreeMap<String, String>,
    /// (country, indicator) rows whose cells were all empty.
    pub empty_rows: Vec<(String, String)>,
    /// Metadata and trailer rows that were skipped.
    pub skipped_rows: usize,
}

const WDI_FIXED_COLUMNS: [&str; 4] = ["Country Name", "Country Code", "Indicator Name", "Indicator Code"];

fn is_preamble(record: &csv::StringRecord) -> bool {
    let first = record.get(0).unwrap_or("").trim();
    record.iter().all(|f| f.trim().is_empty()) || first == "Data Source" || first == "Last Updated Date"
}

fn parse_cell(cell: &str, row: usize, year: Year) -> Result<Option<f64>, IngestError> {
    let cell = cell.trim();
    if cell.is_empty() || cell == ".." {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(IngestError::MalformedRow { row, message: format!("non-numeric value {cell:?} in column {year}") }),
    }
}

/// Parses the World Bank wide export: `Country Name, Country Code,
/// Indicator Name, Indicator Code, <year>...`. Empty cells are missing.
pub fn parse_wdi_csv<R: Read>(mut reader: R) -> Result<WdiTable, IngestError> {
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw)?;
    let body = raw.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&raw);
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(IngestError::EmptyFile);
    }

    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(body);
    let mut records = rdr.records().enumerate();
    let mut table = WdiTable::default();

    let header = loop {
        match records.next() {
            None => return Err(IngestError::MalformedHeader("no header row".into())),
            Some((_, rec)) => {
                let rec = rec?;
                if is_preamble(&rec) {
                    table.skipped_rows += 1;
                    continue;
                }
                break rec;
            }
        }
    };
    let mut fields: Vec<&str> = header.iter().map(str::trim).collect();
    while fields.last().is_some_and(|f| f.is_empty()) {
        fields.pop();
    }
    if fields.len() < WDI_FIXED_COLUMNS.len() || fields[..4] != WDI_FIXED_COLUMNS {
        return Err(IngestError::MalformedHeader(format!(
            "expected {:?} followed by year columns, got {:?}",
            WDI_FIXED_COLUMNS,
            &fields[..fields.len().min(4)]
        )));
    }
    let years: Vec<Year> = fields[4..]
        .iter()
        .map(|f| {
            f.parse::<Year>().map_err(|_| IngestError::MalformedHeader(format!("year column {f:?} is not an integer")))
        })
        .collect::<Result<_, _>>()?;
    if years.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IngestError::MalformedHeader("year columns are not strictly increasing".into()));
    }
    let width = 4 + years.len();

    for (_, rec) in records {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let code = rec.get(1).map(str::trim).unwrap_or("");
        if rec.len() < 4 || code.is_empty() {
            table.skipped_rows += 1;
            continue;
        }
        let mut cells: Vec<&str> = rec.iter().collect();
        while cells.len() > width && cells.last().is_some_and(|c| c.trim().is_empty()) {
            cells.pop();
        }
        if cells.len() != width {
            return Err(IngestError::MalformedRow {
                row,
                message: format!("expected {width} fields, found {}", cells.len()),
            });
        }
        let indicator = cells[3].trim().to_string();
        let mut values = BTreeMap::new();
        for (cell, &year) in cells[4..].iter().zip(&years) {
            values.insert(year, parse_cell(cell, row, year)?);
        }
        table.country_names.insert(code.to_string(), cells[0].trim().to_string());
        table.indicator_names.insert(indicator.clone(), cells[2].trim().to_string());
        if values.values().all(Option::is_none) {
            table.empty_rows.push((code.to_string(), indicator));
            continue;
        }
        table.series.push(AnnualSeries::new(code, indicator, values)?);
    }
    if table.skipped_rows > 0 {
        info!("skipped {} metadata rows", table.skipped_rows);
    }
    Ok(table)
}

pub fn parse_wdi_file(path: &Path) -> Result<WdiTable, IngestError> {
    parse_wdi_csv(fs::File::open(path)?)
}

impl WdiTable {
    /// Writes the canonical wide form: every year from the earliest to the
    /// latest observed, rows (including all-empty ones) sorted by country
    /// then indicator.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), IngestError> {
        let first = self.series.iter().map(AnnualSeries::first_year).min();
        let last = self.series.iter().map(AnnualSeries::last_year).max();
        let years: Vec<Year> = match (first, last) {
            (Some(a), Some(b)) => (a..=b).collect(),
            _ => Vec::new(),
        };
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
        let mut header: Vec<String> = WDI_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend(years.iter().map(Year::to_string));
        w.write_record(&header)?;

        // all-empty rows are written back as blank cells so they survive a round trip
        let mut rows: Vec<(&str, &str, Option<&AnnualSeries>)> = self
            .series
            .iter()
            .map(|s| (s.country_code(), s.indicator_code(), Some(s)))
            .chain(self.empty_rows.iter().map(|(c, i)| (c.as_str(), i.as_str(), None)))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for (code, indicator, series) in rows {
            let mut rec = vec![
                self.country_names.get(code).cloned().unwrap_or_default(),
                code.to_string(),
                self.indicator_names.get(indicator).cloned().unwrap_or_default(),
                indicator.to_string(),
            ];
            rec.extend(years.iter().map(|&y| series.and_then(|s| s.get(y)).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, IngestError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Reads an `iso3,name,continent` table.
pub fn load_country_continents<R: Read>(reader: R) -> Result<CountryMetaMap, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "iso3" || &headers[1] != "name" || &headers[2] != "continent" {
        return Err(IngestError::MalformedHeader(format!(
            "expected iso3,name,continent, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut map = CountryMetaMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let code = rec.get(0).unwrap_or("").to_string();
        if code.is_empty() {
            return Err(IngestError::MalformedRow {
                row: rec.position().map_or(0, |p| p.line() as usize),
                message: "empty iso3 code".into(),
            });
        }
        let label = rec.get(2).unwrap_or("");
        let continent = Continent::from_label(label)
            .ok_or_else(|| IngestError::UnknownContinentLabel { code: code.clone(), label: label.to_string() })?;
        let meta = CountryMeta { country_code: code.clone(), name: rec.get(1).unwrap_or("").to_string(), continent };
        if map.insert(code.clone(), meta).is_some() {
            return Err(IngestError::DuplicateCode(code));
        }
    }
    Ok(map)
}

const SHIPPED_CONTINENTS: &str = include_str!("../data/country_continents.csv");

/// The bundled six-continent table of World Bank economies.
pub fn default_country_continents() -> CountryMetaMap {
    load_country_continents(SHIPPED_CONTINENTS.as_bytes()).expect("bundled table is valid")
}

// --- indicator API ------------------------------------------------------

pub const DEFAULT_API_BASE: &str = "https://api.worldbank.org/v2";

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

pub trait HttpGet: Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError>;
}

/// Blocking client that reports every status code as a response.
pub struct UreqClient {
    agent: ureq::Agent,
}

impl UreqClient {
    pub fn new(timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        Self { agent }
    }
}

impl Default for UreqClient {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl HttpGet for UreqClient {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        let mut resp = self.agent.get(url).call().map_err(|e| IngestError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| IngestError::Transport(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay_ms: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchRequest {
    pub base_url: String,
    pub indicator_code: String,
    /// ISO codes joined with `;` by the API, or `all` when empty.
    #[serde(default)]
    pub countries: Vec<String>,
    pub first_year: Year,
    pub last_year: Year,
    #[serde(default = "default_per_page")]
    pub per_page: u32,
}

fn default_per_page() -> u32 {
    1000
}

impl FetchRequest {
    pub fn new(indicator_code: &str, first_year: Year, last_year: Year) -> Self {
        Self {
            base_url: DEFAULT_API_BASE.to_string(),
            indicator_code: indicator_code.to_string(),
            countries: Vec::new(),
            first_year,
            last_year,
            per_page: default_per_page(),
        }
    }

    /// Request URL without the page parameter.
    pub fn url(&self) -> String {
        let countries = if self.countries.is_empty() { "all".to_string() } else { self.countries.join(";") };
        format!(
            "{}/country/{}/indicator/{}?format=json&date={}:{}&per_page={}",
            self.base_url.trim_end_matches('/'),
            countries,
            self.indicator_code,
            self.first_year,
            self.last_year,
            self.per_page
        )
    }
}

fn get_with_retry(client: &dyn HttpGet, url: &str, retry: &RetryPolicy) -> Result<String, IngestError> {
    let attempts = retry.max_attempts.max(1);
    let mut last_err = IngestError::Transport("no attempt made".into());
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = retry.base_delay_ms.saturating_mul(1 << (attempt - 1).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        match client.get(url) {
            Ok(resp) if resp.status == 200 => return Ok(resp.body),
            Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                warn!("{url}: status {} (attempt {})", resp.status, attempt + 1);
                last_err = IngestError::HttpError(resp.status);
            }
            Ok(resp) => return Err(IngestError::HttpError(resp.status)),
            Err(e @ IngestError::Transport(_)) => {
                warn!("{url}: {e} (attempt {})", attempt + 1);
                last_err = e;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn as_u64(v: &Value) -> Option<u64> {
    v.as_u64().or_else(|| v.as_str().and_then(|s| s.parse().ok()))
}

/// Splits one API page into its `pages` count and observation array.
fn page_parts(page: &Value) -> Result<(u64, &[Value]), IngestError> {
    let arr = page.as_array().ok_or_else(|| IngestError::SchemaError("page is not a JSON array".into()))?;
    let meta = arr
        .first()
        .and_then(Value::as_object)
        .ok_or_else(|| IngestError::SchemaError("missing metadata object".into()))?;
    if let Some(msg) = meta.get("message") {
        return Err(IngestError::SchemaError(format!("API message: {msg}")));
    }
    let pages =
        meta.get("pages").and_then(as_u64).ok_or_else(|| IngestError::SchemaError("metadata lacks `pages`".into()))?;
    let observations = match arr.get(1) {
        Some(Value::Array(obs)) => obs.as_slice(),
        Some(Value::Null) | None => &[],
        Some(_) => return Err(IngestError::SchemaError("observations are not an array".into())),
    };
    Ok((pages, observations))
}

/// Turns raw API pages into a table. `null` values become missing years.
pub fn parse_api_pages(pages: &[Value]) -> Result<WdiTable, IngestError> {
    let mut grouped: BTreeMap<(String, String), BTreeMap<Year, Option<f64>>> = BTreeMap::new();
    let mut table = WdiTable::default();
    for page in pages {
        let (_, observations) = page_parts(page)?;
        for obs in observations {
            let field = |name: &str| {
                obs.get(name).ok_or_else(|| IngestError::SchemaError(format!("observation lacks `{name}`")))
            };
            let indicator = field("indicator")?;
            let indicator_code = indicator
                .get("id")
                .and_then(Value::as_str)
                .ok_or_else(|| IngestError::SchemaError("indicator.id missing".into()))?
                .to_string();
            let country = field("country")?;
            let code = obs
                .get("countryiso3code")
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .or_else(|| country.get("id").and_then(Value::as_str))
                .unwrap_or("")
                .to_string();
            if code.is_empty() {
                table.skipped_rows += 1;
                continue;
            }
            let year: Year = field("date")?
                .as_str()
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| IngestError::SchemaError("date is not a year".into()))?;
            let value = match field("value")? {
                Value::Null => None,
                v => Some(v.as_f64().ok_or_else(|| IngestError::SchemaError(format!("value {v} is not numeric")))?),
            };
            if let Some(name) = country.get("value").and_then(Value::as_str) {
                table.country_names.insert(code.clone(), name.to_string());
            }
            if let Some(name) = indicator.get("value").and_then(Value::as_str) {
                table.indicator_names.insert(indicator_code.clone(), name.to_string());
            }
            grouped.entry((code, indicator_code)).or_default().insert(year, value);
        }
    }
    for ((code, indicator), values) in grouped {
        if values.values().all(Option::is_none) {
            table.empty_rows.push((code, indicator));
        } else {
            table.series.push(AnnualSeries::new(code, indicator, values)?);
        }
    }
    Ok(table)
}

/// Parses a snapshot written by [`fetch_indicator`].
pub fn load_api_snapshot(path: &Path) -> Result<WdiTable, IngestError> {
    let pages: Vec<Value> = serde_json::from_slice(&fs::read(path)?)?;
    parse_api_pages(&pages)
}

#[derive(Debug, Clone)]
pub struct FetchOutcome {
    pub table: WdiTable,
    pub descriptor: SourceDescriptor,
    pub snapshot_path: PathBuf,
}

/// Pages through the indicator API, writes the raw pages to
/// `<snapshot_dir>/<indicator>.api.json` with a `.source.json` sidecar, then
/// parses the snapshot.
pub fn fetch_indicator(
    client: &dyn HttpGet,
    request: &FetchRequest,
    retry: &RetryPolicy,
    snapshot_dir: &Path,
) -> Result<FetchOutcome, IngestError> {
    let base = request.url();
    let mut pages = Vec::new();
    let mut page_no = 1u64;
    loop {
        let body = get_with_retry(client, &format!("{base}&page={page_no}"), retry)?;
        let page: Value = serde_json::from_str(&body)?;
        let (total_pages, _) = page_parts(&page)?;
        pages.push(page);
        if page_no >= total_pages {
            break;
        }
        page_no += 1;
    }

    fs::create_dir_all(snapshot_dir)?;
    let snapshot_path = snapshot_dir.join(format!("{}.api.json", request.indicator_code));
    let bytes = serde_json::to_vec(&pages)?;
    fs::write(&snapshot_path, &bytes)?;
    let descriptor = SourceDescriptor {
        kind: SourceKind::Http,
        location: base,
        indicator_code: request.indicator_code.clone(),
        retrieved_at: Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        content_hash: Some(sha256_hex(&bytes)),
    };
    fs::write(sidecar_path(&snapshot_path), serde_json::to_vec_pretty(&descriptor)?)?;

    let table = load_api_snapshot(&snapshot_path)?;
    Ok(FetchOutcome { table, descriptor, snapshot_path })
}

/// Fetches several indicators with at most `max_concurrent` requests in flight
/// (capped at 2). Results keep the order of `requests`.
pub fn fetch_indicators(
    client: &dyn HttpGet,
    requests: &[FetchRequest],
    retry: &RetryPolicy,
    snapshot_dir: &Path,
    max_concurrent: usize,
) -> Vec<Result<FetchOutcome, IngestError>> {
    let workers = max_concurrent.clamp(1, 2).min(requests.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<FetchOutcome, IngestError>>>> =
        Mutex::new((0..requests.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(req) = requests.get(i) else { break };
                let out = fetch_indicator(client, req, retry, snapshot_dir);
                results.lock().expect("poisoned")[i] = Some(out);
            });
        }
    });
    results.into_inner().expect("poisoned").into_iter().map(|r| r.expect("every request visited")).collect()
}
