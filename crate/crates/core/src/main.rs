use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use resilience_core::config::{ConfigError, RunConfig};
use resilience_core::ingest::{HttpGet, RetryPolicy, UreqClient};
use resilience_core::panel::Panel;
use resilience_core::pipeline::{
    compute_panel, default_cache_dir, load_inputs, prefetch, run_pipeline, write_charts, write_class_errorbars,
    write_continents, write_fixed_commute, write_panel, write_shifts, ErrorReport, LoadOptions, PipelineError,
};
use resilience_core::series::LevelMode;
use resilience_core::stats::LeveneCenter;
use resilience_core::testkit::synthetic_world;
use resilience_core::validate::validate_panel;
use resilience_core::SignConvention;

/// Economic resilience index over World Bank country series split at crisis
/// years, with class, trajectory and continent analyses.
#[derive(Parser)]
#[command(name = "resilience", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch any `fetch` sources into the cache and report what was loaded.
    Ingest(RunArgs),
    /// Build the panel and write panel.csv / panel.json.
    Compute(RunArgs),
    /// Run one analysis on an existing panel.json.
    Analyze {
        #[command(subcommand)]
        analysis: Analysis,
    },
    /// Write the SVG error-bar charts for an existing panel.json.
    Render(AnalyzeArgs),
    /// Check every panel invariant; violations are listed with row positions.
    Validate {
        #[arg(long)]
        panel: PathBuf,
    },
    /// The whole pipeline plus run_manifest.json.
    Run(RunArgs),
    /// Write a synthetic wide-format GDP file for the bundled country table.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        countries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Components and covariates grouped by resilience class.
    ClassErrorbars(AnalyzeArgs),
    /// Trajectories, Fixed/Commute status, choropleth join and share table.
    FixedCommute(AnalyzeArgs),
    /// Net class shifts per continent and shock.
    Shifts(AnalyzeArgs),
    /// Components grouped by continent.
    Continents(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Corrected,
    AsPrinted,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Max,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum CenterArg {
    Mean,
    Median,
}

impl From<CenterArg> for LeveneCenter {
    fn from(c: CenterArg) -> Self {
        match c {
            CenterArg::Mean => LeveneCenter::Mean,
            CenterArg::Median => LeveneCenter::Median,
        }
    }
}

/// Flags override the corresponding config values.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, value_enum)]
    sign_convention: Option<SignArg>,
    #[arg(long)]
    min_ref: Option<usize>,
    #[arg(long)]
    min_perf: Option<usize>,
    #[arg(long, value_enum)]
    level_mode: Option<LevelArg>,
    /// Enable the configured shock with this year (repeatable).
    #[arg(long)]
    enable_shock: Vec<i32>,
    /// Disable the configured shock with this year (repeatable).
    #[arg(long)]
    disable_shock: Vec<i32>,
    /// Cache directory for API snapshots; also read from RESILIENCE_CACHE_DIR.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Never touch the network; fetch sources must already be cached.
    #[arg(long)]
    offline: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    panel: PathBuf,
    /// Output directory; defaults to the panel's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config to take the confidence level, Levene switch and GeoJSON from.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, value_enum)]
    levene: Option<CenterArg>,
    #[arg(long)]
    geojson: Option<PathBuf>,
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load_config(args: &RunArgs) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = absolute(dir);
    }
    if let Some(level) = args.level {
        cfg.confidence_level = level;
    }
    if let Some(s) = args.sign_convention {
        cfg.sign_convention = match s {
            SignArg::Corrected => SignConvention::Corrected,
            SignArg::AsPrinted => SignConvention::AsPrinted,
        };
    }
    if let Some(n) = args.min_ref {
        cfg.policy.min_ref = n;
    }
    if let Some(n) = args.min_perf {
        cfg.policy.min_perf = n;
    }
    if let Some(m) = args.level_mode {
        cfg.policy.level_mode = match m {
            LevelArg::Max => LevelMode::Max,
            LevelArg::Mean => LevelMode::Mean,
        };
    }
    for (years, enabled) in [(&args.enable_shock, true), (&args.disable_shock, false)] {
        for &year in years {
            let shock = cfg
                .shocks
                .iter_mut()
                .find(|s| s.year == year)
                .ok_or_else(|| ConfigError::Invalid(format!("no configured shock in {year}")))?;
            shock.enabled = enabled;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_options(cfg: &RunConfig, args: &RunArgs) -> LoadOptions {
    LoadOptions {
        cache_dir: Some(args.cache_dir.clone().unwrap_or_else(|| default_cache_dir(cfg))),
        allow_fetch: !args.offline,
        retry: RetryPolicy::default(),
    }
}

fn read_panel(path: &Path) -> Result<Panel, PipelineError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    Ok(Panel::from_json_str(&text)?)
}

struct AnalyzeContext {
    panel: Panel,
    out: PathBuf,
    level: f64,
    levene: Option<LeveneCenter>,
    geojson: Option<PathBuf>,
}

fn analyze_context(args: &AnalyzeArgs) -> Result<AnalyzeContext, PipelineError> {
    let cfg = args.config.as_deref().map(RunConfig::load).transpose()?;
    let panel = read_panel(&args.panel)?;
    let out = args.out.clone().unwrap_or_else(|| args.panel.parent().map(Path::to_path_buf).unwrap_or_default());
    let level = args.level.or(cfg.as_ref().map(|c| c.confidence_level)).unwrap_or(0.95);
    let levene = args.levene.map(Into::into).or(cfg.as_ref().and_then(|c| c.levene));
    let geojson =
        args.geojson.clone().or_else(|| cfg.as_ref().and_then(|c| c.data.geojson.as_ref().map(|p| c.resolve(p))));
    Ok(AnalyzeContext { panel, out, level, levene, geojson })
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let client = UreqClient::default();
    match cli.command {
        Command::Ingest(args) => {
            let cfg = load_config(&args)?;
            let opts = load_options(&cfg, &args);
            if !args.offline {
                let cache = opts.cache_dir.clone().expect("set by load_options");
                for p in prefetch(&cfg, &client, &cache, &opts.retry)? {
                    info!("fetched {}", p.display());
                }
            }
            let inputs = load_inputs(&cfg, &LoadOptions { allow_fetch: false, ..opts }, None)?;
            let summary = serde_json::json!({
                "gdp_series": inputs.gdp.len(),
                "covariate_series": inputs.covariates.len(),
                "sources": inputs.provenance,
                "excluded_codes": inputs.excluded_codes,
                "dropped_countries": inputs.dropped_countries,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Compute(args) => {
            let cfg = load_config(&args)?;
            let opts = load_options(&cfg, &args);
            let inputs = load_inputs(&cfg, &opts, Some(&client as &dyn HttpGet))?;
            let panel = compute_panel(&cfg, &inputs)?;
            print_files(&write_panel(&cfg.resolved_output_dir(), &panel)?);
        }
        Command::Analyze { analysis } => {
            let files = match analysis {
                Analysis::ClassErrorbars(a) => {
                    let c = analyze_context(&a)?;
                    write_class_errorbars(&c.out, &c.panel, c.level, c.levene)?
                }
                Analysis::FixedCommute(a) => {
                    let c = analyze_context(&a)?;
                    write_fixed_commute(&c.out, &c.panel, c.geojson.as_deref())?
                }
                Analysis::Shifts(a) => {
                    let c = analyze_context(&a)?;
                    write_shifts(&c.out, &c.panel)?
                }
                Analysis::Continents(a) => {
                    let c = analyze_context(&a)?;
                    write_continents(&c.out, &c.panel, c.level)?
                }
            };
            print_files(&files);
        }
        Command::Render(a) => {
            let c = analyze_context(&a)?;
            print_files(&write_charts(&c.out, &c.panel, c.level)?);
        }
        Command::Validate { panel } => {
            let report = validate_panel(&read_panel(&panel)?);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.is_ok() {
                return Err(PipelineError::Invariant(report));
            }
        }
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let opts = load_options(&cfg, &args);
            let summary = run_pipeline(&cfg, &opts, Some(&client as &dyn HttpGet))?;
            info!(
                "{} rows ({} computable) written to {}",
                summary.manifest.rows,
                summary.manifest.computable_rows,
                summary.output_dir.display()
            );
            println!("{}", summary.output_dir.join("run_manifest.json").display());
        }
        Command::Synth { out, countries, seed } => {
            let meta = resilience_core::ingest::default_country_continents();
            let codes: Vec<&str> = meta.keys().map(String::as_str).take(countries).collect();
            let series = synthetic_world(seed, &codes, "NY.GDP.MKTP.KD", 1960, 2020);
            let table = resilience_core::ingest::WdiTable {
                country_names: meta.iter().map(|(k, m)| (k.clone(), m.name.clone())).collect(),
                indicator_names: [("NY.GDP.MKTP.KD".to_string(), "GDP (constant 2010 US$)".to_string())].into(),
                series,
                ..Default::default()
            };
            let file = std::fs::File::create(&out).map_err(|source| PipelineError::Io { path: out.clone(), source })?;
            table
                .write_csv(file)
                .map_err(|source| PipelineError::Ingest { context: format!("writing {}", out.display()), source })?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(report.exit_code as u8)
        }
    }
}
