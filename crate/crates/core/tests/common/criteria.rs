//! One function per acceptance criterion. Each returns a short detail line
//! on success and a description of the first failure otherwise; the
//! regular test files and the `acceptance` harness share them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use resilience_core::config::RunConfig;
use resilience_core::geo::{class_share_tabulation, fixed_commute_status, shift_pyramid, TrajectoryStatus};
use resilience_core::index::{
    classify, compute_record, ecological_component, engineering_component, evolutionary_component,
    first_recovery_index, ResilienceClass,
};
use resilience_core::pipeline::{meta_from_panel, run_pipeline, LoadOptions};
use resilience_core::series::{split_at_shock, LevelMode, ShockWindow, SplitPolicy};
use resilience_core::stats::{confidence_interval, levene_test, t_quantile, LeveneCenter};
use resilience_core::testkit::synthetic_cases;
use resilience_core::{Panel, SignConvention};

use super::*;

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn window(reference: &[f64], performance: &[f64]) -> ShockWindow {
    ShockWindow::from_segments(2000, reference, performance, LevelMode::Max).expect("non-empty segments")
}

/// Reference ending in its maximum (100) at index `t_cr`, then performance
/// values at 80 except for one 100 at `recovery_at`.
fn engineering_window(t_cr: usize, n: usize, recovery_at: Option<usize>) -> ShockWindow {
    let mut reference = vec![90.0; t_cr];
    reference[t_cr - 1] = 100.0;
    let performance: Vec<f64> = (t_cr + 1..=n).map(|i| if Some(i) == recovery_at { 100.0 } else { 80.0 }).collect();
    window(&reference, &performance)
}

pub fn criterion_1_component_exactness() -> Outcome {
    let tol = 1e-12;
    let immediate = engineering_component(&engineering_window(2, 10, Some(3)));
    ensure!(immediate == 1.0, "tau = 1 gave {immediate}");
    let never = engineering_component(&engineering_window(2, 10, None));
    ensure!(never == 0.0, "no recovery gave {never}");
    let worked = engineering_component(&engineering_window(4, 12, Some(8)));
    ensure!(close(worked, 2f64.ln() / 8f64.ln(), tol), "H=8, tau=4 gave {worked}");
    ensure!(close(worked, 1.0 / 3.0, tol), "H=8, tau=4 gave {worked}, not 1/3");

    let eco = |c_r: f64, m_p: f64| ecological_component(&window(&[c_r], &[m_p]), SignConvention::Corrected);
    let cases = [(100.0, 100.0, 1.0), (100.0, 150.0, (1.0f64 / 3.0).exp()), (150.0, 100.0, (-1.0f64 / 3.0).exp())];
    for (c_r, m_p, want) in cases {
        let got = eco(c_r, m_p).map_err(|e| e.to_string())?;
        ensure!(close(got, want, tol), "ecological({c_r}, {m_p}) = {got}, want {want}");
    }

    let evo = |perf: &[f64]| evolutionary_component(&window(&[100.0], perf));
    let cases: [(&[f64], f64); 3] =
        [(&[100.0, 100.0, 100.0], 1.0), (&[80.0, 120.0], 1.0), (&[110.0, 120.0, 130.0], (60.0f64 / 690.0).exp())];
    for (perf, want) in cases {
        let got = evo(perf).map_err(|e| e.to_string())?;
        ensure!(close(got, want, tol), "evolutionary({perf:?}) = {got}, want {want}");
    }
    Ok("engineering 1/0/(1/3), ecological 1/e^(1/3)/e^(-1/3), evolutionary 1/1/e^(60/690)".into())
}

pub fn criterion_2_oracle_equivalence() -> Outcome {
    let policy = SplitPolicy { min_ref: 1, min_perf: 1, level_mode: LevelMode::Max };
    let cases = synthetic_cases(20_240_601, 1000);
    for (i, (_, synth)) in cases.iter().enumerate() {
        let k = synth.shock.reference_year;
        let reference: Vec<f64> = synth.series.observations().filter(|&(y, _)| y <= k).map(|(_, v)| v).collect();
        let performance: Vec<f64> = synth.series.observations().filter(|&(y, _)| y > k).map(|(_, v)| v).collect();
        let expected = oracle(&reference, &performance);

        let w = split_at_shock(&synth.series, &synth.shock, &policy).map_err(|e| format!("case {i}: {e:?}"))?;
        let rec = compute_record(&w, SignConvention::Corrected).map_err(|e| format!("case {i}: {e}"))?;

        ensure!(
            first_recovery_index(&w) == expected.first_recovery,
            "case {i}: recovery index {:?} vs scan {:?}",
            first_recovery_index(&w),
            expected.first_recovery
        );
        ensure!(
            synth.truth.first_recovery == expected.first_recovery,
            "case {i}: designed recovery {:?} vs scan {:?}",
            synth.truth.first_recovery,
            expected.first_recovery
        );
        ensure!(
            rec.vector.direction == synth.truth.direction,
            "case {i}: direction {} vs designed {}",
            rec.vector.direction,
            synth.truth.direction
        );
        let v = &rec.vector;
        for (name, got, want) in [
            ("r_en", v.r_en, expected.r_en),
            ("r_ec", v.r_ec, expected.r_ec),
            ("r_ev", v.r_ev, expected.r_ev),
            ("i_r", rec.i_r, expected.i_r),
        ] {
            ensure!(close(got, want, 1e-9), "case {i}: {name} = {got}, oracle {want}");
        }
    }
    Ok(format!("{} synthetic series", cases.len()))
}

pub fn int_window() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let seg =
        || prop::collection::vec(1u32..=200, 1..12).prop_map(|v| v.into_iter().map(f64::from).collect::<Vec<_>>());
    (seg(), seg())
}

pub fn real_window() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let seg = || prop::collection::vec(1e-3f64..1e9, 1..25);
    (seg(), seg())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

pub fn prop_scaling(reference: &[f64], performance: &[f64]) -> Result<(), TestCaseError> {
    let base =
        compute_record(&window(reference, performance), SignConvention::Corrected).map_err(|e| fail(e.to_string()))?;
    let base_w = window(reference, performance);
    for lambda in [0.001, 1.0, 1000.0] {
        let r: Vec<f64> = reference.iter().map(|x| x * lambda).collect();
        let p: Vec<f64> = performance.iter().map(|x| x * lambda).collect();
        let w = window(&r, &p);
        let rec = compute_record(&w, SignConvention::Corrected).map_err(|e| fail(e.to_string()))?;
        if w.t_cr() != base_w.t_cr() || first_recovery_index(&w) != first_recovery_index(&base_w) {
            return Err(fail(format!("lambda {lambda}: time indices moved")));
        }
        if rec.vector.direction != base.vector.direction {
            return Err(fail(format!("lambda {lambda}: direction changed")));
        }
        for (got, want) in [
            (rec.vector.r_en, base.vector.r_en),
            (rec.vector.r_ec, base.vector.r_ec),
            (rec.vector.r_ev, base.vector.r_ev),
            (rec.i_r, base.i_r),
        ] {
            if !close(got, want, 1e-12 * want.abs().max(1.0)) {
                return Err(fail(format!("lambda {lambda}: {got} vs {want}")));
            }
        }
        // a class may only differ when i_r sits on a boundary to rounding precision
        let on_boundary = [0.0, 1.0].iter().any(|b| (base.i_r - b).abs() < 1e-12);
        if rec.class != base.class && !on_boundary {
            return Err(fail(format!("lambda {lambda}: class {} vs {}", rec.class, base.class)));
        }
    }
    Ok(())
}

pub fn prop_ranges(reference: &[f64], performance: &[f64]) -> Result<(), TestCaseError> {
    let rec =
        compute_record(&window(reference, performance), SignConvention::Corrected).map_err(|e| fail(e.to_string()))?;
    let v = rec.vector;
    let e = std::f64::consts::E;
    if !(0.0..=1.0).contains(&v.r_en) {
        return Err(fail(format!("r_en {}", v.r_en)));
    }
    if !(1.0 / e..=e).contains(&v.r_ec) {
        return Err(fail(format!("r_ec {}", v.r_ec)));
    }
    if v.r_ev <= 0.0 {
        return Err(fail(format!("r_ev {}", v.r_ev)));
    }
    Ok(())
}

pub fn prop_sign_class(reference: &[f64], performance: &[f64]) -> Result<(), TestCaseError> {
    let w = window(reference, performance);
    let rec = compute_record(&w, SignConvention::Corrected).map_err(|e| fail(e.to_string()))?;
    let low = classify(rec.i_r).map_err(|e| fail(e.to_string()))? == ResilienceClass::Low;
    if low != (w.m_p() < w.c_r()) {
        return Err(fail(format!("class {} with M_P {} and c_R {}", rec.class, w.m_p(), w.c_r())));
    }
    Ok(())
}

/// Exact on integer-valued segments, where the deficit sum is exact.
pub fn prop_mean_law(reference: &[f64], performance: &[f64]) -> Result<(), TestCaseError> {
    let w = window(reference, performance);
    let r_ev = evolutionary_component(&w).map_err(|e| fail(e.to_string()))?;
    let total: f64 = performance.iter().sum();
    let target = w.c_r() * performance.len() as f64;
    let ok = match total.partial_cmp(&target).expect("finite") {
        std::cmp::Ordering::Greater => r_ev > 1.0,
        std::cmp::Ordering::Equal => r_ev == 1.0,
        std::cmp::Ordering::Less => r_ev < 1.0,
    };
    if !ok {
        return Err(fail(format!("r_ev {r_ev} with mean {} and c_R {}", total / performance.len() as f64, w.c_r())));
    }
    Ok(())
}

pub fn prop_recovery_monotone(horizon: usize, t_cr: usize, tau1: usize, tau2: usize) -> Result<(), TestCaseError> {
    let (a, b) = (tau1.min(tau2), tau1.max(tau2));
    if a == b {
        return Ok(());
    }
    let n = t_cr + horizon;
    let e1 = engineering_component(&engineering_window(t_cr, n, Some(t_cr + a)));
    let e2 = engineering_component(&engineering_window(t_cr, n, Some(t_cr + b)));
    if e1 <= e2 {
        return Err(fail(format!("H={horizon}: tau {a} -> {e1}, tau {b} -> {e2}")));
    }
    Ok(())
}

pub fn prop_ecological_monotone(c_r: f64, m1: f64, m2: f64) -> Result<(), TestCaseError> {
    let (lo, hi) = (m1.min(m2), m1.max(m2));
    let e = |m: f64| ecological_component(&window(&[c_r], &[m]), SignConvention::Corrected).unwrap();
    if e(lo) > e(hi) {
        return Err(fail(format!("c_R {c_r}: r_ec({lo}) = {} > r_ec({hi}) = {}", e(lo), e(hi))));
    }
    Ok(())
}

fn run_cases<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

type WindowCheck = fn(&[f64], &[f64]) -> Result<(), TestCaseError>;

pub fn criterion_3_invariants(cases: u32) -> Outcome {
    let named: [(&str, WindowCheck); 4] = [
        ("scaling", prop_scaling),
        ("ranges", prop_ranges),
        ("sign/class", prop_sign_class),
        ("mean law", prop_mean_law),
    ];
    for (name, check) in named {
        run_cases(cases, int_window(), |(r, p)| check(&r, &p)).map_err(|e| format!("{name} (integer): {e}"))?;
        if name != "mean law" {
            run_cases(cases, real_window(), |(r, p)| check(&r, &p)).map_err(|e| format!("{name} (real): {e}"))?;
        }
    }
    let monotone = (2usize..60, 1usize..10).prop_flat_map(|(h, t)| (Just(h), Just(t), 1..=h, 1..=h));
    run_cases(cases, monotone, |(h, t, a, b)| prop_recovery_monotone(h, t, a, b))
        .map_err(|e| format!("recovery monotonicity: {e}"))?;
    run_cases(cases, (1e-3f64..1e9, 1e-3f64..1e9, 1e-3f64..1e9), |(c, a, b)| prop_ecological_monotone(c, a, b))
        .map_err(|e| format!("ecological monotonicity: {e}"))?;
    Ok(format!("{cases} windows per property, zero violations"))
}

pub fn criterion_4_statistics() -> Outcome {
    let q = t_quantile(0.975, 9.0).map_err(|e| e.to_string())?;
    let oracle_q = t_quantile_numeric(0.975, 9);
    ensure!(close(q, oracle_q, 1e-5), "t_quantile(0.975, 9) = {q}, oracle {oracle_q}");

    let values: Vec<f64> = (1..=10).map(f64::from).collect();
    let ci = confidence_interval(&values, 0.95).map_err(|e| e.to_string())?;
    let (mean, sd) = mean_sd(&values);
    let half = oracle_q * sd / 10f64.sqrt();
    let (lo, hi) = (ci.ci_low.unwrap(), ci.ci_high.unwrap());
    ensure!(
        close(lo, mean - half, 1e-4) && close(hi, mean + half, 1e-4),
        "CI [{lo}, {hi}] vs hand [{}, {}]",
        mean - half,
        mean + half
    );

    let groups = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 2.0, 3.0, 3.0]];
    let w = levene_test(&groups, LeveneCenter::Mean).map_err(|e| e.to_string())?;
    ensure!(w.w_statistic == 3.0, "Levene W = {}", w.w_statistic);
    ensure!((w.df1, w.df2) == (1, 6), "df ({}, {})", w.df1, w.df2);

    for (shift, scale) in [(10.0, 1.0), (-3.0, 1.0), (0.0, 4.0), (7.0, 0.25)] {
        let moved: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x * scale + shift).collect()).collect();
        let w2 = levene_test(&moved, LeveneCenter::Mean).map_err(|e| e.to_string())?;
        ensure!(w2.w_statistic == w.w_statistic, "W {} after x*{scale}+{shift}, was {}", w2.w_statistic, w.w_statistic);
    }
    Ok(format!("t(0.975, 9) = {q:.8}; CI [{lo:.5}, {hi:.5}]; W = 3"))
}

pub fn fixture_dir() -> PathBuf {
    fixtures().join("synthetic5x3")
}

/// Full pipeline on the 5x3 fixture into `out`, manifest normalised so the
/// tree compares across machines and runs.
pub fn run_fixture(out: &Path) -> Result<(), String> {
    let mut cfg = RunConfig::load(&fixture_dir().join("config.json")).map_err(|e| e.to_string())?;
    cfg.output_dir = out.to_path_buf();
    let opts = LoadOptions { cache_dir: None, allow_fetch: false, ..LoadOptions::default() };
    run_pipeline(&cfg, &opts, None).map_err(|e| e.to_string())?;
    normalize_manifest(&out.join("run_manifest.json"));
    Ok(())
}

pub fn normalize_manifest(path: &Path) {
    let text = std::fs::read_to_string(path).expect("manifest written");
    let mut v: serde_json::Value = serde_json::from_str(&text).expect("manifest is JSON");
    v["generated_at"] = "normalized".into();
    v["config"]["output_dir"] = "out".into();
    std::fs::write(path, serde_json::to_string_pretty(&v).unwrap() + "\n").unwrap();
}

pub fn golden_dir() -> PathBuf {
    fixture_dir().join("golden")
}

pub fn criterion_5_panel_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_fixture(&a)?;
    run_fixture(&b)?;
    let panel_text = std::fs::read_to_string(a.join("panel.json")).map_err(|e| e.to_string())?;
    let panel = Panel::from_json_str(&panel_text).map_err(|e| e.to_string())?;
    ensure!(panel.rows.len() == 15, "{} rows", panel.rows.len());
    let missing: Vec<String> = panel
        .rows
        .iter()
        .filter_map(|r| r.not_computable_reason().map(|why| format!("{} {} {why}", r.country_code, r.shock_year)))
        .collect();
    ensure!(missing == ["DDD 2007 gap_at_shock", "EEE 1980 insufficient_reference"], "not computable: {missing:?}");
    let diffs = compare_trees(&a, &b);
    ensure!(diffs.is_empty(), "runs differ: {diffs:?}");
    let diffs = compare_trees(&a, &golden_dir());
    ensure!(diffs.is_empty(), "golden mismatch: {diffs:?}");
    Ok("15 rows, 2 designed gaps, identical reruns, golden match".into())
}

#[derive(serde::Deserialize)]
struct GeoFixture {
    shock_years: Vec<i32>,
    countries: Vec<GeoCountry>,
}

#[derive(serde::Deserialize)]
struct GeoCountry {
    code: String,
    continent: resilience_core::series::Continent,
    classes: Vec<Option<ResilienceClass>>,
}

/// Builds a panel whose rows carry exactly the given classes.
pub fn class_panel(
    shock_years: &[i32],
    countries: &[(String, resilience_core::series::Continent, Vec<Option<ResilienceClass>>)],
) -> Panel {
    use resilience_core::index::{ResilienceRecord, ResilienceVector};
    use resilience_core::panel::{PanelConfigSnapshot, PanelRow, RowOutcome};
    use resilience_core::series::{NotComputableReason, ShockEvent};

    let record = |class: ResilienceClass| {
        let (vector, i_r) = match class {
            ResilienceClass::High => (ResilienceVector { r_en: 1.0, r_ec: 1.0, r_ev: 1.0, direction: 1 }, 1.0),
            ResilienceClass::Medium => {
                (ResilienceVector { r_en: 0.0, r_ec: 1.0, r_ev: 1.0, direction: 1 }, (2.0f64 / 3.0).sqrt())
            }
            ResilienceClass::Low => {
                (ResilienceVector { r_en: 0.0, r_ec: 1.0, r_ev: 1.0, direction: -1 }, -(2.0f64 / 3.0).sqrt())
            }
        };
        RowOutcome::Computed(ResilienceRecord { vector, i_r, class })
    };
    let mut rows = Vec::new();
    for (code, continent, classes) in countries {
        for (&year, class) in shock_years.iter().zip(classes) {
            rows.push(PanelRow {
                country_code: code.clone(),
                shock_name: format!("shock {year}"),
                shock_year: year,
                outcome: class
                    .map(record)
                    .unwrap_or(RowOutcome::NotComputable { reason: NotComputableReason::InsufficientPerformance }),
                covariates: Default::default(),
                continent: *continent,
                performance_years: None,
            });
        }
    }
    rows.sort_by(|a, b| (&a.country_code, a.shock_year).cmp(&(&b.country_code, b.shock_year)));
    Panel {
        rows,
        covariate_codes: Vec::new(),
        provenance: Vec::new(),
        config_snapshot: PanelConfigSnapshot {
            shocks: shock_years.iter().map(|&y| ShockEvent::new(format!("shock {y}"), y, "Global")).collect(),
            policy: SplitPolicy::default(),
            sign_convention: SignConvention::Corrected,
            covariate_alignment: None,
        },
        dropped_countries: Vec::new(),
    }
}

pub fn geo8_panel() -> Panel {
    let text = std::fs::read_to_string(fixtures().join("geo8.json")).expect("geo8 fixture");
    let fx: GeoFixture = serde_json::from_str(&text).expect("geo8 parses");
    let countries: Vec<_> = fx.countries.into_iter().map(|c| (c.code, c.continent, c.classes)).collect();
    class_panel(&fx.shock_years, &countries)
}

pub fn criterion_6_geo() -> Outcome {
    use resilience_core::series::Continent::{Asia, Europe};
    use ResilienceClass::{High, Low, Medium};
    use TrajectoryStatus::{Commute, Fixed, Insufficient};

    let panel = geo8_panel();
    let trajectories = fixed_commute_status(&panel);
    let got: Vec<(&str, TrajectoryStatus, Option<ResilienceClass>)> =
        trajectories.iter().map(|t| (t.country_code.as_str(), t.status, t.representative_class())).collect();
    let want = vec![
        ("ASA", Fixed, Some(Low)),
        ("ASB", Fixed, Some(High)),
        ("ASC", Commute, Some(Medium)),
        ("ASD", Insufficient, None),
        ("EUA", Fixed, Some(High)),
        ("EUB", Fixed, Some(Medium)),
        ("EUC", Commute, Some(Medium)),
        ("EUD", Commute, Some(High)),
    ];
    ensure!(got == want, "trajectories {got:?}");

    let shifts = shift_pyramid(&panel, &meta_from_panel(&panel)).map_err(|e| e.to_string())?;
    ensure!(shifts.iter().all(|s| s.shock_year != 1990), "record at the earliest shock");
    let cells: Vec<(_, i32, i64)> = shifts.iter().map(|s| (s.continent, s.shock_year, s.net_shift)).collect();
    ensure!(cells == [(Asia, 2000, 0), (Asia, 2010, 1), (Europe, 2000, 2), (Europe, 2010, 1)], "shifts {cells:?}");

    let tab = class_share_tabulation(&trajectories, &meta_from_panel(&panel)).map_err(|e| e.to_string())?;
    ensure!(
        (tab.fixed.population, tab.commute.population, tab.insufficient) == (4, 3, 1),
        "partition {} / {} / {}",
        tab.fixed.population,
        tab.commute.population,
        tab.insufficient
    );
    ensure!(tab.fixed.population_share() == Some(50.0), "fixed share");
    ensure!(tab.commute.population_share() == Some(37.5), "commute share");
    let expected_rows = [
        (&tab.fixed, Europe, [0.0, 50.0, 50.0]),
        (&tab.fixed, Asia, [50.0, 0.0, 50.0]),
        (&tab.commute, Europe, [0.0, 50.0, 50.0]),
        (&tab.commute, Asia, [0.0, 100.0, 0.0]),
    ];
    for (table, continent, want) in expected_rows {
        let row = table.within_continent(continent).map(|v| v.unwrap_or(f64::NAN));
        ensure!(row == want, "{:?} {continent}: {row:?}", table.status);
        let sum: f64 = row.iter().sum();
        ensure!(close(sum, 100.0, 0.01), "{:?} {continent} sums to {sum}", table.status);
    }
    for table in [&tab.fixed, &tab.commute] {
        for class in ResilienceClass::ALL {
            let col: Vec<f64> = table.counts.keys().filter_map(|&c| table.within_class(c, class)).collect();
            let sum: f64 = col.iter().sum();
            ensure!(col.is_empty() || close(sum, 100.0, 0.01), "{:?} {class} column sums to {sum}", table.status);
        }
    }
    let globals = [Low, Medium, High].map(|c| (tab.fixed.global_share(c), tab.commute.global_share(c)));
    ensure!(
        globals == [(Some(12.5), Some(0.0)), (Some(12.5), Some(25.0)), (Some(25.0), Some(12.5))],
        "global shares {globals:?}"
    );
    Ok("8 countries: 4 fixed / 3 commute / 1 insufficient; rounding, pyramid and shares as hand-counted".into())
}

/// Real-data checks; `panel` comes from a user-supplied snapshot.
pub fn criterion_7_real_data(panel: &Panel, runtime_s: f64) -> Outcome {
    let n = panel.rows.len();
    let mut report = vec![format!("{n} rows")];
    let mut failures = Vec::new();
    if n != 2800 {
        failures.push(format!("panel size {n} != 2800"));
    }
    let classes: Vec<ResilienceClass> = panel.rows.iter().filter_map(|r| r.class()).collect();
    let total = classes.len() as f64;
    let odds = [1.0, 14.0, 40.0];
    for (i, class) in ResilienceClass::ALL.into_iter().enumerate() {
        let share = 100.0 * classes.iter().filter(|&&c| c == class).count() as f64 / total;
        let target = 100.0 * odds[i] / 55.0;
        report.push(format!("{class} {share:.1}% (target {target:.1}%)"));
        if (share - target).abs() > 5.0 {
            failures.push(format!("{class} share {share:.1}% vs {target:.1}%"));
        }
    }
    let trajectories = fixed_commute_status(panel);
    let countries = trajectories.len() as f64;
    for (status, target) in [(TrajectoryStatus::Fixed, 37.5), (TrajectoryStatus::Commute, 59.0)] {
        let share = 100.0 * trajectories.iter().filter(|t| t.status == status).count() as f64 / countries;
        report.push(format!("{} {share:.1}% (target {target}%)", status.label()));
        if (share - target).abs() > 5.0 {
            failures.push(format!("{} share {share:.1}% vs {target}%", status.label()));
        }
    }
    // each component's class means should rise Low -> Medium -> High
    for (name, pick) in [
        ("r_en", (|r: &resilience_core::index::ResilienceRecord| r.vector.r_en) as fn(&_) -> f64),
        ("r_ec", |r| r.vector.r_ec),
        ("r_ev", |r| r.vector.r_ev),
    ] {
        let means: Vec<f64> = ResilienceClass::ALL
            .into_iter()
            .map(|c| {
                let v: Vec<f64> =
                    panel.rows.iter().filter_map(|r| r.record()).filter(|r| r.class == c).map(pick).collect();
                v.iter().sum::<f64>() / v.len().max(1) as f64
            })
            .collect();
        if !(means[0] <= means[1] && means[1] <= means[2]) {
            failures.push(format!("{name} class means {means:?} not ordered"));
        }
    }
    if runtime_s >= 5.0 {
        failures.push(format!("runtime {runtime_s:.2}s"));
    }
    report.push(format!("runtime {runtime_s:.3}s"));
    if failures.is_empty() {
        Ok(report.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}
