//! Invariant checks over a built panel. Every violation names the row it
//! was found on.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::index::{classify, scalar_index};
use crate::panel::{Panel, RowOutcome};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// 0-based position in `panel.rows`; `None` for panel-level checks.
    pub row: Option<usize>,
    pub country: Option<String>,
    pub shock: Option<String>,
    pub check: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_panel(panel: &Panel) -> ValidationReport {
    let mut out = Vec::new();
    let mut at = |i: Option<usize>, check: &str, message: String| {
        let row = i.map(|i| &panel.rows[i]);
        out.push(Violation {
            row: i,
            country: row.map(|r| r.country_code.clone()),
            shock: row.map(|r| r.shock_name.clone()),
            check: check.to_string(),
            message,
        });
    };

    let shock_years: BTreeMap<&str, i32> =
        panel.config_snapshot.shocks.iter().map(|s| (s.name.as_str(), s.reference_year)).collect();
    let expected_codes: BTreeSet<&str> = panel.covariate_codes.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();

    for (i, row) in panel.rows.iter().enumerate() {
        if !seen.insert((row.country_code.as_str(), row.shock_name.as_str())) {
            at(Some(i), "unique_pair", "duplicate (country, shock) pair".into());
        }
        match shock_years.get(row.shock_name.as_str()) {
            None => at(Some(i), "known_shock", "shock not in the configured list".into()),
            Some(&y) if y != row.shock_year => {
                at(Some(i), "shock_year", format!("row year {} but configured year {y}", row.shock_year))
            }
            _ => {}
        }
        let codes: BTreeSet<&str> = row.covariates.keys().map(String::as_str).collect();
        if codes != expected_codes {
            at(Some(i), "covariate_keys", format!("covariates {codes:?}, expected {expected_codes:?}"));
        }
        if let Some(w) = i.checked_sub(1).map(|j| &panel.rows[j]) {
            let prev = (&w.country_code, w.shock_year, &w.shock_name);
            if prev > (&row.country_code, row.shock_year, &row.shock_name) {
                at(Some(i), "ordering", "rows not ordered by country, then shock year".into());
            }
        }

        let RowOutcome::Computed(rec) = &row.outcome else { continue };
        let v = &rec.vector;
        if ![v.r_en, v.r_ec, v.r_ev, rec.i_r].iter().all(|x| x.is_finite()) {
            at(Some(i), "finite", "non-finite component".into());
            continue;
        }
        if !(-TOL..=1.0 + TOL).contains(&v.r_en) {
            at(Some(i), "r_en_range", format!("r_en = {} outside [0, 1]", v.r_en));
        }
        if !(1.0 / E - TOL..=E + TOL).contains(&v.r_ec) {
            at(Some(i), "r_ec_range", format!("r_ec = {} outside [1/e, e]", v.r_ec));
        }
        if v.r_ev <= 0.0 {
            at(Some(i), "r_ev_positive", format!("r_ev = {} not positive", v.r_ev));
        }
        if v.direction != 1 && v.direction != -1 {
            at(Some(i), "direction", format!("direction {} not +-1", v.direction));
        }
        let expected = scalar_index(v);
        if (rec.i_r - expected).abs() > TOL {
            at(Some(i), "i_r_norm", format!("i_r = {} but the scaled norm gives {expected}", rec.i_r));
        }
        if (rec.i_r < 0.0) != (v.direction < 0) {
            at(Some(i), "i_r_sign", format!("i_r = {} with direction {}", rec.i_r, v.direction));
        }
        match classify(rec.i_r) {
            Ok(c) if c == rec.class => {}
            Ok(c) => at(Some(i), "class", format!("class {} but i_r = {} gives {c}", rec.class, rec.i_r)),
            Err(e) => at(Some(i), "class", e.to_string()),
        }
    }

    let countries = panel.countries().len();
    let shocks = shock_years.len();
    if panel.rows.len() != countries * shocks {
        at(None, "row_count", format!("{} rows for {countries} countries x {shocks} shocks", panel.rows.len()));
    }
    ValidationReport { rows_checked: panel.rows.len(), violations: out }
}
