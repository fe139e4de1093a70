//! Synthetic series with designed recovery behaviour, for oracle and
//! property tests and for generating fixture files.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{AnnualSeries, ShockEvent, Year};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestkitError {
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
}

/// Where performance values sit relative to `c_R` after recovery (or over the
/// whole performance period when the series never recovers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostRegime {
    Above,
    At,
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub base_level: f64,
    /// Geometric growth per year over the reference period.
    pub pre_trend: f64,
    /// Fractional drop below `c_R` in the first performance year.
    pub shock_drop: f64,
    /// Years from `t(c_R)` to the first value back at `c_R`; `None` = never.
    pub recovery_after: Option<usize>,
    pub post_regime: PostRegime,
    /// Total number of years.
    pub length: usize,
    /// Number of years up to and including the shock year.
    pub reference_len: usize,
    pub seed: u64,
    /// Relative noise amplitude in `[0, 0.5]`; never crosses `c_R`.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_first_year")]
    pub first_year: Year,
}

fn default_first_year() -> Year {
    1960
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            base_level: 100.0,
            pre_trend: 0.03,
            shock_drop: 0.1,
            recovery_after: Some(3),
            post_regime: PostRegime::Above,
            length: 30,
            reference_len: 15,
            seed: 0,
            noise: 0.0,
            first_year: default_first_year(),
        }
    }
}

/// What the generator built, known without looking at the values.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub c_r: f64,
    pub t_cr: usize,
    /// Time-index of the first performance value at or above `c_R`.
    pub first_recovery: Option<usize>,
    /// +1 when `M_P >= c_R`, else -1.
    pub direction: i8,
    /// Performance-period mean compared with `c_R`.
    pub mean_side: Ordering,
    pub reference_len: usize,
    pub performance_len: usize,
}

impl GroundTruth {
    /// Recovery delay `tau`.
    pub fn recovery_delay(&self) -> Option<usize> {
        self.first_recovery.map(|i| i - self.t_cr)
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub series: AnnualSeries,
    pub shock: ShockEvent,
    pub truth: GroundTruth,
}

fn infeasible(msg: impl Into<String>) -> TestkitError {
    TestkitError::InfeasibleProfile(msg.into())
}

pub fn generate(profile: &SynthProfile) -> Result<Synthetic, TestkitError> {
    let p = profile;
    let k = p.reference_len;
    if k == 0 || p.length <= k {
        return Err(infeasible("need reference_len >= 1 and length > reference_len"));
    }
    if !(p.base_level > 0.0 && p.base_level.is_finite()) {
        return Err(infeasible("base_level must be positive"));
    }
    if !(p.pre_trend > -1.0 && p.pre_trend.is_finite()) {
        return Err(infeasible("pre_trend must exceed -1"));
    }
    if !(0.0..=0.5).contains(&p.noise) {
        return Err(infeasible("noise must lie in [0, 0.5]"));
    }
    if !(0.0..1.0).contains(&p.shock_drop) || p.shock_drop * (1.0 + p.noise) >= 1.0 {
        return Err(infeasible("shock_drop (with noise) must stay below 1"));
    }
    let n_p = p.length - k;
    let t_cr = if p.pre_trend < 0.0 { 1 } else { k };

    // performance position (1-based) of the first recovered value
    let recovery_pos = match p.recovery_after {
        Some(r) => {
            let pos = (t_cr + r) as i64 - k as i64;
            if pos < 1 || pos > n_p as i64 {
                return Err(infeasible(format!("recovery_after = {r} does not land in the performance period")));
            }
            Some(pos as usize)
        }
        None => {
            if p.post_regime != PostRegime::Below {
                return Err(infeasible("a series that never recovers must stay below c_R"));
            }
            None
        }
    };
    let pre_recovery_steps = recovery_pos.map_or(n_p, |pos| pos - 1);
    if pre_recovery_steps > 0 && p.shock_drop <= 0.0 {
        return Err(infeasible("a delayed or absent recovery needs shock_drop > 0"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let jitter = |rng: &mut ChaCha8Rng| if p.noise > 0.0 { rng.random::<f64>() * p.noise } else { 0.0 };

    let mut values = Vec::with_capacity(p.length);
    let c_r = p.base_level * (1.0 + p.pre_trend).powi(t_cr as i32 - 1);
    for i in 1..=k {
        let v = p.base_level * (1.0 + p.pre_trend).powi(i as i32 - 1);
        values.push(if i == t_cr { c_r } else { v * (1.0 - jitter(&mut rng)) });
    }

    let mut deficits = 0.0;
    for j in 1..=pre_recovery_steps {
        let weight = match recovery_pos {
            Some(pos) if pos > 1 => (pos - j) as f64 / (pos - 1) as f64,
            _ => 1.0,
        };
        let d = p.shock_drop * weight * (1.0 + jitter(&mut rng));
        deficits += d;
        values.push(c_r * (1.0 - d));
    }
    if let Some(pos) = recovery_pos {
        let post = n_p - pos + 1;
        for j in 0..post {
            let v = match p.post_regime {
                PostRegime::At => c_r,
                PostRegime::Above => {
                    let margin = 0.01 * (1.0 + jitter(&mut rng));
                    c_r * (1.0 + deficits / post as f64 + margin)
                }
                PostRegime::Below if j == 0 => c_r,
                PostRegime::Below => {
                    let d = p.shock_drop.max(0.01) * (1.0 + jitter(&mut rng));
                    c_r * (1.0 - d.min(0.99))
                }
            };
            values.push(v);
        }
    }

    let mean_side = match (recovery_pos, p.post_regime) {
        (Some(_), PostRegime::Above) => Ordering::Greater,
        (Some(1), PostRegime::At) => Ordering::Equal,
        (Some(1), PostRegime::Below) if n_p == 1 => Ordering::Equal,
        _ => Ordering::Less,
    };
    let truth = GroundTruth {
        c_r,
        t_cr,
        first_recovery: recovery_pos.map(|pos| k + pos),
        direction: if recovery_pos.is_some() { 1 } else { -1 },
        mean_side,
        reference_len: k,
        performance_len: n_p,
    };
    let opt: Vec<Option<f64>> = values.into_iter().map(Some).collect();
    let series =
        AnnualSeries::from_values("SYN", "SYNTH", p.first_year, &opt).map_err(|e| infeasible(e.to_string()))?;
    let shock = ShockEvent::new("synthetic shock", p.first_year + k as Year - 1, "Synthetic");
    Ok(Synthetic { series, shock, truth })
}

/// A random feasible profile. Reference lengths are at least 3 and
/// performance lengths at least 2, matching the default split policy.
pub fn random_profile<R: Rng>(rng: &mut R) -> SynthProfile {
    let reference_len = rng.random_range(3..=40);
    let length = reference_len + rng.random_range(2..=40);
    let pre_trend = match rng.random_range(0..10) {
        0 => 0.0,
        1 | 2 => -rng.random_range(0.001..0.05),
        _ => rng.random_range(0.001..0.08),
    };
    let t_cr = if pre_trend < 0.0 { 1 } else { reference_len };
    let n_p = length - reference_len;
    let (recovery_after, post_regime) = if rng.random_bool(0.3) {
        (None, PostRegime::Below)
    } else {
        let pos = rng.random_range(1..=n_p);
        let regime = match rng.random_range(0..3) {
            0 => PostRegime::Above,
            1 => PostRegime::At,
            _ => PostRegime::Below,
        };
        (Some(reference_len + pos - t_cr), regime)
    };
    SynthProfile {
        base_level: 10f64.powf(rng.random_range(0.0..12.0)),
        pre_trend,
        shock_drop: rng.random_range(0.01..0.5),
        recovery_after,
        post_regime,
        length,
        reference_len,
        seed: rng.random(),
        noise: if rng.random_bool(0.5) { rng.random_range(0.0..0.3) } else { 0.0 },
        first_year: 1960,
    }
}

/// `count` seeded synthetic cases.
pub fn synthetic_cases(seed: u64, count: usize) -> Vec<(SynthProfile, Synthetic)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let profile = random_profile(&mut rng);
            let synth = generate(&profile).expect("random profiles are feasible");
            (profile, synth)
        })
        .collect()
}

/// Gap-free GDP-like random walks, one per country code, rounded to whole
/// units.
pub fn synthetic_world(
    seed: u64,
    codes: &[&str],
    indicator: &str,
    first_year: Year,
    last_year: Year,
) -> Vec<AnnualSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    codes
        .iter()
        .map(|code| {
            let mut level = 10f64.powf(rng.random_range(8.5..13.0));
            let drift = rng.random_range(0.0..0.05);
            let vol = rng.random_range(0.01..0.08);
            let values: Vec<Option<f64>> = (first_year..=last_year)
                .map(|_| {
                    let shock: f64 = rng.random_range(-1.0..1.0) * vol * 1.7;
                    level *= (1.0 + drift + shock).max(0.5);
                    Some(level.round().max(1.0))
                })
                .collect();
            AnnualSeries::from_values(*code, indicator, first_year, &values).expect("finite and non-empty")
        })
        .collect()
}
