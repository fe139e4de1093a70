//! Independent reference implementations working on raw value slices; none
//! of the functions in this file call into the library. `criteria` holds
//! the checks that compare the two.

#![allow(dead_code)]

pub mod criteria;

use std::f64::consts::PI;
use std::path::PathBuf;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Term-by-term evaluation of the three components and the scalar index
/// from a reference and a performance segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRecord {
    pub c_r: f64,
    pub t_cr: usize,
    pub m_p: f64,
    pub first_recovery: Option<usize>,
    pub r_en: f64,
    pub r_ec: f64,
    pub r_ev: f64,
    pub direction: i8,
    pub i_r: f64,
}

pub fn oracle(reference: &[f64], performance: &[f64]) -> OracleRecord {
    let k = reference.len();
    let n = k + performance.len();
    let mut c_r = f64::NEG_INFINITY;
    let mut t_cr = 0;
    for (i, &x) in reference.iter().enumerate() {
        if x >= c_r {
            c_r = x;
            t_cr = i + 1;
        }
    }
    let m_p = performance.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // linear scan for the first performance value back at the reference level
    let mut first_recovery = None;
    for (j, &x) in performance.iter().enumerate() {
        if x >= c_r {
            first_recovery = Some(k + j + 1);
            break;
        }
    }
    let h = (n - t_cr) as f64;
    let r_en = match first_recovery {
        None => 0.0,
        Some(_) if h == 1.0 => 1.0,
        Some(idx) => {
            let tau = (idx - t_cr) as f64;
            (h / tau).ln() / h.ln()
        }
    };

    let direction: i8 = if m_p - c_r >= 0.0 { 1 } else { -1 };
    let shift = (m_p - c_r).abs() / c_r.abs().max(m_p.abs());
    let r_ec = (f64::from(direction) * shift).exp();

    let deficit: f64 = performance.iter().map(|x| c_r - x).sum();
    let r_ev = (-deficit / (performance.len() as f64 * (c_r + m_p).abs())).exp();

    let i_r = f64::from(direction) * (r_en * r_en + r_ec * r_ec + r_ev * r_ev).sqrt() / 3f64.sqrt();
    OracleRecord { c_r, t_cr, m_p, first_recovery, r_en, r_ec, r_ev, direction, i_r }
}

/// Gamma at positive integers and half-integers.
pub fn gamma_half(x2: u32) -> f64 {
    // x = x2 / 2
    if x2.is_multiple_of(2) {
        (1..x2 / 2).map(f64::from).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while ((2.0 * x) as u32) < x2 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Student t CDF for integer `df` by integrating the density.
pub fn t_cdf_numeric(t: f64, df: u32) -> f64 {
    let nu = f64::from(df);
    let c = gamma_half(df + 1) / ((nu * PI).sqrt() * gamma_half(df));
    let pdf = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let half = simpson(pdf, 0.0, t.abs(), 20_000);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Bisection inversion of [`t_cdf_numeric`].
pub fn t_quantile_numeric(p: f64, df: u32) -> f64 {
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf_numeric(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper tail of F(1, d2) at `x`, integrating the density after the
/// substitution `x = u^2` that removes the singularity at zero.
pub fn f1_upper_tail_numeric(x: f64, d2: u32) -> f64 {
    let nu = f64::from(d2);
    let c = gamma_half(d2 + 1) / (gamma_half(1) * gamma_half(d2)) * (1.0 / nu).sqrt();
    let integrand = |u: f64| 2.0 * c * (1.0 + u * u / nu).powf(-(1.0 + nu) / 2.0);
    1.0 - simpson(integrand, 0.0, x.sqrt(), 20_000)
}

/// Standard normal quantile by bisection on erfc-free series CDF.
pub fn normal_quantile_numeric(p: f64) -> f64 {
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let cdf = |x: f64| {
        let half = simpson(pdf, 0.0, x.abs(), 20_000);
        if x >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    };
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn compare_trees(actual: &std::path::Path, expected: &std::path::Path) -> Vec<String> {
    let mut diffs = Vec::new();
    let list = |root: &std::path::Path| -> Vec<PathBuf> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
                let p = entry.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push(p.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
        out.sort();
        out
    };
    let (a, e) = (list(actual), list(expected));
    if a != e {
        diffs.push(format!("file lists differ: {a:?} vs {e:?}"));
    }
    for rel in a.iter().filter(|p| e.contains(p)) {
        if std::fs::read(actual.join(rel)).ok() != std::fs::read(expected.join(rel)).ok() {
            diffs.push(format!("{} differs", rel.display()));
        }
    }
    diffs
}
