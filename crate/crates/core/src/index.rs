//! The three resilience components, their signed 1D aggregate and the
//! three-class grouping.
//!
//! * engineering: recovery speed, `log(H / tau) / log(H)` with
//!   `H = n - t_cR` and `tau` the delay from `t_cR` to the first performance
//!   value back at `c_R`; 0 without recovery.
//! * ecological: vertical shift, `exp(|M_P - c_R| / max(|c_R|, |M_P|))`
//!   raised to the adjusted sign of the shift.
//! * evolutionary: adaptability, `exp(-sum(c_R - x_i) / (n_P * |c_R + M_P|))`.
//! * scalar: `sign * ||(r_en, r_ec, r_ev)||_2 / sqrt(3)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::ShockWindow;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum IndexError {
    #[error("degenerate levels: c_R = {c_r}, M_P = {m_p}")]
    DegenerateLevels { c_r: f64, m_p: f64 },
    #[error("index value is not finite: {0}")]
    NonFinite(f64),
}

/// Which operand order feeds the adjusted sign of the ecological exponent and
/// of the scalar index.
///
/// `Corrected` uses `sgn*(M_P - c_R)`: an upward shift gives `r_ec > 1` and a
/// positive scalar. `AsPrinted` uses `sgn*(c_R - M_P)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    #[default]
    Corrected,
    AsPrinted,
}

/// Signum with zero mapped to +1.
pub fn adjusted_sign(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResilienceClass {
    Low,
    Medium,
    High,
}

impl ResilienceClass {
    pub const ALL: [ResilienceClass; 3] = [Self::Low, Self::Medium, Self::High];

    /// Low = 1, Medium = 2, High = 3.
    pub fn ordinal(self) -> u8 {
        match self {
            Self::Low => 1,
            Self::Medium => 2,
            Self::High => 3,
        }
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        match ordinal {
            1 => Some(Self::Low),
            2 => Some(Self::Medium),
            3 => Some(Self::High),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Low => "Low",
            Self::Medium => "Medium",
            Self::High => "High",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == label)
    }
}

impl fmt::Display for ResilienceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResilienceVector {
    pub r_en: f64,
    pub r_ec: f64,
    pub r_ev: f64,
    /// +1 or -1.
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResilienceRecord {
    pub vector: ResilienceVector,
    pub i_r: f64,
    pub class: ResilienceClass,
}

/// First performance time-index whose value reaches `c_R`.
pub fn first_recovery_index(window: &ShockWindow) -> Option<usize> {
    let c_r = window.c_r();
    window.performance_segment().iter().find(|&&(_, v)| v >= c_r).map(|&(i, _)| i)
}

pub fn engineering_component(window: &ShockWindow) -> f64 {
    let horizon = window.n() - window.t_cr();
    let Some(recovered_at) = first_recovery_index(window) else {
        return 0.0;
    };
    let tau = recovered_at - window.t_cr();
    if horizon == 1 {
        // log(H) = 0; the only possible recovery is immediate
        return if tau == 1 { 1.0 } else { 0.0 };
    }
    if tau == 1 {
        return 1.0;
    }
    let h = horizon as f64;
    (h / tau as f64).ln() / h.ln()
}

/// Sign of the vertical shift under `convention`.
pub fn shift_direction(window: &ShockWindow, convention: SignConvention) -> i8 {
    match convention {
        SignConvention::Corrected => adjusted_sign(window.m_p() - window.c_r()),
        SignConvention::AsPrinted => adjusted_sign(window.c_r() - window.m_p()),
    }
}

pub fn ecological_component(window: &ShockWindow, convention: SignConvention) -> Result<f64, IndexError> {
    let (c_r, m_p) = (window.c_r(), window.m_p());
    let scale = c_r.abs().max(m_p.abs());
    if scale == 0.0 {
        return Err(IndexError::DegenerateLevels { c_r, m_p });
    }
    let magnitude = ((m_p - c_r).abs() / scale).exp();
    Ok(magnitude.powi(shift_direction(window, convention) as i32))
}

pub fn evolutionary_component(window: &ShockWindow) -> Result<f64, IndexError> {
    let (c_r, m_p) = (window.c_r(), window.m_p());
    let denom = window.n_p() as f64 * (c_r + m_p).abs();
    if denom == 0.0 {
        return Err(IndexError::DegenerateLevels { c_r, m_p });
    }
    let deficit: f64 = window.performance_segment().iter().map(|&(_, x)| c_r - x).sum();
    Ok((-deficit / denom).exp())
}

pub fn scalar_index(vector: &ResilienceVector) -> f64 {
    let norm = (vector.r_en * vector.r_en + vector.r_ec * vector.r_ec + vector.r_ev * vector.r_ev).sqrt();
    f64::from(vector.direction) * norm / 3f64.sqrt()
}

/// Low below 0, Medium on `[0, 1)`, High from 1.
pub fn classify(i_r: f64) -> Result<ResilienceClass, IndexError> {
    if !i_r.is_finite() {
        return Err(IndexError::NonFinite(i_r));
    }
    Ok(if i_r < 0.0 {
        ResilienceClass::Low
    } else if i_r < 1.0 {
        ResilienceClass::Medium
    } else {
        ResilienceClass::High
    })
}

pub fn compute_vector(window: &ShockWindow, convention: SignConvention) -> Result<ResilienceVector, IndexError> {
    Ok(ResilienceVector {
        r_en: engineering_component(window),
        r_ec: ecological_component(window, convention)?,
        r_ev: evolutionary_component(window)?,
        direction: shift_direction(window, convention),
    })
}

pub fn compute_record(window: &ShockWindow, convention: SignConvention) -> Result<ResilienceRecord, IndexError> {
    let vector = compute_vector(window, convention)?;
    let i_r = scalar_index(&vector);
    Ok(ResilienceRecord { vector, i_r, class: classify(i_r)? })
}
