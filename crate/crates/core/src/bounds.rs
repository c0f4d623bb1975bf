//! Right-hand sides of the long-term distortion guarantees and verdicts
//! comparing them with measured averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_horizon(horizon: u64) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::Config("horizon T must be at least 1".into()));
    }
    Ok(horizon as f64)
}

/// Sparse compression on an error-free link:
/// `D + (eta (1 - D) + lambda0) / (eta T)`.
pub fn outage_rhs(target: f64, eta: f64, lambda0: f64, horizon: u64) -> Result<f64> {
    let t = check_horizon(horizon)?;
    Ok(target + (eta * (1.0 - target) + lambda0) / (eta * t))
}

/// Rate-distortion compression on an error-free link:
/// `D + (L / D + eta (D_max - D) - lambda0) / (eta T)`.
pub fn distortion_rhs(
    target: f64,
    eta: f64,
    lambda0: f64,
    cost_bound: f64,
    d_max: f64,
    horizon: u64,
) -> Result<f64> {
    let t = check_horizon(horizon)?;
    if !(target > 0.0) {
        return Err(Error::Config("no finite bound in lossless mode (D = 0)".into()));
    }
    Ok(target + (cost_bound / target + eta * (d_max - target) - lambda0) / (eta * t))
}

/// Floor `-eta (1 - eps)` of the channel-adaptive threshold parameter.
pub fn sparse_lambda_floor(eta: f64, epsilon: f64) -> f64 {
    -eta * (1.0 - epsilon)
}

/// Ceiling `L / eps + eta (D_max - eps)` of the channel-adaptive slope parameter.
pub fn rd_lambda_ceiling(cost_bound: f64, eta: f64, epsilon: f64, d_max: f64) -> f64 {
    cost_bound / epsilon + eta * (d_max - epsilon)
}

/// Constant `K` of the channel-adaptive bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptiveConstant {
    /// `eta (1 - eps) + lambda0`.
    Sparse { eta: f64, epsilon: f64, lambda0: f64 },
    /// `L / eps + eta (D_max - eps) - lambda0`.
    RateDistortion {
        eta: f64,
        epsilon: f64,
        lambda0: f64,
        cost_bound: f64,
        d_max: f64,
    },
}

impl AdaptiveConstant {
    pub fn value(self) -> f64 {
        match self {
            Self::Sparse {
                eta,
                epsilon,
                lambda0,
            } => eta * (1.0 - epsilon) + lambda0,
            Self::RateDistortion {
                eta,
                epsilon,
                lambda0,
                cost_bound,
                d_max,
            } => rd_lambda_ceiling(cost_bound, eta, epsilon, d_max) - lambda0,
        }
    }

    pub fn eta(self) -> f64 {
        match self {
            Self::Sparse { eta, .. } | Self::RateDistortion { eta, .. } => eta,
        }
    }
}

/// `D + K / (eta T) + Q_T / T`.
pub fn adaptive_average_rhs(target: f64, k: AdaptiveConstant, horizon: u64, q_final: f64) -> Result<f64> {
    let t = check_horizon(horizon)?;
    Ok(target + k.value() / (k.eta() * t) + q_final / t)
}

/// `tau_max (D_max - D + eps) + D - eps`, the supremum bound on the queue
/// under an envelope-constrained erasure pattern.
pub fn queue_bound(tau_max: u64, target: f64, epsilon: f64, d_max: f64) -> f64 {
    tau_max as f64 * (d_max - target + epsilon) + target - epsilon
}

/// `D + K / (T eta) + (tau_max (D_max - D + eps) + D - eps) / T`.
pub fn envelope_rhs(
    target: f64,
    k: AdaptiveConstant,
    horizon: u64,
    tau_max: u64,
    epsilon: f64,
    d_max: f64,
) -> Result<f64> {
    let t = check_horizon(horizon)?;
    Ok(target + k.value() / (t * k.eta()) + queue_bound(tau_max, target, epsilon, d_max) / t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Violated,
    NotApplicable,
}

/// Outcome of checking `lhs <= rhs` (or `lhs < rhs` when `strict`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    /// `rhs - lhs`.
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn check(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::compare(name, lhs, rhs, false)
    }

    pub fn check_strict(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::compare(name, lhs, rhs, true)
    }

    fn compare(name: &str, lhs: f64, rhs: f64, strict: bool) -> Self {
        let slack = rhs - lhs;
        let ok = if strict { slack > 0.0 } else { slack >= 0.0 };
        Self {
            name: name.to_owned(),
            status: if ok { Status::Holds } else { Status::Violated },
            lhs: Some(lhs),
            rhs: Some(rhs),
            slack: Some(slack),
            note: None,
        }
    }

    pub fn not_applicable(name: &str, why: impl Into<String>) -> Self {
        Self {
            name: name.to_owned(),
            status: Status::NotApplicable,
            lhs: None,
            rhs: None,
            slack: None,
            note: Some(why.into()),
        }
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn violated(&self) -> bool {
        self.status == Status::Violated
    }
}

/// Multi-seed check of a high-probability guarantee: each seed passes when
/// its average is at most its threshold; the guarantee holds when the
/// failure frequency does not exceed `budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVerdict {
    pub name: String,
    pub seeds: usize,
    pub failures: usize,
    pub frequency: f64,
    pub budget: f64,
    pub status: Status,
}

pub fn empirical_verdict(
    name: &str,
    averages: &[f64],
    thresholds: &[f64],
    budget: f64,
) -> Result<EmpiricalVerdict> {
    if averages.len() != thresholds.len() || averages.is_empty() {
        return Err(Error::Config(format!(
            "{} averages vs {} thresholds",
            averages.len(),
            thresholds.len()
        )));
    }
    let failures = averages.iter().zip(thresholds).filter(|(a, t)| a > t).count();
    let frequency = failures as f64 / averages.len() as f64;
    Ok(EmpiricalVerdict {
        name: name.to_owned(),
        seeds: averages.len(),
        failures,
        frequency,
        budget,
        status: if frequency <= budget {
            Status::Holds
        } else {
            Status::Violated
        },
    })
}
