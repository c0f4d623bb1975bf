//! Channel-adaptive control: channel-distortion accounting, the residual
//! distortion queue and the doubly adaptive slope/threshold updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocsc::ConformalState;
use crate::types::{DistortionMeasure, Distribution, Symbol};

/// Largest default drain margin.
pub const DEFAULT_EPSILON_CAP: f64 = 0.05;

/// `min(0.05, D / 2)`.
pub fn default_epsilon(target: f64) -> f64 {
    DEFAULT_EPSILON_CAP.min(target / 2.0)
}

/// Which family of compressor a controller serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sparse,
    RateDistortion,
}

/// Reconstruction used by the decoder when a packet is erased.
pub fn ml_fallback(dist: &Distribution) -> Symbol {
    dist.argmax()
}

/// Controller-usable upper bound on the distortion added by the channel.
///
/// For the sparse family this is the erasure bit itself; for the
/// rate-distortion family it is `d(x, x_hat) - d(x, x_tilde)`, which the
/// encoder can evaluate once feedback tells it what the decoder output.
pub fn channel_distortion_bound(
    family: Family,
    erased: bool,
    measure: &DistortionMeasure,
    x: Symbol,
    x_tilde: Symbol,
    x_hat: Symbol,
) -> f64 {
    match family {
        Family::Sparse => f64::from(u8::from(erased)),
        Family::RateDistortion => {
            if erased {
                measure.eval(x, x_hat) - measure.eval(x, x_tilde)
            } else {
                0.0
            }
        }
    }
}

/// Exact channel-induced distortion; diagnostic only.
///
/// `x_clean` is what the decoder would have output without the erasure.
/// For the sparse family the loss counts only when the clean decode was
/// correct and the fallback is not.
pub fn true_channel_distortion(
    family: Family,
    erased: bool,
    measure: &DistortionMeasure,
    x: Symbol,
    x_clean: Symbol,
    x_hat: Symbol,
) -> f64 {
    if !erased {
        return 0.0;
    }
    match family {
        Family::Sparse => f64::from(u8::from(x == x_clean && x != x_hat)),
        Family::RateDistortion => measure.eval(x, x_hat) - measure.eval(x, x_clean),
    }
}

/// Backlog of channel distortion not yet compensated by target adjustments.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistortionQueue {
    pub delta_ch_cum: f64,
    pub delta_tgt_cum: f64,
    pub q: f64,
}

impl DistortionQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one arrival and one service; `Q` must stay nonnegative.
    pub fn step(&mut self, arrival: f64, service: f64) -> Result<f64> {
        if !(arrival >= 0.0 && service >= 0.0) {
            return Err(Error::Invariant(format!(
                "queue arrival {arrival} / service {service} must be nonnegative"
            )));
        }
        self.delta_ch_cum += arrival;
        self.delta_tgt_cum += service;
        self.q = self.q + arrival - service;
        if self.q < 0.0 {
            return Err(Error::Invariant(format!(
                "distortion queue went negative: {}",
                self.q
            )));
        }
        Ok(self.q)
    }
}

/// `min(D - eps, Q)`.
pub fn next_adjustment(q: f64, target: f64, epsilon: f64) -> Result<f64> {
    if !(target - epsilon > 0.0) {
        return Err(Error::Config(format!(
            "need D > eps, got D = {target}, eps = {epsilon}"
        )));
    }
    Ok((target - epsilon).min(q))
}

/// Sparse family: `lambda - eta * ((1 - E) out - D + delta_tgt)`.
pub fn ca_update_sparse(state: &mut ConformalState, erased: bool, outage: bool, delta_tgt: f64) {
    let masked = f64::from(u8::from(!erased && outage));
    state.lambda -= state.eta * (masked - state.target + delta_tgt);
}

/// Rate-distortion family: `lambda + eta * (d(x, x_tilde) - D + delta_tgt)`.
pub fn ca_update_rd(state: &mut ConformalState, distortion: f64, delta_tgt: f64) {
    state.lambda += state.eta * (distortion - state.target + delta_tgt);
}

/// What one controller step recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlStep {
    /// `delta_tgt_t`, applied in this step's update.
    pub delta_tgt: f64,
    /// `Q_t` after the arrival and service of step `t`.
    pub q: f64,
    /// `delta_tgt_{t+1}`.
    pub next: f64,
}

/// Queue plus adjustment policy; one per side that needs it.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub target: f64,
    pub epsilon: f64,
    pub queue: DistortionQueue,
    delta_tgt: f64,
}

impl Controller {
    pub fn new(target: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && target - epsilon > 0.0) {
            return Err(Error::Config(format!(
                "need 0 < eps < D, got D = {target}, eps = {epsilon}"
            )));
        }
        Ok(Self {
            target,
            epsilon,
            queue: DistortionQueue::new(),
            delta_tgt: 0.0,
        })
    }

    /// Adjustment to apply at the current step.
    pub fn delta_tgt(&self) -> f64 {
        self.delta_tgt
    }

    /// Enqueues `delta_ch_bound`, serves the current adjustment and computes
    /// the next one.
    pub fn record(&mut self, delta_ch_bound: f64) -> Result<ControlStep> {
        let used = self.delta_tgt;
        let q = self.queue.step(delta_ch_bound, used)?;
        let next = next_adjustment(q, self.target, self.epsilon)?;
        self.delta_tgt = next;
        Ok(ControlStep {
            delta_tgt: used,
            q,
            next,
        })
    }
}
