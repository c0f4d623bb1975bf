//! Online conformal rate-distortion compression (OCRDC).
//!
//! The encoder picks the symbol minimizing `-log2 p(y) + s_t d(x, y)` and
//! sends it losslessly under the full predictive distribution. The slope
//! follows `lambda + eta * (d - D)`.

use crate::error::{Error, Result};
use crate::ocsc::ConformalState;
use crate::types::{DistortionMeasure, Distribution, Symbol};

/// Lagrangian cost of reconstructing `x` as `y` at slope `s`.
pub fn rd_cost(dist: &Distribution, measure: &DistortionMeasure, x: Symbol, y: Symbol, s: f64) -> f64 {
    -dist.prob(y).log2() + s * measure.eval(x, y)
}

/// Minimizer of the rate-distortion objective; smallest index on ties.
pub fn rd_select(dist: &Distribution, x: Symbol, s: f64, measure: &DistortionMeasure) -> Symbol {
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for y in 0..dist.len() {
        let c = rd_cost(dist, measure, x, y, s);
        if c < best_cost {
            best = y;
            best_cost = c;
        }
    }
    best
}

/// `lambda' = lambda + eta * (d - D)`.
pub fn update_lambda(state: &mut ConformalState, distortion: f64) {
    state.lambda += state.eta * (distortion - state.target);
}

/// Ceiling `L/D + eta (D_max - D)` on the slope parameter.
pub fn rd_lambda_bound(cost_bound: f64, eta: f64, target: f64, d_max: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Config("slope ceiling needs D > 0".into()));
    }
    Ok(cost_bound / target + eta * (d_max - target))
}
