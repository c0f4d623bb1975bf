//! Reference schemes: random-dropout lossless coding and offline
//! fixed-level block search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::Family;
use crate::coder::{Codebook, Message};
use crate::error::Result;
use crate::harness::config::BlockGrid;
use crate::types::{Distribution, Symbol};

/// Shared-randomness outage decision; both ends draw once per step.
pub fn dropout_decision<R: Rng>(rng: &mut R, target: f64) -> bool {
    let u: f64 = rng.random();
    u < target
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutStep {
    pub dropped: bool,
    /// Empty when dropped.
    pub message: Message,
    /// What an error-free decoder outputs.
    pub reconstruction: Symbol,
}

/// With probability `D` sends nothing and both ends fall back to the most
/// likely symbol; otherwise codes `x` losslessly under `dist`.
pub fn dropout_baseline_step<R: Rng>(
    dist: &Distribution,
    target: f64,
    rng: &mut R,
    x: Symbol,
) -> Result<DropoutStep> {
    if dropout_decision(rng, target) {
        return Ok(DropoutStep {
            dropped: true,
            message: Message::default(),
            reconstruction: dist.argmax(),
        });
    }
    Ok(DropoutStep {
        dropped: false,
        message: Codebook::build(dist.probs())?.encode(x)?,
        reconstruction: x,
    })
}

/// Result of an offline block search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    /// Selected level, `None` when no grid point met the target.
    pub s_star: Option<f64>,
    /// Level actually used for the episode.
    pub level: f64,
    pub feasible: bool,
    /// `(level, error-free distortion)` for every evaluated grid point.
    pub evaluated: Vec<(f64, f64)>,
}

/// Picks the largest feasible threshold (sparse) or the smallest feasible
/// slope (rate-distortion) from `(level, distortion)` pairs sorted by level.
pub fn select_level(family: Family, evaluated: &[(f64, f64)], target: f64) -> BlockOutcome {
    let mut feasible = evaluated.iter().filter(|(_, d)| *d <= target).map(|(s, _)| *s);
    let s_star = match family {
        Family::Sparse => feasible.next_back(),
        Family::RateDistortion => feasible.next(),
    };
    let fallback = match family {
        Family::Sparse => 0.0,
        Family::RateDistortion => evaluated.last().map_or(0.0, |(s, _)| *s),
    };
    BlockOutcome {
        s_star,
        level: s_star.unwrap_or(fallback),
        feasible: s_star.is_some(),
        evaluated: evaluated.to_vec(),
    }
}

/// Grid levels for `family`, defaulting when no grid is configured.
pub fn grid_levels(family: Family, grid: Option<BlockGrid>) -> Result<Vec<f64>> {
    grid.unwrap_or_else(|| BlockGrid::default_for(family)).levels()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dropout_extremes() {
        let d = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let s = dropout_baseline_step(&d, 0.0, &mut rng, 2).unwrap();
            assert!(!s.dropped);
            assert_eq!(s.reconstruction, 2);
            let s = dropout_baseline_step(&d, 1.0, &mut rng, 2).unwrap();
            assert!(s.dropped && s.message.is_empty());
            assert_eq!(s.reconstruction, 0);
        }
    }

    #[test]
    fn dropout_rate_in_binomial_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 3000;
        let k = (0..n).filter(|_| dropout_decision(&mut rng, 0.4)).count() as f64;
        let sd = (n as f64 * 0.4 * 0.6).sqrt();
        assert!((k - 0.4 * n as f64).abs() < 3.0 * sd);
    }

    #[test]
    fn level_selection() {
        let ev = [(0.0, 0.0), (0.1, 0.05), (0.2, 0.15), (0.3, 0.4)];
        let o = select_level(Family::Sparse, &ev, 0.2);
        assert_eq!(o.s_star, Some(0.2));
        let ev = [(0.0, 0.6), (1.0, 0.3), (2.0, 0.1), (4.0, 0.0)];
        let o = select_level(Family::RateDistortion, &ev, 0.2);
        assert_eq!(o.s_star, Some(2.0));
        let o = select_level(Family::RateDistortion, &ev[..2], 0.2);
        assert!(!o.feasible);
        assert_eq!(o.level, 1.0);
    }
}
