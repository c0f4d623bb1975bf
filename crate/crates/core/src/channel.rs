//! Packet erasure channels with perfect one-step-delayed ACK/NACK feedback,
//! and envelope-process tools for characterizing erasure sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coder::Message;
use crate::error::{Error, Result};

/// Hidden state of a Gilbert-Elliott chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeState {
    Good,
    Bad,
}

/// Initial state policy for a Gilbert-Elliott chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeInit {
    #[default]
    Stationary,
    Good,
    Bad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    /// Never erases.
    Ideal,
    /// Deterministic erasure pattern, `pattern[t - 1]` at time `t`.
    Pattern {
        pattern: Vec<u8>,
        #[serde(default = "default_true")]
        wrap: bool,
    },
    /// One erasure every `period` slots, at slots `offset + 1, offset + 1 + period, ...`.
    Periodic {
        period: u64,
        #[serde(default)]
        offset: u64,
    },
    /// Memoryless channel with constant erasure probability.
    Bernoulli { e: f64 },
    /// Memoryless channel with time-varying erasure probabilities `e_t`.
    BernoulliSchedule {
        schedule: Vec<f64>,
        #[serde(default = "default_true")]
        wrap: bool,
    },
    /// Two-state Markov erasure channel; `a = P(B -> G)`, `b = P(G -> B)`.
    GilbertElliott {
        a: f64,
        b: f64,
        e_b: f64,
        e_g: f64,
        #[serde(default)]
        initial: GeInit,
    },
}

fn default_true() -> bool {
    true
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Channel(format!("{name} = {p} outside [0, 1]")));
    }
    Ok(())
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Ideal => Ok(()),
            Self::Pattern { pattern, .. } => {
                if pattern.is_empty() {
                    return Err(Error::Channel("empty erasure pattern".into()));
                }
                if pattern.iter().any(|&e| e > 1) {
                    return Err(Error::Channel("pattern entries must be 0 or 1".into()));
                }
                Ok(())
            }
            Self::Periodic { period, offset } => {
                if *period == 0 || offset >= period {
                    return Err(Error::Channel(format!("period {period}, offset {offset}")));
                }
                Ok(())
            }
            Self::Bernoulli { e } => check_prob("e", *e),
            Self::BernoulliSchedule { schedule, .. } => {
                if schedule.is_empty() {
                    return Err(Error::Channel("empty erasure schedule".into()));
                }
                schedule.iter().try_for_each(|&e| check_prob("e_t", e))
            }
            Self::GilbertElliott { a, b, e_b, e_g, .. } => {
                check_prob("a", *a)?;
                check_prob("b", *b)?;
                check_prob("e_B", *e_b)?;
                check_prob("e_G", *e_g)
            }
        }
    }

    /// True when the erasure sequence is fixed in advance.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Ideal | Self::Pattern { .. } | Self::Periodic { .. })
    }

    pub fn is_ideal(&self) -> bool {
        match self {
            Self::Ideal => true,
            Self::Pattern { pattern, .. } => pattern.iter().all(|&e| e == 0),
            Self::Bernoulli { e } => *e == 0.0,
            Self::BernoulliSchedule { schedule, .. } => schedule.iter().all(|&e| e == 0.0),
            _ => false,
        }
    }

    /// The first `horizon` erasure bits of a deterministic channel.
    pub fn deterministic_pattern(&self, horizon: usize) -> Option<Vec<bool>> {
        match self {
            Self::Ideal => Some(vec![false; horizon]),
            Self::Pattern { pattern, wrap } => {
                if !wrap && pattern.len() < horizon {
                    return None;
                }
                Some((0..horizon).map(|i| pattern[i % pattern.len()] == 1).collect())
            }
            Self::Periodic { period, offset } => {
                Some((0..horizon as u64).map(|i| i % period == *offset).collect())
            }
            _ => None,
        }
    }

    /// Parses a compact channel description, as accepted on the command
    /// line: `ideal`, `bernoulli:E`, `periodic:P[,OFFSET]`,
    /// `ge:A,B,E_B,E_G`, `pattern:0,0,1`, or a JSON object.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            let spec: Self = serde_json::from_str(text)?;
            spec.validate()?;
            return Ok(spec);
        }
        let (kind, args) = text.split_once(':').unwrap_or((text, ""));
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("channel argument {s:?}: {e}")))
                })
                .collect()
        };
        let spec = match kind {
            "ideal" | "none" => Self::Ideal,
            "bernoulli" => match nums()?.as_slice() {
                [e] => Self::Bernoulli { e: *e },
                _ => return Err(Error::Parse("bernoulli takes one probability".into())),
            },
            "periodic" => match nums()?.as_slice() {
                [p] if p.fract() == 0.0 && *p >= 1.0 => Self::Periodic {
                    period: *p as u64,
                    offset: 0,
                },
                [p, o] if p.fract() == 0.0 && o.fract() == 0.0 && *p >= 1.0 && *o >= 0.0 => Self::Periodic {
                    period: *p as u64,
                    offset: *o as u64,
                },
                _ => return Err(Error::Parse("periodic takes PERIOD[,OFFSET]".into())),
            },
            "ge" | "gilbert_elliott" => match nums()?.as_slice() {
                [a, b, e_b, e_g] => Self::GilbertElliott {
                    a: *a,
                    b: *b,
                    e_b: *e_b,
                    e_g: *e_g,
                    initial: GeInit::Stationary,
                },
                _ => return Err(Error::Parse("ge takes A,B,E_B,E_G".into())),
            },
            "pattern" => {
                let pattern = nums()?
                    .into_iter()
                    .map(|v| match v {
                        0.0 => Ok(0u8),
                        1.0 => Ok(1u8),
                        _ => Err(Error::Parse(format!("pattern entry {v}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::Pattern { pattern, wrap: true }
            }
            other => return Err(Error::Parse(format!("unknown channel kind {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses a JSON array of 0/1 erasure indicators.
pub fn pattern_from_json(text: &str) -> Result<Vec<u8>> {
    let v: Vec<u8> = serde_json::from_str(text)?;
    if v.iter().any(|&e| e > 1) {
        return Err(Error::Parse("pattern entries must be 0 or 1".into()));
    }
    Ok(v)
}

/// Parses a JSON array of erasure probabilities.
pub fn schedule_from_json(text: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = serde_json::from_str(text)?;
    v.iter().try_for_each(|&e| check_prob("e_t", e))?;
    Ok(v)
}

/// Result of sending one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStep {
    pub erased: bool,
    /// `None` is the erasure message.
    pub delivered: Option<Message>,
    pub hidden_state: Option<GeState>,
}

/// Erasure bit reported back to the encoder over the feedback link.
pub fn feedback(step: &ChannelStep) -> bool {
    step.erased
}

/// A running channel instance with its own random stream.
#[derive(Debug, Clone)]
pub struct Channel {
    spec: ChannelSpec,
    rng: ChaCha8Rng,
    ge_state: Option<GeState>,
    last_t: u64,
}

impl Channel {
    pub fn new(spec: ChannelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ge_state = match &spec {
            ChannelSpec::GilbertElliott { a, b, initial, .. } => Some(match initial {
                GeInit::Good => GeState::Good,
                GeInit::Bad => GeState::Bad,
                GeInit::Stationary => {
                    let pi_b = if a + b > 0.0 { b / (a + b) } else { 0.5 };
                    let u: f64 = rng.random();
                    if u < pi_b {
                        GeState::Bad
                    } else {
                        GeState::Good
                    }
                }
            }),
            _ => None,
        };
        Ok(Self {
            spec,
            rng,
            ge_state,
            last_t: 0,
        })
    }

    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    /// Draws the erasure bit for slot `t` (1-based, strictly increasing).
    pub fn erasure(&mut self, t: u64) -> Result<(bool, Option<GeState>)> {
        if t <= self.last_t {
            return Err(Error::Channel(format!(
                "time index {t} not after {}",
                self.last_t
            )));
        }
        self.last_t = t;
        let i = (t - 1) as usize;
        let erased = match &self.spec {
            ChannelSpec::Ideal => false,
            ChannelSpec::Pattern { pattern, wrap } => {
                if i >= pattern.len() && !wrap {
                    return Err(Error::PatternExhausted(t));
                }
                pattern[i % pattern.len()] == 1
            }
            ChannelSpec::Periodic { period, offset } => (t - 1) % period == *offset,
            ChannelSpec::Bernoulli { e } => {
                let u: f64 = self.rng.random();
                u < *e
            }
            ChannelSpec::BernoulliSchedule { schedule, wrap } => {
                if i >= schedule.len() && !wrap {
                    return Err(Error::PatternExhausted(t));
                }
                let u: f64 = self.rng.random();
                u < schedule[i % schedule.len()]
            }
            ChannelSpec::GilbertElliott { a, b, e_b, e_g, .. } => {
                let state = self.ge_state.expect("set at construction");
                let u: f64 = self.rng.random();
                let next = match state {
                    GeState::Bad if u < *a => GeState::Good,
                    GeState::Good if u < *b => GeState::Bad,
                    s => s,
                };
                self.ge_state = Some(next);
                let e = match next {
                    GeState::Bad => *e_b,
                    GeState::Good => *e_g,
                };
                let u: f64 = self.rng.random();
                u < e
            }
        };
        Ok((erased, self.ge_state))
    }

    pub fn transmit(&mut self, t: u64, msg: &Message) -> Result<ChannelStep> {
        let (erased, hidden_state) = self.erasure(t)?;
        Ok(ChannelStep {
            erased,
            delivered: (!erased).then(|| msg.clone()),
            hidden_state,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub pi_bad: f64,
    pub pi_good: f64,
    pub e_bar: f64,
}

/// Stationary occupancy and erasure rate of a Gilbert-Elliott chain.
pub fn steady_state(a: f64, b: f64, e_b: f64, e_g: f64) -> Result<SteadyState> {
    if !(a + b > 0.0) {
        return Err(Error::Channel("a = b = 0 gives a reducible chain".into()));
    }
    let pi_bad = b / (a + b);
    let pi_good = a / (a + b);
    Ok(SteadyState {
        pi_bad,
        pi_good,
        e_bar: pi_bad * e_b + pi_good * e_g,
    })
}

/// `1 - |1 - a - b|`.
pub fn spectral_gap(a: f64, b: f64) -> f64 {
    1.0 - (1.0 - a - b).abs()
}

/// Maximum sum over any `tau + 1` consecutive terms of `seq`.
pub fn envelope(seq: &[f64], tau: usize) -> Result<f64> {
    let window = tau + 1;
    if tau == 0 || window > seq.len() {
        return Err(Error::WindowTooLong {
            window,
            horizon: seq.len(),
        });
    }
    let mut sum: f64 = seq[..window].iter().sum();
    let mut best = sum;
    for k in window..seq.len() {
        sum += seq[k] - seq[k - window];
        best = best.max(sum);
    }
    Ok(best)
}

/// Envelope values for every `tau` in `1..seq.len()` on a 0/1 sequence,
/// computed exactly with integer prefix sums. Index `i` holds `tau = i + 1`.
pub fn envelope_profile(bits: &[bool]) -> Vec<u64> {
    let mut prefix = vec![0u64; bits.len() + 1];
    for (i, &b) in bits.iter().enumerate() {
        prefix[i + 1] = prefix[i] + u64::from(b);
    }
    (1..bits.len())
        .map(|tau| {
            (0..bits.len() - tau)
                .map(|k| prefix[k + tau + 1] - prefix[k])
                .max()
                .unwrap_or(0)
        })
        .collect()
}

/// Sublinear margin function in the envelope condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Psi {
    Constant { c: f64 },
    Sqrt { c: f64 },
    Log { c: f64 },
}

impl Psi {
    pub fn eval(self, tau: f64) -> f64 {
        match self {
            Self::Constant { c } => c,
            Self::Sqrt { c } => c * tau.sqrt(),
            Self::Log { c } => c * (1.0 + tau).ln(),
        }
    }
}

/// Slope margin `(D - eps) / D_max - A`; must be positive.
fn envelope_margin(a: f64, target: f64, epsilon: f64, d_max: f64) -> Result<f64> {
    let margin = (target - epsilon) / d_max - a;
    if !(margin > 0.0) {
        return Err(Error::Config(format!(
            "need A < (D - eps) / D_max, got A = {a}, (D - eps) / D_max = {}",
            (target - epsilon) / d_max
        )));
    }
    Ok(margin)
}

/// Whether `Psi(tau, E) < A tau + psi(tau)` for every `tau` in `1..T`.
pub fn check_assumption3(
    pattern: &[bool],
    a: f64,
    psi: Psi,
    target: f64,
    epsilon: f64,
    d_max: f64,
) -> Result<bool> {
    envelope_margin(a, target, epsilon, d_max)?;
    Ok(envelope_profile(pattern).into_iter().enumerate().all(|(i, env)| {
        let tau = (i + 1) as f64;
        (env as f64) < a * tau + psi.eval(tau)
    }))
}

/// Smallest `tau >= 1` with `psi(tau) / tau <= (D - eps) / D_max - A`.
pub fn tau_max(a: f64, psi: Psi, target: f64, epsilon: f64, d_max: f64, cap: u64) -> Result<u64> {
    let margin = envelope_margin(a, target, epsilon, d_max)?;
    (1..=cap)
        .find(|&tau| psi.eval(tau as f64) / tau as f64 <= margin)
        .ok_or(Error::TauCapExceeded { cap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn erasures(spec: ChannelSpec, seed: u64, n: u64) -> Vec<bool> {
        let mut ch = Channel::new(spec, seed).unwrap();
        (1..=n).map(|t| ch.erasure(t).unwrap().0).collect()
    }

    #[test]
    fn deterministic_pattern() {
        let spec = ChannelSpec::Pattern {
            pattern: vec![0, 0, 1],
            wrap: true,
        };
        assert_eq!(erasures(spec, 0, 6), vec![false, false, true, false, false, true]);
        let mut ch = Channel::new(
            ChannelSpec::Pattern {
                pattern: vec![1],
                wrap: false,
            },
            0,
        )
        .unwrap();
        assert!(ch.erasure(1).unwrap().0);
        assert!(matches!(ch.erasure(2), Err(Error::PatternExhausted(2))));
    }

    #[test]
    fn transmit_and_feedback() {
        let mut ch = Channel::new(ChannelSpec::Periodic { period: 2, offset: 1 }, 0).unwrap();
        let msg = Message::default();
        let s1 = ch.transmit(1, &msg).unwrap();
        assert!(!feedback(&s1));
        assert_eq!(s1.delivered, Some(msg.clone()));
        let s2 = ch.transmit(2, &msg).unwrap();
        assert!(feedback(&s2));
        assert_eq!(s2.delivered, None);
        assert!(ch.transmit(2, &msg).is_err());
    }

    #[test]
    fn zero_rate_never_erases() {
        assert!(erasures(ChannelSpec::Bernoulli { e: 0.0 }, 3, 1000)
            .iter()
            .all(|e| !e));
    }

    #[test]
    fn seeded_determinism() {
        let spec = ChannelSpec::GilbertElliott {
            a: 0.2,
            b: 0.05,
            e_b: 1.0,
            e_g: 0.0,
            initial: GeInit::Stationary,
        };
        assert_eq!(erasures(spec.clone(), 9, 500), erasures(spec.clone(), 9, 500));
        assert_ne!(erasures(spec.clone(), 9, 500), erasures(spec, 10, 500));
    }

    #[test]
    fn steady_state_values() {
        let s = steady_state(0.2, 0.05, 1.0, 0.0).unwrap();
        assert!((s.pi_bad - 0.2).abs() < 1e-12);
        assert!((s.e_bar - 0.2).abs() < 1e-12);
        let s = steady_state(0.5, 0.5, 0.3, 0.3).unwrap();
        assert!((s.e_bar - 0.3).abs() < 1e-12);
        assert!(steady_state(0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn spectral_gaps() {
        assert!((spectral_gap(0.2, 0.05) - 0.25).abs() < 1e-12);
        assert_eq!(spectral_gap(0.5, 0.5), 1.0);
        assert_eq!(spectral_gap(0.0, 0.0), 0.0);
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(envelope(&[1.0; 10], 3).unwrap(), 4.0);
        assert_eq!(envelope(&[0.0; 10], 3).unwrap(), 0.0);
        let p: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        // three-term windows always hold exactly one erasure; four-term
        // windows can straddle two
        assert_eq!(envelope(&p, 2).unwrap(), 1.0);
        assert_eq!(envelope(&p, 3).unwrap(), 2.0);
        assert!(envelope(&[1.0, 0.0], 2).is_err());
        assert!(envelope(&[1.0, 0.0], 0).is_err());
    }

    #[test]
    fn profile_matches_direct_envelope() {
        let bits: Vec<bool> = (0..40).map(|i| (i * 7 + 3) % 5 == 0 || i % 11 == 0).collect();
        let reals: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
        for (i, env) in envelope_profile(&bits).into_iter().enumerate() {
            assert_eq!(env as f64, envelope(&reals, i + 1).unwrap());
        }
    }

    #[test]
    fn assumption3_examples() {
        let periodic: Vec<bool> = (0..500).map(|i| i % 10 == 0).collect();
        let psi = Psi::Constant { c: 2.0 };
        assert!(check_assumption3(&periodic, 0.1, psi, 0.3, 0.05, 1.0).unwrap());
        assert!(!check_assumption3(&[true; 100], 0.1, psi, 0.3, 0.05, 1.0).unwrap());
        assert!(check_assumption3(&[false; 100], 0.1, psi, 0.3, 0.05, 1.0).unwrap());
        assert!(check_assumption3(&periodic, 0.3, psi, 0.3, 0.05, 1.0).is_err());
    }

    #[test]
    fn tau_max_examples() {
        // margin (0.375 - 0.125) / 1 - 0 = 0.25
        assert_eq!(
            tau_max(0.0, Psi::Constant { c: 2.0 }, 0.375, 0.125, 1.0, 1000).unwrap(),
            8
        );
        assert_eq!(
            tau_max(0.0, Psi::Sqrt { c: 1.0 }, 0.375, 0.125, 1.0, 1000).unwrap(),
            16
        );
        assert_eq!(
            tau_max(0.0, Psi::Constant { c: 0.0 }, 0.375, 0.125, 1.0, 1000).unwrap(),
            1
        );
        assert!(matches!(
            tau_max(0.0, Psi::Constant { c: 2.0 }, 0.375, 0.125, 1.0, 4),
            Err(Error::TauCapExceeded { cap: 4 })
        ));
    }

    #[test]
    fn parse_compact_specs() {
        assert_eq!(ChannelSpec::parse("ideal").unwrap(), ChannelSpec::Ideal);
        assert_eq!(
            ChannelSpec::parse("bernoulli:0.2").unwrap(),
            ChannelSpec::Bernoulli { e: 0.2 }
        );
        assert_eq!(
            ChannelSpec::parse("periodic:10,3").unwrap(),
            ChannelSpec::Periodic {
                period: 10,
                offset: 3
            }
        );
        assert!(matches!(
            ChannelSpec::parse("ge:0.2,0.05,1,0").unwrap(),
            ChannelSpec::GilbertElliott { .. }
        ));
        assert_eq!(
            ChannelSpec::parse("pattern:0,1").unwrap(),
            ChannelSpec::Pattern {
                pattern: vec![0, 1],
                wrap: true
            }
        );
        assert!(ChannelSpec::parse(r#"{"kind":"bernoulli","e":0.5}"#).is_ok());
        assert!(ChannelSpec::parse("bernoulli:1.5").is_err());
        assert!(ChannelSpec::parse("periodic:10,10").is_err());
        assert!(ChannelSpec::parse("wormhole").is_err());
    }

    #[test]
    fn json_arrays() {
        assert_eq!(pattern_from_json("[0,1,1]").unwrap(), vec![0, 1, 1]);
        assert!(pattern_from_json("[2]").is_err());
        assert!(schedule_from_json("[0.1, 1.2]").is_err());
    }
}
