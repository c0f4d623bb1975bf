//! The end-to-end loop: predictor, compressor, erasure channel, decoder and
//! one-step-delayed feedback.
//!
//! Encoder and decoder are separate objects, each with its own predictor
//! copy conditioned on the reconstructed history. The decoder never sees the
//! source; the encoder learns the decoder's output only through the erasure
//! bit it gets back. Their reconstructions (and, for the sparse family, their
//! threshold states) are compared after every step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    ca_update_rd, ca_update_sparse, channel_distortion_bound, ml_fallback, true_channel_distortion,
    Controller, Family,
};
use crate::bounds::{self, AdaptiveConstant, Verdict};
use crate::channel::{self, Channel, ChannelSpec, GeState};
use crate::coder::{Codebook, Message};
use crate::error::{Error, Result};
use crate::harness::baselines::{
    dropout_baseline_step, dropout_decision, grid_levels, select_level, BlockOutcome,
};
use crate::harness::config::{
    derive_seed, stream, BlockGrid, EnvelopeSpec, Hyperparameters, RunConfig, Scheme,
};
use crate::ocrdc::{self, rd_select};
use crate::ocsc::{ConformalState, SparsePlan};
use crate::predictor::Predictor;
use crate::types::{DistortionMeasure, Distribution, Symbol};

/// Everything one episode needs, already materialized.
#[derive(Debug, Clone)]
pub struct EpisodeSetup {
    pub scheme: Scheme,
    pub symbols: Vec<Symbol>,
    pub boundaries: Vec<usize>,
    pub predictor: Predictor,
    pub online: bool,
    pub measure: DistortionMeasure,
    pub channel: ChannelSpec,
    pub channel_seed: u64,
    pub dropout_seed: u64,
    pub hyper: Hyperparameters,
    pub block: Option<BlockGrid>,
    pub envelope: Option<EnvelopeSpec>,
    pub seed: u64,
}

impl EpisodeSetup {
    /// Error-free channel, frozen predictor, fixed seeds.
    pub fn new(
        scheme: Scheme,
        symbols: Vec<Symbol>,
        predictor: Predictor,
        measure: DistortionMeasure,
        hyper: Hyperparameters,
    ) -> Self {
        Self {
            scheme,
            symbols,
            boundaries: Vec::new(),
            predictor,
            online: false,
            measure,
            channel: ChannelSpec::Ideal,
            channel_seed: 0,
            dropout_seed: 0,
            hyper,
            block: None,
            envelope: None,
            seed: 0,
        }
    }

    pub fn with_channel(mut self, channel: ChannelSpec, seed: u64) -> Self {
        self.channel = channel;
        self.channel_seed = seed;
        self
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let sample = cfg
            .source
            .generate(cfg.alphabet, cfg.horizon, derive_seed(cfg.seed, stream::SOURCE))?;
        Ok(Self {
            scheme: cfg.scheme,
            symbols: sample.symbols,
            boundaries: sample.boundaries,
            predictor: cfg.predictor.build(cfg.alphabet, &cfg.source, cfg.seed)?,
            online: cfg.predictor.online(),
            measure: cfg.distortion.build(cfg.alphabet)?,
            channel: cfg.channel.clone(),
            channel_seed: derive_seed(cfg.seed, stream::CHANNEL),
            dropout_seed: derive_seed(cfg.seed, stream::DROPOUT),
            hyper: cfg.hyperparameters,
            block: cfg.block,
            envelope: cfg.envelope,
            seed: cfg.seed,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.predictor.alphabet_size()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alphabet();
        if self.symbols.is_empty() {
            return Err(Error::Config("empty source sequence".into()));
        }
        if let Some(&bad) = self.symbols.iter().find(|&&s| s >= n) {
            return Err(Error::SymbolOutOfRange { symbol: bad, size: n });
        }
        if let Some(m) = self.measure.size() {
            if m != n {
                return Err(Error::Config(format!(
                    "distortion covers {m} symbols, predictor {n}"
                )));
            }
        }
        if self.scheme.family() == Some(Family::Sparse) && self.measure.d_max() > 1.0 {
            return Err(Error::Config(format!(
                "sparse schemes need D_max <= 1, got {}",
                self.measure.d_max()
            )));
        }
        let t = self.hyper.target;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("D = {t}")));
        }
        if self.scheme.family() != Some(Family::RateDistortion) && t > 1.0 {
            return Err(Error::Config(format!("D = {t} outside [0, 1]")));
        }
        if self.scheme.is_adaptive() {
            Controller::new(t, self.hyper.epsilon())?;
        }
        if self.scheme.is_online() {
            ConformalState::new(self.hyper.eta, self.hyper.lambda0, t)?;
        }
        self.channel.validate()
    }
}

/// Per-step record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: u64,
    pub x: Symbol,
    /// Coded symbol; `None` is the outage symbol (or a dropped step).
    pub x_tilde: Option<Symbol>,
    pub x_hat: Symbol,
    pub b_t: u64,
    /// `-log2` of the coded symbol's probability under the coding law.
    pub ideal_bits: f64,
    pub erased: bool,
    /// Parameter before this step's update.
    pub lambda: Option<f64>,
    /// Parameter after this step's update.
    pub lambda_next: Option<f64>,
    /// Threshold or slope used; `None` when unbounded or not applicable.
    pub s: Option<f64>,
    pub delta_ch: f64,
    pub delta_ch_bound: f64,
    pub delta_tgt: f64,
    pub q: f64,
    /// `d(x, x_hat)`.
    pub d: f64,
    /// `d(x, x_clean)`, the distortion an error-free decoder would incur.
    pub d_tilde: f64,
    /// Raw outage indicator of the scheme.
    pub outage: bool,
    /// Outage indicator masked by the erasure bit.
    pub outage_masked: bool,
    pub msg_hex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_state: Option<GeState>,
}

/// Averages and extremes recomputable from a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    #[serde(rename = "T")]
    pub horizon: u64,
    pub total_bits: u64,
    /// `R_T`.
    pub rate: f64,
    pub avg_distortion: f64,
    pub avg_d_tilde: f64,
    pub outage_rate: f64,
    pub masked_outage_rate: f64,
    pub error_rate: f64,
    pub erasure_rate: f64,
    pub lambda0: Option<f64>,
    pub lambda_final: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub q_final: f64,
    pub q_max: f64,
    pub delta_ch_cum: f64,
    pub delta_tgt_cum: f64,
}

fn mean(n: usize, it: impl Iterator<Item = f64>) -> f64 {
    it.sum::<f64>() / n as f64
}

impl Aggregates {
    pub fn from_steps(steps: &[StepTrace]) -> Result<Self> {
        let n = steps.len();
        if n == 0 {
            return Err(Error::Config("empty trace".into()));
        }
        let total_bits: u64 = steps.iter().map(|s| s.b_t).sum();
        let lambdas = || steps.iter().flat_map(|s| [s.lambda, s.lambda_next]).flatten();
        let frac = |f: fn(&StepTrace) -> bool| steps.iter().filter(|s| f(s)).count() as f64 / n as f64;
        Ok(Self {
            horizon: n as u64,
            total_bits,
            rate: total_bits as f64 / n as f64,
            avg_distortion: mean(n, steps.iter().map(|s| s.d)),
            avg_d_tilde: mean(n, steps.iter().map(|s| s.d_tilde)),
            outage_rate: frac(|s| s.outage),
            masked_outage_rate: frac(|s| s.outage_masked),
            error_rate: frac(|s| s.x != s.x_hat),
            erasure_rate: frac(|s| s.erased),
            lambda0: steps[0].lambda,
            lambda_final: steps[n - 1].lambda_next,
            lambda_min: lambdas().reduce(f64::min),
            lambda_max: lambdas().reduce(f64::max),
            q_final: steps[n - 1].q,
            q_max: steps.iter().map(|s| s.q).fold(0.0, f64::max),
            delta_ch_cum: steps.iter().map(|s| s.delta_ch_bound).sum(),
            delta_tgt_cum: steps.iter().map(|s| s.delta_tgt).sum(),
        })
    }
}

/// Constants the guarantees depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundContext {
    pub scheme: Scheme,
    pub target: f64,
    pub eta: f64,
    pub lambda0: f64,
    pub epsilon: f64,
    /// `L`, when the predictor has a probability floor.
    pub cost_bound: Option<f64>,
    pub d_max: f64,
    pub envelope: Option<EnvelopeSpec>,
}

impl BoundContext {
    pub fn from_setup(setup: &EpisodeSetup) -> Self {
        Self {
            scheme: setup.scheme,
            target: setup.hyper.target,
            eta: setup.hyper.eta,
            lambda0: setup.hyper.lambda0,
            epsilon: setup.hyper.epsilon(),
            cost_bound: setup.predictor.cost_bound_bits().ok(),
            d_max: setup.measure.d_max(),
            envelope: setup.envelope,
        }
    }

    /// Bound on the channel-distortion arrivals of the scheme's family.
    fn arrival_max(&self) -> f64 {
        match self.scheme.family() {
            Some(Family::Sparse) => 1.0,
            _ => self.d_max,
        }
    }

    fn adaptive_constant(&self) -> Option<AdaptiveConstant> {
        match self.scheme {
            Scheme::CaOcsc => Some(AdaptiveConstant::Sparse {
                eta: self.eta,
                epsilon: self.epsilon,
                lambda0: self.lambda0,
            }),
            Scheme::CaOcrdc => self.cost_bound.map(|l| AdaptiveConstant::RateDistortion {
                eta: self.eta,
                epsilon: self.epsilon,
                lambda0: self.lambda0,
                cost_bound: l,
                d_max: self.d_max,
            }),
            _ => None,
        }
    }
}

/// Guarantee checks for one episode; `erasures` is the realized pattern.
/// Returns the verdicts and `tau_max` when the envelope condition applied.
pub fn episode_verdicts(
    ctx: &BoundContext,
    agg: &Aggregates,
    erasures: &[bool],
) -> Result<(Vec<Verdict>, Option<u64>)> {
    let t = agg.horizon;
    let error_free = erasures.iter().all(|e| !e);
    let mut out = Vec::new();
    let mut tau = None;
    let lmin = agg.lambda_min.unwrap_or(ctx.lambda0);
    let lmax = agg.lambda_max.unwrap_or(ctx.lambda0);
    match ctx.scheme {
        Scheme::Ocsc => {
            out.push(Verdict::check(
                "threshold_floor",
                -lmin,
                ctx.eta * (1.0 - ctx.target),
            ));
            out.push(if error_free {
                Verdict::check(
                    "outage_bound",
                    agg.outage_rate,
                    bounds::outage_rhs(ctx.target, ctx.eta, ctx.lambda0, t)?,
                )
            } else {
                Verdict::not_applicable("outage_bound", "erasures occurred")
            });
        }
        Scheme::Ocrdc => {
            let name = "distortion_bound";
            match ctx.cost_bound {
                None => {
                    out.push(Verdict::not_applicable("slope_ceiling", "predictor has no floor"));
                    out.push(Verdict::not_applicable(name, "predictor has no floor"));
                }
                Some(_) if ctx.target <= 0.0 => {
                    out.push(Verdict::not_applicable("slope_ceiling", "lossless mode"));
                    out.push(Verdict::check("lossless", agg.avg_d_tilde, 0.0));
                }
                Some(l) => {
                    let ceiling = ocrdc::rd_lambda_bound(l, ctx.eta, ctx.target, ctx.d_max)?;
                    out.push(Verdict::check("slope_ceiling", lmax, ceiling.max(ctx.lambda0)));
                    out.push(if error_free {
                        Verdict::check(
                            name,
                            agg.avg_d_tilde,
                            bounds::distortion_rhs(ctx.target, ctx.eta, ctx.lambda0, l, ctx.d_max, t)?,
                        )
                    } else {
                        Verdict::not_applicable(name, "erasures occurred")
                    });
                }
            }
        }
        Scheme::CaOcsc | Scheme::CaOcrdc => {
            if ctx.scheme == Scheme::CaOcsc {
                out.push(Verdict::check(
                    "adaptive_floor",
                    -lmin,
                    -bounds::sparse_lambda_floor(ctx.eta, ctx.epsilon),
                ));
            } else if let Some(l) = ctx.cost_bound {
                let ceiling = bounds::rd_lambda_ceiling(l, ctx.eta, ctx.epsilon, ctx.d_max);
                out.push(Verdict::check("adaptive_ceiling", lmax, ceiling.max(ctx.lambda0)));
            } else {
                out.push(Verdict::not_applicable(
                    "adaptive_ceiling",
                    "predictor has no floor",
                ));
            }
            match ctx.adaptive_constant() {
                Some(k) => {
                    out.push(Verdict::check(
                        "queue_bound_average",
                        agg.avg_distortion,
                        bounds::adaptive_average_rhs(ctx.target, k, t, agg.q_final)?,
                    ));
                    match ctx.envelope {
                        Some(env) if erasures.len() >= 2 => {
                            let dm = ctx.arrival_max();
                            let ok = channel::check_assumption3(
                                erasures,
                                env.a,
                                env.psi,
                                ctx.target,
                                ctx.epsilon,
                                dm,
                            )?;
                            if ok {
                                let tm = channel::tau_max(
                                    env.a,
                                    env.psi,
                                    ctx.target,
                                    ctx.epsilon,
                                    dm,
                                    env.tau_cap,
                                )?;
                                tau = Some(tm);
                                out.push(Verdict::check(
                                    "envelope_bound",
                                    agg.avg_distortion,
                                    bounds::envelope_rhs(ctx.target, k, t, tm, ctx.epsilon, dm)?,
                                ));
                                out.push(Verdict::check_strict(
                                    "queue_sup",
                                    agg.q_max,
                                    bounds::queue_bound(tm, ctx.target, ctx.epsilon, dm),
                                ));
                            } else {
                                out.push(Verdict::not_applicable(
                                    "envelope_bound",
                                    "erasure pattern violates the envelope condition",
                                ));
                            }
                        }
                        _ => out.push(Verdict::not_applicable("envelope_bound", "no envelope model")),
                    }
                }
                None => out.push(Verdict::not_applicable(
                    "queue_bound_average",
                    "predictor has no floor",
                )),
            }
        }
        Scheme::LlmzipDropout | Scheme::BlockCsc | Scheme::BlockCrdc => {}
    }
    Ok((out, tau))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub scheme: Scheme,
    pub seed: u64,
    #[serde(rename = "D")]
    pub target: f64,
    #[serde(flatten)]
    pub aggregates: Aggregates,
    pub divergences: u64,
    pub verdicts: Vec<Verdict>,
    pub tau_max: Option<u64>,
    pub segment_boundaries: Vec<usize>,
    pub block: Option<BlockOutcome>,
    pub config: Option<RunConfig>,
}

impl EpisodeSummary {
    pub fn any_violated(&self) -> bool {
        self.verdicts.iter().any(Verdict::violated)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub steps: Vec<StepTrace>,
    pub summary: EpisodeSummary,
}

/// Level of the current step as both ends compute it.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Level {
    Threshold(f64),
    Slope(f64),
    Lossless,
    Dropout,
}

impl Level {
    fn value(self) -> Option<f64> {
        match self {
            Self::Threshold(s) | Self::Slope(s) => Some(s),
            Self::Lossless | Self::Dropout => None,
        }
    }
}

/// State common to the encoder and the decoder.
#[derive(Debug, Clone)]
struct Side {
    scheme: Scheme,
    target: f64,
    fixed: Option<f64>,
    predictor: Predictor,
    online: bool,
    history: Vec<Symbol>,
    state: Option<ConformalState>,
    ctrl: Option<Controller>,
    rng: ChaCha8Rng,
}

impl Side {
    fn new(setup: &EpisodeSetup, fixed: Option<f64>, with_state: bool) -> Result<Self> {
        let h = &setup.hyper;
        Ok(Self {
            scheme: setup.scheme,
            target: h.target,
            fixed,
            predictor: setup.predictor.clone(),
            online: setup.online,
            history: Vec::with_capacity(setup.symbols.len()),
            state: if with_state {
                Some(ConformalState::new(h.eta, h.lambda0, h.target)?)
            } else {
                None
            },
            ctrl: if with_state && setup.scheme.is_adaptive() {
                Some(Controller::new(h.target, h.epsilon())?)
            } else {
                None
            },
            rng: ChaCha8Rng::seed_from_u64(setup.dropout_seed),
        })
    }

    fn level(&self) -> Level {
        let lambda_level = || self.state.as_ref().map_or(0.0, ConformalState::level);
        match self.scheme.family() {
            None => Level::Dropout,
            Some(Family::Sparse) => match self.fixed {
                Some(s) => Level::Threshold(s),
                None if self.target == 0.0 => Level::Threshold(0.0),
                None => Level::Threshold(lambda_level()),
            },
            Some(Family::RateDistortion) => match self.fixed {
                Some(s) => Level::Slope(s),
                None if self.target == 0.0 => Level::Lossless,
                None => Level::Slope(lambda_level()),
            },
        }
    }

    fn advance(&mut self, x_hat: Symbol) {
        if self.online {
            self.predictor.online_update(&self.history, x_hat);
        }
        self.history.push(x_hat);
    }
}

struct Encoded {
    dist: Distribution,
    level: Level,
    msg: Message,
    x_tilde: Option<Symbol>,
    x_clean: Symbol,
    outage: bool,
    ideal_bits: f64,
}

/// `-log2 p` without the negative zero at `p = 1`.
fn self_information(p: f64) -> f64 {
    0.0 - p.log2()
}

fn encode(enc: &mut Side, x: Symbol, measure: &DistortionMeasure) -> Result<Encoded> {
    let dist = enc.predictor.predict(&enc.history);
    let level = enc.level();
    let target = enc.target;
    Ok(match level {
        Level::Threshold(s) => {
            let plan = SparsePlan::build(&dist, s, target)?;
            let (msg, coded) = plan.encode(x)?;
            let p = plan.coding_prob(coded);
            let x_clean = plan.reconstruct(&dist, coded);
            Encoded {
                level,
                msg,
                x_tilde: coded.symbol(),
                x_clean,
                outage: coded.symbol().is_none(),
                ideal_bits: self_information(p),
                dist,
            }
        }
        Level::Slope(_) | Level::Lossless => {
            let y = match level {
                Level::Slope(s) => rd_select(&dist, x, s, measure),
                _ => x,
            };
            let msg = Codebook::build(dist.probs())?.encode(y)?;
            Encoded {
                level,
                msg,
                x_tilde: Some(y),
                x_clean: y,
                outage: y != x,
                ideal_bits: self_information(dist.prob(y)),
                dist,
            }
        }
        Level::Dropout => {
            let step = dropout_baseline_step(&dist, target, &mut enc.rng, x)?;
            Encoded {
                level,
                msg: step.message,
                x_tilde: (!step.dropped).then_some(x),
                x_clean: step.reconstruction,
                outage: step.dropped,
                ideal_bits: if step.dropped {
                    0.0
                } else {
                    self_information(dist.prob(x))
                },
                dist,
            }
        }
    })
}

fn read_one(book: &Codebook, bits: &[bool]) -> Result<Symbol> {
    let (sym, used) = book.decode(bits)?;
    if used != bits.len() {
        return Err(Error::CorruptStream);
    }
    Ok(sym)
}

/// Decoder step: returns `x_hat` and whether an outage symbol arrived.
fn decode(dec: &mut Side, delivered: Option<&Message>) -> Result<(Symbol, bool)> {
    let dist = dec.predictor.predict(&dec.history);
    let level = dec.level();
    let dropped = matches!(level, Level::Dropout) && dropout_decision(&mut dec.rng, dec.target);
    let Some(msg) = delivered else {
        return Ok((ml_fallback(&dist), false));
    };
    let bits = msg.bits.as_slice();
    Ok(match level {
        Level::Threshold(s) => {
            let plan = SparsePlan::build(&dist, s, dec.target)?;
            let idx = read_one(plan.codebook(), bits)?;
            if idx == plan.outage_index() {
                (plan.outage_reconstruction(&dist), true)
            } else {
                (idx, false)
            }
        }
        Level::Slope(_) | Level::Lossless => (read_one(&Codebook::build(dist.probs())?, bits)?, false),
        Level::Dropout if dropped => (dist.argmax(), true),
        Level::Dropout => (read_one(&Codebook::build(dist.probs())?, bits)?, false),
    })
}

/// Threshold update shared by both ends of the sparse family.
fn sparse_update(side: &mut Side, erased: bool, outage: bool, arrival: f64) -> Result<(f64, f64)> {
    let (delta_tgt, q) = match side.ctrl.as_mut() {
        Some(c) => {
            let step = c.record(arrival)?;
            (step.delta_tgt, step.q)
        }
        None => (0.0, 0.0),
    };
    if let Some(state) = side.state.as_mut() {
        ca_update_sparse(state, erased, outage, delta_tgt);
    }
    Ok((delta_tgt, q))
}

/// Runs the loop with an optional fixed level and channel override.
fn simulate(
    setup: &EpisodeSetup,
    fixed: Option<f64>,
    channel: &ChannelSpec,
) -> Result<(Vec<StepTrace>, u64)> {
    let family = setup.scheme.family();
    let online = setup.scheme.is_online();
    let decoder_tracks = online && family == Some(Family::Sparse);
    let mut enc = Side::new(setup, fixed, online)?;
    let mut dec = Side::new(setup, fixed, decoder_tracks)?;
    let mut link = Channel::new(channel.clone(), setup.channel_seed)?;
    let measure = &setup.measure;
    let mut steps = Vec::with_capacity(setup.symbols.len());
    let mut divergences = 0u64;

    for (i, &x) in setup.symbols.iter().enumerate() {
        let t = i as u64 + 1;
        let lambda = enc.state.map(|s| s.lambda);
        let e = encode(&mut enc, x, measure)?;

        let sent = link.transmit(t, &e.msg)?;
        let (x_hat, outage_rx) = decode(&mut dec, sent.delivered.as_ref())?;

        let erased = channel::feedback(&sent);
        let mirror = if erased { ml_fallback(&e.dist) } else { e.x_clean };
        let d = measure.eval(x, mirror);
        let d_tilde = measure.eval(x, e.x_clean);
        let fam = family.unwrap_or(Family::RateDistortion);
        let bound = channel_distortion_bound(fam, erased, measure, x, e.x_clean, mirror);
        let delta_ch = true_channel_distortion(fam, erased, measure, x, e.x_clean, mirror);

        let (delta_tgt, q) = match family {
            Some(Family::Sparse) if online => {
                let r = sparse_update(&mut enc, erased, e.outage, bound)?;
                sparse_update(&mut dec, erased, outage_rx, bound)?;
                r
            }
            Some(Family::RateDistortion) if online => {
                let (delta_tgt, q) = match enc.ctrl.as_mut() {
                    Some(c) => {
                        let step = c.record(bound)?;
                        (step.delta_tgt, step.q)
                    }
                    None => (0.0, 0.0),
                };
                let state = enc.state.as_mut().expect("online schemes carry state");
                if setup.scheme.is_adaptive() {
                    ca_update_rd(state, d_tilde, delta_tgt);
                } else {
                    ocrdc::update_lambda(state, d_tilde);
                }
                (delta_tgt, q)
            }
            _ => (0.0, 0.0),
        };

        let state_mismatch = decoder_tracks
            && (enc.state.map(|s| s.lambda.to_bits()) != dec.state.map(|s| s.lambda.to_bits())
                || enc.ctrl.as_ref().map(|c| c.queue.q.to_bits())
                    != dec.ctrl.as_ref().map(|c| c.queue.q.to_bits()));
        if mirror != x_hat || state_mismatch {
            divergences += 1;
        }

        enc.advance(mirror);
        dec.advance(x_hat);

        steps.push(StepTrace {
            t,
            x,
            x_tilde: e.x_tilde,
            x_hat,
            b_t: e.msg.len() as u64,
            ideal_bits: e.ideal_bits,
            erased,
            lambda,
            lambda_next: enc.state.map(|s| s.lambda),
            s: e.level.value(),
            delta_ch,
            delta_ch_bound: bound,
            delta_tgt,
            q,
            d,
            d_tilde,
            outage: e.outage,
            outage_masked: e.outage && !erased,
            msg_hex: e.msg.bits.to_hex(),
            channel_state: sent.hidden_state,
        });
    }
    Ok((steps, divergences))
}

/// Error-free distortion of a fixed-level run: outage frequency for the
/// sparse family, `d(x, x_tilde)` average for the rate-distortion family.
pub fn fixed_level_distortion(setup: &EpisodeSetup, level: f64) -> Result<f64> {
    let (steps, _) = simulate(setup, Some(level), &ChannelSpec::Ideal)?;
    let agg = Aggregates::from_steps(&steps)?;
    Ok(match setup.scheme.family() {
        Some(Family::Sparse) => agg.outage_rate,
        _ => agg.avg_d_tilde,
    })
}

/// Exhaustive offline search over the grid, with full access to the
/// sequence and an error-free link.
pub fn block_search(setup: &EpisodeSetup) -> Result<BlockOutcome> {
    let family = setup
        .scheme
        .family()
        .filter(|_| setup.scheme.is_block())
        .ok_or_else(|| Error::Config(format!("{} is not a block scheme", setup.scheme)))?;
    let evaluated = grid_levels(family, setup.block)?
        .into_iter()
        .map(|s| Ok((s, fixed_level_distortion(setup, s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(select_level(family, &evaluated, setup.hyper.target))
}

pub fn run_setup(setup: &EpisodeSetup) -> Result<Episode> {
    setup.validate()?;
    let block = if setup.scheme.is_block() {
        Some(block_search(setup)?)
    } else {
        None
    };
    let (steps, divergences) = simulate(setup, block.as_ref().map(|b| b.level), &setup.channel)?;
    let aggregates = Aggregates::from_steps(&steps)?;
    let erasures: Vec<bool> = steps.iter().map(|s| s.erased).collect();
    let (verdicts, tau_max) = episode_verdicts(&BoundContext::from_setup(setup), &aggregates, &erasures)?;
    Ok(Episode {
        summary: EpisodeSummary {
            scheme: setup.scheme,
            seed: setup.seed,
            target: setup.hyper.target,
            aggregates,
            divergences,
            verdicts,
            tau_max,
            segment_boundaries: setup.boundaries.clone(),
            block,
            config: None,
        },
        steps,
    })
}

pub fn run_episode(cfg: &RunConfig) -> Result<Episode> {
    let mut ep = run_setup(&EpisodeSetup::from_config(cfg)?)?;
    ep.summary.config = Some(cfg.clone());
    Ok(ep)
}
