use occ_core::adaptive::{Controller, DistortionQueue};
use occ_core::bounds::{self, AdaptiveConstant, Status, Verdict};
use occ_core::channel::{self, Channel, ChannelSpec};
use occ_core::coder::Codebook;
use occ_core::harness::config::{Hyperparameters, Scheme};
use occ_core::harness::{run_setup, EpisodeSetup};
use occ_core::ocrdc::{rd_cost, rd_select};
use occ_core::predictor::{MarkovPredictor, Predictor};
use occ_core::{DistortionMeasure, Distribution};
use proptest::prelude::*;

fn weights(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![3 => 1e-6f64..1.0, 1 => Just(0.0)], 2..max_len)
        .prop_filter("some mass", |w| w.iter().any(|&x| x > 0.0))
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn codebook_round_trips_and_is_prefix_free(w in weights(300)) {
        let p = normalize(&w);
        let book = Codebook::build(&p).unwrap();
        let mut stream = Vec::new();
        let mut sent = Vec::new();
        let mut kraft = 0.0;
        for (s, &ps) in p.iter().enumerate() {
            match book.codeword(s) {
                Some(bits) => {
                    prop_assert!(ps > 0.0);
                    kraft += 0.5f64.powi(bits.len() as i32);
                    stream.extend_from_slice(bits.as_slice());
                    sent.push(s);
                }
                None => prop_assert_eq!(ps, 0.0),
            }
        }
        prop_assert!(kraft <= 1.0 + 1e-12);
        // a concatenated stream parses back codeword by codeword
        let mut pos = 0;
        for &s in &sent {
            let (got, used) = book.decode(&stream[pos..]).unwrap();
            prop_assert_eq!(got, s);
            pos += used;
        }
        prop_assert_eq!(pos, stream.len());
    }

    #[test]
    fn codeword_lengths_follow_probability(w in weights(64)) {
        let p = normalize(&w);
        let book = Codebook::build(&p).unwrap();
        for (s, &ps) in p.iter().enumerate().filter(|(_, &x)| x > 0.0) {
            let l = book.length(s).unwrap() as f64;
            prop_assert!(l >= -ps.log2() - 1e-9 || book.support().count() == 1);
            prop_assert!(l < -ps.log2() + 1.0 + 1e-9);
        }
    }

    #[test]
    fn markov_predictions_are_floored_distributions(
        corpus in prop::collection::vec(0usize..6, 0..300),
        history in prop::collection::vec(0usize..6, 0..5),
        alpha in 0.01f64..1.0,
        order in 0usize..3,
    ) {
        let m = MarkovPredictor::train(6, order, alpha, &corpus).unwrap();
        let d = m.predict(&history);
        let sum: f64 = d.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(d.min_prob() >= alpha / 6.0 * (1.0 - 1e-12));
        prop_assert_eq!(d, m.predict(&history));
        let l = Predictor::Markov(m).cost_bound_bits().unwrap();
        prop_assert!((l - (6.0 / alpha).log2()).abs() < 1e-12);
    }

    #[test]
    fn envelope_grows_with_window(bits in prop::collection::vec(any::<bool>(), 3..120)) {
        let seq: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
        let profile = channel::envelope_profile(&bits);
        prop_assert_eq!(profile.len(), bits.len() - 1);
        for tau in 1..bits.len() {
            prop_assert_eq!(channel::envelope(&seq, tau).unwrap(), profile[tau - 1] as f64);
        }
        prop_assert!(profile.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn queue_tracks_cumulative_difference(
        arrivals in prop::collection::vec(0.0f64..1.0, 1..200),
        target in 0.05f64..0.9,
    ) {
        let eps = (target / 2.0).min(0.05);
        let mut ctl = Controller::new(target, eps).unwrap();
        let mut used = Vec::new();
        for &a in &arrivals {
            let step = ctl.record(a).unwrap();
            prop_assert!(step.q >= 0.0);
            prop_assert!(step.delta_tgt >= 0.0 && step.delta_tgt <= target - eps);
            prop_assert_eq!(step.next, (target - eps).min(step.q));
            used.push(step.delta_tgt);
        }
        let ch: f64 = arrivals.iter().sum();
        let tgt: f64 = used.iter().sum();
        let q = ctl.queue.q;
        prop_assert!((q - (ch - tgt)).abs() < 1e-9);
        prop_assert!((ctl.queue.delta_ch_cum - ch).abs() < 1e-9);
        prop_assert!((ctl.queue.delta_tgt_cum - tgt).abs() < 1e-9);
    }

    #[test]
    fn queue_rejects_negative_inputs(a in -1.0f64..-1e-9) {
        let mut q = DistortionQueue::new();
        prop_assert!(q.step(a, 0.0).is_err());
        prop_assert!(q.step(0.0, a).is_err());
    }

    #[test]
    fn bounds_shrink_with_horizon(
        d in 0.01f64..0.99,
        eta in 0.001f64..2.0,
        lambda0 in 0.001f64..2.0,
        eps_frac in 0.05f64..0.95,
        t1 in 1u64..100_000,
        dt in 1u64..100_000,
        q in 0.0f64..50.0,
        tau in 1u64..1000,
    ) {
        let t2 = t1 + dt;
        let eps = d * eps_frac;
        let l = 9.0;
        prop_assert!(bounds::outage_rhs(d, eta, lambda0, t2).unwrap() <= bounds::outage_rhs(d, eta, lambda0, t1).unwrap());
        let lambda0 = lambda0.min(l / d);
        prop_assert!(bounds::distortion_rhs(d, eta, lambda0, l, 1.0, t2).unwrap() <= bounds::distortion_rhs(d, eta, lambda0, l, 1.0, t1).unwrap());
        for k in [
            AdaptiveConstant::Sparse { eta, epsilon: eps, lambda0 },
            AdaptiveConstant::RateDistortion { eta, epsilon: eps, lambda0, cost_bound: l, d_max: 1.0 },
        ] {
            prop_assert!(k.value() >= 0.0);
            prop_assert!(bounds::adaptive_average_rhs(d, k, t2, q).unwrap() <= bounds::adaptive_average_rhs(d, k, t1, q).unwrap());
            prop_assert!(bounds::envelope_rhs(d, k, t2, tau, eps, 1.0).unwrap() <= bounds::envelope_rhs(d, k, t1, tau, eps, 1.0).unwrap());
        }
    }

    #[test]
    fn verdicts_agree_with_slack(lhs in -10.0f64..10.0, rhs in -10.0f64..10.0) {
        let v = Verdict::check("x", lhs, rhs);
        let slack = v.slack.unwrap();
        prop_assert_eq!(slack, rhs - lhs);
        prop_assert_eq!(v.holds(), slack >= 0.0);
        prop_assert_eq!(v.status == Status::Holds, !v.violated());
        let s = Verdict::check_strict("x", lhs, rhs);
        prop_assert_eq!(s.holds(), rhs - lhs > 0.0);
    }

    #[test]
    fn rd_selection_minimizes_cost(w in weights(40), x in 0usize..40, s in 0.0f64..50.0, seed in any::<u64>()) {
        let p = normalize(&w);
        let n = p.len();
        let x = x % n;
        let dist = Distribution::new(p).unwrap();
        let emb = occ_core::harness::config::gaussian_embeddings(n, 4, seed);
        let m = DistortionMeasure::cosine_from_embeddings(&emb).unwrap();
        let y = rd_select(&dist, x, s, &m);
        let best = rd_cost(&dist, &m, x, y, s);
        for z in 0..n {
            let c = rd_cost(&dist, &m, x, z, s);
            prop_assert!(best < c || (best == c && y <= z));
        }
    }

    #[test]
    fn seeded_channels_replay(seed in any::<u64>(), e in 0.0f64..1.0) {
        for spec in [
            ChannelSpec::Bernoulli { e },
            ChannelSpec::GilbertElliott { a: 0.2, b: e.max(1e-3), e_b: 1.0, e_g: 0.0, initial: Default::default() },
        ] {
            let mut a = Channel::new(spec.clone(), seed).unwrap();
            let mut b = Channel::new(spec, seed).unwrap();
            for t in 1..200 {
                prop_assert_eq!(a.erasure(t).unwrap(), b.erasure(t).unwrap());
            }
        }
    }

    #[test]
    fn threshold_parameter_respects_floor(
        symbols in prop::collection::vec(0usize..8, 50..400),
        d in 0.0f64..=1.0,
        eta in 0.01f64..2.0,
        lambda0 in 0.001f64..1.0,
    ) {
        let setup = EpisodeSetup::new(
            Scheme::Ocsc,
            symbols,
            Predictor::uniform(8),
            DistortionMeasure::Outage,
            Hyperparameters { target: d, eta, lambda0, epsilon: None },
        );
        let ep = run_setup(&setup).unwrap();
        let floor = -eta * (1.0 - d);
        for s in &ep.steps {
            prop_assert!(s.lambda_next.unwrap() >= floor - 1e-12);
        }
        prop_assert_eq!(ep.summary.divergences, 0);
        prop_assert!(!ep.summary.any_violated());
    }
}
