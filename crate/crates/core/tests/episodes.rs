use occ_core::channel::{ChannelSpec, GeInit};
use occ_core::harness::config::{DistortionSpec, Hyperparameters, PredictorSpec, RunConfig, Scheme};
use occ_core::harness::episode::{block_search, fixed_level_distortion, Aggregates};
use occ_core::harness::source::{MarkovSourceSpec, Segment, SourceSpec};
use occ_core::harness::sweep::sweep;
use occ_core::harness::trace::{moving_average, read_steps, write_episode};
use occ_core::harness::{run_episode, run_setup, EpisodeSetup};
use occ_core::predictor::Predictor;
use occ_core::DistortionMeasure;

fn hyper(target: f64) -> Hyperparameters {
    Hyperparameters {
        target,
        ..Default::default()
    }
}

fn small_cfg(scheme: Scheme) -> RunConfig {
    let mut cfg = RunConfig::new(scheme);
    cfg.alphabet = 16;
    cfg.horizon = 800;
    cfg.seed = 5;
    cfg.source = SourceSpec::Markov {
        spec: MarkovSourceSpec {
            size: 16,
            ..Default::default()
        },
    };
    cfg
}

#[test]
fn uniform_lossless_costs_two_bits() {
    let setup = EpisodeSetup::new(
        Scheme::Ocsc,
        vec![3, 0, 2, 2, 1, 0, 3, 1, 2, 0],
        Predictor::uniform(4),
        DistortionMeasure::Outage,
        hyper(0.0),
    );
    let ep = run_setup(&setup).unwrap();
    assert_eq!(ep.steps.len(), 10);
    for s in &ep.steps {
        assert_eq!(s.b_t, 2);
        assert_eq!(s.x_hat, s.x);
        assert_eq!(s.d, 0.0);
    }
    assert_eq!(ep.summary.aggregates.rate, 2.0);
}

#[test]
fn slope_collapses_at_max_distortion() {
    let mut cfg = small_cfg(Scheme::Ocrdc);
    cfg.hyperparameters = Hyperparameters {
        target: 1.0,
        eta: 0.5,
        lambda0: 0.1,
        epsilon: None,
    };
    let setup = EpisodeSetup::from_config(&cfg).unwrap();
    let ep = run_setup(&setup).unwrap();
    let history: Vec<usize> = ep.steps.iter().map(|s| s.x_hat).collect();
    for s in &ep.steps[10..] {
        assert_eq!(s.s, Some(0.0));
        let t = s.t as usize - 1;
        assert_eq!(s.x_tilde, Some(setup.predictor.predict(&history[..t]).argmax()));
    }
}

#[test]
fn dropout_extremes() {
    let cfg = small_cfg(Scheme::LlmzipDropout);
    let mut setup = EpisodeSetup::from_config(&cfg).unwrap();
    setup.hyper = hyper(0.0);
    let ep = run_setup(&setup).unwrap();
    assert!(ep.steps.iter().all(|s| s.x_hat == s.x && s.x_tilde == Some(s.x)));
    assert_eq!(ep.summary.aggregates.error_rate, 0.0);

    setup.hyper = hyper(1.0);
    let ep = run_setup(&setup).unwrap();
    assert_eq!(ep.summary.aggregates.total_bits, 0);
    let history: Vec<usize> = ep.steps.iter().map(|s| s.x_hat).collect();
    let mut misses = 0;
    for s in &ep.steps {
        let t = s.t as usize - 1;
        assert_eq!(s.x_hat, setup.predictor.predict(&history[..t]).argmax());
        misses += usize::from(s.x != s.x_hat);
    }
    assert_eq!(
        ep.summary.aggregates.error_rate,
        misses as f64 / ep.steps.len() as f64
    );
}

#[test]
fn block_threshold_is_the_largest_feasible_level() {
    let mut cfg = small_cfg(Scheme::BlockCsc);
    cfg.horizon = 500;
    cfg.hyperparameters = hyper(0.2);
    let setup = EpisodeSetup::from_config(&cfg).unwrap();
    let out = block_search(&setup).unwrap();
    assert!(out.feasible);
    let s = out.s_star.unwrap();
    assert!(fixed_level_distortion(&setup, s).unwrap() <= 0.2);
    let levels: Vec<f64> = out.evaluated.iter().map(|e| e.0).collect();
    let i = levels.iter().position(|&l| l == s).unwrap();
    // every larger grid point misses the target
    for &l in &levels[i + 1..] {
        assert!(fixed_level_distortion(&setup, l).unwrap() > 0.2);
    }
    let ep = run_setup(&setup).unwrap();
    assert!(ep.summary.aggregates.outage_rate <= 0.2);
}

#[test]
fn block_slope_is_the_smallest_feasible_level() {
    let mut cfg = small_cfg(Scheme::BlockCrdc);
    cfg.horizon = 500;
    cfg.distortion = DistortionSpec::RandomCosine { dim: 8, seed: 1 };
    cfg.hyperparameters = hyper(0.2);
    let setup = EpisodeSetup::from_config(&cfg).unwrap();
    let out = block_search(&setup).unwrap();
    let s = out.s_star.unwrap();
    assert!(fixed_level_distortion(&setup, s).unwrap() <= 0.2);
    let levels: Vec<f64> = out.evaluated.iter().map(|e| e.0).collect();
    let i = levels.iter().position(|&l| l == s).unwrap();
    if i > 0 {
        assert!(fixed_level_distortion(&setup, levels[i - 1]).unwrap() > 0.2);
    }

    let mut top = setup.clone();
    top.hyper = hyper(top.measure.d_max());
    assert_eq!(block_search(&top).unwrap().s_star, Some(0.0));
}

#[test]
fn replay_is_byte_identical() {
    let mut cfg = small_cfg(Scheme::CaOcrdc);
    cfg.distortion = DistortionSpec::RandomCosine { dim: 8, seed: 2 };
    cfg.channel = ChannelSpec::GilbertElliott {
        a: 0.2,
        b: 0.05,
        e_b: 1.0,
        e_g: 0.0,
        initial: GeInit::Stationary,
    };
    cfg.hyperparameters = hyper(0.3);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_episode(d.path(), &run_episode(&cfg).unwrap(), true).unwrap();
    }
    for f in ["trace.jsonl", "summary.json"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn summary_is_recomputable_from_trace() {
    let mut cfg = small_cfg(Scheme::CaOcsc);
    cfg.channel = ChannelSpec::Bernoulli { e: 0.1 };
    cfg.hyperparameters = hyper(0.3);
    let ep = run_episode(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_episode(dir.path(), &ep, true).unwrap();
    let steps = read_steps(&std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap()).unwrap();
    assert_eq!(steps, ep.steps);
    assert_eq!(Aggregates::from_steps(&steps).unwrap(), ep.summary.aggregates);

    let bits: u64 = steps.iter().map(|s| s.b_t).sum();
    assert_eq!(ep.summary.aggregates.total_bits, bits);
    assert_eq!(ep.summary.aggregates.rate, bits as f64 / steps.len() as f64);
    for s in &steps {
        assert_eq!(s.msg_hex.len() as u64, s.b_t.div_ceil(8) * 2);
    }

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["scheme"], "ca_ocsc");
    assert_eq!(json["D"], 0.3);
    assert!(json["config"].is_object());
}

#[test]
fn erased_steps_fall_back_to_the_most_likely_symbol() {
    let mut cfg = small_cfg(Scheme::CaOcrdc);
    cfg.distortion = DistortionSpec::RandomCosine { dim: 8, seed: 3 };
    cfg.channel = ChannelSpec::Bernoulli { e: 0.3 };
    cfg.hyperparameters = hyper(0.3);
    let setup = EpisodeSetup::from_config(&cfg).unwrap();
    let ep = run_setup(&setup).unwrap();
    let history: Vec<usize> = ep.steps.iter().map(|s| s.x_hat).collect();
    let erased: Vec<_> = ep.steps.iter().filter(|s| s.erased).collect();
    assert!(erased.len() > 100);
    for s in erased {
        let t = s.t as usize - 1;
        assert_eq!(s.x_hat, setup.predictor.predict(&history[..t]).argmax());
        // the bound on the channel distortion dominates the realized one
        assert!(s.delta_ch_bound >= s.delta_ch - 1e-12);
    }
    assert_eq!(ep.summary.divergences, 0);
}

#[test]
fn online_learning_stays_synchronized() {
    let mut cfg = small_cfg(Scheme::CaOcsc);
    cfg.predictor = PredictorSpec::Markov {
        order: 1,
        alpha: 0.05,
        train_len: 500,
        corpus: None,
        online: true,
    };
    cfg.channel = ChannelSpec::Bernoulli { e: 0.2 };
    cfg.hyperparameters = hyper(0.3);
    let ep = run_episode(&cfg).unwrap();
    assert_eq!(ep.summary.divergences, 0);
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let var: f64 = ra.iter().map(|x| (x - m) * (x - m)).sum();
    cov / var
}

#[test]
fn sweep_outage_and_rate_trend() {
    let mut cfg = RunConfig::new(Scheme::Ocsc);
    cfg.horizon = 2000;
    cfg.source = SourceSpec::Markov {
        spec: MarkovSourceSpec {
            order: 1,
            leak: 0.3,
            ..Default::default()
        },
    };
    cfg.predictor = PredictorSpec::Markov {
        order: 1,
        alpha: 0.05,
        train_len: 20_000,
        corpus: None,
        online: false,
    };
    let grid: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
    let rows = sweep(&cfg, &grid, &[Scheme::Ocsc], &[0, 1]);
    assert_eq!(rows.len(), 20);
    let h = cfg.hyperparameters;
    for r in &rows {
        let d = r.target;
        let slack = (h.eta * (1.0 - d) + h.lambda0) / (h.eta * 2000.0);
        assert!(r.outage_rate.unwrap() <= d + slack, "{r:?}");
        assert_eq!(r.divergences, Some(0));
    }
    let d: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let rate: Vec<f64> = rows.iter().map(|r| r.rate.unwrap()).collect();
    assert!(spearman(&d, &rate) < 0.0);
}

#[test]
fn segment_boundary_and_windowed_outage() {
    let a = MarkovSourceSpec {
        size: 16,
        order: 1,
        model_seed: 11,
        ..Default::default()
    };
    let b = MarkovSourceSpec { model_seed: 12, ..a };
    let mut cfg = RunConfig::new(Scheme::Ocsc);
    cfg.alphabet = 16;
    cfg.horizon = 6000;
    cfg.source = SourceSpec::Concat {
        segments: vec![Segment { source: a, len: 3000 }, Segment { source: b, len: 3000 }],
    };
    cfg.predictor = PredictorSpec::Markov {
        order: 1,
        alpha: 0.05,
        train_len: 6000,
        corpus: None,
        online: false,
    };
    cfg.hyperparameters = hyper(0.2);
    let online = run_episode(&cfg).unwrap();
    assert_eq!(online.summary.segment_boundaries, vec![3000]);

    cfg.scheme = Scheme::BlockCsc;
    let block = run_episode(&cfg).unwrap();
    assert!(block.summary.block.as_ref().unwrap().level > 0.0);

    let windowed = |ep: &occ_core::harness::Episode| {
        let out: Vec<f64> = ep.steps.iter().map(|s| f64::from(u8::from(s.outage))).collect();
        moving_average(&out, 250)
    };
    let (w_on, w_blk) = (windowed(&online), windowed(&block));
    let spread = |w: &[f64]| {
        let m = w.iter().sum::<f64>() / w.len() as f64;
        w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / w.len() as f64
    };
    for half in [250..3000, 3250..6000] {
        let on = &online.steps[half.clone()];
        let rate = on.iter().filter(|s| s.outage).count() as f64 / on.len() as f64;
        assert!(rate <= 0.2 + 0.02, "online half outage {rate}");
    }
    assert!(spread(&w_blk[3250..]) > spread(&w_on[3250..]));
}
