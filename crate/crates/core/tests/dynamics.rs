use diglab::autodiff::Array;
use diglab::dynamics::*;
use diglab::ganreg::RegularizerKind;
use diglab::nn::{snapshot, MlpParams};
use proptest::prelude::*;

fn short(seed: u64, regularizer: RegularizerKind, iterations: usize) -> GanConfig {
    GanConfig {
        seed,
        regularizer,
        iterations,
        ..GanConfig::default()
    }
}

fn run(config: &GanConfig) -> TrainOutcome {
    let dataset = Dataset::from_config(config).unwrap();
    let (g, d) = initial_params(config).unwrap();
    train(config, &dataset, &g, &d).unwrap()
}

/// Generator whose weights are all zero, so every code maps to `5 * tanh(bias)`.
fn constant_generator(config: &GanConfig, point: f64) -> MlpParams {
    let mut g = MlpParams::zeros(&config.generator_config()).unwrap();
    let last = g.layers.last_mut().unwrap();
    last.bias.values_mut()[0] = (point / config.gen_output_scale).atanh();
    g
}

#[test]
fn record_count_follows_log_stride() {
    let mut c = short(0, RegularizerKind::None, 10);
    c.log_stride = 1;
    assert_eq!(run(&c).log.records.len(), 10);
    for (iters, stride) in [(25, 10), (30, 10), (7, 3), (1, 5)] {
        let c = GanConfig {
            log_stride: stride,
            ..short(1, RegularizerKind::Dig, iters)
        };
        let log = run(&c).log;
        assert_eq!(log.records.len(), iters.div_ceil(stride), "{iters}/{stride}");
        assert!(log.records.windows(2).all(|w| w[0].iter < w[1].iter));
    }
}

#[test]
fn zero_lambda_reproduces_vanilla_trajectory() {
    let vanilla = run(&short(3, RegularizerKind::None, 600));
    for kind in [RegularizerKind::Dig, RegularizerKind::Gp1, RegularizerKind::Dragan] {
        let c = GanConfig {
            lambda: 0.0,
            ..short(3, kind, 600)
        };
        let other = run(&c);
        assert_eq!(other.log, vanilla.log, "{kind:?}");
        assert_eq!(other.generator, vanilla.generator);
        assert_eq!(other.discriminator, vanilla.discriminator);
    }
}

#[test]
fn identical_seed_gives_bit_identical_log() {
    let c = short(11, RegularizerKind::Dig, 400);
    let a = run(&c);
    let b = run(&c);
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    let other = run(&short(12, RegularizerKind::Dig, 400));
    assert_ne!(a.log, other.log);
}

#[test]
fn logged_gap_matches_logged_norms() {
    let log = run(&short(2, RegularizerKind::Dig, 500)).log;
    for r in &log.records {
        let offline = (r.norm_real - r.norm_fake).powi(2);
        assert!((r.gap - offline).abs() <= 1e-12, "{} vs {offline}", r.gap);
        assert!(r.norm_real >= 0.0 && r.norm_fake >= 0.0);
    }
}

#[test]
fn trajectory_csv_round_trips() {
    let log = run(&short(4, RegularizerKind::Dig, 200)).log;
    let csv = log.to_csv();
    assert!(csv.starts_with("iter,fake_0,fake_1,norm_R,norm_F,R,L_D,L_G,D_real_mean,D_fake_mean\n"));
    assert_eq!(TrajectoryLog::from_csv(&csv).unwrap(), log);
    assert!(TrajectoryLog::from_csv("iter,fake_0\n").is_err());
}

#[test]
fn generator_update_ignores_the_regularizer() {
    let vanilla = short(5, RegularizerKind::None, 1);
    let (g, d) = initial_params(&vanilla).unwrap();
    let z = LatentSampler::new(&vanilla).next_batch();
    let base = generator_step(&vanilla, &g, &d, &z).unwrap();
    for kind in RegularizerKind::ALL {
        let c = GanConfig {
            regularizer: kind,
            lambda: 7.0,
            ..vanilla.clone()
        };
        assert_eq!(generator_step(&c, &g, &d, &z).unwrap(), base, "{kind:?}");
    }
}

#[test]
fn fixed_codes_are_minus_one_and_one() {
    let mut s = LatentSampler::new(&GanConfig::default());
    let z = s.next_batch();
    assert_eq!(z.values(), &[-1.0, 1.0]);
    assert_eq!(s.next_batch(), z);
    let mut fresh = LatentSampler::new(&GanConfig {
        fixed_codes: false,
        ..GanConfig::default()
    });
    assert_ne!(fresh.next_batch(), fresh.next_batch());
}

#[test]
fn exploding_run_is_marked_diverged() {
    let c = GanConfig {
        learning_rate: 1e7,
        ..short(0, RegularizerKind::None, 50)
    };
    let out = run(&c);
    let d = out.log.diverged.expect("diverged");
    assert_eq!(d.iteration, 0);
    assert!(d.reason.contains("exceeds"), "{}", d.reason);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        GanConfig {
            iterations: 0,
            ..GanConfig::default()
        },
        GanConfig {
            learning_rate: 0.0,
            ..GanConfig::default()
        },
        GanConfig {
            alpha: 0.0,
            ..GanConfig::default()
        },
        GanConfig {
            alpha: 1.5,
            ..GanConfig::default()
        },
        GanConfig {
            data: vec![],
            ..GanConfig::default()
        },
        GanConfig {
            data: vec![vec![0.0], vec![f64::NAN]],
            ..GanConfig::default()
        },
        GanConfig {
            regularizer: RegularizerKind::Dig,
            fake_batch: 3,
            ..GanConfig::default()
        },
    ];
    for c in bad {
        assert!(matches!(c.validate(), Err(DynamicsError::Config(_))), "{c:?}");
    }
}

#[test]
fn mismatched_initial_params_are_rejected() {
    let c = GanConfig::default();
    let dataset = Dataset::from_config(&c).unwrap();
    let (g, d) = initial_params(&c).unwrap();
    assert!(matches!(train(&c, &dataset, &d, &g), Err(DynamicsError::Config(_))));
}

#[test]
fn perturbation_examples() {
    let (_, d) = initial_params(&GanConfig::default()).unwrap();
    assert_eq!(perturb_params(&d, 0.0, 1).unwrap(), d);
    let a = perturb_params(&d, 1.0, 1).unwrap();
    let b = perturb_params(&d, 1.0, 2).unwrap();
    assert_ne!(a, b);
    assert_eq!(perturb_params(&d, 1.0, 1).unwrap(), a);
    assert!(perturb_params(&d, -1.0, 1).is_err());

    let diffs: Vec<f64> = a.flat().iter().zip(d.flat()).map(|(x, y)| x - y).collect();
    assert_eq!(diffs.len(), 251);
    let mean = diffs.iter().sum::<f64>() / 251.0;
    let var = diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 250.0;
    assert!((var - 1.0).abs() < 0.3, "sample variance {var}");
}

#[test]
fn optimality_training_on_a_collapsed_generator() {
    let c = GanConfig {
        regularizer: RegularizerKind::Dig,
        ..GanConfig::default()
    };
    let dataset = Dataset::from_config(&c).unwrap();
    let g = constant_generator(&c, 0.0);
    let fakes = generate(&g, &LatentSampler::new(&c).next_batch());
    assert!(fakes.values().iter().all(|v| v.abs() < 1e-15));
    let (_, d0) = initial_params(&c).unwrap();

    let opt = train_discriminator_to_optimality(&c, &dataset, &g, &d0).unwrap();
    assert!(opt.final_objective <= opt.initial_objective);
    assert_eq!(opt.stop, StopRule::GradientTolerance, "{opt:?}");
    assert!(opt.final_grad_linf < c.optimality_tol);
    assert!(opt.gap < ESCAPE_GAP_LIMIT, "gap {}", opt.gap);

    let again = train_discriminator_to_optimality(&c, &dataset, &g, &opt.discriminator).unwrap();
    assert_eq!(again.steps, 0);
    assert_eq!(again.discriminator, opt.discriminator);
}

#[test]
fn optimality_step_cap_is_reported() {
    let c = GanConfig {
        regularizer: RegularizerKind::Dig,
        optimality_max_steps: 3,
        ..GanConfig::default()
    };
    let dataset = Dataset::from_config(&c).unwrap();
    let (g, d) = initial_params(&c).unwrap();
    let opt = train_discriminator_to_optimality(&c, &dataset, &g, &d).unwrap();
    assert_eq!(opt.stop, StopRule::StepCap);
    assert_eq!(opt.steps, 3);
}

#[test]
fn avoid_shares_the_stuck_initialization() {
    let base = short(9, RegularizerKind::None, 100);
    let stuck = run_experiment(ExperimentKind::Stuck, &base, None).unwrap();
    let avoid = run_experiment(ExperimentKind::Avoid, &base, None).unwrap();
    let (s, a) = (stuck.runs[0].summary(), avoid.runs[0].summary());
    assert_eq!(s.init_generator_hash, a.init_generator_hash);
    assert_eq!(s.init_discriminator_hash, a.init_discriminator_hash);
    assert_eq!(s.regularizer, RegularizerKind::None);
    assert_eq!(a.regularizer, RegularizerKind::Dig);
    assert_eq!(
        snapshot::hash(&stuck.runs[0].init_generator),
        snapshot::hash(&initial_params(&base).unwrap().0)
    );
}

#[test]
fn perturb_bundle_has_four_tagged_runs() {
    let base = short(1, RegularizerKind::None, 60);
    let stuck = run_experiment(ExperimentKind::Stuck, &base, None).unwrap();
    let art = stuck.stuck_artifacts().unwrap();
    let p = run_experiment(ExperimentKind::Perturb, &base, Some(&art)).unwrap();
    let tags: Vec<&str> = p.runs.iter().map(|r| r.tag.as_str()).collect();
    assert_eq!(tags, ["var0.1", "var1", "var5", "var10"]);
    for r in &p.runs {
        assert_eq!(r.init_generator, art.generator);
        assert_ne!(r.init_discriminator, art.discriminator);
        assert!(r.coverage.covered_modes <= 2);
    }
}

#[test]
fn continuation_experiments_need_stuck_artifacts() {
    let base = short(0, RegularizerKind::None, 10);
    for kind in [ExperimentKind::Perturb, ExperimentKind::Escape] {
        let e = run_experiment(kind, &base, None).unwrap_err();
        assert!(matches!(e, DynamicsError::MissingArtifact(_)), "{e}");
        assert!(e.to_string().contains("stuck"));
    }
}

#[test]
fn escape_rejects_a_large_gap_start() {
    let base = GanConfig {
        optimality_max_steps: 1,
        ..short(0, RegularizerKind::None, 50)
    };
    let stuck = run_experiment(ExperimentKind::Stuck, &base, None).unwrap();
    let e = run_experiment(ExperimentKind::Escape, &base, stuck.stuck_artifacts().as_ref()).unwrap_err();
    assert!(matches!(e, DynamicsError::Precondition(_)), "{e}");
}

#[test]
fn compare_runs_every_kind_from_one_start() {
    let base = short(2, RegularizerKind::None, 40);
    let runs = compare(&base, &RegularizerKind::ALL).unwrap();
    assert_eq!(runs.len(), 6);
    let first = runs[0].summary();
    for r in &runs {
        assert_eq!(r.summary().init_discriminator_hash, first.init_discriminator_hash);
        assert_eq!(r.tag, r.config.regularizer.as_str());
    }
}

#[test]
fn trap_iteration_and_window_means() {
    let rec = |iter, a: f64, b: f64, gap| TrajectoryRecord {
        iter,
        fakes: vec![a, b],
        norm_real: 0.0,
        norm_fake: 0.0,
        gap,
        d_loss: 0.0,
        g_loss: 0.0,
        d_real_mean: 0.0,
        d_fake_mean: 0.0,
    };
    let log = TrajectoryLog {
        records: vec![
            rec(0, 2.0, 2.0, 1.0),
            rec(10, 0.1, 0.0, 3.0),
            rec(20, 1.0, 0.0, 5.0),
            rec(30, 0.1, 0.1, 7.0),
            rec(40, 0.0, 0.05, 9.0),
        ],
        diverged: None,
    };
    assert_eq!(trap_iteration(&log, &[0.0, 4.0], 0.25), Some(30));
    assert_eq!(mean_gap(&log, 10, 30), Some(4.0));
    assert_eq!(mean_gap(&log, 100, 200), None);
    assert_eq!(max_excursion(&log, 0.0), 2.0);
}

#[test]
fn coverage_examples() {
    let c = coverage_1d(&[0.01, 3.98], &[0.0, 4.0], 0.25);
    assert_eq!((c.covered_modes, c.trapped_mode), (2, None));
    let c = coverage_1d(&[0.0, 0.1], &[0.0, 4.0], 0.25);
    assert_eq!((c.covered_modes, c.trapped_mode), (1, Some(0)));
    let c = coverage_1d(&[2.0, 2.0], &[0.0, 4.0], 0.25);
    assert_eq!((c.covered_modes, c.trapped_mode), (0, None));
}

#[test]
fn presets_resolve() {
    let dig = GanConfig::preset("paper-toy-dig").unwrap();
    assert_eq!(dig.regularizer, RegularizerKind::Dig);
    assert_eq!((dig.lambda, dig.alpha, dig.learning_rate, dig.momentum), (1.0, 1.0, 0.01, 0.9));
    assert_eq!(dig.iterations, 10_000);
    assert_eq!(dig.data, vec![vec![0.0], vec![4.0]]);
    assert_eq!(GanConfig::preset("limited-data-20pct").unwrap().lambda, 5000.0);
    let e = GanConfig::preset("paper-toy").unwrap_err().to_string();
    assert!(e.contains("paper-toy-vanilla"), "{e}");
}

#[test]
fn unknown_config_key_is_suggested() {
    assert_eq!(suggest_key("learning_rat"), Some("learning_rate"));
    assert_eq!(suggest_key("zzzz"), None);
}

#[test]
fn stream_seeds_are_distinct() {
    let s = [
        Stream::GeneratorInit,
        Stream::DiscriminatorInit,
        Stream::Latent,
        Stream::Regularizer,
        Stream::Perturbation,
    ];
    let mut v: Vec<u64> = s.iter().map(|&k| stream_seed(0, k)).collect();
    v.extend(s.iter().map(|&k| stream_seed(1, k)));
    let n = v.len();
    v.sort_unstable();
    v.dedup();
    assert_eq!(v.len(), n);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covered_modes_never_exceed_modes(points in proptest::collection::vec(-6.0f64..6.0, 1..5), eps in 0.01f64..3.0) {
        let c = coverage_1d(&points, &[0.0, 4.0], eps);
        prop_assert!(c.covered_modes <= 2);
        prop_assert_eq!(c.nearest.len(), 2);
        if let Some(m) = c.trapped_mode {
            prop_assert!(c.nearest[m] <= eps);
        }
    }

    #[test]
    fn config_text_round_trips(lambda in 0.0f64..1e4, alpha in 1e-6f64..=1.0, lr in 1e-6f64..1.0, seed in any::<u64>()) {
        let c = GanConfig { lambda, alpha, learning_rate: lr, seed, ..GanConfig::default() };
        prop_assert_eq!(GanConfig::from_text(&c.to_text()).unwrap(), c);
    }
}

#[test]
fn generated_batch_shape() {
    let c = GanConfig::default();
    let (g, _) = initial_params(&c).unwrap();
    let z = Array::matrix(3, 1, vec![-1.0, 0.0, 1.0]).unwrap();
    assert_eq!(generate(&g, &z).shape(), &[3, 1]);
}
