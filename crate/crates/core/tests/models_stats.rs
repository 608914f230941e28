mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use superhedge::exec::{with_threads, Execution};
use superhedge::models::{
    simulate, simulate_terminal, simulate_with, stochastic_exponential, FbmGenerator, ModelError, ModelKind, ModelSpec,
    DEFAULT_MAX_CELLS,
};

fn spec(kind: ModelKind, n_steps: usize) -> ModelSpec {
    ModelSpec::new(kind, 100.0, 1.0, n_steps)
}

fn default_kind(name: &str) -> ModelKind {
    ModelKind::default_for(name).unwrap()
}

#[test]
fn gbm_terminal_mean_is_spot() {
    let batch = simulate_terminal(
        &spec(ModelKind::Gbm { sigma: 0.2 }, 50),
        100_000,
        1,
        Execution::Parallel,
    )
    .unwrap();
    let (mean, _, se) = moments(&batch.terminal);
    assert!((mean - 100.0).abs() <= 4.0 * se, "mean {mean}, se {se}");
}

#[test]
fn every_model_is_a_discrete_martingale() {
    for name in ModelKind::NAMES {
        let batch = simulate_terminal(&spec(default_kind(name), 50), 40_000, 2, Execution::Parallel).unwrap();
        let (mean, _, se) = moments(&batch.terminal);
        assert!((mean - 100.0).abs() <= 4.0 * se, "{name}: mean {mean}, se {se}");
    }
}

#[test]
fn paths_are_positive_and_start_at_spot() {
    for name in ModelKind::NAMES {
        let batch = simulate(&spec(default_kind(name), 64), 200, 3).unwrap();
        for i in 0..batch.n_paths {
            assert_eq!(batch.spot(i)[0], 100.0);
            assert!(batch.spot(i).iter().all(|&s| s > 0.0), "{name}");
            assert!(batch.vol(i).iter().all(|&v| v > 0.0), "{name}");
        }
        assert_eq!(batch.times.len(), 65);
        assert!((batch.times[1] - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(batch.times[64], 1.0);
    }
}

#[test]
fn degenerate_heston_follows_the_variance_ode() {
    let (v0, kappa, theta) = (0.04, 2.0, 0.09);
    let s = spec(
        ModelKind::Heston {
            v0,
            kappa,
            theta,
            xi: 0.0,
        },
        40,
    );
    let batch = simulate(&s, 50, 4).unwrap();
    let dt = s.dt();
    let mut v = v0;
    let mut expected = vec![v.sqrt()];
    for _ in 0..40 {
        v += kappa * (theta - v) * dt;
        expected.push(v.sqrt());
    }
    for i in 0..batch.n_paths {
        for (got, want) in batch.vol(i).iter().zip(&expected) {
            assert!((got - want).abs() <= 1e-15, "{got} vs {want}");
        }
        // a time-dependent-vol lognormal run with the same W gives the same spot
        let spot = stochastic_exponential(&expected, 100.0, batch.dw(i), dt).unwrap();
        for (a, b) in spot.iter().zip(batch.spot(i)) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }
}

#[test]
fn brownian_rough_model_matches_scott() {
    let y0 = 0.2f64.ln();
    let scott = spec(
        ModelKind::Scott {
            y0,
            kappa: 1.0,
            theta: y0,
            beta: 0.5,
        },
        100,
    );
    let rough = spec(
        ModelKind::RoughFou {
            y0,
            lambda: 1.0,
            theta: y0,
            beta: 0.5,
            hurst: 0.5,
        },
        100,
    );
    let n = 20_000;
    let a = simulate(&scott, n, 5).unwrap();
    let b = simulate(&rough, n, 6).unwrap();
    let last =
        |batch: &superhedge::PathBatch, pow: i32| -> Vec<f64> { (0..n).map(|i| batch.vol(i)[100].powi(pow)).collect() };
    for pow in [1, 2] {
        let (ma, _, sa) = moments(&last(&a, pow));
        let (mb, _, sb) = moments(&last(&b, pow));
        let se = (sa * sa + sb * sb).sqrt();
        assert!((ma - mb).abs() <= 4.0 * se, "moment {pow}: {ma} vs {mb} (se {se})");
    }
}

fn fbm_samples(hurst: f64, n_steps: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let gen = FbmGenerator::new(hurst, n_steps, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| gen.sample(&mut rng)).collect()
}

#[test]
fn brownian_increments_are_uncorrelated() {
    let samples = fbm_samples(0.5, 32, 5000, 7);
    let dt = 1.0 / 32.0;
    let prods: Vec<f64> = samples
        .iter()
        .flat_map(|inc| inc.windows(2).map(|w| w[0] * w[1] / dt).collect::<Vec<_>>())
        .collect();
    let (mean, _, se) = moments(&prods);
    assert!(mean.abs() <= 4.0 * se, "lag-1 correlation {mean}, se {se}");
}

#[test]
fn persistent_fbm_has_unit_terminal_variance() {
    let squares: Vec<f64> = fbm_samples(0.7, 64, 20_000, 8)
        .iter()
        .map(|inc| inc.iter().sum::<f64>().powi(2))
        .collect();
    let (mean, _, se) = moments(&squares);
    assert!((mean - 1.0).abs() <= 4.0 * se, "Var(B_1) {mean}, se {se}");
}

#[test]
fn rough_fbm_covariance_at_half() {
    let prods: Vec<f64> = fbm_samples(0.1, 64, 20_000, 9)
        .iter()
        .map(|inc| inc[..32].iter().sum::<f64>() * inc.iter().sum::<f64>())
        .collect();
    let (mean, _, se) = moments(&prods);
    assert!((mean - 0.5).abs() <= 4.0 * se, "Cov(B_0.5, B_1) {mean}, se {se}");
}

#[test]
fn fbm_size_is_capped() {
    assert!(matches!(
        FbmGenerator::new(0.3, 5000, 1.0),
        Err(ModelError::FbmTooLarge { .. })
    ));
}

#[test]
fn stochastic_exponential_examples() {
    let dt = 0.01;
    let batch = simulate(&spec(ModelKind::Gbm { sigma: 0.3 }, 100), 20, 10).unwrap();
    for i in 0..20 {
        let dw = batch.dw(i);
        let flat = stochastic_exponential(&vec![0.0; 100], 7.0, dw, dt).unwrap();
        assert!(flat.iter().all(|&s| s == 7.0));
        let same = stochastic_exponential(batch.vol(i), 100.0, dw, dt).unwrap();
        assert_eq!(same, batch.spot(i));
    }
    assert!(matches!(
        stochastic_exponential(&[1.0; 3], 1.0, &[0.1; 5], dt),
        Err(ModelError::LengthMismatch { .. })
    ));

    let batch = simulate(&spec(ModelKind::Gbm { sigma: 0.2 }, 50), 50_000, 11).unwrap();
    let ones = vec![1.0; 50];
    let terminal: Vec<f64> = (0..batch.n_paths)
        .map(|i| stochastic_exponential(&ones, 1.0, batch.dw(i), 1.0 / 50.0).unwrap()[50])
        .collect();
    let (mean, _, se) = moments(&terminal);
    assert!((mean - 1.0).abs() <= 4.0 * se, "mean {mean}, se {se}");
}

#[test]
fn batches_are_identical_under_any_schedule() {
    for name in ModelKind::NAMES {
        let s = spec(default_kind(name), 32);
        let seq = simulate_with(&s, 300, 12, Execution::Sequential, DEFAULT_MAX_CELLS).unwrap();
        let par = simulate_with(&s, 300, 12, Execution::Parallel, DEFAULT_MAX_CELLS).unwrap();
        let par3 = with_threads(3, || simulate(&s, 300, 12).unwrap());
        assert_eq!(seq, par, "{name}");
        assert_eq!(seq, par3, "{name}");
        assert_eq!(seq.to_csv(), par3.to_csv());
    }
}

#[test]
fn models_share_the_spot_noise() {
    let a = simulate(&spec(default_kind("heston"), 16), 4, 13).unwrap();
    let b = simulate(&spec(default_kind("rough"), 16), 4, 13).unwrap();
    for i in 0..4 {
        assert_eq!(a.dw(i), b.dw(i));
    }
}

#[test]
fn resource_ceiling_is_enforced() {
    let s = spec(ModelKind::Gbm { sigma: 0.2 }, 100);
    assert!(matches!(
        simulate_with(&s, 1000, 1, Execution::Parallel, 50_000),
        Err(ModelError::ResourceLimit {
            requested: 101_000,
            cap: 50_000
        })
    ));
}

#[test]
fn csv_dump_layout() {
    let batch = simulate(&spec(ModelKind::Gbm { sigma: 0.2 }, 4), 3, 99).unwrap();
    let csv = batch.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# seed=99 model=gbm"));
    assert_eq!(lines[1], "path_id,t,S,nu");
    assert_eq!(lines.len(), 2 + 3 * 5);
    assert_eq!(lines[2], "0,0,100,0.2");
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = [
        ModelKind::Gbm { sigma: 0.0 },
        ModelKind::Heston {
            v0: -0.1,
            kappa: 1.0,
            theta: 0.04,
            xi: 0.3,
        },
        ModelKind::RoughFou {
            y0: 0.0,
            lambda: 1.0,
            theta: 0.0,
            beta: 1.0,
            hurst: 1.0,
        },
    ];
    for kind in bad {
        assert!(simulate(&spec(kind, 10), 10, 1).is_err(), "{kind}");
    }
    assert!(simulate(&ModelSpec::new(ModelKind::Gbm { sigma: 0.2 }, -1.0, 1.0, 10), 10, 1).is_err());
}
