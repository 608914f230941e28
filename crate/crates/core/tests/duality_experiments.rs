mod common;

use common::*;
use superhedge::duality::{
    attainment_experiment, calibrate_gain, incompleteness_probe, mc_upper_bound_check, proximity_diagnostic,
    proximity_experiment, reports_to_csv, AlphaTarget, DualityError, ProbeSettings, VolControl, DEFAULT_GAINS,
    REPORT_HEADER,
};
use superhedge::models::{ModelKind, ModelSpec};
use superhedge::{buy_and_hold_price, parse_payoff};

fn scott(n_steps: usize) -> ModelSpec {
    ModelSpec::new(ModelKind::default_for("scott").unwrap(), 100.0, 1.0, n_steps)
}

#[test]
fn gbm_call_matches_lognormal_formula() {
    let ast = parse_payoff("pos(x-100)").unwrap();
    let hedge = buy_and_hold_price(&ast, 100.0).unwrap();
    let spec = ModelSpec::new(ModelKind::Gbm { sigma: 0.2 }, 100.0, 1.0, 50);
    let r = mc_upper_bound_check(&spec, &ast, &hedge, 100_000, 21).unwrap();
    let closed = lognormal_call(100.0, 100.0, 0.2, 1.0);
    assert!((closed - 7.9656).abs() < 5e-5);
    assert!(
        (r.estimate - closed).abs() <= 4.0 * r.stderr,
        "{} vs {closed} (se {})",
        r.estimate,
        r.stderr
    );
    assert!(r.estimate <= 100.0);
    assert_eq!(r.violations, 0);
}

#[test]
fn constant_claim_has_no_noise() {
    let ast = parse_payoff("5").unwrap();
    let hedge = buy_and_hold_price(&ast, 100.0).unwrap();
    for name in ModelKind::NAMES {
        let spec = ModelSpec::new(ModelKind::default_for(name).unwrap(), 100.0, 1.0, 20);
        let r = mc_upper_bound_check(&spec, &ast, &hedge, 500, 22).unwrap();
        assert_eq!((r.estimate, r.stderr), (5.0, 0.0), "{name}");
    }
}

#[test]
fn scott_butterfly_stays_below_the_price() {
    let ast = parse_payoff(BUTTERFLY).unwrap();
    let hedge = buy_and_hold_price(&ast, 100.0).unwrap();
    let r = mc_upper_bound_check(&scott(50), &ast, &hedge, 50_000, 23).unwrap();
    assert!(r.estimate <= 10.0 + 3.0 * r.stderr, "{}", r.estimate);
    assert_eq!(r.violations, 0);
    assert!(r.diag("min_margin").unwrap() >= -1e-9);
}

#[test]
fn digital_attainment_reaches_threshold() {
    let ast = parse_payoff(DIGITAL).unwrap();
    let r = attainment_experiment(&ast, 1.0, &VolControl::new(0.01, 8.0, 0.2), 1.0, 4000, 20_000, 24).unwrap();
    assert!(r.estimate >= 0.45, "{} (se {})", r.estimate, r.stderr);
    assert!(r.estimate <= 0.5 + 4.0 * r.stderr);
    assert_eq!(r.violations, 0);
}

#[test]
fn attainment_is_law_invariant() {
    let ast = parse_payoff(BUTTERFLY).unwrap();
    let control = VolControl::new(0.01, 4.0, 0.2);
    let a = attainment_experiment(&ast, 100.0, &control, 1.0, 500, 20_000, 25).unwrap();
    let b = attainment_experiment(&ast, 100.0, &control, 1.0, 500, 20_000, 26).unwrap();
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!(
        (a.estimate - b.estimate).abs() <= 4.0 * se,
        "{} vs {}",
        a.estimate,
        b.estimate
    );
    assert_ne!(a.estimate, b.estimate);
}

#[test]
fn concave_claims_are_attained_exactly_in_mean() {
    for (text, s0) in [("min(x,50)", 30.0), ("2*x+1", 3.0)] {
        let ast = parse_payoff(text).unwrap();
        let r = attainment_experiment(&ast, s0, &VolControl::new(0.01, 4.0, 0.2), 1.0, 200, 20_000, 27).unwrap();
        let g = ast.eval(s0);
        assert!(
            (r.estimate - g).abs() <= 4.0 * r.stderr + 1e-12 * g,
            "{text}: {} vs {g}",
            r.estimate
        );
    }
}

#[test]
fn invalid_controls_are_rejected() {
    let ast = parse_payoff(BUTTERFLY).unwrap();
    for c in [
        VolControl::new(0.0, 2.0, 0.2),
        VolControl::new(0.5, 0.4, 0.45),
        VolControl::new(0.01, 2.0, 3.0),
    ] {
        assert!(matches!(
            attainment_experiment(&ast, 100.0, &c, 1.0, 10, 10, 1),
            Err(DualityError::InvalidArgument { .. })
        ));
    }
}

#[test]
fn probe_on_realized_volatility_is_zero() {
    let r = incompleteness_probe(
        &scott(200),
        &AlphaTarget::RealizedNu,
        ProbeSettings::new(0.1, 0.0),
        2000,
        28,
    )
    .unwrap();
    assert_eq!(r.estimate, 0.0);
    assert_eq!(r.diag("entropy"), Some(0.0));
}

#[test]
fn probe_gain_sweep_finds_a_feasible_tilt() {
    let spec = scott(200);
    let target = AlphaTarget::Constant(0.2);
    let (gain, reports) = calibrate_gain(&spec, &target, 0.1, &DEFAULT_GAINS, 10_000, 29).unwrap();
    let gain = gain.expect("some gain drives the frequency below eps");
    let hit = reports.iter().find(|r| r.diag("gain") == Some(gain)).unwrap();
    assert!(hit.estimate < 0.1);
    assert!(hit.diag("entropy").unwrap().is_finite());
    // untilted, the volatility wanders off the target
    assert!(reports[0].estimate > 0.1);

    let loose = incompleteness_probe(&spec, &target, ProbeSettings::new(0.1, 5.0), 10_000, 30).unwrap();
    let tight = incompleteness_probe(&spec, &target, ProbeSettings::new(0.05, 5.0), 10_000, 30).unwrap();
    assert!(tight.estimate >= loose.estimate);
}

#[test]
fn probe_requires_scott() {
    let spec = ModelSpec::new(ModelKind::Gbm { sigma: 0.2 }, 100.0, 1.0, 10);
    assert!(matches!(
        incompleteness_probe(&spec, &AlphaTarget::Constant(0.2), ProbeSettings::new(0.1, 1.0), 10, 1),
        Err(DualityError::NotScott(_))
    ));
}

#[test]
fn proximity_of_identical_paths_is_zero() {
    let nu = vec![0.2, 0.25, 0.3, 0.22, 0.2];
    let dw = [0.1, -0.05, 0.02, 0.03];
    let s = proximity_diagnostic(&nu, &nu, &dw, 0.05, 1.0).unwrap();
    assert_eq!((s.quadratic, s.stochastic, s.log_gap), (0.0, 0.0, 0.0));
    assert_eq!((s.tau_index, s.tau), (4, 1.0));
    assert!(matches!(
        proximity_diagnostic(&nu, &nu, &dw[..2], 0.05, 1.0),
        Err(DualityError::Misaligned { .. })
    ));
}

#[test]
fn proximity_bounds_hold_on_scott_paths() {
    let spec = scott(100);
    let (report, stats) = proximity_experiment(&spec, &AlphaTarget::Constant(0.2), 0.05, 1000, 31).unwrap();
    let bound = 0.5 * 1.0 * 0.05 * (2.0 * 0.2 + 0.05);
    assert!((bound - 0.01125f64).abs() < 1e-15);
    for s in &stats {
        assert!((s.bound - bound).abs() < 1e-15);
        assert!(s.quadratic <= bound, "{}", s.quadratic);
        assert!(s.triangle_holds());
    }
    assert_eq!(report.violations, 0);
    assert!(
        report.estimate <= 0.05f64.powi(2) + 4.0 * report.stderr,
        "{}",
        report.estimate
    );
}

#[test]
fn report_csv_layout() {
    let ast = parse_payoff("5").unwrap();
    let hedge = buy_and_hold_price(&ast, 100.0).unwrap();
    let spec = ModelSpec::new(ModelKind::Gbm { sigma: 0.2 }, 100.0, 1.0, 5);
    let r = mc_upper_bound_check(&spec, &ast, &hedge, 10, 1).unwrap();
    let csv = reports_to_csv(std::slice::from_ref(&r));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(REPORT_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), r.diagnostics.len());
    assert!(rows.iter().all(|l| l.starts_with("upper:gbm,5,0,10,0,")));
}
