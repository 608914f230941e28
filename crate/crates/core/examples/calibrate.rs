//! One-off calibration of the Monte Carlo thresholds used by the tests:
//! attainment estimates for the butterfly and the digital, and the gain
//! sweep of the incompleteness probe.
//!
//! `cargo run --release --example calibrate`

use superhedge::duality::{attainment_experiment, calibrate_gain, AlphaTarget, VolControl, DEFAULT_GAINS};
use superhedge::models::{ModelKind, ModelSpec};
use superhedge::parse_payoff;
use superhedge::stopping::bellman_envelope;

fn main() {
    let fly = parse_payoff("pos(x-90)-2*pos(x-100)+pos(x-110)").unwrap();
    let digital = parse_payoff("ind_gt(x,2)").unwrap();

    let oracle = bellman_envelope(&fly, 100.0, 600, 0.01, 1e-10, 50_000_000);
    println!("stopping oracle, butterfly: {:.4}", oracle.value);
    let oracle = bellman_envelope(&digital, 1.0, 600, 0.01, 1e-10, 50_000_000);
    println!("stopping oracle, digital:   {:.4}", oracle.value);

    for steps in [500, 2000, 5000] {
        for sigma_max in [2.0, 4.0, 8.0] {
            let c = VolControl::new(0.01, sigma_max, 0.2);
            let r = attainment_experiment(&fly, 100.0, &c, 1.0, steps, 100_000, 7).unwrap();
            println!(
                "butterfly steps={steps:4} sigma_max={sigma_max}: {:.4} ± {:.4}",
                r.estimate, r.stderr
            );
        }
    }
    for steps in [500, 2000, 4000] {
        let c = VolControl::new(0.01, 8.0, 0.2);
        let r = attainment_experiment(&digital, 1.0, &c, 1.0, steps, 20_000, 7).unwrap();
        println!(
            "digital steps={steps:4} sigma_max=8: {:.4} ± {:.4}",
            r.estimate, r.stderr
        );
    }

    let scott = ModelSpec::new(ModelKind::default_for("scott").unwrap(), 100.0, 1.0, 200);
    let nu0 = scott.kind.nu0();
    let (gain, reports) = calibrate_gain(&scott, &AlphaTarget::Constant(nu0), 0.1, &DEFAULT_GAINS, 10_000, 11).unwrap();
    for r in &reports {
        println!(
            "probe gain={:5}: freq {:.4} entropy {:.3}",
            r.diag("gain").unwrap(),
            r.estimate,
            r.diag("entropy").unwrap()
        );
    }
    println!("first feasible gain: {gain:?}");
}
