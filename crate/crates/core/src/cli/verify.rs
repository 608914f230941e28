use std::fmt;

use super::{CliError, ModelChoice, RunConfig, Which};
use crate::duality::{
    attainment_experiment, calibrate_gain, incompleteness_probe, proximity_experiment, reports_to_csv,
    upper_bound_from_terminals, AlphaTarget, DualityReport, ProbeSettings, VolControl,
};
use crate::envelope::{buy_and_hold_price, hedge_dominates};
use crate::exec::Execution;
use crate::models::{simulate_terminal, ModelKind, ModelSpec};
use crate::payoff::{parse_payoff_bounded_below, PayoffAst};
use crate::stopping::{bellman_envelope, finite_horizon_value};

/// One line of the verification summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Hard checks decide the exit code; soft ones are informational.
    pub hard: bool,
    pub detail: String,
}

impl Check {
    fn hard(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            hard: true,
            detail: detail.into(),
        }
    }

    fn soft(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            hard: false,
            ..Self::hard(name, passed, detail)
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match (self.hard, self.passed) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, true) => "INFO",
            (false, false) => "WARN",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOutcome {
    pub checks: Vec<Check>,
    /// `(file name, CSV body)` pairs for the output directory.
    pub files: Vec<(String, String)>,
    pub notes: Vec<String>,
}

/// Finite-horizon trees use a fixed per-step time of 1/16 and unit volatility.
const TREE_HORIZONS: [f64; 4] = [1.0, 4.0, 16.0, 64.0];

pub fn run_verify(cfg: &RunConfig, which: Which) -> Result<VerifyOutcome, CliError> {
    let mut out = VerifyOutcome::default();
    let needs_payoff = !matches!(which, Which::Probe | Which::Proximity);
    let ast = match (&cfg.payoff, needs_payoff) {
        (Some(text), _) => Some(load(text, &mut out.notes)?),
        (None, true) => return Err(CliError::Usage("missing --payoff".into())),
        (None, false) => None,
    };
    let all = which == Which::All;
    if let Some(ast) = &ast {
        let dom = all || which == Which::Domination;
        let upper = all || which == Which::Upper;
        if dom || upper {
            verify_upper(cfg, ast, dom, upper, &mut out)?;
        }
        if all || which == Which::Attainment {
            verify_attainment(cfg, ast, &mut out)?;
        }
    }
    if all || which == Which::Probe {
        verify_probe(cfg, &mut out)?;
    }
    if all || which == Which::Proximity {
        verify_proximity(cfg, &mut out)?;
    }
    if let (Some(ast), true) = (&ast, all || which == Which::Stopping) {
        verify_stopping(cfg, ast, &mut out)?;
    }
    Ok(out)
}

fn load(text: &str, notes: &mut Vec<String>) -> Result<PayoffAst, CliError> {
    let shifted = parse_payoff_bounded_below(text)?;
    notes.extend(shifted.ast.warnings().iter().map(|w| w.to_string()));
    if shifted.cash_shift > 0.0 {
        notes.push(format!(
            "payoff dips below zero; experiments use g + {}",
            shifted.cash_shift
        ));
    }
    Ok(shifted.ast)
}

fn spec_for(cfg: &RunConfig, kind: ModelKind, n_steps: usize) -> ModelSpec {
    ModelSpec::new(kind, cfg.s0, cfg.horizon, n_steps)
}

/// Spot grid for the static domination check: geometric over many decades
/// around the spot and the payoff knots.
fn domination_grid(ast: &PayoffAst, s0: f64) -> Vec<f64> {
    let top = ast.to_piecewise().breakpoints().iter().copied().fold(s0, f64::max);
    let mut grid: Vec<f64> = (0..=4000)
        .map(|i| top * 10f64.powf(-6.0 + 9.0 * i as f64 / 4000.0))
        .collect();
    grid.push(s0);
    grid
}

fn verify_upper(
    cfg: &RunConfig,
    ast: &PayoffAst,
    dom: bool,
    upper: bool,
    out: &mut VerifyOutcome,
) -> Result<(), CliError> {
    let mut hedge = buy_and_hold_price(ast, cfg.s0)?;
    if let Some(d) = cfg.delta_override {
        out.notes
            .push(format!("hedge ratio overridden: {} -> {d}", hedge.delta));
        hedge.delta = d;
    }
    let mut dom_reports = Vec::new();
    let mut upper_reports = Vec::new();
    if dom {
        let r = hedge_dominates(ast, &hedge, &domination_grid(ast, cfg.s0));
        out.checks.push(Check::hard(
            "domination:static",
            r.dominates,
            format!("min margin {} at x = {}, tail ok {}", r.min_margin, r.argmin, r.tail_ok),
        ));
    }
    for kind in cfg.model.kinds() {
        let spec = spec_for(cfg, kind, cfg.n_steps);
        let batch = simulate_terminal(&spec, cfg.n_paths, cfg.seed, Execution::Parallel)?;
        let report = upper_bound_from_terminals(ast, &hedge, &batch)?;
        let name = kind.name();
        if dom {
            let mut r = report.clone();
            r.experiment = format!("domination:{name}");
            out.checks.push(Check::hard(
                r.experiment.clone(),
                r.violations == 0,
                format!("{} of {} paths below the claim", r.violations, r.n_paths),
            ));
            dom_reports.push(r);
        }
        if upper {
            out.checks.push(Check::hard(
                report.experiment.clone(),
                report.diag("upper_ok") == Some(1.0),
                format!(
                    "E[g(S_T)] = {:.6} ± {:.6} vs price {:.6}",
                    report.estimate, report.stderr, hedge.price
                ),
            ));
            upper_reports.push(report);
        }
    }
    if dom {
        out.files.push(("domination.csv".into(), reports_to_csv(&dom_reports)));
    }
    if upper {
        out.files.push(("upper.csv".into(), reports_to_csv(&upper_reports)));
    }
    Ok(())
}

fn verify_attainment(cfg: &RunConfig, ast: &PayoffAst, out: &mut VerifyOutcome) -> Result<(), CliError> {
    let a = &cfg.attainment;
    let price = buy_and_hold_price(ast, cfg.s0)?.price;
    let mut reports: Vec<DualityReport> = Vec::new();
    for &sigma_max in &a.sigma_max {
        let control = VolControl::new(a.sigma_min, sigma_max, a.nu0);
        let mut r = attainment_experiment(ast, cfg.s0, &control, cfg.horizon, a.steps, cfg.n_paths, cfg.seed)?;
        r.experiment = format!("attainment:sigma_max={sigma_max}");
        out.checks.push(Check::hard(
            format!("{}:domination", r.experiment),
            r.violations == 0,
            format!("{} of {} paths below the claim", r.violations, r.n_paths),
        ));
        out.checks.push(Check::hard(
            format!("{}:upper", r.experiment),
            r.estimate <= price + 4.0 * r.stderr,
            format!("{:.6} ± {:.6} vs envelope {:.6}", r.estimate, r.stderr, price),
        ));
        reports.push(r);
    }
    let monotone = reports.windows(2).all(|w| {
        let slack = 4.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].estimate >= w[0].estimate - slack
    });
    let estimates: Vec<String> = reports.iter().map(|r| format!("{:.4}", r.estimate)).collect();
    out.checks.push(Check::hard(
        "attainment:monotone",
        monotone,
        format!("estimates [{}] over sigma_max {:?}", estimates.join(", "), a.sigma_max),
    ));
    if let Some(last) = reports.last() {
        out.checks.push(Check::soft(
            "attainment:reach",
            last.estimate >= 0.9 * price,
            format!(
                "{:.4} of envelope {:.4} ({:.1}%)",
                last.estimate,
                price,
                100.0 * last.estimate / price
            ),
        ));
    }
    out.files.push(("attainment.csv".into(), reports_to_csv(&reports)));
    Ok(())
}

/// The configured model if it is a Scott model, else the default Scott model.
fn scott_kind(cfg: &RunConfig) -> ModelKind {
    match cfg.model {
        ModelChoice::One(kind @ ModelKind::Scott { .. }) => kind,
        _ => ModelKind::default_for("scott").expect("known model"),
    }
}

fn verify_probe(cfg: &RunConfig, out: &mut VerifyOutcome) -> Result<(), CliError> {
    let p = &cfg.probe;
    let spec = spec_for(cfg, scott_kind(cfg), p.steps);
    let target = AlphaTarget::Constant(spec.kind.nu0());
    let (gain, mut reports) = calibrate_gain(&spec, &target, p.eps, &p.gains, cfg.n_paths, cfg.seed)?;
    for r in reports.iter_mut() {
        r.experiment = format!("probe:gain={}", r.diag("gain").unwrap_or(f64::NAN));
    }
    let finite = reports.iter().all(|r| r.diag("entropy").is_some_and(f64::is_finite));
    out.checks.push(Check::hard(
        "probe:feasible",
        gain.is_some() && finite,
        match gain {
            Some(g) => {
                let hit = reports.iter().find(|r| r.diag("gain") == Some(g));
                format!(
                    "gain {g}: P(sup|alpha - nu| > {}) = {:.4} < {}, entropy {:.3}",
                    p.eps,
                    hit.map_or(f64::NAN, |r| r.estimate),
                    p.eps,
                    hit.and_then(|r| r.diag("entropy")).unwrap_or(f64::NAN)
                )
            }
            None => format!("no gain in {:?} reaches frequency below {}", p.gains, p.eps),
        },
    ));

    let mut exact = incompleteness_probe(
        &spec,
        &AlphaTarget::RealizedNu,
        ProbeSettings::new(p.eps, 0.0),
        cfg.n_paths,
        cfg.seed,
    )?;
    exact.experiment = "probe:realized".into();
    out.checks.push(Check::hard(
        "probe:realized",
        exact.estimate == 0.0,
        format!("frequency {} with the realized path as target", exact.estimate),
    ));
    reports.push(exact);

    if let Some(g) = gain {
        let at_gain = reports
            .iter()
            .find(|r| r.diag("gain") == Some(g))
            .map(|r| r.estimate)
            .unwrap_or(f64::NAN);
        let mut half = incompleteness_probe(
            &spec,
            &target,
            ProbeSettings::new(0.5 * p.eps, g),
            cfg.n_paths,
            cfg.seed,
        )?;
        half.experiment = format!("probe:gain={g}:half_eps");
        out.checks.push(Check::hard(
            "probe:monotone_eps",
            half.estimate >= at_gain,
            format!("frequency {} at eps/2 vs {} at eps", half.estimate, at_gain),
        ));
        reports.push(half);
    }
    out.files.push(("probe.csv".into(), reports_to_csv(&reports)));
    Ok(())
}

fn verify_proximity(cfg: &RunConfig, out: &mut VerifyOutcome) -> Result<(), CliError> {
    let spec = spec_for(cfg, scott_kind(cfg), cfg.n_steps);
    let target = AlphaTarget::Constant(spec.kind.nu0());
    let (report, _) = proximity_experiment(&spec, &target, cfg.proximity.delta, cfg.n_paths, cfg.seed)?;
    out.checks.push(Check::hard(
        "proximity:deterministic",
        report.violations == 0,
        format!(
            "{} paths break the bound {}",
            report.violations,
            report.diag("deterministic_bound").unwrap_or(f64::NAN)
        ),
    ));
    let ito = report.diag("ito_bound").unwrap_or(f64::NAN);
    out.checks.push(Check::hard(
        "proximity:isometry",
        report.estimate <= ito + 4.0 * report.stderr,
        format!(
            "mean squared stochastic term {:.3e} ± {:.1e} vs {:.3e}",
            report.estimate, report.stderr, ito
        ),
    ));
    out.files.push(("proximity.csv".into(), reports_to_csv(&[report])));
    Ok(())
}

fn verify_stopping(cfg: &RunConfig, ast: &PayoffAst, out: &mut VerifyOutcome) -> Result<(), CliError> {
    let s = &cfg.stopping;
    let price = buy_and_hold_price(ast, cfg.s0)?.price;
    let r = bellman_envelope(ast, cfg.s0, s.half_width, s.log_step, s.tol, s.max_iter);
    let allowed = s.agreement * (1.0 + price.abs());
    let mut checks = vec![
        Check::hard(
            "stopping:converged",
            r.converged,
            format!("{} sweeps, residual {:.2e}", r.iterations, r.residual),
        ),
        Check::hard(
            "stopping:agreement",
            (r.value - price).abs() <= allowed,
            format!(
                "bellman {:.6} vs envelope {:.6} (allowed {:.4})",
                r.value, price, allowed
            ),
        ),
    ];
    let tree: Vec<f64> = TREE_HORIZONS
        .iter()
        .map(|&t| finite_horizon_value(ast, cfg.s0, (16.0 * t) as usize, t, 1.0))
        .collect();
    let monotone = tree.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let below = tree.iter().all(|&v| v <= r.value + s.tol);
    checks.push(Check::hard(
        "stopping:finite_horizon",
        monotone && below,
        format!("values {tree:.4?} at T = {TREE_HORIZONS:?}"),
    ));

    let mut report = DualityReport {
        experiment: "stopping".into(),
        estimate: r.value,
        stderr: 0.0,
        n_paths: 0,
        violations: checks.iter().filter(|c| !c.passed).count() as u64,
        diagnostics: Default::default(),
    };
    report.diagnostics.insert("envelope".into(), price);
    report.diagnostics.insert("iterations".into(), r.iterations as f64);
    report.diagnostics.insert("residual".into(), r.residual);
    for (t, v) in TREE_HORIZONS.iter().zip(&tree) {
        report.diagnostics.insert(format!("finite_T{t}"), *v);
    }
    out.checks.extend(checks);
    out.files.push(("stopping.csv".into(), reports_to_csv(&[report])));
    Ok(())
}
