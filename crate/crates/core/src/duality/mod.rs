//! Monte Carlo checks of the buy-and-hold super-replication result.
//!
//! * [`mc_upper_bound_check`]: no martingale model prices `g(S_T)` above
//!   `ĝ(S₀)`, and the static hedge dominates pathwise.
//! * [`attainment_experiment`]: a bang-bang volatility control pushes
//!   `E[g(S_T)]` up towards `ĝ(S₀)`.
//! * [`incompleteness_probe`]: a drift tilt on the Scott log-volatility
//!   keeps `ν` uniformly close to a target path with high probability.
//! * [`proximity_diagnostic`]: the distance terms controlling how close the
//!   market spot stays to the stochastic exponential of the target.
//!
//! Every experiment is parallel across paths and reduces in index order, so
//! reports are bit-identical for a given seed on any number of threads.

mod attainment;
mod probe;
mod proximity;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::envelope::{EnvelopeError, HedgePair, DOMINATION_TOL};
use crate::exec::{mean_and_stderr, Execution};
use crate::models::{simulate_terminal, ModelError, ModelSpec, TerminalBatch};
use crate::payoff::PayoffAst;

pub use attainment::{attainment_experiment, attainment_experiment_with, VolControl};
pub use probe::{
    calibrate_gain, incompleteness_probe, incompleteness_probe_with, AlphaTarget, ProbeSettings, DEFAULT_GAINS,
};
pub use proximity::{proximity_diagnostic, proximity_experiment, proximity_experiment_with, ProximityStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("the incompleteness probe needs a Scott model, got {0}")]
    NotScott(String),
    #[error("misaligned inputs: {what} has {got} entries, expected {expected}")]
    Misaligned {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid argument {name} = {value}: {constraint}")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

impl DualityError {
    pub(crate) fn invalid(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Self::InvalidArgument {
            name,
            value,
            constraint,
        }
    }
}

/// Outcome of one Monte Carlo experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport {
    pub experiment: String,
    pub estimate: f64,
    /// Sample standard deviation over `√n_paths`.
    pub stderr: f64,
    pub n_paths: usize,
    /// Paths (or cells) violating the experiment's deterministic inequality.
    pub violations: u64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl DualityReport {
    pub(crate) fn from_samples(experiment: impl Into<String>, samples: &[f64]) -> Self {
        let (estimate, stderr) = mean_and_stderr(samples);
        Self {
            experiment: experiment.into(),
            estimate,
            stderr,
            n_paths: samples.len(),
            violations: 0,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn diag(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub(crate) fn set(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }

    /// CSV rows (no header), one per diagnostic; a report without
    /// diagnostics gets one row with empty diagnostic columns.
    pub fn csv_rows(&self) -> String {
        let head = format!(
            "{},{},{},{},{}",
            self.experiment, self.estimate, self.stderr, self.n_paths, self.violations
        );
        if self.diagnostics.is_empty() {
            return format!("{head},,\n");
        }
        let mut out = String::new();
        for (k, v) in &self.diagnostics {
            let _ = writeln!(out, "{head},{k},{v}");
        }
        out
    }
}

pub const REPORT_HEADER: &str = "experiment,estimate,stderr,n_paths,violations,diag_key,diag_value";

pub fn reports_to_csv(reports: &[DualityReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

/// Deterministic-inequality tolerance at the scale of the compared values.
pub(crate) fn violates(lhs: f64, rhs: f64) -> bool {
    let scale = 1.0 + lhs.abs().max(rhs.abs());
    lhs < rhs - DOMINATION_TOL * scale
}

/// Upper-bound check of the hedge under `spec`.
///
/// The estimate is the sample mean of `g(S_T)`; diagnostic `upper_ok` is 1
/// when it does not exceed `hedge.price + 3·stderr`. Violations count paths
/// where the hedge ends below the claim, which a correct envelope rules
/// out deterministically.
pub fn mc_upper_bound_check(
    spec: &ModelSpec,
    ast: &PayoffAst,
    hedge: &HedgePair,
    n_paths: usize,
    seed: u64,
) -> Result<DualityReport, DualityError> {
    mc_upper_bound_check_with(spec, ast, hedge, n_paths, seed, Execution::default())
}

pub fn mc_upper_bound_check_with(
    spec: &ModelSpec,
    ast: &PayoffAst,
    hedge: &HedgePair,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<DualityReport, DualityError> {
    if !(hedge.price.is_finite() && hedge.delta.is_finite()) {
        return Err(DualityError::invalid("price", hedge.price, "hedge must be finite"));
    }
    let batch = simulate_terminal(spec, n_paths, seed, exec)?;
    upper_bound_from_terminals(ast, hedge, &batch)
}

/// [`mc_upper_bound_check`] on an existing batch of terminal spots, so
/// several claims can share one simulation.
pub fn upper_bound_from_terminals(
    ast: &PayoffAst,
    hedge: &HedgePair,
    batch: &TerminalBatch,
) -> Result<DualityReport, DualityError> {
    if !(hedge.price.is_finite() && hedge.delta.is_finite()) {
        return Err(DualityError::invalid("price", hedge.price, "hedge must be finite"));
    }
    let g = ast.to_piecewise();
    let payoffs: Vec<f64> = batch.terminal.iter().map(|&s| g.eval(s)).collect();
    let mut report = DualityReport::from_samples(format!("upper:{}", batch.spec.kind.name()), &payoffs);
    let mut min_margin = f64::INFINITY;
    for (&s, &p) in batch.terminal.iter().zip(&payoffs) {
        let v = hedge.value_at(s);
        min_margin = min_margin.min(v - p);
        if violates(v, p) {
            report.violations += 1;
        }
    }
    report.set("price", hedge.price);
    report.set("delta", hedge.delta);
    report.set("min_margin", min_margin);
    report.set("vol_clamps", batch.vol_clamps as f64);
    report.set(
        "upper_ok",
        f64::from(u8::from(report.estimate <= hedge.price + 3.0 * report.stderr)),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::buy_and_hold_price;
    use crate::models::ModelKind;
    use crate::payoff::parse_payoff;

    #[test]
    fn constant_claim_is_exact() {
        let ast = parse_payoff("5").unwrap();
        let hedge = buy_and_hold_price(&ast, 100.0).unwrap();
        for name in ModelKind::NAMES {
            let spec = ModelSpec::new(ModelKind::default_for(name).unwrap(), 100.0, 1.0, 20);
            let r = mc_upper_bound_check(&spec, &ast, &hedge, 500, 3).unwrap();
            assert_eq!((r.estimate, r.stderr, r.violations), (5.0, 0.0, 0), "{name}");
        }
    }

    #[test]
    fn wrong_delta_is_caught() {
        let ast = parse_payoff("pos(x-100)").unwrap();
        let hedge = HedgePair {
            price: 100.0,
            delta: 0.0,
            s0: 100.0,
        };
        let spec = ModelSpec::new(ModelKind::Gbm { sigma: 0.2 }, 100.0, 1.0, 10);
        let r = mc_upper_bound_check(&spec, &ast, &hedge, 2000, 1).unwrap();
        assert!(r.violations > 0);
    }

    #[test]
    fn csv_layout() {
        let mut r = DualityReport::from_samples("x", &[1.0, 3.0]);
        assert_eq!(r.csv_rows(), format!("x,2,{},2,0,,\n", 1.0));
        r.set("b", 2.0);
        r.set("a", 1.5);
        let csv = reports_to_csv(&[r]);
        assert_eq!(csv, format!("{REPORT_HEADER}\nx,2,1,2,0,a,1.5\nx,2,1,2,0,b,2\n"));
    }
}
