use super::{probe::AlphaTarget, DualityError, DualityReport};
use crate::exec::{map_indexed, pairwise_sum, Execution};
use crate::models::{ModelSpec, Simulator};

/// Distance between the market spot and the stochastic exponential of a
/// target volatility, up to the first time the volatilities drift `δ` apart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProximityStats {
    pub delta: f64,
    /// Grid index of `τ` (`n_steps` when the volatilities never separate).
    pub tau_index: usize,
    pub tau: f64,
    /// `½ Σ_{k<τ} |α_k² − ν_k²| Δt`.
    pub quadratic: f64,
    /// `|Σ_{k<τ} (α_k − ν_k) ΔW_k|`.
    pub stochastic: f64,
    /// `|ln S_τ − ln S^α_τ|` for the two log-Euler paths.
    pub log_gap: f64,
    /// `½ T δ (2‖α‖∞ + δ)`.
    pub bound: f64,
}

impl ProximityStats {
    pub fn bound_holds(&self) -> bool {
        self.quadratic <= self.bound
    }

    /// The log gap is at most the sum of the two distance terms.
    pub fn triangle_holds(&self) -> bool {
        let rhs = self.quadratic + self.stochastic;
        self.log_gap <= rhs + 1e-12 * (1.0 + rhs)
    }

    /// The Chebyshev event `quadratic + stochastic ≥ 2√δ`.
    pub fn far(&self) -> bool {
        self.quadratic + self.stochastic >= 2.0 * self.delta.sqrt()
    }
}

/// Per-path proximity terms for node-valued `alpha` and `nu` (length
/// `n + 1`, or `n` when only the step values are given) and increments `dw`
/// (length `n`) on `[0, horizon]`.
pub fn proximity_diagnostic(
    alpha: &[f64],
    nu: &[f64],
    dw: &[f64],
    delta: f64,
    horizon: f64,
) -> Result<ProximityStats, DualityError> {
    let n = dw.len();
    for (what, v) in [("alpha", alpha), ("nu", nu)] {
        if v.len() != n && v.len() != n + 1 {
            return Err(DualityError::Misaligned {
                what,
                got: v.len(),
                expected: n + 1,
            });
        }
    }
    if n == 0 {
        return Err(DualityError::Misaligned {
            what: "dw",
            got: 0,
            expected: 1,
        });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(DualityError::invalid("delta", delta, "must be positive"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DualityError::invalid("horizon", horizon, "must be positive"));
    }
    let dt = horizon / n as f64;
    let tau_index = (0..n).find(|&k| (alpha[k] - nu[k]).abs() >= delta).unwrap_or(n);
    let mut quad = 0.0;
    let mut stoch = 0.0;
    let mut drift = 0.0;
    for k in 0..tau_index {
        let (a, v) = (alpha[k], nu[k]);
        quad += (a * a - v * v).abs() * dt;
        stoch += (a - v) * dw[k];
        drift += (a * a - v * v) * dt;
    }
    let sup_alpha = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    Ok(ProximityStats {
        delta,
        tau_index,
        tau: tau_index as f64 * dt,
        quadratic: 0.5 * quad,
        stochastic: stoch.abs(),
        // ln S − ln S^α = Σ(ν − α)ΔW − ½Σ(ν² − α²)Δt
        log_gap: (-stoch + 0.5 * drift).abs(),
        bound: 0.5 * horizon * delta * (2.0 * sup_alpha + delta),
    })
}

/// Proximity terms over a simulated batch with a fixed target.
///
/// The estimate is the sample mean of the squared stochastic term, which
/// the Itô isometry bounds by `δ²T`. Violations count paths breaking the
/// deterministic bound or the log-gap triangle inequality.
pub fn proximity_experiment(
    spec: &ModelSpec,
    target: &AlphaTarget,
    delta: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(DualityReport, Vec<ProximityStats>), DualityError> {
    proximity_experiment_with(spec, target, delta, n_paths, seed, Execution::default())
}

pub fn proximity_experiment_with(
    spec: &ModelSpec,
    target: &AlphaTarget,
    delta: f64,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<(DualityReport, Vec<ProximityStats>), DualityError> {
    if n_paths == 0 {
        return Err(DualityError::invalid("n_paths", 0.0, "must be positive"));
    }
    let sim = Simulator::new(*spec)?;
    let n = spec.n_steps;
    if let AlphaTarget::Path(p) = target {
        if p.len() != n + 1 {
            return Err(DualityError::Misaligned {
                what: "alpha",
                got: p.len(),
                expected: n + 1,
            });
        }
    }
    let stats = map_indexed(n_paths, exec, |i| {
        let path = sim.simulate_path(seed, i);
        let alpha: Vec<f64> = match target {
            AlphaTarget::Constant(c) => vec![*c; n + 1],
            AlphaTarget::RealizedNu => path.vol.clone(),
            AlphaTarget::Path(p) => p.clone(),
        };
        proximity_diagnostic(&alpha, &path.vol, &path.dw, delta, spec.horizon)
    });
    let stats: Vec<ProximityStats> = stats.into_iter().collect::<Result<_, _>>()?;

    let squares: Vec<f64> = stats.iter().map(|s| s.stochastic * s.stochastic).collect();
    let mut report = DualityReport::from_samples("proximity", &squares);
    report.violations = stats.iter().filter(|s| !s.bound_holds() || !s.triangle_holds()).count() as u64;
    let frac = |f: &dyn Fn(&ProximityStats) -> bool| stats.iter().filter(|s| f(s)).count() as f64 / n_paths as f64;
    let quads: Vec<f64> = stats.iter().map(|s| s.quadratic).collect();
    report.set("delta", delta);
    report.set("ito_bound", delta * delta * spec.horizon);
    report.set("deterministic_bound", stats.iter().map(|s| s.bound).fold(0.0, f64::max));
    report.set("mean_quadratic", pairwise_sum(&quads) / n_paths as f64);
    report.set("max_quadratic", quads.iter().copied().fold(0.0, f64::max));
    report.set("chebyshev_freq", frac(&|s| s.far()));
    report.set("tau_lt_T_freq", frac(&|s| s.tau_index < n));
    Ok((report, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_paths_have_zero_distance() {
        let a = [0.2, 0.3, 0.25, 0.2];
        let s = proximity_diagnostic(&a, &a, &[0.1, -0.2, 0.05], 0.05, 1.0).unwrap();
        assert_eq!((s.quadratic, s.stochastic, s.log_gap), (0.0, 0.0, 0.0));
        assert_eq!(s.tau_index, 3);
        assert_eq!(s.tau, 1.0);
    }

    #[test]
    fn displayed_bound_value() {
        let s = proximity_diagnostic(&[0.2; 5], &[0.21; 5], &[0.0; 4], 0.05, 1.0).unwrap();
        assert!((s.bound - 0.01125).abs() < 1e-15);
        assert!(s.bound_holds());
    }

    #[test]
    fn stops_at_separation() {
        let s = proximity_diagnostic(&[0.2; 4], &[0.2, 0.2, 0.5, 0.2], &[0.1, 0.1, 0.1], 0.05, 3.0).unwrap();
        assert_eq!(s.tau_index, 2);
        assert_eq!(s.tau, 2.0);
    }

    #[test]
    fn misaligned_inputs() {
        assert!(proximity_diagnostic(&[0.2; 2], &[0.2; 4], &[0.1; 3], 0.05, 1.0).is_err());
    }
}
