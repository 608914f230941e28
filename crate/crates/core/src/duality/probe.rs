use super::{DualityError, DualityReport};
use crate::exec::{map_indexed, pairwise_sum, Execution};
use crate::models::{ou_coefficients, ModelKind, ModelSpec, Simulator};

/// Volatility path the tilted market should track.
#[derive(Clone, Debug, PartialEq)]
pub enum AlphaTarget {
    Constant(f64),
    /// The untilted volatility of the same path.
    RealizedNu,
    /// Deterministic values at the `n_steps + 1` grid nodes.
    Path(Vec<f64>),
}

impl AlphaTarget {
    fn at(&self, k: usize, realized: &[f64]) -> f64 {
        match self {
            AlphaTarget::Constant(c) => *c,
            AlphaTarget::RealizedNu => realized[k],
            AlphaTarget::Path(p) => p[k],
        }
    }
}

/// Gains tried by [`calibrate_gain`] unless told otherwise.
pub const DEFAULT_GAINS: [f64; 7] = [0.0, 1.0, 5.0, 20.0, 50.0, 100.0, 200.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeSettings {
    pub eps: f64,
    pub gain: f64,
    /// Clamp on the feedback `|u|`.
    pub u_max: f64,
}

impl ProbeSettings {
    pub fn new(eps: f64, gain: f64) -> Self {
        Self {
            eps,
            gain,
            u_max: 100.0,
        }
    }
}

/// Frequency of `‖α − ν‖∞ > ε` under a drift tilt of the Scott log-vol.
///
/// The tilted dynamics are `dY = [κ(θ − Y) + β u] dt + β dŴ` with feedback
/// `u = clamp(gain·(ln α − Y), ±u_max)`, stepped as the exact OU transition
/// plus `β u Δt`. `W` is left alone. Diagnostic `entropy` is
/// `½·E[Σ u² Δt]`, the relative entropy of the tilted law.
pub fn incompleteness_probe(
    spec: &ModelSpec,
    target: &AlphaTarget,
    settings: ProbeSettings,
    n_paths: usize,
    seed: u64,
) -> Result<DualityReport, DualityError> {
    incompleteness_probe_with(spec, target, settings, n_paths, seed, Execution::default())
}

pub fn incompleteness_probe_with(
    spec: &ModelSpec,
    target: &AlphaTarget,
    settings: ProbeSettings,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<DualityReport, DualityError> {
    let ModelKind::Scott { y0, kappa, theta, beta } = spec.kind else {
        return Err(DualityError::NotScott(spec.kind.name().to_string()));
    };
    let ProbeSettings { eps, gain, u_max } = settings;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(DualityError::invalid("eps", eps, "must be positive"));
    }
    if !(gain >= 0.0 && gain.is_finite()) {
        return Err(DualityError::invalid("gain", gain, "must be nonnegative"));
    }
    if !(u_max > 0.0) {
        return Err(DualityError::invalid("u_max", u_max, "must be positive"));
    }
    if n_paths == 0 {
        return Err(DualityError::invalid("n_paths", 0.0, "must be positive"));
    }
    match target {
        AlphaTarget::Constant(c) if !(*c > 0.0 && c.is_finite()) => {
            return Err(DualityError::invalid("alpha", *c, "must be positive"));
        }
        AlphaTarget::Path(p) => {
            if p.len() != spec.n_steps + 1 {
                return Err(DualityError::Misaligned {
                    what: "alpha",
                    got: p.len(),
                    expected: spec.n_steps + 1,
                });
            }
            if let Some(&bad) = p.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(DualityError::invalid("alpha", bad, "must be positive"));
            }
        }
        _ => {}
    }

    let sim = Simulator::new(*spec)?;
    let dt = spec.dt();
    let (decay, sd_ratio) = ou_coefficients(kappa, dt);
    let rows = map_indexed(n_paths, exec, |i| {
        let base = sim.simulate_path(seed, i);
        let mut y = y0;
        let mut dist = (target.at(0, &base.vol) - y.exp()).abs();
        let mut energy = 0.0;
        let mut clamped = 0u64;
        let mut u_peak: f64 = 0.0;
        for (k, &dz) in base.dw_hat.iter().enumerate() {
            let raw = gain * (target.at(k, &base.vol).ln() - y);
            let u = raw.clamp(-u_max, u_max);
            if u != raw {
                clamped += 1;
            }
            u_peak = u_peak.max(u.abs());
            energy += u * u * dt;
            y = theta + (y - theta) * decay + beta * sd_ratio * dz + beta * u * dt;
            dist = dist.max((target.at(k + 1, &base.vol) - y.exp()).abs());
        }
        (dist, 0.5 * energy, clamped, u_peak)
    });

    let hits: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.0 > eps))).collect();
    let mut report = DualityReport::from_samples("probe", &hits);
    let dists: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let entropy: Vec<f64> = rows.iter().map(|r| r.1).collect();
    report.set("eps", eps);
    report.set("gain", gain);
    report.set("entropy", pairwise_sum(&entropy) / n_paths as f64);
    report.set("mean_sup_distance", pairwise_sum(&dists) / n_paths as f64);
    report.set("max_control", rows.iter().map(|r| r.3).fold(0.0, f64::max));
    report.set("clamped_controls", rows.iter().map(|r| r.2).sum::<u64>() as f64);
    Ok(report)
}

/// Sweeps `gains` in order and returns every report together with the
/// first gain whose frequency falls below `eps`.
pub fn calibrate_gain(
    spec: &ModelSpec,
    target: &AlphaTarget,
    eps: f64,
    gains: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<(Option<f64>, Vec<DualityReport>), DualityError> {
    let mut reports = Vec::with_capacity(gains.len());
    let mut found = None;
    for &gain in gains {
        let r = incompleteness_probe(spec, target, ProbeSettings::new(eps, gain), n_paths, seed)?;
        if found.is_none() && r.estimate < eps {
            found = Some(gain);
        }
        reports.push(r);
    }
    Ok((found, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scott() -> ModelSpec {
        ModelSpec::new(ModelKind::default_for("scott").unwrap(), 100.0, 1.0, 200)
    }

    #[test]
    fn realized_target_without_control_is_exact() {
        let r = incompleteness_probe(
            &scott(),
            &AlphaTarget::RealizedNu,
            ProbeSettings::new(1e-9, 0.0),
            300,
            2,
        )
        .unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.diag("entropy"), Some(0.0));
        assert_eq!(r.diag("mean_sup_distance"), Some(0.0));
    }

    #[test]
    fn rejects_other_models() {
        let spec = ModelSpec::new(ModelKind::Gbm { sigma: 0.2 }, 1.0, 1.0, 10);
        assert!(matches!(
            incompleteness_probe(&spec, &AlphaTarget::Constant(0.2), ProbeSettings::new(0.1, 1.0), 10, 1),
            Err(DualityError::NotScott(_))
        ));
    }

    #[test]
    fn path_target_length_checked() {
        let r = incompleteness_probe(
            &scott(),
            &AlphaTarget::Path(vec![0.2; 5]),
            ProbeSettings::new(0.1, 1.0),
            10,
            1,
        );
        assert!(matches!(r, Err(DualityError::Misaligned { .. })));
    }
}
