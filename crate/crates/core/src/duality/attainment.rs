use rand::Rng;
use rand_distr::StandardNormal;

use super::{violates, DualityError, DualityReport};
use crate::envelope::{concave_envelope, contact_set, hedge_from_envelope, ContactInterval};
use crate::exec::{map_indexed, Execution};
use crate::models::{log_euler_step, path_rng};
use crate::payoff::PayoffAst;

/// Bounded, continuous volatility control starting at `nu0`.
///
/// Runs at `sigma_max` in the continuation region and at `sigma_min` on the
/// contact set. Contact points reached continuously (no jump of `g`) have
/// probability zero on their own, so they are widened to a log-distance
/// `band`; `None` picks `5·sigma_min·√T`, which the slow regime rarely
/// leaves before the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolControl {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub nu0: f64,
    /// Time to move linearly from `nu0` to the first bang-bang level; a
    /// value at or below one grid step means a one-step ramp.
    pub ramp: f64,
    pub band: Option<f64>,
}

impl VolControl {
    pub fn new(sigma_min: f64, sigma_max: f64, nu0: f64) -> Self {
        Self {
            sigma_min,
            sigma_max,
            nu0,
            ramp: 0.0,
            band: None,
        }
    }

    pub fn validate(&self) -> Result<(), DualityError> {
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return Err(DualityError::invalid("sigma_min", self.sigma_min, "must be positive"));
        }
        if !(self.sigma_max > self.sigma_min && self.sigma_max.is_finite()) {
            return Err(DualityError::invalid(
                "sigma_max",
                self.sigma_max,
                "must exceed sigma_min",
            ));
        }
        if !(self.nu0 >= self.sigma_min && self.nu0 <= self.sigma_max) {
            return Err(DualityError::invalid(
                "nu0",
                self.nu0,
                "must lie in [sigma_min, sigma_max]",
            ));
        }
        if !(self.ramp >= 0.0 && self.ramp.is_finite()) {
            return Err(DualityError::invalid("ramp", self.ramp, "must be nonnegative"));
        }
        if let Some(b) = self.band {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(DualityError::invalid("band", b, "must be nonnegative"));
            }
        }
        Ok(())
    }
}

struct ContactRegion {
    intervals: Vec<ContactInterval>,
    /// Log of attained positive endpoints.
    anchors: Vec<f64>,
    band: f64,
}

impl ContactRegion {
    fn new(intervals: Vec<ContactInterval>, band: f64) -> Self {
        let mut anchors = Vec::new();
        for iv in &intervals {
            if iv.lo > 0.0 && iv.lo_included {
                anchors.push(iv.lo.ln());
            }
            if iv.hi.is_finite() && iv.hi > iv.lo && iv.hi_included {
                anchors.push(iv.hi.ln());
            }
        }
        Self {
            intervals,
            anchors,
            band,
        }
    }

    fn contains(&self, x: f64) -> bool {
        if self.intervals.iter().any(|iv| iv.contains(x)) {
            return true;
        }
        let lx = x.ln();
        self.anchors.iter().any(|a| (lx - a).abs() <= self.band)
    }
}

/// `E[g(S^{α,s0}_T)]` under the bang-bang feedback control.
///
/// `α` is evaluated at the left end of each step from the simulated spot
/// itself, so the control is adapted to `W` alone. Violations count paths
/// where the buy-and-hold hedge ends below the claim.
pub fn attainment_experiment(
    ast: &PayoffAst,
    s0: f64,
    control: &VolControl,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<DualityReport, DualityError> {
    attainment_experiment_with(ast, s0, control, horizon, n_steps, n_paths, seed, Execution::default())
}

#[allow(clippy::too_many_arguments)]
pub fn attainment_experiment_with(
    ast: &PayoffAst,
    s0: f64,
    control: &VolControl,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<DualityReport, DualityError> {
    control.validate()?;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(DualityError::invalid("s0", s0, "must be positive"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DualityError::invalid("horizon", horizon, "must be positive"));
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(DualityError::invalid("n_steps/n_paths", 0.0, "must be positive"));
    }
    let g = ast.to_piecewise();
    let env = concave_envelope(&g)?;
    let hedge = hedge_from_envelope(&env, s0)?;
    let band = control.band.unwrap_or(5.0 * control.sigma_min * horizon.sqrt());
    let region = ContactRegion::new(contact_set(ast, &env, 0.0), band);

    let dt = horizon / n_steps as f64;
    let sq = dt.sqrt();
    let rows = map_indexed(n_paths, exec, |i| {
        let mut rng = path_rng(seed, i);
        let mut s = s0;
        for k in 0..n_steps {
            let alpha = if k == 0 {
                control.nu0
            } else {
                let target = if region.contains(s) {
                    control.sigma_min
                } else {
                    control.sigma_max
                };
                let w = if control.ramp <= dt {
                    1.0
                } else {
                    (k as f64 * dt / control.ramp).min(1.0)
                };
                control.nu0 + w * (target - control.nu0)
            };
            let dw = sq * rng.sample::<f64, _>(StandardNormal);
            s = log_euler_step(s, alpha, dw, dt);
        }
        let payoff = g.eval(s);
        (payoff, violates(hedge.value_at(s), payoff), region.contains(s))
    });

    let payoffs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut report = DualityReport::from_samples("attainment", &payoffs);
    report.violations = rows.iter().filter(|r| r.1).count() as u64;
    let in_contact = rows.iter().filter(|r| r.2).count();
    report.set("envelope", hedge.price);
    report.set("sigma_min", control.sigma_min);
    report.set("sigma_max", control.sigma_max);
    report.set("band", band);
    report.set("n_steps", n_steps as f64);
    report.set("contact_at_T", in_contact as f64 / n_paths as f64);
    report.set("gap", hedge.price - report.estimate);
    Ok(report)
}
