//! Simulation of `dS = S ν dW` under constant, stochastic and rough volatility.
//!
//! Every path owns a ChaCha stream selected by its index, so a batch is a
//! pure function of `(spec, n_paths, seed)` no matter how paths are
//! scheduled. The spot uses the log-Euler step
//! `S_{k+1} = S_k exp(ν_k ΔW_k − ½ν_k² Δt)`, which keeps `S > 0` and makes
//! each step a unit-mean multiplicative increment.

mod fbm;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::exec::{map_indexed, Execution};

pub use fbm::{fbm_increments, FbmGenerator, MAX_FBM_STEPS};

/// Volatility floor for schemes that can touch zero on the grid.
pub const VOL_FLOOR: f64 = 1e-12;

/// Default ceiling on `n_paths · (n_steps + 1)` for fully stored batches.
pub const DEFAULT_MAX_CELLS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {constraint}")]
    InvalidParameter {
        name: String,
        value: f64,
        constraint: String,
    },
    #[error("unknown model '{0}' (expected gbm, heston, hullwhite, scott or rough)")]
    UnknownModel(String),
    #[error("unknown parameter '{key}' for model {model}")]
    UnknownParameter { model: String, key: String },
    #[error("batch of {requested} cells exceeds the limit of {cap}")]
    ResourceLimit { requested: usize, cap: usize },
    #[error("fBM grid of {n_steps} steps exceeds the dense factorization cap of {cap}")]
    FbmTooLarge { n_steps: usize, cap: usize },
    #[error("fBM covariance not positive definite (n_steps {n_steps}, H {hurst})")]
    NotPositiveDefinite { n_steps: usize, hurst: f64 },
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

impl ModelError {
    pub(crate) fn invalid(name: &str, value: f64, constraint: &str) -> Self {
        Self::InvalidParameter {
            name: name.to_string(),
            value,
            constraint: constraint.to_string(),
        }
    }
}

/// Volatility dynamics; the spot is always `dS = S ν dW`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    /// Constant volatility; not fully incomplete, kept as a baseline.
    Gbm { sigma: f64 },
    /// CIR variance with `ν = √v`, independent of `W`.
    Heston { v0: f64, kappa: f64, theta: f64, xi: f64 },
    /// Lognormal variance `dV = μV dt + σ_v V dŴ`, `ν = √V`.
    HullWhite { v0: f64, mu: f64, sigma_v: f64 },
    /// OU log-volatility `dY = κ(θ − Y) dt + β dŴ`, `ν = e^Y`.
    Scott { y0: f64, kappa: f64, theta: f64, beta: f64 },
    /// Fractional OU log-volatility driven by fBM with Hurst index `hurst`.
    RoughFou {
        y0: f64,
        lambda: f64,
        theta: f64,
        beta: f64,
        hurst: f64,
    },
}

impl ModelKind {
    pub const NAMES: [&'static str; 5] = ["gbm", "heston", "hullwhite", "scott", "rough"];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gbm { .. } => "gbm",
            ModelKind::Heston { .. } => "heston",
            ModelKind::HullWhite { .. } => "hullwhite",
            ModelKind::Scott { .. } => "scott",
            ModelKind::RoughFou { .. } => "rough",
        }
    }

    /// Default parameters for each model family (initial volatility 0.2).
    pub fn default_for(name: &str) -> Result<Self, ModelError> {
        let y0 = 0.2f64.ln();
        Ok(match name {
            "gbm" => ModelKind::Gbm { sigma: 0.2 },
            "heston" => ModelKind::Heston {
                v0: 0.04,
                kappa: 1.5,
                theta: 0.04,
                xi: 0.5,
            },
            "hullwhite" => ModelKind::HullWhite {
                v0: 0.04,
                mu: 0.0,
                sigma_v: 0.5,
            },
            "scott" => ModelKind::Scott {
                y0,
                kappa: 1.0,
                theta: y0,
                beta: 0.5,
            },
            "rough" => ModelKind::RoughFou {
                y0,
                lambda: 1.0,
                theta: y0,
                beta: 1.0,
                hurst: 0.1,
            },
            other => return Err(ModelError::UnknownModel(other.to_string())),
        })
    }

    /// Named parameters in declaration order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ModelKind::Gbm { sigma } => vec![("sigma", sigma)],
            ModelKind::Heston { v0, kappa, theta, xi } => {
                vec![("v0", v0), ("kappa", kappa), ("theta", theta), ("xi", xi)]
            }
            ModelKind::HullWhite { v0, mu, sigma_v } => vec![("v0", v0), ("mu", mu), ("sigma_v", sigma_v)],
            ModelKind::Scott { y0, kappa, theta, beta } => {
                vec![("y0", y0), ("kappa", kappa), ("theta", theta), ("beta", beta)]
            }
            ModelKind::RoughFou {
                y0,
                lambda,
                theta,
                beta,
                hurst,
            } => vec![
                ("y0", y0),
                ("lambda", lambda),
                ("theta", theta),
                ("beta", beta),
                ("hurst", hurst),
            ],
        }
    }

    /// Defaults for `name` with `overrides` applied.
    pub fn from_params(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Self, ModelError> {
        let mut kind = Self::default_for(name)?;
        for (key, &value) in overrides {
            let slot = match (&mut kind, key.as_str()) {
                (ModelKind::Gbm { sigma }, "sigma") => sigma,
                (ModelKind::Heston { v0, .. }, "v0") => v0,
                (ModelKind::Heston { kappa, .. }, "kappa") => kappa,
                (ModelKind::Heston { theta, .. }, "theta") => theta,
                (ModelKind::Heston { xi, .. }, "xi") => xi,
                (ModelKind::HullWhite { v0, .. }, "v0") => v0,
                (ModelKind::HullWhite { mu, .. }, "mu") => mu,
                (ModelKind::HullWhite { sigma_v, .. }, "sigma_v") => sigma_v,
                (ModelKind::Scott { y0, .. }, "y0") => y0,
                (ModelKind::Scott { kappa, .. }, "kappa") => kappa,
                (ModelKind::Scott { theta, .. }, "theta") => theta,
                (ModelKind::Scott { beta, .. }, "beta") => beta,
                (ModelKind::RoughFou { y0, .. }, "y0") => y0,
                (ModelKind::RoughFou { lambda, .. }, "lambda") => lambda,
                (ModelKind::RoughFou { theta, .. }, "theta") => theta,
                (ModelKind::RoughFou { beta, .. }, "beta") => beta,
                (ModelKind::RoughFou { hurst, .. }, "hurst") => hurst,
                _ => {
                    return Err(ModelError::UnknownParameter {
                        model: name.to_string(),
                        key: key.clone(),
                    })
                }
            };
            *slot = value;
        }
        Ok(kind)
    }

    /// Initial volatility `ν₀`.
    pub fn nu0(&self) -> f64 {
        match *self {
            ModelKind::Gbm { sigma } => sigma,
            ModelKind::Heston { v0, .. } | ModelKind::HullWhite { v0, .. } => v0.sqrt(),
            ModelKind::Scott { y0, .. } | ModelKind::RoughFou { y0, .. } => y0.exp(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        for (i, (k, v)) in self.params().into_iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

/// One simulable market: volatility model, initial spot, horizon, grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub s0: f64,
    pub horizon: f64,
    pub n_steps: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, s0: f64, horizon: f64, n_steps: usize) -> Self {
        Self {
            kind,
            s0,
            horizon,
            n_steps,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::invalid(name, v, "must be positive and finite"))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::invalid(name, v, "must be nonnegative and finite"))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::invalid(name, v, "must be finite"))
            }
        };
        positive("s0", self.s0)?;
        positive("horizon", self.horizon)?;
        if self.n_steps == 0 {
            return Err(ModelError::invalid("n_steps", 0.0, "must be positive"));
        }
        match self.kind {
            ModelKind::Gbm { sigma } => positive("sigma", sigma)?,
            ModelKind::Heston { v0, kappa, theta, xi } => {
                positive("v0", v0)?;
                nonneg("kappa", kappa)?;
                nonneg("theta", theta)?;
                nonneg("xi", xi)?;
            }
            ModelKind::HullWhite { v0, mu, sigma_v } => {
                positive("v0", v0)?;
                finite("mu", mu)?;
                nonneg("sigma_v", sigma_v)?;
            }
            ModelKind::Scott { y0, kappa, theta, beta } => {
                finite("y0", y0)?;
                nonneg("kappa", kappa)?;
                finite("theta", theta)?;
                nonneg("beta", beta)?;
            }
            ModelKind::RoughFou {
                y0,
                lambda,
                theta,
                beta,
                hurst,
            } => {
                finite("y0", y0)?;
                nonneg("lambda", lambda)?;
                finite("theta", theta)?;
                nonneg("beta", beta)?;
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(ModelError::invalid("hurst", hurst, "must lie in (0, 1)"));
                }
                if self.n_steps > MAX_FBM_STEPS {
                    return Err(ModelError::FbmTooLarge {
                        n_steps: self.n_steps,
                        cap: MAX_FBM_STEPS,
                    });
                }
            }
        }
        positive("nu0", self.kind.nu0())
    }
}

/// Per-path generator: ChaCha8 seeded with `seed`, stream = path index.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

#[inline]
pub(crate) fn log_euler_step(s: f64, nu: f64, dw: f64, dt: f64) -> f64 {
    s * (nu * dw - 0.5 * nu * nu * dt).exp()
}

/// A single simulated path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub spot: Vec<f64>,
    pub vol: Vec<f64>,
    pub dw: Vec<f64>,
    pub dw_hat: Vec<f64>,
    pub vol_clamps: u64,
}

/// Validated spec plus cached state (the fBM factor for the rough model).
#[derive(Clone, Debug)]
pub struct Simulator {
    spec: ModelSpec,
    fbm: Option<FbmGenerator>,
}

impl Simulator {
    pub fn new(spec: ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let fbm = match spec.kind {
            ModelKind::RoughFou { hurst, .. } => Some(FbmGenerator::new(hurst, spec.n_steps, spec.horizon)?),
            _ => None,
        };
        Ok(Self { spec, fbm })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Brownian increments of `W` for one path. Every model draws these
    /// first, so the same `(seed, path)` gives the same `W` in every model.
    pub fn brownian_increments(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let sq = self.spec.dt().sqrt();
        (0..self.spec.n_steps)
            .map(|_| sq * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Increments driving the volatility (`ΔŴ`, or `ΔB^H` for the rough model).
    fn vol_driver(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.fbm {
            Some(gen) => gen.sample(rng),
            None => {
                let sq = self.spec.dt().sqrt();
                (0..self.spec.n_steps)
                    .map(|_| sq * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        }
    }

    /// Volatility at every grid node from the driver increments.
    pub fn vol_path(&self, dw_hat: &[f64]) -> (Vec<f64>, u64) {
        let n = self.spec.n_steps;
        let dt = self.spec.dt();
        let mut vol = Vec::with_capacity(n + 1);
        let mut clamps = 0u64;
        let mut floor = |v: f64| {
            if v < VOL_FLOOR {
                clamps += 1;
                VOL_FLOOR
            } else {
                v
            }
        };
        match self.spec.kind {
            ModelKind::Gbm { sigma } => vol.resize(n + 1, sigma),
            ModelKind::Heston { v0, kappa, theta, xi } => {
                let mut v = v0;
                vol.push(floor(v.max(0.0).sqrt()));
                for &dz in dw_hat {
                    let vp = v.max(0.0);
                    v += kappa * (theta - vp) * dt + xi * vp.sqrt() * dz;
                    vol.push(floor(v.max(0.0).sqrt()));
                }
            }
            ModelKind::HullWhite { v0, mu, sigma_v } => {
                let mut lv = v0.ln();
                vol.push(floor((0.5 * lv).exp()));
                for &dz in dw_hat {
                    lv += (mu - 0.5 * sigma_v * sigma_v) * dt + sigma_v * dz;
                    vol.push(floor((0.5 * lv).exp()));
                }
            }
            ModelKind::Scott { y0, kappa, theta, beta } => {
                let (decay, sd_ratio) = ou_coefficients(kappa, dt);
                let mut y = y0;
                vol.push(floor(y.exp()));
                for &dz in dw_hat {
                    y = theta + (y - theta) * decay + beta * sd_ratio * dz;
                    vol.push(floor(y.exp()));
                }
            }
            ModelKind::RoughFou {
                y0,
                lambda,
                theta,
                beta,
                ..
            } => {
                let mut y = y0;
                vol.push(floor(y.exp()));
                for &db in dw_hat {
                    y += lambda * (theta - y) * dt + beta * db;
                    vol.push(floor(y.exp()));
                }
            }
        }
        (vol, clamps)
    }

    pub fn simulate_path(&self, seed: u64, path: usize) -> PathSample {
        let mut rng = path_rng(seed, path);
        let dw = self.brownian_increments(&mut rng);
        let dw_hat = self.vol_driver(&mut rng);
        let (vol, vol_clamps) = self.vol_path(&dw_hat);
        let spot = spot_path(&vol[..self.spec.n_steps], self.spec.s0, &dw, self.spec.dt());
        PathSample {
            spot,
            vol,
            dw,
            dw_hat,
            vol_clamps,
        }
    }

    pub fn terminal_spot(&self, seed: u64, path: usize) -> (f64, u64) {
        let p = self.simulate_path(seed, path);
        (p.spot[self.spec.n_steps], p.vol_clamps)
    }
}

/// `exp(−κ dt)` and the ratio of the exact OU step deviation to `√dt`.
pub(crate) fn ou_coefficients(kappa: f64, dt: f64) -> (f64, f64) {
    if kappa == 0.0 {
        (1.0, 1.0)
    } else {
        let decay = (-kappa * dt).exp();
        let var = (1.0 - (-2.0 * kappa * dt).exp()) / (2.0 * kappa);
        (decay, (var / dt).sqrt())
    }
}

fn spot_path(vol: &[f64], x: f64, dw: &[f64], dt: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(dw.len() + 1);
    let mut cur = x;
    s.push(cur);
    for (&nu, &d) in vol.iter().zip(dw) {
        cur = log_euler_step(cur, nu, d, dt);
        s.push(cur);
    }
    s
}

/// `x·exp(Σ α_k ΔW_k − ½ Σ α_k² Δt)` along the grid.
///
/// `alpha` holds the volatility used on each step (left-point); a path of
/// node values one longer than `dw` is accepted and its last entry ignored.
pub fn stochastic_exponential(alpha: &[f64], x: f64, dw: &[f64], dt: f64) -> Result<Vec<f64>, ModelError> {
    if alpha.len() != dw.len() && alpha.len() != dw.len() + 1 {
        return Err(ModelError::LengthMismatch {
            what: "alpha",
            got: alpha.len(),
            expected: dw.len(),
        });
    }
    if !(x > 0.0) {
        return Err(ModelError::invalid("x", x, "must be positive"));
    }
    Ok(spot_path(&alpha[..dw.len()], x, dw, dt))
}

/// Terminal spots of a batch (no paths stored).
#[derive(Clone, Debug, PartialEq)]
pub struct TerminalBatch {
    pub spec: ModelSpec,
    pub seed: u64,
    pub terminal: Vec<f64>,
    pub vol_clamps: u64,
}

pub fn simulate_terminal(
    spec: &ModelSpec,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<TerminalBatch, ModelError> {
    if n_paths == 0 {
        return Err(ModelError::invalid("n_paths", 0.0, "must be positive"));
    }
    let sim = Simulator::new(*spec)?;
    let out = map_indexed(n_paths, exec, |i| sim.terminal_spot(seed, i));
    Ok(TerminalBatch {
        spec: *spec,
        seed,
        vol_clamps: out.iter().map(|o| o.1).sum(),
        terminal: out.into_iter().map(|o| o.0).collect(),
    })
}

/// Fully stored batch of joint `(S, ν)` paths and their driving increments.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBatch {
    pub spec: ModelSpec,
    pub seed: u64,
    pub n_paths: usize,
    pub times: Vec<f64>,
    spot: Vec<f64>,
    vol: Vec<f64>,
    dw: Vec<f64>,
    dw_hat: Vec<f64>,
    pub vol_clamps: u64,
}

impl PathBatch {
    fn row(data: &[f64], width: usize, i: usize) -> &[f64] {
        &data[i * width..(i + 1) * width]
    }

    pub fn n_steps(&self) -> usize {
        self.spec.n_steps
    }

    pub fn spot(&self, path: usize) -> &[f64] {
        Self::row(&self.spot, self.n_steps() + 1, path)
    }

    pub fn vol(&self, path: usize) -> &[f64] {
        Self::row(&self.vol, self.n_steps() + 1, path)
    }

    pub fn dw(&self, path: usize) -> &[f64] {
        Self::row(&self.dw, self.n_steps(), path)
    }

    pub fn dw_hat(&self, path: usize) -> &[f64] {
        Self::row(&self.dw_hat, self.n_steps(), path)
    }

    pub fn terminal(&self) -> Vec<f64> {
        (0..self.n_paths).map(|i| self.spot(i)[self.n_steps()]).collect()
    }

    /// CSV dump: a `#` comment line echoing the seed and model, then
    /// `path_id,t,S,nu` with one row per path and grid node.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# seed={} model={} s0={} horizon={} n_steps={} n_paths={}",
            self.seed, self.spec.kind, self.spec.s0, self.spec.horizon, self.spec.n_steps, self.n_paths
        );
        out.push_str("path_id,t,S,nu\n");
        for i in 0..self.n_paths {
            for ((t, s), v) in self.times.iter().zip(self.spot(i)).zip(self.vol(i)) {
                let _ = writeln!(out, "{i},{t},{s},{v}");
            }
        }
        out
    }
}

pub fn simulate(spec: &ModelSpec, n_paths: usize, seed: u64) -> Result<PathBatch, ModelError> {
    simulate_with(spec, n_paths, seed, Execution::Parallel, DEFAULT_MAX_CELLS)
}

pub fn simulate_with(
    spec: &ModelSpec,
    n_paths: usize,
    seed: u64,
    exec: Execution,
    max_cells: usize,
) -> Result<PathBatch, ModelError> {
    if n_paths == 0 {
        return Err(ModelError::invalid("n_paths", 0.0, "must be positive"));
    }
    let sim = Simulator::new(*spec)?;
    let requested = n_paths.saturating_mul(spec.n_steps + 1);
    if requested > max_cells {
        return Err(ModelError::ResourceLimit {
            requested,
            cap: max_cells,
        });
    }
    let paths = map_indexed(n_paths, exec, |i| sim.simulate_path(seed, i));
    let n = spec.n_steps;
    let dt = spec.dt();
    let mut batch = PathBatch {
        spec: *spec,
        seed,
        n_paths,
        times: (0..=n)
            .map(|k| if k == n { spec.horizon } else { k as f64 * dt })
            .collect(),
        spot: Vec::with_capacity(n_paths * (n + 1)),
        vol: Vec::with_capacity(n_paths * (n + 1)),
        dw: Vec::with_capacity(n_paths * n),
        dw_hat: Vec::with_capacity(n_paths * n),
        vol_clamps: 0,
    };
    for p in paths {
        batch.spot.extend_from_slice(&p.spot);
        batch.vol.extend_from_slice(&p.vol);
        batch.dw.extend_from_slice(&p.dw);
        batch.dw_hat.extend_from_slice(&p.dw_hat);
        batch.vol_clamps += p.vol_clamps;
    }
    Ok(batch)
}
