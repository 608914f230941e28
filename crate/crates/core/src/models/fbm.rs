use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ModelError;

/// Largest grid accepted by the dense factorization.
pub const MAX_FBM_STEPS: usize = 4096;

/// Exact-covariance generator of fractional Gaussian noise on a uniform grid.
///
/// Holds the Cholesky factor of the increment covariance
/// `Cov(ΔB_i, ΔB_j) = ½ dt^{2H} (|k+1|^{2H} + |k−1|^{2H} − 2|k|^{2H})`, `k = i − j`,
/// which is the increment form of `Cov(B_s, B_t) = ½(s^{2H} + t^{2H} − |t−s|^{2H})`.
#[derive(Clone, Debug)]
pub struct FbmGenerator {
    hurst: f64,
    n_steps: usize,
    dt: f64,
    /// Row-major lower triangle.
    factor: Vec<f64>,
}

impl FbmGenerator {
    pub fn new(hurst: f64, n_steps: usize, horizon: f64) -> Result<Self, ModelError> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(ModelError::invalid("hurst", hurst, "must lie in (0, 1)"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ModelError::invalid("horizon", horizon, "must be positive"));
        }
        if n_steps == 0 {
            return Err(ModelError::invalid("n_steps", 0.0, "must be positive"));
        }
        if n_steps > MAX_FBM_STEPS {
            return Err(ModelError::FbmTooLarge {
                n_steps,
                cap: MAX_FBM_STEPS,
            });
        }
        let dt = horizon / n_steps as f64;
        let h2 = 2.0 * hurst;
        let scale = 0.5 * dt.powf(h2);
        let acov: Vec<f64> = (0..n_steps)
            .map(|k| {
                let k = k as f64;
                scale * ((k + 1.0).powf(h2) + (k - 1.0).abs().powf(h2) - 2.0 * k.powf(h2))
            })
            .collect();
        let cov = DMatrix::from_fn(n_steps, n_steps, |i, j| acov[i.abs_diff(j)]);
        let chol = cov
            .cholesky()
            .ok_or(ModelError::NotPositiveDefinite { n_steps, hurst })?;
        let l = chol.l();
        let mut factor = Vec::with_capacity(n_steps * (n_steps + 1) / 2);
        for i in 0..n_steps {
            for j in 0..=i {
                factor.push(l[(i, j)]);
            }
        }
        Ok(Self {
            hurst,
            n_steps,
            dt,
            factor,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Maps i.i.d. standard normals to correlated increments.
    pub fn transform(&self, normals: &[f64]) -> Vec<f64> {
        debug_assert_eq!(normals.len(), self.n_steps);
        let mut out = Vec::with_capacity(self.n_steps);
        let mut row = 0;
        for i in 0..self.n_steps {
            let coeffs = &self.factor[row..row + i + 1];
            out.push(coeffs.iter().zip(normals).map(|(a, z)| a * z).sum());
            row += i + 1;
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n_steps).map(|_| rng.sample(StandardNormal)).collect();
        self.transform(&z)
    }
}

/// One draw of fBM increments on `n_steps` uniform steps over `[0, horizon]`.
pub fn fbm_increments(hurst: f64, n_steps: usize, horizon: f64, seed: u64) -> Result<Vec<f64>, ModelError> {
    let gen = FbmGenerator::new(hurst, n_steps, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(gen.sample(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_case_is_diagonal() {
        let g = FbmGenerator::new(0.5, 8, 2.0).unwrap();
        let z: Vec<f64> = (0..8).map(|i| i as f64 - 3.0).collect();
        let out = g.transform(&z);
        for (o, zi) in out.iter().zip(&z) {
            assert!((o - zi * 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn size_cap() {
        assert!(matches!(
            FbmGenerator::new(0.3, MAX_FBM_STEPS + 1, 1.0),
            Err(ModelError::FbmTooLarge { .. })
        ));
        assert!(FbmGenerator::new(1.0, 4, 1.0).is_err());
    }

    #[test]
    fn seeded_draws_repeat() {
        assert_eq!(
            fbm_increments(0.2, 16, 1.0, 9).unwrap(),
            fbm_increments(0.2, 16, 1.0, 9).unwrap()
        );
    }
}
