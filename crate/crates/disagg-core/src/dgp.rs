//! Synthetic data generation for simulation studies.
//!
//! Draws an i.i.d. Gaussian indicator panel, a sparse coefficient vector
//! with entries in `{-beta_magnitude, 0, +beta_magnitude}`, and residuals
//! following one of the supported error processes, then aggregates the
//! resulting high-frequency series to its low-frequency benchmark. All
//! draws come from a single seeded stream, so a fixed seed reproduces the
//! output bit for bit.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::aggregation::{AggregationMode, AggregationSpec};
use crate::covariance::CovarianceKind;
use crate::error::{Error, Result};

/// Configuration of the generator.
#[derive(Clone, Debug)]
pub struct DgpConfig {
    pub n_low: usize,
    pub n_high: usize,
    pub ratio: usize,
    /// Number of indicator columns.
    pub d: usize,
    /// Magnitude of the nonzero coefficients; signs are drawn fairly.
    pub beta_magnitude: f64,
    /// Fraction of coefficients set to zero (rounded half-up).
    pub sparsity: f64,
    /// Error process family.
    pub error_model: CovarianceKind,
    /// Autocorrelation of the error process (ignored for Fernandez).
    pub rho: f64,
    pub agg_mode: AggregationMode,
    pub design_mean: f64,
    pub design_sd: f64,
    /// Fixed seed for reproducible draws; entropy-seeded when absent.
    pub seed: Option<u64>,
}

impl DgpConfig {
    /// Defaults: one dense indicator (`d = 1`, no sparsity), unit
    /// coefficients, uncorrelated AR(1) errors, sum aggregation, standard
    /// normal design.
    pub fn new(n_low: usize, n_high: usize, ratio: usize) -> Self {
        Self {
            n_low,
            n_high,
            ratio,
            d: 1,
            beta_magnitude: 1.0,
            sparsity: 0.0,
            error_model: CovarianceKind::Ar1,
            rho: 0.0,
            agg_mode: AggregationMode::Sum,
            design_mean: 0.0,
            design_sd: 1.0,
            seed: None,
        }
    }

    pub fn spec(&self) -> Result<AggregationSpec> {
        AggregationSpec::new(self.agg_mode, self.ratio, self.n_low, self.n_high)
    }

    fn validate(&self) -> Result<()> {
        self.spec()?;
        if self.d < 1 {
            return Err(Error::Domain("d must be at least 1".into()));
        }
        if !(self.sparsity >= 0.0 && self.sparsity <= 1.0) {
            return Err(Error::Domain(format!(
                "sparsity must lie in [0, 1], got {}",
                self.sparsity
            )));
        }
        if !(self.beta_magnitude > 0.0) {
            return Err(Error::Domain("beta_magnitude must be positive".into()));
        }
        if !(self.design_sd > 0.0) {
            return Err(Error::Domain("design_sd must be positive".into()));
        }
        if self.error_model.uses_rho() && !(self.rho.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "error autocorrelation must satisfy |rho| < 1, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Generated bundle: benchmark, latent high-frequency series, panel,
/// coefficients and errors.
#[derive(Clone, Debug)]
pub struct DgpOutput {
    pub y_low: DVector<f64>,
    pub y_high: DVector<f64>,
    pub x: DMatrix<f64>,
    pub beta_true: DVector<f64>,
    pub errors: DVector<f64>,
}

/// Draw one synthetic instance.
pub fn generate(config: &DgpConfig) -> Result<DgpOutput> {
    config.validate()?;
    let spec = config.spec()?;
    let mut rng = match config.seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed),
        None => ChaCha20Rng::from_os_rng(),
    };

    // panel, filled column by column
    let n = config.n_high;
    let d = config.d;
    let mut x = DMatrix::zeros(n, d);
    for j in 0..d {
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = config.design_mean + config.design_sd * z;
        }
    }

    // coefficient vector: round(sparsity * d) zeros at random positions,
    // the rest +-beta_magnitude with fair signs
    let n_zero = ((config.sparsity * d as f64).round() as usize).min(d);
    let mut order: Vec<usize> = (0..d).collect();
    for i in 0..n_zero {
        let j = rng.random_range(i..d);
        order.swap(i, j);
    }
    let mut beta_true = DVector::zeros(d);
    for &j in order.iter().skip(n_zero) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        beta_true[j] = sign * config.beta_magnitude;
    }

    let errors = sample_errors(config.error_model, config.rho, n, &mut rng);
    let y_high = &x * &beta_true + &errors;
    let y_low = spec.aggregate(&y_high)?;

    Ok(DgpOutput {
        y_low,
        y_high,
        x,
        beta_true,
        errors,
    })
}

/// Draw an error path of length `n` for the given process with unit
/// innovation variance.
pub fn generate_errors(
    model: CovarianceKind,
    rho: f64,
    n: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    if n < 1 {
        return Err(Error::Domain("error length must be at least 1".into()));
    }
    if model.uses_rho() && !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "error autocorrelation must satisfy |rho| < 1, got {rho}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(sample_errors(model, rho, n, &mut rng))
}

fn sample_errors(model: CovarianceKind, rho: f64, n: usize, rng: &mut ChaCha20Rng) -> DVector<f64> {
    let mut u = DVector::zeros(n);
    match model {
        CovarianceKind::Ar1 => {
            // stationary start so the covariance matches the AR(1) shape
            let stat_sd = 1.0 / (1.0 - rho * rho).sqrt();
            let z0: f64 = rng.sample(StandardNormal);
            u[0] = stat_sd * z0;
            for t in 1..n {
                let z: f64 = rng.sample(StandardNormal);
                u[t] = rho * u[t - 1] + z;
            }
        }
        CovarianceKind::Fernandez => {
            // random walk from zero: cumulative sums of the innovations
            let mut acc = 0.0;
            for t in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                acc += z;
                u[t] = acc;
            }
        }
        CovarianceKind::Litterman => {
            // random walk whose increments follow an AR(1) started at zero
            let mut v = 0.0;
            let mut acc = 0.0;
            for t in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                v = rho * v + z;
                acc += v;
                u[t] = acc;
            }
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dimensions_and_sparsity_count() {
        let mut cfg = DgpConfig::new(2, 6, 3);
        cfg.d = 6;
        cfg.beta_magnitude = 0.5;
        cfg.sparsity = 0.5;
        cfg.rho = 0.5;
        cfg.seed = Some(1);
        let out = generate(&cfg).unwrap();
        assert_eq!(out.y_low.len(), 2);
        assert_eq!(out.y_high.len(), 6);
        assert_eq!(out.x.shape(), (6, 6));
        let zeros = out.beta_true.iter().filter(|b| **b == 0.0).count();
        assert_eq!(zeros, 3);
        for b in out.beta_true.iter() {
            assert!(*b == 0.0 || b.abs() == 0.5);
        }
    }

    #[test]
    fn sparsity_one_gives_pure_noise() {
        let mut cfg = DgpConfig::new(3, 9, 3);
        cfg.d = 4;
        cfg.sparsity = 1.0;
        cfg.seed = Some(2);
        let out = generate(&cfg).unwrap();
        assert_eq!(out.beta_true.amax(), 0.0);
        assert_eq!(out.y_high, out.errors);
    }

    #[test]
    fn sparsity_rounding_is_half_up() {
        for (d, sparsity, expected_zeros) in [(2usize, 0.25, 1usize), (4, 0.5, 2), (3, 0.5, 2)] {
            let mut cfg = DgpConfig::new(4, 12, 3);
            cfg.d = d;
            cfg.sparsity = sparsity;
            cfg.seed = Some(3);
            let out = generate(&cfg).unwrap();
            let zeros = out.beta_true.iter().filter(|b| **b == 0.0).count();
            assert_eq!(zeros, expected_zeros, "d={d}, sparsity={sparsity}");
        }
    }

    #[test]
    fn identical_seeds_reproduce_bit_identical_output() {
        let mut cfg = DgpConfig::new(5, 20, 4);
        cfg.d = 3;
        cfg.sparsity = 0.4;
        cfg.rho = 0.6;
        cfg.seed = Some(99);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.y_low, b.y_low);
        assert_eq!(a.y_high, b.y_high);
        assert_eq!(a.x, b.x);
        assert_eq!(a.beta_true, b.beta_true);
        assert_eq!(a.errors, b.errors);
    }

    #[test]
    fn structural_identities_hold_exactly() {
        let mut cfg = DgpConfig::new(4, 14, 3);
        cfg.d = 3;
        cfg.agg_mode = AggregationMode::Average;
        cfg.rho = 0.3;
        cfg.seed = Some(4);
        let out = generate(&cfg).unwrap();
        let rebuilt = &out.x * &out.beta_true + &out.errors;
        assert_eq!(out.y_high, rebuilt);
        let spec = cfg.spec().unwrap();
        assert_eq!(out.y_low, spec.aggregate(&out.y_high).unwrap());
    }

    #[test]
    fn ar1_zero_rho_is_iid_standard_normal() {
        // the AR(1) recursion at rho = 0 must reproduce the raw draws
        let u = generate_errors(CovarianceKind::Ar1, 0.0, 5, 77).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for t in 0..5 {
            let z: f64 = rng.sample(StandardNormal);
            assert_eq!(u[t], z);
        }
    }

    #[test]
    fn fernandez_errors_are_cumulative_sums() {
        let u = generate_errors(CovarianceKind::Fernandez, 0.0, 3, 123).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(123);
        let mut acc = 0.0;
        for t in 0..3 {
            let z: f64 = rng.sample(StandardNormal);
            acc += z;
            assert_eq!(u[t], acc);
        }
    }

    #[test]
    fn ar1_lag_one_autocorrelation_matches_rho() {
        for &rho in &[0.0, 0.8] {
            let mut num = 0.0;
            let mut den = 0.0;
            let series = if rho == 0.0 { 200 } else { 500 };
            let len = if rho == 0.0 { 400 } else { 300 };
            for seed in 0..series {
                let u = generate_errors(CovarianceKind::Ar1, rho, len, 10_000 + seed).unwrap();
                for t in 1..len {
                    num += u[t] * u[t - 1];
                    den += u[t - 1] * u[t - 1];
                }
            }
            let est = num / den;
            assert_abs_diff_eq!(est, rho, epsilon = 0.05);
        }
    }

    #[test]
    fn ar1_stationary_variance_matches_shape() {
        for &rho in &[0.0, 0.5, 0.9] {
            let mut sum_sq = 0.0;
            let mut count = 0usize;
            for seed in 0..400u64 {
                let u = generate_errors(CovarianceKind::Ar1, rho, 50, 20_000 + seed).unwrap();
                for t in 0..50 {
                    sum_sq += u[t] * u[t];
                    count += 1;
                }
            }
            let var = sum_sq / count as f64;
            let expected = 1.0 / (1.0 - rho * rho);
            assert!(
                (var - expected).abs() < 0.1 * expected,
                "rho={rho}: variance {var:.3} vs expected {expected:.3}"
            );
        }
    }

    #[test]
    fn litterman_errors_match_their_shape_covariance() {
        // empirical covariance over many seeds against the analytic shape
        let rho = 0.5;
        let n = 4;
        let shape = crate::covariance::build_litterman_shape(rho, n).unwrap();
        let reps = 40_000u64;
        let mut cov = DMatrix::zeros(n, n);
        for seed in 0..reps {
            let u = generate_errors(CovarianceKind::Litterman, rho, n, 30_000 + seed).unwrap();
            cov += &u * u.transpose();
        }
        cov /= reps as f64;
        for i in 0..n {
            for j in 0..n {
                let expected = shape.matrix()[(i, j)];
                assert!(
                    (cov[(i, j)] - expected).abs() < 0.08 * expected.abs().max(1.0),
                    "cov[{i},{j}] = {:.3} vs {:.3}",
                    cov[(i, j)],
                    expected
                );
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = DgpConfig::new(4, 10, 3);
        cfg.seed = Some(1);
        assert!(matches!(generate(&cfg), Err(Error::Domain(_)))); // 10 < 12

        let mut cfg = DgpConfig::new(4, 12, 3);
        cfg.sparsity = 1.5;
        cfg.seed = Some(1);
        assert!(matches!(generate(&cfg), Err(Error::Domain(_))));

        let mut cfg = DgpConfig::new(4, 12, 3);
        cfg.rho = 1.0;
        cfg.seed = Some(1);
        assert!(matches!(generate(&cfg), Err(Error::Domain(_))));

        assert!(matches!(
            generate_errors(CovarianceKind::Ar1, 1.0, 5, 0),
            Err(Error::Domain(_))
        ));
    }
}
