//! Shared fixtures for the benchmark targets.

use disagg_core::{generate, AggregationSpec, DgpConfig, DgpOutput, IndicatorPanel};

/// A seeded instance of the given size, ready to feed the estimators.
pub fn instance(
    n_low: usize,
    n_high: usize,
    ratio: usize,
    d: usize,
    rho: f64,
    sparsity: f64,
    seed: u64,
) -> (DgpOutput, IndicatorPanel, AggregationSpec) {
    let mut config = DgpConfig::new(n_low, n_high, ratio);
    config.d = d;
    config.rho = rho;
    config.sparsity = sparsity;
    config.seed = Some(seed);
    let out = generate(&config).expect("valid benchmark configuration");
    let spec = config.spec().expect("valid benchmark configuration");
    let panel = IndicatorPanel::unnamed(out.x.clone());
    (out, panel, spec)
}
