//! Subcommand definitions and runners.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;

use disagg_core::{
    adaptive_sp_td, default_rho_grid, disaggregate_classical, generate, sp_td, AggregationMode,
    AggregationSpec, CovarianceKind, DgpConfig, DgpOutput, DisaggregationResult, FitInfo,
    IndicatorPanel, Method, Trace,
};

use crate::error::{CliError, Result};
use crate::filter::{correlation_filter, DropReason};
use crate::io;

#[derive(Parser)]
#[command(name = "disagg", version, about = "Temporal disaggregation of low-frequency time series")]
pub struct Cli {
    /// Seed for random draws (simulate, benchmark); entropy-seeded if absent
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Estimate a high-frequency series from a benchmark and an indicator panel
    Disaggregate(DisaggregateArgs),
    /// Generate a synthetic benchmark / indicator / coefficient bundle
    Simulate(SimulateArgs),
    /// Seeded Monte-Carlo comparison of methods on synthetic data
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ChowLin,
    Fernandez,
    Litterman,
    SpTd,
    AdaptiveSpTd,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::ChowLin => Method::ChowLin,
            MethodArg::Fernandez => Method::Fernandez,
            MethodArg::Litterman => Method::Litterman,
            MethodArg::SpTd => Method::SpTd,
            MethodArg::AdaptiveSpTd => Method::AdaptiveSpTd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AggModeArg {
    Sum,
    Average,
    First,
    Last,
}

impl From<AggModeArg> for AggregationMode {
    fn from(m: AggModeArg) -> Self {
        match m {
            AggModeArg::Sum => AggregationMode::Sum,
            AggModeArg::Average => AggregationMode::Average,
            AggModeArg::First => AggregationMode::First,
            AggModeArg::Last => AggregationMode::Last,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ErrorModelArg {
    ChowLin,
    Fernandez,
    Litterman,
}

impl From<ErrorModelArg> for CovarianceKind {
    fn from(m: ErrorModelArg) -> Self {
        match m {
            ErrorModelArg::ChowLin => CovarianceKind::Ar1,
            ErrorModelArg::Fernandez => CovarianceKind::Fernandez,
            ErrorModelArg::Litterman => CovarianceKind::Litterman,
        }
    }
}

#[derive(Args)]
pub struct DisaggregateArgs {
    /// Benchmark series file (single numeric column; optional header and date column)
    #[arg(long)]
    pub input: PathBuf,

    /// Indicator panel file (one high-frequency period per row)
    #[arg(long)]
    pub indicators: PathBuf,

    #[arg(long, value_enum, default_value_t = MethodArg::ChowLin)]
    pub method: MethodArg,

    #[arg(long = "agg-mode", value_enum, default_value_t = AggModeArg::Sum)]
    pub agg_mode: AggModeArg,

    /// High-frequency periods per low-frequency period
    #[arg(long, default_value_t = 4)]
    pub ratio: usize,

    /// Autocorrelation grid: "lo:hi:count" or comma-separated values
    /// (default: 199 points in [-0.99, 0.99])
    #[arg(long = "rho-grid", allow_hyphen_values = true)]
    pub rho_grid: Option<String>,

    /// Drop indicators whose absolute pairwise correlation exceeds this
    /// before fitting; an audit file records the drops
    #[arg(long = "corr-threshold")]
    pub corr_threshold: Option<f64>,

    #[arg(long = "output-dir")]
    pub output_dir: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long = "n-low")]
    pub n_low: usize,

    /// High-frequency length (default: n_low * ratio; larger values add an
    /// extrapolation region)
    #[arg(long = "n-high")]
    pub n_high: Option<usize>,

    #[arg(long, default_value_t = 4)]
    pub ratio: usize,

    /// Number of indicator columns
    #[arg(long, default_value_t = 1)]
    pub d: usize,

    /// Autocorrelation of the error process
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,

    /// Fraction of zero coefficients
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,

    #[arg(long = "beta-magnitude", default_value_t = 1.0)]
    pub beta_magnitude: f64,

    #[arg(long = "error-method", value_enum, default_value_t = ErrorModelArg::ChowLin)]
    pub error_method: ErrorModelArg,

    #[arg(long = "agg-mode", value_enum, default_value_t = AggModeArg::Sum)]
    pub agg_mode: AggModeArg,

    #[arg(long = "design-mean", default_value_t = 0.0, allow_negative_numbers = true)]
    pub design_mean: f64,

    #[arg(long = "design-sd", default_value_t = 1.0)]
    pub design_sd: f64,

    #[arg(long = "output-dir")]
    pub output_dir: PathBuf,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Methods to compare (comma-separated); a flat interpolation baseline
    /// is always included
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::ChowLin])]
    pub methods: Vec<MethodArg>,

    #[arg(long, default_value_t = 100)]
    pub replicates: usize,

    #[arg(long = "n-low")]
    pub n_low: usize,

    #[arg(long = "n-high")]
    pub n_high: Option<usize>,

    #[arg(long, default_value_t = 4)]
    pub ratio: usize,

    #[arg(long, default_value_t = 1)]
    pub d: usize,

    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,

    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,

    #[arg(long = "beta-magnitude", default_value_t = 1.0)]
    pub beta_magnitude: f64,

    #[arg(long = "error-method", value_enum, default_value_t = ErrorModelArg::ChowLin)]
    pub error_method: ErrorModelArg,

    #[arg(long = "agg-mode", value_enum, default_value_t = AggModeArg::Sum)]
    pub agg_mode: AggModeArg,

    #[arg(long = "rho-grid", allow_hyphen_values = true)]
    pub rho_grid: Option<String>,

    #[arg(long = "output-dir")]
    pub output_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Disaggregate(args) => cmd_disaggregate(args),
        Command::Simulate(args) => cmd_simulate(args, cli.seed),
        Command::Benchmark(args) => cmd_benchmark(args, cli.seed),
    }
}

/// Parse "--rho-grid": either "lo:hi:count" or a comma-separated list.
pub fn parse_rho_grid(arg: Option<&str>) -> Result<Vec<f64>> {
    let Some(s) = arg else {
        return Ok(default_rho_grid());
    };
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Config(format!(
                "rho grid {s:?} must have the form lo:hi:count"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid bound {:?}", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid bound {:?}", parts[1])))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid count {:?}", parts[2])))?;
        if count == 0 {
            return Err(CliError::Config("grid count must be positive".into()));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad grid value {p:?}")))
            })
            .collect()
    }
}

fn run_method(
    method: Method,
    y_q: &DVector<f64>,
    panel: &IndicatorPanel,
    spec: &AggregationSpec,
    grid: &[f64],
) -> Result<DisaggregationResult> {
    let res = match method {
        Method::SpTd => sp_td(y_q, panel, spec, grid)?,
        Method::AdaptiveSpTd => adaptive_sp_td(y_q, panel, spec, grid)?,
        _ => disaggregate_classical(y_q, panel, spec, method, grid)?,
    };
    Ok(res)
}

fn cmd_disaggregate(args: DisaggregateArgs) -> Result<()> {
    let series = io::load_series(&args.input)?;
    let (mut panel, _panel_labels) = io::load_panel(&args.indicators)?;
    let spec = AggregationSpec::new(
        args.agg_mode.into(),
        args.ratio,
        series.len(),
        panel.n_rows(),
    )?;
    let grid = parse_rho_grid(args.rho_grid.as_deref())?;
    io::ensure_output_dir(&args.output_dir)?;

    if let Some(threshold) = args.corr_threshold {
        let outcome = correlation_filter(&panel, threshold)?;
        let mut rows: Vec<Vec<String>> = Vec::new();
        for &j in &outcome.kept {
            rows.push(vec![panel.names()[j].clone(), "kept".into(), String::new(), String::new()]);
        }
        for drop in &outcome.dropped {
            let status = match drop.reason {
                DropReason::Correlated => "dropped-correlated",
                DropReason::ZeroVariance => "dropped-degenerate",
            };
            rows.push(vec![
                drop.name.clone(),
                status.into(),
                drop.against.map(|i| panel.names()[i].clone()).unwrap_or_default(),
                drop.correlation.map(io::fmt_num).unwrap_or_default(),
            ]);
        }
        io::write_csv(
            &io::out_path(&args.output_dir, "filter_audit.csv"),
            &["column", "status", "against", "correlation"],
            &rows,
        )?;
        println!(
            "correlation filter at {}: kept {} of {} indicators",
            threshold,
            outcome.n_kept(),
            panel.n_cols()
        );
        panel = outcome.panel;
    }

    let method: Method = args.method.into();
    let result = run_method(method, &series.values, &panel, &spec, &grid)?;

    io::write_series(&io::out_path(&args.output_dir, "y_high.csv"), &result.y_high)?;

    // coefficients
    let mut rows: Vec<Vec<String>> = Vec::new();
    if let FitInfo::Sparse(fit) = &result.fit {
        rows.push(vec!["(intercept)".into(), io::fmt_num(fit.intercept)]);
    }
    let beta = result.fit.beta();
    for (j, name) in panel.names().iter().enumerate() {
        rows.push(vec![name.clone(), io::fmt_num(beta[j])]);
    }
    io::write_csv(
        &io::out_path(&args.output_dir, "coefficients.csv"),
        &["name", "estimate"],
        &rows,
    )?;

    // search trace
    match &result.trace {
        Trace::RhoProfile(points) => {
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| vec![io::fmt_num(p.rho), io::fmt_num(p.loglik)])
                .collect();
            io::write_csv(
                &io::out_path(&args.output_dir, "trace.csv"),
                &["rho", "loglik"],
                &rows,
            )?;
        }
        Trace::BicGrid(points) => {
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| {
                    vec![
                        io::fmt_num(p.rho),
                        io::fmt_num(p.lambda),
                        p.df.to_string(),
                        io::fmt_num(p.bic),
                    ]
                })
                .collect();
            io::write_csv(
                &io::out_path(&args.output_dir, "trace.csv"),
                &["rho", "lambda", "df", "bic"],
                &rows,
            )?;
        }
    }

    // per-period consistency report
    let aggregated = result.aggregated()?;
    let scale = series.values.amax().max(f64::MIN_POSITIVE);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..series.len() {
        let residual = aggregated[i] - series.values[i];
        let rel = residual.abs() / scale;
        worst = worst.max(rel);
        let label = series
            .labels
            .as_ref()
            .map(|l| l[i].clone())
            .unwrap_or_else(|| (i + 1).to_string());
        rows.push(vec![
            label,
            io::fmt_num(series.values[i]),
            io::fmt_num(aggregated[i]),
            io::fmt_num(residual),
            io::fmt_num(rel),
        ]);
    }
    io::write_csv(
        &io::out_path(&args.output_dir, "consistency.csv"),
        &["period", "y_low", "aggregated", "residual", "rel_residual"],
        &rows,
    )?;

    // summary
    let mut rows: Vec<Vec<String>> = vec![
        vec!["method".into(), method.to_string()],
        vec!["n_low".into(), spec.n_low().to_string()],
        vec!["n_high".into(), spec.n_high().to_string()],
        vec!["ratio".into(), spec.ratio().to_string()],
        vec!["agg_mode".into(), spec.mode().to_string()],
        vec!["rho_hat".into(), io::fmt_num(result.fit.rho())],
        vec!["sigma2".into(), io::fmt_num(result.fit.sigma2())],
        vec!["loglik".into(), io::fmt_num(result.fit.loglik())],
    ];
    if let FitInfo::Sparse(fit) = &result.fit {
        rows.push(vec!["lambda".into(), io::fmt_num(fit.lambda)]);
        rows.push(vec!["bic".into(), io::fmt_num(fit.bic)]);
        rows.push(vec![
            "fallback_intercept_only".into(),
            fit.fallback_intercept_only.to_string(),
        ]);
    }
    rows.push(vec![
        "selected_count".into(),
        result.selected_columns.len().to_string(),
    ]);
    rows.push(vec![
        "selected_columns".into(),
        result.selected_columns.join(";"),
    ]);
    rows.push(vec!["max_rel_residual".into(), io::fmt_num(worst)]);
    io::write_csv(
        &io::out_path(&args.output_dir, "summary.csv"),
        &["key", "value"],
        &rows,
    )?;

    println!(
        "{}: rho_hat = {:.3}, selected {} of {} indicators, max consistency residual {:.2e}",
        method,
        result.fit.rho(),
        result.selected_columns.len(),
        panel.n_cols(),
        worst
    );
    println!("wrote results to {}", args.output_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_dgp_config(
    n_low: usize,
    n_high: Option<usize>,
    ratio: usize,
    d: usize,
    rho: f64,
    sparsity: f64,
    beta_magnitude: f64,
    error_method: ErrorModelArg,
    agg_mode: AggModeArg,
    design_mean: f64,
    design_sd: f64,
    seed: Option<u64>,
) -> DgpConfig {
    let mut config = DgpConfig::new(n_low, n_high.unwrap_or(n_low * ratio), ratio);
    config.d = d;
    config.rho = rho;
    config.sparsity = sparsity;
    config.beta_magnitude = beta_magnitude;
    config.error_model = error_method.into();
    config.agg_mode = agg_mode.into();
    config.design_mean = design_mean;
    config.design_sd = design_sd;
    config.seed = seed;
    config
}

fn cmd_simulate(args: SimulateArgs, seed: Option<u64>) -> Result<()> {
    let config = build_dgp_config(
        args.n_low,
        args.n_high,
        args.ratio,
        args.d,
        args.rho,
        args.sparsity,
        args.beta_magnitude,
        args.error_method,
        args.agg_mode,
        args.design_mean,
        args.design_sd,
        seed,
    );
    let out = generate(&config)?;
    io::ensure_output_dir(&args.output_dir)?;

    io::write_series(&io::out_path(&args.output_dir, "y_low.csv"), &out.y_low)?;
    io::write_series(&io::out_path(&args.output_dir, "y_high.csv"), &out.y_high)?;
    io::write_series(&io::out_path(&args.output_dir, "errors.csv"), &out.errors)?;

    let mut header: Vec<String> = vec!["period".into()];
    header.extend((1..=config.d).map(|j| format!("x{j}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..config.n_high)
        .map(|i| {
            let mut row = vec![(i + 1).to_string()];
            row.extend((0..config.d).map(|j| io::fmt_num(out.x[(i, j)])));
            row
        })
        .collect();
    io::write_csv(
        &io::out_path(&args.output_dir, "indicators.csv"),
        &header_refs,
        &rows,
    )?;

    let rows: Vec<Vec<String>> = (0..config.d)
        .map(|j| vec![format!("x{}", j + 1), io::fmt_num(out.beta_true[j])])
        .collect();
    io::write_csv(
        &io::out_path(&args.output_dir, "beta_true.csv"),
        &["name", "value"],
        &rows,
    )?;

    println!(
        "simulated n_low = {}, n_high = {}, d = {} ({} errors, rho = {}) into {}",
        config.n_low,
        config.n_high,
        config.d,
        args.error_method
            .to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default(),
        config.rho,
        args.output_dir.display()
    );
    Ok(())
}

/// Flat within-block spread of the benchmark: the baseline every
/// regression-based method should beat.
pub fn interpolate_flat(y_low: &DVector<f64>, spec: &AggregationSpec) -> DVector<f64> {
    let mut out = DVector::zeros(spec.n_high());
    let per_period = |v: f64| match spec.mode() {
        AggregationMode::Sum => v / spec.ratio() as f64,
        _ => v,
    };
    for i in 0..spec.n_low() {
        for k in 0..spec.ratio() {
            out[i * spec.ratio() + k] = per_period(y_low[i]);
        }
    }
    // extrapolation region: carry the last observed block value forward
    let last = per_period(y_low[spec.n_low() - 1]);
    for t in spec.n_low() * spec.ratio()..spec.n_high() {
        out[t] = last;
    }
    out
}

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        let da = a[i] - ma;
        let db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

fn rmse(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    ((a - b).norm_squared() / a.len() as f64).sqrt()
}

struct ReplicateRow {
    method: String,
    replicate: usize,
    ok: bool,
    error: String,
    y_corr: f64,
    y_rmse: f64,
    beta_rmse: Option<f64>,
    support_recall: Option<f64>,
    exact_support: Option<bool>,
    consistency: f64,
}

fn evaluate_estimate(
    method: String,
    replicate: usize,
    estimate: &DVector<f64>,
    beta_hat: Option<&DVector<f64>>,
    out: &DgpOutput,
    spec: &AggregationSpec,
) -> ReplicateRow {
    let agg = spec.aggregate(estimate).expect("estimate has n_high rows");
    let scale = out.y_low.amax().max(f64::MIN_POSITIVE);
    let mut consistency: f64 = 0.0;
    for i in 0..out.y_low.len() {
        consistency = consistency.max((agg[i] - out.y_low[i]).abs() / scale);
    }
    let (beta_rmse, support_recall, exact_support) = match beta_hat {
        Some(beta) => {
            let d = beta.len();
            let rmse_b = ((beta - &out.beta_true).norm_squared() / d as f64).sqrt();
            let true_support: Vec<usize> =
                (0..d).filter(|&j| out.beta_true[j] != 0.0).collect();
            let selected: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
            let recall = if true_support.is_empty() {
                1.0
            } else {
                true_support
                    .iter()
                    .filter(|j| selected.contains(j))
                    .count() as f64
                    / true_support.len() as f64
            };
            (Some(rmse_b), Some(recall), Some(selected == true_support))
        }
        None => (None, None, None),
    };
    ReplicateRow {
        method,
        replicate,
        ok: true,
        error: String::new(),
        y_corr: pearson(estimate, &out.y_high),
        y_rmse: rmse(estimate, &out.y_high),
        beta_rmse,
        support_recall,
        exact_support,
        consistency,
    }
}

fn cmd_benchmark(args: BenchmarkArgs, seed: Option<u64>) -> Result<()> {
    if args.replicates == 0 {
        return Err(CliError::Config("replicates must be positive".into()));
    }
    let grid = parse_rho_grid(args.rho_grid.as_deref())?;
    let base_seed = seed.unwrap_or(0);
    let base_config = build_dgp_config(
        args.n_low,
        args.n_high,
        args.ratio,
        args.d,
        args.rho,
        args.sparsity,
        args.beta_magnitude,
        args.error_method,
        args.agg_mode,
        0.0,
        1.0,
        None,
    );
    // fail fast on an invalid scenario
    let spec = base_config.spec()?;

    let methods: Vec<Method> = args.methods.iter().map(|&m| m.into()).collect();

    let per_replicate: Vec<Vec<ReplicateRow>> = (0..args.replicates)
        .into_par_iter()
        .map(|r| {
            let mut config = base_config.clone();
            config.seed = Some(base_seed.wrapping_add(r as u64));
            let out = generate(&config).expect("validated configuration");
            let panel = IndicatorPanel::unnamed(out.x.clone());
            let mut rows = Vec::with_capacity(methods.len() + 1);
            for &method in &methods {
                let row = match run_method(method, &out.y_low, &panel, &spec, &grid) {
                    Ok(res) => {
                        let beta = res.fit.beta().clone();
                        evaluate_estimate(
                            method.to_string(),
                            r,
                            &res.y_high,
                            Some(&beta),
                            &out,
                            &spec,
                        )
                    }
                    Err(e) => ReplicateRow {
                        method: method.to_string(),
                        replicate: r,
                        ok: false,
                        error: e.to_string(),
                        y_corr: 0.0,
                        y_rmse: 0.0,
                        beta_rmse: None,
                        support_recall: None,
                        exact_support: None,
                        consistency: 0.0,
                    },
                };
                rows.push(row);
            }
            let flat = interpolate_flat(&out.y_low, &spec);
            rows.push(evaluate_estimate(
                "interpolation".into(),
                r,
                &flat,
                None,
                &out,
                &spec,
            ));
            rows
        })
        .collect();

    io::ensure_output_dir(&args.output_dir)?;

    // per-replicate table
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rep in &per_replicate {
        for row in rep {
            rows.push(vec![
                row.method.clone(),
                row.replicate.to_string(),
                row.ok.to_string(),
                io::fmt_num(row.y_corr),
                io::fmt_num(row.y_rmse),
                row.beta_rmse.map(io::fmt_num).unwrap_or_default(),
                row.support_recall.map(io::fmt_num).unwrap_or_default(),
                row.exact_support.map(|b| b.to_string()).unwrap_or_default(),
                io::fmt_num(row.consistency),
            ]);
        }
    }
    io::write_csv(
        &io::out_path(&args.output_dir, "benchmark_replicates.csv"),
        &[
            "method",
            "replicate",
            "ok",
            "y_corr",
            "y_rmse",
            "beta_rmse",
            "support_recall",
            "exact_support",
            "consistency",
        ],
        &rows,
    )?;

    // per-method summary, interpolation baseline last
    let mut names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    names.push("interpolation".into());
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut stdout_lines: Vec<String> = Vec::new();
    for name in &names {
        let group: Vec<&ReplicateRow> = per_replicate
            .iter()
            .flatten()
            .filter(|r| &r.method == name)
            .collect();
        let ok: Vec<&&ReplicateRow> = group.iter().filter(|r| r.ok).collect();
        let failures = group.len() - ok.len();
        let first_error = group
            .iter()
            .find(|r| !r.ok)
            .map(|r| r.error.clone())
            .unwrap_or_default();
        let mean = |f: &dyn Fn(&ReplicateRow) -> f64| -> f64 {
            if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        let beta_ok: Vec<f64> = ok.iter().filter_map(|r| r.beta_rmse).collect();
        let recall_ok: Vec<f64> = ok.iter().filter_map(|r| r.support_recall).collect();
        let exact_ok: Vec<bool> = ok.iter().filter_map(|r| r.exact_support).collect();
        let beta_rmse = if beta_ok.is_empty() {
            String::new()
        } else {
            io::fmt_num(beta_ok.iter().sum::<f64>() / beta_ok.len() as f64)
        };
        let recall = if recall_ok.is_empty() {
            String::new()
        } else {
            io::fmt_num(recall_ok.iter().sum::<f64>() / recall_ok.len() as f64)
        };
        let exact = if exact_ok.is_empty() {
            String::new()
        } else {
            io::fmt_num(
                exact_ok.iter().filter(|b| **b).count() as f64 / exact_ok.len() as f64,
            )
        };
        let worst_consistency = ok
            .iter()
            .map(|r| r.consistency)
            .fold(0.0f64, f64::max);
        rows.push(vec![
            name.clone(),
            group.len().to_string(),
            failures.to_string(),
            io::fmt_num(mean(&|r| r.y_corr)),
            io::fmt_num(mean(&|r| r.y_rmse)),
            beta_rmse,
            recall,
            exact,
            io::fmt_num(worst_consistency),
            first_error,
        ]);
        stdout_lines.push(format!(
            "{name}: mean corr {:.3}, mean rmse {:.3}, failures {failures}",
            mean(&|r| r.y_corr),
            mean(&|r| r.y_rmse),
        ));
    }
    io::write_csv(
        &io::out_path(&args.output_dir, "benchmark_summary.csv"),
        &[
            "method",
            "replicates",
            "failures",
            "y_corr_mean",
            "y_rmse_mean",
            "beta_rmse_mean",
            "support_recall_mean",
            "exact_support_rate",
            "max_consistency_residual",
            "first_error",
        ],
        &rows,
    )?;

    println!(
        "benchmark: {} replicates, seed {}, n_low = {}, n_high = {}, d = {}",
        args.replicates,
        base_seed,
        base_config.n_low,
        base_config.n_high,
        base_config.d
    );
    for line in stdout_lines {
        println!("  {line}");
    }
    println!("wrote results to {}", args.output_dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_grid_forms() {
        assert_eq!(parse_rho_grid(None).unwrap().len(), 199);
        let g = parse_rho_grid(Some("-0.5:0.5:3")).unwrap();
        assert_eq!(g, vec![-0.5, 0.0, 0.5]);
        let g = parse_rho_grid(Some("0.25")).unwrap();
        assert_eq!(g, vec![0.25]);
        let g = parse_rho_grid(Some("0.1,0.2,0.3")).unwrap();
        assert_eq!(g, vec![0.1, 0.2, 0.3]);
        assert!(parse_rho_grid(Some("a:b:3")).is_err());
        assert!(parse_rho_grid(Some("0:1")).is_err());
        assert!(parse_rho_grid(Some("0.1,x")).is_err());
    }

    #[test]
    fn default_grid_covers_the_open_interval_symmetrically() {
        let g = parse_rho_grid(None).unwrap();
        assert_eq!(g.len(), 199);
        assert!((g[0] + 0.99).abs() < 1e-12);
        assert!((g[198] - 0.99).abs() < 1e-12);
        assert!(g[99].abs() < 1e-12);
    }

    #[test]
    fn flat_interpolation_is_consistent_for_every_mode() {
        for mode in [
            AggregationMode::Sum,
            AggregationMode::Average,
            AggregationMode::First,
            AggregationMode::Last,
        ] {
            let spec = AggregationSpec::new(mode, 4, 3, 14).unwrap();
            let y = DVector::from_vec(vec![12.0, -8.0, 4.0]);
            let flat = interpolate_flat(&y, &spec);
            let agg = spec.aggregate(&flat).unwrap();
            for i in 0..3 {
                assert!((agg[i] - y[i]).abs() < 1e-12 * y.amax());
            }
            // extrapolation region carries the last block value
            assert_eq!(flat[12], flat[13]);
        }
    }

    #[test]
    fn pearson_basics() {
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        assert!((pearson(&a, &b) - 1.0).abs() < 1e-12);
        let c = DVector::from_vec(vec![3.0, 2.0, 1.0]);
        assert!((pearson(&a, &c) + 1.0).abs() < 1e-12);
        let flat = DVector::from_element(3, 5.0);
        assert_eq!(pearson(&a, &flat), 0.0);
    }
}
