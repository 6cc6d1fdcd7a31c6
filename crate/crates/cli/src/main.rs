//! Command-line front end: single tomography runs, parameter sweeps,
//! bound-coverage studies, design verification, and bound evaluation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 bound violation reported by `coverage`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use plstomo::analyze::{
    confidence_radius, essential_opnorm_tail, sample_complexity, thm1_tail, thm2_tail, BoundParams,
};
use plstomo::error::Error;
use plstomo::estimate::{pls_pipeline, pls_pipeline_exact, PipelineOutput};
use plstomo::harness::{
    default_parallelism, run_coverage_study, run_sweep, BoundSelector, ExperimentConfig,
    SchemeSpec, StateSpec,
};
use plstomo::linalg::{read_matrix_file, write_matrix_file, DensityMatrix, HermitianMatrix};
use plstomo::measurements::{read_vector_set_file, verify_2design, MeasurementScheme, SchemeKind};
use plstomo::rng::derive_seed;
use plstomo::simulate::{allocate_shots, born_probabilities, sample_counts_allocated};

#[derive(Parser)]
#[command(name = "plstomo", version, about = "Projected least squares quantum state tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulated tomography trial and print its record as JSON.
    Simulate(RunArgs),
    /// Run one trial and write the projected estimator in matrix text format.
    Estimate(EstimateArgs),
    /// Run a (d, n) trial sweep and emit per-trial CSV rows.
    Sweep(SweepArgs),
    /// Compare empirical failure frequencies against a tail bound.
    Coverage(CoverageArgs),
    /// Check an imported vector set for the 2-design property.
    VerifyDesign {
        /// Vector-set file: "d m settings" header, then m lines of re/im pairs.
        #[arg(long)]
        file: PathBuf,
    },
    /// Evaluate one bound formula and print the value.
    Bound(BoundArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Measurement family: mub, pauli-obs, pauli-basis, or uniform.
    #[arg(long)]
    scheme: String,
    /// Hilbert-space dimension (prime for mub, power of 2 for Pauli schemes).
    #[arg(long)]
    d: Option<usize>,
    /// Qubit count; shorthand for --d 2^k.
    #[arg(long, conflicts_with = "d")]
    k: Option<usize>,
    /// Total number of samples.
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target state: random-pure, random-rank:<r>, caricature:<p>, or a matrix file path.
    #[arg(long, default_value = "random-pure")]
    state: String,
    /// Use exact Born probabilities instead of sampled frequencies.
    #[arg(long, default_value_t = false)]
    exact: bool,
    /// Also write the sampled counts as CSV (discrete schemes only).
    #[arg(long)]
    counts_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Where to write the projected estimator (matrix text format).
    #[arg(long, default_value = "estimate_out.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Flat key=value config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated dimension list.
    #[arg(long)]
    dims: Option<String>,
    /// Comma-separated sample-count grid (strictly increasing).
    #[arg(long)]
    n: Option<String>,
    /// total or per-setting.
    #[arg(long)]
    n_unit: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    state: Option<String>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker count: 0 = library default, 1 = sequential.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// thm1, thm2, essential, or thm4:<r>.
    #[arg(long)]
    bound: String,
    /// Comma-separated accuracy grid (ε or τ, depending on the bound).
    #[arg(long, default_value = "0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    eps: String,
}

#[derive(Args)]
struct BoundArgs {
    /// thm1, thm2, essential, radius, or samples.
    #[arg(long)]
    which: String,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    n: f64,
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Accuracy ε (trace norm) or τ (operator norm).
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Needed to pick g(d): mub, pauli-obs, or pauli-basis (ignored by thm2).
    #[arg(long)]
    scheme: Option<String>,
    /// Estimator rank for the radius formula.
    #[arg(long, default_value_t = 1)]
    rank: usize,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::Domain(_) => 2,
        Error::UnsupportedDimension { .. } | Error::RankOutOfRange { .. } => 2,
        _ => 3,
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Simulate(args) => {
            let (out, _, _) = run_single(&args)?;
            println!("{}", record_json(&out));
            Ok(0)
        }
        Command::Estimate(args) => {
            let (out, _, _) = run_single(&args.run)?;
            write_matrix_file(out.pls.state.matrix(), &args.out)?;
            let r = &out.record;
            println!(
                "{{\"trace_error\":{},\"op_error\":{},\"x0\":{},\"rank\":{}}}",
                r.trace_error, r.op_error_l, r.x0, r.rank_estimate
            );
            Ok(0)
        }
        Command::Sweep(args) => {
            let cfg = build_config(&args)?;
            let result = run_sweep(&cfg)?;
            for agg in &result.aggregates {
                println!(
                    "d={} n={} mean_trace_error={:.6} median={:.6} iqr=[{:.6},{:.6}]",
                    agg.d,
                    agg.n,
                    agg.mean_trace_error,
                    agg.median_trace_error,
                    agg.q25_trace_error,
                    agg.q75_trace_error
                );
            }
            for fit in &result.slopes {
                println!("d={} fitted_slope={:.4}", fit.d, fit.slope);
            }
            if let Some(path) = &cfg.out {
                println!("wrote {} rows to {}", result.records.len(), path.display());
            }
            Ok(0)
        }
        Command::Coverage(args) => {
            let cfg = build_config(&args.sweep)?;
            let bound = BoundSelector::parse(&args.bound)?;
            let grid: Vec<f64> = args
                .eps
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad accuracy value {t:?}")))
                })
                .collect::<Result<_, _>>()?;
            let report = run_coverage_study(&cfg, bound, &grid)?;
            let mut stdout = std::io::stdout().lock();
            report
                .write_text(&mut stdout)
                .map_err(|e| Error::io("stdout", e))?;
            Ok(if report.violations() > 0 { 4 } else { 0 })
        }
        Command::VerifyDesign { file } => {
            let (_, _, vectors) = read_vector_set_file(&file)?;
            let check = verify_2design(&vectors)?;
            println!(
                "deviation={:e} {}",
                check.max_deviation,
                if check.pass { "pass" } else { "fail" }
            );
            Ok(0)
        }
        Command::Bound(args) => {
            let value = evaluate_bound(&args)?;
            println!("{value:.12e}");
            Ok(0)
        }
    }
}

fn scheme_dimension(scheme: &SchemeSpec, d: Option<usize>, k: Option<usize>) -> Result<usize, Error> {
    match (d, k) {
        (Some(d), None) => Ok(d),
        (None, Some(k)) => {
            if k == 0 || k > 20 {
                return Err(Error::Config(format!("qubit count {k} out of range")));
            }
            Ok(1usize << k)
        }
        (None, None) => Err(Error::Config("one of --d or --k is required".into())),
        (Some(_), Some(_)) => unreachable!("clap rejects --d with --k"),
    }
    .and_then(|dim| {
        scheme.build(dim)?; // dimension/scheme compatibility check
        Ok(dim)
    })
}

fn run_single(args: &RunArgs) -> Result<(PipelineOutput, MeasurementScheme, DensityMatrix), Error> {
    let scheme_spec = SchemeSpec::parse(&args.scheme)?;
    let d = scheme_dimension(&scheme_spec, args.d, args.k)?;
    let scheme = scheme_spec.build(d)?;
    let state_spec = StateSpec::parse(&args.state)?;
    let rho = match &state_spec {
        StateSpec::FromFile(path) => {
            let m = read_matrix_file(path)?;
            DensityMatrix::new(HermitianMatrix::new(m)?)?
        }
        StateSpec::RandomPure => DensityMatrix::random_pure(d, derive_seed(args.seed, &[1])),
        StateSpec::RandomRank(r) => DensityMatrix::random_rank(d, *r, derive_seed(args.seed, &[1]))?,
        StateSpec::Caricature(p) => {
            DensityMatrix::random_pure(d, derive_seed(args.seed, &[1])).depolarize(*p)?
        }
    };
    let sample_seed = derive_seed(args.seed, &[2]);
    let mut out = if args.exact {
        pls_pipeline_exact(&rho, &scheme)?
    } else {
        pls_pipeline(&rho, &scheme, args.n, sample_seed)?
    };
    out.record.seed = args.seed;
    if let Some(path) = &args.counts_out {
        if args.exact {
            return Err(Error::Config(
                "--counts-out needs sampled data; drop --exact".into(),
            ));
        }
        if matches!(scheme.kind(), SchemeKind::Uniform) {
            return Err(Error::Config(
                "--counts-out applies to discrete schemes only".into(),
            ));
        }
        let table = born_probabilities(&rho, &scheme)?;
        let shots = allocate_shots(args.n, scheme.settings());
        let counts = sample_counts_allocated(&table, &shots, sample_seed);
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
        );
        counts
            .write_csv(&mut f)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok((out, scheme, rho))
}

fn record_json(out: &PipelineOutput) -> String {
    let r = &out.record;
    let radius = if r.radius_delta05.is_finite() {
        format!("{}", r.radius_delta05)
    } else {
        "null".into()
    };
    format!(
        "{{\"scheme\":\"{}\",\"d\":{},\"r_true\":{},\"n\":{},\"seed\":{},\"trace_error\":{},\"op_error_L\":{},\"op_error_rho\":{},\"x0\":{},\"rank\":{},\"sigma_1\":{},\"radius_delta05\":{},\"runtime_ms\":{}}}",
        r.scheme,
        r.d,
        r.r_true,
        r.n,
        r.seed,
        r.trace_error,
        r.op_error_l,
        r.op_error_rho,
        r.x0,
        r.rank_estimate,
        r.sigma_est[0],
        radius,
        r.runtime_ms
    )
}

fn build_config(args: &SweepArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::parse_file(path)?,
        None => {
            if args.scheme.is_none() || args.dims.is_none() || args.n.is_none() {
                return Err(Error::Config(
                    "without --config, the --scheme, --dims, and --n flags are required".into(),
                ));
            }
            let mut cfg = ExperimentConfig::new(SchemeSpec::Mub, Vec::new(), Vec::new());
            cfg.parallelism = default_parallelism();
            cfg
        }
    };
    if let Some(v) = &args.scheme {
        cfg.set("scheme", v)?;
    }
    if let Some(v) = &args.dims {
        cfg.set("dims", v)?;
    }
    if let Some(v) = &args.n {
        cfg.set("n", v)?;
    }
    if let Some(v) = &args.n_unit {
        cfg.set("n_unit", v)?;
    }
    if let Some(v) = args.trials {
        cfg.set("trials", &v.to_string())?;
    }
    if let Some(v) = args.seed {
        cfg.set("seed", &v.to_string())?;
    }
    if let Some(v) = &args.state {
        cfg.set("state", v)?;
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = args.parallelism {
        cfg.set("parallelism", &v.to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bound_scheme_kind(args: &BoundArgs) -> Result<SchemeKind, Error> {
    let spec = args
        .scheme
        .as_deref()
        .ok_or_else(|| Error::Config("--scheme is required for this bound".into()))?;
    Ok(SchemeSpec::parse(spec)?.kind())
}

fn evaluate_bound(args: &BoundArgs) -> Result<f64, Error> {
    match args.which.as_str() {
        "thm1" => {
            let p = BoundParams::for_scheme(
                bound_scheme_kind(args)?,
                args.d,
                args.n,
                args.r,
                args.eps,
                args.delta,
            )?;
            thm1_tail(&p)
        }
        "thm2" => {
            let p = BoundParams::new(args.d, args.n, args.r, args.eps, args.delta, 1.0)?;
            thm2_tail(&p)
        }
        "essential" => {
            let kind = bound_scheme_kind(args)?;
            let p = BoundParams::for_scheme(kind, args.d, args.n, args.r, args.eps, args.delta)?;
            essential_opnorm_tail(&p, kind)
        }
        "radius" => {
            let p = BoundParams::for_scheme(
                bound_scheme_kind(args)?,
                args.d,
                args.n,
                args.r,
                args.eps,
                args.delta,
            )?;
            confidence_radius(&p, args.rank)
        }
        "samples" => {
            let p = BoundParams::for_scheme(
                bound_scheme_kind(args)?,
                args.d,
                args.n,
                args.r,
                args.eps,
                args.delta,
            )?;
            sample_complexity(&p).map(|v| v as f64)
        }
        other => Err(Error::Config(format!(
            "unknown bound {other:?} (expected thm1, thm2, essential, radius, or samples)"
        ))),
    }
}
