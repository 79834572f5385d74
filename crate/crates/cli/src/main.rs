//! `affinekit` — pricing, sensitivities, simulation and self-verification
//! for square-root affine diffusions from the command line.
//!
//! Subcommands: `price`, `greek`, `simulate`, `gw`, `verify`. Flags override
//! `--config <file.json>` values; the resolved configuration is echoed with
//! every run. Exit codes: 0 success, 1 failed verification checks,
//! 2 domain/usage errors, 3 numerical failures.

mod config;

use affinekit::models::{galton_watson_path, GwOptions, OffspringDist};
use affinekit::verify::{run_suite, Suite};
use affinekit::{
    dbeta_shift, delta_combined, delta_shift, expectation_via_density,
    expectation_via_inversion, ibp_shift, mc_expectation, multi_combined, multi_delta, multi_ibp,
    sample_exact, sample_path_euler, transition_rep, validate_params,
    AffineParams, DensityError, DomainError, ExpectationBackend, GreekResult, GreeksError,
    MCConfig, ModelsError, MultiParams, PathGrid, QuadratureConfig, SimulateError, StreamKey,
    TensorTestFunction, TestFunction, TransformsError,
};
use clap::{Args, Parser, Subcommand};
use config::Resolver;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

/// Fatal CLI error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 3,
        }
    }
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<TransformsError> for CliError {
    fn from(e: TransformsError) -> Self {
        match e {
            TransformsError::Quadrature { .. } | TransformsError::NonReal { .. } => {
                Self::numerical(e.to_string())
            }
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<DensityError> for CliError {
    fn from(e: DensityError) -> Self {
        match e {
            DensityError::Quadrature { .. } => Self::numerical(e.to_string()),
            DensityError::Domain(_) => Self::usage(e.to_string()),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<GreeksError> for CliError {
    fn from(e: GreeksError) -> Self {
        match e {
            GreeksError::Transforms(inner) => inner.into(),
            GreeksError::Density(inner) => inner.into(),
            GreeksError::Simulate(inner) => inner.into(),
            GreeksError::CoefficientIdentity { .. } => Self::numerical(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<ModelsError> for CliError {
    fn from(e: ModelsError) -> Self {
        match e {
            ModelsError::Greeks(inner) => inner.into(),
            ModelsError::Resource { .. } => Self::numerical(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "affinekit",
    about = "Expectations, sensitivities and simulation for square-root affine diffusions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// E[f(X_t)] by Fourier inversion, density quadrature or Monte Carlo.
    Price(PriceArgs),
    /// Parameter-shift sensitivities (delta, ibp, combined, dbeta).
    Greek(GreekArgs),
    /// Exact transition draws or a full-truncation Euler path (CSV).
    Simulate(SimulateArgs),
    /// Rescaled Galton-Watson branching ensemble.
    Gw(GwArgs),
    /// Run the self-verification suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ModelFlags {
    /// Diffusion scale alpha (> 0).
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Drift slope beta.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Drift intercept b (>= 0).
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Start point x.
    #[arg(long, allow_negative_numbers = true)]
    x: Option<f64>,
    /// Time horizon t.
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    /// JSON config file; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output format: json or csv (verify also accepts text).
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Payoff: gaussian:m,s | dampedcos:a,w | hermite0:m,s | hermite1:m,s | table:<path.csv>
    #[arg(long = "fn")]
    function: Option<String>,
    /// Backend: inversion | density | mc
    #[arg(long)]
    method: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long)]
    n: Option<u64>,
    /// Monte Carlo master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GreekArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Sensitivity: delta | ibp | combined | dbeta
    #[arg(long)]
    which: Option<String>,
    #[arg(long = "fn")]
    function: Option<String>,
    /// Backend: inversion | density | mc
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coordinate index for the multi-dimensional estimators (requires a
    /// config file with `coords`, `x` and `fns` arrays).
    #[arg(long, visible_alias = "k")]
    coordinate: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Mode: exact (one-step draws) | euler (one path).
    #[arg(long)]
    which: Option<String>,
    /// Number of exact draws.
    #[arg(long)]
    n: Option<u64>,
    /// Euler steps on [0, t].
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GwArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Offspring law: geom:p | poisson:m | binary:p2
    #[arg(long = "fn")]
    function: Option<String>,
    /// Number of replicas.
    #[arg(long)]
    n: Option<u64>,
    /// Population scale N (generations per unit time).
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw every individual's offspring separately instead of sampling
    /// each generation total from its closed-form law.
    #[arg(long)]
    exact_sum: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: core | greeks | mc | gw | all
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output format: text | json | csv
    #[arg(long)]
    output: Option<String>,
}

/// 17 significant digits: enough for bit-exact f64 round trips in CSV.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_payoff(spec: &str) -> Result<TestFunction, CliError> {
    let f = TestFunction::from_str(spec)?;
    if f.is_exploratory() {
        eprintln!(
            "warning: `{spec}` uses an FFT-synthesized transform; integrability of the true \
             transform cannot be certified from samples, treat inversion results as exploratory"
        );
    }
    Ok(f)
}

fn parse_params(alpha: f64, beta: f64, b: f64) -> Result<AffineParams, CliError> {
    Ok(validate_params(alpha, beta, b)?)
}

enum OutputKind {
    Json,
    Csv,
    Text,
}

fn parse_output(s: &str, allow_text: bool) -> Result<OutputKind, CliError> {
    match s {
        "json" => Ok(OutputKind::Json),
        "csv" => Ok(OutputKind::Csv),
        "text" if allow_text => Ok(OutputKind::Text),
        other => Err(CliError::usage(format!("unknown output format `{other}`"))),
    }
}

fn emit_json(command: &str, resolved: Value, results: Value, checks: Value) {
    let report = json!({
        "command": command,
        "resolved_config": resolved,
        "results": results,
        "checks": checks,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
}

fn echo_config_stderr(resolved: &Value) {
    eprintln!("resolved_config: {resolved}");
}

fn run_price(args: PriceArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(args.model.config.as_deref())?;
    let alpha = r.require_f64(args.model.alpha, "alpha")?;
    let beta = r.f64(args.model.beta, "beta", 0.0)?;
    let b = r.require_f64(args.model.b, "b")?;
    let x = r.require_f64(args.model.x, "x")?;
    let t = r.require_f64(args.model.t, "t")?;
    let fn_spec = r.string(args.function.as_deref(), "fn", "gaussian:0,1")?;
    let method = r.string(args.method.as_deref(), "method", "inversion")?;
    let n = r.u64(args.n, "n", 100_000)?;
    let seed = r.u64(args.seed, "seed", 0)?;
    let output = parse_output(&r.string(args.model.output.as_deref(), "output", "json")?, false)?;

    let p = parse_params(alpha, beta, b)?;
    let f = parse_payoff(&fn_spec)?;
    let cfg = QuadratureConfig::default();

    let (value, std_error) = match method.as_str() {
        "inversion" => (expectation_via_inversion(&f, t, x, &p, &cfg)?, None),
        "density" => {
            let rep = transition_rep(t, x, &p)?;
            (
                expectation_via_density(|y| f.evaluate(y), &rep, &cfg)?,
                None,
            )
        }
        "mc" => {
            let est = mc_expectation(
                |y| f.evaluate(y),
                t,
                x,
                &p,
                &MCConfig::new(n, seed),
            )?;
            (est.value, Some(est.std_error))
        }
        other => return Err(CliError::usage(format!("unknown method `{other}`"))),
    };

    let resolved = r.resolved();
    match output {
        OutputKind::Json => emit_json(
            "price",
            resolved,
            json!([{
                "method": method,
                "value": value,
                "std_error": std_error,
                "n": if method == "mc" { Some(n) } else { None },
                "seed": if method == "mc" { Some(seed) } else { None },
            }]),
            json!([]),
        ),
        _ => {
            echo_config_stderr(&resolved);
            println!("value,std_error,n,seed");
            println!(
                "{},{},{},{}",
                fmt(value),
                std_error.map(fmt).unwrap_or_default(),
                if method == "mc" { n.to_string() } else { String::new() },
                if method == "mc" { seed.to_string() } else { String::new() },
            );
        }
    }
    Ok(())
}

fn backend_from(method: &str, n: u64, seed: u64) -> Result<ExpectationBackend, CliError> {
    match method {
        "inversion" => Ok(ExpectationBackend::Inversion(QuadratureConfig::default())),
        "density" => Ok(ExpectationBackend::Density(QuadratureConfig::default())),
        "mc" => Ok(ExpectationBackend::MonteCarlo(MCConfig::new(n, seed))),
        other => Err(CliError::usage(format!("unknown method `{other}`"))),
    }
}

fn greek_report(command: &str, which: &str, g: &GreekResult, resolved: Value, output: OutputKind) {
    let shifted: Vec<Value> = g
        .shifted_params
        .iter()
        .map(|p| json!({"alpha": p.alpha, "beta": p.beta, "b": p.b}))
        .collect();
    match output {
        OutputKind::Json => emit_json(
            command,
            resolved,
            json!([{
                "which": which,
                "value": g.value,
                "std_error": g.std_error,
                "method": g.method,
                "base_params": {
                    "alpha": g.base_params.alpha,
                    "beta": g.base_params.beta,
                    "b": g.base_params.b,
                },
                "shifted_params": shifted,
                "weights": g.weights,
            }]),
            json!([]),
        ),
        _ => {
            echo_config_stderr(&resolved);
            eprintln!(
                "shifted_params: {}",
                serde_json::to_string(&shifted).expect("serializable params")
            );
            eprintln!(
                "weights: [{}]",
                g.weights.iter().map(|w| fmt(*w)).collect::<Vec<_>>().join(", ")
            );
            println!("value,std_error");
            println!(
                "{},{}",
                fmt(g.value),
                g.std_error.map(fmt).unwrap_or_default()
            );
        }
    }
}

fn run_greek(args: GreekArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(args.model.config.as_deref())?;
    let which = r.string(args.which.as_deref(), "which", "delta")?;
    let method = r.string(args.method.as_deref(), "method", "inversion")?;
    let n = r.u64(args.n, "n", 100_000)?;
    let seed = r.u64(args.seed, "seed", 0)?;
    let t = r.require_f64(args.model.t, "t")?;
    let output = parse_output(&r.string(args.model.output.as_deref(), "output", "json")?, false)?;
    let be = backend_from(&method, n, seed)?;

    if let Some(block) = r.multi_block()? {
        let Some(k) = args.coordinate else {
            return Err(CliError::usage(
                "config defines multi-dimensional `coords`; pass --coordinate/--k",
            ));
        };
        let coords = block
            .coords
            .iter()
            .map(|(a, beta, b)| Ok(validate_params(*a, *beta, *b)?))
            .collect::<Result<Vec<_>, CliError>>()?;
        let mp = MultiParams::new(coords)?;
        let factors = block
            .fns
            .iter()
            .map(|s| parse_payoff(s))
            .collect::<Result<Vec<_>, CliError>>()?;
        let f = TensorTestFunction::new(factors)?;
        let g = match which.as_str() {
            "delta" => multi_delta(k, &f, t, &block.x, &mp, &be)?,
            "ibp" => multi_ibp(k, &f, t, &block.x, &mp, &be)?,
            "combined" => multi_combined(k, &f, t, &block.x, &mp, &be)?,
            "dbeta" => {
                return Err(CliError::usage(
                    "dbeta is one-dimensional; drop --coordinate",
                ))
            }
            other => return Err(CliError::usage(format!("unknown greek `{other}`"))),
        };
        greek_report("greek", &which, &g, r.resolved(), output);
        return Ok(());
    }

    if args.coordinate.is_some() {
        return Err(CliError::usage(
            "--coordinate needs a config file with `coords`, `x` and `fns` arrays",
        ));
    }

    let alpha = r.require_f64(args.model.alpha, "alpha")?;
    let beta = r.f64(args.model.beta, "beta", 0.0)?;
    let b = r.require_f64(args.model.b, "b")?;
    let x = r.require_f64(args.model.x, "x")?;
    let fn_spec = r.string(args.function.as_deref(), "fn", "gaussian:0,1")?;
    let p = parse_params(alpha, beta, b)?;
    let f = parse_payoff(&fn_spec)?;

    let g = match which.as_str() {
        "delta" => delta_shift(&f, t, x, &p, &be)?,
        "ibp" => ibp_shift(&f, t, x, &p, &be)?,
        "combined" => delta_combined(&f, t, x, &p, &be)?,
        "dbeta" => dbeta_shift(&f, t, x, &p, &be)?,
        other => return Err(CliError::usage(format!("unknown greek `{other}`"))),
    };
    greek_report("greek", &which, &g, r.resolved(), output);
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(args.model.config.as_deref())?;
    let which = r.string(args.which.as_deref(), "which", "exact")?;
    let alpha = r.require_f64(args.model.alpha, "alpha")?;
    let beta = r.f64(args.model.beta, "beta", 0.0)?;
    let b = r.require_f64(args.model.b, "b")?;
    let x = r.require_f64(args.model.x, "x")?;
    let t = r.require_f64(args.model.t, "t")?;
    let n = r.u64(args.n, "n", 10_000)?;
    let steps = r.u64(args.steps, "steps", 256)?;
    let seed = r.u64(args.seed, "seed", 0)?;
    let output = parse_output(&r.string(args.model.output.as_deref(), "output", "csv")?, false)?;
    let p = parse_params(alpha, beta, b)?;
    let resolved = r.resolved();

    match which.as_str() {
        "exact" => {
            let draws: Vec<f64> = (0..n)
                .map(|i| sample_exact(t, x, &p, &mut StreamKey::new(seed, i).rng()))
                .collect::<Result<_, _>>()?;
            match output {
                OutputKind::Json => emit_json(
                    "simulate",
                    resolved,
                    json!([{ "which": "exact", "samples": draws }]),
                    json!([]),
                ),
                _ => {
                    echo_config_stderr(&resolved);
                    println!("sample,value");
                    for (i, v) in draws.iter().enumerate() {
                        println!("{i},{}", fmt(*v));
                    }
                }
            }
        }
        "euler" => {
            let times = PathGrid::uniform_times(t, steps as usize);
            let mut rng = StreamKey::new(seed, 0).rng();
            let path = sample_path_euler(&times, x, &p, &mut rng)?;
            match output {
                OutputKind::Json => emit_json(
                    "simulate",
                    resolved,
                    json!([{ "which": "euler", "times": path.times, "values": path.values }]),
                    json!([]),
                ),
                _ => {
                    echo_config_stderr(&resolved);
                    println!("time,value");
                    for (time, value) in path.times.iter().zip(&path.values) {
                        println!("{},{}", fmt(*time), fmt(*value));
                    }
                }
            }
        }
        other => return Err(CliError::usage(format!("unknown simulate mode `{other}`"))),
    }
    Ok(())
}

fn run_gw(args: GwArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(args.model.config.as_deref())?;
    let replicas = r.u64(args.n, "n", 1_000)?;
    let n_scale = r.u64(args.steps, "steps", 1_000)?;
    let x0 = r.f64(args.model.x, "x", 1.0)?;
    let t = r.f64(args.model.t, "t", 1.0)?;
    let offspring_spec = r.string(args.function.as_deref(), "fn", "geom:0.5")?;
    let seed = r.u64(args.seed, "seed", 0)?;
    let exact_sum = r.flag(args.exact_sum, "exact_sum")?;
    let output = parse_output(&r.string(args.model.output.as_deref(), "output", "csv")?, false)?;

    let od = OffspringDist::from_str(&offspring_spec)?;
    let opts = GwOptions {
        per_individual_draws: exact_sum,
        ..GwOptions::default()
    };

    let mut values = Vec::with_capacity(replicas as usize);
    for i in 0..replicas {
        let mut rng = StreamKey::new(seed, i).rng();
        let path = galton_watson_path(n_scale, x0, &od, t, &opts, &mut rng)?;
        values.push(*path.last().expect("nonempty path") as f64 / n_scale as f64);
    }
    let mean = values.iter().sum::<f64>() / replicas as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (replicas.saturating_sub(1)).max(1) as f64;
    let std_error = (var / replicas as f64).sqrt();

    let resolved = r.resolved();
    match output {
        OutputKind::Json => emit_json(
            "gw",
            resolved,
            json!([{
                "offspring_mean": od.mean(),
                "offspring_variance": od.variance(),
                "ensemble_mean": mean,
                "std_error": std_error,
                "replicas": replicas,
                "values": values,
            }]),
            json!([]),
        ),
        _ => {
            echo_config_stderr(&resolved);
            eprintln!(
                "ensemble_mean: {} std_error: {}",
                fmt(mean),
                fmt(std_error)
            );
            println!("replica,value");
            for (i, v) in values.iter().enumerate() {
                println!("{i},{}", fmt(*v));
            }
        }
    }
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<bool, CliError> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let suite_name = r.string(args.suite.as_deref(), "suite", "all")?;
    let output = parse_output(&r.string(args.output.as_deref(), "output", "text")?, true)?;
    let suite = Suite::from_str(&suite_name).map_err(CliError::usage)?;

    let checks = run_suite(suite);
    let failed = checks.iter().filter(|c| !c.pass).count();

    match output {
        OutputKind::Json => emit_json(
            "verify",
            r.resolved(),
            json!([]),
            serde_json::to_value(&checks).expect("serializable checks"),
        ),
        OutputKind::Csv => {
            echo_config_stderr(&r.resolved());
            println!("name,target,achieved,pass");
            for c in &checks {
                println!("{},{},{},{}", c.name, c.target, fmt(c.achieved), c.pass);
            }
        }
        OutputKind::Text => {
            echo_config_stderr(&r.resolved());
            for c in &checks {
                println!(
                    "{:<34} target {:<10} achieved {:>12.3e}  {}",
                    c.name,
                    c.target,
                    c.achieved,
                    if c.pass { "PASS" } else { "FAIL" }
                );
            }
            println!("{} checks, {} failed", checks.len(), failed);
        }
    }
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Price(args) => run_price(args).map(|()| true),
        Command::Greek(args) => run_greek(args).map(|()| true),
        Command::Simulate(args) => run_simulate(args).map(|()| true),
        Command::Gw(args) => run_gw(args).map(|()| true),
        Command::Verify(args) => run_verify(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
