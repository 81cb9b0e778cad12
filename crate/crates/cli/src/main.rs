//! Command line front end: solve constrained problems, sweep the dual over
//! a tilt grid, run the verification suites, and emit plot-ready records.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, malformed reference
//! specs, out-of-range parameters), 2 computational failure (unattainable
//! constraints, undefined duals, non-convergent quadrature, failed checks).
//! Identical invocations produce byte-identical output: the solver and
//! quadrature are deterministic and randomized suites derive from --seed.

use std::env;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use renyi_maxent::analysis;
use renyi_maxent::partition::{self, PartitionQuery};
use renyi_maxent::reference::{self, Family, ReferenceDistribution};
use renyi_maxent::solver::{self, ProblemKind, ProblemSpec, SolveRoute};
use renyi_maxent::suites::{self, SuiteReport};
use renyi_maxent::thermo;
use renyi_maxent::Error as CoreError;

use renyi_maxent_cli::{canonical_json, csv_float};

const DENSITY_SAMPLES: usize = 512;
const COINCIDENT_PAIR_CAP: usize = 200;
const MEAN_COINCIDENCE_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "renyi-maxent",
    version,
    about = "Constrained Rényi/Tsallis maximum-entropy solver and verifier"
)]
struct Cli {
    /// Output format for record-producing commands (verify always prints text).
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for internal parallelism (sweep rows, oracle restarts).
    /// Falls back to RENYI_MAXENT_THREADS, then to all available cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Seed for the randomized verification suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    /// Classical mean constraint.
    #[value(name = "C", alias = "c")]
    C,
    /// Generalized (escort) mean constraint.
    #[value(name = "G", alias = "g")]
    G,
}

impl From<KindArg> for ProblemKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::C => ProblemKind::Classical,
            KindArg::G => ProblemKind::Generalized,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one constrained problem and emit the solution record.
    Solve(SolveArgs),
    /// Tabulate the dual objective and candidate means over a tilt grid.
    Sweep(SweepArgs),
    /// Run verification suites; exit 0 only if every case passes.
    Verify(VerifyArgs),
    /// Solve the order-inverted problem pair and report the duality gaps.
    Duality(DualityArgs),
    /// Solve a family over a mean grid and check the Legendre identities.
    Thermo(ThermoArgs),
    /// Divergences between two reference densities at one order.
    Divergence(DivergenceArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Reference density: uniform:lo,hi | exponential:rate |
    /// gaussian:mean,std | gamma:shape,rate, or @path to a tabulated file.
    #[arg(long = "ref", value_name = "SPEC")]
    reference: String,
    /// Entropy order (positive, not 1).
    #[arg(long)]
    alpha: f64,
    /// Constraint kind.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Constraint level.
    #[arg(long, allow_negative_numbers = true)]
    m: f64,
    /// Lower end of the tilt search range (default: automatic).
    #[arg(long, value_name = "G", allow_negative_numbers = true)]
    gamma_lo: Option<f64>,
    /// Upper end of the tilt search range (default: automatic).
    #[arg(long, value_name = "G", allow_negative_numbers = true)]
    gamma_hi: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Reference density spec (see solve).
    #[arg(long = "ref", value_name = "SPEC")]
    reference: String,
    /// Entropy order (positive, not 1).
    #[arg(long)]
    alpha: f64,
    /// Constraint kind (selects the dual objective and the mean column
    /// probed for non-injectivity).
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Constraint level entering the tilt bracket.
    #[arg(long, allow_negative_numbers = true)]
    m: f64,
    /// Lower end of the tilt grid.
    #[arg(long, value_name = "G", allow_negative_numbers = true)]
    gamma_lo: f64,
    /// Upper end of the tilt grid.
    #[arg(long, value_name = "G", allow_negative_numbers = true)]
    gamma_hi: f64,
    /// Grid points (at least 64).
    #[arg(long, default_value_t = 512)]
    n: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single suite instead of all of them.
    #[arg(long, value_name = "NAME")]
    suite: Option<String>,
    /// Narrow the duality suite to one order (requires --suite duality).
    #[arg(long)]
    alpha: Option<f64>,
    /// Narrow the duality suite to one constraint level.
    #[arg(long, allow_negative_numbers = true)]
    m: Option<f64>,
    /// Reference for the narrowed duality check (default uniform:0,1).
    #[arg(long = "ref", value_name = "SPEC")]
    reference: Option<String>,
}

#[derive(Args)]
struct DualityArgs {
    /// Reference density spec (see solve).
    #[arg(long = "ref", value_name = "SPEC", default_value = "uniform:0,1")]
    reference: String,
    /// Order of either problem in the pair; values below 1 name the
    /// classical order and are inverted for the generalized one.
    #[arg(long)]
    alpha: f64,
    /// Shared constraint level.
    #[arg(long, allow_negative_numbers = true)]
    m: f64,
}

#[derive(Args)]
struct ThermoArgs {
    /// Reference density spec (see solve).
    #[arg(long = "ref", value_name = "SPEC")]
    reference: String,
    /// Entropy order (positive, not 1).
    #[arg(long)]
    alpha: f64,
    /// Constraint kind.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Smallest constraint level of the family.
    #[arg(long, allow_negative_numbers = true)]
    m_lo: f64,
    /// Largest constraint level of the family.
    #[arg(long, allow_negative_numbers = true)]
    m_hi: f64,
    /// Family size (at least 5).
    #[arg(long, default_value_t = 9)]
    points: usize,
}

#[derive(Args)]
struct DivergenceArgs {
    /// First density (the measured one).
    #[arg(long = "ref", value_name = "SPEC")]
    reference: String,
    /// Second density (the reference it is measured against).
    #[arg(long = "ref2", value_name = "SPEC")]
    reference2: String,
    /// Divergence order (positive; 1 is reported through the KL field).
    #[arg(long)]
    alpha: f64,
}

enum CliError {
    Usage(String),
    Compute(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parameter and input-shape problems are usage errors; everything else a
/// computation can report (divergence, unattainable constraints, failed
/// convergence) is a computational failure.
fn to_cli(e: CoreError) -> CliError {
    match &e {
        CoreError::InvalidParameter { .. }
        | CoreError::Tabulated(_)
        | CoreError::NotNormalized { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Compute(e.to_string()),
    }
}

/// Any core error while ingesting a reference spec is the user's input.
fn ingest(e: CoreError) -> CliError {
    CliError::Usage(e.to_string())
}

struct Ctx {
    format: Format,
    out: Option<PathBuf>,
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits with 2 on parse errors by default; this tool
            // reserves 2 for computational failures, so remap to 1.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Err(e) = configure_threads(cli.threads) {
        return finish(Err(e));
    }

    let ctx = Ctx { format: cli.format, out: cli.out.clone(), seed: cli.seed };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(&ctx, args),
        Command::Sweep(args) => cmd_sweep(&ctx, args),
        Command::Verify(args) => cmd_verify(&ctx, args),
        Command::Duality(args) => cmd_duality(&ctx, args),
        Command::Thermo(args) => cmd_thermo(&ctx, args),
        Command::Divergence(args) => cmd_divergence(&ctx, args),
    };
    finish(result)
}

fn finish(result: Result<(), CliError>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match env::var("RENYI_MAXENT_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(s.trim().parse::<usize>().map_err(|_| {
                usage(format!("RENYI_MAXENT_THREADS must be a nonnegative integer, got `{s}`"))
            })?),
            _ => None,
        },
    };
    if let Some(n) = n {
        // 0 lets the pool pick the core count; a second initialization
        // (impossible in one process here) would be a no-op.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn parse_reference(spec: &str) -> Result<ReferenceDistribution, CliError> {
    if let Some(path) = spec.strip_prefix('@') {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read reference file `{path}`: {e}")))?;
        let rows = reference::parse_tabulated(&text).map_err(ingest)?;
        return reference::load_tabulated(&rows).map_err(ingest);
    }
    let (name, params) = spec.split_once(':').ok_or_else(|| {
        usage(format!("reference spec `{spec}` must be `family:params` or `@path`"))
    })?;
    let values = params
        .split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                usage(format!("reference parameter `{}` in `{spec}` is not a number", t.trim()))
            })
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let family = match (name.to_ascii_lowercase().as_str(), values.as_slice()) {
        ("uniform", [lo, hi]) => Family::Uniform { lo: *lo, hi: *hi },
        ("exponential", [rate]) => Family::Exponential { rate: *rate },
        ("gaussian" | "normal", [mean, std]) => Family::Gaussian { mean: *mean, std: *std },
        ("gamma", [shape, rate]) => Family::Gamma { shape: *shape, rate: *rate },
        _ => {
            return Err(usage(format!(
                "unknown reference spec `{spec}`; expected uniform:lo,hi, exponential:rate, \
                 gaussian:mean,std, gamma:shape,rate, or @path"
            )))
        }
    };
    reference::make_builtin(family).map_err(ingest)
}

/// Finite floats become JSON numbers; anything else becomes null.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_float).unwrap_or_default()
}

fn emit(ctx: &Ctx, text: &str) -> Result<(), CliError> {
    match &ctx.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| usage(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn route_name(route: SolveRoute) -> &'static str {
    match route {
        SolveRoute::Direct => "direct",
        SolveRoute::ViaDuality => "via-duality",
    }
}

// ---------------------------------------------------------------- solve --

fn cmd_solve(ctx: &Ctx, args: &SolveArgs) -> Result<(), CliError> {
    let reference = parse_reference(&args.reference)?;
    let spec = ProblemSpec::new(args.kind.into(), args.alpha, args.m, reference).map_err(to_cli)?;
    let sol = match (args.gamma_lo, args.gamma_hi) {
        (Some(lo), Some(hi)) => solver::solve(&spec, lo, hi).map_err(to_cli)?,
        (None, None) => solver::solve_with_default_range(&spec).map_err(to_cli)?,
        _ => return Err(usage("--gamma-lo and --gamma-hi must be given together")),
    };

    let lambda = thermo::lambda_of_solution(&sol);
    let (t0, t1) = sol.density.truncation();
    let step = (t1 - t0) / DENSITY_SAMPLES as f64;
    let samples: Vec<(f64, f64)> = (0..DENSITY_SAMPLES)
        .map(|i| {
            let x = t0 + (i as f64 + 0.5) * step;
            (x, sol.density.density(x))
        })
        .collect();

    let text = match ctx.format {
        Format::Json => {
            let sample_values: Vec<Value> =
                samples.iter().map(|&(x, p)| json!([num(x), num(p)])).collect();
            canonical_json(&json!({
                "achieved_mean": num(sol.achieved_mean),
                "alpha": num(sol.spec.alpha),
                "Z_dual": num(sol.z_dual),
                "Z_solution": num(sol.z_solution),
                "density_samples": sample_values,
                "divergence": num(sol.divergence),
                "gamma_star": num(sol.gamma_star),
                "interior": sol.interior,
                "kind": sol.spec.kind.letter().to_string(),
                "lambda": num(lambda),
                "m": num(sol.spec.m),
                "reference": sol.spec.reference.label(),
                "route": route_name(sol.route),
                "xi": num(sol.spec.xi()),
            }))
        }
        Format::Csv => {
            let mut text = String::new();
            text += "# command=solve\n";
            text += &format!("# reference={}\n", sol.spec.reference.label());
            text += &format!("# kind={}\n", sol.spec.kind.letter());
            text += &format!("# alpha={}\n", csv_float(sol.spec.alpha));
            text += &format!("# xi={}\n", csv_float(sol.spec.xi()));
            text += &format!("# m={}\n", csv_float(sol.spec.m));
            text += &format!("# gamma_star={}\n", csv_float(sol.gamma_star));
            text += &format!("# lambda={}\n", csv_float(lambda));
            text += &format!("# Z_solution={}\n", csv_float(sol.z_solution));
            text += &format!("# Z_dual={}\n", csv_float(sol.z_dual));
            text += &format!("# divergence={}\n", csv_float(sol.divergence));
            text += &format!("# achieved_mean={}\n", csv_float(sol.achieved_mean));
            text += &format!("# interior={}\n", sol.interior);
            text += &format!("# route={}\n", route_name(sol.route));
            text += "x,P\n";
            for (x, p) in &samples {
                text += &format!("{},{}\n", csv_float(*x), csv_float(*p));
            }
            text
        }
    };
    emit(ctx, &text)
}

// ---------------------------------------------------------------- sweep --

struct SweepRow {
    gamma: f64,
    dual: Option<f64>,
    mean_classical: Option<f64>,
    mean_generalized: Option<f64>,
}

fn cmd_sweep(ctx: &Ctx, args: &SweepArgs) -> Result<(), CliError> {
    if args.n < 64 {
        return Err(usage(format!("--n must be at least 64, got {}", args.n)));
    }
    let reference = parse_reference(&args.reference)?;
    let spec = ProblemSpec::new(args.kind.into(), args.alpha, args.m, reference).map_err(to_cli)?;
    let scan = solver::scan_dual(&spec, args.gamma_lo, args.gamma_hi, args.n).map_err(to_cli)?;

    let nu = spec.solution_exponent();
    let rows: Vec<SweepRow> = (0..scan.gammas.len())
        .into_par_iter()
        .map(|i| {
            let gamma = scan.gammas[i];
            let query =
                PartitionQuery { nu, gamma, x_bar: spec.m, reference: &spec.reference };
            SweepRow {
                gamma,
                dual: scan.values[i].is_finite().then_some(scan.values[i]),
                mean_classical: partition::classical_mean(&query).ok(),
                mean_generalized: partition::generalized_mean(&query, spec.alpha).ok(),
            }
        })
        .collect();

    // Non-injectivity probe on the constraint-relevant mean column: γ pairs
    // whose means coincide within tolerance, over rows where the dual is
    // defined and the mean converged.
    let mut keyed: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.dual.is_some())
        .filter_map(|r| {
            let mean = match spec.kind {
                ProblemKind::Classical => r.mean_classical,
                ProblemKind::Generalized => r.mean_generalized,
            };
            mean.map(|m| (m, r.gamma))
        })
        .collect();
    keyed.sort_by(|a, b| a.partial_cmp(b).expect("finite keys"));
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut pair_total: usize = 0;
    for i in 0..keyed.len() {
        let mut j = i + 1;
        while j < keyed.len() && keyed[j].0 - keyed[i].0 <= MEAN_COINCIDENCE_TOL {
            pair_total += 1;
            if pairs.len() < COINCIDENT_PAIR_CAP {
                let (a, b) = (keyed[i].1.min(keyed[j].1), keyed[i].1.max(keyed[j].1));
                pairs.push((a, b));
            }
            j += 1;
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite pairs"));

    let text = match ctx.format {
        Format::Json => {
            let row_values: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "Z": opt_num(r.dual.map(|d| (-d).exp())),
                        "defined": r.dual.is_some(),
                        "dual": opt_num(r.dual),
                        "gamma": num(r.gamma),
                        "mean_classical": opt_num(r.mean_classical),
                        "mean_generalized": opt_num(r.mean_generalized),
                    })
                })
                .collect();
            let intervals: Vec<Value> = scan
                .intervals
                .intervals()
                .iter()
                .map(|iv| json!([num(iv.lo), num(iv.hi)]))
                .collect();
            let maxima: Vec<Value> = scan
                .maxima
                .iter()
                .map(|mx| json!({"dual": num(mx.value), "gamma": num(mx.gamma)}))
                .collect();
            let pair_values: Vec<Value> =
                pairs.iter().map(|&(a, b)| json!([num(a), num(b)])).collect();
            canonical_json(&json!({
                "alpha": num(spec.alpha),
                "coincident_pairs": pair_values,
                "coincident_pairs_total": pair_total,
                "gamma_hi": num(args.gamma_hi),
                "gamma_lo": num(args.gamma_lo),
                "intervals": intervals,
                "kind": spec.kind.letter().to_string(),
                "m": num(spec.m),
                "maxima": maxima,
                "n": args.n,
                "non_injective": pair_total > 0,
                "reference": spec.reference.label(),
                "rows": row_values,
                "selected": scan.selected,
            }))
        }
        Format::Csv => {
            let mut text = String::new();
            text += "# command=sweep\n";
            text += &format!("# reference={}\n", spec.reference.label());
            text += &format!("# kind={}\n", spec.kind.letter());
            text += &format!("# alpha={}\n", csv_float(spec.alpha));
            text += &format!("# m={}\n", csv_float(spec.m));
            text += &format!("# gamma_lo={}\n", csv_float(args.gamma_lo));
            text += &format!("# gamma_hi={}\n", csv_float(args.gamma_hi));
            text += &format!("# n={}\n", args.n);
            text += "gamma,dual,Z,mean_classical,mean_generalized,defined\n";
            for r in &rows {
                text += &format!(
                    "{},{},{},{},{},{}\n",
                    csv_float(r.gamma),
                    csv_opt(r.dual),
                    csv_opt(r.dual.map(|d| (-d).exp()).filter(|z| z.is_finite())),
                    csv_opt(r.mean_classical),
                    csv_opt(r.mean_generalized),
                    r.dual.is_some()
                );
            }
            for (k, iv) in scan.intervals.intervals().iter().enumerate() {
                let mx = &scan.maxima[k];
                text += &format!(
                    "# interval {k}: [{}, {}] max at gamma={}, dual={}\n",
                    csv_float(iv.lo),
                    csv_float(iv.hi),
                    csv_float(mx.gamma),
                    csv_float(mx.value)
                );
            }
            text += &format!("# selected={}\n", scan.selected);
            text += &format!("# non_injective={}\n", pair_total > 0);
            text += &format!("# coincident_pairs_total={pair_total}\n");
            for (a, b) in &pairs {
                text += &format!("# coincident pair: gamma={}, gamma={}\n", csv_float(*a), csv_float(*b));
            }
            text
        }
    };
    emit(ctx, &text)
}

// --------------------------------------------------------------- verify --

fn cmd_verify(ctx: &Ctx, args: &VerifyArgs) -> Result<(), CliError> {
    let narrowed = args.alpha.is_some() || args.m.is_some() || args.reference.is_some();
    let reports: Vec<SuiteReport> = match &args.suite {
        Some(name) => {
            if !suites::SUITE_NAMES.contains(&name.as_str()) {
                return Err(usage(format!(
                    "unknown suite `{name}`; valid names: {}",
                    suites::SUITE_NAMES.join(", ")
                )));
            }
            if narrowed {
                if name != "duality" {
                    return Err(usage(
                        "--alpha, --m, and --ref narrowing applies only to --suite duality",
                    ));
                }
                let (Some(alpha), Some(m)) = (args.alpha, args.m) else {
                    return Err(usage("narrowed duality needs both --alpha and --m"));
                };
                let reference =
                    parse_reference(args.reference.as_deref().unwrap_or("uniform:0,1"))?;
                vec![suites::suite_duality_at(alpha, m, &reference).map_err(to_cli)?]
            } else {
                vec![suites::run_suite(name, ctx.seed).map_err(to_cli)?]
            }
        }
        None => {
            if narrowed {
                return Err(usage("--alpha, --m, and --ref require --suite duality"));
            }
            suites::SUITE_NAMES
                .iter()
                .map(|name| suites::run_suite(name, ctx.seed))
                .collect::<Result<Vec<_>, _>>()
                .map_err(to_cli)?
        }
    };

    let mut text = String::new();
    for report in &reports {
        let verdict = if report.pass() { "PASS" } else { "FAIL" };
        let detail = report
            .worst()
            .map(|c| {
                format!(
                    "worst residual {:.3e} against {:.1e} [{}]",
                    c.residual, c.tolerance, c.name
                )
            })
            .unwrap_or_else(|| "no cases".to_string());
        text += &format!("suite {}: {verdict} ({} cases, {detail})\n", report.name, report.cases.len());
        if !report.pass() {
            for case in report.cases.iter().filter(|c| !c.pass) {
                text += &format!(
                    "  case {}: residual {:.3e} exceeds {:.1e}\n",
                    case.name, case.residual, case.tolerance
                );
            }
        }
    }
    let first_fail = reports.iter().find(|r| !r.pass()).map(|r| r.name);
    match first_fail {
        None => text += &format!("verification: all {} suite(s) pass\n", reports.len()),
        Some(name) => text += &format!("verification: FAIL (first failing suite: {name})\n"),
    }
    emit(ctx, &text)?;
    match first_fail {
        None => Ok(()),
        Some(name) => Err(CliError::Compute(format!("suite {name} failed"))),
    }
}

// -------------------------------------------------------------- duality --

fn cmd_duality(ctx: &Ctx, args: &DualityArgs) -> Result<(), CliError> {
    let reference = parse_reference(&args.reference)?;
    let alpha_g = if args.alpha > 1.0 { args.alpha } else { 1.0 / args.alpha };
    let spec_g =
        ProblemSpec::new(ProblemKind::Generalized, alpha_g, args.m, reference.clone())
            .map_err(to_cli)?;
    let spec_c =
        ProblemSpec::new(ProblemKind::Classical, 1.0 / alpha_g, args.m, reference.clone())
            .map_err(to_cli)?;
    let sol_g = solver::solve_with_default_range(&spec_g).map_err(to_cli)?;
    let sol_c = solver::solve_with_default_range(&spec_c).map_err(to_cli)?;
    let report = analysis::check_duality(&sol_c, &sol_g).map_err(to_cli)?;

    let escort_gap = report.escort_gap_c_to_g.max(report.escort_gap_g_to_c);
    let pass =
        report.gamma_gap <= 1e-6 && escort_gap <= 1e-6 && report.divergence_gap <= 1e-8;

    let text = match ctx.format {
        Format::Json => canonical_json(&json!({
            "alpha_classical": num(sol_c.spec.alpha),
            "alpha_generalized": num(sol_g.spec.alpha),
            "divergence_classical": num(sol_c.divergence),
            "divergence_gap": num(report.divergence_gap),
            "divergence_generalized": num(sol_g.divergence),
            "escort_gap_c_to_g": num(report.escort_gap_c_to_g),
            "escort_gap_g_to_c": num(report.escort_gap_g_to_c),
            "gamma_gap": num(report.gamma_gap),
            "gamma_star_classical": num(sol_c.gamma_star),
            "gamma_star_generalized": num(sol_g.gamma_star),
            "m": num(args.m),
            "pass": pass,
            "reference": reference.label(),
            "tolerances": {
                "divergence_gap": num(1e-8),
                "escort_gap": num(1e-6),
                "gamma_gap": num(1e-6),
            },
        })),
        Format::Csv => {
            let mut text = String::new();
            text += "# command=duality\n";
            text += &format!("# reference={}\n", reference.label());
            text += "alpha_classical,alpha_generalized,m,gamma_star_classical,\
                     gamma_star_generalized,divergence_classical,divergence_generalized,\
                     gamma_gap,escort_gap_c_to_g,escort_gap_g_to_c,divergence_gap,pass\n";
            text += &format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                csv_float(sol_c.spec.alpha),
                csv_float(sol_g.spec.alpha),
                csv_float(args.m),
                csv_float(sol_c.gamma_star),
                csv_float(sol_g.gamma_star),
                csv_float(sol_c.divergence),
                csv_float(sol_g.divergence),
                csv_float(report.gamma_gap),
                csv_float(report.escort_gap_c_to_g),
                csv_float(report.escort_gap_g_to_c),
                csv_float(report.divergence_gap),
                pass
            );
            text
        }
    };
    emit(ctx, &text)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Compute(format!(
            "duality gaps exceed tolerances: gamma {:.3e}, escort {:.3e}, divergence {:.3e}",
            report.gamma_gap, escort_gap, report.divergence_gap
        )))
    }
}

// --------------------------------------------------------------- thermo --

fn cmd_thermo(ctx: &Ctx, args: &ThermoArgs) -> Result<(), CliError> {
    if args.points < 5 {
        return Err(usage(format!("--points must be at least 5, got {}", args.points)));
    }
    if !(args.m_lo.is_finite() && args.m_hi.is_finite() && args.m_lo < args.m_hi) {
        return Err(usage(format!(
            "need finite --m-lo < --m-hi, got [{}, {}]",
            args.m_lo, args.m_hi
        )));
    }
    let reference = parse_reference(&args.reference)?;
    let step = (args.m_hi - args.m_lo) / (args.points - 1) as f64;
    let means: Vec<f64> = (0..args.points)
        .map(|i| if i == args.points - 1 { args.m_hi } else { args.m_lo + i as f64 * step })
        .collect();
    let solutions =
        thermo::solve_family(args.kind.into(), args.alpha, &reference, &means).map_err(to_cli)?;
    let report = thermo::legendre_check(&solutions).map_err(to_cli)?;
    let pass = report.pass();

    let text = match ctx.format {
        Format::Json => {
            let rows: Vec<Value> = (0..solutions.len())
                .map(|i| {
                    json!({
                        "entropy": num(report.entropies[i]),
                        "gamma_star": num(solutions[i].gamma_star),
                        "lambda": num(report.lambdas[i]),
                        "m": num(means[i]),
                        "massieu": num(report.massieu[i]),
                        "xbar": num(report.xbars[i]),
                    })
                })
                .collect();
            canonical_json(&json!({
                "alpha": num(args.alpha),
                "kind": solutions[0].spec.kind.letter().to_string(),
                "lambda_all_positive": report.lambda_all_positive,
                "m_hi": num(args.m_hi),
                "m_lo": num(args.m_lo),
                "pass": pass,
                "points": args.points,
                "reference": reference.label(),
                "residual_dphi_dlam": num(report.residual_dphi_dlam),
                "residual_dphi_dx": num(report.residual_dphi_dx),
                "residual_ds_dx": num(report.residual_ds_dx),
                "residual_euler": num(report.residual_euler),
                "rows": rows,
                "tolerance": num(report.tolerance()),
                "triples": report.triples,
            }))
        }
        Format::Csv => {
            let mut text = String::new();
            text += "# command=thermo\n";
            text += &format!("# reference={}\n", reference.label());
            text += &format!("# kind={}\n", solutions[0].spec.kind.letter());
            text += &format!("# alpha={}\n", csv_float(args.alpha));
            text += "m,xbar,lambda,entropy,massieu,gamma_star\n";
            for i in 0..solutions.len() {
                text += &format!(
                    "{},{},{},{},{},{}\n",
                    csv_float(means[i]),
                    csv_float(report.xbars[i]),
                    csv_float(report.lambdas[i]),
                    csv_float(report.entropies[i]),
                    csv_float(report.massieu[i]),
                    csv_float(solutions[i].gamma_star)
                );
            }
            text += &format!("# residual_euler={}\n", csv_float(report.residual_euler));
            text += &format!("# residual_ds_dx={}\n", csv_float(report.residual_ds_dx));
            text += &format!("# residual_dphi_dlam={}\n", csv_float(report.residual_dphi_dlam));
            text += &format!("# residual_dphi_dx={}\n", csv_float(report.residual_dphi_dx));
            text += &format!("# triples={}\n", report.triples);
            text += &format!("# lambda_all_positive={}\n", report.lambda_all_positive);
            text += &format!("# tolerance={}\n", csv_float(report.tolerance()));
            text += &format!("# pass={pass}\n");
            text
        }
    };
    emit(ctx, &text)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Compute(format!(
            "Legendre residuals exceed {:.3e}: euler {:.3e}, dS/dx {:.3e}, dphi/dlambda {:.3e}, dphi/dx {:.3e}",
            report.tolerance(),
            report.residual_euler,
            report.residual_ds_dx,
            report.residual_dphi_dlam,
            report.residual_dphi_dx
        )))
    }
}

// ----------------------------------------------------------- divergence --

fn cmd_divergence(ctx: &Ctx, args: &DivergenceArgs) -> Result<(), CliError> {
    let p = parse_reference(&args.reference)?;
    let q = parse_reference(&args.reference2)?;
    let renyi = analysis::renyi_divergence(&p, &q, args.alpha).map_err(to_cli)?;
    let tsallis = analysis::tsallis_divergence(&p, &q, args.alpha).map_err(to_cli)?;
    let kl = analysis::kl_divergence(&p, &q).map_err(to_cli)?;

    let text = match ctx.format {
        Format::Json => canonical_json(&json!({
            "alpha": num(args.alpha),
            "kl": num(kl),
            "reference_p": p.label(),
            "reference_q": q.label(),
            "renyi": num(renyi),
            "tsallis": num(tsallis),
        })),
        Format::Csv => {
            let mut text = String::new();
            text += "# command=divergence\n";
            text += &format!("# reference_p={}\n", p.label());
            text += &format!("# reference_q={}\n", q.label());
            text += "alpha,renyi,tsallis,kl\n";
            text += &format!(
                "{},{},{},{}\n",
                csv_float(args.alpha),
                csv_float(renyi),
                csv_float(tsallis),
                csv_float(kl)
            );
            text
        }
    };
    emit(ctx, &text)
}
