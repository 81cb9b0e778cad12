//! Named end-to-end verification suites over the stock references, shared
//! by the command-line `verify` command and the acceptance tests. Each
//! suite checks one family of invariants and reports a residual and a
//! tolerance per case, so a failure names the exact quantity that broke.

use crate::analysis;
use crate::oracle::{self, GridProblem};
use crate::partition::{self, PartitionQuery};
use crate::reference::{builtin_references, make_builtin, Family, ReferenceDistribution};
use crate::solver::{self, ProblemKind, ProblemSpec, TsallisSolution};
use crate::thermo;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One checked quantity: how far it was off and how far it was allowed.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CaseResult {
    fn new(name: String, residual: f64, tolerance: f64) -> Self {
        let pass = residual.is_finite() && residual <= tolerance;
        CaseResult { name, residual, tolerance, pass }
    }
}

/// All cases of one suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: Vec<CaseResult>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        !self.cases.is_empty() && self.cases.iter().all(|c| c.pass)
    }

    /// Case with the largest residual-to-tolerance ratio.
    pub fn worst(&self) -> Option<&CaseResult> {
        self.cases.iter().max_by(|a, b| {
            let ra = a.residual / a.tolerance;
            let rb = b.residual / b.tolerance;
            ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Equal)
        })
    }
}

fn uniform01() -> ReferenceDistribution {
    make_builtin(Family::Uniform { lo: 0.0, hi: 1.0 }).expect("valid")
}

fn exponential1() -> ReferenceDistribution {
    make_builtin(Family::Exponential { rate: 1.0 }).expect("valid")
}

fn solve_case(
    kind: ProblemKind,
    alpha: f64,
    m: f64,
    reference: &ReferenceDistribution,
) -> Result<TsallisSolution> {
    let spec = ProblemSpec::new(kind, alpha, m, reference.clone())?;
    solver::solve_with_default_range(&spec)
}

/// Partition normalization: `Z_ν(0, x̄) = 1` for every reference and a
/// spread of exponents, plus the linear and quadratic closed forms on the
/// unit uniform reference.
pub fn suite_normalization() -> Result<SuiteReport> {
    let mut cases = Vec::new();
    for reference in builtin_references() {
        let (mean, _) = reference.mean_std()?;
        for nu in [-3.0, -1.0, 0.5, 1.0, 2.0] {
            let q = PartitionQuery { nu, gamma: 0.0, x_bar: mean, reference: &reference };
            let z = partition::partition_value(&q)?;
            cases.push(CaseResult::new(
                format!("Z_{{{nu}}}(0) = 1 on {}", reference.label()),
                (z.value - 1.0).abs(),
                1e-10,
            ));
        }
    }

    // With the bracket positive on all of [0, 1] the integrals reduce to
    // plain polynomial moments.
    let uniform = uniform01();
    for (gamma, x_bar) in [(0.6, 0.5), (-0.8, 0.3), (1.2, 0.7)] {
        let z1 = partition::partition_value(&PartitionQuery {
            nu: 1.0,
            gamma,
            x_bar,
            reference: &uniform,
        })?;
        let lin = 1.0 + gamma * (0.5 - x_bar);
        cases.push(CaseResult::new(
            format!("Z_1({gamma}, {x_bar}) closed form on {}", uniform.label()),
            (z1.value - lin).abs(),
            1e-9,
        ));
        let z2 = partition::partition_value(&PartitionQuery {
            nu: 2.0,
            gamma,
            x_bar,
            reference: &uniform,
        })?;
        let quad = 1.0
            + 2.0 * gamma * (0.5 - x_bar)
            + gamma * gamma * (1.0 / 3.0 - x_bar + x_bar * x_bar);
        cases.push(CaseResult::new(
            format!("Z_2({gamma}, {x_bar}) closed form on {}", uniform.label()),
            (z2.value - quad).abs(),
            1e-9,
        ));
    }
    Ok(SuiteReport { name: "normalization", cases })
}

/// Midpoint convexity of γ ↦ Z_ν(γ, x̄) for both solver exponents at each
/// order, on randomized well-separated γ pairs inside known-defined boxes.
pub fn suite_convexity(seed: u64) -> Result<SuiteReport> {
    let scenarios: [(ReferenceDistribution, (f64, f64), f64); 2] = [
        (uniform01(), (-1.8, 1.8), 0.5),
        (exponential1(), (0.05, 0.95), 1.0),
    ];
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for (reference, (glo, ghi), x_bar) in &scenarios {
        for alpha in [0.3, 0.5, 0.8] {
            let xi = 1.0 / (alpha - 1.0);
            for nu in [xi + 1.0, -xi] {
                stream += 1;
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(stream));
                let mut worst = 0.0f64;
                for _ in 0..100 {
                    let a = rng.gen_range(*glo..*ghi);
                    let mut b = rng.gen_range(*glo..*ghi);
                    // Degenerate pairs carry no convexity information.
                    while (a - b).abs() < 0.1 {
                        b = rng.gen_range(*glo..*ghi);
                    }
                    let value = |gamma: f64| -> Result<f64> {
                        let out = partition::partition_value(&PartitionQuery {
                            nu,
                            gamma,
                            x_bar: *x_bar,
                            reference,
                        })?;
                        if !out.converged {
                            return Err(Error::NotConverged { abs_error: out.abs_error_estimate });
                        }
                        Ok(out.value)
                    };
                    let za = value(a)?;
                    let zb = value(b)?;
                    let zm = value(0.5 * (a + b))?;
                    worst = worst.max(zm - 0.5 * (za + zb));
                }
                cases.push(CaseResult::new(
                    format!(
                        "midpoint convexity of Z_{{{nu:.4}}} on {} (α={alpha})",
                        reference.label()
                    ),
                    worst.max(0.0),
                    1e-9,
                ));
            }
        }
    }
    Ok(SuiteReport { name: "convexity", cases })
}

/// Every solved problem on the grid must yield a normalized density, meet
/// its constraint, and have a divergence that an independent integral of
/// the solved density reproduces.
pub fn suite_solutions() -> Result<SuiteReport> {
    let scenarios = [
        (uniform01(), [0.55, 0.6, 0.65]),
        (exponential1(), [0.6, 0.75, 0.9]),
    ];
    let mut cases = Vec::new();
    for (reference, ms) in &scenarios {
        for kind in [ProblemKind::Classical, ProblemKind::Generalized] {
            for alpha in [0.3, 0.5, 0.8] {
                for &m in ms {
                    let sol = solve_case(kind, alpha, m, reference)?;
                    let tag =
                        format!("{} α={alpha} m={m} on {}", kind.letter(), reference.label());
                    let mass = sol
                        .density
                        .integrate_over(&sol.density.quadrature_domain(), |_| 1.0)?;
                    cases.push(CaseResult::new(
                        format!("{tag}: normalization"),
                        (mass - 1.0).abs(),
                        1e-8,
                    ));
                    cases.push(CaseResult::new(
                        format!("{tag}: constraint residual"),
                        (sol.achieved_mean - m).abs(),
                        1e-6,
                    ));
                    let d = analysis::renyi_divergence(&sol.density, reference, alpha)?;
                    cases.push(CaseResult::new(
                        format!("{tag}: divergence matches −log Z_dual"),
                        (d - sol.divergence).abs(),
                        1e-8,
                    ));
                }
            }
        }
    }
    Ok(SuiteReport { name: "solutions", cases })
}

const ORACLE_CASES: [(ProblemKind, f64, f64); 8] = [
    (ProblemKind::Classical, 0.3, 0.55),
    (ProblemKind::Classical, 0.5, 0.6),
    (ProblemKind::Classical, 0.5, 0.7),
    (ProblemKind::Classical, 2.0, 0.6),
    (ProblemKind::Generalized, 0.5, 0.7),
    (ProblemKind::Generalized, 0.8, 0.65),
    (ProblemKind::Generalized, 2.0, 0.6),
    (ProblemKind::Generalized, 4.0, 0.55),
];

/// Simpson cell masses of a density over an equal-cell grid on `[lo, hi]`.
fn cell_masses(density: &ReferenceDistribution, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n)
        .map(|i| {
            let a = lo + i as f64 * h;
            let c = a + 0.5 * h;
            let b = a + h;
            (h / 6.0) * (density.density(a) + 4.0 * density.density(c) + density.density(b))
        })
        .collect()
}

/// The simplex oracle must corroborate the solver: divergences within
/// 1e−3, the oracle never materially below the continuous optimum, and
/// total-variation agreement of the optimizers on a 1000-cell grid.
pub fn suite_oracle(seed: u64) -> Result<SuiteReport> {
    let reference = uniform01();
    let n = 1000;
    let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let q = vec![1.0 / n as f64; n];
    let mut cases = Vec::new();
    for (kind, alpha, m) in ORACLE_CASES {
        let sol = solve_case(kind, alpha, m, &reference)?;
        let gp = GridProblem::new(nodes.clone(), q.clone(), alpha, m, kind)?;
        let osol = oracle::oracle_solve(&gp, seed)?;
        let tag = format!("{} α={alpha} m={m}", kind.letter());
        cases.push(CaseResult::new(
            format!("{tag}: |oracle − solver| divergence"),
            (osol.divergence - sol.divergence).abs(),
            1e-3,
        ));
        cases.push(CaseResult::new(
            format!("{tag}: oracle not below continuous optimum"),
            (sol.divergence - osol.divergence).max(0.0),
            1e-3,
        ));
        let masses = cell_masses(&sol.density, 0.0, 1.0, n);
        let tv = 0.5
            * osol
                .weights
                .iter()
                .zip(&masses)
                .map(|(w, c)| (w - c).abs())
                .sum::<f64>();
        cases.push(CaseResult::new(format!("{tag}: total variation"), tv, 1e-2));
    }
    Ok(SuiteReport { name: "oracle", cases })
}

fn push_duality_cases(
    cases: &mut Vec<CaseResult>,
    reference: &ReferenceDistribution,
    alpha_g: f64,
    m: f64,
) -> Result<()> {
    let g = solve_case(ProblemKind::Generalized, alpha_g, m, reference)?;
    let c = solve_case(ProblemKind::Classical, 1.0 / alpha_g, m, reference)?;
    let rep = analysis::check_duality(&c, &g)?;
    let tag = format!("α={alpha_g} m={m}");
    cases.push(CaseResult::new(format!("{tag}: tilt agreement"), rep.gamma_gap, 1e-6));
    cases.push(CaseResult::new(
        format!("{tag}: escort cross-relations"),
        rep.escort_gap_c_to_g.max(rep.escort_gap_g_to_c),
        1e-6,
    ));
    cases.push(CaseResult::new(
        format!("{tag}: divergence equality"),
        rep.divergence_gap,
        1e-8,
    ));
    Ok(())
}

/// Order inversion α ↔ 1/α: the two kinds must share the tilt, map onto
/// each other under the escort transform, and agree in divergence.
pub fn suite_duality() -> Result<SuiteReport> {
    let reference = uniform01();
    let mut cases = Vec::new();
    for alpha1 in [1.5, 2.0, 4.0] {
        for m in [0.55, 0.6, 0.65] {
            push_duality_cases(&mut cases, &reference, alpha1, m)?;
        }
    }
    Ok(SuiteReport { name: "duality", cases })
}

/// The duality check at one (α, m) pair on a chosen reference; α below 1
/// names the classical order and is inverted. Backs the command line's
/// narrowed `verify --suite duality`.
pub fn suite_duality_at(
    alpha: f64,
    m: f64,
    reference: &ReferenceDistribution,
) -> Result<SuiteReport> {
    let alpha_g = if alpha > 1.0 { alpha } else { 1.0 / alpha };
    let mut cases = Vec::new();
    push_duality_cases(&mut cases, reference, alpha_g, m)?;
    Ok(SuiteReport { name: "duality", cases })
}

/// Legendre identities along solution families for both kinds on a bounded
/// and an unbounded reference.
pub fn suite_legendre() -> Result<SuiteReport> {
    let grid = |start: f64, step: f64| -> Vec<f64> {
        (0..9).map(|k| start + step * k as f64).collect()
    };
    // The generalized multiplier curves are steeper, so those families use
    // tighter spacing to keep the central-difference truncation in budget.
    // Exponential families sweep means below the reference mean: upward
    // tilts of exp(1) cap out barely above 1 before the partition diverges.
    let scenarios = [
        (uniform01(), ProblemKind::Classical, grid(0.55, 0.0075)),
        (uniform01(), ProblemKind::Generalized, grid(0.55, 0.005)),
        (exponential1(), ProblemKind::Classical, grid(0.80, 0.0125)),
        (exponential1(), ProblemKind::Generalized, grid(0.90, 0.005)),
    ];
    let mut cases = Vec::new();
    for (reference, kind, ms) in &scenarios {
        let sols = thermo::solve_family(*kind, 0.5, reference, ms)?;
        let report = thermo::legendre_check(&sols)?;
        let tol = report.tolerance();
        let tag = format!("{} α=0.5 on {}", kind.letter(), reference.label());
        cases.push(CaseResult::new(
            format!("{tag}: dS/dλ = λ·dx̄/dλ"),
            report.residual_euler,
            tol,
        ));
        cases.push(CaseResult::new(
            format!("{tag}: dS/dx̄ = λ"),
            report.residual_ds_dx,
            tol,
        ));
        cases.push(CaseResult::new(
            format!("{tag}: dφ/dλ = −x̄"),
            report.residual_dphi_dlam,
            tol,
        ));
        cases.push(CaseResult::new(
            format!("{tag}: dφ/dx̄ = −x̄·dλ/dx̄"),
            report.residual_dphi_dx,
            tol,
        ));
    }
    Ok(SuiteReport { name: "legendre", cases })
}

/// Mean of the exponentially tilted unit uniform density, `ψ'(θ)`,
/// evaluated through a series near zero where the closed form cancels.
fn uniform_tilt_mean(theta: f64) -> f64 {
    if theta.abs() < 1e-2 {
        0.5 + theta / 12.0 - theta.powi(3) / 720.0 + theta.powi(5) / 30240.0
    } else {
        1.0 / (1.0 - (-theta).exp()) - 1.0 / theta
    }
}

/// Variance of the tilted unit uniform density, `ψ''(θ)`.
fn uniform_tilt_var(theta: f64) -> f64 {
    if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        1.0 / 12.0 - t2 / 240.0 + t2 * t2 / 6048.0
    } else {
        let s = 2.0 * (0.5 * theta).sinh();
        1.0 / (theta * theta) - 1.0 / (s * s)
    }
}

/// Tilt parameter of the classical MaxEnt density `e^{θx}/Z` on `[0, 1]`
/// with mean `m`, by Newton on the log-partition derivative.
fn solve_uniform_tilt(m: f64) -> f64 {
    let mut theta = 12.0 * (m - 0.5);
    for _ in 0..80 {
        let r = uniform_tilt_mean(theta) - m;
        if r.abs() < 1e-14 {
            break;
        }
        theta -= r / uniform_tilt_var(theta);
    }
    theta
}

fn uniform_tilt_density(theta: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    if theta.abs() < 1e-8 {
        1.0 + theta * (x - 0.5)
    } else {
        theta * (theta * x).exp() / (theta.exp() - 1.0)
    }
}

/// Behavior at the classical edge of the order range: the divergence tends
/// to KL as α → 1, and the near-1 classical solution is the exponential
/// tilt that Newton on the reference log-partition produces independently.
pub fn suite_classical_limit() -> Result<SuiteReport> {
    let mut cases = Vec::new();
    let pairs = [
        (
            make_builtin(Family::Gaussian { mean: 0.0, std: 1.0 })?,
            make_builtin(Family::Gaussian { mean: 0.5, std: 1.0 })?,
        ),
        (
            make_builtin(Family::Uniform { lo: 0.0, hi: 0.5 })?,
            uniform01(),
        ),
    ];
    for (p, q) in &pairs {
        let kl = analysis::kl_divergence(p, q)?;
        for alpha in [0.9999, 1.0001] {
            let d = analysis::renyi_divergence(p, q, alpha)?;
            cases.push(CaseResult::new(
                format!("D_{alpha}({} || {}) ≈ KL", p.label(), q.label()),
                (d - kl).abs(),
                1e-3,
            ));
        }
    }

    let reference = uniform01();
    for m in [0.4, 0.6] {
        let sol = solve_case(ProblemKind::Classical, 0.999, m, &reference)?;
        let theta = solve_uniform_tilt(m);
        let mut sup = 0.0f64;
        for i in 0..512 {
            let x = (i as f64 + 0.5) / 512.0;
            sup = sup.max((sol.density.density(x) - uniform_tilt_density(theta, x)).abs());
        }
        cases.push(CaseResult::new(
            format!("near-1 solution vs Newton tilt, m={m}"),
            sup,
            1e-2,
        ));
    }
    Ok(SuiteReport { name: "classical-limit", cases })
}

/// Randomized order-scan problems: the returned escort must sit at the
/// prescribed log-ratio level, away from the range boundary, and the
/// escort transform must invert cleanly.
pub fn suite_theta(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p1 = make_builtin(Family::Gaussian { mean: 0.0, std: 1.0 })?;
    let mut cases = Vec::new();
    for k in 0..5 {
        let mu2 = rng.gen_range(0.3..0.7);
        let q = make_builtin(Family::Gaussian { mean: mu2, std: 1.0 })?;
        // Levels chosen so the stationary order is interior for equal-width
        // normal pairs: α* = θ/μ₂² + 1/2.
        let theta = rng.gen_range(-0.29..0.29) * mu2 * mu2;
        let ts = solver::solve_theta(theta, &p1, &q, 0.01, 0.99)?;
        let residual = if ts.boundary { f64::INFINITY } else { ts.theta_residual.abs() };
        cases.push(CaseResult::new(
            format!("case {k}: interior level constraint (θ={theta:.4})"),
            residual,
            1e-6,
        ));
        let back = analysis::escort(&ts.escort, &q, 1.0 / ts.alpha_star)?;
        cases.push(CaseResult::new(
            format!("case {k}: escort involution"),
            analysis::grid_sup_gap(&back, &p1),
            1e-8,
        ));
    }
    Ok(SuiteReport { name: "theta", cases })
}

/// The suite names `run_suite` accepts, in default execution order.
pub const SUITE_NAMES: [&str; 8] = [
    "normalization",
    "convexity",
    "solutions",
    "oracle",
    "duality",
    "legendre",
    "classical-limit",
    "theta",
];

/// Runs one suite by name. The seed feeds the randomized suites; the
/// deterministic ones ignore it.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    match name {
        "normalization" => suite_normalization(),
        "convexity" => suite_convexity(seed),
        "solutions" => suite_solutions(),
        "oracle" => suite_oracle(seed),
        "duality" => suite_duality(),
        "legendre" => suite_legendre(),
        "classical-limit" => suite_classical_limit(),
        "theta" => suite_theta(seed),
        other => Err(Error::InvalidParameter {
            name: "suite",
            detail: format!("unknown suite '{other}'; valid: {}", SUITE_NAMES.join(", ")),
        }),
    }
}
