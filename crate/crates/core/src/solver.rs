//! Dual-based solver for the two constrained divergence-minimization
//! problems over the tilted bracket family, plus the scan over the order
//! that locates the divergence order matching a prescribed log-ratio level.
//!
//! Both problem kinds reduce to a one-dimensional concave dual in the tilt
//! parameter γ. The dual is only defined where the relevant partition
//! integrals converge, and the defined set can split into several intervals
//! when the reference density has interior zero regions. The solver scans a
//! γ-range, locates every maximal defined interval, maximizes the dual on
//! each, picks the interval maximum with the smallest dual value, and then
//! polishes γ against the mean constraint directly.

use rayon::prelude::*;

use crate::partition::{self, PartitionQuery};
use crate::quadrature::QuadOpts;
use crate::reference::ReferenceDistribution;
use crate::{Error, IntervalSet, Result};

/// Which mean constraint the problem imposes on the candidate density P.
///
/// `Classical` constrains `E_P[X] = m`; `Generalized` constrains the
/// α-escort mean of P. The two are linked by the order inversion
/// `α ↔ 1/α`, which this module exploits as a fallback route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Classical,
    Generalized,
}

impl ProblemKind {
    /// Single-letter tag used in labels and reports.
    pub fn letter(self) -> char {
        match self {
            ProblemKind::Classical => 'C',
            ProblemKind::Generalized => 'G',
        }
    }
}

/// A fully specified constrained minimization problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Divergence order; positive and ≠ 1.
    pub alpha: f64,
    /// Constrained mean value.
    pub m: f64,
    /// Reference density Q.
    pub reference: ReferenceDistribution,
}

impl ProblemSpec {
    pub fn new(
        kind: ProblemKind,
        alpha: f64,
        m: f64,
        reference: ReferenceDistribution,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                detail: format!("must be positive and finite, got {alpha}"),
            });
        }
        if (alpha - 1.0).abs() < 1e-12 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                detail: "the order must differ from 1; the α → 1 limit is the classical \
                         exponential-tilt problem"
                    .into(),
            });
        }
        if !m.is_finite() {
            return Err(Error::InvalidParameter {
                name: "m",
                detail: format!("constraint mean must be finite, got {m}"),
            });
        }
        Ok(ProblemSpec { kind, alpha, m, reference })
    }

    /// `ξ = 1/(α − 1)`, the exponent scale of the whole family.
    pub fn xi(&self) -> f64 {
        1.0 / (self.alpha - 1.0)
    }

    /// Bracket exponent of the solution density `P ∝ bracket^ν Q`.
    pub fn solution_exponent(&self) -> f64 {
        match self.kind {
            ProblemKind::Classical => self.xi(),
            ProblemKind::Generalized => -self.xi(),
        }
    }

    /// Bracket exponent inside the dual objective `−log Z_ν(γ, m)`.
    pub fn dual_exponent(&self) -> f64 {
        match self.kind {
            ProblemKind::Classical => self.xi() + 1.0,
            ProblemKind::Generalized => -self.xi(),
        }
    }

    /// Exponent of the partition value stored as `z_dual`; at the optimum it
    /// equals the solution partition value, which is the consistency check.
    pub fn dual_pair_exponent(&self) -> f64 {
        match self.kind {
            ProblemKind::Classical => self.xi() + 1.0,
            ProblemKind::Generalized => -(self.xi() + 1.0),
        }
    }

    /// Exponent whose classical mean expresses the constraint: the dual is
    /// stationary at γ exactly when `E_ν[X] = m` at this ν. For the
    /// generalized kind this is the α-escort of the solution exponent.
    pub fn constraint_exponent(&self) -> f64 {
        match self.kind {
            ProblemKind::Classical => self.xi(),
            ProblemKind::Generalized => -(self.xi() + 1.0),
        }
    }

    fn query(&self, nu: f64, gamma: f64) -> PartitionQuery<'_> {
        PartitionQuery { nu, gamma, x_bar: self.m, reference: &self.reference }
    }

    /// The two distinct exponents whose convergence defines a usable γ.
    /// Ordered with the dual objective first.
    fn definedness_exponents(&self) -> [f64; 2] {
        match self.kind {
            ProblemKind::Classical => [self.xi() + 1.0, self.xi()],
            ProblemKind::Generalized => [-self.xi(), -(self.xi() + 1.0)],
        }
    }
}

/// Classical-kind dual objective `−log Z_{ξ+1}(γ, m)`; `−∞` where the
/// integral diverges, the admissible domain is empty, or Z is not positive.
pub fn dual_c(spec: &ProblemSpec, gamma: f64) -> f64 {
    neg_log_z(spec, spec.xi() + 1.0, gamma)
}

/// Generalized-kind dual objective `−log Z_{−ξ}(γ, m)`; `−∞` sentinel as
/// for [`dual_c`].
pub fn dual_g(spec: &ProblemSpec, gamma: f64) -> f64 {
    neg_log_z(spec, -spec.xi(), gamma)
}

/// Dual objective matching `spec.kind`.
pub fn dual_value(spec: &ProblemSpec, gamma: f64) -> f64 {
    match spec.kind {
        ProblemKind::Classical => dual_c(spec, gamma),
        ProblemKind::Generalized => dual_g(spec, gamma),
    }
}

/// Companion multiplier `μ̃(γ) = −(ξ + 1)(1 − γ m)` of the classical dual.
pub fn mu_tilde(spec: &ProblemSpec, gamma: f64) -> f64 {
    -(spec.xi() + 1.0) * (1.0 - gamma * spec.m)
}

fn neg_log_z(spec: &ProblemSpec, nu: f64, gamma: f64) -> f64 {
    match partition::partition_value(&spec.query(nu, gamma)) {
        Ok(z) if z.converged && z.value > 0.0 => -z.value.ln(),
        _ => f64::NEG_INFINITY,
    }
}

/// Full definedness probe: every exponent the solve path needs must have a
/// convergent, positive partition value. Returns the dual value when defined.
fn probe(spec: &ProblemSpec, gamma: f64, opts: &QuadOpts) -> Option<f64> {
    let [nu_obj, nu_other] = spec.definedness_exponents();
    let z_obj = match partition::partition_value_opts(&spec.query(nu_obj, gamma), opts) {
        Ok(z) if z.converged && z.value > 0.0 => z.value,
        _ => return None,
    };
    match partition::partition_value_opts(&spec.query(nu_other, gamma), opts) {
        Ok(z) if z.converged && z.value > 0.0 => Some(-z_obj.ln()),
        _ => None,
    }
}

/// One refined interval maximum of the dual.
#[derive(Debug, Clone, Copy)]
pub struct DualMax {
    pub gamma: f64,
    pub value: f64,
}

/// Result of scanning the dual over a γ-range.
#[derive(Debug, Clone)]
pub struct DualScan {
    /// Grid points, uniformly spaced over the requested range.
    pub gammas: Vec<f64>,
    /// Dual values on the grid; `−∞` marks undefined points.
    pub values: Vec<f64>,
    /// Maximal intervals of definedness, boundaries refined by bisection.
    pub intervals: IntervalSet,
    /// One refined maximum per interval, in γ order.
    pub maxima: Vec<DualMax>,
    /// Index into `maxima` of the smallest interval maximum, which is the
    /// candidate global solution when several intervals exist.
    pub selected: usize,
}

/// Golden-section minimizer on `[a, b]`; assumes `f` unimodal and treats
/// non-finite values as very large. Returns the best probe point.
fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let key = |v: f64| if v.is_finite() { v } else { f64::MAX };
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * mid.abs().max(1.0)
            || c.partial_cmp(&d) != Some(std::cmp::Ordering::Less)
        {
            break;
        }
        if key(fc) <= key(fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    if key(fc) <= key(fd) {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisects the definedness boundary between a defined and an undefined γ to
/// relative width 1e-12, returning the defined-side estimate.
fn bisect_boundary(spec: &ProblemSpec, mut undef: f64, mut def: f64, opts: &QuadOpts) -> f64 {
    for _ in 0..200 {
        let scale = def.abs().max(undef.abs()).max(1.0);
        if (def - undef).abs() <= 1e-12 * scale {
            break;
        }
        let mid = 0.5 * (def + undef);
        if mid == def || mid == undef {
            break;
        }
        if probe(spec, mid, opts).is_some() {
            def = mid;
        } else {
            undef = mid;
        }
    }
    def
}

/// Scans the dual over `[gamma_lo, gamma_hi]` on an `n`-point grid (n ≥ 64),
/// refines the definedness boundaries and a maximum per defined interval,
/// and selects the smallest interval maximum.
pub fn scan_dual(spec: &ProblemSpec, gamma_lo: f64, gamma_hi: f64, n: usize) -> Result<DualScan> {
    if !(gamma_lo.is_finite() && gamma_hi.is_finite() && gamma_lo < gamma_hi) {
        return Err(Error::InvalidParameter {
            name: "gamma_range",
            detail: format!("need finite lo < hi, got [{gamma_lo}, {gamma_hi}]"),
        });
    }
    if n < 64 {
        return Err(Error::InvalidParameter {
            name: "n",
            detail: format!("scan needs at least 64 grid points, got {n}"),
        });
    }
    let opts = QuadOpts::precise();
    let step = (gamma_hi - gamma_lo) / (n - 1) as f64;
    let gammas: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { gamma_hi } else { gamma_lo + i as f64 * step })
        .collect();
    let values: Vec<f64> = gammas
        .par_iter()
        .map(|&g| probe(spec, g, &opts).unwrap_or(f64::NEG_INFINITY))
        .collect();

    // Maximal runs of defined grid points.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match (v.is_finite(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, n - 1));
    }
    if runs.is_empty() {
        return Err(Error::NoDefinedPoint { lo: gamma_lo, hi: gamma_hi });
    }

    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(runs.len());
    let mut maxima: Vec<DualMax> = Vec::with_capacity(runs.len());
    for &(i0, i1) in &runs {
        let lo = if i0 == 0 {
            gammas[0]
        } else {
            bisect_boundary(spec, gammas[i0 - 1], gammas[i0], &opts)
        };
        let hi = if i1 == n - 1 {
            gammas[n - 1]
        } else {
            bisect_boundary(spec, gammas[i1 + 1], gammas[i1], &opts)
        };
        pairs.push((lo, hi));

        // Maximizing −log Z is minimizing Z; undefined probes act as +∞.
        let zfun = |g: f64| match partition::partition_value(&spec.query(spec.dual_exponent(), g))
        {
            Ok(z) if z.converged && z.value > 0.0 => z.value,
            _ => f64::INFINITY,
        };
        let (g_max, z_min) = golden_min(&zfun, lo, hi, 1e-10);
        let mut gamma_max = g_max;
        let mut value = if z_min.is_finite() && z_min > 0.0 {
            -z_min.ln()
        } else {
            // The best probe still failed; fall back to the grid maximum.
            let (mut gb, mut vb) = (gammas[i0], values[i0]);
            for i in i0..=i1 {
                if values[i] > vb {
                    gb = gammas[i];
                    vb = values[i];
                }
            }
            maxima.push(DualMax { gamma: gb, value: vb });
            continue;
        };
        // An interior maximum coincides with the constraint stationary
        // point, whose residual has order-one slope where the dual is
        // nearly flat; rooting it reproduces γ far below the noise floor
        // of a direct search on the dual.
        if let Some(rs) = stationary_root(spec, gamma_max, lo, hi) {
            if rs.bracketed {
                let z = zfun(rs.best.0);
                if z.is_finite() && z > 0.0 {
                    gamma_max = rs.best.0;
                    value = -z.ln();
                }
            }
        }
        maxima.push(DualMax { gamma: gamma_max, value });
    }

    let selected = maxima
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.value.partial_cmp(&b.value).expect("finite dual maxima"))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let intervals = IntervalSet::from_pairs(&pairs)?;
    Ok(DualScan { gammas, values, intervals, maxima, selected })
}

/// Suggested symmetric γ-range for a reference: `±50 / width` for bounded
/// supports, `±50 / σ` otherwise (σ from quadrature moments).
pub fn default_gamma_range(reference: &ReferenceDistribution) -> Result<(f64, f64)> {
    let hull = reference.support().hull().ok_or(Error::EmptyDomain)?;
    let radius = if hull.lo.is_finite() && hull.hi.is_finite() {
        50.0 / (hull.hi - hull.lo)
    } else {
        let (_, sd) = reference.mean_std()?;
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::InvalidParameter {
                name: "reference",
                detail: format!("cannot derive a γ-range from σ = {sd}"),
            });
        }
        50.0 / sd
    };
    Ok((-radius, radius))
}

/// Which path produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveRoute {
    /// The problem's own dual was scanned and polished.
    Direct,
    /// The problem was rewritten through the order inversion `α ↔ 1/α`
    /// and solved as the opposite kind.
    ViaDuality,
}

/// A solved constrained minimization problem.
#[derive(Debug, Clone)]
pub struct TsallisSolution {
    pub spec: ProblemSpec,
    /// Optimal tilt.
    pub gamma_star: f64,
    /// Partition value at the solution exponent; the density normalizer.
    pub z_solution: f64,
    /// Partition value at the paired dual exponent; equals `z_solution` at
    /// a true optimum up to quadrature error.
    pub z_dual: f64,
    /// Divergence attained by the solution, `−log z_dual`.
    pub divergence: f64,
    /// Constraint mean actually achieved; within 1e-6 of `spec.m`.
    pub achieved_mean: f64,
    /// The normalized solution density.
    pub density: ReferenceDistribution,
    /// False when γ* sits against a definedness or range boundary.
    pub interior: bool,
    pub route: SolveRoute,
}

const SOLVE_SCAN_POINTS: usize = 512;
/// Absolute residual above which a candidate γ is rejected outright.
const RESIDUAL_ACCEPT: f64 = 1e-6;

/// Solves the problem over an explicit γ-range.
pub fn solve(spec: &ProblemSpec, gamma_lo: f64, gamma_hi: f64) -> Result<TsallisSolution> {
    match solve_direct(spec, gamma_lo, gamma_hi) {
        Ok(sol) => Ok(sol),
        Err(direct_err) => {
            if spec.kind == ProblemKind::Generalized && spec.alpha > 1.0 {
                // Above order 1 the generalized integrals can diverge where
                // the inverted-order classical ones do not; retry through
                // the duality and keep the direct error if that also fails.
                match solve_via_duality(spec, gamma_lo, gamma_hi) {
                    Ok(sol) => Ok(sol),
                    Err(_) => Err(direct_err),
                }
            } else {
                Err(direct_err)
            }
        }
    }
}

/// Solves over the [`default_gamma_range`] of the reference.
pub fn solve_with_default_range(spec: &ProblemSpec) -> Result<TsallisSolution> {
    let (lo, hi) = default_gamma_range(&spec.reference)?;
    solve(spec, lo, hi)
}

fn solve_direct(spec: &ProblemSpec, gamma_lo: f64, gamma_hi: f64) -> Result<TsallisSolution> {
    let scan = scan_dual(spec, gamma_lo, gamma_hi, SOLVE_SCAN_POINTS)?;

    // Try interval maxima from the smallest dual value up; the first one
    // that can actually meet the constraint wins.
    let mut order: Vec<usize> = (0..scan.maxima.len()).collect();
    order.sort_by(|&a, &b| {
        scan.maxima[a]
            .value
            .partial_cmp(&scan.maxima[b].value)
            .expect("finite dual maxima")
            .then(a.cmp(&b))
    });

    let mut closest: Option<f64> = None;
    for idx in order {
        let cand = scan.maxima[idx];
        let iv = scan
            .intervals
            .intervals()
            .iter()
            .find(|iv| iv.lo <= cand.gamma && cand.gamma <= iv.hi)
            .copied()
            .unwrap_or(crate::interval::Interval { lo: gamma_lo, hi: gamma_hi });
        match polish(spec, cand.gamma, iv.lo, iv.hi) {
            Ok((gamma_star, _)) => {
                let pad = 1e-8 * gamma_star.abs().max(1.0);
                let interior = gamma_star - iv.lo > pad
                    && iv.hi - gamma_star > pad
                    && gamma_star - gamma_lo > pad
                    && gamma_hi - gamma_star > pad;
                return build_solution(spec, gamma_star, interior, SolveRoute::Direct);
            }
            Err(cl) => {
                if let Some(c) = cl {
                    let better = match closest {
                        Some(prev) => (c - spec.m).abs() < (prev - spec.m).abs(),
                        None => true,
                    };
                    if better {
                        closest = Some(c);
                    }
                }
            }
        }
    }
    Err(Error::ConstraintUnattainable {
        requested: spec.m,
        closest: closest.unwrap_or(f64::NAN),
    })
}

fn solve_via_duality(spec: &ProblemSpec, gamma_lo: f64, gamma_hi: f64) -> Result<TsallisSolution> {
    let inverted = ProblemSpec::new(
        ProblemKind::Classical,
        1.0 / spec.alpha,
        spec.m,
        spec.reference.clone(),
    )?;
    let c_sol = solve_direct(&inverted, gamma_lo, gamma_hi)?;
    // Both kinds share the optimal tilt; only the exponents differ.
    let mut sol = build_solution(spec, c_sol.gamma_star, c_sol.interior, SolveRoute::ViaDuality)?;
    sol.interior = c_sol.interior;
    Ok(sol)
}

/// Signed constraint residual `E_ν[X](γ) − m` at the constraint exponent,
/// full precision; `None` where the mean is unavailable.
fn residual(spec: &ProblemSpec, gamma: f64) -> Option<f64> {
    partition::classical_mean(&spec.query(spec.constraint_exponent(), gamma))
        .ok()
        .map(|mean| mean - spec.m)
}

/// Outcome of a residual root hunt near a dual maximum.
struct RootSearch {
    /// Point with the smallest |residual| seen, as `(γ, residual)`.
    best: (f64, f64),
    /// Whether a sign change was found (an interior stationary point).
    bracketed: bool,
}

/// Hunts a zero of the constraint residual near `gamma0` inside
/// `[iv_lo, iv_hi]`. The residual has order-one slope where the dual is
/// nearly flat, so this pins an interior maximum far more tightly than any
/// direct search on the dual itself. Returns `None` when no point in reach
/// evaluates at all.
fn stationary_root(spec: &ProblemSpec, gamma0: f64, iv_lo: f64, iv_hi: f64) -> Option<RootSearch> {
    let tight = 1e-10 * spec.m.abs().max(1.0);

    // A golden-section maximum can sit close enough to a definedness edge
    // that the precise-tier mean fails there; nudge inward if needed.
    let (g0, r0) = {
        let mut found = None;
        if let Some(r) = residual(spec, gamma0) {
            found = Some((gamma0, r));
        } else {
            let scale = gamma0.abs().max(1.0);
            'nudge: for k in 1..=3 {
                let d = k as f64 * 1e-7 * scale;
                for g in [gamma0 + d, gamma0 - d] {
                    if g < iv_lo || g > iv_hi {
                        continue;
                    }
                    if let Some(r) = residual(spec, g) {
                        found = Some((g, r));
                        break 'nudge;
                    }
                }
            }
        }
        found?
    };
    if r0.abs() <= tight {
        return Some(RootSearch { best: (g0, r0), bracketed: true });
    }

    let mut best = (g0, r0);
    let track = |g: f64, r: f64, best: &mut (f64, f64)| {
        if r.abs() < best.1.abs() {
            *best = (g, r);
        }
    };

    // Expand a bracket around g0 until the residual changes sign.
    let scale = g0.abs().max(1.0);
    let mut lo = g0;
    let mut hi = g0;
    let mut r_lo = r0;
    let mut r_hi = r0;
    let mut lo_dead = false;
    let mut hi_dead = false;
    let mut step = 1e-6 * scale;
    let mut bracket: Option<(f64, f64, f64, f64)> = None;
    for _ in 0..48 {
        if !lo_dead {
            let cand = (g0 - (lo - g0).abs().max(step) * 4.0).max(iv_lo);
            if cand < lo {
                match residual(spec, cand) {
                    Some(r) => {
                        track(cand, r, &mut best);
                        if r.signum() != r_lo.signum() {
                            bracket = Some((cand, lo, r, r_lo));
                            break;
                        }
                        lo = cand;
                        r_lo = r;
                    }
                    None => lo_dead = true,
                }
            }
            if lo <= iv_lo {
                lo_dead = true;
            }
        }
        if !hi_dead {
            let cand = (g0 + (hi - g0).abs().max(step) * 4.0).min(iv_hi);
            if cand > hi {
                match residual(spec, cand) {
                    Some(r) => {
                        track(cand, r, &mut best);
                        if r.signum() != r_hi.signum() {
                            bracket = Some((hi, cand, r_hi, r));
                            break;
                        }
                        hi = cand;
                        r_hi = r;
                    }
                    None => hi_dead = true,
                }
            }
            if hi >= iv_hi {
                hi_dead = true;
            }
        }
        if r_lo.signum() != r_hi.signum() {
            bracket = Some((lo, hi, r_lo, r_hi));
            break;
        }
        if lo_dead && hi_dead {
            break;
        }
        step *= 4.0;
    }

    let (mut a, mut b, mut ra, _rb) = match bracket {
        Some(br) => br,
        None => return Some(RootSearch { best, bracketed: false }),
    };

    for _ in 0..120 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        match residual(spec, mid) {
            Some(r) => {
                track(mid, r, &mut best);
                if r.abs() <= tight {
                    break;
                }
                if r.signum() == ra.signum() {
                    a = mid;
                    ra = r;
                } else {
                    b = mid;
                }
            }
            // A dead point strictly inside a bracket is a quadrature
            // refusal, not a sign; stop with the best point seen.
            None => break,
        }
        if (b - a).abs() <= 1e-13 * mid.abs().max(1.0) {
            break;
        }
    }

    Some(RootSearch { best, bracketed: true })
}

/// Drives the constraint residual to zero near a dual maximum. On failure
/// returns the closest achieved mean, when any point evaluated at all.
fn polish(
    spec: &ProblemSpec,
    gamma0: f64,
    iv_lo: f64,
    iv_hi: f64,
) -> std::result::Result<(f64, f64), Option<f64>> {
    let rs = stationary_root(spec, gamma0, iv_lo, iv_hi).ok_or(None)?;
    if rs.best.1.abs() <= RESIDUAL_ACCEPT {
        Ok((rs.best.0, spec.m + rs.best.1))
    } else {
        Err(Some(spec.m + rs.best.1))
    }
}

fn build_solution(
    spec: &ProblemSpec,
    gamma_star: f64,
    interior: bool,
    route: SolveRoute,
) -> Result<TsallisSolution> {
    let nu = spec.solution_exponent();
    let z_solution = {
        let z = partition::partition_value(&spec.query(nu, gamma_star))?;
        if !z.converged {
            return Err(Error::NotConverged { abs_error: z.abs_error_estimate });
        }
        if z.value <= 0.0 {
            return Err(Error::ZeroNormalizer);
        }
        z.value
    };
    let z_dual = {
        let z = partition::partition_value(&spec.query(spec.dual_pair_exponent(), gamma_star))?;
        if !z.converged {
            return Err(Error::NotConverged { abs_error: z.abs_error_estimate });
        }
        if z.value <= 0.0 {
            return Err(Error::ZeroNormalizer);
        }
        z.value
    };
    let achieved_mean = partition::classical_mean(&spec.query(spec.constraint_exponent(), gamma_star))?;
    if (achieved_mean - spec.m).abs() > RESIDUAL_ACCEPT {
        return Err(Error::ConstraintUnattainable {
            requested: spec.m,
            closest: achieved_mean,
        });
    }
    let divergence = -z_dual.ln();

    let domain = partition::gamma_domain(gamma_star, spec.m, &spec.reference);
    let hull = domain.hull().ok_or(Error::EmptyDomain)?;
    let (rt0, rt1) = spec.reference.truncation();
    let t0 = if hull.lo.is_finite() { rt0.max(hull.lo) } else { rt0 };
    let t1 = if hull.hi.is_finite() { rt1.min(hull.hi) } else { rt1 };

    let e = partition::bracket_zero(gamma_star, spec.m);
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut singular: Vec<f64> = spec.reference.singular_points().to_vec();
    if nu < 0.0 {
        if let Some(e) = e {
            if domain.intervals().iter().any(|iv| near(e, iv.lo) || near(e, iv.hi)) {
                singular.push(e);
            }
        }
    }
    let label = format!(
        "solution[{},alpha={},m={}] of {}",
        spec.kind.letter(),
        spec.alpha,
        spec.m,
        spec.reference.label()
    );
    let reference = spec.reference.clone();
    let x_bar = spec.m;
    let gamma = gamma_star;
    let dens = move |x: f64| {
        let br = match e {
            Some(e) => gamma * (x - e),
            None => gamma.mul_add(x - x_bar, 1.0),
        };
        partition::bracket_pow(br, nu) * reference.density(x) / z_solution
    };
    let density = ReferenceDistribution::from_density(
        dens,
        domain,
        label,
        spec.reference.quadrature_hint().to_vec(),
        singular,
        (t0, t1),
    )?;

    Ok(TsallisSolution {
        spec: spec.clone(),
        gamma_star,
        z_solution,
        z_dual,
        divergence,
        achieved_mean,
        density,
        interior,
        route,
    })
}

/// Solution of the order-scan problem: the α in `[alpha_lo, alpha_hi] ⊆
/// [0, 1]` maximizing `α θ − log ∫ p1^α q^{1−α}`.
#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub alpha_star: f64,
    /// Objective value at the maximum.
    pub value: f64,
    /// Escort density of `(p1, q)` at `alpha_star`.
    pub escort: ReferenceDistribution,
    /// `E_escort[log(p1/q)] − θ`; near zero at an interior maximum.
    pub theta_residual: f64,
    /// True when the maximum sits on the α-range boundary, meaning the
    /// prescribed level θ is not matched by a stationary interior order.
    pub boundary: bool,
}

/// Log of the geometric cross-integral `∫ p1^α q^{1−α}` over the common
/// support (points where either density vanishes contribute zero).
fn log_cross_integral(
    p1: &ReferenceDistribution,
    q: &ReferenceDistribution,
    alpha: f64,
) -> Result<f64> {
    let v = crate::analysis::cross_integral(p1, q, alpha)?;
    if v <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    Ok(v.ln())
}

const THETA_TOL: f64 = 1e-10;

/// Finds the order whose escort of `(p1, q)` has log-ratio level θ, by
/// maximizing the concave objective `g(α) = α θ − log ∫ p1^α q^{1−α}` over
/// `[alpha_lo, alpha_hi] ⊆ [0, 1]`.
pub fn solve_theta(
    theta: f64,
    p1: &ReferenceDistribution,
    q: &ReferenceDistribution,
    alpha_lo: f64,
    alpha_hi: f64,
) -> Result<ThetaSolution> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "theta",
            detail: format!("must be finite, got {theta}"),
        });
    }
    if !(0.0..=1.0).contains(&alpha_lo) || !(0.0..=1.0).contains(&alpha_hi) || alpha_lo >= alpha_hi
    {
        return Err(Error::InvalidParameter {
            name: "alpha_range",
            detail: format!("need 0 ≤ lo < hi ≤ 1, got [{alpha_lo}, {alpha_hi}]"),
        });
    }

    let neg_g = |alpha: f64| match log_cross_integral(p1, q, alpha) {
        Ok(log_i) => log_i - alpha * theta,
        Err(_) => f64::INFINITY,
    };
    let (alpha_star, neg_best) = golden_min(neg_g, alpha_lo, alpha_hi, THETA_TOL);
    if !neg_best.is_finite() {
        return Err(Error::NotConverged { abs_error: f64::INFINITY });
    }

    let escort = crate::analysis::escort(p1, q, alpha_star)?;
    let level = crate::analysis::escort_log_ratio_mean(p1, q, alpha_star)?;
    let boundary = (alpha_star - alpha_lo).min(alpha_hi - alpha_star) <= 1e-7;
    Ok(ThetaSolution {
        alpha_star,
        value: -neg_best,
        escort,
        theta_residual: level - theta,
        boundary,
    })
}
