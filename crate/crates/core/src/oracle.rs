//! Brute-force verification on a grid: minimize the discrete divergence
//! directly over the probability simplex, subject to the plain or escort
//! mean constraint, without ever touching the closed-form tilt family the
//! solver is built on. Slow on purpose; its only job is to certify the
//! solver from the outside.
//!
//! The iteration is projected mirror descent with multiplicative updates,
//! so iterates stay strictly interior where `p^α` is smooth. Each step
//! multiplies the weights by `exp(−η(∇D + μ∇c))`, where the inner scalar μ
//! is found by bisection so the shifted mean matches the constraint again;
//! a step that fails to bracket the constraint or worsens the objective is
//! retried with a halved step. Fixed points of that map are exactly the
//! KKT points of the constrained problem, for any step size, so accuracy
//! is limited by iteration count rather than by a step-size schedule.

use crate::reference::ReferenceDistribution;
use crate::solver::ProblemKind;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Smallest grid accepted; below this the discretization error would rival
/// the tolerances the oracle is meant to certify.
const MIN_NODES: usize = 200;
/// Outer iteration budget per restart.
const MAX_ITERS: usize = 100_000;
/// Number of random interior starting points.
const RESTARTS: usize = 8;
/// A restart counts as feasible when its final constraint residual is
/// within this bound.
const RESIDUAL_TOL: f64 = 1e-6;
/// Seed stride between restarts (the usual 64-bit golden-ratio step).
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
/// Exponent clamp inside the multiplicative update, applied after
/// centering; bounds how far a single step can demote any node.
const STEP_CLAMP: f64 = 60.0;
/// Clamp on the log of the likelihood-ratio power `(p/q)^(α−1)`, keeping
/// gradients finite when a node starves.
const RATIO_CLAMP: f64 = 250.0;
/// Consecutive stalled iterations (no measurable objective progress)
/// before a restart declares convergence.
const STALL_EXIT: usize = 30;

/// A discretized constrained-divergence problem on the simplex.
#[derive(Debug, Clone)]
pub struct GridProblem {
    /// Strictly ascending grid points.
    pub nodes: Vec<f64>,
    /// Reference weights on the nodes, nonnegative, summing to 1.
    pub q_weights: Vec<f64>,
    /// Divergence order.
    pub alpha: f64,
    /// Constrained mean (plain or escort, per `kind`).
    pub m: f64,
    pub kind: ProblemKind,
}

impl GridProblem {
    pub fn new(
        nodes: Vec<f64>,
        q_weights: Vec<f64>,
        alpha: f64,
        m: f64,
        kind: ProblemKind,
    ) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::InvalidParameter {
                name: "nodes",
                detail: format!("need at least {MIN_NODES} grid points, got {}", nodes.len()),
            });
        }
        if nodes.len() != q_weights.len() {
            return Err(Error::InvalidParameter {
                name: "q_weights",
                detail: format!(
                    "length {} does not match {} nodes",
                    q_weights.len(),
                    nodes.len()
                ),
            });
        }
        if nodes.iter().any(|x| !x.is_finite())
            || nodes.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter {
                name: "nodes",
                detail: "grid points must be finite and strictly ascending".into(),
            });
        }
        if q_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter {
                name: "q_weights",
                detail: "weights must be finite and nonnegative".into(),
            });
        }
        let total: f64 = q_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { integral: total, tol: 1e-12 });
        }
        if !(alpha.is_finite() && alpha > 0.0) || (alpha - 1.0).abs() < 1e-12 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                detail: format!("order must be positive, finite, and away from 1, got {alpha}"),
            });
        }
        // The constraint must be attainable by some simplex point carried
        // by the positive-weight nodes; means at or beyond the extreme
        // carried nodes are not.
        let lo = nodes
            .iter()
            .zip(&q_weights)
            .find(|(_, w)| **w > 0.0)
            .map(|(x, _)| *x);
        let hi = nodes
            .iter()
            .zip(&q_weights)
            .rev()
            .find(|(_, w)| **w > 0.0)
            .map(|(x, _)| *x);
        match (lo, hi) {
            (Some(lo), Some(hi)) if m.is_finite() && lo < m && m < hi => {}
            _ => {
                return Err(Error::Infeasible(format!(
                    "constraint mean {m} is not strictly inside the carried grid range"
                )))
            }
        }
        Ok(GridProblem { nodes, q_weights, alpha, m, kind })
    }
}

/// Discretizes a reference density onto `n` equal cells of `[lo, hi]`:
/// nodes at cell centers, weights from a per-cell Simpson rule, normalized
/// so truncated tail mass is folded back in.
pub fn discretize_reference(
    reference: &ReferenceDistribution,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParameter {
            name: "window",
            detail: format!("need finite lo < hi, got [{lo}, {hi}]"),
        });
    }
    if n < MIN_NODES {
        return Err(Error::InvalidParameter {
            name: "n",
            detail: format!("need at least {MIN_NODES} cells, got {n}"),
        });
    }
    let h = (hi - lo) / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let a = lo + i as f64 * h;
        let c = a + 0.5 * h;
        let b = a + h;
        nodes.push(c);
        let mass = h / 6.0
            * (reference.density(a) + 4.0 * reference.density(c) + reference.density(b));
        weights.push(mass.max(0.0));
    }
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::EmptyDomain);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// Best point found across restarts, with enough bookkeeping to judge
/// whether the restarts corroborate each other.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Optimal weights on the full grid (zero where the reference carries
    /// no weight).
    pub weights: Vec<f64>,
    /// Discrete divergence at the optimum.
    pub divergence: f64,
    /// Constraint functional evaluated at the returned weights.
    pub achieved_mean: f64,
    /// Outer iterations the winning restart used.
    pub iterations: usize,
    /// How many restarts ended feasible.
    pub feasible_restarts: usize,
    /// Spread (max − min) of the feasible restarts' divergences; small
    /// spread on a convex instance is corroboration, large spread on a
    /// nonconvex one is expected.
    pub restart_spread: f64,
}

struct Active {
    x: Vec<f64>,
    ln_q: Vec<f64>,
    index: Vec<usize>,
    alpha: f64,
    m: f64,
    kind: ProblemKind,
    span: f64,
}

struct State {
    ln_p: Vec<f64>,
    p: Vec<f64>,
    /// (p_i/q_i)^(α−1), the likelihood-ratio power driving both the
    /// objective gradient and the escort weights.
    w: Vec<f64>,
    /// Σ p_i (p_i/q_i)^(α−1), the discrete cross-sum.
    cross: f64,
    escort_mean: f64,
    plain_mean: f64,
}

impl Active {
    fn refresh(&self, s: &mut State) {
        let n = self.x.len();
        let mut cross = 0.0;
        let mut plain = 0.0;
        for i in 0..n {
            let t = ((self.alpha - 1.0) * (s.ln_p[i] - self.ln_q[i]))
                .clamp(-RATIO_CLAMP, RATIO_CLAMP);
            s.w[i] = t.exp();
            cross += s.p[i] * s.w[i];
            plain += s.p[i] * self.x[i];
        }
        let mut escort = 0.0;
        for i in 0..n {
            escort += self.x[i] * s.p[i] * s.w[i];
        }
        s.cross = cross;
        s.plain_mean = plain;
        s.escort_mean = escort / cross;
    }

    fn divergence(&self, s: &State) -> f64 {
        s.cross.ln() / (self.alpha - 1.0)
    }

    fn constraint(&self, s: &State) -> f64 {
        match self.kind {
            ProblemKind::Classical => s.plain_mean - self.m,
            ProblemKind::Generalized => s.escort_mean - self.m,
        }
    }

    /// Gradient of the divergence in the unnormalized coordinates; the
    /// normalization constant is absorbed by the simplex projection.
    fn objective_gradient(&self, s: &State, out: &mut [f64]) {
        let scale = self.alpha / ((self.alpha - 1.0) * s.cross);
        for (o, w) in out.iter_mut().zip(&s.w) {
            *o = scale * w;
        }
    }

    /// Gradient of the constraint functional at the current point.
    fn constraint_gradient(&self, s: &State, out: &mut [f64]) {
        match self.kind {
            ProblemKind::Classical => {
                for (o, x) in out.iter_mut().zip(&self.x) {
                    *o = x - self.m;
                }
            }
            ProblemKind::Generalized => {
                let scale = self.alpha / s.cross;
                for ((o, w), x) in out.iter_mut().zip(&s.w).zip(&self.x) {
                    *o = scale * w * (x - s.escort_mean);
                }
            }
        }
    }
}

/// Renormalizes `ln_p` in place (log-sum-exp) and fills `p`.
fn normalize(ln_p: &mut [f64], p: &mut [f64]) {
    let max = ln_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in ln_p.iter_mut() {
        *v = (*v - max).max(-STEP_CLAMP - 700.0);
        sum += v.exp();
    }
    let ln_sum = sum.ln();
    for (v, pi) in ln_p.iter_mut().zip(p.iter_mut()) {
        *v -= ln_sum;
        *pi = v.exp();
    }
}

struct RestartOutcome {
    ln_p: Vec<f64>,
    divergence: f64,
    residual: f64,
    achieved: f64,
    iterations: usize,
}

/// Finds μ with the constraint restored after the step
/// `ln p − η (d + μ g)`, writing the accepted state into `trial`/`p_buf`.
/// The constraint value is monotone in μ near the current point; the
/// bracket grows geometrically from the warm start. Returns false when no
/// bracket exists at this step size.
fn restore_constraint(
    active: &Active,
    s: &State,
    d: &[f64],
    g: &[f64],
    eta: f64,
    mu_warm: &mut f64,
    trial: &mut State,
) -> bool {
    let n = active.x.len();
    let ctol = 1e-11 * active.span.max(1.0);
    let eval = |mu: f64, t: &mut State| -> f64 {
        for i in 0..n {
            let step = (-eta * (d[i] + mu * g[i])).clamp(-STEP_CLAMP, STEP_CLAMP);
            t.ln_p[i] = s.ln_p[i] + step;
        }
        normalize(&mut t.ln_p, &mut t.p);
        active.refresh(t);
        active.constraint(t)
    };

    let mut a = *mu_warm;
    let mut ca = eval(a, trial);
    if ca.abs() <= ctol {
        *mu_warm = a;
        return true;
    }
    // March in the decreasing direction of c (c falls as μ grows).
    let dir = if ca > 0.0 { 1.0 } else { -1.0 };
    let mut step = 1e-3 * (1.0 + a.abs());
    let mut b = a;
    let mut cb = ca;
    let mut bracketed = false;
    for _ in 0..80 {
        b = a + dir * step;
        cb = eval(b, trial);
        if cb.abs() <= ctol {
            *mu_warm = b;
            return true;
        }
        if (cb > 0.0) != (ca > 0.0) {
            bracketed = true;
            break;
        }
        a = b;
        ca = cb;
        step *= 4.0;
    }
    if !bracketed {
        return false;
    }
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let (mut clo, mut chi) = if a < b { (ca, cb) } else { (cb, ca) };
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..90 {
        mid = 0.5 * (lo + hi);
        let cm = eval(mid, trial);
        if cm.abs() <= ctol || hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            *mu_warm = mid;
            return true;
        }
        if (cm > 0.0) == (clo > 0.0) {
            lo = mid;
            clo = cm;
        } else {
            hi = mid;
            chi = cm;
        }
    }
    let _ = (clo, chi);
    // Converged bracket; accept the midpoint state already in `trial`.
    *mu_warm = mid;
    eval(mid, trial).abs() <= RESIDUAL_TOL
}

fn run_restart(active: &Active, seed: u64) -> RestartOutcome {
    let n = active.x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fresh = || State {
        ln_p: vec![0.0; n],
        p: vec![0.0; n],
        w: vec![0.0; n],
        cross: 0.0,
        escort_mean: 0.0,
        plain_mean: 0.0,
    };
    let mut s = fresh();
    let mut trial = fresh();
    for i in 0..n {
        s.ln_p[i] = active.ln_q[i] + rng.gen_range(-1.0..1.0);
    }
    normalize(&mut s.ln_p, &mut s.p);
    active.refresh(&mut s);

    let zeros = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut mu = 0.0;

    // Initial feasibility: project along the constraint gradient alone,
    // re-deriving the gradient a few times since it moves with the point.
    for _ in 0..8 {
        if active.constraint(&s).abs() <= 1e-11 * active.span.max(1.0) {
            break;
        }
        active.constraint_gradient(&s, &mut g);
        if restore_constraint(active, &s, &zeros, &g, 1.0, &mut mu, &mut trial) {
            std::mem::swap(&mut s, &mut trial);
        } else {
            break;
        }
        mu = 0.0;
    }

    let mut eta = 0.5;
    let mut obj = active.divergence(&s);
    let mut stalled = 0usize;
    let mut iterations = 0usize;
    for t in 0..MAX_ITERS {
        iterations = t + 1;
        active.objective_gradient(&s, &mut d);
        active.constraint_gradient(&s, &mut g);
        mu = 0.0;
        if !restore_constraint(active, &s, &d, &g, eta, &mut mu, &mut trial) {
            eta *= 0.5;
            if eta < 1e-10 {
                break;
            }
            continue;
        }
        let next = active.divergence(&trial);
        if !next.is_finite() || next > obj + 1e-15 {
            eta *= 0.5;
            if eta < 1e-10 {
                break;
            }
            continue;
        }
        let gain = obj - next;
        std::mem::swap(&mut s, &mut trial);
        obj = next;
        if gain < 1e-15 * obj.abs().max(1.0) {
            stalled += 1;
            if stalled >= STALL_EXIT {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let residual = active.constraint(&s).abs();
    let achieved = match active.kind {
        ProblemKind::Classical => s.plain_mean,
        ProblemKind::Generalized => s.escort_mean,
    };
    let divergence = active.divergence(&s);
    RestartOutcome { ln_p: s.ln_p, divergence, residual, achieved, iterations }
}

/// Minimizes the discrete divergence over the simplex subject to the
/// problem's mean constraint, from `RESTARTS` seeded random interior
/// starts run in parallel; returns the best feasible point.
pub fn oracle_solve(gp: &GridProblem, seed: u64) -> Result<OracleSolution> {
    let mut x = Vec::new();
    let mut ln_q = Vec::new();
    let mut index = Vec::new();
    for (i, (&xi, &qi)) in gp.nodes.iter().zip(&gp.q_weights).enumerate() {
        if qi > 0.0 {
            x.push(xi);
            ln_q.push(qi.ln());
            index.push(i);
        }
    }
    let span = x[x.len() - 1] - x[0];
    let active = Active { x, ln_q, index, alpha: gp.alpha, m: gp.m, kind: gp.kind, span };

    let outcomes: Vec<RestartOutcome> = (0..RESTARTS)
        .into_par_iter()
        .map(|k| run_restart(&active, seed.wrapping_add(SEED_STRIDE.wrapping_mul(k as u64))))
        .collect();

    let feasible: Vec<&RestartOutcome> = outcomes
        .iter()
        .filter(|o| o.residual <= RESIDUAL_TOL && o.divergence.is_finite())
        .collect();
    if feasible.is_empty() {
        let best_residual = outcomes
            .iter()
            .map(|o| o.residual)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NotConverged { abs_error: best_residual });
    }
    let best = feasible
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            a.divergence
                .partial_cmp(&b.divergence)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(j))
        })
        .map(|(_, o)| *o)
        .expect("nonempty");
    let spread = feasible
        .iter()
        .map(|o| o.divergence)
        .fold(f64::NEG_INFINITY, f64::max)
        - feasible
            .iter()
            .map(|o| o.divergence)
            .fold(f64::INFINITY, f64::min);

    let mut weights = vec![0.0; gp.nodes.len()];
    for (slot, &ln_p) in active.index.iter().zip(&best.ln_p) {
        weights[*slot] = ln_p.exp();
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(OracleSolution {
        weights,
        divergence: best.divergence,
        achieved_mean: best.achieved,
        iterations: best.iterations,
        feasible_restarts: feasible.len(),
        restart_spread: spread,
    })
}
