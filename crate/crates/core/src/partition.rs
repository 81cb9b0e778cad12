//! The partition function `Z_ν(γ, x̄) = ∫_D [γ(x − x̄) + 1]^ν Q(x) dx` and
//! the means it induces.
//!
//! `D` is the intersection of the reference support with the region where
//! the bracket is nonnegative. For `γ ≠ 0` the bracket vanishes at
//! `e = x̄ − 1/γ` (either sign of γ), so:
//!
//! * `ν < 0` with `e` on the boundary of `D` gives an algebraic endpoint
//!   singularity, integrated with geometric panel refinement;
//! * `ν ≤ −1` with `Q(e) > 1e-12` is non-integrable and reported as a
//!   [`Error::Divergent`] before any quadrature runs. When `Q` vanishes at
//!   `e` faster than the pointwise test can see, the refinement's
//!   contribution-ratio watch catches the divergence instead and the result
//!   comes back with `converged = false`.
//!
//! Infinite support endpoints are replaced by the reference truncation
//! bounds (tail mass < 1e-30) before integrating.

use crate::quadrature::{self, Integrand, QuadOpts};
use crate::{Error, IntervalSet, ReferenceDistribution, Result};

/// One partition-function evaluation request.
#[derive(Debug, Clone, Copy)]
pub struct PartitionQuery<'a> {
    /// Bracket exponent ν.
    pub nu: f64,
    /// Tilt parameter γ.
    pub gamma: f64,
    /// Shift center x̄.
    pub x_bar: f64,
    /// Reference density Q.
    pub reference: &'a ReferenceDistribution,
}

/// Value and error report for one partition integral.
#[derive(Debug, Clone, Copy)]
pub struct PartitionResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// True when the error estimate meets the requested tolerance (for the
    /// default precise tier that is well inside `1e-9 · max(1, |value|)`)
    /// and no divergence indicator fired.
    pub converged: bool,
}

/// The x where the bracket vanishes: `x̄ − 1/γ`. `None` when the bracket is
/// constant (γ = 0 or |1/γ| overflows past any finite support).
pub(crate) fn bracket_zero(gamma: f64, x_bar: f64) -> Option<f64> {
    if gamma == 0.0 {
        return None;
    }
    let e = x_bar - 1.0 / gamma;
    e.is_finite().then_some(e)
}

/// The set where the bracket is nonnegative, intersected with the support.
///
/// For γ > 0 this is `[x̄ − 1/γ, ∞) ∩ supp Q`; for γ < 0 it is
/// `(−∞, x̄ − 1/γ] ∩ supp Q` (the bracket zero sits at `x̄ + 1/|γ|`, above
/// the center); γ = 0 leaves the support untouched.
pub fn gamma_domain(gamma: f64, x_bar: f64, reference: &ReferenceDistribution) -> IntervalSet {
    let support = reference.support();
    match bracket_zero(gamma, x_bar) {
        None => support.clone(),
        Some(e) => {
            let half = if gamma > 0.0 {
                IntervalSet::from_pairs(&[(e, f64::INFINITY)])
            } else {
                IntervalSet::from_pairs(&[(f64::NEG_INFINITY, e)])
            };
            support.intersect(&half.expect("bracket zero is finite"))
        }
    }
}

/// Bracket power with guards for boundary rounding: a bracket that rounds to
/// a non-positive value inside the domain contributes zero rather than NaN.
#[inline]
pub(crate) fn bracket_pow(br: f64, nu: f64) -> f64 {
    if br <= 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    // Small integer exponents dominate real workloads (α = 0.5 uses ±1, ±2).
    let r = nu.round();
    if r == nu && r.abs() <= 8.0 {
        br.powi(r as i32)
    } else {
        br.powf(nu)
    }
}

/// `w(x) · bracket^ν · Q(x)`, evaluated so that the distance to the bracket
/// zero stays exact when quadrature marches toward it: at an anchor sitting
/// on the zero, `bracket = γ·offset` with no cancellation, which is what
/// lets endpoint refinement resolve ν ∈ (−1, 0) to full precision.
struct TiltIntegrand<'a, W> {
    nu: f64,
    gamma: f64,
    x_bar: f64,
    /// Bracket zero, when the bracket is non-constant.
    e: Option<f64>,
    reference: &'a ReferenceDistribution,
    weight: W,
}

impl<W: Fn(f64) -> f64> TiltIntegrand<'_, W> {
    #[inline]
    fn finish(&self, br: f64, x: f64) -> f64 {
        let b = bracket_pow(br, self.nu);
        if b == 0.0 {
            0.0
        } else {
            b * self.reference.density(x) * (self.weight)(x)
        }
    }

    #[inline]
    fn bracket_at(&self, x: f64) -> f64 {
        match self.e {
            Some(e) => self.gamma * (x - e),
            // γ = 0 or 1/γ overflowed: the bracket is 1 to f64 precision.
            None => self.gamma.mul_add(x - self.x_bar, 1.0),
        }
    }
}

impl<W: Fn(f64) -> f64> Integrand for TiltIntegrand<'_, W> {
    fn eval(&self, x: f64) -> f64 {
        self.finish(self.bracket_at(x), x)
    }

    fn eval_offset(&self, anchor: f64, offset: f64) -> f64 {
        let x = anchor + offset;
        let br = match self.e {
            // (anchor - e) is exact at the zero itself and dwarfs the
            // rounding of tiny offsets elsewhere.
            Some(e) => self.gamma * ((anchor - e) + offset),
            None => self.gamma.mul_add(x - self.x_bar, 1.0),
        };
        self.finish(br, x)
    }

    fn offset_floor(&self, _anchor: f64) -> f64 {
        // The bracket is offset-exact and Q is continuous at every march
        // anchor (density singularities are anchored at their own exact
        // coordinates), so subnormal offsets are fine.
        0.0
    }
}

/// Shared core: `∫_D w(x) · bracket^ν · Q(x) dx` with full singularity and
/// divergence handling.
fn weighted_partition<W: Fn(f64) -> f64>(
    q: &PartitionQuery<'_>,
    weight: W,
    opts: &QuadOpts,
) -> Result<PartitionResult> {
    let nu = q.nu;
    if !nu.is_finite() || !q.gamma.is_finite() || !q.x_bar.is_finite() {
        return Err(Error::InvalidParameter {
            name: "query",
            detail: format!("nu {}, gamma {}, x_bar {} must be finite", nu, q.gamma, q.x_bar),
        });
    }
    let reference = q.reference;
    let exact_domain = gamma_domain(q.gamma, q.x_bar, reference);
    if exact_domain.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let (t_lo, t_hi) = reference.truncation();
    let domain = exact_domain.clamp_to(t_lo, t_hi);
    if domain.is_empty() {
        // The admissible region lies entirely beyond the truncation bounds,
        // carrying < 1e-30 of the mass: indistinguishable from empty.
        return Err(Error::EmptyDomain);
    }

    let e = bracket_zero(q.gamma, q.x_bar);
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    // Is the bracket zero on the closure of the integration domain?
    let e_on_boundary = e.is_some_and(|e| {
        domain
            .intervals()
            .iter()
            .any(|iv| near(e, iv.lo) || near(e, iv.hi) || (iv.lo < e && e < iv.hi))
    });

    if nu <= -1.0 {
        if let Some(e) = e {
            if e_on_boundary {
                // Probe Q just inside the domain next to the bracket zero.
                let iv = domain
                    .intervals()
                    .iter()
                    .min_by(|a, b| {
                        let da = (e - a.lo).abs().min((e - a.hi).abs());
                        let db = (e - b.lo).abs().min((e - b.hi).abs());
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("domain nonempty");
                let width = (iv.hi - iv.lo).max(f64::MIN_POSITIVE);
                let probe = (e.clamp(iv.lo, iv.hi) - e.signum() * 0.0).clamp(iv.lo, iv.hi);
                let inward = if (probe - iv.lo).abs() < (probe - iv.hi).abs() { 1.0 } else { -1.0 };
                let q_at = reference.density(probe + inward * 1e-13 * width).max(reference.density(probe));
                if q_at > 1e-12 {
                    return Err(Error::Divergent { endpoint: e });
                }
            }
        }
    }

    let mut singular: Vec<f64> = reference.singular_points().to_vec();
    if nu < 0.0 && e_on_boundary {
        singular.push(e.expect("boundary hit implies finite e"));
    }
    let segments = quadrature::build_segments(&domain, reference.quadrature_hint(), &singular);

    let integrand = TiltIntegrand {
        nu,
        gamma: q.gamma,
        x_bar: q.x_bar,
        e,
        reference,
        weight,
    };
    let out = quadrature::integrate_segments(&integrand, &segments, opts);
    Ok(PartitionResult {
        value: out.value,
        abs_error_estimate: out.abs_error,
        converged: out.converged,
    })
}

/// `Z_ν(γ, x̄)` for the given query, at full precision.
pub fn partition_value(q: &PartitionQuery<'_>) -> Result<PartitionResult> {
    weighted_partition(q, |_| 1.0, &QuadOpts::precise())
}

/// Scan-grade evaluation: same contract, looser tolerance, smaller budget.
pub(crate) fn partition_value_opts(q: &PartitionQuery<'_>, opts: &QuadOpts) -> Result<PartitionResult> {
    weighted_partition(q, |_| 1.0, opts)
}

/// Classical mean `E[X]` under `P(x) ∝ bracket^ν Q(x)`.
pub fn classical_mean(q: &PartitionQuery<'_>) -> Result<f64> {
    classical_mean_opts(q, &QuadOpts::precise())
}

pub(crate) fn classical_mean_opts(q: &PartitionQuery<'_>, opts: &QuadOpts) -> Result<f64> {
    let z = weighted_partition(q, |_| 1.0, opts)?;
    if !z.converged {
        return Err(Error::NotConverged { abs_error: z.abs_error_estimate });
    }
    if z.value <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    let m1 = weighted_partition(q, |x| x, opts)?;
    // The moment may sit near zero while Z is O(1); judge its error against
    // whichever scale is larger so a vanishing mean is not held to an
    // impossible relative target.
    if !m1.converged && m1.abs_error_estimate > opts.target(m1.value.abs().max(z.value)) {
        return Err(Error::NotConverged { abs_error: m1.abs_error_estimate });
    }
    Ok(m1.value / z.value)
}

/// Generalized mean of order α: the classical mean of the α-escort of the
/// tilted density, which re-tilts the bracket exponent to `α ν`.
pub fn generalized_mean(q: &PartitionQuery<'_>, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            detail: format!("must be positive and finite, got {alpha}"),
        });
    }
    let escorted = PartitionQuery {
        nu: alpha * q.nu,
        gamma: q.gamma,
        x_bar: q.x_bar,
        reference: q.reference,
    };
    classical_mean(&escorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{make_builtin, Family};
    use rand::{Rng, SeedableRng};

    fn uniform01() -> ReferenceDistribution {
        make_builtin(Family::Uniform { lo: 0.0, hi: 1.0 }).unwrap()
    }

    #[test]
    fn zero_tilt_normalizes_for_every_exponent() {
        let refs = [
            make_builtin(Family::Uniform { lo: 0.0, hi: 1.0 }).unwrap(),
            make_builtin(Family::Exponential { rate: 1.0 }).unwrap(),
            make_builtin(Family::Gamma { shape: 0.7, rate: 1.3 }).unwrap(),
        ];
        for r in &refs {
            for nu in [-3.0, -1.0, 0.5, 1.0, 2.0] {
                let q = PartitionQuery { nu, gamma: 0.0, x_bar: 0.3, reference: r };
                let z = partition_value(&q).unwrap();
                assert!(z.converged);
                assert!((z.value - 1.0).abs() < 1e-10, "{} nu={nu}: {}", r.label(), z.value);
            }
        }
    }

    #[test]
    fn linear_bracket_symmetric_around_center() {
        let r = uniform01();
        let q = PartitionQuery { nu: 1.0, gamma: 0.5, x_bar: 0.5, reference: &r };
        let z = partition_value(&q).unwrap();
        assert!((z.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn inverse_square_closed_form() {
        let r = make_builtin(Family::Uniform { lo: -0.5, hi: 0.5 }).unwrap();
        let q = PartitionQuery { nu: -2.0, gamma: 1.0, x_bar: 0.0, reference: &r };
        let z = partition_value(&q).unwrap();
        // ∫_{-1/2}^{1/2} (1+x)^{-2} dx = 2 - 2/3 = 4/3.
        assert!((z.value - 4.0 / 3.0).abs() < 1e-10, "{}", z.value);
    }

    #[test]
    fn domain_halflines_follow_the_bracket_sign() {
        let r = uniform01();
        let d = gamma_domain(2.0, 0.5, &r);
        assert_eq!(d.intervals().len(), 1);
        assert!((d.intervals()[0].lo - 0.0).abs() < 1e-15);
        assert!((d.intervals()[0].hi - 1.0).abs() < 1e-15);

        // γ < 0 keeps everything below e = x̄ + 1/|γ| = 1: still all of [0,1].
        let d = gamma_domain(-1.0, 0.0, &r);
        assert_eq!(d.intervals().len(), 1);
        assert!((d.intervals()[0].hi - 1.0).abs() < 1e-15);

        // A center far left of the support empties the domain.
        let d = gamma_domain(-1.0, -3.0, &r);
        assert!(d.is_empty());

        assert_eq!(gamma_domain(0.0, 0.5, &r), *r.support());
    }

    #[test]
    fn empty_domain_is_an_error() {
        let r = uniform01();
        let q = PartitionQuery { nu: 1.0, gamma: -1.0, x_bar: -3.0, reference: &r };
        assert!(matches!(partition_value(&q), Err(Error::EmptyDomain)));
    }

    #[test]
    fn non_integrable_bracket_zero_is_divergent() {
        let r = uniform01();
        // γ = 2, x̄ = 0.5 puts the bracket zero at 0 where Q = 1.
        for nu in [-1.0, -1.5, -3.0] {
            let q = PartitionQuery { nu, gamma: 2.0, x_bar: 0.5, reference: &r };
            match partition_value(&q) {
                Err(Error::Divergent { endpoint }) => assert!(endpoint.abs() < 1e-12),
                other => panic!("nu={nu}: expected divergence, got {other:?}"),
            }
        }
    }

    #[test]
    fn integrable_bracket_singularity_converges() {
        let r = uniform01();
        let q = PartitionQuery { nu: -0.5, gamma: 2.0, x_bar: 0.5, reference: &r };
        let z = partition_value(&q).unwrap();
        assert!(z.converged);
        // ∫_0^1 (2x)^{-1/2} dx = √2.
        assert!((z.value - 2.0f64.sqrt()).abs() < 1e-9, "{}", z.value);
    }

    #[test]
    fn divergent_tail_with_tiny_density_is_caught_by_ratio_watch() {
        // Exponential reference, bracket zero deep in the tail where
        // Q < 1e-12: the pointwise divergence test cannot fire, but the
        // integral still diverges and must come back non-converged.
        let r = make_builtin(Family::Exponential { rate: 1.0 }).unwrap();
        let gamma = -1.0 / 40.0; // e = m + 1/|γ| = 40.5, Q(e) ≈ 2.5e-18
        let q = PartitionQuery { nu: -2.0, gamma, x_bar: 0.5, reference: &r };
        let z = partition_value(&q).unwrap();
        assert!(!z.converged, "value {} err {}", z.value, z.abs_error_estimate);
    }

    /// Closed-form Z for a uniform reference when the bracket stays positive:
    /// [br(b)^{ν+1} − br(a)^{ν+1}] / (γ (ν+1) (b−a)).
    fn uniform_z_closed(nu: f64, gamma: f64, x_bar: f64, a: f64, b: f64) -> f64 {
        let br = |x: f64| gamma * (x - x_bar) + 1.0;
        if gamma == 0.0 {
            return 1.0;
        }
        if nu == -1.0 {
            return (br(b).ln() - br(a).ln()) / (gamma * (b - a));
        }
        (br(b).powf(nu + 1.0) - br(a).powf(nu + 1.0)) / (gamma * (nu + 1.0) * (b - a))
    }

    #[test]
    fn uniform_closed_forms_randomized() {
        let r = uniform01();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let nu = [-0.5, 0.5, 1.0, 2.0, 3.0][rng.gen_range(0..5)];
            let gamma: f64 = rng.gen_range(-0.9..0.9);
            let x_bar: f64 = rng.gen_range(0.1..0.9);
            // Keep the bracket positive on [0,1] so the closed form applies.
            if gamma * (0.0 - x_bar) + 1.0 <= 0.05 || gamma * (1.0 - x_bar) + 1.0 <= 0.05 {
                continue;
            }
            let q = PartitionQuery { nu, gamma, x_bar, reference: &r };
            let z = partition_value(&q).unwrap();
            let exact = uniform_z_closed(nu, gamma, x_bar, 0.0, 1.0);
            assert!(
                (z.value - exact).abs() < 1e-9 * exact.abs().max(1.0),
                "nu={nu} gamma={gamma} x_bar={x_bar}: {} vs {exact}",
                z.value
            );
        }
    }

    /// 10^6-point trapezoid over the effective domain, independent of the
    /// adaptive engine.
    fn trapezoid_oracle(q: &PartitionQuery<'_>) -> f64 {
        let (t_lo, t_hi) = q.reference.truncation();
        let domain = gamma_domain(q.gamma, q.x_bar, q.reference).clamp_to(t_lo, t_hi);
        let f = |x: f64| {
            let br = q.gamma * (x - q.x_bar) + 1.0;
            if br <= 0.0 {
                0.0
            } else {
                br.powf(q.nu) * q.reference.density(x)
            }
        };
        let mut total = 0.0;
        for iv in domain.intervals() {
            let n = 1_000_000usize;
            let h = (iv.hi - iv.lo) / n as f64;
            let mut acc = 0.5 * (f(iv.lo) + f(iv.hi));
            for k in 1..n {
                acc += f(iv.lo + h * k as f64);
            }
            total += acc * h;
        }
        total
    }

    #[test]
    fn trapezoid_oracle_agrees_on_smooth_queries() {
        let refs = [
            make_builtin(Family::Uniform { lo: 0.0, hi: 1.0 }).unwrap(),
            make_builtin(Family::Exponential { rate: 1.0 }).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 20 {
            let r = &refs[checked % 2];
            let nu = rng.gen_range(0.0..3.0);
            let gamma = rng.gen_range(-0.8..0.8);
            let x_bar = rng.gen_range(0.2..0.8);
            let q = PartitionQuery { nu, gamma, x_bar, reference: r };
            let z = partition_value(&q).unwrap();
            assert!(z.converged);
            let oracle = trapezoid_oracle(&q);
            assert!(
                (z.value - oracle).abs() <= 1e-7 * oracle.abs().max(1.0),
                "{} nu={nu} gamma={gamma} x_bar={x_bar}: {} vs {oracle}",
                r.label(),
                z.value
            );
            checked += 1;
        }
    }

    #[test]
    fn classical_mean_matches_closed_forms() {
        let r = uniform01();
        let q = PartitionQuery { nu: 2.5, gamma: 0.0, x_bar: 0.3, reference: &r };
        assert!((classical_mean(&q).unwrap() - 0.5).abs() < 1e-10);

        // ν = 1: E[X] = 0.5 + γ/12 for x̄ = 0.5 (Z = 1).
        for gamma in [0.2, 0.5, -0.4] {
            let q = PartitionQuery { nu: 1.0, gamma, x_bar: 0.5, reference: &r };
            let m = classical_mean(&q).unwrap();
            assert!((m - (0.5 + gamma / 12.0)).abs() < 1e-10, "gamma={gamma}: {m}");
        }
    }

    #[test]
    fn negative_exponents_tilt_the_mean_downhill() {
        // For ν < 0 the density decreases in the bracket, so positive γ
        // drags the mean below the reference mean.
        let r = uniform01();
        let q = PartitionQuery { nu: -2.0, gamma: 0.8, x_bar: 0.5, reference: &r };
        assert!(classical_mean(&q).unwrap() < 0.5);
        let q = PartitionQuery { nu: -2.0, gamma: -0.8, x_bar: 0.5, reference: &r };
        assert!(classical_mean(&q).unwrap() > 0.5);
    }

    #[test]
    fn generalized_mean_is_the_escort_classical_mean() {
        let r = uniform01();
        let q = PartitionQuery { nu: -2.0, gamma: 0.5, x_bar: 0.5, reference: &r };
        let gm = generalized_mean(&q, 0.5).unwrap();
        let escorted = PartitionQuery { nu: -1.0, gamma: 0.5, x_bar: 0.5, reference: &r };
        let direct = classical_mean(&escorted).unwrap();
        assert!((gm - direct).abs() < 1e-12);
        // α = 1 collapses to the classical mean.
        let gm1 = generalized_mean(&q, 1.0).unwrap();
        assert!((gm1 - classical_mean(&q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn partition_value_is_positive_on_nonempty_domains() {
        let r = make_builtin(Family::Exponential { rate: 1.0 }).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = PartitionQuery {
                nu: rng.gen_range(-0.9..3.0),
                gamma: rng.gen_range(0.0..0.9),
                x_bar: rng.gen_range(0.1..1.5),
                reference: &r,
            };
            let z = partition_value(&q).unwrap();
            if z.converged {
                assert!(z.value > 0.0, "nu={} gamma={} -> {}", q.nu, q.gamma, z.value);
            }
        }
    }

    #[test]
    fn singular_reference_plus_bracket_zero_on_opposite_ends() {
        // gamma(0.7): singular density at 0; bracket zero at the right edge.
        let r = make_builtin(Family::Gamma { shape: 0.7, rate: 1.3 }).unwrap();
        let q = PartitionQuery { nu: -0.4, gamma: -0.25, x_bar: 0.5, reference: &r };
        // e = 0.5 + 4 = 4.5 interior to the support: integrable since ν > −1.
        let z = partition_value(&q).unwrap();
        assert!(z.converged);
        assert!(z.value > 0.0);
    }
}
