//! Divergences, entropies, and escort transforms for density pairs, plus
//! the cross-check tying a solved problem to its order-inverted partner.
//!
//! Every integral here runs over the common support of the pair, clamped to
//! the tighter of the two truncation windows. Orders above 1 (and the KL
//! integrand) are only finite when essentially all of the first density's
//! mass lies where the second is positive; that is enforced by measuring
//! the actual mass on the uncovered region rather than just its length, so
//! references truncated at slightly different points still compare.

use crate::quadrature::{self, FnIntegrand, QuadOpts};
use crate::reference::ReferenceDistribution;
use crate::solver::{ProblemKind, TsallisSolution};
use crate::{Error, IntervalSet, Result};

/// Density values at or below this floor are treated as exact zeros inside
/// pointwise power combinations, so masked-out regions cannot emit NaNs.
const DENSITY_FLOOR: f64 = 1e-300;
/// Largest first-density mass allowed outside the second support before an
/// order-above-1 or KL integral is declared divergent.
const MASS_TOL: f64 = 1e-12;
/// Grid resolution for sup-norm density comparisons.
const SUP_GRID: usize = 512;

/// Two densities restricted to their common integration domain.
#[derive(Debug, Clone)]
pub struct DensityPair {
    p: ReferenceDistribution,
    q: ReferenceDistribution,
    domain: IntervalSet,
    truncation: (f64, f64),
}

impl DensityPair {
    /// Pairs two densities; errors when their supports (or truncation
    /// windows) do not overlap.
    pub fn new(p: &ReferenceDistribution, q: &ReferenceDistribution) -> Result<Self> {
        let support = p.support().intersect(q.support());
        if support.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let (pl, ph) = p.truncation();
        let (ql, qh) = q.truncation();
        let t0 = pl.max(ql);
        let t1 = ph.min(qh);
        let domain = support.clamp_to(t0, t1);
        if domain.is_empty() {
            return Err(Error::EmptyDomain);
        }
        Ok(DensityPair { p: p.clone(), q: q.clone(), domain, truncation: (t0, t1) })
    }

    /// Common quadrature domain (bounded).
    pub fn domain(&self) -> &IntervalSet {
        &self.domain
    }

    /// `∫ w(p(x), q(x)) dx` over the common domain.
    fn integrate<W: Fn(f64, f64) -> f64>(&self, w: W) -> Result<f64> {
        let mut hints = self.p.quadrature_hint().to_vec();
        hints.extend_from_slice(self.q.quadrature_hint());
        let mut singular = self.p.singular_points().to_vec();
        singular.extend_from_slice(self.q.singular_points());
        let segments = quadrature::build_segments(&self.domain, &hints, &singular);
        let f = FnIntegrand(|x: f64| w(self.p.density(x), self.q.density(x)));
        let out = quadrature::integrate_segments(&f, &segments, &QuadOpts::precise());
        if !out.converged {
            return Err(Error::NotConverged { abs_error: out.abs_error });
        }
        Ok(out.value)
    }
}

/// `p^α q^{1−α}` with exact-zero handling at the endpoints of the order
/// range, so masked regions contribute what the limiting formula says.
#[inline]
fn pow_blend(pd: f64, qd: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return qd;
    }
    if alpha == 1.0 {
        return pd;
    }
    if pd <= DENSITY_FLOOR || qd <= DENSITY_FLOOR {
        return 0.0;
    }
    pd.powf(alpha) * qd.powf(1.0 - alpha)
}

/// Mass of `p` outside `cover`; infinite when the quadrature cannot settle
/// it, which callers treat as "too much".
fn mass_outside(p: &ReferenceDistribution, cover: &IntervalSet) -> f64 {
    let uncovered = p.support().subtract(cover);
    if uncovered.is_empty() {
        return 0.0;
    }
    let (t0, t1) = p.truncation();
    let dom = uncovered.clamp_to(t0, t1);
    if dom.is_empty() {
        return 0.0;
    }
    let segments = quadrature::build_segments(&dom, p.quadrature_hint(), p.singular_points());
    let f = FnIntegrand(|x: f64| p.density(x));
    let out = quadrature::integrate_segments(&f, &segments, &QuadOpts::precise());
    if out.converged {
        out.value.max(0.0)
    } else {
        f64::INFINITY
    }
}

fn require_absolutely_continuous(
    p: &ReferenceDistribution,
    q: &ReferenceDistribution,
    what: &str,
) -> Result<()> {
    let mass = mass_outside(p, q.support());
    if mass > MASS_TOL {
        return Err(Error::DivergentIntegral(format!(
            "{what} diverges: {mass:.3e} of the first density's mass lies where the second \
             vanishes"
        )));
    }
    Ok(())
}

fn validate_order(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            detail: format!("order must be positive and finite, got {alpha}"),
        });
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return Err(Error::InvalidParameter {
            name: "alpha",
            detail: "order 1 is the KL limit; call the KL form directly".into(),
        });
    }
    Ok(())
}

fn validate_escort_order(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            detail: format!("escort order must be nonnegative and finite, got {alpha}"),
        });
    }
    Ok(())
}

/// Cross integral `∫ p^α q^{1−α}` over the common domain.
pub(crate) fn cross_integral(
    p: &ReferenceDistribution,
    q: &ReferenceDistribution,
    alpha: f64,
) -> Result<f64> {
    validate_escort_order(alpha)?;
    let pair = DensityPair::new(p, q)?;
    pair.integrate(|pd, qd| pow_blend(pd, qd, alpha))
}

/// Rényi divergence `D_α(P ‖ Q) = log(∫ p^α q^{1−α}) / (α − 1)` for
/// positive order ≠ 1. Orders above 1 require P's mass to sit inside Q's
/// support.
pub fn renyi_divergence(
    p: &ReferenceDistribution,
    q: &ReferenceDistribution,
    alpha: f64,
) -> Result<f64> {
    validate_order(alpha)?;
    if alpha > 1.0 {
        require_absolutely_continuous(p, q, "Rényi divergence above order 1")?;
    }
    let i = cross_integral(p, q, alpha)?;
    if i <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    Ok(i.ln() / (alpha - 1.0))
}

/// Kullback-Leibler divergence `∫ p log(p/q)`, the α → 1 limit.
pub fn kl_divergence(p: &ReferenceDistribution, q: &ReferenceDistribution) -> Result<f64> {
    require_absolutely_continuous(p, q, "KL divergence")?;
    let pair = DensityPair::new(p, q)?;
    pair.integrate(|pd, qd| {
        if pd <= DENSITY_FLOOR || qd <= DENSITY_FLOOR {
            0.0
        } else {
            pd * (pd / qd).ln()
        }
    })
}

/// Tsallis divergence `(∫ p^α q^{1−α} − 1) / (α − 1)`; the same monotone
/// transform of the cross integral as the Rényi form, without the log.
pub fn tsallis_divergence(
    p: &ReferenceDistribution,
    q: &ReferenceDistribution,
    alpha: f64,
) -> Result<f64> {
    validate_order(alpha)?;
    if alpha > 1.0 {
        require_absolutely_continuous(p, q, "Tsallis divergence above order 1")?;
    }
    let i = cross_integral(p, q, alpha)?;
    Ok((i - 1.0) / (alpha - 1.0))
}

/// Tsallis entropy `(∫ p^α − 1) / (1 − α)` over the support of `p`.
pub fn tsallis_entropy(p: &ReferenceDistribution, alpha: f64) -> Result<f64> {
    validate_order(alpha)?;
    let domain = p.quadrature_domain();
    let segments = quadrature::build_segments(&domain, p.quadrature_hint(), p.singular_points());
    let f = FnIntegrand(|x: f64| {
        let pd = p.density(x);
        if pd <= DENSITY_FLOOR {
            0.0
        } else {
            pd.powf(alpha)
        }
    });
    let out = quadrature::integrate_segments(&f, &segments, &QuadOpts::precise());
    if !out.converged {
        return Err(Error::NotConverged { abs_error: out.abs_error });
    }
    Ok((out.value - 1.0) / (1.0 - alpha))
}

/// Escort density `p^α q^{1−α} / ∫ p^α q^{1−α}` over the common support.
/// Order 0 returns (the common-support restriction of) `q`, order 1 `p`.
pub fn escort(
    p: &ReferenceDistribution,
    q: &ReferenceDistribution,
    alpha: f64,
) -> Result<ReferenceDistribution> {
    validate_escort_order(alpha)?;
    let pair = DensityPair::new(p, q)?;
    let i = pair.integrate(|pd, qd| pow_blend(pd, qd, alpha))?;
    if !(i.is_finite() && i > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    let support = p.support().intersect(q.support());
    let mut hints = p.quadrature_hint().to_vec();
    hints.extend_from_slice(q.quadrature_hint());
    let mut singular = p.singular_points().to_vec();
    singular.extend_from_slice(q.singular_points());
    let label = format!("escort[alpha={alpha}]({} | {})", p.label(), q.label());
    let pc = p.clone();
    let qc = q.clone();
    let dens = move |x: f64| pow_blend(pc.density(x), qc.density(x), alpha) / i;
    ReferenceDistribution::from_density(dens, support, label, hints, singular, pair.truncation)
}

/// Mean of `log(p/q)` under the α-escort of `(p, q)`: the level matched by
/// the order scan.
pub(crate) fn escort_log_ratio_mean(
    p: &ReferenceDistribution,
    q: &ReferenceDistribution,
    alpha: f64,
) -> Result<f64> {
    validate_escort_order(alpha)?;
    let pair = DensityPair::new(p, q)?;
    let i = pair.integrate(|pd, qd| pow_blend(pd, qd, alpha))?;
    if !(i.is_finite() && i > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    let num = pair.integrate(|pd, qd| {
        if pd <= DENSITY_FLOOR || qd <= DENSITY_FLOOR {
            0.0
        } else {
            pow_blend(pd, qd, alpha) * (pd / qd).ln()
        }
    })?;
    Ok(num / i)
}

/// Sup-norm gap between two densities on a midpoint grid over the shared
/// truncation window.
pub(crate) fn grid_sup_gap(a: &ReferenceDistribution, b: &ReferenceDistribution) -> f64 {
    let (a0, a1) = a.truncation();
    let (b0, b1) = b.truncation();
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return f64::INFINITY;
    }
    let n = SUP_GRID;
    (0..n)
        .map(|i| {
            let x = lo + (i as f64 + 0.5) * (hi - lo) / n as f64;
            (a.density(x) - b.density(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// How closely a solved pair honors the order inversion `α ↔ 1/α`.
#[derive(Debug, Clone, Copy)]
pub struct DualityReport {
    /// |γ*_C − γ*_G|.
    pub gamma_gap: f64,
    /// Sup-norm distance between the α_C-escort of the classical solution
    /// and the generalized solution density.
    pub escort_gap_c_to_g: f64,
    /// Sup-norm distance between the α_G-escort of the generalized solution
    /// and the classical solution density.
    pub escort_gap_g_to_c: f64,
    /// |divergence_C − divergence_G|.
    pub divergence_gap: f64,
}

/// Verifies that a classical solution at order α and a generalized solution
/// at order 1/α describe the same optimum: shared tilt, mutually escorted
/// densities, equal attained divergence.
pub fn check_duality(
    sol_c: &TsallisSolution,
    sol_g: &TsallisSolution,
) -> Result<DualityReport> {
    if sol_c.spec.kind != ProblemKind::Classical || sol_g.spec.kind != ProblemKind::Generalized {
        return Err(Error::MismatchedProblems(format!(
            "need a classical and a generalized solution, got {:?} and {:?}",
            sol_c.spec.kind, sol_g.spec.kind
        )));
    }
    let (alpha_c, alpha_g) = (sol_c.spec.alpha, sol_g.spec.alpha);
    if (alpha_c * alpha_g - 1.0).abs() > 1e-12 {
        return Err(Error::IndexMismatch { alpha_c, alpha_g });
    }
    if (sol_c.spec.m - sol_g.spec.m).abs() > 1e-12 {
        return Err(Error::MismatchedProblems(format!(
            "constraint means differ: {} vs {}",
            sol_c.spec.m, sol_g.spec.m
        )));
    }
    if sol_c.spec.reference.label() != sol_g.spec.reference.label() {
        return Err(Error::MismatchedProblems(format!(
            "references differ: {} vs {}",
            sol_c.spec.reference.label(),
            sol_g.spec.reference.label()
        )));
    }

    let q = &sol_c.spec.reference;
    // Escorting the classical solution by its own order raises the bracket
    // exponent from ξ_C = −(ξ_G + 1) to α_C ξ_C = −ξ_G, the generalized
    // solution exponent; the reverse direction mirrors it.
    let esc_to_g = escort(&sol_c.density, q, alpha_c)?;
    let esc_to_c = escort(&sol_g.density, q, alpha_g)?;
    Ok(DualityReport {
        gamma_gap: (sol_c.gamma_star - sol_g.gamma_star).abs(),
        escort_gap_c_to_g: grid_sup_gap(&esc_to_g, &sol_g.density),
        escort_gap_g_to_c: grid_sup_gap(&esc_to_c, &sol_c.density),
        divergence_gap: (sol_c.divergence - sol_g.divergence).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{make_builtin, Family};
    use crate::solver::{solve, ProblemSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(lo: f64, hi: f64) -> ReferenceDistribution {
        make_builtin(Family::Uniform { lo, hi }).unwrap()
    }

    fn gaussian(mean: f64, std: f64) -> ReferenceDistribution {
        make_builtin(Family::Gaussian { mean, std }).unwrap()
    }

    #[test]
    fn nested_uniform_divergences_are_log_two() {
        let p = uniform(0.0, 0.5);
        let q = uniform(0.0, 1.0);
        for alpha in [0.3, 0.5, 2.0, 5.0] {
            let d = renyi_divergence(&p, &q, alpha).unwrap();
            assert!((d - std::f64::consts::LN_2).abs() < 1e-10, "alpha {alpha}: {d}");
        }
        let kl = kl_divergence(&p, &q).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn divergence_rejects_escaping_mass_above_order_one() {
        let p = uniform(0.0, 1.0);
        let q = uniform(0.0, 0.5);
        assert!(matches!(
            renyi_divergence(&p, &q, 2.0),
            Err(Error::DivergentIntegral(_))
        ));
        assert!(matches!(kl_divergence(&p, &q), Err(Error::DivergentIntegral(_))));
        // Below order 1 the integral is finite even without containment.
        let d = renyi_divergence(&p, &q, 0.5).unwrap();
        assert!(d.is_finite() && d > 0.0);
    }

    #[test]
    fn truncation_offsets_do_not_trip_the_containment_check() {
        // Two gaussians truncated at ±12σ around different centers: the
        // interval supports differ, but the escaping mass is ~1e-31.
        let p = gaussian(0.0, 1.0);
        let q = gaussian(0.5, 1.0);
        let d = renyi_divergence(&p, &q, 1.5).unwrap();
        // Equal-variance gaussians: D_α = α·Δμ²/(2σ²).
        assert!((d - 1.5 * 0.125).abs() < 1e-7, "{d}");
    }

    #[test]
    fn gaussian_divergences_match_closed_forms() {
        let p = gaussian(0.0, 1.0);
        let q = gaussian(0.5, 1.0);
        let kl = kl_divergence(&p, &q).unwrap();
        assert!((kl - 0.125).abs() < 1e-9, "kl = {kl}");
        for alpha in [0.3, 0.6, 0.9999, 1.0001] {
            let d = renyi_divergence(&p, &q, alpha).unwrap();
            assert!((d - alpha * 0.125).abs() < 1e-7, "alpha {alpha}: {d}");
        }
    }

    #[test]
    fn renyi_approaches_kl_near_order_one() {
        let p = gaussian(0.0, 1.0);
        let q = gaussian(0.5, 1.0);
        let kl = kl_divergence(&p, &q).unwrap();
        for alpha in [0.9999, 1.0001] {
            let d = renyi_divergence(&p, &q, alpha).unwrap();
            assert!((d - kl).abs() <= 1e-3, "alpha {alpha}: |{d} - {kl}|");
        }
    }

    #[test]
    fn tsallis_entropy_frozen_values() {
        let wide = uniform(0.0, 2.0);
        let t = tsallis_entropy(&wide, 0.5).unwrap();
        assert!((t - 2.0 * (std::f64::consts::SQRT_2 - 1.0)).abs() < 1e-10, "{t}");
        // The unit-interval uniform has zero Tsallis entropy at every order.
        let unit = uniform(0.0, 1.0);
        for alpha in [0.3, 0.5, 2.0] {
            assert!(tsallis_entropy(&unit, alpha).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn renyi_is_log_transform_of_tsallis_divergence() {
        let cases = [
            (uniform(0.0, 0.5), uniform(0.0, 1.0)),
            (gaussian(0.0, 1.0), gaussian(0.5, 1.0)),
        ];
        for (p, q) in &cases {
            for alpha in [0.3, 0.5, 0.8] {
                let t = tsallis_divergence(p, q, alpha).unwrap();
                let d = renyi_divergence(p, q, alpha).unwrap();
                let want = (1.0 + (alpha - 1.0) * t).ln() / (alpha - 1.0);
                assert!((d - want).abs() < 1e-9, "alpha {alpha}: {d} vs {want}");
            }
        }
    }

    #[test]
    fn escort_interpolates_between_its_ends() {
        let p = gaussian(0.0, 1.0);
        let q = gaussian(0.5, 1.0);
        let at_one = escort(&p, &q, 1.0).unwrap();
        let at_zero = escort(&p, &q, 0.0).unwrap();
        let mut worst_one: f64 = 0.0;
        let mut worst_zero: f64 = 0.0;
        for i in 0..200 {
            let x = -4.0 + 8.5 * i as f64 / 199.0;
            worst_one = worst_one.max((at_one.density(x) - p.density(x)).abs());
            worst_zero = worst_zero.max((at_zero.density(x) - q.density(x)).abs());
        }
        assert!(worst_one < 1e-10, "{worst_one}");
        assert!(worst_zero < 1e-10, "{worst_zero}");
    }

    #[test]
    fn escort_inverts_under_reciprocal_order() {
        let p = gaussian(0.0, 1.0);
        let q = gaussian(0.5, 1.0);
        let a = 0.5;
        let once = escort(&p, &q, a).unwrap();
        let back = escort(&once, &q, 1.0 / a).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..300 {
            let x = -4.0 + 9.0 * i as f64 / 299.0;
            worst = worst.max((back.density(x) - p.density(x)).abs());
        }
        assert!(worst < 1e-8, "involution sup gap {worst}");
    }

    #[test]
    fn escort_mean_matches_gaussian_mixture_formula() {
        // Escort of N(μ1,σ) and N(μ2,σ) at order α is N(αμ1+(1−α)μ2, σ).
        let p = gaussian(0.0, 1.0);
        let q = gaussian(0.5, 1.0);
        let esc = escort(&p, &q, 0.3).unwrap();
        let (mean, sd) = esc.mean_std().unwrap();
        assert!((mean - 0.35).abs() < 1e-8, "{mean}");
        assert!((sd - 1.0).abs() < 1e-8, "{sd}");
        let level = escort_log_ratio_mean(&p, &q, 0.3).unwrap();
        // log(p/q)(x) = ((x−μ2)² − (x−μ1)²)/2 is linear in x, so its escort
        // mean is just its value at the escort mean.
        let want = 0.5 * ((0.35f64 - 0.5).powi(2) - 0.35f64.powi(2));
        assert!((level - want).abs() < 1e-8, "{level} vs {want}");
    }

    #[test]
    fn randomized_divergences_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let lo = rng.gen_range(0.0..0.3);
            let hi = rng.gen_range(0.6..1.0);
            let p = uniform(lo, hi);
            let q = uniform(0.0, 1.0);
            for alpha in [0.3, 0.7, 1.5] {
                let d = renyi_divergence(&p, &q, alpha).unwrap();
                assert!(d >= -1e-9, "alpha {alpha}: {d}");
                let t = tsallis_divergence(&p, &q, alpha).unwrap();
                assert!(t >= -1e-9, "alpha {alpha}: {t}");
            }
            assert!(kl_divergence(&p, &q).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn disjoint_supports_error() {
        let p = uniform(0.0, 1.0);
        let q = uniform(2.0, 3.0);
        assert!(matches!(DensityPair::new(&p, &q), Err(Error::EmptyDomain)));
        assert!(renyi_divergence(&p, &q, 0.5).is_err());
    }

    #[test]
    fn order_validation() {
        let p = uniform(0.0, 1.0);
        let q = uniform(0.0, 1.0);
        assert!(renyi_divergence(&p, &q, 1.0).is_err());
        assert!(renyi_divergence(&p, &q, 0.0).is_err());
        assert!(renyi_divergence(&p, &q, f64::NAN).is_err());
        assert!(tsallis_entropy(&p, 1.0).is_err());
        assert!(escort(&p, &q, -0.5).is_err());
    }

    #[test]
    fn duality_check_certifies_an_inverted_pair() {
        let q = uniform(0.0, 1.0);
        let c = solve(
            &ProblemSpec::new(ProblemKind::Classical, 0.5, 0.6, q.clone()).unwrap(),
            -8.0,
            8.0,
        )
        .unwrap();
        let g = solve(
            &ProblemSpec::new(ProblemKind::Generalized, 2.0, 0.6, q).unwrap(),
            -8.0,
            8.0,
        )
        .unwrap();
        let report = check_duality(&c, &g).unwrap();
        assert!(report.gamma_gap < 1e-6, "gamma gap {}", report.gamma_gap);
        assert!(report.escort_gap_c_to_g < 1e-6, "{}", report.escort_gap_c_to_g);
        assert!(report.escort_gap_g_to_c < 1e-6, "{}", report.escort_gap_g_to_c);
        assert!(report.divergence_gap < 1e-8, "{}", report.divergence_gap);
    }

    #[test]
    fn duality_check_rejects_mismatches() {
        let q = uniform(0.0, 1.0);
        let c = solve(
            &ProblemSpec::new(ProblemKind::Classical, 0.5, 0.6, q.clone()).unwrap(),
            -8.0,
            8.0,
        )
        .unwrap();
        let g_wrong_alpha = solve(
            &ProblemSpec::new(ProblemKind::Generalized, 3.0, 0.6, q.clone()).unwrap(),
            -8.0,
            8.0,
        )
        .unwrap();
        assert!(matches!(
            check_duality(&c, &g_wrong_alpha),
            Err(Error::IndexMismatch { .. })
        ));
        assert!(matches!(
            check_duality(&c, &c),
            Err(Error::MismatchedProblems(_))
        ));
        let g_wrong_m = solve(
            &ProblemSpec::new(ProblemKind::Generalized, 2.0, 0.55, q).unwrap(),
            -8.0,
            8.0,
        )
        .unwrap();
        assert!(matches!(
            check_duality(&c, &g_wrong_m),
            Err(Error::MismatchedProblems(_))
        ));
    }
}
