use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building distributions or solving.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor argument is out of its documented range.
    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    /// A tabulated density table is malformed.
    #[error("tabulated density rejected: {0}")]
    Tabulated(String),

    /// A density failed its normalization check at construction.
    #[error("density integrates to {integral:.12e}, expected 1 within {tol:.1e}")]
    NotNormalized { integral: f64, tol: f64 },

    /// The support intersected with the bracket region is empty.
    #[error("integration domain is empty")]
    EmptyDomain,

    /// Non-integrable bracket singularity: `ν ≤ −1` with positive reference
    /// density at the bracket zero.
    #[error("partition integral diverges at the bracket zero x = {endpoint}")]
    Divergent { endpoint: f64 },

    /// Quadrature failed to reach its tolerance inside the panel budget.
    #[error("quadrature did not converge (error estimate {abs_error:.3e})")]
    NotConverged { abs_error: f64 },

    /// An integral required for a divergence is infinite, e.g. the first
    /// density charges a region where the second vanishes.
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    /// An escort or solution density has a vanishing or non-finite normalizer.
    #[error("normalizer is zero or non-finite")]
    ZeroNormalizer,

    /// The dual objective is undefined on the whole scanned grid.
    #[error("dual objective undefined at every grid point in [{lo}, {hi}]")]
    NoDefinedPoint { lo: f64, hi: f64 },

    /// No γ in the searched range meets the mean constraint to tolerance.
    #[error("mean constraint unattainable: requested {requested}, closest achieved {closest}")]
    ConstraintUnattainable { requested: f64, closest: f64 },

    /// Duality check given solutions whose orders are not reciprocal.
    #[error("order mismatch: expected alpha_g = 1/alpha_c, got alpha_c = {alpha_c}, alpha_g = {alpha_g}")]
    IndexMismatch { alpha_c: f64, alpha_g: f64 },

    /// Duality check given solutions of different problems.
    #[error("mismatched problems: {0}")]
    MismatchedProblems(String),

    /// A grid problem whose constraint cannot be met by any simplex point.
    #[error("infeasible grid problem: {0}")]
    Infeasible(String),

    /// A family handed to the Legendre check is too short or not increasing.
    #[error("invalid solution family: {0}")]
    InvalidFamily(String),
}
