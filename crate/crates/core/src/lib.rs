//! Constrained maximizers of Rényi/Tsallis relative entropy on the real line.
//!
//! Given a reference density `Q` and an order `α` (α > 0, α ≠ 1), this crate
//! solves for the density `P` closest to `Q` in Rényi divergence among all
//! densities meeting a mean constraint, in two flavors:
//!
//! * kind **C**: the classical mean `E_P[X]` is pinned to `m`;
//! * kind **G**: the generalized (escort) mean is pinned to `m`.
//!
//! Both problems reduce to a one-dimensional dual search over a tilt
//! parameter `γ`. The optimizer density has the form
//! `P(x) ∝ [γ(x − m) + 1]^ν Q(x)` on the region where the bracket is
//! nonnegative, with `ν = ξ = 1/(α−1)` for kind C and `ν = −ξ` for kind G.
//! The dual objective is `−log Z` of a companion partition function, and the
//! divergence at the optimum equals the dual value.
//!
//! Module map:
//!
//! | module      | contents                                                      |
//! |-------------|---------------------------------------------------------------|
//! | `interval`  | sets of disjoint closed intervals over the extended reals     |
//! | `reference` | reference densities: built-in families and tabulated loading  |
//! | `partition` | partition function `Z_ν(γ, x̄)` and its moments               |
//! | `solver`    | dual objectives, γ-scans, constrained solves                  |
//! | `analysis`  | Rényi/KL/Tsallis divergences, escort transforms, duality      |
//! | `thermo`    | entropy, Lagrange multiplier, Legendre-structure checks       |
//! | `oracle`    | brute-force grid solver used to cross-check the dual route    |
//! | `suites`    | end-to-end verification suites shared with the CLI            |
//!
//! All integrals run through one adaptive Gauss–Kronrod engine that splits at
//! density breakpoints and handles algebraic endpoint singularities; see
//! `partition` for the convergence and divergence-detection contract.

pub mod analysis;
mod error;
pub mod interval;
pub mod oracle;
pub mod partition;
mod quadrature;
pub mod reference;
pub mod solver;
pub mod suites;
pub mod thermo;

pub use error::{Error, Result};
pub use interval::IntervalSet;
pub use reference::{Family, ReferenceDistribution};
