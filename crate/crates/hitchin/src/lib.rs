//! Spectral-curve separation of variables for Hitchin-type integrable
//! systems on hyperelliptic curves `y^2 = P_{2g+1}(x)`, for the classical
//! Lie series A/B/C/D.
//!
//! The crate builds the family of spectral curves
//! `R(x, y, l; H) = l^n + sum_i r_i(x, y) l^{n - d_i}`,
//! recovers the Hamiltonian vector `H` from a separating divisor of `N`
//! points, evaluates and normalizes the differentials of the angle
//! coordinates by numerical Abelian integrals, integrates the induced
//! Hamiltonian flows, and cross-checks the integer invariants (branch
//! point counts, genera, dimension identities) along the way.

pub mod algebra;
pub mod curves;
pub mod diffs;
pub mod dynamics;
pub mod jsonio;
pub mod lie;
pub mod periods;
pub mod product;
pub mod quad;
pub mod sampling;
pub mod sov;
pub mod spectral;
pub mod track;
pub mod verify;

pub use num_complex::Complex64;

/// Crate-wide error type. Variants mirror the failure modes of the
/// numerical kernels so callers can react to them individually.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("root finding on the zero polynomial")]
    ZeroPolynomial,
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },
    #[error("singular matrix (no pivot above threshold)")]
    SingularMatrix,
    #[error("base polynomial has a multiple root; the curve is singular")]
    NotSquarefree,
    #[error("unsupported rank: {0}")]
    UnsupportedRank(String),
    #[error("operation not implemented for this Lie type: {0}")]
    UnsupportedSeries(String),
    #[error("total x-derivative undefined at a base branch point (y = 0) with y-dependent coefficients")]
    BranchPointDerivative,
    #[error("non-generic Hamiltonian data: {0}")]
    NonGeneric(String),
    #[error("Riemann-Hurwitz parity violated: n={sheets}, g={base_genus}, nu={branch_points}")]
    ParityError {
        sheets: usize,
        base_genus: usize,
        branch_points: usize,
    },
    #[error("elimination degenerated: {0}")]
    EliminationDegenerate(String),
    #[error("sheet tracking lost near x = {x} ({detail})")]
    TrackingLoss { x: Complex64, detail: String },
    #[error("period matrix numerically singular")]
    SingularPeriodMatrix,
    #[error("step size collapsed at t = {time:.6e}; trajectory too close to a branch point")]
    StepCollapse { time: f64 },
    #[error("holomorphy probe hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid input: {0}")]
    BadInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
