//! Numerical study of fiducial (model) solutions of the two-spinor
//! Seiberg-Witten equations on a solid tube `S¹ × D` around a singular
//! circle, in the regime where the spinor is a de-singularized
//! Z₂-harmonic spinor.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! profile  ->  fiducial  ->  disk  ->  tube
//! ```
//!
//! * [`algebra`] — exact pointwise linear algebra of the fiber
//!   `V = C² ⊗ H`: Clifford multiplication, moment maps, the real
//!   structure `τ`, and the determinant.
//! * [`profile`] — the distinguished radial profile `H(ρ)` solving the
//!   scale-invariant sinh-Gordon equation `(ρ∂ρ)²H = (9/8)ρ³ sinh 2H`,
//!   with its connection coefficient `f = 1/4 + ρH'/2`.
//! * [`fiducial`] — the limiting configuration `(Φ₀, A₀)`, its
//!   de-singularization `(Φ^h, A^h)` at parameter `ε`, and the residual
//!   by which the de-singularized pair fails to solve the equations.
//! * [`disk`] — two-dimensional boundary value problems on disks:
//!   Cauchy-Riemann operators with spectral (APS) boundary conditions,
//!   the scale-invariant normal operator with twisted boundary
//!   conditions, its kernel, and the gauge Laplacian.
//! * [`tube`] — the three-dimensional linearization `σ_t ∂_t + N_t`
//!   with mixed boundary and projection constraints, spectral scans,
//!   Weitzenböck identities, and the Newton correction to discrete
//!   solutions.
//! * [`report`] — experiment orchestration: config files, deterministic
//!   runs, CSV/JSON artifacts, and the claims table.

pub mod algebra;
pub mod disk;
pub mod fiducial;
pub mod grid;
pub mod num;
pub mod profile;
pub mod report;
pub mod tube;

pub use num_complex::Complex64;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Newton relaxation failed to reach the requested tolerance.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    /// The requested tolerance is unreachable at this resolution.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    /// Evaluation outside the stored radial range.
    #[error("radial argument out of range: rho = {rho}, rho_max = {rho_max}")]
    OutOfRange { rho: f64, rho_max: f64 },
    /// Input data violates a standing assumption (e.g. |c|²+|d|² > 0).
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    /// Profile evaluation requested beyond the documented tail validity.
    #[error("profile range exceeded: {0}")]
    ProfileRangeExceeded(String),
    /// A weight hitting an indicial root of a mode operator.
    #[error("resonant weight: nu = {0}")]
    ResonantWeight(f64),
    /// Singular-value gap too small to declare a kernel dimension.
    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),
    /// Mode truncation too small for the requested constraint set.
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    /// Kantorovich-type contraction check failed.
    #[error("contraction failure: {0}")]
    ContractionFailure(String),
    /// A referenced artifact is missing on disk.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    /// Malformed configuration or input file.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// I/O error with context.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
