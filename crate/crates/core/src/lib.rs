//! Weighted function spaces on the integer lattice, discrete Schwarz
//! rearrangement, and numerical extremals for weighted Sobolev and
//! Caffarelli–Kohn–Nirenberg type inequalities on `Z^N`.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix `f64`.

pub mod ckn;
pub mod elliptic;
pub mod equivalence;
pub mod error;
pub mod extend;
pub mod funcspace;
pub mod io;
pub mod lattice;
pub mod rearrange;
pub mod scalar;
pub mod suites;
pub mod varmin;

pub use ckn::{critical_q, quotient, validate, CknParams, CknSpec, KParams, Regime, SParams};
pub use elliptic::{el_residual, ground_state_k, ground_state_s, Equation, GroundState, Residual};
pub use equivalence::{
    cutoff_gradient_norm, cutoff_scan, decay_exponent_fit, make_cutoff, CutoffSample, CutoffSpec, DecayFit,
};
pub use error::{Error, Result};
pub use extend::{
    barycentric_coeffs, equivalence_ratios, evaluate_extension, extension_grad_lp_norm, extension_lp_norm,
    EquivalenceSummary, QuadratureRule,
};
pub use funcspace::{
    d1p_energy, d1p_norm, distribution, grad_norm_at, lp_norm, p_laplacian, DistributionProfile, LatticeFunction,
};
pub use io::{read_function, write_function, FunctionDocument, RunReport};
pub use lattice::{decompose, directions, distance, neighbors, weight, Direction, LatticeBox, LatticePoint, Line, Parity};
pub use rearrange::{is_schwarz_symmetric, one_step, schwarz, schwarz_with_stats, SweepConfig};
pub use scalar::Scalar;
pub use suites::{run_suite, Suite, SuiteOutcome};
pub use varmin::{minimize, minimize_k, minimize_s, BoxSummary, MinimizeResult, Problem, SolverConfig};

pub type LatticeFunction64 = LatticeFunction<f64>;
pub type LatticeFunction32 = LatticeFunction<f32>;
pub type MinimizeResult64 = MinimizeResult<f64>;
pub type GroundState64 = GroundState<f64>;
