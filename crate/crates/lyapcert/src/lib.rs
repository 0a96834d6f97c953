// Index-style loops mirror the matrix formulas throughout the numeric
// kernels; iterator rewrites would obscure them.
#![allow(clippy::needless_range_loop)]

//! Convergence certification for fixed-parameter first-order methods.
//!
//! The pipeline: describe a method as a state-space recursion in feedback
//! with the subgradients of the objective components (`model`), build the
//! interpolation and structure matrices of its function classes (`interp`),
//! assemble the quadratic Lyapunov feasibility system and its worst-case
//! cross-checks (`certify`), decide them with an embedded dense
//! interior-point solver (`sdp`), drive bisection searches for tight rates
//! and parameter-region sweeps (`analyze`), and validate every returned
//! certificate against simulated trajectories (`simulate`).

pub mod analyze;
pub mod certify;
pub mod interp;
pub mod linalg;
pub mod model;
pub mod sdp;
pub mod simulate;

pub use certify::{Certificate, LowerBound, PresetKind};
pub use model::{Family, FunctionClass, Method, ValidationReport};
pub use sdp::{InteriorPoint, SdpOutcome, SdpProblem, SdpSolver, SdpStatus};
