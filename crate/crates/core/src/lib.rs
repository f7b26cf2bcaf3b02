//! Geodesic connectedness of multiwarped spacetimes `I × F₁ × … × Fₙ` with
//! metric `−dτ² + Σ fᵢ² gᵢ`.
//!
//! The crate decides whether two points can be joined by a geodesic, and
//! constructs the joining geodesic when one exists:
//!
//! * [`model`] holds spacetime descriptions and a catalogue of examples,
//! * [`funcparse`] parses user warp expressions and differentiates them,
//! * [`quad`] evaluates the singular fiber-progress integrals, with turning
//!   points and reflections,
//! * [`causal`] solves the causal connection system and certifies the
//!   endpoint-divergence conditions,
//! * [`connect`] traces zero sets of the matching defects and runs the full
//!   pipeline,
//! * [`oracle`] re-checks every answer by integrating the geodesic ODE.
// Negated float comparisons are deliberate: they send NaN down the reject path.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]


pub mod funcparse;
pub mod model;
mod numeric;
pub mod quad;
pub mod causal;
pub mod connect;
pub mod oracle;

pub use model::{
    de_sitter_grw, fiber_length_menu, minkowski_strip, reissner_nordstrom_intermediate,
    schwarzschild_interior, End, EndpointAsymptote, FiberKind, FiberSpec, Interval, ModelError,
    NormalizationMap, SpacetimeModel,
};
pub use causal::{check_conditions, classify_causal, CausalKind, ConditionReport};
pub use connect::{connect, ConnectOptions, ConnectionReport, ConnectionStatus, GeodesicCandidate, Problem};
pub use oracle::{integrate_geodesic, verify_connection, StopSpec, Trajectory, VerifyReport};
pub use quad::CoefficientVector;
