//! Constructive solver for three-dimensional transonic shock flows of the
//! steady isentropic Euler system with an external force in a rectangular
//! nozzle.
//!
//! The flow is split at an unknown shock surface. Upstream, a supersonic
//! perturbation of a 1-D background is marched across the nozzle. Downstream,
//! the subsonic flow and the shock surface are computed together by a
//! fixed-point iteration over a deformation-curl form of the system:
//!
//! 1. the background 1-D transonic shock and its exit-pressure/shock-position
//!    map ([`background`]),
//! 2. Rankine-Hugoniot data reduced to trace relations on the shock plane
//!    ([`shock`]),
//! 3. transport solves for the Bernoulli quantity and the axial vorticity
//!    along characteristics ([`transport`]),
//! 4. a div-curl velocity reconstruction with an auxiliary potential solved
//!    mode-by-mode with a nonlocal shock term ([`elliptic`]),
//! 5. an outer contraction-monitored iteration ([`driver`]) and an
//!    independent residual verification layer ([`verify`]).
//!
//! See the crate examples for runnable entry points per capability, and the
//! `transhock` binary for the batch CLI.

pub mod background;
pub mod driver;
pub mod error;
pub mod elliptic;
pub mod field;
pub mod force;
pub mod gas;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod mapping;
pub mod perturbation;
pub mod shock;
pub mod state;
pub mod sources;
pub mod transport;
pub mod upstream;

pub use error::{Error, Result};
