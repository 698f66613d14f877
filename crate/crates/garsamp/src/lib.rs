//! Likelihood bounding and generalized adaptive rejection sampling for
//! nonlinearly observed scalar signals.
//!
//! The library covers four layers:
//!
//! - [`model`]: noise potentials, branch-partitioned nonlinearities and the
//!   assembled system potential, with simple estimates and search intervals.
//! - [`bounds`]: certified lower bounds on the system potential (upper bounds
//!   on the likelihood) via minorant lines, iterative subdivision, a quadratic
//!   closed form, norm-inequality transforms and a two-tangent construction.
//! - [`envelope`]: piecewise-linear function algebra and piecewise-exponential
//!   densities with exact inversion sampling.
//! - [`samplers`]: fixed-bound rejection sampling, classic adaptive rejection
//!   sampling for convex potentials, its generalization to multimodal targets,
//!   and a two-coordinate Gibbs composition.
//!
//! All model and envelope values are immutable after construction; samplers
//! take an explicit seeded random source, so identical seeds reproduce
//! identical sample sequences.

pub mod bounds;
pub mod envelope;
pub mod error;
pub mod extended;
pub mod model;
pub mod numeric;
pub mod samplers;

pub use error::{Error, Result};
pub use extended::{Extended, Interval};
