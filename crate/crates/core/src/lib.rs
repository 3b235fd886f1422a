//! Exact numerical laboratory for entropy inequalities of Gibbs measures on
//! finite product spaces.
//!
//! Everything here works at desk scale by full enumeration: measures and
//! functions are dense arrays over a mixed-radix product space, conditional
//! distributions are computed from slices, and every inequality is checked
//! by evaluating both sides exactly rather than by sampling.
//!
//! The crate is organized around the heat-bath (Glauber) chain of a measure:
//!
//! - [`space`]: product spaces, measures, entropy/variance functionals,
//!   conditional and block-conditional expectations.
//! - [`model`]: Gibbs measures with bounded pair interactions (Ising,
//!   mean-field, Potts, interacting birth-death sites).
//! - [`coefficients`]: weak-dependence coefficients alpha/delta by
//!   exhaustive enumeration, the contraction scalars gamma/kappa, the
//!   interaction-strength scalars eps/q, and the tensorization constants
//!   they certify.
//! - [`dynamics`]: the heat-bath generator, Dirichlet form, uniformized
//!   semigroup, spectral gap, and semigroup integral identities.
//! - [`inequalities`]: checkers and lower-bound estimators for the AT, P,
//!   LS, and MLS inequalities, the implication audit between them, and the
//!   discrete-gradient inequality for birth-death products.
//! - [`covers`]: Shearer-type block-entropy estimates, their duals,
//!   Shannon-entropy identities, and subadditivity experiments.
//! - [`prooflab`]: pointwise checks for the logarithmic-mean machinery
//!   behind the contraction estimate.

// `!(x >= 0.0)` and friends are deliberate: unlike `x < 0.0` they also
// reject NaN, which is exactly what the numeric guards here want.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod covers;
pub mod dynamics;
pub mod error;
pub mod inequalities;
pub mod model;
pub mod optim;
pub mod prooflab;
pub mod rng;
pub mod space;

pub use error::{Error, Result};
pub use model::GibbsModel;
pub use optim::AscentBudget;
pub use space::{ConfigurationSpace, Field, Measure};
