//! Numerical verification of Haantjes-geometric structures on symplectic charts.
//!
//! The crate works pointwise: scalar fields are [`Expression`]s over the
//! canonical variables of a [`Chart`], and every geometric claim (vanishing
//! torsion, chain equations, involution, block structure) is checked by
//! evaluating exact forward-mode derivatives at sample points.
//!
//! Module map:
//!
//! * [`expr`] parses, prints and differentiates expressions (hyper-dual jets).
//! * [`phasespace`] holds charts, the Darboux matrix and the bracket tests.
//! * [`tensor`] computes Nijenhuis and Haantjes torsions of operator fields.
//! * [`algebra`] does the pointwise spectral analysis of Haantjes algebras.
//! * [`chains`] verifies and constructs Haantjes chains.
//! * [`stackel`] builds generalized Stäckel systems and their operators.
//! * [`transform`] handles canonical chart maps, block forms and flows.
//!
//! The crate is `no_std` (it needs `alloc`); enable the `std` feature to get
//! `std::error::Error` through the usual re-exports and `serde` for report
//! serialization.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod algebra;
pub mod chains;
mod error;
pub mod expr;
pub mod linalg;
mod math;
pub mod phasespace;
pub mod report;
pub mod sampling;
pub mod stackel;
pub mod tensor;
pub mod transform;

pub use crate::error::{Error, Result};
pub use crate::expr::{Expression, Jet1, Jet2, Point};
pub use crate::phasespace::Chart;
pub use crate::report::{Check, VerificationReport};
pub use crate::tensor::{OperatorField, Torsion3};

/// Default absolute tolerance applied to normalized residuals.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default number of sample points per check.
pub const DEFAULT_SAMPLES: usize = 64;
/// Default seed of the deterministic sampler.
pub const DEFAULT_SEED: u64 = 0x4841_414e;
