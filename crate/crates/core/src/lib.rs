//! Deformed differential calculi with generalized Hodge operators.
//!
//! The crate covers lattice and shift-operator calculi over commutative
//! coefficient functions, the Weyl algebra calculus, generalized harmonic
//! maps `d*A = 0` with their tower of conserved currents, and the Toda
//! lattice as the semi-discrete example.

pub mod coeff;
pub mod error;
pub mod form;
pub mod harmonic;
pub mod lattice;
pub mod par;
pub mod random;
pub mod report;
pub mod shift;
pub mod toda;
pub mod weyl;

pub use coeff::{Boundary, Coefficient, ExpSum, GridFunction, Window};
pub use error::{Error, Result};
pub use form::{Calculus, Form, RightForm, Word};
pub use lattice::{CalculusSpec, LatticeCalculus};
pub use report::{Check, Report};
pub use num_complex::Complex64 as C64;
