//! Numerical laboratory for dilute Bose gas trial states on small momentum tori.

pub mod bridge;
pub mod checks;
pub mod error;
pub mod excitation;
pub mod fock;
pub mod gibbs;
pub mod numerics;
pub mod potential;
pub mod scattering;
pub mod thermo;

pub use error::{Error, Result};
pub use potential::{Majorant, Mollifier, RadialPotential};
pub use scattering::{ScatteringSolution, WNorms};
