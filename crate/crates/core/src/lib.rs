//! Ground-state equilibria of the trigonometric and rational BC-type
//! Ruijsenaars-Schneider systems.
//!
//! The equilibrium positions are the zeros of Askey-Wilson (trigonometric) or
//! rescaled Wilson (rational) polynomials. The crate computes those zeros and
//! checks them against the Bethe-type equations, the Hamiltonian, and the
//! difference equation satisfied by the polynomials.

pub mod equilibrium;
pub mod error;
mod mp;
pub mod polynomials;
pub mod qseries;
pub mod roots;

pub use equilibrium::{PhasePoint, VerificationReport};
pub use error::{Error, Result};
pub use polynomials::{
    AWParams, Coupling, CouplingParams, EvalRoute, Mode, PolyEval, WilsonParams,
};
pub use roots::{Configuration, RootFindSettings};
