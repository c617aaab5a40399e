//! Numerical study of the Bogolubov-Hartree-Fock energy of the zero-momentum
//! Pauli-Fierz fiber over pure quasifree states.
//!
//! The one-photon space is a quadrature discretization of the momentum shell
//! sigma <= |k| <= Lambda times the two transversal polarizations.  Pure
//! quasifree states are parametrized either by Bogolubov blocks (U, V) plus a
//! displacement eta, or by a positive Hilbert-Schmidt operator z plus eta.
//! The crate evaluates the energy functional in all its equivalent forms,
//! provides analytic gradients with a finite-difference audit, minimizes over
//! the PSD cone (optionally restricted to the J-symmetric subspace), and
//! cross-checks everything against a truncated Fock-space oracle built from
//! raw ladder operators.

pub mod energy;
pub mod fockcheck;
pub mod grid;
pub mod hsops;
pub mod optimizer;
pub mod variational;

pub type C = num_complex::Complex<f64>;
pub type CMat = nalgebra::DMatrix<C>;
pub type CVec = nalgebra::DVector<C>;

/// Frobenius norm shorthand used by tolerance scales throughout.
pub fn fro(a: &CMat) -> f64 {
    a.norm()
}
