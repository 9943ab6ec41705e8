//! Numerical toolkit for one-dimensional Schrödinger operators `-d²/dx² + μ`
//! whose potential `μ` is a measure assembled from finitely many pieces laid
//! out along a substitution sequence.
//!
//! The crate builds the potentials ([`measure`], [`subshift`],
//! [`suspension`]), propagates solutions and transfer matrices through them
//! ([`propagator`]), estimates Lyapunov exponents and their uniformity over
//! the hull ([`lyapunov`]), and approximates the spectrum in several
//! independent ways ([`spectral`]). [`config`] and [`runner`] drive complete
//! experiments from a text configuration.

pub mod config;
pub mod error;
pub mod lyapunov;
pub mod measure;
pub mod par;
pub mod propagator;
pub mod runner;
pub mod spectral;
pub mod subshift;
pub mod suspension;

pub use error::{Error, Result};
