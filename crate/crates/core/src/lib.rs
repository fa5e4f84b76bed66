//! Exactly solvable Fokker-Planck equations built on exceptional orthogonal
//! polynomials.
//!
//! Layers, from the bottom up:
//! - [`specfun`]: log-gamma and classical Laguerre/Jacobi polynomials;
//! - [`xpoly`]: the four exceptional families, their deforming functions and
//!   normalizations;
//! - [`quadrature`]: Gauss-Legendre rules and Gram matrices;
//! - [`spectral`]: drift fields, eigenfunctions and the spectral series for
//!   the density;
//! - [`sde`]: Euler-Maruyama sampling of the Langevin equation;
//! - [`verify`]: numerical self-checks of the whole stack.

pub mod cli;
pub mod error;
pub mod quadrature;
pub mod sde;
pub mod specfun;
pub mod spectral;
pub mod verify;
pub mod xpoly;

pub use error::{Error, Result};
pub use spectral::{PdfSeries, PdfValue};
pub use xpoly::{Family, ModelParams};
