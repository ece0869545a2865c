//! Martingale-transform projection operators on the flat torus.
//!
//! The crate computes operators of the form
//!
//! ```text
//! S_A f = Σ_ij ∫_0^∞ P_t X_i* A_ij(t) X_j P_t f dt
//! ```
//!
//! along two independent routes:
//!
//! * [`spectral`]: exact per-mode computation on `T^d = [0,1)^d` with the
//!   Fourier basis `e_k(x) = exp(2πi k·x)` and generator `L = ½Δ + V`
//!   (constant `V ≤ 0`), plus SU(2) class-function multipliers;
//! * [`projection`]: the probabilistic construction from Brownian paths
//!   ([`diffusion`]), Feynman-Kac weights, transformed Itô sums and a
//!   histogram conditional expectation.
//!
//! [`martingale`] hosts the discrete and continuous martingale machinery
//! (transforms, differential subordination, exponentially weighted
//! integrals), [`normest`] the `L^p → L^p` lower-bound estimator, and
//! [`constants`] every explicit constant the bounds are checked against.

pub mod constants;
pub mod diffusion;
pub mod error;
pub mod io;
pub mod martingale;
pub mod normest;
pub mod projection;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use constants::{ConstantBounds, ExponentPair};
pub use diffusion::{EnsembleSpec, FeynmanKacWeights, InitialLaw, PathEnsemble, Potential};
pub use error::{Error, Result};
pub use martingale::{DiscreteMartingalePath, MatrixWeightedProcess, PredictableSequence, WeightedProcess};
pub use normest::{NormEstimate, OperatorHandle, OperatorKind};
pub use projection::{PairingEstimate, ProjectionEstimate};
pub use spectral::{FourierField, GridField, MultiplierSymbol, SU2ClassFunction};
pub use stats::MeanSe;
