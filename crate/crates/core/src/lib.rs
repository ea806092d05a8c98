//! Second-order perturbative dynamics of finite-dimensional (qudit) particle
//! detectors coupled to a massless scalar field in 3+1 Minkowski spacetime,
//! evaluated along uniformly accelerated worldlines.
//!
//! The crate is organised bottom-up:
//!
//! * [`qudit_algebra`] builds detector models (spin-j and Heisenberg-Weyl),
//!   density matrices and the X/O block split.
//! * [`wightman`] evaluates pulled-back two-point functions, the
//!   vacuum/regular split, and the windowed power-spectrum (KMS) ratio.
//! * [`response_integrals`] computes every Gaussian-switched double-time
//!   transform of the Wightman function through a single factorised
//!   one-dimensional primitive.
//! * [`perturbation`] assembles the order-λ² correction of the detector
//!   state for any model and initial state, and carries hand-transcribed
//!   qutrit/ququint reference matrices.
//! * [`diagnostics`] turns corrections into transition probabilities,
//!   excitation-to-deexcitation ratios, trace distances and secular fits.
//! * [`cli`] parses run configurations and writes CSV reports.
//!
//! Units are natural (ħ = c = 1). All response integrals are returned with
//! the coupling λ² stripped; it re-enters only when a state is assembled.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod perturbation;
pub mod quadrature;
pub mod qudit_algebra;
pub mod response_integrals;
pub mod special;
pub mod wightman;

pub use error::{Error, Result};

/// Dense complex matrix used for detector operators and states.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
