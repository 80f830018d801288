//! Joint uplink channel estimation and faulty-antenna detection for massive MIMO.
//!
//! The decorrelated pilot observation `Z = H + W + N` is split into a channel
//! matrix with line-spectral (few-direction) structure, a row-sparse corruption
//! from faulty base-station antennas, and dense Gaussian noise. Three
//! decomposers share one exchange-ADMM outer loop and differ only in the
//! channel proximal step:
//!
//! * `exAD`  - continuous atomic norm, solved through a Toeplitz-constrained SDP;
//! * `fsAD`  - atomic norm restricted to an `N`-point frequency grid (group lasso + FFT);
//! * `stPCP` - nuclear norm (singular value thresholding).
//!
//! Classical LS / LS-SLS / MMSE estimators, MRC / ZF receivers with their
//! fault-aware variants, and scoring metrics round out the crate.

pub mod baselines;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod prox;
pub mod receivers;
pub mod solvers;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
