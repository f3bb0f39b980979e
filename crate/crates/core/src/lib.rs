//! Limited-feedback robust beamforming toolkit.
//!
//! The crate is organised along the processing chain:
//!
//! * [`channel`] generates temporally correlated multi-UE downlink channels
//!   from a clustered geometric model with Jakes-faded path gains.
//! * [`feedback`] emulates the codebook feedback loop: virtual antenna
//!   matrix, Type I PMI/CQI, coarse estimates, a Type II surrogate and the
//!   Gaussian-perturbed empirical channel distribution.
//! * [`cvae`] is a from-scratch conditional VAE (dense layers, batch norm,
//!   residual blocks, Adam) that maps coarse feedback to refined channel
//!   samples.
//! * [`beamforming`] holds the WMMSE, stochastic WMMSE (SSUM) and
//!   zero-forcing solvers together with the rate/MSE machinery.
//! * [`metrics`] provides principal angles and empirical CDFs.
//! * [`harness`] wires everything into reproducible experiments that emit
//!   plot-ready CSV files.
//!
//! Complex vectors are `nalgebra::DVector<Complex64>` throughout; see
//! [`CVector`].

pub mod beamforming;
pub mod channel;
pub mod cvae;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
