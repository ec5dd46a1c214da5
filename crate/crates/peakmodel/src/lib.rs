//! Finite spectral realization of the peak model for triplet extensions of
//! rank-`d` singular perturbations.
//!
//! Every operator lives in the eigenbasis of a self-adjoint `L` with a finite
//! spectrum, so functions of `L` are diagonal and all boundary-triple objects
//! reduce to small dense matrices.

pub mod cli;
pub mod config;
pub mod error;
pub mod extensions;
pub mod gram;
pub mod linalg;
pub mod omega;
pub mod peak;
pub mod perturbation;
pub mod reference;
pub mod samples;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use extensions::{LinearRelationFD, Triple};
pub use gram::GramData;
pub use peak::{ExtendedVector, PeakSpace, PeakVector};
pub use perturbation::{AdmissibleMode, FunctionalFamily, Setup};
pub use spectral::{RegularSet, Scaling, SpectralModel};

pub type C64 = num_complex::Complex64;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;
