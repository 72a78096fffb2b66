//! Online control of linear dynamical systems with spectral filters.
//!
//! The controller learns `u_t = sum_i sigma_i^{1/4} M_i W~_{t-1:t-m} phi_i`,
//! where `phi_i` are the top eigenvectors of a fixed Hankel matrix and
//! `W~` stacks the last `m` disturbances, by projected online gradient
//! descent on a memory-less surrogate loss.

pub mod controllers;
pub mod error;
pub mod experiment;
pub mod fastconv;
pub mod filters;
pub mod lds;
pub mod learner;
pub mod linalg;
pub mod par;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
