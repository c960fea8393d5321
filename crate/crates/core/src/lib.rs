//! Moving-sample adaptive collocation for physics-informed neural networks.
//!
//! A solution network and a scalar velocity-potential network are trained in
//! alternation: the solution network minimizes the usual PINN residual loss,
//! while the potential network learns a velocity field whose induced flow
//! transports collocation samples toward regions of large squared residual.
//! New samples drawn at `t = 0` are advected along the learned flow and added
//! to the training set each outer iteration.

pub mod artifacts;
pub mod autodiff;
pub mod config;
pub mod domain;
pub mod error;
pub mod flow;
pub mod metrics;
pub mod numerics;
pub mod pde;
pub mod sampling;
pub mod seeds;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
