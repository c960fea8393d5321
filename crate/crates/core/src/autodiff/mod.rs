//! Dense tanh networks with exact derivatives.
//!
//! Three evaluation paths share one set of propagation rules:
//!
//! - [`DenseNetwork::forward`] / [`DenseNetwork::input_jet`]: plain `f64`
//!   evaluation of the value and its exact input gradient / Hessian.
//! - [`param_gradient`]: reverse-mode differentiation of scalar closures with
//!   respect to network parameters, including closures that read jet entries
//!   (the nested-differentiation path required by the residual losses).
//! - [`DenseNetwork::channel_eval`] / [`DenseNetwork::channel_backprop`]:
//!   fused value/gradient/Laplacian channels with a hand-written adjoint,
//!   used by the training loop and cross-checked against the tape.

mod channels;
mod jet;
mod network;
mod scalar;
mod tape;
mod trace;

pub use channels::{ChannelJet, ChannelSpec, ChannelWorkspace};
pub use jet::{InputJet, Jet};
pub use network::{init_network, network_from_params, DenseNetwork, ParamVector};
pub use scalar::Scalar;
pub use tape::{Adjoints, Tape, Var};
pub use trace::{param_gradient, param_gradient_multi, TracedNet};
