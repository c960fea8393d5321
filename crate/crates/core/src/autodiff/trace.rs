//! Parameter gradients of scalar expressions built over one or more networks.
//!
//! A [`TracedNet`] registers every weight and bias as a tape leaf. Expressions
//! built from its `forward` / `input_jet` evaluations record the full
//! computation, including the second-order jet propagation, so the reverse
//! sweep differentiates *through* gradient and Hessian entries exactly.

use super::jet::{propagate_jet, Jet};
use super::network::{propagate_value, DenseNetwork, ParamVector};
use super::scalar::Scalar;
use super::tape::{check_finite, Tape, Var};
use crate::error::Result;

/// A network whose parameters are leaves on a tape.
pub struct TracedNet<'t> {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<Var<'t>>>,
    biases: Vec<Vec<Var<'t>>>,
}

impl DenseNetwork {
    /// Registers this network's parameters on `tape`, in flatten order.
    pub fn trace<'t>(&self, tape: &'t Tape) -> TracedNet<'t> {
        let weights: Vec<Vec<Var<'t>>> = (0..self.num_layers())
            .map(|l| self.weight_matrix(l).iter().map(|&w| tape.leaf(w)).collect())
            .collect();
        let biases: Vec<Vec<Var<'t>>> = (0..self.num_layers())
            .map(|l| self.bias_vector(l).iter().map(|&b| tape.leaf(b)).collect())
            .collect();
        TracedNet {
            layer_sizes: self.layer_sizes().to_vec(),
            weights,
            biases,
        }
    }
}

impl<'t> TracedNet<'t> {
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn lift_input(&self, input: &[f64]) -> Vec<Var<'t>> {
        assert_eq!(input.len(), self.input_dim(), "traced input dim mismatch");
        let anchor = self.weights[0][0];
        input.iter().map(|&x| anchor.lift(x)).collect()
    }

    /// Network output as a tape variable.
    pub fn forward(&self, input: &[f64]) -> Var<'t> {
        let input = self.lift_input(input);
        propagate_value(&self.layer_sizes, &self.weights, &self.biases, &input)
    }

    /// Full jet (value, gradient, Hessian) as tape variables.
    pub fn input_jet(&self, input: &[f64]) -> Jet<Var<'t>> {
        let input = self.lift_input(input);
        propagate_jet(&self.layer_sizes, &self.weights, &self.biases, &input)
    }

    fn param_vars(&self) -> impl Iterator<Item = &Var<'t>> {
        self.weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
    }
}

/// Exact reverse-mode gradient of a scalar expression with respect to every
/// parameter of every network in `nets`.
///
/// The closure receives traced counterparts of `nets` (same order) and returns
/// the scalar to differentiate. Returns one gradient per network, in the
/// flatten order of [`DenseNetwork::params`].
pub fn param_gradient_multi<F>(nets: &[&DenseNetwork], build: F) -> Result<Vec<ParamVector>>
where
    F: for<'t> FnOnce(&'t Tape, &[TracedNet<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let traced: Vec<TracedNet<'_>> = nets.iter().map(|n| n.trace(&tape)).collect();
    let output = build(&tape, &traced);
    check_finite(&tape, "parameter-gradient closure")?;
    let adj = tape.gradient(output);
    let grads = traced
        .iter()
        .map(|t| ParamVector(t.param_vars().map(|&v| adj.wrt(v)).collect()))
        .collect();
    Ok(grads)
}

/// Single-network convenience wrapper around [`param_gradient_multi`].
pub fn param_gradient<F>(net: &DenseNetwork, build: F) -> Result<ParamVector>
where
    F: for<'t> FnOnce(&'t Tape, &TracedNet<'t>) -> Var<'t>,
{
    let mut out = param_gradient_multi(&[net], |tape, traced| build(tape, &traced[0]))?;
    Ok(out.pop().unwrap())
}
