//! Exact input derivatives: value, gradient, and Hessian per evaluation point.
//!
//! Propagation pushes (value, Jacobian, Hessian) through each affine + tanh
//! layer using the second-order chain rule, so there is no truncation error.

use super::network::DenseNetwork;
use super::scalar::Scalar;
use crate::error::Result;

/// Value, input gradient, and input Hessian of a scalar field at one point.
///
/// The gradient is ordered like the network input; by convention the time
/// coordinate is last. The Hessian is stored row-major as a full symmetric
/// `n x n` matrix.
#[derive(Debug, Clone)]
pub struct Jet<S> {
    pub value: S,
    pub grad: Vec<S>,
    hess: Vec<S>,
}

pub type InputJet = Jet<f64>;

impl<S: Copy> Jet<S> {
    pub fn new(value: S, grad: Vec<S>, hess_row_major: Vec<S>) -> Self {
        let n = grad.len();
        assert_eq!(hess_row_major.len(), n * n, "hessian must be n x n");
        Jet {
            value,
            grad,
            hess: hess_row_major,
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> S {
        self.hess[i * self.dim() + j]
    }

    pub fn hess_row_major(&self) -> &[S] {
        &self.hess
    }
}

impl InputJet {
    /// Derivative with respect to the time coordinate (last input).
    pub fn dt(&self) -> f64 {
        *self.grad.last().expect("empty jet")
    }

    /// Derivative with respect to spatial coordinate `i`.
    pub fn dx(&self, i: usize) -> f64 {
        self.grad[i]
    }

    /// Trace of the leading `n_spatial x n_spatial` Hessian block.
    pub fn spatial_laplacian(&self, n_spatial: usize) -> f64 {
        (0..n_spatial).map(|i| self.hess(i, i)).sum()
    }

    /// Largest asymmetry `|H - H^T|` entry (diagnostic).
    pub fn hess_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.hess(i, j) - self.hess(j, i)).abs());
            }
        }
        worst
    }
}

/// Second-order propagation through the layers, generic over the scalar type.
pub(crate) fn propagate_jet<S: Scalar>(
    layer_sizes: &[usize],
    weights: &[Vec<S>],
    biases: &[Vec<S>],
    input: &[S],
) -> Jet<S> {
    let n = input.len();
    let n_layers = layer_sizes.len() - 1;
    let zero = input[0].lift(0.0);
    let one = input[0].lift(1.0);

    // Current layer state: values a[j], Jacobian ja[j*n + i], Hessian
    // ha[(j*n + i)*n + i2].
    let mut a: Vec<S> = input.to_vec();
    let mut ja: Vec<S> = vec![zero; n * n];
    for i in 0..n {
        ja[i * n + i] = one;
    }
    let mut ha: Vec<S> = vec![zero; n * n * n];

    for l in 0..n_layers {
        let (m, width) = (layer_sizes[l], layer_sizes[l + 1]);
        let hidden = l + 1 < n_layers;
        let w = &weights[l];
        let mut za = vec![zero; width];
        let mut jz = vec![zero; width * n];
        let mut hz = vec![zero; width * n * n];
        for k in 0..width {
            let row = &w[k * m..(k + 1) * m];
            let mut z = biases[l][k];
            for j in 0..m {
                z = z + row[j] * a[j];
            }
            for i in 0..n {
                let mut g = zero;
                for j in 0..m {
                    g = g + row[j] * ja[j * n + i];
                }
                jz[k * n + i] = g;
            }
            for i in 0..n {
                for i2 in 0..=i {
                    let mut h = zero;
                    for j in 0..m {
                        h = h + row[j] * ha[(j * n + i) * n + i2];
                    }
                    hz[(k * n + i) * n + i2] = h;
                    hz[(k * n + i2) * n + i] = h;
                }
            }
            za[k] = z;
        }
        if hidden {
            for k in 0..width {
                let y = za[k].tanh();
                let s1 = -(y * y).add_const(-1.0); // 1 - y^2
                let s2 = (y * s1).scale(-2.0);
                za[k] = y;
                for i in 0..n {
                    let gi = jz[k * n + i];
                    for i2 in 0..=i {
                        let gi2 = jz[k * n + i2];
                        let h = s2 * gi * gi2 + s1 * hz[(k * n + i) * n + i2];
                        hz[(k * n + i) * n + i2] = h;
                        hz[(k * n + i2) * n + i] = h;
                    }
                }
                for i in 0..n {
                    jz[k * n + i] = s1 * jz[k * n + i];
                }
            }
        }
        a = za;
        ja = jz;
        ha = hz;
    }

    Jet {
        value: a[0],
        grad: ja[..n].to_vec(),
        hess: ha[..n * n].to_vec(),
    }
}

impl DenseNetwork {
    /// Exact value, gradient, and Hessian with respect to the inputs.
    pub fn input_jet(&self, input: &[f64]) -> Result<InputJet> {
        if input.len() != self.input_dim() {
            return Err(crate::error::Error::contract(format!(
                "input length {} does not match network input dim {}",
                input.len(),
                self.input_dim()
            )));
        }
        let weights: Vec<Vec<f64>> = (0..self.num_layers())
            .map(|l| self.weight_matrix(l).to_vec())
            .collect();
        let biases: Vec<Vec<f64>> = (0..self.num_layers())
            .map(|l| self.bias_vector(l).to_vec())
            .collect();
        Ok(propagate_jet(self.layer_sizes(), &weights, &biases, input))
    }
}
