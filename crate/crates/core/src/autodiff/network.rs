//! Dense tanh networks and their flattened parameter vectors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Weight matrix `l` has shape `(layer_sizes[l+1], layer_sizes[l])`, stored
/// row-major. Biases are zero-initialized; weights are Glorot-uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    seed: u64,
}

/// Flat view of all weights (layer order) followed by all biases (layer order).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::config(format!(
            "need at least input and output layers, got {:?}",
            layer_sizes
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::config(format!(
            "layer sizes must be positive, got {:?}",
            layer_sizes
        )));
    }
    Ok(())
}

/// Glorot-uniform network with zero biases, deterministic in `seed`.
pub fn init_network(layer_sizes: &[usize], seed: u64) -> Result<DenseNetwork> {
    validate_layer_sizes(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for l in 0..layer_sizes.len() - 1 {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        weights.push(w);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(DenseNetwork {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        seed,
    })
}

impl DenseNetwork {
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn weight_matrix(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub(crate) fn bias_vector(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn param_count(&self) -> usize {
        let w: usize = self.weights.iter().map(Vec::len).sum();
        let b: usize = self.biases.iter().map(Vec::len).sum();
        w + b
    }

    /// All weights (layer order), then all biases (layer order).
    pub fn params(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        for w in &self.weights {
            out.extend_from_slice(w);
        }
        for b in &self.biases {
            out.extend_from_slice(b);
        }
        ParamVector(out)
    }

    pub fn set_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::contract(format!(
                "parameter vector length {} does not match network parameter count {}",
                params.len(),
                self.param_count()
            )));
        }
        if let Some(bad) = params.0.iter().find(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite parameter {bad}")));
        }
        let mut it = params.0.iter();
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Sets every weight and bias to zero (useful for test doubles).
    pub fn zeroed(&self) -> DenseNetwork {
        let mut net = self.clone();
        for w in &mut net.weights {
            w.fill(0.0);
        }
        for b in &mut net.biases {
            b.fill(0.0);
        }
        net
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.layer_sizes[0] {
            return Err(Error::contract(format!(
                "input length {} does not match network input dim {}",
                input.len(),
                self.layer_sizes[0]
            )));
        }
        Ok(())
    }

    /// Scalar network output at `input`.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        let mut a = input.to_vec();
        let mut next = Vec::new();
        for l in 0..self.num_layers() {
            let (m, n) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let hidden = l + 1 < self.num_layers();
            next.clear();
            next.resize(n, 0.0);
            for k in 0..n {
                let mut z = self.biases[l][k];
                let row = &w[k * m..(k + 1) * m];
                for (j, &x) in a.iter().enumerate() {
                    z += row[j] * x;
                }
                next[k] = if hidden { z.tanh() } else { z };
            }
            std::mem::swap(&mut a, &mut next);
        }
        Ok(a[0])
    }
}

/// Generic value propagation used by the tape path.
pub(crate) fn propagate_value<S: Scalar>(
    layer_sizes: &[usize],
    weights: &[Vec<S>],
    biases: &[Vec<S>],
    input: &[S],
) -> S {
    let n_layers = layer_sizes.len() - 1;
    let mut a: Vec<S> = input.to_vec();
    for l in 0..n_layers {
        let (m, n) = (layer_sizes[l], layer_sizes[l + 1]);
        let hidden = l + 1 < n_layers;
        let mut next = Vec::with_capacity(n);
        for k in 0..n {
            let mut z = biases[l][k];
            for j in 0..m {
                z = z + weights[l][k * m + j] * a[j];
            }
            next.push(if hidden { z.tanh() } else { z });
        }
        a = next;
    }
    a[0]
}

/// On-disk checkpoint schema.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: String,
    seed: u64,
}

impl DenseNetwork {
    pub fn to_checkpoint_json(&self) -> Result<String> {
        let ck = Checkpoint {
            layer_sizes: self.layer_sizes.clone(),
            weights: self.weights.clone(),
            biases: self.biases.clone(),
            activation: "tanh".to_string(),
            seed: self.seed,
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_checkpoint_json(json: &str) -> Result<DenseNetwork> {
        let ck: Checkpoint = serde_json::from_str(json)?;
        if ck.activation != "tanh" {
            return Err(Error::config(format!(
                "unsupported activation '{}'",
                ck.activation
            )));
        }
        validate_layer_sizes(&ck.layer_sizes)?;
        for l in 0..ck.layer_sizes.len() - 1 {
            let (m, n) = (ck.layer_sizes[l], ck.layer_sizes[l + 1]);
            if ck.weights.get(l).map(Vec::len) != Some(m * n) {
                return Err(Error::config(format!("weight matrix {l} has wrong shape")));
            }
            if ck.biases.get(l).map(Vec::len) != Some(n) {
                return Err(Error::config(format!("bias vector {l} has wrong length")));
            }
        }
        Ok(DenseNetwork {
            layer_sizes: ck.layer_sizes,
            weights: ck.weights,
            biases: ck.biases,
            seed: ck.seed,
        })
    }

    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_json()?)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &std::path::Path) -> Result<DenseNetwork> {
        let text = std::fs::read_to_string(path)?;
        DenseNetwork::from_checkpoint_json(&text)
    }
}

/// Builds a network from explicit parameters (primarily for tests).
pub fn network_from_params(
    layer_sizes: &[usize],
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
) -> Result<DenseNetwork> {
    validate_layer_sizes(layer_sizes)?;
    for l in 0..layer_sizes.len() - 1 {
        let (m, n) = (layer_sizes[l], layer_sizes[l + 1]);
        if weights.get(l).map(Vec::len) != Some(m * n) {
            return Err(Error::contract(format!("weight matrix {l} has wrong shape")));
        }
        if biases.get(l).map(Vec::len) != Some(n) {
            return Err(Error::contract(format!("bias vector {l} has wrong length")));
        }
    }
    Ok(DenseNetwork {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let net = init_network(&[2, 64, 64, 64, 1], 7).unwrap();
        // 2*64 + 64*64 + 64*64 + 64*1 weights, 64*3 + 1 biases.
        assert_eq!(net.param_count(), 8384 + 193);
        assert_eq!(net.params().len(), 8577);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = init_network(&[2, 8, 1], 7).unwrap();
        let b = init_network(&[2, 8, 1], 7).unwrap();
        assert_eq!(a.params().0, b.params().0);
        let c = init_network(&[2, 8, 1], 8).unwrap();
        assert_ne!(a.params().0, c.params().0);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let net = init_network(&[3, 16, 1], 42).unwrap();
        let bound0 = (6.0 / 19.0f64).sqrt();
        for &w in net.weight_matrix(0) {
            assert!(w.abs() < bound0);
        }
        assert!(net.bias_vector(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn bad_layer_sizes_rejected() {
        assert!(init_network(&[3], 0).is_err());
        assert!(init_network(&[3, 0, 1], 0).is_err());
        assert!(init_network(&[], 0).is_err());
    }

    #[test]
    fn forward_zero_net_is_zero() {
        let net = init_network(&[2, 8, 8, 1], 1).unwrap().zeroed();
        assert_eq!(net.forward(&[0.3, -0.7]).unwrap(), 0.0);
    }

    #[test]
    fn forward_hand_case_one_hidden_unit() {
        // [1,1,1] with unit weights and zero biases: identity output layer,
        // so f(x) = tanh(x).
        let net =
            network_from_params(&[1, 1, 1], vec![vec![1.0], vec![1.0]], vec![vec![0.0], vec![0.0]])
                .unwrap();
        assert_eq!(net.forward(&[0.0]).unwrap(), 0.0);
        let got = net.forward(&[1.0]).unwrap();
        assert!((got - 1.0f64.tanh()).abs() < 1e-15, "got {got}");
    }

    #[test]
    fn forward_dimension_mismatch() {
        let net = init_network(&[2, 4, 1], 0).unwrap();
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn params_roundtrip_identity() {
        let net = init_network(&[3, 5, 4, 1], 11).unwrap();
        let p = net.params();
        let mut other = init_network(&[3, 5, 4, 1], 99).unwrap();
        other.set_params(&p).unwrap();
        assert_eq!(other.params(), p);
        assert_eq!(other.forward(&[0.1, 0.2, 0.3]).unwrap(), net.forward(&[0.1, 0.2, 0.3]).unwrap());
    }

    #[test]
    fn checkpoint_roundtrip_bit_exact() {
        let net = init_network(&[2, 16, 16, 1], 3).unwrap();
        let json = net.to_checkpoint_json().unwrap();
        let back = DenseNetwork::from_checkpoint_json(&json).unwrap();
        assert_eq!(net, back);
        // Bit-exactness: every f64 must survive the decimal round trip.
        let (a, b) = (net.params(), back.params());
        for (x, y) in a.0.iter().zip(&b.0) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn set_params_rejects_non_finite() {
        let mut net = init_network(&[1, 2, 1], 0).unwrap();
        let mut p = net.params();
        p.0[0] = f64::NAN;
        assert!(net.set_params(&p).is_err());
    }
}
