//! Fused derivative channels for the training hot path.
//!
//! Residual losses need the value, first derivatives, and the *spatial
//! Laplacian* of the network output, never the full Hessian. All of these
//! propagate through an affine + tanh layer together:
//!
//! - value:      `y = tanh(z)`
//! - gradient:   `y_c = s1 * z_c`
//! - Laplacian:  `y_L = s2 * sum_spatial(z_c^2) + s1 * z_L`
//!
//! with `s1 = 1 - y^2`, `s2 = -2 y s1`. [`DenseNetwork::channel_backprop`]
//! is the exact hand-written adjoint of this propagation; it is oracle-tested
//! against the tape in this module's tests.

use super::network::DenseNetwork;

/// Which derivative channels to propagate.
///
/// Gradient channels cover the first `n_grad` input coordinates (time is the
/// last input, so `n_grad = n_inputs` includes it and `n_grad = n_inputs - 1`
/// excludes it). The Laplacian runs over the first `n_spatial` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelSpec {
    pub n_inputs: usize,
    pub n_grad: usize,
    pub n_spatial: usize,
    pub laplacian: bool,
}

impl ChannelSpec {
    /// Value + all first derivatives + spatial Laplacian.
    pub fn full(n_inputs: usize, n_spatial: usize) -> Self {
        ChannelSpec {
            n_inputs,
            n_grad: n_inputs,
            n_spatial,
            laplacian: true,
        }
    }

    /// Value + all first derivatives.
    pub fn gradient(n_inputs: usize) -> Self {
        ChannelSpec {
            n_inputs,
            n_grad: n_inputs,
            n_spatial: 0,
            laplacian: false,
        }
    }

    /// Value + spatial first derivatives + spatial Laplacian (no time
    /// derivative); what the velocity potential needs.
    pub fn spatial(n_inputs: usize, n_spatial: usize) -> Self {
        ChannelSpec {
            n_inputs,
            n_grad: n_spatial,
            n_spatial,
            laplacian: true,
        }
    }

    fn channels(&self) -> usize {
        1 + self.n_grad + usize::from(self.laplacian)
    }

    fn lap_idx(&self) -> usize {
        1 + self.n_grad
    }
}

/// Output of a channel evaluation.
#[derive(Debug, Clone)]
pub struct ChannelJet {
    pub value: f64,
    /// Derivatives for the first `n_grad` input coordinates.
    pub grad: Vec<f64>,
    /// Spatial Laplacian (0 when not requested).
    pub laplacian: f64,
}

impl ChannelJet {
    pub fn zeros(n_grad: usize) -> Self {
        ChannelJet {
            value: 0.0,
            grad: vec![0.0; n_grad],
            laplacian: 0.0,
        }
    }
}

/// Reusable buffers holding the forward state needed by the backward pass.
pub struct ChannelWorkspace {
    spec: ChannelSpec,
    sizes: Vec<usize>,
    /// Post-activation channels per layer, `a[0]` being the input channels.
    a: Vec<Vec<f64>>,
    /// Pre-activation channels per layer.
    z: Vec<Vec<f64>>,
    zbar: Vec<f64>,
    abar: Vec<f64>,
}

impl ChannelWorkspace {
    pub fn new(net: &DenseNetwork, spec: ChannelSpec) -> Self {
        assert_eq!(spec.n_inputs, net.input_dim(), "spec does not match network");
        assert!(spec.n_grad <= spec.n_inputs && spec.n_spatial <= spec.n_grad);
        assert!(!spec.laplacian || spec.n_spatial > 0);
        let sizes = net.layer_sizes().to_vec();
        let c = spec.channels();
        let a = sizes.iter().map(|&s| vec![0.0; s * c]).collect();
        let z = sizes[1..].iter().map(|&s| vec![0.0; s * c]).collect();
        let widest = *sizes.iter().max().unwrap();
        ChannelWorkspace {
            spec,
            sizes,
            a,
            z,
            zbar: vec![0.0; widest * c],
            abar: vec![0.0; widest * c],
        }
    }

    pub fn spec(&self) -> ChannelSpec {
        self.spec
    }
}

/// `z[k] = b[k] + sum_j w[k, j] a[j]` across all channels, with a
/// compile-time channel count so the inner loop unrolls.
fn affine_channels<const C: usize>(w: &[f64], b: &[f64], a_prev: &[f64], z: &mut [f64], m: usize, n: usize) {
    for k in 0..n {
        let mut acc = [0.0f64; C];
        acc[0] = b[k];
        let row = &w[k * m..(k + 1) * m];
        for (j, &wkj) in row.iter().enumerate() {
            let aj = &a_prev[j * C..j * C + C];
            for ci in 0..C {
                acc[ci] += wkj * aj[ci];
            }
        }
        z[k * C..k * C + C].copy_from_slice(&acc);
    }
}

fn dispatch_affine(c: usize, w: &[f64], b: &[f64], a_prev: &[f64], z: &mut [f64], m: usize, n: usize) {
    match c {
        1 => affine_channels::<1>(w, b, a_prev, z, m, n),
        2 => affine_channels::<2>(w, b, a_prev, z, m, n),
        3 => affine_channels::<3>(w, b, a_prev, z, m, n),
        4 => affine_channels::<4>(w, b, a_prev, z, m, n),
        5 => affine_channels::<5>(w, b, a_prev, z, m, n),
        6 => affine_channels::<6>(w, b, a_prev, z, m, n),
        7 => affine_channels::<7>(w, b, a_prev, z, m, n),
        8 => affine_channels::<8>(w, b, a_prev, z, m, n),
        9 => affine_channels::<9>(w, b, a_prev, z, m, n),
        10 => affine_channels::<10>(w, b, a_prev, z, m, n),
        _ => {
            for k in 0..n {
                let mut acc = vec![0.0f64; c];
                acc[0] = b[k];
                let row = &w[k * m..(k + 1) * m];
                for (j, &wkj) in row.iter().enumerate() {
                    let aj = &a_prev[j * c..j * c + c];
                    for (ac, &av) in acc.iter_mut().zip(aj) {
                        *ac += wkj * av;
                    }
                }
                z[k * c..k * c + c].copy_from_slice(&acc);
            }
        }
    }
}

/// Weight/bias adjoints and the propagated input adjoint of one affine stage.
fn affine_adjoint<const C: usize>(
    w: &[f64],
    zbar: &[f64],
    a_prev: &[f64],
    wbar: &mut [f64],
    bbar: &mut [f64],
    abar: &mut [f64],
    m: usize,
    n: usize,
    want_abar: bool,
) {
    if want_abar {
        abar[..m * C].fill(0.0);
    }
    for k in 0..n {
        let zk: &[f64; C] = zbar[k * C..k * C + C].try_into().unwrap();
        let row = &w[k * m..(k + 1) * m];
        let wrow = &mut wbar[k * m..(k + 1) * m];
        if want_abar {
            for j in 0..m {
                let aj_in = &a_prev[j * C..j * C + C];
                let mut s = 0.0;
                let wkj = row[j];
                let ab = &mut abar[j * C..j * C + C];
                for ci in 0..C {
                    s += zk[ci] * aj_in[ci];
                    ab[ci] += wkj * zk[ci];
                }
                wrow[j] += s;
            }
        } else {
            for j in 0..m {
                let aj_in = &a_prev[j * C..j * C + C];
                let mut s = 0.0;
                for ci in 0..C {
                    s += zk[ci] * aj_in[ci];
                }
                wrow[j] += s;
            }
        }
        bbar[k] += zk[0];
    }
}

#[allow(clippy::too_many_arguments)]
fn dispatch_affine_adjoint(
    c: usize,
    w: &[f64],
    zbar: &[f64],
    a_prev: &[f64],
    wbar: &mut [f64],
    bbar: &mut [f64],
    abar: &mut [f64],
    m: usize,
    n: usize,
    want_abar: bool,
) {
    macro_rules! go {
        ($cc:literal) => {
            affine_adjoint::<$cc>(w, zbar, a_prev, wbar, bbar, abar, m, n, want_abar)
        };
    }
    match c {
        1 => go!(1),
        2 => go!(2),
        3 => go!(3),
        4 => go!(4),
        5 => go!(5),
        6 => go!(6),
        7 => go!(7),
        8 => go!(8),
        9 => go!(9),
        10 => go!(10),
        _ => {
            if want_abar {
                abar[..m * c].fill(0.0);
            }
            for k in 0..n {
                let zk = &zbar[k * c..k * c + c];
                let row = &w[k * m..(k + 1) * m];
                let wrow = &mut wbar[k * m..(k + 1) * m];
                for j in 0..m {
                    let aj_in = &a_prev[j * c..j * c + c];
                    let mut s = 0.0;
                    for (zv, av) in zk.iter().zip(aj_in) {
                        s += zv * av;
                    }
                    wrow[j] += s;
                    if want_abar {
                        let ab = &mut abar[j * c..j * c + c];
                        for (av, zv) in ab.iter_mut().zip(zk) {
                            *av += row[j] * zv;
                        }
                    }
                }
                bbar[k] += zk[0];
            }
        }
    }
}

impl DenseNetwork {
    /// Forward pass recording all per-layer state into `ws`.
    pub fn channel_eval(&self, input: &[f64], ws: &mut ChannelWorkspace) -> ChannelJet {
        let spec = ws.spec;
        debug_assert_eq!(input.len(), spec.n_inputs);
        debug_assert_eq!(ws.sizes, self.layer_sizes());
        let c = spec.channels();
        let n_layers = self.num_layers();

        let a0 = &mut ws.a[0];
        a0.fill(0.0);
        for j in 0..spec.n_inputs {
            a0[j * c] = input[j];
            if j < spec.n_grad {
                a0[j * c + 1 + j] = 1.0;
            }
        }

        for l in 0..n_layers {
            let (m, n) = (self.layer_sizes()[l], self.layer_sizes()[l + 1]);
            let w = self.weight_matrix(l);
            let b = self.bias_vector(l);
            let hidden = l + 1 < n_layers;
            let (a_in, rest) = ws.a.split_at_mut(l + 1);
            let a_prev = &a_in[l];
            let a_next = &mut rest[0];
            let z = &mut ws.z[l];

            dispatch_affine(c, w, b, a_prev, z, m, n);

            if hidden {
                for k in 0..n {
                    let zk = &z[k * c..k * c + c];
                    let y = zk[0].tanh();
                    let s1 = 1.0 - y * y;
                    let out = &mut a_next[k * c..k * c + c];
                    out[0] = y;
                    for ci in 1..=spec.n_grad {
                        out[ci] = s1 * zk[ci];
                    }
                    if spec.laplacian {
                        let s2 = -2.0 * y * s1;
                        let mut q = 0.0;
                        for ci in 0..spec.n_spatial {
                            q += zk[1 + ci] * zk[1 + ci];
                        }
                        out[spec.lap_idx()] = s2 * q + s1 * zk[spec.lap_idx()];
                    }
                }
            } else {
                a_next[..n * c].copy_from_slice(&z[..n * c]);
            }
        }

        let out = &ws.a[n_layers];
        ChannelJet {
            value: out[0],
            grad: out[1..1 + spec.n_grad].to_vec(),
            laplacian: if spec.laplacian {
                out[spec.lap_idx()]
            } else {
                0.0
            },
        }
    }

    /// Accumulates `d(seed . channels)/d(params)` into `grad` (flat
    /// [`super::network::ParamVector`] layout), using the forward state left in
    /// `ws` by the matching [`DenseNetwork::channel_eval`] call.
    pub fn channel_backprop(&self, seed: &ChannelJet, ws: &mut ChannelWorkspace, grad: &mut [f64]) {
        let spec = ws.spec;
        debug_assert_eq!(grad.len(), self.param_count());
        debug_assert_eq!(seed.grad.len(), spec.n_grad);
        let c = spec.channels();
        let n_layers = self.num_layers();

        // Flat layout offsets: all weights (layer order), then all biases.
        let mut w_off = Vec::with_capacity(n_layers);
        let mut off = 0usize;
        for l in 0..n_layers {
            w_off.push(off);
            off += self.layer_sizes()[l] * self.layer_sizes()[l + 1];
        }
        let mut b_off = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            b_off.push(off);
            off += self.layer_sizes()[l + 1];
        }

        // Seed the output pre-activation adjoint (output layer is identity).
        let zbar = &mut ws.zbar;
        zbar[..c].fill(0.0);
        zbar[0] = seed.value;
        zbar[1..1 + spec.n_grad].copy_from_slice(&seed.grad);
        if spec.laplacian {
            zbar[spec.lap_idx()] = seed.laplacian;
        }

        for l in (0..n_layers).rev() {
            let (m, n) = (self.layer_sizes()[l], self.layer_sizes()[l + 1]);
            let w = self.weight_matrix(l);
            let a_prev = &ws.a[l];

            // Parameter adjoints, and the input adjoint when more layers
            // remain below.
            let (wgrad, rest) = grad.split_at_mut(b_off[0]);
            let abar = &mut ws.abar;
            dispatch_affine_adjoint(
                c,
                w,
                zbar,
                a_prev,
                &mut wgrad[w_off[l]..w_off[l] + m * n],
                &mut rest[b_off[l] - b_off[0]..b_off[l] - b_off[0] + n],
                abar,
                m,
                n,
                l > 0,
            );

            if l == 0 {
                break;
            }

            // Transpose of the tanh stage of layer l-1.
            let y_vals = &ws.a[l];
            let z_vals = &ws.z[l - 1];
            for k in 0..m {
                let y = y_vals[k * c];
                let s1 = 1.0 - y * y;
                let s2 = -2.0 * y * s1;
                let zk = &z_vals[k * c..k * c + c];
                let ak = &abar[k * c..k * c + c];
                let out = &mut zbar[k * c..k * c + c];
                let mut zb = ak[0] * s1;
                for ci in 1..=spec.n_grad {
                    zb += ak[ci] * s2 * zk[ci];
                    out[ci] = ak[ci] * s1;
                }
                if spec.laplacian {
                    let s3 = -2.0 * (s1 * s1 + y * s2);
                    let li = spec.lap_idx();
                    let mut q = 0.0;
                    for ci in 0..spec.n_spatial {
                        q += zk[1 + ci] * zk[1 + ci];
                        out[1 + ci] += ak[li] * s2 * 2.0 * zk[1 + ci];
                    }
                    zb += ak[li] * (s3 * q + s2 * zk[li]);
                    out[li] = ak[li] * s1;
                }
                out[0] = zb;
            }
        }
    }
}
