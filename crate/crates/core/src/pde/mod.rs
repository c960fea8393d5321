//! The five time-dependent PDE benchmarks: residual operators, exact
//! solutions, initial/boundary data, and the Allen-Cahn hard constraint.

mod fokker_planck;
mod lattice;
mod reference;

pub use fokker_planck::{fokker_planck_normalizer, FokkerPlanckAux};
pub use lattice::{Lattice, LatticeSpec};
pub use reference::allen_cahn_reference;

use std::f64::consts::PI;

use crate::autodiff::{ChannelJet, InputJet};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};

/// Problem-specific coefficients and closed forms.
#[derive(Debug, Clone)]
pub enum ProblemKind {
    /// `u_t = alpha u_xx - beta (u^3 - u)` on `[-1, 1]`, hard-constrained.
    AllenCahn { alpha: f64, beta: f64 },
    /// Passive rotation of a Gaussian bump: `u_t = u_x sin t - u_y cos t`.
    Rotation { alpha: f64 },
    /// 2D viscous Burgers with diagonal transport.
    Burgers { alpha: f64 },
    /// Ring density in a moving potential well.
    FokkerPlanck(FokkerPlanckAux),
    /// Constant-velocity advection of a Gaussian bump in `d` dimensions.
    AdvectionNd { alpha: f64, dim: usize },
}

/// A benchmark definition: domain, horizon, residual operator, and data.
#[derive(Debug, Clone)]
pub struct PdeProblem {
    name: &'static str,
    kind: ProblemKind,
    domain: BoxDomain,
    horizon: f64,
}

/// Sensitivities of a residual with respect to the channel jet it reads.
#[derive(Debug, Clone)]
pub struct ResidualPartials {
    pub d_value: f64,
    /// One entry per input coordinate (time last).
    pub d_grad: Vec<f64>,
    pub d_laplacian: f64,
}

pub const PROBLEM_NAMES: [&str; 5] = [
    "allen_cahn",
    "rotation",
    "burgers",
    "fokker_planck",
    "advection6d",
];

impl PdeProblem {
    pub fn allen_cahn() -> Self {
        PdeProblem {
            name: "allen_cahn",
            kind: ProblemKind::AllenCahn {
                alpha: 0.001,
                beta: 5.0,
            },
            domain: BoxDomain::cube(-1.0, 1.0, 1).unwrap(),
            horizon: 1.0,
        }
    }

    pub fn rotation() -> Self {
        PdeProblem {
            name: "rotation",
            kind: ProblemKind::Rotation { alpha: 0.01 },
            domain: BoxDomain::cube(-0.2, 1.2, 2).unwrap(),
            horizon: 1.0,
        }
    }

    pub fn burgers() -> Self {
        PdeProblem {
            name: "burgers",
            kind: ProblemKind::Burgers { alpha: 0.001 },
            domain: BoxDomain::cube(-1.0, 1.0, 2).unwrap(),
            horizon: 1.0,
        }
    }

    pub fn fokker_planck() -> Self {
        PdeProblem {
            name: "fokker_planck",
            kind: ProblemKind::FokkerPlanck(FokkerPlanckAux::new(0.1, 0.5)),
            domain: BoxDomain::cube(0.2, 1.8, 2).unwrap(),
            horizon: 1.0,
        }
    }

    pub fn advection6d() -> Self {
        PdeProblem {
            name: "advection6d",
            kind: ProblemKind::AdvectionNd {
                alpha: 0.01,
                dim: 6,
            },
            domain: BoxDomain::cube(-0.2, 1.2, 6).unwrap(),
            horizon: 1.0,
        }
    }

    pub fn by_name(name: &str) -> Result<PdeProblem> {
        match name {
            "allen_cahn" => Ok(Self::allen_cahn()),
            "rotation" => Ok(Self::rotation()),
            "burgers" => Ok(Self::burgers()),
            "fokker_planck" => Ok(Self::fokker_planck()),
            "advection6d" => Ok(Self::advection6d()),
            other => Err(Error::config(format!(
                "unknown problem '{other}' (expected one of {PROBLEM_NAMES:?})"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn spatial_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Highest input-derivative order the residual reads.
    pub fn residual_order(&self) -> usize {
        match self.kind {
            ProblemKind::Rotation { .. } | ProblemKind::AdvectionNd { .. } => 1,
            _ => 2,
        }
    }

    /// True when IC/BC are enforced through an output transformation.
    pub fn has_hard_constraint(&self) -> bool {
        matches!(self.kind, ProblemKind::AllenCahn { .. })
    }

    pub fn coefficients(&self) -> Vec<(&'static str, f64)> {
        match &self.kind {
            ProblemKind::AllenCahn { alpha, beta } => vec![("alpha", *alpha), ("beta", *beta)],
            ProblemKind::Rotation { alpha } => vec![("alpha", *alpha)],
            ProblemKind::Burgers { alpha } => vec![("alpha", *alpha)],
            ProblemKind::FokkerPlanck(aux) => vec![
                ("sigma", aux.sigma),
                ("r", aux.ring_radius),
                ("diffusion", aux.diffusion),
                ("normalizer", aux.normalizer),
            ],
            ProblemKind::AdvectionNd { alpha, dim } => {
                vec![("alpha", *alpha), ("dim", *dim as f64)]
            }
        }
    }

    /// PDE residual read from a full jet of the (constrained) solution field.
    pub fn residual_jet(&self, jet: &InputJet, x: &[f64], t: f64) -> f64 {
        debug_assert_eq!(jet.dim(), self.spatial_dim() + 1);
        match &self.kind {
            ProblemKind::AllenCahn { .. } => residual_allen_cahn(self, jet, x[0], t),
            ProblemKind::Rotation { .. } => residual_rotation(jet, x[0], x[1], t),
            ProblemKind::Burgers { .. } => residual_burgers(self, jet, x[0], x[1], t),
            ProblemKind::FokkerPlanck(aux) => residual_fokker_planck(jet, x[0], x[1], t, aux),
            ProblemKind::AdvectionNd { .. } => residual_advection_nd(jet, x, t),
        }
    }

    /// Residual from derivative channels (value, full gradient, spatial
    /// Laplacian); agrees with [`PdeProblem::residual_jet`].
    pub fn residual_channels(&self, value: f64, grad: &[f64], laplacian: f64, x: &[f64], t: f64) -> f64 {
        let d = self.spatial_dim();
        debug_assert_eq!(grad.len(), d + 1);
        let u_t = grad[d];
        match &self.kind {
            ProblemKind::AllenCahn { alpha, beta } => {
                u_t - alpha * laplacian + beta * (value * value * value - value)
            }
            ProblemKind::Rotation { .. } => u_t - grad[0] * t.sin() + grad[1] * t.cos(),
            ProblemKind::Burgers { alpha } => {
                u_t - alpha * laplacian + value * (grad[0] + grad[1])
            }
            ProblemKind::FokkerPlanck(aux) => {
                let f = aux.drift(x[0], x[1], t);
                let div_f = aux.drift_divergence(x[0], x[1], t);
                u_t + div_f * value + f[0] * grad[0] + f[1] * grad[1] - aux.diffusion * laplacian
            }
            ProblemKind::AdvectionNd { dim, .. } => u_t + grad[..*dim].iter().sum::<f64>(),
        }
    }

    /// Partial derivatives of the residual with respect to its channel inputs.
    pub fn residual_partials(&self, value: f64, grad: &[f64], x: &[f64], t: f64) -> ResidualPartials {
        let d = self.spatial_dim();
        let mut d_grad = vec![0.0; d + 1];
        d_grad[d] = 1.0;
        match &self.kind {
            ProblemKind::AllenCahn { alpha, beta } => ResidualPartials {
                d_value: beta * (3.0 * value * value - 1.0),
                d_grad,
                d_laplacian: -alpha,
            },
            ProblemKind::Rotation { .. } => {
                d_grad[0] = -t.sin();
                d_grad[1] = t.cos();
                ResidualPartials {
                    d_value: 0.0,
                    d_grad,
                    d_laplacian: 0.0,
                }
            }
            ProblemKind::Burgers { alpha } => {
                d_grad[0] = value;
                d_grad[1] = value;
                ResidualPartials {
                    d_value: grad[0] + grad[1],
                    d_grad,
                    d_laplacian: -alpha,
                }
            }
            ProblemKind::FokkerPlanck(aux) => {
                let f = aux.drift(x[0], x[1], t);
                d_grad[0] = f[0];
                d_grad[1] = f[1];
                ResidualPartials {
                    d_value: aux.drift_divergence(x[0], x[1], t),
                    d_grad,
                    d_laplacian: -aux.diffusion,
                }
            }
            ProblemKind::AdvectionNd { dim, .. } => {
                for g in d_grad[..*dim].iter_mut() {
                    *g = 1.0;
                }
                ResidualPartials {
                    d_value: 0.0,
                    d_grad,
                    d_laplacian: 0.0,
                }
            }
        }
    }

    pub fn initial_value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ProblemKind::AllenCahn { .. } => allen_cahn_u0(x[0]),
            _ => self.exact(x, 0.0).expect("exact solution available"),
        }
    }

    /// Squared Euclidean norm of the initial-condition gradient.
    pub fn initial_gradient_sq(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ProblemKind::AllenCahn { .. } => {
                let d = allen_cahn_u0_dx(x[0]);
                d * d
            }
            ProblemKind::Rotation { alpha } => {
                let u = self.initial_value(x);
                let r2 = (x[0] - 1.0).powi(2) + x[1].powi(2);
                (2.0 / alpha).powi(2) * r2 * u * u
            }
            ProblemKind::Burgers { alpha } => {
                let u = self.initial_value(x);
                let du = u * (1.0 - u) / (2.0 * alpha);
                2.0 * du * du
            }
            ProblemKind::FokkerPlanck(aux) => {
                let u = self.initial_value(x);
                let c = 2.0 / (aux.sigma * aux.sigma);
                let (xi, psi) = (x[0] - 1.0, x[1] - 1.0);
                let g = xi * xi + psi * psi - aux.ring_radius * aux.ring_radius;
                16.0 * c * c * g * g * (xi * xi + psi * psi) * u * u
            }
            ProblemKind::AdvectionNd { alpha, .. } => {
                let u = self.initial_value(x);
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (2.0 / alpha).powi(2) * r2 * u * u
            }
        }
    }

    pub fn boundary_value(&self, x: &[f64], t: f64) -> f64 {
        match &self.kind {
            ProblemKind::AllenCahn { .. } => -1.0,
            _ => self.exact(x, t).expect("exact solution available"),
        }
    }

    /// Closed-form solution, when the benchmark has one.
    pub fn exact(&self, x: &[f64], t: f64) -> Option<f64> {
        match &self.kind {
            ProblemKind::AllenCahn { .. } => None,
            ProblemKind::Rotation { alpha } => {
                let r2 = (x[0] - t.cos()).powi(2) + (x[1] - t.sin()).powi(2);
                Some((-r2 / alpha).exp())
            }
            ProblemKind::Burgers { alpha } => {
                Some(1.0 / (1.0 + ((x[0] + x[1] - t) / (2.0 * alpha)).exp()))
            }
            ProblemKind::FokkerPlanck(aux) => {
                let c = (-t).exp();
                let g = (x[0] - c).powi(2) + (x[1] - c).powi(2)
                    - aux.ring_radius * aux.ring_radius;
                Some((-2.0 / (aux.sigma * aux.sigma) * g * g).exp() / aux.normalizer)
            }
            ProblemKind::AdvectionNd { alpha, .. } => {
                let r2: f64 = x.iter().map(|v| (v - t).powi(2)).sum();
                Some((-r2 / alpha).exp())
            }
        }
    }

    /// Analytic jet of the exact solution. The entries a residual operator
    /// reads are exact; unread Hessian entries may be zero.
    pub fn exact_jet(&self, x: &[f64], t: f64) -> Option<InputJet> {
        let n = self.spatial_dim() + 1;
        match &self.kind {
            ProblemKind::AllenCahn { .. } => None,
            ProblemKind::Rotation { alpha } => {
                let u = self.exact(x, t).unwrap();
                let (cx, cy) = (x[0] - t.cos(), x[1] - t.sin());
                let grad = vec![
                    -2.0 / alpha * cx * u,
                    -2.0 / alpha * cy * u,
                    -2.0 / alpha * (cx * t.sin() - cy * t.cos()) * u,
                ];
                Some(InputJet::new(u, grad, vec![0.0; 9]))
            }
            ProblemKind::Burgers { alpha } => {
                let u = self.exact(x, t).unwrap();
                let us = -u * (1.0 - u) / (2.0 * alpha);
                let uss = (1.0 - 2.0 * u) * u * (1.0 - u) / (4.0 * alpha * alpha);
                // u = f(x + y - t): signature s = (1, 1, -1).
                let s = [1.0, 1.0, -1.0];
                let grad: Vec<f64> = s.iter().map(|si| si * us).collect();
                let mut hess = vec![0.0; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        hess[i * 3 + j] = s[i] * s[j] * uss;
                    }
                }
                Some(InputJet::new(u, grad, hess))
            }
            ProblemKind::FokkerPlanck(aux) => {
                let u = self.exact(x, t).unwrap();
                let cexp = (-t).exp();
                let c = 2.0 / (aux.sigma * aux.sigma);
                let (xi, psi) = (x[0] - cexp, x[1] - cexp);
                let g = xi * xi + psi * psi - aux.ring_radius * aux.ring_radius;
                let ux = -4.0 * c * g * xi * u;
                let uy = -4.0 * c * g * psi * u;
                // dg/dt = 2 (xi + psi) e^{-t}.
                let ut = -2.0 * c * g * 2.0 * (xi + psi) * cexp * u;
                let uxx = -4.0 * c * u * (2.0 * xi * xi + g - 4.0 * c * g * g * xi * xi);
                let uyy = -4.0 * c * u * (2.0 * psi * psi + g - 4.0 * c * g * g * psi * psi);
                let mut hess = vec![0.0; 9];
                hess[0] = uxx;
                hess[4] = uyy;
                Some(InputJet::new(u, vec![ux, uy, ut], hess))
            }
            ProblemKind::AdvectionNd { alpha, dim } => {
                let u = self.exact(x, t).unwrap();
                let mut grad = vec![0.0; n];
                let mut sum = 0.0;
                for i in 0..*dim {
                    grad[i] = -2.0 / alpha * (x[i] - t) * u;
                    sum += x[i] - t;
                }
                grad[*dim] = 2.0 / alpha * sum * u;
                Some(InputJet::new(u, grad, vec![0.0; n * n]))
            }
        }
    }

    /// Evaluates the exact solution over a lattice.
    pub fn exact_grid(&self, spec: &LatticeSpec) -> Result<Lattice> {
        if self.exact(&vec![self.domain.lo()[0]; self.spatial_dim()], 0.0).is_none() {
            return Err(Error::config(format!(
                "problem '{}' has no closed-form solution",
                self.name
            )));
        }
        Ok(Lattice::evaluate(&self.domain, self.horizon, spec, |x, t| {
            self.exact(x, t).unwrap()
        }))
    }
}

fn allen_cahn_u0(x: f64) -> f64 {
    x * x * (PI * x).cos()
}

fn allen_cahn_u0_dx(x: f64) -> f64 {
    2.0 * x * (PI * x).cos() - PI * x * x * (PI * x).sin()
}

fn allen_cahn_u0_dxx(x: f64) -> f64 {
    2.0 * (PI * x).cos() - 4.0 * PI * x * (PI * x).sin() - PI * PI * x * x * (PI * x).cos()
}

/// `r = u_t - alpha u_xx + beta (u^3 - u)`.
pub fn residual_allen_cahn(problem: &PdeProblem, jet: &InputJet, _x: f64, _t: f64) -> f64 {
    let ProblemKind::AllenCahn { alpha, beta } = problem.kind else {
        panic!("not the Allen-Cahn problem");
    };
    let u = jet.value;
    jet.dt() - alpha * jet.hess(0, 0) + beta * (u * u * u - u)
}

/// `r = u_t - u_x sin t + u_y cos t`.
pub fn residual_rotation(jet: &InputJet, _x: f64, _y: f64, t: f64) -> f64 {
    jet.dt() - jet.dx(0) * t.sin() + jet.dx(1) * t.cos()
}

/// `r = u_t - alpha (u_xx + u_yy) + u (u_x + u_y)`.
pub fn residual_burgers(problem: &PdeProblem, jet: &InputJet, _x: f64, _y: f64, _t: f64) -> f64 {
    let ProblemKind::Burgers { alpha } = problem.kind else {
        panic!("not the Burgers problem");
    };
    jet.dt() - alpha * (jet.hess(0, 0) + jet.hess(1, 1)) + jet.value * (jet.dx(0) + jet.dx(1))
}

/// Expanded divergence form `r = u_t + (div f) u + f . grad u - D lap u`.
pub fn residual_fokker_planck(
    jet: &InputJet,
    x: f64,
    y: f64,
    t: f64,
    aux: &FokkerPlanckAux,
) -> f64 {
    let f = aux.drift(x, y, t);
    jet.dt() + aux.drift_divergence(x, y, t) * jet.value + f[0] * jet.dx(0) + f[1] * jet.dx(1)
        - aux.diffusion * (jet.hess(0, 0) + jet.hess(1, 1))
}

/// `r = u_t + sum_i u_{x_i}`.
pub fn residual_advection_nd(jet: &InputJet, x: &[f64], _t: f64) -> f64 {
    let d = x.len();
    jet.dt() + (0..d).map(|i| jet.dx(i)).sum::<f64>()
}

/// Full jet of the hard-constrained Allen-Cahn field
/// `u(x, t) = t (x^2 - 1) y(x, t) + u0(x)` from the raw network jet `y`.
pub fn hard_constraint_allen_cahn(raw: &InputJet, x: f64, t: f64) -> InputJet {
    debug_assert_eq!(raw.dim(), 2);
    let m = x * x - 1.0;
    let (y, yx, yt) = (raw.value, raw.dx(0), raw.dt());
    let (yxx, yxt, ytt) = (raw.hess(0, 0), raw.hess(0, 1), raw.hess(1, 1));
    let value = t * m * y + allen_cahn_u0(x);
    let ux = t * (2.0 * x * y + m * yx) + allen_cahn_u0_dx(x);
    let ut = m * y + t * m * yt;
    let uxx = t * (2.0 * y + 4.0 * x * yx + m * yxx) + allen_cahn_u0_dxx(x);
    let uxt = 2.0 * x * y + m * yx + t * (2.0 * x * yt + m * yxt);
    let utt = 2.0 * m * yt + t * m * ytt;
    InputJet::new(value, vec![ux, ut], vec![uxx, uxt, uxt, utt])
}

/// Channel-jet counterpart of [`hard_constraint_allen_cahn`].
pub fn hard_constraint_allen_cahn_channels(raw: &ChannelJet, x: f64, t: f64) -> ChannelJet {
    let m = x * x - 1.0;
    let (y, yx, yt, yxx) = (raw.value, raw.grad[0], raw.grad[1], raw.laplacian);
    ChannelJet {
        value: t * m * y + allen_cahn_u0(x),
        grad: vec![
            t * (2.0 * x * y + m * yx) + allen_cahn_u0_dx(x),
            m * y + t * m * yt,
        ],
        laplacian: t * (2.0 * y + 4.0 * x * yx + m * yxx) + allen_cahn_u0_dxx(x),
    }
}

/// Transpose of the hard-constraint channel map: converts adjoints of the
/// constrained field into adjoints of the raw network output.
pub fn hard_constraint_allen_cahn_backprop(seed: &ChannelJet, x: f64, t: f64) -> ChannelJet {
    let m = x * x - 1.0;
    let (su, sux, sut, suxx) = (seed.value, seed.grad[0], seed.grad[1], seed.laplacian);
    ChannelJet {
        value: t * m * su + 2.0 * t * x * sux + m * sut + 2.0 * t * suxx,
        grad: vec![t * m * sux + 4.0 * t * x * suxx, t * m * sut],
        laplacian: t * m * suxx,
    }
}
