//! The alternating training engine: solution loss, velocity loss, Adam, and
//! the outer moving-sample loop.

mod batches;
mod run;
mod snapshot;

pub use batches::{loss_u_estimate, FlatPoints, LossUBatches};
pub use run::{
    assemble_sets, build_loss_u_batches, build_reference, measure_errors, msm_run, msm_run_with_abort_dir, pinn_run,
    solution_value, train_u, train_v, EvalSpec, IterationMetrics, PhaseHistory, RunMetrics,
    RunReference, RunResult, TrainingSets,
};
pub use snapshot::{loss_v_estimate, residual_snapshot, GradMode, ResidualSnapshot};

use crate::flow::VelocityPotential;
use crate::pde::PdeProblem;

/// Solution loss and its parameter gradient (verification entry point).
pub fn loss_u_gradient(
    net: &crate::autodiff::DenseNetwork,
    problem: &PdeProblem,
    batches: &LossUBatches,
    beta_ic: f64,
    beta_bc: f64,
) -> Result<(f64, Vec<f64>)> {
    batches::loss_u_and_grad(net, problem, batches, beta_ic, beta_bc, None, true)
}

/// Velocity loss and its parameter gradient (verification entry point).
pub fn loss_v_gradient(
    pot: &VelocityPotential,
    snapshot: &ResidualSnapshot,
) -> Result<(f64, Vec<f64>)> {
    snapshot::loss_v_and_grad(pot, snapshot, true)
}

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::sampling::{BoundaryMode, InitialStrategy, PdeSetMode};

/// Optimization and loop-control settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Outer moving-sample iterations (`M`).
    pub outer_iterations: usize,
    /// Solution-network epochs per iteration (`M1`).
    pub epochs_u: usize,
    /// Potential-network epochs per iteration (`M2`).
    pub epochs_v: usize,
    /// Solution epochs of the final phase (`M_final`).
    pub epochs_final: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Initial-condition loss weight.
    pub beta_ic: f64,
    /// Boundary-condition loss weight.
    pub beta_bc: f64,
    /// Residual points per step; 0 means full batch.
    pub batch_size: usize,
    pub grad_mode: GradMode,
    /// FD step for snapshot derivatives, relative to each axis length.
    pub fd_step: f64,
    /// Sampling-density exponent: targets `r^{2 gamma}`.
    pub sampling_exponent: f64,
    /// Hidden-layer widths of both networks.
    pub hidden: Vec<usize>,
    /// RK4 substeps per time-grid interval.
    pub substeps: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)".to_string()));
        }
        if self.adam_epsilon <= 0.0 {
            return Err(Error::config("adam_epsilon must be positive".to_string()));
        }
        if self.beta_ic < 0.0 || self.beta_bc < 0.0 {
            return Err(Error::config("loss weights must be non-negative".to_string()));
        }
        if self.sampling_exponent < 0.5 {
            return Err(Error::config(format!(
                "sampling_exponent {} must be at least 0.5",
                self.sampling_exponent
            )));
        }
        if self.grad_mode == GradMode::FiniteDifference && self.fd_step <= 0.0 {
            return Err(Error::config("fd_step must be positive".to_string()));
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("hidden layers must be non-empty".to_string()));
        }
        if self.substeps == 0 {
            return Err(Error::config("substeps must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Set sizes and sampling strategies.
#[derive(Debug, Clone)]
pub struct SamplingConfig {
    /// Uniform PDE points (`N`): per-slice spatial count or joint space-time
    /// count, depending on `pde_mode`.
    pub n_pde: usize,
    pub pde_mode: PdeSetMode,
    /// Extra joint space-time points added to `S` (Fokker-Planck augmentation).
    pub n_joint_extra: usize,
    /// Initial-condition points (`N0`).
    pub n_initial: usize,
    /// Boundary points (`Nb`).
    pub n_boundary: usize,
    /// New flow seeds per outer iteration (`N1`); the last entry repeats.
    pub n_new: Vec<usize>,
    /// Time slices (`Nt`).
    pub n_time_slices: usize,
    pub initial_strategy: InitialStrategy,
    /// Uniform share of `S0` under a density-proportional strategy.
    pub uniform_fraction: f64,
    pub boundary_mode: BoundaryMode,
    /// Per-slice uniform probes maintained solely for the slice integrals
    /// when `S` itself has no per-slice uniform points.
    pub probe_per_slice: usize,
    /// Collocation budget of the plain-PINN baseline.
    pub baseline_n: usize,
}

impl SamplingConfig {
    pub fn validate(&self, outer_iterations: usize) -> Result<()> {
        if self.n_pde == 0 {
            return Err(Error::config("n_pde must be positive".to_string()));
        }
        if self.n_time_slices < 2 {
            return Err(Error::config("need at least 2 time slices".to_string()));
        }
        if outer_iterations > 0 && self.n_new.is_empty() {
            return Err(Error::config(
                "n_new must not be empty when outer iterations run".to_string(),
            ));
        }
        if outer_iterations > 0 && self.n_new.iter().any(|&n| n == 0) {
            return Err(Error::config("n_new entries must be positive".to_string()));
        }
        if !(0.0..=1.0).contains(&self.uniform_fraction) {
            return Err(Error::config("uniform_fraction must lie in [0, 1]".to_string()));
        }
        if outer_iterations > 0
            && self.pde_mode == PdeSetMode::JointSpacetime
            && self.probe_per_slice == 0
        {
            return Err(Error::config(
                "joint-spacetime sampling needs probe_per_slice > 0 for the slice integrals"
                    .to_string(),
            ));
        }
        if self.baseline_n == 0 {
            return Err(Error::config("baseline_n must be positive".to_string()));
        }
        Ok(())
    }

    /// `N1` for outer iteration `i` (1-based); the schedule's last entry
    /// repeats.
    pub fn n_new_at(&self, iteration: usize) -> usize {
        let idx = (iteration - 1).min(self.n_new.len() - 1);
        self.n_new[idx]
    }
}

/// First/second moment estimates and step counter for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut ParamVector,
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for i in 0..grads.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params.0[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = ParamVector(vec![0.5, -0.25]);
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, 0.001, 0.9, 0.999, 1e-8);
        assert_eq!(p.0, vec![0.5, -0.25]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut p = ParamVector(vec![0.0]);
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[2.0], &mut st, 0.001, 0.9, 0.999, 1e-8);
        assert!((p.0[0] + 0.001).abs() < 1e-6, "param {}", p.0[0]);
    }

    #[test]
    fn adam_deterministic() {
        let grads = [[0.3, -0.1], [0.2, 0.4], [-0.6, 0.05]];
        let run = || {
            let mut p = ParamVector(vec![1.0, -1.0]);
            let mut st = AdamState::new(2);
            for g in &grads {
                adam_step(&mut p, g, &mut st, 0.01, 0.9, 0.999, 1e-8);
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        let mut t = TrainConfig {
            outer_iterations: 2,
            epochs_u: 10,
            epochs_v: 5,
            epochs_final: 10,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            beta_ic: 1.0,
            beta_bc: 1.0,
            batch_size: 0,
            grad_mode: GradMode::FiniteDifference,
            fd_step: 1e-3,
            sampling_exponent: 1.0,
            hidden: vec![8, 8],
            substeps: 5,
        };
        assert!(t.validate().is_ok());
        t.sampling_exponent = 0.2;
        assert!(t.validate().is_err());
        t.sampling_exponent = 1.0;
        t.learning_rate = 0.0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn n_new_schedule_repeats_last() {
        let s = SamplingConfig {
            n_pde: 10,
            pde_mode: PdeSetMode::PerSlice,
            n_joint_extra: 0,
            n_initial: 5,
            n_boundary: 4,
            n_new: vec![1000, 300],
            n_time_slices: 11,
            initial_strategy: InitialStrategy::Uniform,
            uniform_fraction: 0.2,
            boundary_mode: BoundaryMode::Random,
            probe_per_slice: 0,
            baseline_n: 100,
        };
        assert_eq!(s.n_new_at(1), 1000);
        assert_eq!(s.n_new_at(2), 300);
        assert_eq!(s.n_new_at(5), 300);
    }
}
