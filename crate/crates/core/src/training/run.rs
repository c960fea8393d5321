//! Training phases and the outer moving-sample loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{init_network, DenseNetwork};
use crate::error::{Error, Result};
use crate::flow::{evolve_samples, FlowTrajectory, VelocityPotential};
use crate::metrics::{advection_weight_sampler, l_inf, rel_l2, weighted_errors};
use crate::pde::{allen_cahn_reference, Lattice, LatticeSpec, PdeProblem, ProblemKind};
use crate::sampling::{
    assemble_boundary_set, assemble_initial_set, assemble_pde_set, sample_initial_positions,
    CollocPoint, CollocationSet, Origin, PdeSetMode, TimeGrid,
};
use crate::seeds::derive_seed;

use super::batches::{loss_u_and_grad, FlatPoints, LossUBatches};
use super::snapshot::{loss_v_and_grad, residual_snapshot, ResidualSnapshot};
use super::{adam_step, AdamState, SamplingConfig, TrainConfig};

/// All training sets of one run.
#[derive(Debug, Clone)]
pub struct TrainingSets {
    pub grid: TimeGrid,
    /// The PDE set `S`: uniform (+ joint) points plus transported samples.
    pub pde: CollocationSet,
    pub initial: CollocationSet,
    pub boundary: CollocationSet,
    /// Per-slice uniform probes used solely for the slice integrals.
    pub probe: CollocationSet,
}

/// Builds the initial sets from the sampling configuration.
pub fn assemble_sets(
    problem: &PdeProblem,
    scfg: &SamplingConfig,
    seed: u64,
) -> Result<TrainingSets> {
    let grid = TimeGrid::uniform(problem.horizon(), scfg.n_time_slices)?;
    let mut pde = assemble_pde_set(
        problem,
        scfg.n_pde,
        &grid,
        scfg.pde_mode,
        derive_seed(seed, "pde", 0),
    )?;
    if scfg.n_joint_extra > 0 {
        pde.extend(assemble_pde_set(
            problem,
            scfg.n_joint_extra,
            &grid,
            PdeSetMode::JointSpacetime,
            derive_seed(seed, "pde-extra", 0),
        )?);
    }
    let initial = if scfg.n_initial > 0 {
        assemble_initial_set(
            problem,
            scfg.initial_strategy,
            scfg.n_initial,
            scfg.uniform_fraction,
            derive_seed(seed, "initial", 0),
        )?
    } else {
        CollocationSet::default()
    };
    let boundary = if scfg.n_boundary > 0 {
        assemble_boundary_set(
            problem,
            scfg.n_boundary,
            &grid,
            derive_seed(seed, "boundary", 0),
            scfg.boundary_mode,
        )?
    } else {
        CollocationSet::default()
    };
    let probe = if scfg.probe_per_slice > 0 {
        assemble_pde_set(
            problem,
            scfg.probe_per_slice,
            &grid,
            PdeSetMode::PerSlice,
            derive_seed(seed, "probe", 0),
        )?
    } else {
        CollocationSet::default()
    };
    Ok(TrainingSets {
        grid,
        pde,
        initial,
        boundary,
        probe,
    })
}

/// Flattens the sets into the loss batches (alive points only). IC/BC groups
/// are dropped when a hard constraint enforces them exactly.
pub fn build_loss_u_batches(problem: &PdeProblem, sets: &TrainingSets) -> LossUBatches {
    let d = problem.spatial_dim();
    let pde = FlatPoints::from_set(&sets.pde, d);
    let (ic, bc) = if problem.has_hard_constraint() {
        (FlatPoints::default(), FlatPoints::default())
    } else {
        (
            FlatPoints::from_set(&sets.initial, d).with_targets(|x, _| problem.initial_value(x)),
            FlatPoints::from_set(&sets.boundary, d)
                .with_targets(|x, t| problem.boundary_value(x, t)),
        )
    };
    LossUBatches { pde, ic, bc }
}

fn minibatch_indices(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut ix: Vec<usize> = (0..n).collect();
    ix.shuffle(rng);
    ix.truncate(batch.min(n));
    ix
}

/// Full-batch (or mini-batch) Adam on the solution loss.
///
/// Returns the loss history, one entry per epoch, evaluated before each step.
pub fn train_u(
    net: &mut DenseNetwork,
    problem: &PdeProblem,
    batches: &LossUBatches,
    cfg: &TrainConfig,
    epochs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut params = net.params();
    let mut state = AdamState::new(params.len());
    let mut history = Vec::with_capacity(epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "minibatch", 0));
    for epoch in 0..epochs {
        let subset = if cfg.batch_size > 0 && cfg.batch_size < batches.pde.n {
            Some(minibatch_indices(batches.pde.n, cfg.batch_size, &mut rng))
        } else {
            None
        };
        let (loss, grad) = loss_u_and_grad(
            net,
            problem,
            batches,
            cfg.beta_ic,
            cfg.beta_bc,
            subset.as_deref(),
            true,
        )?;
        if !loss.is_finite() {
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            return Err(Error::numeric(format!(
                "solution loss diverged at epoch {epoch}: loss = {loss}, grad norm = {gnorm}"
            )));
        }
        history.push(loss);
        adam_step(
            &mut params,
            &grad,
            &mut state,
            cfg.learning_rate,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_epsilon,
        );
        net.set_params(&params)?;
    }
    Ok(history)
}

/// Adam on the velocity loss against a frozen snapshot.
pub fn train_v(
    pot: &mut VelocityPotential,
    snapshot: &ResidualSnapshot,
    cfg: &TrainConfig,
    epochs: usize,
) -> Result<Vec<f64>> {
    let mut params = pot.net().params();
    let mut state = AdamState::new(params.len());
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grad) = loss_v_and_grad(pot, snapshot, true)?;
        if !loss.is_finite() {
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            return Err(Error::numeric(format!(
                "velocity loss diverged at epoch {epoch}: loss = {loss}, grad norm = {gnorm}"
            )));
        }
        history.push(loss);
        adam_step(
            &mut params,
            &grad,
            &mut state,
            cfg.learning_rate,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_epsilon,
        );
        pot.net_mut().set_params(&params)?;
    }
    Ok(history)
}

/// Value of the (possibly hard-constrained) solution field.
pub fn solution_value(problem: &PdeProblem, net: &DenseNetwork, x: &[f64], t: f64) -> f64 {
    let mut input = Vec::with_capacity(x.len() + 1);
    input.extend_from_slice(x);
    input.push(t);
    let y = net.forward(&input).expect("dims fixed by construction");
    if problem.has_hard_constraint() {
        t * (x[0] * x[0] - 1.0) * y + x[0] * x[0] * (std::f64::consts::PI * x[0]).cos()
    } else {
        y
    }
}

/// Evaluation settings: lattice shape, reference-solver resolution, and the
/// Monte-Carlo budget of the weighted 6D errors.
#[derive(Debug, Clone)]
pub struct EvalSpec {
    pub lattice: LatticeSpec,
    pub n_mc_weighted: usize,
    pub reference_intervals: usize,
    pub reference_dt: f64,
    pub weighted_seed: u64,
}

impl EvalSpec {
    /// Per-problem defaults: 257x101 for the 1D benchmark, 101x101 at 11
    /// slices for the 2D ones, weighted Monte Carlo in 6D.
    pub fn default_for(problem: &PdeProblem) -> EvalSpec {
        let lattice = match problem.kind() {
            ProblemKind::AllenCahn { .. } => LatticeSpec {
                n_per_axis: 257,
                n_times: 101,
            },
            _ => LatticeSpec {
                n_per_axis: 101,
                n_times: 11,
            },
        };
        EvalSpec {
            lattice,
            n_mc_weighted: 20_000,
            reference_intervals: 1024,
            reference_dt: 1e-4,
            weighted_seed: 0x5eed,
        }
    }

    /// Halves lattice resolution for the desk preset.
    pub fn desk(mut self) -> EvalSpec {
        self.lattice.n_per_axis = self.lattice.n_per_axis / 2 + 1;
        self.lattice.n_times = (self.lattice.n_times / 2 + 1).max(2);
        self.n_mc_weighted /= 2;
        self
    }
}

/// Reference data errors are measured against.
pub enum RunReference {
    Lattice(Lattice),
    /// Weighted Monte-Carlo comparison against the exact solution.
    Weighted { n_mc: usize, seed: u64 },
}

/// Builds the per-problem reference (closed form, time-stepped solver, or
/// weighted Monte Carlo).
pub fn build_reference(problem: &PdeProblem, eval: &EvalSpec) -> Result<RunReference> {
    match problem.kind() {
        ProblemKind::AllenCahn { alpha, beta } => {
            let lat = allen_cahn_reference(
                *alpha,
                *beta,
                eval.reference_intervals,
                eval.reference_dt,
                eval.lattice.n_per_axis,
                eval.lattice.n_times,
            )?;
            Ok(RunReference::Lattice(lat))
        }
        ProblemKind::AdvectionNd { .. } => Ok(RunReference::Weighted {
            n_mc: eval.n_mc_weighted,
            seed: eval.weighted_seed,
        }),
        _ => Ok(RunReference::Lattice(problem.exact_grid(&eval.lattice)?)),
    }
}

/// `(rel_l2, l_inf)` of the current solution field against the reference.
pub fn measure_errors(
    problem: &PdeProblem,
    net: &DenseNetwork,
    reference: &RunReference,
) -> Result<(f64, f64)> {
    let field = |x: &[f64], t: f64| solution_value(problem, net, x, t);
    match reference {
        RunReference::Lattice(lat) => Ok((rel_l2(field, lat)?, l_inf(field, lat)?)),
        RunReference::Weighted { n_mc, seed } => {
            let sampler = advection_weight_sampler(problem, *seed)?;
            let exact = |x: &[f64], t: f64| problem.exact(x, t).unwrap();
            weighted_errors(field, exact, sampler, *n_mc)
        }
    }
}

/// Per-iteration record serialized into `metrics.json`.
#[derive(Debug, Clone, Serialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub loss_u_first: f64,
    pub loss_u_last: f64,
    pub loss_v_first: Option<f64>,
    pub loss_v_last: Option<f64>,
    pub n_points: usize,
    pub n_added: usize,
    pub n_discarded: usize,
    pub phi_points_skipped: usize,
    pub rel_l2: f64,
    pub l_inf: f64,
}

/// Whole-run record serialized into `metrics.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub iterations: Vec<IterationMetrics>,
    pub final_loss_first: f64,
    pub final_loss_last: f64,
    pub rel_l2: f64,
    pub l_inf: f64,
    pub n_points_final: usize,
}

/// Loss history of one training phase.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseHistory {
    pub phase: String,
    pub losses: Vec<f64>,
}

/// Everything a run produces.
pub struct RunResult {
    pub u_net: DenseNetwork,
    pub potential: Option<VelocityPotential>,
    pub sets: TrainingSets,
    pub trajectories: Vec<FlowTrajectory>,
    pub histories: Vec<PhaseHistory>,
    pub metrics: RunMetrics,
}

/// Writes emergency checkpoints when a training phase aborts, so a failed
/// run can be inspected and resumed by hand.
fn dump_abort_state(
    dir: Option<&std::path::Path>,
    u_net: &DenseNetwork,
    pot: Option<&VelocityPotential>,
    sets: &TrainingSets,
    phase: &str,
) {
    let Some(dir) = dir else { return };
    let _ = std::fs::create_dir_all(dir);
    let _ = u_net.save_checkpoint(&dir.join(format!("abort-{phase}-u.json")));
    if let Some(p) = pot {
        let _ = p.net().save_checkpoint(&dir.join(format!("abort-{phase}-phi.json")));
    }
    let d = u_net.input_dim() - 1;
    let _ = sets.pde.write_csv(&dir.join(format!("abort-{phase}-pde.csv")), d);
}

fn network_arch(problem: &PdeProblem, hidden: &[usize]) -> Vec<usize> {
    let mut arch = Vec::with_capacity(hidden.len() + 2);
    arch.push(problem.spatial_dim() + 1);
    arch.extend_from_slice(hidden);
    arch.push(1);
    arch
}

/// The moving-sample loop: alternate solution and velocity training, then
/// advect fresh initial samples along the learned flow and grow `S`.
pub fn msm_run(
    problem: &PdeProblem,
    tcfg: &TrainConfig,
    scfg: &SamplingConfig,
    seed: u64,
    eval: &EvalSpec,
) -> Result<RunResult> {
    msm_run_with_abort_dir(problem, tcfg, scfg, seed, eval, None)
}

/// [`msm_run`] that additionally dumps checkpoints of all state into
/// `abort_dir` if a training phase fails.
pub fn msm_run_with_abort_dir(
    problem: &PdeProblem,
    tcfg: &TrainConfig,
    scfg: &SamplingConfig,
    seed: u64,
    eval: &EvalSpec,
    abort_dir: Option<&std::path::Path>,
) -> Result<RunResult> {
    tcfg.validate()?;
    scfg.validate(tcfg.outer_iterations)?;
    let arch = network_arch(problem, &tcfg.hidden);
    let mut u_net = init_network(&arch, derive_seed(seed, "u-net", 0))?;
    let mut pot = VelocityPotential::new(init_network(&arch, derive_seed(seed, "phi-net", 0))?)?;
    let mut sets = assemble_sets(problem, scfg, derive_seed(seed, "sets", 0))?;
    let reference = build_reference(problem, eval)?;

    let mut iterations = Vec::new();
    let mut trajectories = Vec::new();
    let mut histories = Vec::new();

    for iter in 1..=tcfg.outer_iterations {
        let batches = build_loss_u_batches(problem, &sets);
        let hist_u = train_u(
            &mut u_net,
            problem,
            &batches,
            tcfg,
            tcfg.epochs_u,
            derive_seed(seed, "train-u", iter as u64),
        )
        .inspect_err(|_| {
            dump_abort_state(abort_dir, &u_net, Some(&pot), &sets, &format!("u-{iter}"))
        })?;
        histories.push(PhaseHistory {
            phase: format!("u-{iter}"),
            losses: hist_u.clone(),
        });

        // Velocity-training points: alive S, plus S0 at the first iteration.
        let mut phi_points = sets.pde.clone();
        if iter == 1 {
            phi_points.extend(sets.initial.clone());
        }
        let integral_points = if sets.probe.is_empty() {
            &sets.pde
        } else {
            &sets.probe
        };
        let snapshot = residual_snapshot(
            &u_net,
            problem,
            &phi_points,
            integral_points,
            &sets.grid,
            tcfg.grad_mode,
            tcfg.fd_step,
            tcfg.sampling_exponent,
        )?;
        let hist_v = train_v(&mut pot, &snapshot, tcfg, tcfg.epochs_v).inspect_err(|_| {
            dump_abort_state(abort_dir, &u_net, Some(&pot), &sets, &format!("v-{iter}"))
        })?;
        histories.push(PhaseHistory {
            phase: format!("v-{iter}"),
            losses: hist_v.clone(),
        });

        let n1 = scfg.n_new_at(iter);
        let x0 = sample_initial_positions(
            problem,
            scfg.initial_strategy,
            n1,
            derive_seed(seed, "x0", iter as u64),
        )?;
        let traj = evolve_samples(
            &pot,
            &x0,
            &sets.grid,
            tcfg.substeps,
            problem.domain(),
            true,
        )?;

        let mut added = 0usize;
        for p in 0..traj.n_points() {
            for k in 0..traj.n_slices() {
                if traj.is_alive(p, k) {
                    sets.pde.points.push(CollocPoint {
                        x: traj.position(p, k).to_vec(),
                        t: traj.times[k],
                        slice: Some(k as u32),
                        origin: Origin::Adaptive(iter as u32),
                        alive: true,
                    });
                    added += 1;
                }
            }
        }
        let discarded = n1 * sets.grid.n_slices() - added;
        trajectories.push(traj);

        let (rl2, li) = measure_errors(problem, &u_net, &reference)?;
        iterations.push(IterationMetrics {
            iteration: iter,
            loss_u_first: hist_u.first().copied().unwrap_or(f64::NAN),
            loss_u_last: hist_u.last().copied().unwrap_or(f64::NAN),
            loss_v_first: hist_v.first().copied(),
            loss_v_last: hist_v.last().copied(),
            n_points: sets.pde.n_alive(),
            n_added: added,
            n_discarded: discarded,
            phi_points_skipped: snapshot.skipped_points,
            rel_l2: rl2,
            l_inf: li,
        });
    }

    let batches = build_loss_u_batches(problem, &sets);
    let hist_final = train_u(
        &mut u_net,
        problem,
        &batches,
        tcfg,
        tcfg.epochs_final,
        derive_seed(seed, "train-u-final", 0),
    )
    .inspect_err(|_| dump_abort_state(abort_dir, &u_net, Some(&pot), &sets, "u-final"))?;
    histories.push(PhaseHistory {
        phase: "u-final".to_string(),
        losses: hist_final.clone(),
    });
    let (rl2, li) = measure_errors(problem, &u_net, &reference)?;

    let metrics = RunMetrics {
        problem: problem.name().to_string(),
        method: "msm".to_string(),
        seed,
        iterations,
        final_loss_first: hist_final.first().copied().unwrap_or(f64::NAN),
        final_loss_last: hist_final.last().copied().unwrap_or(f64::NAN),
        rel_l2: rl2,
        l_inf: li,
        n_points_final: sets.pde.n_alive(),
    };
    Ok(RunResult {
        u_net,
        potential: Some(pot),
        sets,
        trajectories,
        histories,
        metrics,
    })
}

/// The vanilla-PINN baseline: uniform sets sized to the matched budget,
/// trained single-phase for the same total epoch count.
pub fn pinn_run(
    problem: &PdeProblem,
    tcfg: &TrainConfig,
    scfg: &SamplingConfig,
    seed: u64,
    eval: &EvalSpec,
) -> Result<RunResult> {
    tcfg.validate()?;
    scfg.validate(0)?;
    let arch = network_arch(problem, &tcfg.hidden);
    let mut u_net = init_network(&arch, derive_seed(seed, "u-net", 0))?;
    let mut baseline_cfg = scfg.clone();
    baseline_cfg.n_pde = scfg.baseline_n;
    baseline_cfg.n_joint_extra = 0;
    baseline_cfg.probe_per_slice = 0;
    let sets = assemble_sets(problem, &baseline_cfg, derive_seed(seed, "sets", 0))?;
    let reference = build_reference(problem, eval)?;

    let epochs = tcfg.outer_iterations * tcfg.epochs_u + tcfg.epochs_final;
    let batches = build_loss_u_batches(problem, &sets);
    let hist = train_u(
        &mut u_net,
        problem,
        &batches,
        tcfg,
        epochs,
        derive_seed(seed, "train-u-final", 0),
    )?;
    let (rl2, li) = measure_errors(problem, &u_net, &reference)?;

    let metrics = RunMetrics {
        problem: problem.name().to_string(),
        method: "pinn".to_string(),
        seed,
        iterations: Vec::new(),
        final_loss_first: hist.first().copied().unwrap_or(f64::NAN),
        final_loss_last: hist.last().copied().unwrap_or(f64::NAN),
        rel_l2: rl2,
        l_inf: li,
        n_points_final: sets.pde.n_alive(),
    };
    Ok(RunResult {
        u_net,
        potential: None,
        sets,
        trajectories: Vec::new(),
        histories: vec![PhaseHistory {
            phase: "u-final".to_string(),
            losses: hist,
        }],
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{BoundaryMode, InitialStrategy};
    use crate::training::GradMode;

    fn tiny_train_cfg() -> TrainConfig {
        TrainConfig {
            outer_iterations: 2,
            epochs_u: 30,
            epochs_v: 20,
            epochs_final: 30,
            learning_rate: 2e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            beta_ic: 1.0,
            beta_bc: 1.0,
            batch_size: 0,
            grad_mode: GradMode::Exact,
            fd_step: 1e-3,
            sampling_exponent: 1.0,
            hidden: vec![8, 8],
            substeps: 2,
        }
    }

    fn tiny_sampling_cfg() -> SamplingConfig {
        SamplingConfig {
            n_pde: 40,
            pde_mode: PdeSetMode::PerSlice,
            n_joint_extra: 0,
            n_initial: 30,
            n_boundary: 16,
            n_new: vec![20, 10],
            n_time_slices: 5,
            initial_strategy: InitialStrategy::PropU0,
            uniform_fraction: 0.2,
            boundary_mode: BoundaryMode::Random,
            probe_per_slice: 0,
            baseline_n: 100,
        }
    }

    fn tiny_eval(problem: &PdeProblem) -> EvalSpec {
        let mut e = EvalSpec::default_for(problem);
        e.lattice = LatticeSpec {
            n_per_axis: 17,
            n_times: 5,
        };
        e.reference_intervals = 128;
        e.reference_dt = 1e-3;
        e.n_mc_weighted = 500;
        e
    }

    #[test]
    fn zero_epochs_leave_network_unchanged() {
        let p = PdeProblem::rotation();
        let scfg = tiny_sampling_cfg();
        let tcfg = tiny_train_cfg();
        let sets = assemble_sets(&p, &scfg, 3).unwrap();
        let batches = build_loss_u_batches(&p, &sets);
        let mut net = init_network(&[3, 8, 1], 5).unwrap();
        let before = net.params();
        let hist = train_u(&mut net, &p, &batches, &tcfg, 0, 1).unwrap();
        assert!(hist.is_empty());
        assert_eq!(net.params(), before);
    }

    #[test]
    fn training_reduces_loss_and_history_has_epoch_length() {
        let p = PdeProblem::rotation();
        let scfg = tiny_sampling_cfg();
        let tcfg = tiny_train_cfg();
        let sets = assemble_sets(&p, &scfg, 3).unwrap();
        let batches = build_loss_u_batches(&p, &sets);
        // Statistically over 3 seeds: ensemble loss must drop.
        let mut improved = 0;
        for seed in 0..3u64 {
            let mut net = init_network(&[3, 8, 1], seed).unwrap();
            let hist = train_u(&mut net, &p, &batches, &tcfg, 60, seed).unwrap();
            assert_eq!(hist.len(), 60);
            if hist.last().unwrap() < hist.first().unwrap() {
                improved += 1;
            }
        }
        assert!(improved >= 2, "training failed to reduce loss on {improved}/3 seeds");
    }

    #[test]
    fn train_v_reduces_velocity_loss_for_drifting_residual() {
        // A residual whose mass moves in +x: a linear-in-x gradient field
        // fits the transport equation far better than phi = 0.
        let n = 60;
        let mut coords = Vec::new();
        let mut r = Vec::new();
        let mut grad_r = Vec::new();
        let mut dt_r = Vec::new();
        for i in 0..n {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            coords.extend_from_slice(&[x, 0.5]);
            // r(x, t) = sin(pi (x - 0.3 t)) travelling profile.
            let phase = std::f64::consts::PI * (x - 0.15);
            r.push(phase.sin());
            grad_r.push(std::f64::consts::PI * phase.cos());
            dt_r.push(-0.3 * std::f64::consts::PI * phase.cos());
        }
        // I(t) constant for the travelling profile; R = 0.
        let snap = ResidualSnapshot::from_raw(
            1,
            1.0,
            vec![0.0, 1.0],
            vec![2.0, 2.0],
            vec![0.0, 0.0],
            coords,
            r,
            grad_r,
            dt_r,
            vec![2.0; n],
            vec![0.0; n],
        );
        let mut improved = 0;
        for seed in 0..3u64 {
            let mut pot =
                VelocityPotential::new(init_network(&[2, 8, 8, 1], 100 + seed).unwrap()).unwrap();
            let zero_pot =
                VelocityPotential::new(init_network(&[2, 8, 1], 0).unwrap().zeroed()).unwrap();
            let base = super::super::loss_v_estimate(&zero_pot, &snap).unwrap();
            let mut cfg = tiny_train_cfg();
            cfg.learning_rate = 5e-3;
            let hist = train_v(&mut pot, &snap, &cfg, 400).unwrap();
            assert_eq!(hist.len(), 400);
            let final_loss = super::super::loss_v_estimate(&pot, &snap).unwrap();
            if final_loss < 0.1 * base {
                improved += 1;
            }
        }
        assert!(improved >= 2, "velocity training too weak on {improved}/3 seeds");
    }

    #[test]
    fn msm_run_set_growth_accounting() {
        let p = PdeProblem::rotation();
        let tcfg = tiny_train_cfg();
        let scfg = tiny_sampling_cfg();
        let eval = tiny_eval(&p);
        let result = msm_run(&p, &tcfg, &scfg, 7, &eval).unwrap();
        let m = &result.metrics;
        assert_eq!(m.iterations.len(), 2);
        let base = scfg.n_pde * scfg.n_time_slices;
        let mut expected = base;
        for (i, it) in m.iterations.iter().enumerate() {
            let n1 = scfg.n_new_at(i + 1);
            assert_eq!(it.n_added + it.n_discarded, n1 * scfg.n_time_slices);
            expected += it.n_added;
            assert_eq!(it.n_points, expected);
        }
        assert_eq!(m.n_points_final, expected);
        // Origin tags partition S.
        let uniform = result
            .sets
            .pde
            .count_by(|pt| matches!(pt.origin, Origin::Uniform | Origin::UniformSpacetime));
        let adaptive = result
            .sets
            .pde
            .count_by(|pt| matches!(pt.origin, Origin::Adaptive(_)));
        assert_eq!(uniform + adaptive, result.sets.pde.len());
        assert_eq!(uniform, base);
    }

    #[test]
    fn msm_zero_iterations_equals_pinn_with_matched_sets() {
        let p = PdeProblem::rotation();
        let mut tcfg = tiny_train_cfg();
        tcfg.outer_iterations = 0;
        tcfg.epochs_final = 25;
        let mut scfg = tiny_sampling_cfg();
        scfg.baseline_n = scfg.n_pde;
        let eval = tiny_eval(&p);
        let a = msm_run(&p, &tcfg, &scfg, 11, &eval).unwrap();
        let b = pinn_run(&p, &tcfg, &scfg, 11, &eval).unwrap();
        assert_eq!(a.metrics.rel_l2.to_bits(), b.metrics.rel_l2.to_bits());
        assert_eq!(a.metrics.l_inf.to_bits(), b.metrics.l_inf.to_bits());
        assert_eq!(
            a.metrics.final_loss_last.to_bits(),
            b.metrics.final_loss_last.to_bits()
        );
    }

    #[test]
    fn msm_run_deterministic() {
        let p = PdeProblem::rotation();
        let tcfg = tiny_train_cfg();
        let scfg = tiny_sampling_cfg();
        let eval = tiny_eval(&p);
        let a = msm_run(&p, &tcfg, &scfg, 42, &eval).unwrap();
        let b = msm_run(&p, &tcfg, &scfg, 42, &eval).unwrap();
        let ja = serde_json::to_string(&a.metrics).unwrap();
        let jb = serde_json::to_string(&b.metrics).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn allen_cahn_smoke_run_with_hard_constraint() {
        let p = PdeProblem::allen_cahn();
        let mut tcfg = tiny_train_cfg();
        tcfg.grad_mode = GradMode::FiniteDifference;
        tcfg.outer_iterations = 1;
        tcfg.epochs_u = 20;
        tcfg.epochs_v = 10;
        tcfg.epochs_final = 20;
        let mut scfg = tiny_sampling_cfg();
        scfg.pde_mode = PdeSetMode::JointSpacetime;
        scfg.n_pde = 50;
        scfg.n_initial = 0;
        scfg.n_boundary = 0;
        scfg.probe_per_slice = 32;
        scfg.initial_strategy = InitialStrategy::Uniform;
        scfg.n_new = vec![15];
        let eval = tiny_eval(&p);
        let result = msm_run(&p, &tcfg, &scfg, 3, &eval).unwrap();
        assert_eq!(result.metrics.iterations.len(), 1);
        assert!(result.metrics.rel_l2.is_finite());
        // Hard constraint: the solution field satisfies IC/BC exactly even
        // with an untrained network.
        let net = &result.u_net;
        let v0 = solution_value(&p, net, &[0.3], 0.0);
        assert!((v0 - 0.3f64.powi(2) * (0.3 * std::f64::consts::PI).cos()).abs() < 1e-12);
        let vb = solution_value(&p, net, &[1.0], 0.7);
        assert!((vb + 1.0).abs() < 1e-12);
    }

    #[test]
    fn aborted_phase_dumps_checkpoints() {
        let p = PdeProblem::rotation();
        let mut tcfg = tiny_train_cfg();
        // A huge learning rate blows the parameters up within a few steps.
        tcfg.learning_rate = 1e18;
        tcfg.outer_iterations = 1;
        tcfg.epochs_u = 50;
        let scfg = tiny_sampling_cfg();
        let eval = tiny_eval(&p);
        let dir = std::env::temp_dir().join("msm_abort_test");
        let _ = std::fs::remove_dir_all(&dir);
        let res = msm_run_with_abort_dir(&p, &tcfg, &scfg, 3, &eval, Some(&dir));
        assert!(res.is_err());
        let entries: Vec<String> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
            .collect();
        assert!(
            entries.iter().any(|n| n.starts_with("abort-") && n.ends_with("-u.json")),
            "no abort checkpoint in {entries:?}"
        );
    }

    #[test]
    fn loss_identical_across_thread_counts() {
        let p = PdeProblem::rotation();
        let scfg = tiny_sampling_cfg();
        let sets = assemble_sets(&p, &scfg, 3).unwrap();
        let batches = build_loss_u_batches(&p, &sets);
        let net = init_network(&[3, 8, 8, 1], 5).unwrap();
        let eval = || {
            super::super::loss_u_gradient(&net, &p, &batches, 1.0, 1.0).unwrap()
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let (l1, g1) = pool1.install(eval);
        let (l4, g4) = pool4.install(eval);
        assert_eq!(l1.to_bits(), l4.to_bits());
        for (a, b) in g1.iter().zip(&g4) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pinn_run_uses_baseline_budget() {
        let p = PdeProblem::rotation();
        let mut tcfg = tiny_train_cfg();
        tcfg.outer_iterations = 1;
        tcfg.epochs_u = 5;
        tcfg.epochs_final = 5;
        let mut scfg = tiny_sampling_cfg();
        scfg.baseline_n = 77;
        let eval = tiny_eval(&p);
        let result = pinn_run(&p, &tcfg, &scfg, 5, &eval).unwrap();
        assert_eq!(result.metrics.n_points_final, 77 * scfg.n_time_slices);
        assert_eq!(result.metrics.method, "pinn");
        // Total epochs matched: M * M1 + M_final.
        assert_eq!(result.histories[0].losses.len(), 10);
    }
}
