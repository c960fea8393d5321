use msm_core::autodiff::*;
use msm_core::pde::PdeProblem;
use msm_core::sampling::*;
use msm_core::training::*;
use std::time::Instant;

fn main() {
    // Width-64 net, Allen-Cahn-like: 2 inputs, lap channel.
    let p = PdeProblem::allen_cahn();
    let net = init_network(&[2, 64, 64, 64, 1], 7).unwrap();
    let grid = TimeGrid::uniform(1.0, 11).unwrap();
    let s = assemble_pde_set(&p, 3200, &grid, PdeSetMode::JointSpacetime, 1).unwrap();
    let sets = TrainingSets { grid: grid.clone(), pde: s, initial: CollocationSet::default(), boundary: CollocationSet::default(), probe: CollocationSet::default() };
    let batches = build_loss_u_batches(&p, &sets);
    // warmup
    let _ = loss_u_estimate(&net, &p, &batches, 1.0, 1.0).unwrap();
    let t0 = Instant::now();
    let mut net2 = net.clone();
    let cfg = TrainConfig {
        outer_iterations: 0, epochs_u: 0, epochs_v: 0, epochs_final: 0,
        learning_rate: 1e-3, adam_beta1: 0.9, adam_beta2: 0.999, adam_epsilon: 1e-8,
        beta_ic: 1.0, beta_bc: 1.0, batch_size: 0,
        grad_mode: GradMode::FiniteDifference, fd_step: 1e-3, sampling_exponent: 1.0,
        hidden: vec![64, 64, 64], substeps: 5,
    };
    let hist = train_u(&mut net2, &p, &batches, &cfg, 20, 1).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("AC 3200 joint pts, 20 epochs: {:.3}s -> {:.1} ms/epoch ({:.2} us/pt)", dt, dt/20.0*1000.0, dt/20.0/3200.0*1e6);
    println!("loss {} -> {}", hist.first().unwrap(), hist.last().unwrap());

    // Rotation-like: 3 inputs, no laplacian, 11000 pts
    let p = PdeProblem::rotation();
    let net = init_network(&[3, 64, 64, 64, 1], 7).unwrap();
    let s = assemble_pde_set(&p, 1000, &grid, PdeSetMode::PerSlice, 1).unwrap();
    let sets = TrainingSets { grid: grid.clone(), pde: s, initial: CollocationSet::default(), boundary: CollocationSet::default(), probe: CollocationSet::default() };
    let batches = build_loss_u_batches(&p, &sets);
    let _ = loss_u_estimate(&net, &p, &batches, 1.0, 1.0).unwrap();
    let t0 = Instant::now();
    let mut net2 = net.clone();
    let _ = train_u(&mut net2, &p, &batches, &cfg, 10, 1).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("rotation 11000 pts, 10 epochs: {:.3}s -> {:.1} ms/epoch ({:.2} us/pt)", dt, dt/10.0*1000.0, dt/10.0/11000.0*1e6);

    // 6D advection: 8 grads, no lap
    let p = PdeProblem::advection6d();
    let net = init_network(&[7, 64, 64, 64, 1], 7).unwrap();
    let s = assemble_pde_set(&p, 5000, &grid, PdeSetMode::PerSlice, 1).unwrap();
    let sets = TrainingSets { grid: grid.clone(), pde: s, initial: CollocationSet::default(), boundary: CollocationSet::default(), probe: CollocationSet::default() };
    let batches = build_loss_u_batches(&p, &sets);
    let t0 = Instant::now();
    let mut net2 = net.clone();
    let _ = train_u(&mut net2, &p, &batches, &cfg, 2, 1).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("advection 55000 pts, 2 epochs: {:.3}s -> {:.1} ms/epoch ({:.2} us/pt)", dt, dt/2.0*1000.0, dt/2.0/55000.0*1e6);
}
