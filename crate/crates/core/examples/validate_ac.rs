use msm_core::config::{ExperimentConfig, Preset};
use msm_core::training::{msm_run, pinn_run};
use std::time::Instant;

fn main() {
    let scale: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = ExperimentConfig::default_for("allen_cahn", Preset::Full).unwrap();
    cfg.train.epochs_u /= scale;
    cfg.train.epochs_v /= scale;
    cfg.train.epochs_final /= scale;
    let problem = cfg.problem_instance().unwrap();
    let tcfg = cfg.train_config().unwrap();
    let scfg = cfg.sampling_config().unwrap();
    let eval = cfg.eval_spec().unwrap();

    let t0 = Instant::now();
    let msm = msm_run(&problem, &tcfg, &scfg, seed, &eval).unwrap();
    println!("MSM  seed {seed}: rel_l2 {:.4e}  l_inf {:.4e}  ({:.0}s, {} pts)",
        msm.metrics.rel_l2, msm.metrics.l_inf, t0.elapsed().as_secs_f64(), msm.metrics.n_points_final);
    for it in &msm.metrics.iterations {
        println!("  iter {}: loss_u {:.3e}->{:.3e} loss_v {:.3e}->{:.3e} rel_l2 {:.3e} l_inf {:.3e} added {} discarded {}",
            it.iteration, it.loss_u_first, it.loss_u_last,
            it.loss_v_first.unwrap_or(f64::NAN), it.loss_v_last.unwrap_or(f64::NAN),
            it.rel_l2, it.l_inf, it.n_added, it.n_discarded);
    }

    let t0 = Instant::now();
    let pinn = pinn_run(&problem, &tcfg, &scfg, seed, &eval).unwrap();
    println!("PINN seed {seed}: rel_l2 {:.4e}  l_inf {:.4e}  ({:.0}s, {} pts)",
        pinn.metrics.rel_l2, pinn.metrics.l_inf, t0.elapsed().as_secs_f64(), pinn.metrics.n_points_final);
}
