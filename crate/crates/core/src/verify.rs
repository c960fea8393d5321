//! Machine-checkable verification suites, shared by the CLI `verify`
//! command and the acceptance tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::autodiff::{init_network, param_gradient, DenseNetwork, Scalar};
use crate::domain::BoxDomain;
use crate::error::Result;
use crate::flow::{
    evolve_samples, pushforward_check, AnalyticField, VelocityField, VelocityPotential,
};
use crate::pde::PdeProblem;
use crate::sampling::{assemble_pde_set, sample_uniform_box, PdeSetMode, TimeGrid};
use crate::training::{
    loss_u_estimate, loss_v_estimate, residual_snapshot, build_loss_u_batches, assemble_sets,
    GradMode, ResidualSnapshot, SamplingConfig, TrainingSets,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub wall_s: f64,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Autodiff,
    Flow,
    Transport,
    Losses,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Suite> {
        match s {
            "autodiff" => Ok(Suite::Autodiff),
            "flow" => Ok(Suite::Flow),
            "transport" => Ok(Suite::Transport),
            "losses" => Ok(Suite::Losses),
            other => Err(crate::error::Error::config(format!(
                "unknown verify suite '{other}' (autodiff|flow|transport|losses)"
            ))),
        }
    }

    pub const ALL: [Suite; 4] = [Suite::Autodiff, Suite::Flow, Suite::Transport, Suite::Losses];

    pub fn label(&self) -> &'static str {
        match self {
            Suite::Autodiff => "autodiff",
            Suite::Flow => "flow",
            Suite::Transport => "transport",
            Suite::Losses => "losses",
        }
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    let scale = want.abs().max(got.abs());
    if scale < 1e-8 {
        (got - want).abs()
    } else {
        (got - want).abs() / scale
    }
}

fn random_small_net(rng: &mut ChaCha8Rng) -> (DenseNetwork, Vec<f64>) {
    let dim = rng.random_range(1..=3usize);
    let width = rng.random_range(3..=8usize);
    let depth = rng.random_range(1..=2usize);
    let mut arch = vec![dim];
    arch.extend(std::iter::repeat_n(width, depth));
    arch.push(1);
    let net = init_network(&arch, rng.random_range(0..u64::MAX / 2)).unwrap();
    let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    (net, x)
}

/// Acceptance criterion 1: input jets and parameter gradients of 100 random
/// small networks match central finite differences.
pub fn check_autodiff_oracle(n_networks: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAD01);
    let mut worst = 0.0f64;
    let mut worst_what = String::new();
    for k in 0..n_networks {
        let (net, x) = random_small_net(&mut rng);
        let dim = x.len();
        let jet = net.input_jet(&x).unwrap();
        let h = 1e-5;
        // Input gradient and Hessian against FD of forward().
        for i in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (net.forward(&xp).unwrap() - net.forward(&xm).unwrap()) / (2.0 * h);
            let e = rel_err(jet.grad[i], fd);
            if e > worst {
                worst = e;
                worst_what = format!("net {k} grad[{i}]");
            }
        }
        // Second derivatives by Richardson-extrapolated central stencils:
        // truncation O(h^4) keeps the oracle below the 1e-6 gate.
        let second_fd = |i: usize, j: usize, hh: f64| {
            if i == j {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += hh;
                xm[i] -= hh;
                (net.forward(&xp).unwrap() - 2.0 * net.forward(&x).unwrap()
                    + net.forward(&xm).unwrap())
                    / (hh * hh)
            } else {
                let mut acc = 0.0;
                for (si, sj, sign) in
                    [(hh, hh, 1.0), (hh, -hh, -1.0), (-hh, hh, -1.0), (-hh, -hh, 1.0)]
                {
                    let mut xs = x.clone();
                    xs[i] += si;
                    xs[j] += sj;
                    acc += sign * net.forward(&xs).unwrap();
                }
                acc / (4.0 * hh * hh)
            }
        };
        let hh = 2e-3;
        for i in 0..dim {
            for j in 0..dim {
                let fd = (4.0 * second_fd(i, j, hh / 2.0) - second_fd(i, j, hh)) / 3.0;
                let e = rel_err(jet.hess(i, j), fd);
                if e > worst {
                    worst = e;
                    worst_what = format!("net {k} hess[{i}{j}]");
                }
            }
        }
        // Parameter gradient through a jet-reading closure.
        let grad = param_gradient(&net, |_, t| {
            let jet = t.input_jet(&x);
            let mut r = jet.value + jet.grad[0].scale(0.5);
            if dim > 1 {
                r = r + jet.hess(0, 1).scale(0.25);
            }
            r = r + jet.hess(0, 0).scale(-0.3);
            r * r
        })
        .unwrap();
        let eval = |n: &DenseNetwork| {
            let jet = n.input_jet(&x).unwrap();
            let mut r = jet.value + 0.5 * jet.grad[0];
            if dim > 1 {
                r += 0.25 * jet.hess(0, 1);
            }
            r += -0.3 * jet.hess(0, 0);
            r * r
        };
        let n_params = net.param_count();
        let stride = (n_params / 5).max(1);
        for i in (0..n_params).step_by(stride) {
            let hp = 1e-5;
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut p = net.params();
            p.0[i] += hp;
            plus.set_params(&p).unwrap();
            p.0[i] -= 2.0 * hp;
            minus.set_params(&p).unwrap();
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * hp);
            let e = rel_err(grad.0[i], fd);
            if e > worst {
                worst = e;
                worst_what = format!("net {k} param[{i}]");
            }
        }
    }
    CheckResult::new(
        "autodiff-oracle",
        worst < 1e-6,
        format!("worst relative error {worst:.2e} at {worst_what} over {n_networks} networks"),
    )
}

pub fn check_hessian_symmetry() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAD02);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (net, x) = random_small_net(&mut rng);
        let jet = net.input_jet(&x).unwrap();
        let scale = 1.0
            + jet
                .hess_row_major()
                .iter()
                .fold(0.0f64, |m, h| m.max(h.abs()));
        worst = worst.max(jet.hess_asymmetry() / scale);
    }
    CheckResult::new(
        "hessian-symmetry",
        worst < 1e-12,
        format!("worst normalized asymmetry {worst:.2e}"),
    )
}

pub fn check_evaluation_purity() -> CheckResult {
    let net = init_network(&[3, 8, 8, 1], 7).unwrap();
    let x = [0.21, -0.43, 0.65];
    let mut ok = true;
    for _ in 0..5 {
        let a = net.input_jet(&x).unwrap();
        let b = net.input_jet(&x).unwrap();
        ok &= a.value.to_bits() == b.value.to_bits();
        ok &= a
            .grad
            .iter()
            .zip(&b.grad)
            .all(|(p, q)| p.to_bits() == q.to_bits());
        ok &= net.forward(&x).unwrap().to_bits() == net.forward(&x).unwrap().to_bits();
    }
    CheckResult::new(
        "evaluation-purity",
        ok,
        "repeated evaluations bit-identical".to_string(),
    )
}

fn linear_1d_field() -> impl VelocityField {
    AnalyticField {
        dim: 1,
        vel: |x: &[f64], _: f64, out: &mut [f64]| out[0] = x[0],
        div: |_: &[f64], _: f64| 1.0,
    }
}

/// Acceptance criterion 2: linear flow endpoint and log-det within 1e-9 at
/// 100 substeps, and fourth-order convergence under substep halving.
pub fn check_flow_oracle() -> CheckResult {
    let grid = TimeGrid::uniform(1.0, 2).unwrap();
    let domain = BoxDomain::cube(-100.0, 100.0, 1).unwrap();
    let traj = evolve_samples(&linear_1d_field(), &[vec![0.5]], &grid, 100, &domain, true).unwrap();
    let want = 0.5 * std::f64::consts::E;
    let pos_err = (traj.position(0, 1)[0] - want).abs();
    let ld_err = (traj.logdet_at(0, 1).unwrap() - 1.0).abs();

    let mut errors = Vec::new();
    for substeps in [2usize, 4, 8, 16] {
        let t = evolve_samples(&linear_1d_field(), &[vec![0.5]], &grid, substeps, &domain, false)
            .unwrap();
        errors.push((t.position(0, 1)[0] - want).abs());
    }
    let min_ratio = errors
        .windows(2)
        .map(|w| w[0] / w[1])
        .fold(f64::INFINITY, f64::min);
    let passed = pos_err < 1e-9 && ld_err < 1e-9 && min_ratio >= 8.0;
    CheckResult::new(
        "flow-map-oracle",
        passed,
        format!(
            "position error {pos_err:.2e}, logdet error {ld_err:.2e}, worst halving ratio {min_ratio:.1}"
        ),
    )
}

/// Log-det consistency for a supplied field with known trace: the
/// parameterization lets a mutation test inject a broken divergence.
pub fn check_logdet_consistency(field: &dyn VelocityField, expected_logdet: f64) -> CheckResult {
    let grid = TimeGrid::uniform(1.0, 2).unwrap();
    let domain = BoxDomain::cube(-100.0, 100.0, field.dim()).unwrap();
    let x0 = vec![vec![0.1; field.dim()]];
    let traj = evolve_samples(field, &x0, &grid, 50, &domain, true).unwrap();
    let err = (traj.logdet_at(0, 1).unwrap() - expected_logdet).abs();
    CheckResult::new(
        "logdet-consistency",
        err < 1e-8,
        format!("|logdet - {expected_logdet}| = {err:.2e}"),
    )
}

pub fn check_logdet_linear_and_divergence_free() -> CheckResult {
    let linear = AnalyticField {
        dim: 2,
        vel: |x: &[f64], _: f64, out: &mut [f64]| {
            out[0] = 0.5 * x[0] + 0.3 * x[1];
            out[1] = -0.2 * x[0] + 1.0 * x[1];
        },
        div: |_: &[f64], _: f64| 1.5,
    };
    let a = check_logdet_consistency(&linear, 1.5);
    let rotation = AnalyticField {
        dim: 2,
        vel: |x: &[f64], _: f64, out: &mut [f64]| {
            out[0] = -x[1];
            out[1] = x[0];
        },
        div: |_: &[f64], _: f64| 0.0,
    };
    let b = check_logdet_consistency(&rotation, 0.0);
    CheckResult::new(
        "logdet-trace",
        a.passed && b.passed,
        format!("trace 1.5: {}; divergence-free: {}", a.detail, b.detail),
    )
}

pub fn check_potential_gradient_and_curl() -> CheckResult {
    let mut worst_v = 0.0f64;
    let mut worst_curl = 0.0f64;
    for seed in 0..5u64 {
        let net = init_network(&[3, 8, 6, 1], 40 + seed).unwrap();
        let pot = VelocityPotential::new(net.clone()).unwrap();
        let (x, t) = ([0.25, -0.4], 0.6);
        let v = pot.velocity_at(&x, t);
        let h = 1e-5;
        for i in 0..2 {
            let mut xp = [x[0], x[1], t];
            let mut xm = xp;
            xp[i] += h;
            xm[i] -= h;
            let fd = (net.forward(&xp).unwrap() - net.forward(&xm).unwrap()) / (2.0 * h);
            worst_v = worst_v.max(rel_err(v[i], fd));
        }
        let jet = net.input_jet(&[x[0], x[1], t]).unwrap();
        let scale = 1.0 + jet.hess(0, 1).abs();
        worst_curl = worst_curl.max((jet.hess(0, 1) - jet.hess(1, 0)).abs() / scale);
    }
    CheckResult::new(
        "velocity-gradient-and-curl",
        worst_v < 1e-6 && worst_curl < 1e-12,
        format!("velocity FD error {worst_v:.2e}, curl {worst_curl:.2e}"),
    )
}

/// Acceptance criterion 3: Monte-Carlo pushforward of a standard normal
/// under the linear flow matches `e^2` within 3 standard errors.
pub fn check_pushforward_linear(n_samples: usize) -> CheckResult {
    let quad = BoxDomain::cube(-30.0, 30.0, 1).unwrap();
    let var_t = (2.0f64).exp();
    let check = pushforward_check(
        &linear_1d_field(),
        |rng| vec![<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)],
        move |x| (-x[0] * x[0] / (2.0 * var_t)).exp() / (2.0 * std::f64::consts::PI * var_t).sqrt(),
        |x| x[0] * x[0],
        n_samples,
        1.0,
        64,
        &quad,
        2001,
        0xF10,
    )
    .unwrap();
    let dev = (check.mc_estimate - check.analytic).abs();
    let passed = dev < 3.0 * check.std_err && (check.analytic - var_t).abs() < 1e-8;
    CheckResult::new(
        "pushforward-linear-gaussian",
        passed,
        format!(
            "mc {:.5} vs analytic {:.5} (dev {:.3} stderr)",
            check.mc_estimate,
            check.analytic,
            dev / check.std_err
        ),
    )
}

pub fn check_pushforward_identity() -> CheckResult {
    let zero = AnalyticField {
        dim: 1,
        vel: |_: &[f64], _: f64, out: &mut [f64]| out.fill(0.0),
        div: |_: &[f64], _: f64| 0.0,
    };
    let quad = BoxDomain::cube(-8.0, 8.0, 1).unwrap();
    let check = pushforward_check(
        &zero,
        |rng| vec![<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)],
        |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        |x| x[0] * x[0],
        20_000,
        1.0,
        8,
        &quad,
        801,
        0xF11,
    )
    .unwrap();
    let dev = (check.mc_estimate - check.analytic).abs();
    CheckResult::new(
        "pushforward-identity",
        dev < 3.0 * check.std_err,
        format!("mc {:.5} vs analytic {:.5}", check.mc_estimate, check.analytic),
    )
}

pub fn check_mass_conservation() -> CheckResult {
    let grid = TimeGrid::uniform(1.0, 6).unwrap();
    let domain = BoxDomain::cube(-100.0, 100.0, 1).unwrap();
    let x0: Vec<Vec<f64>> = vec![vec![0.1], vec![0.5], vec![-1.2], vec![2.0]];
    let traj = evolve_samples(&linear_1d_field(), &x0, &grid, 50, &domain, true).unwrap();
    let pdf = |x: f64, var: f64| {
        (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let mut worst = 0.0f64;
    for p in 0..x0.len() {
        for k in 0..grid.n_slices() {
            let t = grid.time(k);
            let lhs = pdf(x0[p][0], 1.0) * (-traj.logdet_at(p, k).unwrap()).exp();
            let rhs = pdf(traj.position(p, k)[0], (2.0 * t).exp());
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    CheckResult::new(
        "mass-conservation",
        worst < 1e-6,
        format!("worst relative change-of-variables defect {worst:.2e}"),
    )
}

/// Acceptance criterion 4: exact solutions annihilate their residuals.
pub fn check_residual_annihilation(points_per_problem: usize) -> CheckResult {
    let problems = [
        PdeProblem::rotation(),
        PdeProblem::burgers(),
        PdeProblem::fokker_planck(),
        PdeProblem::advection6d(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xE5AC);
    let mut worst = 0.0f64;
    let mut worst_p = "";
    for p in &problems {
        for _ in 0..points_per_problem {
            let x: Vec<f64> = (0..p.spatial_dim())
                .map(|i| {
                    let (lo, hi) = (p.domain().lo()[i], p.domain().hi()[i]);
                    let m = 0.02 * (hi - lo);
                    rng.random_range(lo + m..hi - m)
                })
                .collect();
            let t = rng.random_range(0.0..p.horizon());
            let jet = p.exact_jet(&x, t).unwrap();
            let r = p.residual_jet(&jet, &x, t).abs();
            if r > worst {
                worst = r;
                worst_p = p.name();
            }
        }
    }
    CheckResult::new(
        "residual-annihilation",
        worst < 1e-5,
        format!("worst |r| = {worst:.2e} ({worst_p})"),
    )
}

/// Acceptance criterion 5: the space-constant residual construction
/// evaluates the velocity loss to an algebraic zero.
pub fn check_loss_v_algebraic_zero() -> CheckResult {
    let n_slices = 6;
    let pts_per_slice = 8;
    let times: Vec<f64> = (0..n_slices)
        .map(|k| k as f64 / (n_slices - 1) as f64)
        .collect();
    let mut coords = Vec::new();
    let mut r = Vec::new();
    let mut grad_r = Vec::new();
    let mut dt_r = Vec::new();
    let mut i_at = Vec::new();
    let mut q_at = Vec::new();
    for &t in &times {
        for j in 0..pts_per_slice {
            coords.extend_from_slice(&[(j as f64 + 0.5) / pts_per_slice as f64, t]);
            r.push(t.exp());
            grad_r.push(0.0);
            dt_r.push(t.exp());
            i_at.push((2.0 * t).exp());
            q_at.push(2.0 * (2.0 * t).exp());
        }
    }
    let integral: Vec<f64> = times.iter().map(|t| (2.0 * t).exp()).collect();
    let quotient: Vec<f64> = times.iter().map(|t| 2.0 * (2.0 * t).exp()).collect();
    let snap = ResidualSnapshot::from_raw(
        1, 1.0, times, integral, quotient, coords, r, grad_r, dt_r, i_at, q_at,
    );
    let pot = VelocityPotential::new(init_network(&[2, 4, 1], 0).unwrap().zeroed()).unwrap();
    let loss = loss_v_estimate(&pot, &snap).unwrap();
    CheckResult::new(
        "loss-v-algebraic-zero",
        loss < 1e-20,
        format!("loss = {loss:.2e}"),
    )
}

pub fn check_loss_gradients_vs_fd() -> CheckResult {
    let p = PdeProblem::rotation();
    let scfg = SamplingConfig {
        n_pde: 15,
        pde_mode: PdeSetMode::PerSlice,
        n_joint_extra: 0,
        n_initial: 10,
        n_boundary: 8,
        n_new: vec![5],
        n_time_slices: 4,
        initial_strategy: crate::sampling::InitialStrategy::Uniform,
        uniform_fraction: 0.2,
        boundary_mode: crate::sampling::BoundaryMode::Random,
        probe_per_slice: 0,
        baseline_n: 10,
    };
    let sets: TrainingSets = assemble_sets(&p, &scfg, 5).unwrap();
    let batches = build_loss_u_batches(&p, &sets);
    let net = init_network(&[3, 4, 1], 3).unwrap();
    let (_, grad_u) = crate::training::loss_u_gradient(&net, &p, &batches, 1.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    let h = 1e-6;
    for i in (0..net.param_count()).step_by(2) {
        let mut plus = net.clone();
        let mut minus = net.clone();
        let mut pp = net.params();
        pp.0[i] += h;
        plus.set_params(&pp).unwrap();
        pp.0[i] -= 2.0 * h;
        minus.set_params(&pp).unwrap();
        let fd = (loss_u_estimate(&plus, &p, &batches, 1.0, 1.0).unwrap()
            - loss_u_estimate(&minus, &p, &batches, 1.0, 1.0).unwrap())
            / (2.0 * h);
        worst = worst.max(rel_err(grad_u[i], fd).min((grad_u[i] - fd).abs() / (1.0 + fd.abs())));
    }

    let u_net = init_network(&[3, 5, 1], 9).unwrap();
    let snap =
        residual_snapshot(&u_net, &p, &sets.pde, &sets.pde, &sets.grid, GradMode::Exact, 1e-3, 1.0)
            .unwrap();
    let pot = VelocityPotential::new(init_network(&[3, 4, 1], 21).unwrap()).unwrap();
    let (_, grad_v) = crate::training::loss_v_gradient(&pot, &snap).unwrap();
    for i in (0..pot.net().param_count()).step_by(2) {
        let mut pp = pot.net().params();
        pp.0[i] += h;
        let mut plus = pot.clone();
        plus.net_mut().set_params(&pp).unwrap();
        pp.0[i] -= 2.0 * h;
        let mut minus = pot.clone();
        minus.net_mut().set_params(&pp).unwrap();
        let fd = (loss_v_estimate(&plus, &snap).unwrap() - loss_v_estimate(&minus, &snap).unwrap())
            / (2.0 * h);
        worst = worst.max((grad_v[i] - fd).abs() / (1.0 + fd.abs()));
    }
    CheckResult::new(
        "loss-gradients-vs-fd",
        worst < 1e-5,
        format!("worst relative gradient error {worst:.2e}"),
    )
}

pub fn check_loss_u_annihilation() -> CheckResult {
    // The exact solution's jets drive the mean squared residual to zero on
    // random collocation sets.
    let p = PdeProblem::rotation();
    let grid = TimeGrid::uniform(1.0, 5).unwrap();
    let s = assemble_pde_set(&p, 50, &grid, PdeSetMode::PerSlice, 17).unwrap();
    let mut acc = 0.0;
    for pt in &s.points {
        let jet = p.exact_jet(&pt.x, pt.t).unwrap();
        let r = p.residual_jet(&jet, &pt.x, pt.t);
        acc += r * r;
    }
    let loss = acc / s.len() as f64;
    CheckResult::new(
        "loss-u-annihilation",
        loss < 1e-10,
        format!("mean squared residual of exact solution {loss:.2e}"),
    )
}

pub fn check_rejection_distribution() -> CheckResult {
    // Constant density restricted to a sub-box: all samples inside, and the
    // sub-box fraction under a uniform density matches its volume share.
    let b = BoxDomain::cube(0.0, 1.0, 2).unwrap();
    let inside = |x: &[f64]| (x[0] < 0.3) as u8 as f64;
    let pts =
        crate::sampling::sample_proportional(|x| inside(x), &b, 3000, 3, Some(1.0)).unwrap();
    let all_inside = pts.iter().all(|p| inside(p) == 1.0);
    let n = 30_000;
    let uni = sample_uniform_box(&b, n, 5).unwrap();
    let q = 0.3;
    let frac = uni.iter().filter(|p| p[0] < q).count() as f64 / n as f64;
    let tol = 3.0 * (q * (1.0 - q) / n as f64).sqrt();
    CheckResult::new(
        "rejection-distribution",
        all_inside && (frac - q).abs() < tol,
        format!("indicator support exact: {all_inside}; uniform fraction {frac:.4} vs {q}"),
    )
}

pub fn run_suite(suite: Suite) -> SuiteReport {
    let start = std::time::Instant::now();
    let checks = match suite {
        Suite::Autodiff => vec![
            check_autodiff_oracle(100),
            check_hessian_symmetry(),
            check_evaluation_purity(),
        ],
        Suite::Flow => vec![
            check_flow_oracle(),
            check_logdet_linear_and_divergence_free(),
            check_potential_gradient_and_curl(),
        ],
        Suite::Transport => vec![
            check_pushforward_identity(),
            check_pushforward_linear(100_000),
            check_mass_conservation(),
            check_rejection_distribution(),
        ],
        Suite::Losses => vec![
            check_residual_annihilation(100),
            check_loss_v_algebraic_zero(),
            check_loss_gradients_vs_fd(),
            check_loss_u_annihilation(),
        ],
    };
    SuiteReport {
        suite: suite.label().to_string(),
        passed: checks.iter().all(|c| c.passed),
        wall_s: start.elapsed().as_secs_f64(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for suite in Suite::ALL {
            let report = run_suite(suite);
            for c in &report.checks {
                assert!(c.passed, "{}::{} failed: {}", report.suite, c.name, c.detail);
            }
        }
    }

    #[test]
    fn broken_divergence_fails_logdet_check() {
        // Mutation check: a sign error in the divergence must be caught.
        let broken = AnalyticField {
            dim: 1,
            vel: |x: &[f64], _: f64, out: &mut [f64]| out[0] = x[0],
            div: |_: &[f64], _: f64| -1.0,
        };
        let res = check_logdet_consistency(&broken, 1.0);
        assert!(!res.passed, "broken divergence slipped through: {}", res.detail);
    }
}
