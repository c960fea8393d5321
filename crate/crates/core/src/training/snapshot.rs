//! Frozen residual data that drives the velocity loss.
//!
//! After a solution-training phase, the residual `r`, its derivatives, and
//! per-slice estimates of `I(t) = integral of r^{2 gamma}` are captured once.
//! The velocity loss then reads only this snapshot; it never touches the
//! solution network again, so mutating the network between phases cannot leak
//! into velocity training.

use rayon::prelude::*;

use crate::autodiff::{ChannelJet, ChannelSpec, ChannelWorkspace, DenseNetwork};
use crate::error::{Error, Result};
use crate::flow::VelocityPotential;
use crate::numerics::lerp_table;
use crate::pde::{PdeProblem, ProblemKind};
use crate::sampling::{CollocationSet, Origin, TimeGrid};

use super::batches::{residual_at, u_channel_spec, CHUNK};

/// How snapshot derivatives of the residual are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    /// One jet order deeper; available when the residual is first-order.
    Exact,
    /// Central finite differences of the residual with a relative step.
    FiniteDifference,
}

impl GradMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(GradMode::Exact),
            "finite_difference" => Ok(GradMode::FiniteDifference),
            other => Err(Error::config(format!("unknown grad_mode '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GradMode::Exact => "exact",
            GradMode::FiniteDifference => "finite_difference",
        }
    }
}

/// Per-point residual data plus per-slice integral estimates, frozen from the
/// last solution-training phase.
#[derive(Debug, Clone)]
pub struct ResidualSnapshot {
    pub spatial_dim: usize,
    pub gamma: f64,
    pub slice_times: Vec<f64>,
    /// `I_k`: volume x mean of `r^{2 gamma}` over uniform points of slice k.
    pub integral: Vec<f64>,
    /// Difference quotient `R_k = dI/dt`, one-sided at the ends.
    pub quotient: Vec<f64>,
    /// Coordinates `(x, t)` of the retained velocity-training points.
    pub coords: Vec<f64>,
    pub r: Vec<f64>,
    /// Spatial residual gradient, `[point][dim]`.
    pub grad_r: Vec<f64>,
    pub dt_r: Vec<f64>,
    /// `I` and `R` resolved at each point's time.
    pub integral_at: Vec<f64>,
    pub quotient_at: Vec<f64>,
    /// Points dropped because their slice integral was not positive.
    pub skipped_points: usize,
}

impl ResidualSnapshot {
    pub fn n_points(&self) -> usize {
        self.r.len()
    }

    pub fn point(&self, i: usize) -> (&[f64], f64) {
        let w = self.spatial_dim + 1;
        let row = &self.coords[i * w..(i + 1) * w];
        (&row[..self.spatial_dim], row[self.spatial_dim])
    }

    /// Directly assembles a snapshot from raw per-point data (tests and
    /// verification suites).
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        spatial_dim: usize,
        gamma: f64,
        slice_times: Vec<f64>,
        integral: Vec<f64>,
        quotient: Vec<f64>,
        coords: Vec<f64>,
        r: Vec<f64>,
        grad_r: Vec<f64>,
        dt_r: Vec<f64>,
        integral_at: Vec<f64>,
        quotient_at: Vec<f64>,
    ) -> Self {
        ResidualSnapshot {
            spatial_dim,
            gamma,
            slice_times,
            integral,
            quotient,
            coords,
            r,
            grad_r,
            dt_r,
            integral_at,
            quotient_at,
            skipped_points: 0,
        }
    }
}

/// Exact residual derivatives for first-order residual operators, from the
/// full second-order jet of the solution network.
fn exact_residual_derivatives(
    problem: &PdeProblem,
    net: &DenseNetwork,
    x: &[f64],
    t: f64,
) -> (f64, Vec<f64>, f64) {
    let d = problem.spatial_dim();
    let mut input = Vec::with_capacity(d + 1);
    input.extend_from_slice(x);
    input.push(t);
    let jet = net.input_jet(&input).expect("dims checked");
    let ti = d; // time index
    match problem.kind() {
        ProblemKind::Rotation { .. } => {
            let (s, c) = (t.sin(), t.cos());
            let r = jet.dt() - jet.dx(0) * s + jet.dx(1) * c;
            let grad_r = vec![
                jet.hess(0, ti) - jet.hess(0, 0) * s + jet.hess(0, 1) * c,
                jet.hess(1, ti) - jet.hess(0, 1) * s + jet.hess(1, 1) * c,
            ];
            let dt_r = jet.hess(ti, ti) - jet.hess(0, ti) * s + jet.hess(1, ti) * c
                - jet.dx(0) * c
                - jet.dx(1) * s;
            (r, grad_r, dt_r)
        }
        ProblemKind::AdvectionNd { dim, .. } => {
            let r = jet.dt() + (0..*dim).map(|i| jet.dx(i)).sum::<f64>();
            let grad_r = (0..*dim)
                .map(|i| jet.hess(i, ti) + (0..*dim).map(|j| jet.hess(i, j)).sum::<f64>())
                .collect();
            let dt_r = jet.hess(ti, ti) + (0..*dim).map(|j| jet.hess(j, ti)).sum::<f64>();
            (r, grad_r, dt_r)
        }
        _ => unreachable!("exact mode is validated to first-order residuals"),
    }
}

/// FD residual derivatives with steps relative to each axis length.
fn fd_residual_derivatives(
    problem: &PdeProblem,
    net: &DenseNetwork,
    row: &[f64],
    h_rel: f64,
    ws: &mut ChannelWorkspace,
) -> (f64, Vec<f64>, f64) {
    let d = problem.spatial_dim();
    let r = residual_at(problem, net, row, ws);
    let mut shifted = row.to_vec();
    let mut grad_r = Vec::with_capacity(d);
    for i in 0..d {
        let h = h_rel * problem.domain().axis_len(i);
        shifted[i] = row[i] + h;
        let rp = residual_at(problem, net, &shifted, ws);
        shifted[i] = row[i] - h;
        let rm = residual_at(problem, net, &shifted, ws);
        shifted[i] = row[i];
        grad_r.push((rp - rm) / (2.0 * h));
    }
    let ht = h_rel * problem.horizon();
    shifted[d] = row[d] + ht;
    let rp = residual_at(problem, net, &shifted, ws);
    shifted[d] = row[d] - ht;
    let rm = residual_at(problem, net, &shifted, ws);
    let dt_r = (rp - rm) / (2.0 * ht);
    (r, grad_r, dt_r)
}

/// Captures residual data for velocity training.
///
/// `phi_points` are the points the velocity loss will average over (alive
/// points of `S`, possibly augmented); `integral_points` supply the per-slice
/// uniform samples that feed the integral estimates.
pub fn residual_snapshot(
    net: &DenseNetwork,
    problem: &PdeProblem,
    phi_points: &CollocationSet,
    integral_points: &CollocationSet,
    grid: &TimeGrid,
    mode: GradMode,
    h_rel: f64,
    gamma: f64,
) -> Result<ResidualSnapshot> {
    if mode == GradMode::Exact && problem.residual_order() > 1 {
        return Err(Error::config(format!(
            "exact snapshot derivatives need a first-order residual; '{}' is order {}",
            problem.name(),
            problem.residual_order()
        )));
    }
    let d = problem.spatial_dim();
    let spec = u_channel_spec(problem);
    let volume = problem.domain().volume();
    let n_slices = grid.n_slices();

    // Per-slice integral estimates from uniform-origin points.
    let mut sums = vec![0.0f64; n_slices];
    let mut counts = vec![0usize; n_slices];
    {
        let rows: Vec<(usize, Vec<f64>)> = integral_points
            .points
            .iter()
            .filter(|p| p.alive && matches!(p.origin, Origin::Uniform))
            .filter_map(|p| {
                p.slice.map(|k| {
                    let mut row = p.x.clone();
                    row.push(p.t);
                    (k as usize, row)
                })
            })
            .collect();
        let r2g: Vec<(usize, f64)> = rows
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut ws = ChannelWorkspace::new(net, spec);
                chunk
                    .iter()
                    .map(|(k, row)| {
                        let r = residual_at(problem, net, row, &mut ws);
                        (*k, (r * r).powf(gamma))
                    })
                    .collect::<Vec<_>>()
            })
            .reduce(Vec::new, |mut a, mut b| {
                a.append(&mut b);
                a
            });
        // The parallel reduce order does not matter here because the values
        // are re-accumulated per slice in point order below.
        let mut sorted = r2g;
        sorted.sort_by_key(|(k, _)| *k);
        for (k, v) in sorted {
            sums[k] += v;
            counts[k] += 1;
        }
    }
    let mut integral = vec![0.0; n_slices];
    for k in 0..n_slices {
        if counts[k] == 0 {
            return Err(Error::numeric(format!(
                "slice {k} has no uniform points; integral estimator undefined"
            )));
        }
        integral[k] = volume * sums[k] / counts[k] as f64;
    }

    // Difference quotient, one-sided at the ends.
    let mut quotient = vec![0.0; n_slices];
    for k in 0..n_slices {
        let (a, b) = if k == 0 {
            (0, 1)
        } else if k == n_slices - 1 {
            (n_slices - 2, n_slices - 1)
        } else {
            (k - 1, k + 1)
        };
        quotient[k] = (integral[b] - integral[a]) / (grid.time(b) - grid.time(a));
    }

    // Per-point residual data.
    let alive: Vec<&crate::sampling::CollocPoint> =
        phi_points.points.iter().filter(|p| p.alive).collect();
    struct PointData {
        row: Vec<f64>,
        r: f64,
        grad_r: Vec<f64>,
        dt_r: f64,
        i_at: f64,
        q_at: f64,
    }
    let data: Vec<PointData> = alive
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ws = ChannelWorkspace::new(net, spec);
            chunk
                .iter()
                .map(|p| {
                    let mut row = p.x.clone();
                    row.push(p.t);
                    let (r, grad_r, dt_r) = match mode {
                        GradMode::Exact => exact_residual_derivatives(problem, net, &p.x, p.t),
                        GradMode::FiniteDifference => {
                            fd_residual_derivatives(problem, net, &row, h_rel, &mut ws)
                        }
                    };
                    let (i_at, q_at) = match p.slice {
                        Some(k) => (integral[k as usize], quotient[k as usize]),
                        None => (
                            lerp_table(grid.times(), &integral, p.t),
                            lerp_table(grid.times(), &quotient, p.t),
                        ),
                    };
                    PointData {
                        row,
                        r,
                        grad_r,
                        dt_r,
                        i_at,
                        q_at,
                    }
                })
                .collect::<Vec<_>>()
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        });

    let mut snap = ResidualSnapshot {
        spatial_dim: d,
        gamma,
        slice_times: grid.times().to_vec(),
        integral,
        quotient,
        coords: Vec::new(),
        r: Vec::new(),
        grad_r: Vec::new(),
        dt_r: Vec::new(),
        integral_at: Vec::new(),
        quotient_at: Vec::new(),
        skipped_points: 0,
    };
    for pd in data {
        if !(pd.i_at > 0.0) || !pd.i_at.is_finite() {
            snap.skipped_points += 1;
            continue;
        }
        snap.coords.extend_from_slice(&pd.row);
        snap.r.push(pd.r);
        snap.grad_r.extend_from_slice(&pd.grad_r);
        snap.dt_r.push(pd.dt_r);
        snap.integral_at.push(pd.i_at);
        snap.quotient_at.push(pd.q_at);
    }
    Ok(snap)
}

/// Continuity defect at snapshot point `i` for the given velocity/divergence.
#[inline]
pub(crate) fn continuity_defect(
    snap: &ResidualSnapshot,
    i: usize,
    velocity: &[f64],
    divergence: f64,
) -> f64 {
    let d = snap.spatial_dim;
    let g = snap.gamma;
    let mut advect = 0.0;
    for (gr, v) in snap.grad_r[i * d..(i + 1) * d].iter().zip(velocity) {
        advect += gr * v;
    }
    2.0 * g * snap.dt_r[i] + 2.0 * g * advect + snap.r[i] * divergence
        - snap.r[i] / snap.integral_at[i] * snap.quotient_at[i]
}

/// Mean squared continuity defect over the snapshot points, and optionally
/// its gradient with respect to the potential parameters.
pub(crate) fn loss_v_and_grad(
    pot: &VelocityPotential,
    snap: &ResidualSnapshot,
    want_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    if snap.n_points() == 0 {
        return Err(Error::numeric(
            "velocity loss has no usable points (all slices skipped?)".to_string(),
        ));
    }
    let d = snap.spatial_dim;
    let net = pot.net();
    let n_params = net.param_count();
    let spec = ChannelSpec::spatial(d + 1, d);
    let w = 1.0 / snap.n_points() as f64;

    struct Partial {
        loss: f64,
        grad: Vec<f64>,
    }
    let indices: Vec<usize> = (0..snap.n_points()).collect();
    let partials: Vec<Partial> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ws = ChannelWorkspace::new(net, spec);
            let mut grad = vec![0.0; if want_grad { n_params } else { 0 }];
            let mut loss = 0.0;
            let mut input = vec![0.0; d + 1];
            for &i in chunk {
                let (x, t) = snap.point(i);
                input[..d].copy_from_slice(x);
                input[d] = t;
                let jet = net.channel_eval(&input, &mut ws);
                let defect = continuity_defect(snap, i, &jet.grad, jet.laplacian);
                loss += w * defect * defect;
                if want_grad {
                    let c = 2.0 * w * defect;
                    let seed = ChannelJet {
                        value: 0.0,
                        grad: snap.grad_r[i * d..(i + 1) * d]
                            .iter()
                            .map(|gr| c * 2.0 * snap.gamma * gr)
                            .collect(),
                        laplacian: c * snap.r[i],
                    };
                    net.channel_backprop(&seed, &mut ws, &mut grad);
                }
            }
            Partial { loss, grad }
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; if want_grad { n_params } else { 0 }];
    for p in &partials {
        loss += p.loss;
        for (g, pg) in grad.iter_mut().zip(&p.grad) {
            *g += pg;
        }
    }
    Ok((loss, grad))
}

/// Mean squared continuity defect of the potential against the frozen
/// snapshot.
pub fn loss_v_estimate(pot: &VelocityPotential, snap: &ResidualSnapshot) -> Result<f64> {
    loss_v_and_grad(pot, snap, false).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::init_network;
    use crate::sampling::{assemble_pde_set, PdeSetMode};

    fn zero_potential(d: usize) -> VelocityPotential {
        VelocityPotential::new(init_network(&[d + 1, 4, 1], 0).unwrap().zeroed()).unwrap()
    }

    /// Snapshot with r(x, t) = e^t on [0, 1], exact integrals I = e^{2t} and
    /// R = 2 e^{2t}; a space-constant residual needs no transport.
    fn exp_snapshot(n_slices: usize, pts_per_slice: usize) -> ResidualSnapshot {
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
                let x = (j as f64 + 0.5) / pts_per_slice as f64;
                coords.extend_from_slice(&[x, t]);
                r.push(t.exp());
                grad_r.push(0.0);
                dt_r.push(t.exp());
                i_at.push((2.0 * t).exp());
                q_at.push(2.0 * (2.0 * t).exp());
            }
        }
        let integral: Vec<f64> = times.iter().map(|t| (2.0 * t).exp()).collect();
        let quotient: Vec<f64> = times.iter().map(|t| 2.0 * (2.0 * t).exp()).collect();
        ResidualSnapshot::from_raw(
            1, 1.0, times, integral, quotient, coords, r, grad_r, dt_r, i_at, q_at,
        )
    }

    #[test]
    fn space_constant_residual_needs_no_transport() {
        let snap = exp_snapshot(6, 8);
        let pot = zero_potential(1);
        let loss = loss_v_estimate(&pot, &snap).unwrap();
        assert!(loss < 1e-20, "loss = {loss}");
    }

    #[test]
    fn zero_residual_snapshot_gives_zero_loss() {
        let n = 10;
        let coords: Vec<f64> = (0..n).flat_map(|i| vec![i as f64 / n as f64, 0.5]).collect();
        let snap = ResidualSnapshot::from_raw(
            1,
            1.0,
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            coords,
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![1.0; n],
            vec![0.0; n],
        );
        let pot = VelocityPotential::new(init_network(&[2, 6, 1], 3).unwrap()).unwrap();
        let loss = loss_v_estimate(&pot, &snap).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn isolated_time_derivative_term() {
        // dt_r = 1, grad_r = 0, r = 0, phi = 0: every point contributes
        // (2*1)^2 = 4.
        let n = 7;
        let coords: Vec<f64> = (0..n).flat_map(|i| vec![0.1 * i as f64, 0.3]).collect();
        let snap = ResidualSnapshot::from_raw(
            1,
            1.0,
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            coords,
            vec![0.0; n],
            vec![0.0; n],
            vec![1.0; n],
            vec![1.0; n],
            vec![0.0; n],
        );
        let pot = zero_potential(1);
        let loss = loss_v_estimate(&pot, &snap).unwrap();
        assert!((loss - 4.0).abs() < 1e-15);
    }

    #[test]
    fn loss_v_gradient_matches_fd() {
        let p = PdeProblem::rotation();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let s = assemble_pde_set(&p, 12, &grid, PdeSetMode::PerSlice, 3).unwrap();
        let u_net = init_network(&[3, 6, 1], 9).unwrap();
        let snap = residual_snapshot(
            &u_net,
            &p,
            &s,
            &s,
            &grid,
            GradMode::Exact,
            1e-3,
            1.0,
        )
        .unwrap();
        let pot = VelocityPotential::new(init_network(&[3, 4, 1], 21).unwrap()).unwrap();
        let (_, grad) = loss_v_and_grad(&pot, &snap, true).unwrap();
        let h = 1e-6;
        for i in (0..pot.net().param_count()).step_by(3) {
            let mut pp = pot.net().params();
            pp.0[i] += h;
            let mut plus = pot.clone();
            plus.net_mut().set_params(&pp).unwrap();
            pp.0[i] -= 2.0 * h;
            let mut minus = pot.clone();
            minus.net_mut().set_params(&pp).unwrap();
            let fd = (loss_v_estimate(&plus, &snap).unwrap()
                - loss_v_estimate(&minus, &snap).unwrap())
                / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                "coord {i}: {} vs {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn snapshot_difference_quotients() {
        // Injected integrals 1.0 and 1.2 at t = 0, 0.1 give a one-sided
        // quotient of 2 at the first slice.
        let p = PdeProblem::rotation();
        let grid = TimeGrid::uniform(0.2, 3).unwrap();
        let s = assemble_pde_set(&p, 20, &grid, PdeSetMode::PerSlice, 7).unwrap();
        let u_net = init_network(&[3, 5, 1], 2).unwrap();
        let snap = residual_snapshot(&u_net, &p, &s, &s, &grid, GradMode::Exact, 1e-3, 1.0)
            .unwrap();
        // Rebuild the quotients from the integral table and compare.
        let i = &snap.integral;
        let t = &snap.slice_times;
        assert!((snap.quotient[0] - (i[1] - i[0]) / (t[1] - t[0])).abs() < 1e-12);
        assert!((snap.quotient[1] - (i[2] - i[0]) / (t[2] - t[0])).abs() < 1e-12);
        assert!((snap.quotient[2] - (i[2] - i[1]) / (t[2] - t[1])).abs() < 1e-12);
    }

    #[test]
    fn exact_and_fd_derivatives_agree_on_rotation() {
        let p = PdeProblem::rotation();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let s = assemble_pde_set(&p, 15, &grid, PdeSetMode::PerSlice, 5).unwrap();
        let u_net = init_network(&[3, 8, 6, 1], 31).unwrap();
        let exact = residual_snapshot(&u_net, &p, &s, &s, &grid, GradMode::Exact, 1e-3, 1.0)
            .unwrap();
        let fd = residual_snapshot(
            &u_net,
            &p,
            &s,
            &s,
            &grid,
            GradMode::FiniteDifference,
            1e-3,
            1.0,
        )
        .unwrap();
        assert_eq!(exact.n_points(), fd.n_points());
        for i in 0..exact.n_points() {
            assert!((exact.r[i] - fd.r[i]).abs() < 1e-12);
            for k in 0..2 {
                let (a, b) = (exact.grad_r[i * 2 + k], fd.grad_r[i * 2 + k]);
                assert!(
                    (a - b).abs() <= 1e-4 * (1.0 + a.abs()),
                    "point {i} grad {k}: {a} vs {b}"
                );
            }
            let (a, b) = (exact.dt_r[i], fd.dt_r[i]);
            assert!((a - b).abs() <= 1e-4 * (1.0 + a.abs()), "point {i} dt: {a} vs {b}");
        }
    }

    #[test]
    fn snapshot_ignores_later_network_mutation() {
        let p = PdeProblem::rotation();
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let s = assemble_pde_set(&p, 10, &grid, PdeSetMode::PerSlice, 1).unwrap();
        let mut u_net = init_network(&[3, 5, 1], 4).unwrap();
        let snap =
            residual_snapshot(&u_net, &p, &s, &s, &grid, GradMode::Exact, 1e-3, 1.0).unwrap();
        let pot = VelocityPotential::new(init_network(&[3, 4, 1], 8).unwrap()).unwrap();
        let before = loss_v_estimate(&pot, &snap).unwrap();
        let zero = u_net.zeroed().params();
        u_net.set_params(&zero).unwrap();
        let after = loss_v_estimate(&pot, &snap).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn exact_mode_rejected_for_second_order_residuals() {
        let p = PdeProblem::burgers();
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let s = assemble_pde_set(&p, 5, &grid, PdeSetMode::PerSlice, 1).unwrap();
        let u_net = init_network(&[3, 4, 1], 4).unwrap();
        assert!(residual_snapshot(&u_net, &p, &s, &s, &grid, GradMode::Exact, 1e-3, 1.0).is_err());
    }

    #[test]
    fn missing_uniform_slice_points_error() {
        let p = PdeProblem::rotation();
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let s = assemble_pde_set(&p, 10, &grid, PdeSetMode::JointSpacetime, 1).unwrap();
        let u_net = init_network(&[3, 4, 1], 4).unwrap();
        // Joint points carry no slice, so the integral estimator has nothing.
        let err =
            residual_snapshot(&u_net, &p, &s, &s, &grid, GradMode::FiniteDifference, 1e-3, 1.0)
                .unwrap_err();
        assert!(err.to_string().contains("integral estimator"));
    }
}
