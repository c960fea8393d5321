//! Sample transport along a learned velocity field.
//!
//! The velocity is the spatial gradient of a scalar potential network, so the
//! field is curl-free by construction and its divergence is the potential's
//! spatial Laplacian. Samples follow `dX/dt = v(X, t)` under classical RK4;
//! an optional augmented channel integrates `d(log det grad X)/dt = div v`
//! along the trajectory, which gives change-of-variables densities.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{ChannelSpec, ChannelWorkspace, DenseNetwork};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::numerics::trapezoid_weights;
use crate::sampling::TimeGrid;

/// A time-dependent velocity field with a divergence.
pub trait VelocityField: Sync {
    fn dim(&self) -> usize;
    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]);
    fn divergence(&self, x: &[f64], t: f64) -> f64;

    /// Velocity and divergence at the same point (one evaluation when the
    /// implementation can share work).
    fn velocity_div(&self, x: &[f64], t: f64, out: &mut [f64]) -> f64 {
        self.velocity(x, t, out);
        self.divergence(x, t)
    }
}

/// Analytic field for tests and verification suites.
pub struct AnalyticField<V, D> {
    pub dim: usize,
    pub vel: V,
    pub div: D,
}

impl<V, D> VelocityField for AnalyticField<V, D>
where
    V: Fn(&[f64], f64, &mut [f64]) + Sync,
    D: Fn(&[f64], f64) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.vel)(x, t, out)
    }

    fn divergence(&self, x: &[f64], t: f64) -> f64 {
        (self.div)(x, t)
    }
}

/// Scalar potential network; `v = grad_x phi`.
#[derive(Debug, Clone)]
pub struct VelocityPotential {
    net: DenseNetwork,
}

impl VelocityPotential {
    pub fn new(net: DenseNetwork) -> Result<Self> {
        if net.input_dim() < 2 {
            return Err(Error::config(format!(
                "potential network needs spatial + time inputs, got dim {}",
                net.input_dim()
            )));
        }
        Ok(VelocityPotential { net })
    }

    pub fn spatial_dim(&self) -> usize {
        self.net.input_dim() - 1
    }

    pub fn net(&self) -> &DenseNetwork {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNetwork {
        &mut self.net
    }

    fn spec(&self) -> ChannelSpec {
        ChannelSpec::spatial(self.net.input_dim(), self.spatial_dim())
    }

    fn eval(&self, x: &[f64], t: f64, ws: &mut ChannelWorkspace) -> (Vec<f64>, f64) {
        debug_assert_eq!(x.len(), self.spatial_dim());
        let mut input = Vec::with_capacity(x.len() + 1);
        input.extend_from_slice(x);
        input.push(t);
        let jet = self.net.channel_eval(&input, ws);
        (jet.grad, jet.laplacian)
    }

    /// Spatial gradient of the potential at `(x, t)`.
    pub fn velocity_at(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut ws = ChannelWorkspace::new(&self.net, self.spec());
        self.eval(x, t, &mut ws).0
    }

    /// Divergence of the induced velocity (spatial Laplacian of the
    /// potential) at `(x, t)`.
    pub fn divergence_at(&self, x: &[f64], t: f64) -> f64 {
        let mut ws = ChannelWorkspace::new(&self.net, self.spec());
        self.eval(x, t, &mut ws).1
    }
}

impl VelocityField for VelocityPotential {
    fn dim(&self) -> usize {
        self.spatial_dim()
    }

    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.velocity_at(x, t));
    }

    fn divergence(&self, x: &[f64], t: f64) -> f64 {
        self.divergence_at(x, t)
    }

    fn velocity_div(&self, x: &[f64], t: f64, out: &mut [f64]) -> f64 {
        let mut ws = ChannelWorkspace::new(&self.net, self.spec());
        let (v, div) = self.eval(x, t, &mut ws);
        out.copy_from_slice(&v);
        div
    }
}

/// Positions (and optional log-det-Jacobian) of evolved samples per slice.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// `[point][slice][dim]`, flattened.
    pub positions: Vec<f64>,
    /// `[point][slice]`, flattened; present when tracking was requested.
    pub logdet: Option<Vec<f64>>,
    /// `[point][slice]`, flattened; monotone non-increasing per point.
    pub alive: Vec<bool>,
}

impl FlowTrajectory {
    pub fn n_points(&self) -> usize {
        if self.times.is_empty() {
            0
        } else {
            self.alive.len() / self.times.len()
        }
    }

    pub fn n_slices(&self) -> usize {
        self.times.len()
    }

    pub fn position(&self, point: usize, slice: usize) -> &[f64] {
        let base = (point * self.n_slices() + slice) * self.dim;
        &self.positions[base..base + self.dim]
    }

    pub fn is_alive(&self, point: usize, slice: usize) -> bool {
        self.alive[point * self.n_slices() + slice]
    }

    pub fn logdet_at(&self, point: usize, slice: usize) -> Option<f64> {
        self.logdet
            .as_ref()
            .map(|l| l[point * self.n_slices() + slice])
    }

    /// Columns `point_id, slice, t, x1..xd, alive, logdet`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = ["point_id".into(), "slice".into(), "t".into()]
            .into_iter()
            .chain((1..=self.dim).map(|i| format!("x{i}")))
            .chain(["alive".into(), "logdet".into()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for p in 0..self.n_points() {
            for k in 0..self.n_slices() {
                write!(out, "{p},{k},{}", self.times[k])?;
                for c in self.position(p, k) {
                    write!(out, ",{c}")?;
                }
                let ld = self.logdet_at(p, k).unwrap_or(0.0);
                writeln!(out, ",{},{ld}", u8::from(self.is_alive(p, k)))?;
            }
        }
        Ok(())
    }
}

/// One RK4 step of the augmented state (position, logdet).
fn rk4_step(
    field: &dyn VelocityField,
    x: &mut [f64],
    logdet: &mut f64,
    t: f64,
    h: f64,
    track_logdet: bool,
    scratch: &mut [f64],
) {
    let d = x.len();
    let (k, rest) = scratch.split_at_mut(4 * d);
    let xs = &mut rest[..d];
    let mut l = [0.0f64; 4];

    let eval = |field: &dyn VelocityField, pos: &[f64], time: f64, out: &mut [f64]| -> f64 {
        if track_logdet {
            field.velocity_div(pos, time, out)
        } else {
            field.velocity(pos, time, out);
            0.0
        }
    };

    l[0] = {
        let (k1, _) = k.split_at_mut(d);
        eval(field, x, t, k1)
    };
    for i in 0..d {
        xs[i] = x[i] + 0.5 * h * k[i];
    }
    l[1] = {
        let k2 = &mut k[d..2 * d];
        eval(field, xs, t + 0.5 * h, k2)
    };
    for i in 0..d {
        xs[i] = x[i] + 0.5 * h * k[d + i];
    }
    l[2] = {
        let k3 = &mut k[2 * d..3 * d];
        eval(field, xs, t + 0.5 * h, k3)
    };
    for i in 0..d {
        xs[i] = x[i] + h * k[2 * d + i];
    }
    l[3] = {
        let k4 = &mut k[3 * d..4 * d];
        eval(field, xs, t + h, k4)
    };

    for i in 0..d {
        x[i] += h / 6.0 * (k[i] + 2.0 * k[d + i] + 2.0 * k[2 * d + i] + k[3 * d + i]);
    }
    if track_logdet {
        *logdet += h / 6.0 * (l[0] + 2.0 * l[1] + 2.0 * l[2] + l[3]);
    }
}

/// Integrates all samples across the time grid.
///
/// Points that sit outside the closed `domain` at a slice are marked dead
/// from that slice onward and are not integrated further.
pub fn evolve_samples(
    field: &dyn VelocityField,
    x0: &[Vec<f64>],
    grid: &TimeGrid,
    substeps: usize,
    domain: &BoxDomain,
    track_logdet: bool,
) -> Result<FlowTrajectory> {
    if substeps == 0 {
        return Err(Error::config("substeps must be at least 1".to_string()));
    }
    let d = field.dim();
    if domain.dim() != d {
        return Err(Error::contract(format!(
            "domain dim {} does not match field dim {d}",
            domain.dim()
        )));
    }
    let n_slices = grid.n_slices();

    struct PointTraj {
        positions: Vec<f64>,
        logdet: Vec<f64>,
        alive: Vec<bool>,
        error: Option<String>,
    }

    let per_point: Vec<PointTraj> = x0
        .par_iter()
        .enumerate()
        .map(|(pi, start)| {
            let mut positions = Vec::with_capacity(n_slices * d);
            let mut logdets = Vec::with_capacity(n_slices);
            let mut alive_flags = Vec::with_capacity(n_slices);
            let mut scratch = vec![0.0; 5 * d];
            let mut x = start.clone();
            let mut logdet = 0.0;
            let mut alive = domain.contains(&x);
            let mut error = None;

            positions.extend_from_slice(&x);
            logdets.push(0.0);
            alive_flags.push(alive);

            for k in 0..n_slices - 1 {
                if alive {
                    let (t0, t1) = (grid.time(k), grid.time(k + 1));
                    let h = (t1 - t0) / substeps as f64;
                    for s in 0..substeps {
                        rk4_step(
                            field,
                            &mut x,
                            &mut logdet,
                            t0 + s as f64 * h,
                            h,
                            track_logdet,
                            &mut scratch,
                        );
                    }
                    if x.iter().any(|v| !v.is_finite()) {
                        error = Some(format!(
                            "non-finite position for point {pi} at slice {}",
                            k + 1
                        ));
                        alive = false;
                    } else if !domain.contains(&x) {
                        alive = false;
                    }
                }
                positions.extend_from_slice(&x);
                logdets.push(logdet);
                alive_flags.push(alive);
            }
            PointTraj {
                positions,
                logdet: logdets,
                alive: alive_flags,
                error,
            }
        })
        .collect();

    if let Some(e) = per_point.iter().find_map(|p| p.error.clone()) {
        return Err(Error::numeric(e));
    }

    let mut positions = Vec::with_capacity(x0.len() * n_slices * d);
    let mut logdet = Vec::with_capacity(x0.len() * n_slices);
    let mut alive = Vec::with_capacity(x0.len() * n_slices);
    for p in per_point {
        positions.extend(p.positions);
        logdet.extend(p.logdet);
        alive.extend(p.alive);
    }
    Ok(FlowTrajectory {
        dim: d,
        times: grid.times().to_vec(),
        positions,
        logdet: track_logdet.then_some(logdet),
        alive,
    })
}

/// Integrates a single point from `t = 0` to `t`, returning the endpoint.
pub fn integrate_to(
    field: &dyn VelocityField,
    x0: &[f64],
    t: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut logdet = 0.0;
    let mut scratch = vec![0.0; 5 * d];
    let h = t / steps as f64;
    for s in 0..steps {
        rk4_step(field, &mut x, &mut logdet, s as f64 * h, h, true, &mut scratch);
    }
    (x, logdet)
}

/// Result of a pushforward verification.
#[derive(Debug, Clone)]
pub struct PushforwardCheck {
    pub mc_estimate: f64,
    pub analytic: f64,
    pub std_err: f64,
}

/// Monte-Carlo check of the transport identity
/// `E[phi(X_t)] = integral of phi p_t`.
///
/// Samples `X_0` from `sample_p0`, advects them to time `t`, and compares the
/// sample mean of `phi` against the quadrature of `phi * p_t` over `quad_box`
/// (tensor trapezoid, dimensions 1 or 2).
#[allow(clippy::too_many_arguments)]
pub fn pushforward_check<S, P, Phi>(
    field: &dyn VelocityField,
    mut sample_p0: S,
    p_t: P,
    phi: Phi,
    n_samples: usize,
    t: f64,
    steps: usize,
    quad_box: &BoxDomain,
    quad_n: usize,
    seed: u64,
) -> Result<PushforwardCheck>
where
    S: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    P: Fn(&[f64]) -> f64,
    Phi: Fn(&[f64]) -> f64,
{
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let x0 = sample_p0(&mut rng);
        let (xt, _) = integrate_to(field, &x0, t, steps);
        let v = phi(&xt);
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let std_err = (var / n).sqrt();

    let analytic = match quad_box.dim() {
        1 => {
            let w = trapezoid_weights(quad_n, quad_box.axis_len(0));
            let mut total = 0.0;
            for (i, wi) in w.iter().enumerate() {
                let x = quad_box.lo()[0]
                    + quad_box.axis_len(0) * i as f64 / (quad_n - 1) as f64;
                total += wi * phi(&[x]) * p_t(&[x]);
            }
            total
        }
        2 => crate::numerics::trapezoid_2d(
            [quad_box.lo()[0], quad_box.lo()[1]],
            [quad_box.hi()[0], quad_box.hi()[1]],
            quad_n,
            |x, y| phi(&[x, y]) * p_t(&[x, y]),
        ),
        d => {
            return Err(Error::config(format!(
                "pushforward quadrature supports dimensions 1-2, got {d}"
            )));
        }
    };

    Ok(PushforwardCheck {
        mc_estimate: mean,
        analytic,
        std_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::init_network;
    use crate::numerics::fd_jet;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn zero_field(dim: usize) -> impl VelocityField {
        AnalyticField {
            dim,
            vel: |_: &[f64], _: f64, out: &mut [f64]| out.fill(0.0),
            div: |_: &[f64], _: f64| 0.0,
        }
    }

    fn linear_1d() -> impl VelocityField {
        AnalyticField {
            dim: 1,
            vel: |x: &[f64], _: f64, out: &mut [f64]| out[0] = x[0],
            div: |_: &[f64], _: f64| 1.0,
        }
    }

    fn rotation_2d() -> impl VelocityField {
        AnalyticField {
            dim: 2,
            vel: |x: &[f64], _: f64, out: &mut [f64]| {
                out[0] = -x[1];
                out[1] = x[0];
            },
            div: |_: &[f64], _: f64| 0.0,
        }
    }

    #[test]
    fn zero_velocity_keeps_positions() {
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let domain = BoxDomain::cube(-10.0, 10.0, 2).unwrap();
        let x0 = vec![vec![0.3, -0.4], vec![1.0, 2.0]];
        let traj = evolve_samples(&zero_field(2), &x0, &grid, 3, &domain, true).unwrap();
        for p in 0..2 {
            for k in 0..5 {
                assert_eq!(traj.position(p, k), &x0[p][..]);
                assert_eq!(traj.logdet_at(p, k), Some(0.0));
                assert!(traj.is_alive(p, k));
            }
        }
    }

    #[test]
    fn linear_flow_matches_exponential() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let domain = BoxDomain::cube(-100.0, 100.0, 1).unwrap();
        let traj =
            evolve_samples(&linear_1d(), &[vec![0.5]], &grid, 100, &domain, true).unwrap();
        let want = 0.5 * std::f64::consts::E;
        assert!(
            (traj.position(0, 1)[0] - want).abs() < 1e-9,
            "got {}",
            traj.position(0, 1)[0]
        );
        assert!((traj.logdet_at(0, 1).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let domain = BoxDomain::cube(-100.0, 100.0, 1).unwrap();
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let want = 0.5 * std::f64::consts::E;
        let mut errors = Vec::new();
        for substeps in [2usize, 4, 8, 16] {
            let traj =
                evolve_samples(&linear_1d(), &[vec![0.5]], &grid, substeps, &domain, false)
                    .unwrap();
            errors.push((traj.position(0, 1)[0] - want).abs());
        }
        for w in errors.windows(2) {
            assert!(
                w[0] / w[1] >= 8.0,
                "halving ratio {} below 8 (errors {errors:?})",
                w[0] / w[1]
            );
        }
    }

    #[test]
    fn circular_flow_and_divergence_free_logdet() {
        let grid = TimeGrid::uniform(1.0, 11).unwrap();
        let domain = BoxDomain::cube(-10.0, 10.0, 2).unwrap();
        let traj =
            evolve_samples(&rotation_2d(), &[vec![1.0, 0.0]], &grid, 20, &domain, true).unwrap();
        let end = traj.position(0, 10);
        assert!((end[0] - 1.0f64.cos()).abs() < 1e-8);
        assert!((end[1] - 1.0f64.sin()).abs() < 1e-8);
        assert!(traj.logdet_at(0, 10).unwrap().abs() < 1e-8);
    }

    #[test]
    fn logdet_matches_trace_for_linear_field() {
        // v = A x with tr A = 1.5.
        let field = AnalyticField {
            dim: 2,
            vel: |x: &[f64], _: f64, out: &mut [f64]| {
                out[0] = 0.5 * x[0] + 0.3 * x[1];
                out[1] = -0.2 * x[0] + 1.0 * x[1];
            },
            div: |_: &[f64], _: f64| 1.5,
        };
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let domain = BoxDomain::cube(-100.0, 100.0, 2).unwrap();
        let traj = evolve_samples(&field, &[vec![0.1, 0.2]], &grid, 50, &domain, true).unwrap();
        assert!((traj.logdet_at(0, 1).unwrap() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn mass_conservation_along_trajectories() {
        // For v = x in 1D with p_0 standard normal, p_t is N(0, e^{2t});
        // p_0(X_0) exp(-logdet) must equal p_t(X_t).
        let grid = TimeGrid::uniform(1.0, 6).unwrap();
        let domain = BoxDomain::cube(-100.0, 100.0, 1).unwrap();
        let x0: Vec<Vec<f64>> = vec![vec![0.1], vec![0.5], vec![-1.2], vec![2.0]];
        let traj = evolve_samples(&linear_1d(), &x0, &grid, 50, &domain, true).unwrap();
        let normal_pdf = |x: f64, var: f64| {
            (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        for p in 0..x0.len() {
            for k in 0..grid.n_slices() {
                let t = grid.time(k);
                let xt = traj.position(p, k)[0];
                let ld = traj.logdet_at(p, k).unwrap();
                let lhs = normal_pdf(x0[p][0], 1.0) * (-ld).exp();
                let rhs = normal_pdf(xt, (2.0 * t).exp());
                assert!(
                    (lhs - rhs).abs() <= 1e-6 * rhs.abs(),
                    "point {p} slice {k}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn out_of_domain_points_marked_dead_monotonically() {
        // Constant rightward drift pushes points out of a tight box.
        let field = AnalyticField {
            dim: 1,
            vel: |_: &[f64], _: f64, out: &mut [f64]| out[0] = 1.0,
            div: |_: &[f64], _: f64| 0.0,
        };
        let grid = TimeGrid::uniform(1.0, 11).unwrap();
        let domain = BoxDomain::cube(0.0, 0.45, 1).unwrap();
        let traj = evolve_samples(&field, &[vec![0.1], vec![0.4]], &grid, 4, &domain, false)
            .unwrap();
        for p in 0..2 {
            let mut seen_dead = false;
            for k in 0..11 {
                if seen_dead {
                    assert!(!traj.is_alive(p, k), "point {p} revived at slice {k}");
                }
                if !traj.is_alive(p, k) {
                    seen_dead = true;
                }
            }
            assert!(seen_dead, "point {p} should leave the domain");
        }
        // The first point dies later than the second.
        assert!(traj.is_alive(0, 2));
        assert!(!traj.is_alive(1, 2));
    }

    #[test]
    fn potential_velocity_is_exact_gradient() {
        let net = init_network(&[3, 10, 8, 1], 17).unwrap();
        let pot = VelocityPotential::new(net.clone()).unwrap();
        let (x, t) = ([0.3, -0.5], 0.7);
        let v = pot.velocity_at(&x, t);
        let jet = net.input_jet(&[x[0], x[1], t]).unwrap();
        assert!((v[0] - jet.grad[0]).abs() < 1e-13);
        assert!((v[1] - jet.grad[1]).abs() < 1e-13);
        // Against finite differences of the potential itself.
        let fd = fd_jet(
            |p, tt| net.forward(&[p[0], p[1], tt]).unwrap(),
            &x,
            t,
            1e-5,
        );
        for i in 0..2 {
            assert!(
                (v[i] - fd.grad[i]).abs() < 1e-6 * (1.0 + fd.grad[i].abs()),
                "v[{i}] = {} vs fd {}",
                v[i],
                fd.grad[i]
            );
        }
        let div = pot.divergence_at(&x, t);
        let fd_div = fd.hess(0, 0) + fd.hess(1, 1);
        assert!((div - fd_div).abs() < 1e-5 * (1.0 + fd_div.abs()));
    }

    #[test]
    fn zero_potential_gives_zero_velocity() {
        let net = init_network(&[3, 6, 1], 0).unwrap().zeroed();
        let pot = VelocityPotential::new(net).unwrap();
        assert_eq!(pot.velocity_at(&[0.4, 0.2], 0.3), vec![0.0, 0.0]);
        assert_eq!(pot.divergence_at(&[0.4, 0.2], 0.3), 0.0);
    }

    #[test]
    fn quadratic_potential_hand_case() {
        // phi = (x^2 + y^2) / 2 as an analytic double: v(x) = x, div = 2.
        let field = AnalyticField {
            dim: 2,
            vel: |x: &[f64], _: f64, out: &mut [f64]| out.copy_from_slice(x),
            div: |_: &[f64], _: f64| 2.0,
        };
        let mut v = [0.0; 2];
        field.velocity(&[0.3, -0.2], 0.0, &mut v);
        assert_eq!(v, [0.3, -0.2]);
        assert_eq!(field.divergence(&[0.3, -0.2], 0.0), 2.0);
    }

    #[test]
    fn potential_field_is_curl_free() {
        let net = init_network(&[3, 12, 9, 1], 23).unwrap();
        let jet = net.input_jet(&[0.2, 0.8, 0.4]).unwrap();
        // curl = d v1 / dy - d v2 / dx = H(0,1) - H(1,0).
        let curl = jet.hess(0, 1) - jet.hess(1, 0);
        let scale = 1.0 + jet.hess(0, 1).abs();
        assert!(curl.abs() < 1e-12 * scale);
    }

    #[test]
    fn pushforward_identity_flow() {
        // v = 0: E[phi(X_t)] = integral of phi p_0.
        let quad = BoxDomain::cube(-8.0, 8.0, 1).unwrap();
        let check = pushforward_check(
            &zero_field(1),
            |rng| vec![<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)],
            |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            |x| x[0] * x[0],
            20_000,
            1.0,
            10,
            &quad,
            801,
            5,
        )
        .unwrap();
        assert!((check.analytic - 1.0).abs() < 1e-9);
        assert!((check.mc_estimate - check.analytic).abs() < 3.0 * check.std_err);
    }

    #[test]
    fn pushforward_linear_flow_gaussian() {
        // v = x, p_0 = N(0,1), phi = x^2, t = 1: E = e^2, p_t = N(0, e^2).
        let quad = BoxDomain::cube(-30.0, 30.0, 1).unwrap();
        let var_t = (2.0f64).exp();
        let check = pushforward_check(
            &linear_1d(),
            |rng| vec![<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)],
            move |x| {
                (-x[0] * x[0] / (2.0 * var_t)).exp()
                    / (2.0 * std::f64::consts::PI * var_t).sqrt()
            },
            |x| x[0] * x[0],
            100_000,
            1.0,
            64,
            &quad,
            2001,
            11,
        )
        .unwrap();
        assert!((check.analytic - var_t).abs() < 1e-8, "analytic {}", check.analytic);
        assert!(
            (check.mc_estimate - check.analytic).abs() < 3.0 * check.std_err,
            "mc {} vs analytic {} (stderr {})",
            check.mc_estimate,
            check.analytic,
            check.std_err
        );
    }

    #[test]
    fn pushforward_rotation_mean() {
        // Rigid rotation of a unit Gaussian centered at (1, 0); the first
        // coordinate mean lands at cos(1).
        let quad = BoxDomain::cube(-7.0, 9.0, 2).unwrap();
        let (c, s) = (1.0f64.cos(), 1.0f64.sin());
        let check = pushforward_check(
            &rotation_2d(),
            |rng| {
                let n1: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                let n2: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                vec![1.0 + n1, n2]
            },
            move |x| {
                let (dx, dy) = (x[0] - c, x[1] - s);
                (-(dx * dx + dy * dy) / 2.0).exp() / (2.0 * std::f64::consts::PI)
            },
            |x| x[0],
            40_000,
            1.0,
            40,
            &quad,
            501,
            13,
        )
        .unwrap();
        assert!((check.analytic - c).abs() < 1e-6, "analytic {}", check.analytic);
        assert!((check.mc_estimate - check.analytic).abs() < 3.0 * check.std_err);
    }

    #[test]
    fn evolve_rejects_bad_arguments() {
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let domain = BoxDomain::cube(0.0, 1.0, 1).unwrap();
        assert!(evolve_samples(&linear_1d(), &[vec![0.5]], &grid, 0, &domain, false).is_err());
        let domain2 = BoxDomain::cube(0.0, 1.0, 2).unwrap();
        assert!(evolve_samples(&linear_1d(), &[vec![0.5]], &grid, 1, &domain2, false).is_err());
    }

    #[test]
    fn evolution_deterministic_across_runs() {
        let net = init_network(&[3, 8, 1], 3).unwrap();
        let pot = VelocityPotential::new(net).unwrap();
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let domain = BoxDomain::cube(-3.0, 3.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let a = evolve_samples(&pot, &x0, &grid, 5, &domain, true).unwrap();
        let b = evolve_samples(&pot, &x0, &grid, 5, &domain, true).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.logdet, b.logdet);
    }
}
