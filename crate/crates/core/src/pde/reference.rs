//! Allen-Cahn reference solution by Crank-Nicolson time stepping.
//!
//! The benchmark has no closed form, so error reporting uses a trusted
//! finite-difference solution: diffusion handled implicitly by the trapezoid
//! rule, the cubic reaction explicitly by second-order Adams-Bashforth, on a
//! fine uniform grid. The result is downsampled onto the evaluation lattice.

use super::lattice::Lattice;
use crate::error::{Error, Result};

/// Solves `u_t = alpha u_xx - beta (u^3 - u)` on `[-1, 1] x [0, 1]` with
/// `u(x, 0) = x^2 cos(pi x)` and `u(+-1, t) = -1`, then samples the solution
/// on an `nx_out x nt_out` lattice.
///
/// `n_fine` is the number of grid *intervals* of the solver; it must be a
/// multiple of `nx_out - 1` so the output nodes coincide with solver nodes.
pub fn allen_cahn_reference(
    alpha: f64,
    beta: f64,
    n_fine: usize,
    dt: f64,
    nx_out: usize,
    nt_out: usize,
) -> Result<Lattice> {
    if n_fine % (nx_out - 1) != 0 {
        return Err(Error::config(format!(
            "solver grid ({n_fine} intervals) must refine the output lattice ({nx_out} nodes)"
        )));
    }
    let n_nodes = n_fine + 1;
    let h = 2.0 / n_fine as f64;
    let x: Vec<f64> = (0..n_nodes).map(|j| -1.0 + h * j as f64).collect();
    let u0 = |x: f64| x * x * (std::f64::consts::PI * x).cos();
    let reaction = |u: f64| beta * (u * u * u - u);

    let steps_total = (1.0 / dt).round() as usize;
    if ((steps_total as f64) * dt - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("dt {dt} must divide the horizon")));
    }
    let snap_every = steps_total / (nt_out - 1);
    if snap_every * (nt_out - 1) != steps_total {
        return Err(Error::config(format!(
            "dt {dt} must place all {nt_out} output times on steps"
        )));
    }

    // Tridiagonal system (I - mu L) u^{n+1} = rhs, mu = alpha dt / 2.
    let mu = alpha * dt / (2.0 * h * h);
    let diag = 1.0 + 2.0 * mu;
    let off = -mu;

    let mut u: Vec<f64> = x.iter().map(|&xj| u0(xj)).collect();
    let mut n_prev: Vec<f64> = u.iter().map(|&v| reaction(v)).collect();
    let mut rhs = vec![0.0; n_nodes];
    let mut scratch_c = vec![0.0; n_nodes];
    let mut scratch_d = vec![0.0; n_nodes];

    let stride = n_fine / (nx_out - 1);
    let mut out_values = Vec::with_capacity(nx_out * nt_out);
    let snapshot = |u: &[f64], out: &mut Vec<f64>| {
        for j in (0..n_nodes).step_by(stride) {
            out.push(u[j]);
        }
    };
    snapshot(&u, &mut out_values);

    for step in 1..=steps_total {
        // AB2 reaction weights; first step falls back to explicit Euler.
        let (w_now, w_prev) = if step == 1 { (1.0, 0.0) } else { (1.5, -0.5) };
        for j in 1..n_nodes - 1 {
            let lap = u[j + 1] - 2.0 * u[j] + u[j - 1];
            let n_now = reaction(u[j]);
            rhs[j] = u[j] + mu * lap - dt * (w_now * n_now + w_prev * n_prev[j]);
            n_prev[j] = n_now;
        }
        // Dirichlet values -1 fold into the first and last interior rows.
        rhs[1] += mu;
        rhs[n_nodes - 2] += mu;

        // Thomas algorithm on interior nodes.
        scratch_c[1] = off / diag;
        scratch_d[1] = rhs[1] / diag;
        for j in 2..n_nodes - 1 {
            let m = diag - off * scratch_c[j - 1];
            scratch_c[j] = off / m;
            scratch_d[j] = (rhs[j] - off * scratch_d[j - 1]) / m;
        }
        u[n_nodes - 2] = scratch_d[n_nodes - 2];
        for j in (1..n_nodes - 2).rev() {
            u[j] = scratch_d[j] - scratch_c[j] * u[j + 1];
        }
        u[0] = -1.0;
        u[n_nodes - 1] = -1.0;

        if step % snap_every == 0 {
            snapshot(&u, &mut out_values);
        }
    }

    let axes = vec![(0..nx_out)
        .map(|j| -1.0 + 2.0 * (j * stride) as f64 / n_fine as f64)
        .collect()];
    let times = (0..nt_out)
        .map(|m| m as f64 / (nt_out - 1) as f64)
        .collect();
    Ok(Lattice {
        axes,
        times,
        values: out_values,
    })
}
