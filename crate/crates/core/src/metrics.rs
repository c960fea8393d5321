//! Error measures: relative L2 and L-infinity on evaluation lattices,
//! weighted Monte-Carlo variants for the 6D problem, and report assembly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{lerp_table, trapezoid_weights};
use crate::pde::{Lattice, PdeProblem, ProblemKind};
use crate::seeds::derive_seed;

/// Space-time trapezoid weight of lattice node `(t_idx, spatial_idx)`.
fn node_weight(lat: &Lattice, wt: &[f64], wx: &[Vec<f64>], t_idx: usize, mut s_idx: usize) -> f64 {
    let mut w = wt[t_idx];
    for axis in (0..lat.spatial_dim()).rev() {
        let n = lat.axes[axis].len();
        w *= wx[axis][s_idx % n];
        s_idx /= n;
    }
    w
}

fn lattice_weights(lat: &Lattice) -> (Vec<f64>, Vec<Vec<f64>>) {
    let t_len = lat.times.last().unwrap() - lat.times[0];
    let wt = if lat.times.len() > 1 {
        trapezoid_weights(lat.times.len(), t_len)
    } else {
        vec![1.0]
    };
    let wx = lat
        .axes
        .iter()
        .map(|ax| trapezoid_weights(ax.len(), ax.last().unwrap() - ax[0]))
        .collect();
    (wt, wx)
}

fn evaluate_on<F>(field: F, reference: &Lattice) -> Vec<f64>
where
    F: Fn(&[f64], f64) -> f64 + Sync,
{
    let n_spatial = reference.n_spatial();
    (0..reference.times.len() * n_spatial)
        .into_par_iter()
        .map(|idx| {
            let (ti, si) = (idx / n_spatial, idx % n_spatial);
            let x = reference.spatial_point(si);
            field(&x, reference.times[ti])
        })
        .collect()
}

/// Relative L2 error of `field` against tabulated reference values, with
/// trapezoid weights in space-time.
pub fn rel_l2<F>(field: F, reference: &Lattice) -> Result<f64>
where
    F: Fn(&[f64], f64) -> f64 + Sync,
{
    let pred = evaluate_on(field, reference);
    let (wt, wx) = lattice_weights(reference);
    let n_spatial = reference.n_spatial();
    let mut num = 0.0;
    let mut den = 0.0;
    for ti in 0..reference.times.len() {
        for si in 0..n_spatial {
            let w = node_weight(reference, &wt, &wx, ti, si);
            let r = reference.value(ti, si);
            let d = pred[ti * n_spatial + si] - r;
            num += w * d * d;
            den += w * r * r;
        }
    }
    if den == 0.0 {
        return Err(Error::numeric(
            "reference field vanishes on the lattice; relative error undefined".to_string(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Maximum absolute error of `field` over the lattice nodes.
pub fn l_inf<F>(field: F, reference: &Lattice) -> Result<f64>
where
    F: Fn(&[f64], f64) -> f64 + Sync,
{
    let pred = evaluate_on(field, reference);
    let n_spatial = reference.n_spatial();
    let mut worst = 0.0f64;
    for ti in 0..reference.times.len() {
        for si in 0..n_spatial {
            worst = worst.max((pred[ti * n_spatial + si] - reference.value(ti, si)).abs());
        }
    }
    Ok(worst)
}

/// Weighted errors over Monte-Carlo points drawn proportional to the exact
/// solution: `(weighted rel_l2, weighted l_inf)`.
pub fn weighted_errors<F, E, S>(
    field: F,
    exact: E,
    mut weight_sampler: S,
    n_mc: usize,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64], f64) -> f64,
    E: Fn(&[f64], f64) -> f64,
    S: FnMut() -> (Vec<f64>, f64),
{
    if n_mc == 0 {
        return Err(Error::config("weighted errors need at least one point".to_string()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut worst = 0.0f64;
    for _ in 0..n_mc {
        let (x, t) = weight_sampler();
        let e = exact(&x, t);
        let d = field(&x, t) - e;
        num += d * d;
        den += e * e;
        worst = worst.max(d.abs());
    }
    if den == 0.0 {
        return Err(Error::numeric(
            "exact solution vanishes at all weight samples".to_string(),
        ));
    }
    Ok(((num / den).sqrt(), worst))
}

/// Sampler of `(x, t)` proportional to the 6D advection exact solution over
/// `domain x [0, T]`.
///
/// The time marginal is tabulated by quadrature and inverted; conditioned on
/// `t` the coordinates are independent truncated Gaussians sampled by
/// rejection against the box.
pub fn advection_weight_sampler(
    problem: &PdeProblem,
    seed: u64,
) -> Result<impl FnMut() -> (Vec<f64>, f64)> {
    let ProblemKind::AdvectionNd { alpha, dim } = *problem.kind() else {
        return Err(Error::config(
            "weight sampler is specific to the advection benchmark".to_string(),
        ));
    };
    let (lo, hi) = (problem.domain().lo()[0], problem.domain().hi()[0]);
    let horizon = problem.horizon();

    // Per-axis mass Z(t) = integral of exp(-(x-t)^2/alpha) over [lo, hi].
    let n_knots = 501;
    let quad_n = 400;
    let axis_mass = |t: f64| -> f64 {
        let h = (hi - lo) / quad_n as f64;
        let mut s = 0.0;
        for i in 0..=quad_n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == quad_n { 0.5 } else { 1.0 };
            s += w * (-(x - t) * (x - t) / alpha).exp();
        }
        s * h
    };
    let knots: Vec<f64> = (0..n_knots)
        .map(|i| horizon * i as f64 / (n_knots - 1) as f64)
        .collect();
    let marginal: Vec<f64> = knots.iter().map(|&t| axis_mass(t).powi(dim as i32)).collect();
    // Cumulative table for inverse-CDF sampling of t.
    let mut cdf = vec![0.0; n_knots];
    for i in 1..n_knots {
        cdf[i] = cdf[i - 1] + 0.5 * (marginal[i] + marginal[i - 1]) * (knots[i] - knots[i - 1]);
    }
    let total = cdf[n_knots - 1];
    let cdf: Vec<f64> = cdf.iter().map(|c| c / total).collect();

    let sigma = (alpha / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "weight-sampler", 0));
    Ok(move || {
        let u: f64 = rng.random_range(0.0..1.0);
        let t = lerp_table(&cdf, &knots, u);
        let mut x = Vec::with_capacity(dim);
        while x.len() < dim {
            let n: f64 = rng.sample(rand_distr::StandardNormal);
            let xi = t + sigma * n;
            if xi >= lo && xi <= hi {
                x.push(xi);
            }
        }
        (x, t)
    })
}

/// One result row.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub problem: String,
    pub method: String,
    pub seed: String,
    pub rel_l2: f64,
    pub l_inf: f64,
    pub wall_s: f64,
    /// Digest of the effective configuration (report.json only; the CSV
    /// columns are fixed).
    #[serde(default)]
    pub config_digest: String,
}

/// Rows per run plus a median row per `(problem, method)` group.
pub fn build_report(results: &[ErrorReport]) -> Vec<ErrorReport> {
    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
    let mut rows = results.to_vec();
    let mut groups: Vec<(String, String)> = Vec::new();
    for r in results {
        let key = (r.problem.clone(), r.method.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (problem, method) in groups {
        let members: Vec<&ErrorReport> = results
            .iter()
            .filter(|r| r.problem == problem && r.method == method)
            .collect();
        rows.push(ErrorReport {
            problem,
            method,
            seed: "median".to_string(),
            rel_l2: median(members.iter().map(|r| r.rel_l2).collect()),
            l_inf: median(members.iter().map(|r| r.l_inf).collect()),
            wall_s: median(members.iter().map(|r| r.wall_s).collect()),
            config_digest: members[0].config_digest.clone(),
        });
    }
    rows
}

/// `problem, method, seed, rel_l2, l_inf, wall_s` with a header.
pub fn report_csv(rows: &[ErrorReport]) -> String {
    let mut out = String::from("problem,method,seed,rel_l2,l_inf,wall_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.problem, r.method, r.seed, r.rel_l2, r.l_inf, r.wall_s
        ));
    }
    out
}

pub fn report_json(rows: &[ErrorReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)?)
}
