//! Construction of the training sets: uniform box sampling,
//! density-proportional rejection sampling, time grids, and boundary sets.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::pde::PdeProblem;
use crate::seeds::derive_seed;

/// Uniform partition of `[0, T]` into `n_slices - 1` segments.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, n_slices: usize) -> Result<Self> {
        if n_slices < 2 || horizon <= 0.0 {
            return Err(Error::config(format!(
                "time grid needs at least 2 slices and positive horizon, got {n_slices}, {horizon}"
            )));
        }
        let times = (0..n_slices)
            .map(|k| horizon * k as f64 / (n_slices - 1) as f64)
            .collect();
        Ok(TimeGrid { times })
    }

    pub fn n_slices(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Provenance of a collocation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Per-slice uniform spatial point.
    Uniform,
    /// Uniform in space-time (continuous `t`).
    UniformSpacetime,
    /// Transported sample added at outer iteration `k` (1-based).
    Adaptive(u32),
    /// Density-proportional initial point at `t = 0`.
    Initial,
    Boundary,
}

impl Origin {
    pub fn label(&self) -> &'static str {
        match self {
            Origin::Uniform => "uniform",
            Origin::UniformSpacetime => "uniform_spacetime",
            Origin::Adaptive(_) => "adaptive",
            Origin::Initial => "initial",
            Origin::Boundary => "boundary",
        }
    }

    pub fn iteration(&self) -> u32 {
        match self {
            Origin::Adaptive(k) => *k,
            _ => 0,
        }
    }
}

/// One tagged space-time point.
#[derive(Debug, Clone)]
pub struct CollocPoint {
    pub x: Vec<f64>,
    pub t: f64,
    /// Index into the owning [`TimeGrid`]; `None` for continuous-time points.
    pub slice: Option<u32>,
    pub origin: Origin,
    pub alive: bool,
}

/// A tagged set of collocation points.
#[derive(Debug, Clone, Default)]
pub struct CollocationSet {
    pub points: Vec<CollocPoint>,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_alive(&self) -> usize {
        self.points.iter().filter(|p| p.alive).count()
    }

    pub fn count_by(&self, pred: impl Fn(&CollocPoint) -> bool) -> usize {
        self.points.iter().filter(|p| pred(p)).count()
    }

    pub fn extend(&mut self, other: CollocationSet) {
        self.points.extend(other.points);
    }

    /// Columns `x1..xd, t, origin, iteration`.
    pub fn write_csv(&self, path: &Path, spatial_dim: usize) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=spatial_dim)
            .map(|i| format!("x{i}"))
            .chain(["t".into(), "origin".into(), "iteration".into()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            for c in &p.x {
                write!(out, "{c},")?;
            }
            writeln!(out, "{},{},{}", p.t, p.origin.label(), p.origin.iteration())?;
        }
        Ok(())
    }
}

/// `n` i.i.d. uniform points on the box, deterministic in `seed`.
pub fn sample_uniform_box(domain: &BoxDomain, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::config("cannot sample zero points".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            (0..domain.dim())
                .map(|i| rng.random_range(domain.lo()[i]..domain.hi()[i]))
                .collect()
        })
        .collect())
}

/// Rejection sampling of `density` (restricted to the box) against a uniform
/// proposal.
///
/// `bound` is an upper bound for the density on the box; when absent it is
/// estimated as 1.2x the maximum over 1e5 uniform probes. Exactly `n` points
/// are returned. Fails if the acceptance rate is still below 1e-4 after 1e7
/// proposals.
pub fn sample_proportional<F>(
    density: F,
    domain: &BoxDomain,
    n: usize,
    seed: u64,
    bound: Option<f64>,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64,
{
    if n == 0 {
        return Err(Error::config("cannot sample zero points".to_string()));
    }
    let bound = match bound {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => {
            return Err(Error::config(format!("density bound {b} must be positive")));
        }
        None => {
            let probes = sample_uniform_box(domain, 100_000, derive_seed(seed, "bound-probe", 0))?;
            let mut max = 0.0f64;
            for p in &probes {
                let d = density(p);
                if d < 0.0 {
                    return Err(Error::contract(format!("density is negative ({d}) at {p:?}")));
                }
                max = max.max(d);
            }
            if max == 0.0 {
                return Err(Error::numeric(
                    "density is zero at all probe points".to_string(),
                ));
            }
            1.2 * max
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "rejection", 0));
    let mut out = Vec::with_capacity(n);
    let mut proposals: u64 = 0;
    while out.len() < n {
        let x: Vec<f64> = (0..domain.dim())
            .map(|i| rng.random_range(domain.lo()[i]..domain.hi()[i]))
            .collect();
        proposals += 1;
        let d = density(&x);
        if d < 0.0 {
            return Err(Error::contract(format!("density is negative ({d}) at {x:?}")));
        }
        if rng.random_range(0.0..bound) < d {
            out.push(x);
        }
        if proposals >= 10_000_000 && (out.len() as f64) < 1e-4 * proposals as f64 {
            return Err(Error::numeric(format!(
                "rejection acceptance rate {:.2e} after {proposals} proposals; \
                 density too concentrated for rejection sampling (a Metropolis-Hastings \
                 fallback is not implemented)",
                out.len() as f64 / proposals as f64
            )));
        }
    }
    Ok(out)
}

/// Initial-set sampling strategy for `S_0` and new flow seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialStrategy {
    Uniform,
    /// Proportional to the initial condition `u_0`.
    PropU0,
    /// Proportional to `|grad u_0|^2`.
    PropGradU0Sq,
}

impl InitialStrategy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InitialStrategy::Uniform),
            "prop_u0" => Ok(InitialStrategy::PropU0),
            "prop_grad_u0_sq" => Ok(InitialStrategy::PropGradU0Sq),
            other => Err(Error::config(format!(
                "unknown initial sampling strategy '{other}'"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InitialStrategy::Uniform => "uniform",
            InitialStrategy::PropU0 => "prop_u0",
            InitialStrategy::PropGradU0Sq => "prop_grad_u0_sq",
        }
    }
}

/// Exact density bound on the domain when one is known in closed form.
fn initial_density_bound(problem: &PdeProblem, strategy: InitialStrategy) -> Option<f64> {
    use crate::pde::ProblemKind;
    match (strategy, problem.kind()) {
        (InitialStrategy::PropU0, ProblemKind::Rotation { .. })
        | (InitialStrategy::PropU0, ProblemKind::Burgers { .. })
        | (InitialStrategy::PropU0, ProblemKind::AdvectionNd { .. }) => Some(1.0),
        (InitialStrategy::PropU0, ProblemKind::FokkerPlanck(aux)) => Some(1.0 / aux.normalizer),
        (InitialStrategy::PropGradU0Sq, ProblemKind::Burgers { alpha }) => {
            // |grad u0|^2 peaks at the interface: 2 (1/4 / (2 alpha))^2.
            Some(2.0 * (0.25 / (2.0 * alpha)).powi(2))
        }
        _ => None,
    }
}

/// Spatial positions for new flow seeds, drawn per the problem strategy.
pub fn sample_initial_positions(
    problem: &PdeProblem,
    strategy: InitialStrategy,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    match strategy {
        InitialStrategy::Uniform => sample_uniform_box(problem.domain(), n, seed),
        InitialStrategy::PropU0 => sample_proportional(
            |x| problem.initial_value(x),
            problem.domain(),
            n,
            seed,
            initial_density_bound(problem, strategy),
        ),
        InitialStrategy::PropGradU0Sq => sample_proportional(
            |x| problem.initial_gradient_sq(x),
            problem.domain(),
            n,
            seed,
            initial_density_bound(problem, strategy),
        ),
    }
}

/// The initial-condition training set `S_0`: a uniform fraction plus
/// density-proportional points, all at `t = 0`.
pub fn assemble_initial_set(
    problem: &PdeProblem,
    strategy: InitialStrategy,
    n0: usize,
    uniform_fraction: f64,
    seed: u64,
) -> Result<CollocationSet> {
    if !(0.0..=1.0).contains(&uniform_fraction) {
        return Err(Error::config(format!(
            "uniform_fraction {uniform_fraction} must lie in [0, 1]"
        )));
    }
    let n_uniform = match strategy {
        InitialStrategy::Uniform => n0,
        _ => (uniform_fraction * n0 as f64).floor() as usize,
    };
    let n_prop = n0 - n_uniform;
    let mut points = Vec::with_capacity(n0);
    if n_uniform > 0 {
        for x in sample_uniform_box(problem.domain(), n_uniform, derive_seed(seed, "s0-uni", 0))? {
            points.push(CollocPoint {
                x,
                t: 0.0,
                slice: Some(0),
                origin: Origin::Uniform,
                alive: true,
            });
        }
    }
    if n_prop > 0 {
        let xs = match strategy {
            InitialStrategy::Uniform => unreachable!(),
            _ => sample_initial_positions(problem, strategy, n_prop, derive_seed(seed, "s0-prop", 0))?,
        };
        for x in xs {
            points.push(CollocPoint {
                x,
                t: 0.0,
                slice: Some(0),
                origin: Origin::Initial,
                alive: true,
            });
        }
    }
    Ok(CollocationSet { points })
}

/// How boundary points are distributed over the faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Face chosen proportional to its measure, then uniform on the face.
    Random,
    /// Equal counts per face (`n_b` must divide evenly).
    PerFace,
}

/// `n_b` spatial points on the boundary, replicated across all time slices.
pub fn assemble_boundary_set(
    problem: &PdeProblem,
    n_b: usize,
    grid: &TimeGrid,
    seed: u64,
    mode: BoundaryMode,
) -> Result<CollocationSet> {
    if n_b == 0 {
        return Ok(CollocationSet::default());
    }
    let domain = problem.domain();
    let d = domain.dim();
    let n_faces = 2 * d;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "boundary", 0));

    let face_point = |face: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let axis = face / 2;
        let upper = face % 2 == 1;
        (0..d)
            .map(|i| {
                if i == axis {
                    if upper {
                        domain.hi()[i]
                    } else {
                        domain.lo()[i]
                    }
                } else {
                    rng.random_range(domain.lo()[i]..domain.hi()[i])
                }
            })
            .collect()
    };

    let mut spatial = Vec::with_capacity(n_b);
    match mode {
        BoundaryMode::Random => {
            let measures: Vec<f64> = (0..n_faces).map(|f| domain.face_measure(f / 2)).collect();
            let total: f64 = measures.iter().sum();
            for _ in 0..n_b {
                let mut pick = rng.random_range(0.0..total);
                let mut face = 0;
                for (i, m) in measures.iter().enumerate() {
                    if pick < *m {
                        face = i;
                        break;
                    }
                    pick -= m;
                }
                spatial.push(face_point(face, &mut rng));
            }
        }
        BoundaryMode::PerFace => {
            if n_b % n_faces != 0 {
                return Err(Error::config(format!(
                    "n_b = {n_b} does not divide evenly over {n_faces} faces"
                )));
            }
            let per = n_b / n_faces;
            for face in 0..n_faces {
                for _ in 0..per {
                    spatial.push(face_point(face, &mut rng));
                }
            }
        }
    }

    let mut points = Vec::with_capacity(n_b * grid.n_slices());
    for (k, &t) in grid.times().iter().enumerate() {
        for x in &spatial {
            points.push(CollocPoint {
                x: x.clone(),
                t,
                slice: Some(k as u32),
                origin: Origin::Boundary,
                alive: true,
            });
        }
    }
    Ok(CollocationSet { points })
}

/// Layout of the uniform part of the PDE training set `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeSetMode {
    /// `n` spatial points replicated at every time slice.
    PerSlice,
    /// `n` points i.i.d. uniform on `domain x [0, T]`.
    JointSpacetime,
}

/// Uniform collocation points for the PDE residual term.
pub fn assemble_pde_set(
    problem: &PdeProblem,
    n: usize,
    grid: &TimeGrid,
    mode: PdeSetMode,
    seed: u64,
) -> Result<CollocationSet> {
    if n == 0 {
        return Ok(CollocationSet::default());
    }
    let mut points = Vec::new();
    match mode {
        PdeSetMode::PerSlice => {
            let spatial = sample_uniform_box(problem.domain(), n, derive_seed(seed, "pde-slice", 0))?;
            for (k, &t) in grid.times().iter().enumerate() {
                for x in &spatial {
                    points.push(CollocPoint {
                        x: x.clone(),
                        t,
                        slice: Some(k as u32),
                        origin: Origin::Uniform,
                        alive: true,
                    });
                }
            }
        }
        PdeSetMode::JointSpacetime => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "pde-joint", 0));
            let domain = problem.domain();
            for _ in 0..n {
                let x: Vec<f64> = (0..domain.dim())
                    .map(|i| rng.random_range(domain.lo()[i]..domain.hi()[i]))
                    .collect();
                let t = rng.random_range(0.0..grid.horizon());
                points.push(CollocPoint {
                    x,
                    t,
                    slice: None,
                    origin: Origin::UniformSpacetime,
                    alive: true,
                });
            }
        }
    }
    Ok(CollocationSet { points })
}
