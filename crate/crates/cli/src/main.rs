//! Command-line driver: run experiments, compare methods, verify invariants,
//! export solution grids.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use msm_core::artifacts::{atomic_write, persist_run};
use msm_core::autodiff::DenseNetwork;
use msm_core::config::{ExperimentConfig, Preset};
use msm_core::error::Error;
use msm_core::metrics::{build_report, report_csv, report_json, ErrorReport};
use msm_core::pde::{Lattice, LatticeSpec, PdeProblem};
use msm_core::training::{msm_run_with_abort_dir, pinn_run, solution_value, RunResult};
use msm_core::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(
    name = "msm",
    about = "Moving-sample adaptive collocation for physics-informed neural networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one experiment (moving-sample or plain-PINN baseline).
    Run(RunArgs),
    /// Run both methods over a seed list at matched budgets and report errors.
    Compare(CompareArgs),
    /// Execute the verification suites.
    Verify(VerifyArgs),
    /// Evaluate a checkpointed solution on a lattice and export it as CSV.
    ExportGrid(ExportGridArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark name (allen_cahn | rotation | burgers | fokker_planck | advection6d).
    #[arg(long)]
    problem: Option<String>,
    /// Budget preset: full | desk.
    #[arg(long)]
    preset: Option<String>,
    /// Override the training method: msm | pinn.
    #[arg(long)]
    method: Option<String>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the seed list (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let preset = match &self.preset {
            Some(p) => Preset::parse(p)?,
            None => Preset::Full,
        };
        let mut cfg = match (&self.config, &self.problem) {
            (Some(path), _) => {
                if !path.exists() {
                    return Err(Error::config(format!(
                        "config file {} does not exist",
                        path.display()
                    )));
                }
                ExperimentConfig::load(path)?
            }
            (None, Some(problem)) => ExperimentConfig::default_for(problem, preset)?,
            (None, None) => {
                return Err(Error::config(
                    "either --config or --problem is required".to_string(),
                ));
            }
        };
        if self.config.is_some() {
            if let Some(problem) = &self.problem {
                cfg.problem = problem.clone();
            }
            if let Some(p) = &self.preset {
                cfg.preset = p.clone();
            }
        }
        if let Some(m) = &self.method {
            cfg.method = m.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.to_string_lossy().to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Run up to this many seeds concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Run up to this many (seed, method) jobs concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run: autodiff | flow | transport | losses (default: all).
    #[arg(long)]
    suite: Option<String>,
    /// Where to write the machine-readable report.
    #[arg(long, default_value = "verify.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportGridArgs {
    /// Solution checkpoint (JSON written by `run`).
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    problem: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Nodes per spatial axis (default: problem evaluation lattice).
    #[arg(long)]
    nx: Option<usize>,
    /// Time slices.
    #[arg(long)]
    nt: Option<usize>,
}

fn execute_one(cfg: &ExperimentConfig, method: &str, seed: u64) -> Result<(RunResult, f64), Error> {
    let problem = cfg.problem_instance()?;
    let tcfg = cfg.train_config()?;
    let scfg = cfg.sampling_config()?;
    let eval = cfg.eval_spec()?;
    let abort_dir = msm_core::artifacts::run_dir(
        std::path::Path::new(&cfg.output.dir),
        cfg,
        method,
        seed,
    );
    let start = Instant::now();
    let result = match method {
        "msm" => msm_run_with_abort_dir(&problem, &tcfg, &scfg, seed, &eval, Some(&abort_dir))?,
        "pinn" => pinn_run(&problem, &tcfg, &scfg, seed, &eval)?,
        other => return Err(Error::config(format!("unknown method '{other}'"))),
    };
    Ok((result, start.elapsed().as_secs_f64()))
}

/// Runs jobs with at most `parallel` concurrent workers; results keep job
/// order. Runs share no mutable state, so overlap is safe.
fn run_jobs<T: Send>(jobs: Vec<Box<dyn FnOnce() -> T + Send>>, parallel: usize) -> Vec<T> {
    let mut results: Vec<Option<T>> = Vec::new();
    let mut queue: Vec<(usize, Box<dyn FnOnce() -> T + Send>)> = Vec::new();
    for (i, job) in jobs.into_iter().enumerate() {
        results.push(None);
        queue.push((i, job));
    }
    while !queue.is_empty() {
        let batch: Vec<_> = queue
            .drain(..parallel.max(1).min(queue.len()))
            .collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .into_iter()
                .map(|(i, job)| scope.spawn(move || (i, job())))
                .collect();
            for h in handles {
                let (i, r) = h.join().expect("worker panicked");
                results[i] = Some(r);
            }
        });
    }
    results.into_iter().map(|r| r.unwrap()).collect()
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let cfg = args.config.resolve()?;
    let out_dir = PathBuf::from(&cfg.output.dir);
    let seeds = cfg.seed_list();
    println!(
        "running {} on {} ({} preset), seeds {:?}",
        cfg.method, cfg.problem, cfg.preset, seeds
    );
    let jobs: Vec<Box<dyn FnOnce() -> Result<(), Error> + Send>> = seeds
        .iter()
        .map(|&seed| {
            let cfg = cfg.clone();
            let out_dir = out_dir.clone();
            let method = cfg.method.clone();
            Box::new(move || {
                let (result, wall) = execute_one(&cfg, &method, seed)?;
                let dir = persist_run(&out_dir, &cfg, &result, seed)?;
                println!(
                    "seed {seed}: rel_l2 {:.4e}, l_inf {:.4e}, {wall:.1}s -> {}",
                    result.metrics.rel_l2,
                    result.metrics.l_inf,
                    dir.display()
                );
                Ok(())
            }) as Box<dyn FnOnce() -> Result<(), Error> + Send>
        })
        .collect();
    let results = run_jobs(jobs, args.parallel);
    let mut failed = false;
    for r in results {
        if let Err(e) = r {
            eprintln!("error: {e}");
            failed = true;
        }
    }
    if failed {
        return Err(Error::numeric("at least one seed failed".to_string()));
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    let cfg = args.config.resolve()?;
    let out_dir = PathBuf::from(&cfg.output.dir);
    let seeds = cfg.seed_list();
    let digest = cfg.digest()?;
    println!(
        "comparing msm vs pinn on {} ({} preset), seeds {:?}",
        cfg.problem, cfg.preset, seeds
    );

    let mut jobs: Vec<Box<dyn FnOnce() -> Result<ErrorReport, Error> + Send>> = Vec::new();
    for &seed in &seeds {
        for method in ["msm", "pinn"] {
            let cfg = cfg.clone();
            let out_dir = out_dir.clone();
            let digest = digest.clone();
            jobs.push(Box::new(move || {
                let (result, wall) = execute_one(&cfg, method, seed)?;
                persist_run(&out_dir, &cfg, &result, seed)?;
                println!(
                    "{method} seed {seed}: rel_l2 {:.4e}, l_inf {:.4e} ({wall:.1}s)",
                    result.metrics.rel_l2, result.metrics.l_inf
                );
                Ok(ErrorReport {
                    problem: cfg.problem.clone(),
                    method: method.to_string(),
                    seed: seed.to_string(),
                    rel_l2: result.metrics.rel_l2,
                    l_inf: result.metrics.l_inf,
                    wall_s: wall,
                    config_digest: digest,
                })
            }));
        }
    }
    let outcomes = run_jobs(jobs, args.parallel);
    let mut rows = Vec::new();
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("error: {e}");
                failures += 1;
            }
        }
    }
    let report = build_report(&rows);
    let dir = out_dir.join(&cfg.problem);
    std::fs::create_dir_all(&dir)?;
    atomic_write(&dir.join("report.csv"), report_csv(&report).as_bytes())?;
    atomic_write(&dir.join("report.json"), report_json(&report)?.as_bytes())?;
    println!("report: {}", dir.join("report.csv").display());
    for row in &report {
        if row.seed == "median" {
            println!(
                "  {} {} median: rel_l2 {:.4e}, l_inf {:.4e}",
                row.problem, row.method, row.rel_l2, row.l_inf
            );
        }
    }
    if failures > 0 {
        return Err(Error::numeric(format!("{failures} job(s) failed")));
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Error> {
    let suites = match &args.suite {
        Some(s) => vec![Suite::parse(s)?],
        None => Suite::ALL.to_vec(),
    };
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut all_passed = true;
    for suite in suites {
        let report = run_suite(suite);
        for c in &report.checks {
            println!(
                "[{}] {} {}: {}",
                if c.passed { "pass" } else { "FAIL" },
                report.suite,
                c.name,
                c.detail
            );
        }
        all_passed &= report.passed;
        reports.push(report);
    }
    let wall = start.elapsed().as_secs_f64();
    if wall > 300.0 {
        eprintln!("warning: verification took {wall:.0}s (budget 300s)");
    }
    atomic_write(&args.out, serde_json::to_string_pretty(&reports)?.as_bytes())?;
    println!("wrote {}", args.out.display());
    if !all_passed {
        return Err(Error::numeric("verification failed".to_string()));
    }
    Ok(())
}

fn cmd_export_grid(args: ExportGridArgs) -> Result<(), Error> {
    if !args.checkpoint.exists() {
        return Err(Error::config(format!(
            "checkpoint {} does not exist",
            args.checkpoint.display()
        )));
    }
    let net = DenseNetwork::load_checkpoint(&args.checkpoint)?;
    let problem = PdeProblem::by_name(&args.problem)?;
    if net.input_dim() != problem.spatial_dim() + 1 {
        return Err(Error::contract(format!(
            "checkpoint input dim {} does not match problem '{}' (needs {})",
            net.input_dim(),
            problem.name(),
            problem.spatial_dim() + 1
        )));
    }
    if problem.spatial_dim() > 2 {
        return Err(Error::config(
            "grid export supports 1D and 2D problems; use weighted metrics for 6D".to_string(),
        ));
    }
    let defaults = msm_core::training::EvalSpec::default_for(&problem);
    let spec = LatticeSpec {
        n_per_axis: args.nx.unwrap_or(defaults.lattice.n_per_axis),
        n_times: args.nt.unwrap_or(defaults.lattice.n_times),
    };
    let lat = Lattice::evaluate(problem.domain(), problem.horizon(), &spec, |x, t| {
        solution_value(&problem, &net, x, t)
    });
    lat.write_csv(&args.out)?;
    println!("wrote {} ({} rows)", args.out.display(), lat.values.len());
    Ok(())
}

fn main() {
    if let Ok(threads) = std::env::var("MSM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Verify(args) => cmd_verify(args),
        Command::ExportGrid(args) => cmd_export_grid(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
