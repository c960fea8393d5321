//! Run-artifact persistence: metrics, checkpoints, sets, trajectories.
//!
//! Files are written to a temporary sibling and renamed into place, so
//! readers never observe partial artifacts. `metrics.json` contains no
//! timing; identical configs and seeds produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::training::RunResult;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    config_digest: &'a str,
    metrics: &'a crate::training::RunMetrics,
}

/// Directory for one run's artifacts.
pub fn run_dir(out_dir: &Path, cfg: &ExperimentConfig, method: &str, seed: u64) -> PathBuf {
    out_dir
        .join(&cfg.problem)
        .join(format!("{method}-seed{seed}"))
}

/// Writes all artifacts of a finished run; returns the run directory.
pub fn persist_run(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    result: &RunResult,
    seed: u64,
) -> Result<PathBuf> {
    let dir = run_dir(out_dir, cfg, &result.metrics.method, seed);
    std::fs::create_dir_all(&dir)?;
    let digest = cfg.digest()?;

    let metrics = MetricsFile {
        config_digest: &digest,
        metrics: &result.metrics,
    };
    atomic_write(
        &dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)?.as_bytes(),
    )?;
    atomic_write(&dir.join("effective-config.toml"), cfg.to_toml()?.as_bytes())?;

    if cfg.output.export_checkpoints {
        atomic_write(
            &dir.join("checkpoint-u.json"),
            result.u_net.to_checkpoint_json()?.as_bytes(),
        )?;
        if let Some(pot) = &result.potential {
            atomic_write(
                &dir.join("checkpoint-phi.json"),
                pot.net().to_checkpoint_json()?.as_bytes(),
            )?;
        }
    }

    let d = result.u_net.input_dim() - 1;
    if cfg.output.export_sets {
        let sets_dir = dir.join("sets");
        std::fs::create_dir_all(&sets_dir)?;
        result.sets.pde.write_csv(&sets_dir.join("pde.csv"), d)?;
        if !result.sets.initial.is_empty() {
            result.sets.initial.write_csv(&sets_dir.join("initial.csv"), d)?;
        }
        if !result.sets.boundary.is_empty() {
            result
                .sets
                .boundary
                .write_csv(&sets_dir.join("boundary.csv"), d)?;
        }
    }

    if cfg.output.export_trajectories && !result.trajectories.is_empty() {
        let traj_dir = dir.join("trajectories");
        std::fs::create_dir_all(&traj_dir)?;
        for (i, traj) in result.trajectories.iter().enumerate() {
            traj.write_csv(&traj_dir.join(format!("iter-{:02}.csv", i + 1)))?;
        }
    }

    if cfg.output.export_histories {
        let mut csv = String::from("phase,epoch,loss\n");
        for h in &result.histories {
            for (e, l) in h.losses.iter().enumerate() {
                csv.push_str(&format!("{},{e},{l}\n", h.phase));
            }
        }
        atomic_write(&dir.join("losses.csv"), csv.as_bytes())?;
    }

    Ok(dir)
}
