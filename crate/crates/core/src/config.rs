//! Experiment configuration: TOML schema, per-benchmark defaults, presets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pde::PdeProblem;
use crate::sampling::{BoundaryMode, InitialStrategy, PdeSetMode};
use crate::training::{EvalSpec, GradMode, SamplingConfig, TrainConfig};

/// Budget preset: the paper's full budgets, or a reduced desk scale for CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Full,
    Desk,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Preset::Full => "full",
            Preset::Desk => "desk",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub outer_iterations: usize,
    pub epochs_u: usize,
    pub epochs_v: usize,
    pub epochs_final: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub beta_ic: f64,
    pub beta_bc: f64,
    pub batch_size: usize,
    pub grad_mode: String,
    pub fd_step: f64,
    pub sampling_exponent: f64,
    pub hidden: Vec<usize>,
    pub substeps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub n_pde: usize,
    pub pde_mode: String,
    pub n_joint_extra: usize,
    pub n_initial: usize,
    pub n_boundary: usize,
    pub n_new: Vec<usize>,
    pub n_time_slices: usize,
    pub initial_strategy: String,
    pub uniform_fraction: f64,
    pub boundary_mode: String,
    pub probe_per_slice: usize,
    pub baseline_n: usize,
    /// Policy tag: uniformly distributed points stay in `S` forever, which
    /// realizes the uniform floor of the sampling density.
    pub uniform_mix: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub export_trajectories: bool,
    pub export_sets: bool,
    pub export_checkpoints: bool,
    pub export_grids: bool,
    pub export_histories: bool,
}

/// The full experiment description; serializes to the flat
/// `[train]`/`[sampling]`/`[output]` TOML layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub method: String,
    pub preset: String,
    pub seed: u64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub train: TrainSection,
    pub sampling: SamplingSection,
    pub output: OutputSection,
}

fn full_defaults(problem: &str) -> Result<(TrainSection, SamplingSection)> {
    let train = |m1: usize, grad_mode: &str| TrainSection {
        outer_iterations: 5,
        epochs_u: m1,
        epochs_v: 1000,
        epochs_final: m1,
        learning_rate: 1e-3,
        adam_beta1: 0.9,
        adam_beta2: 0.999,
        adam_epsilon: 1e-8,
        beta_ic: 1.0,
        beta_bc: 1.0,
        batch_size: 0,
        grad_mode: grad_mode.to_string(),
        fd_step: 1e-3,
        sampling_exponent: 1.0,
        hidden: vec![64, 64, 64],
        substeps: 5,
    };
    let sampling = SamplingSection {
        n_pde: 0,
        pde_mode: "per_slice".to_string(),
        n_joint_extra: 0,
        n_initial: 0,
        n_boundary: 0,
        n_new: Vec::new(),
        n_time_slices: 11,
        initial_strategy: "uniform".to_string(),
        uniform_fraction: 0.2,
        boundary_mode: "random".to_string(),
        probe_per_slice: 0,
        baseline_n: 0,
        uniform_mix: "retain".to_string(),
    };
    Ok(match problem {
        "allen_cahn" => (
            train(6000, "finite_difference"),
            SamplingSection {
                n_pde: 200,
                pde_mode: "joint_spacetime".to_string(),
                n_new: vec![600],
                probe_per_slice: 256,
                baseline_n: 3200,
                ..sampling
            },
        ),
        "rotation" => (
            train(1500, "exact"),
            SamplingSection {
                n_pde: 1000,
                n_initial: 500,
                n_boundary: 400,
                n_new: vec![1000, 300],
                initial_strategy: "prop_u0".to_string(),
                baseline_n: 2200,
                ..sampling
            },
        ),
        "burgers" => (
            train(1500, "finite_difference"),
            SamplingSection {
                n_pde: 1200,
                n_initial: 500,
                n_boundary: 200,
                n_new: vec![1200, 300],
                initial_strategy: "prop_grad_u0_sq".to_string(),
                baseline_n: 2400,
                ..sampling
            },
        ),
        "fokker_planck" => (
            train(6000, "finite_difference"),
            SamplingSection {
                n_pde: 1500,
                n_joint_extra: 500,
                n_initial: 400,
                n_boundary: 1200,
                n_new: vec![800],
                initial_strategy: "prop_u0".to_string(),
                baseline_n: 5500,
                ..sampling
            },
        ),
        "advection6d" => (
            train(1500, "exact"),
            SamplingSection {
                n_pde: 5000,
                n_initial: 2800,
                n_boundary: 360,
                n_new: vec![2000],
                initial_strategy: "prop_u0".to_string(),
                boundary_mode: "per_face".to_string(),
                baseline_n: 15000,
                ..sampling
            },
        ),
        other => {
            return Err(Error::config(format!("unknown problem '{other}'")));
        }
    })
}

/// Desk scale: budgets cut ~8x and epochs cut to CI scale; everything else,
/// including the alternation structure, stays intact.
fn apply_desk(train: &mut TrainSection, sampling: &mut SamplingSection, problem: &str) {
    train.epochs_u = if problem == "advection6d" { 100 } else { 150 };
    train.epochs_final = train.epochs_u;
    train.epochs_v = 60;
    let cut = |n: usize, div: usize, min: usize| (n / div).max(min);
    match problem {
        "advection6d" => {
            sampling.n_pde = 312;
            sampling.n_initial = 176;
            sampling.n_boundary = 120; // stays a multiple of the 12 faces
            sampling.n_new = vec![125];
            sampling.baseline_n = 937;
        }
        _ => {
            sampling.n_pde = cut(sampling.n_pde, 8, 16);
            sampling.n_initial = cut(sampling.n_initial, 8, 0).max(if sampling.n_initial > 0 { 16 } else { 0 });
            sampling.n_boundary = cut(sampling.n_boundary, 8, 0).max(if sampling.n_boundary > 0 { 16 } else { 0 });
            sampling.n_new = sampling.n_new.iter().map(|&n| cut(n, 8, 16)).collect();
            sampling.baseline_n = cut(sampling.baseline_n, 8, 32);
            if sampling.probe_per_slice > 0 {
                sampling.probe_per_slice = cut(sampling.probe_per_slice, 8, 32);
            }
            if sampling.n_joint_extra > 0 {
                sampling.n_joint_extra = cut(sampling.n_joint_extra, 8, 16);
            }
        }
    }
}

impl ExperimentConfig {
    /// Fully populated defaults reproducing the per-benchmark budgets.
    pub fn default_for(problem: &str, preset: Preset) -> Result<ExperimentConfig> {
        let (mut train, mut sampling) = full_defaults(problem)?;
        if preset == Preset::Desk {
            apply_desk(&mut train, &mut sampling, problem);
        }
        Ok(ExperimentConfig {
            problem: problem.to_string(),
            method: "msm".to_string(),
            preset: preset.label().to_string(),
            seed: 0,
            seeds: Vec::new(),
            train,
            sampling,
            output: OutputSection {
                dir: "out".to_string(),
                export_trajectories: true,
                export_sets: true,
                export_checkpoints: true,
                export_grids: false,
                export_histories: false,
            },
        })
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    /// SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> Result<String> {
        let toml = self.to_toml()?;
        let mut h = Sha256::new();
        h.update(toml.as_bytes());
        Ok(format!("{:x}", h.finalize()))
    }

    /// Seeds to run: the `seeds` list, or the single `seed`.
    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn problem_instance(&self) -> Result<PdeProblem> {
        PdeProblem::by_name(&self.problem)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            outer_iterations: t.outer_iterations,
            epochs_u: t.epochs_u,
            epochs_v: t.epochs_v,
            epochs_final: t.epochs_final,
            learning_rate: t.learning_rate,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_epsilon: t.adam_epsilon,
            beta_ic: t.beta_ic,
            beta_bc: t.beta_bc,
            batch_size: t.batch_size,
            grad_mode: GradMode::parse(&t.grad_mode)?,
            fd_step: t.fd_step,
            sampling_exponent: t.sampling_exponent,
            hidden: t.hidden.clone(),
            substeps: t.substeps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sampling_config(&self) -> Result<SamplingConfig> {
        let s = &self.sampling;
        if s.uniform_mix != "retain" {
            return Err(Error::config(format!(
                "unsupported uniform_mix policy '{}' (only 'retain')",
                s.uniform_mix
            )));
        }
        let cfg = SamplingConfig {
            n_pde: s.n_pde,
            pde_mode: match s.pde_mode.as_str() {
                "per_slice" => PdeSetMode::PerSlice,
                "joint_spacetime" => PdeSetMode::JointSpacetime,
                other => {
                    return Err(Error::config(format!("unknown pde_mode '{other}'")));
                }
            },
            n_joint_extra: s.n_joint_extra,
            n_initial: s.n_initial,
            n_boundary: s.n_boundary,
            n_new: s.n_new.clone(),
            n_time_slices: s.n_time_slices,
            initial_strategy: InitialStrategy::parse(&s.initial_strategy)?,
            uniform_fraction: s.uniform_fraction,
            boundary_mode: match s.boundary_mode.as_str() {
                "random" => BoundaryMode::Random,
                "per_face" => BoundaryMode::PerFace,
                other => {
                    return Err(Error::config(format!("unknown boundary_mode '{other}'")));
                }
            },
            probe_per_slice: s.probe_per_slice,
            baseline_n: s.baseline_n,
        };
        cfg.validate(self.train.outer_iterations)?;
        Ok(cfg)
    }

    pub fn eval_spec(&self) -> Result<EvalSpec> {
        let problem = self.problem_instance()?;
        let spec = EvalSpec::default_for(&problem);
        Ok(match Preset::parse(&self.preset)? {
            Preset::Full => spec,
            Preset::Desk => spec.desk(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.method != "msm" && self.method != "pinn" {
            return Err(Error::config(format!(
                "method must be 'msm' or 'pinn', got '{}'",
                self.method
            )));
        }
        Preset::parse(&self.preset)?;
        self.problem_instance()?;
        self.train_config()?;
        self.sampling_config()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_paper_budgets() {
        let ac = ExperimentConfig::default_for("allen_cahn", Preset::Full).unwrap();
        assert_eq!(ac.sampling.n_pde, 200);
        assert_eq!(ac.sampling.n_new, vec![600]);
        assert_eq!(ac.train.epochs_u, 6000);
        assert_eq!(ac.sampling.baseline_n, 3200);
        // Budget arithmetic: 200 + 5 * 600 = 3200 matched by the baseline.
        assert_eq!(
            ac.sampling.n_pde + 5 * ac.sampling.n_new[0],
            ac.sampling.baseline_n
        );

        let rot = ExperimentConfig::default_for("rotation", Preset::Full).unwrap();
        assert_eq!(rot.sampling.n_pde, 1000);
        assert_eq!(rot.sampling.n_initial, 500);
        assert_eq!(rot.sampling.n_boundary, 400);
        assert_eq!(rot.sampling.n_new, vec![1000, 300]);
        assert_eq!(rot.sampling.baseline_n, 2200);
        assert_eq!(rot.train.epochs_u, 1500);

        let bur = ExperimentConfig::default_for("burgers", Preset::Full).unwrap();
        assert_eq!(bur.sampling.n_pde, 1200);
        assert_eq!(bur.sampling.n_boundary, 200);
        assert_eq!(bur.sampling.n_new, vec![1200, 300]);
        assert_eq!(bur.sampling.baseline_n, 2400);
        assert_eq!(bur.sampling.initial_strategy, "prop_grad_u0_sq");

        let fp = ExperimentConfig::default_for("fokker_planck", Preset::Full).unwrap();
        assert_eq!(fp.sampling.n_pde, 1500);
        assert_eq!(fp.sampling.n_initial, 400);
        assert_eq!(fp.sampling.n_new, vec![800]);
        assert_eq!(fp.sampling.n_boundary, 1200);

        let adv = ExperimentConfig::default_for("advection6d", Preset::Full).unwrap();
        assert_eq!(adv.sampling.n_pde, 5000);
        assert_eq!(adv.sampling.n_new, vec![2000]);
        assert_eq!(adv.sampling.n_initial, 2800);
        assert_eq!(adv.sampling.n_boundary, 360);
        assert_eq!(adv.sampling.boundary_mode, "per_face");
    }

    #[test]
    fn toml_roundtrip_is_identity() {
        for problem in crate::pde::PROBLEM_NAMES {
            for preset in [Preset::Full, Preset::Desk] {
                let cfg = ExperimentConfig::default_for(problem, preset).unwrap();
                let toml = cfg.to_toml().unwrap();
                let back = ExperimentConfig::from_toml(&toml).unwrap();
                assert_eq!(cfg, back, "{problem} {preset:?}");
                assert_eq!(cfg.digest().unwrap(), back.digest().unwrap());
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = ExperimentConfig::default_for("rotation", Preset::Desk).unwrap();
        let mut toml = cfg.to_toml().unwrap();
        toml.push_str("\nnot_a_key = 3\n");
        assert!(ExperimentConfig::from_toml(&toml).is_err());
    }

    #[test]
    fn desk_preset_validates_and_shrinks() {
        for problem in crate::pde::PROBLEM_NAMES {
            let full = ExperimentConfig::default_for(problem, Preset::Full).unwrap();
            let desk = ExperimentConfig::default_for(problem, Preset::Desk).unwrap();
            desk.validate().unwrap();
            assert!(desk.train.epochs_u < full.train.epochs_u);
            assert!(desk.sampling.n_pde < full.sampling.n_pde);
        }
    }

    #[test]
    fn digests_differ_across_configs() {
        let a = ExperimentConfig::default_for("rotation", Preset::Full).unwrap();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.digest().unwrap(), b.digest().unwrap());
    }

    #[test]
    fn bad_method_rejected() {
        let mut cfg = ExperimentConfig::default_for("rotation", Preset::Desk).unwrap();
        cfg.method = "sgd".to_string();
        assert!(cfg.validate().is_err());
    }
}
