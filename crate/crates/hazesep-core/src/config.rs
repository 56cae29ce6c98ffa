//! JSON run configuration and the evaluation pairs manifest.
//!
//! Every key has a documented default equal to the reference operating point
//! where one exists: sigma = 25, T = 200, tau = 0.8, lambda = kappa = 0.5,
//! gamma = 1, mu = 255, patch 128x64 at 10% overlap, 100 epochs, batch 8,
//! learning rate 1e-4. Keys absent from the file fall back to these
//! defaults; unknown keys are a hard error so typos cannot silently
//! deconfigure a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compand::CompandParams;
use crate::dehaze::DehazeConfig;
use crate::error::{CoreError, Result};
use crate::patch::PatchLayout;
use crate::phantom::{HazeSpec, PhantomSpec};
use crate::score::ArchSpec;
use crate::sde::SdeSchedule;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub sigma: f64,
    pub steps_t: usize,
    pub tau: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            sigma: 25.0,
            steps_t: 200,
            tau: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompandSection {
    pub mu: f64,
}

impl Default for CompandSection {
    fn default() -> Self {
        CompandSection { mu: 255.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DehazeSection {
    pub lambda: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub frozen_y_path: bool,
    pub independent_init: bool,
}

impl Default for DehazeSection {
    fn default() -> Self {
        DehazeSection {
            lambda: 0.5,
            kappa: 0.5,
            gamma: 1.0,
            frozen_y_path: false,
            independent_init: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchSection {
    pub rows: usize,
    pub cols: usize,
    pub overlap_fraction: f64,
}

impl Default for PatchSection {
    fn default() -> Self {
        PatchSection {
            rows: 128,
            cols: 64,
            overlap_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub t_min: f64,
    pub augment: bool,
    /// "conv" or "dense".
    pub arch: String,
    pub channels: usize,
    pub layers: usize,
    pub kernel: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-4,
            t_min: 0.01,
            augment: true,
            arch: "conv".into(),
            channels: 8,
            layers: 3,
            kernel: 3,
            hidden: vec![32, 32],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dataset_dir: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub schedule: ScheduleSection,
    pub compand: CompandSection,
    pub dehaze: DehazeSection,
    pub patch: PatchSection,
    pub training: TrainingSection,
    pub phantom: PhantomSpec,
    pub haze: HazeSpec,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            schedule: ScheduleSection::default(),
            compand: CompandSection::default(),
            dehaze: DehazeSection::default(),
            patch: PatchSection::default(),
            training: TrainingSection::default(),
            phantom: PhantomSpec::default(),
            haze: HazeSpec::default(),
            paths: PathsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn schedule(&self) -> Result<SdeSchedule> {
        SdeSchedule::new(self.schedule.sigma, self.schedule.steps_t, self.schedule.tau)
    }

    pub fn compand_params(&self) -> Result<CompandParams> {
        CompandParams::new(self.compand.mu)
    }

    pub fn patch_layout(&self) -> Result<PatchLayout> {
        PatchLayout::new(self.patch.rows, self.patch.cols, self.patch.overlap_fraction)
    }

    pub fn arch_spec(&self) -> Result<ArchSpec> {
        match self.training.arch.as_str() {
            "conv" => Ok(ArchSpec::Conv {
                channels: self.training.channels,
                layers: self.training.layers,
                kernel: self.training.kernel,
            }),
            "dense" => Ok(ArchSpec::Dense {
                hidden: self.training.hidden.clone(),
            }),
            other => Err(CoreError::InvalidParam(format!(
                "training.arch must be \"conv\" or \"dense\", got {other:?}"
            ))),
        }
    }

    /// Assemble the sampler configuration, validating every section.
    pub fn dehaze_config(&self, threads: usize) -> Result<DehazeConfig> {
        let cfg = DehazeConfig {
            lambda_x: self.dehaze.lambda,
            kappa_h: self.dehaze.kappa,
            gamma: self.dehaze.gamma,
            compand: self.compand_params()?,
            schedule: self.schedule()?,
            patch: self.patch_layout()?,
            seed: self.seed,
            frozen_y_path: self.dehaze.frozen_y_path,
            independent_init: self.dehaze.independent_init,
            threads: threads.max(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule()?;
        self.compand_params()?;
        self.patch_layout()?;
        self.arch_spec()?;
        self.phantom.validate()?;
        self.haze.validate()?;
        if self.training.batch_size == 0 {
            return Err(CoreError::InvalidParam("training.batch_size must be >= 1".into()));
        }
        if !(self.training.learning_rate.is_finite() && self.training.learning_rate > 0.0) {
            return Err(CoreError::InvalidParam("training.learning_rate must be > 0".into()));
        }
        if !(self.training.t_min > 0.0 && self.training.t_min < 1.0) {
            return Err(CoreError::InvalidParam("training.t_min must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Parse a run configuration from JSON text (fuzzing entry point). Unknown
/// keys fail; missing keys take their defaults; all values are validated.
pub fn parse_config(json: &str) -> Result<RunConfig> {
    let config: RunConfig = serde_json::from_str(json)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// One row of the evaluation manifest: file paths for a (clean, measurement,
/// dehazed) triple plus the two ROI masks (PNG or polygon JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalPair {
    pub level: f64,
    pub clean: PathBuf,
    pub measurement: PathBuf,
    pub dehazed: PathBuf,
    #[serde(default)]
    pub mask_a: Option<PathBuf>,
    #[serde(default)]
    pub mask_b: Option<PathBuf>,
    /// Frame index used when masks come from key-frame polygon JSON.
    #[serde(default)]
    pub frame_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalManifest {
    pub pairs: Vec<EvalPair>,
}

/// Parse an evaluation manifest (fuzzing entry point).
pub fn parse_eval_manifest(json: &str) -> Result<EvalManifest> {
    let manifest: EvalManifest = serde_json::from_str(json)?;
    for p in &manifest.pairs {
        if !(p.level.is_finite() && p.level >= 0.0) {
            return Err(CoreError::Format(format!(
                "eval pair level {} must be finite and >= 0",
                p.level
            )));
        }
    }
    Ok(manifest)
}

pub fn load_eval_manifest(path: impl AsRef<Path>) -> Result<EvalManifest> {
    let text = std::fs::read_to_string(path)?;
    parse_eval_manifest(&text)
}
