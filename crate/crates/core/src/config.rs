//! Experiment configuration: one JSON document, every field defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{DoeblinConstants, DEFAULT_HEURISTIC_FACTOR};
use crate::detect::TruncationSpec;
use crate::error::{Error, Result};
use crate::mocap::ScenarioSpec;
use crate::scorenet::{Activation, MlpArchitecture, Optimizer, TrainConfig};
use crate::simulate::{ChangePoint, GaussianKernelSpec, TrajectoryConfig, DEFAULT_BURN_IN};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub kernels: KernelsSection,
    pub trajectory: TrajectorySection,
    pub architecture: ArchitectureSection,
    pub training: TrainingSection,
    pub detector: DetectorSection,
    pub sweep: SweepSection,
    pub bounds: BoundsSection,
    pub scenario: Option<ScenarioSpec>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelsSection {
    pub pre: GaussianKernelSpec,
    pub post: GaussianKernelSpec,
}

impl Default for KernelsSection {
    fn default() -> Self {
        KernelsSection {
            pre: GaussianKernelSpec::default_pre(),
            post: GaussianKernelSpec::default_post(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub length: usize,
    pub change_point: ChangePoint,
    pub burn_in: usize,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection {
            length: 500,
            change_point: ChangePoint::At(120),
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureSection {
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        ArchitectureSection {
            hidden_widths: vec![128; 3],
            activation: Activation::Silu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    #[default]
    Pre,
    Post,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Pre => "pre",
            Regime::Post => "post",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    /// Which regime's transitions to learn.
    pub regime: Regime,
    /// Trajectory CSV to learn from; when absent, pairs are simulated.
    pub data: Option<PathBuf>,
    /// Simulated training pairs.
    pub pairs: usize,
    /// Fresh simulated pairs for the accuracy report.
    pub eval_pairs: usize,
    /// Fit a per-dimension standardization and store it in the model.
    pub standardize: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub shuffle: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            regime: Regime::Pre,
            data: None,
            pairs: 50_000,
            eval_pairs: 10_000,
            standardize: false,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            optimizer: t.optimizer,
            shuffle: t.shuffle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    /// Exact scores of the configured Gaussian kernels.
    #[default]
    ClosedForm,
    /// Trained networks loaded from `pre_model` and `post_model`.
    Models,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub threshold: f64,
    pub truncation: TruncationSpec,
    pub scores: ScoreSource,
    pub pre_model: Option<PathBuf>,
    pub post_model: Option<PathBuf>,
    /// Trajectory CSV to monitor; when absent, one is simulated.
    pub data: Option<PathBuf>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            threshold: 2000.0,
            truncation: TruncationSpec::Level(600.0),
            scores: ScoreSource::ClosedForm,
            pre_model: None,
            post_model: None,
            data: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub thresholds: Vec<f64>,
    pub false_alarm_steps: usize,
    pub delay_steps: usize,
    pub truncation_level: f64,
    /// Also run the untruncated detector on the same streams.
    pub compare_untruncated: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            thresholds: vec![1500.0, 2000.0, 3000.0, 4000.0, 5000.0],
            false_alarm_steps: 100_000,
            delay_steps: 10_000,
            truncation_level: 600.0,
            compare_untruncated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    /// `‖φ‖` used for μ by the `bounds` command.
    pub truncation_level: f64,
    pub heuristic_factor: f64,
    /// When set, μ comes from these constants instead of the heuristic
    /// (for both `bounds` and `sweep`).
    pub doeblin: Option<DoeblinConstants>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            truncation_level: 600.0,
            heuristic_factor: DEFAULT_HEURISTIC_FACTOR,
            doeblin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.kernels.pre.validate()?;
        self.kernels.post.validate()?;
        if self.kernels.pre.dim != self.kernels.post.dim {
            return Err(Error::Config("kernels.pre and kernels.post must share dim".into()));
        }
        self.trajectory_config().validate()?;
        self.train_config().validate()?;
        crate::detect::DetectorConfig::new(self.detector.threshold, self.detector.truncation)?;
        if self.sweep.thresholds.is_empty() {
            return Err(Error::Config("sweep.thresholds must not be empty".into()));
        }
        if self.sweep.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep.thresholds must be strictly increasing".into()));
        }
        TruncationSpec::level(self.sweep.truncation_level)?;
        TruncationSpec::level(self.bounds.truncation_level)?;
        if let Some(c) = &self.bounds.doeblin {
            c.validate()?;
        }
        if self.architecture.hidden_widths.is_empty() || self.architecture.hidden_widths.contains(&0) {
            return Err(Error::Config("architecture.hidden_widths must be nonempty and positive".into()));
        }
        Ok(())
    }

    pub fn trajectory_config(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            pre: self.kernels.pre,
            post: Some(self.kernels.post),
            change_point: self.trajectory.change_point,
            length: self.trajectory.length,
            seed: self.seed,
            burn_in: self.trajectory.burn_in,
        }
    }

    pub fn architecture(&self, state_dim: usize) -> Result<MlpArchitecture> {
        let arch = MlpArchitecture {
            state_dim,
            hidden_widths: self.architecture.hidden_widths.clone(),
            activation: self.architecture.activation,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: self.seed,
            optimizer: t.optimizer,
            shuffle: t.shuffle,
        }
    }

    pub fn kernel(&self, regime: Regime) -> &GaussianKernelSpec {
        match regime {
            Regime::Pre => &self.kernels.pre,
            Regime::Post => &self.kernels.post,
        }
    }
}
