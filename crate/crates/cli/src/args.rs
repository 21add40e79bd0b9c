//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mva_core::sim::{Density, MissingModality, ScenarioSpec};

use crate::eval::Method;

#[derive(Debug, Parser)]
#[command(name = "mva", version, about = "Associate vessel trajectories across a broadcast sensor and a camera")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario directory.
    Simulate(SimulateArgs),
    /// Train the association network on scenario directories.
    Train(TrainArgs),
    /// Match the targets of a scenario window by window.
    Associate(AssociateArgs),
    /// Evaluate methods over a grid of densities, deletions and seeds.
    Sweep(SweepArgs),
    /// Train and compare the TGA-only, STA-only and full networks.
    Ablate(AblateArgs),
    /// Render charts and a summary from result files.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityArg {
    Low,
    Moderate,
    High,
}

impl From<DensityArg> for Density {
    fn from(d: DensityArg) -> Self {
        match d {
            DensityArg::Low => Density::Low,
            DensityArg::Moderate => Density::Moderate,
            DensityArg::High => Density::High,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    A,
    B,
    Either,
}

impl From<ModalityArg> for MissingModality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::A => MissingModality::A,
            ModalityArg::B => MissingModality::B,
            ModalityArg::Either => MissingModality::Either,
        }
    }
}

/// Scene overrides shared by `simulate` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct SceneFlags {
    /// Remove all noise, dropout and occlusion and use an identity camera.
    #[arg(long)]
    pub noiseless: bool,
    /// Std of the constant per-track camera offset, in pixels [default: 0].
    #[arg(long)]
    pub track_bias: Option<f64>,
    /// Std of the per-frame camera noise, in pixels [default: 0.003].
    #[arg(long)]
    pub pixel_noise: Option<f64>,
    /// Per-sample dropout probability of the broadcast sensor [default: 0.05].
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Scene length in seconds [default: 600].
    #[arg(long)]
    pub duration: Option<i64>,
    /// Modality losing whole tracks.
    #[arg(long, value_enum, default_value = "a")]
    pub missing_modality: ModalityArg,
}

impl SceneFlags {
    pub fn apply(&self, mut spec: ScenarioSpec) -> ScenarioSpec {
        if self.noiseless {
            spec = spec.noiseless();
        }
        if let Some(v) = self.track_bias {
            spec.track_bias_std = v;
        }
        if let Some(v) = self.pixel_noise {
            spec.pixel_noise_std = v;
        }
        if let Some(v) = self.dropout {
            spec.ais_dropout_p = v;
        }
        if let Some(v) = self.duration {
            spec.duration = v;
        }
        spec.missing_modality = self.missing_modality.into();
        spec
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Vessel density preset.
    #[arg(long, value_enum, default_value = "low")]
    pub preset: DensityArg,
    /// Full scenario spec as JSON; replaces the preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Whole tracks removed from one modality.
    #[arg(long, default_value_t = 0)]
    pub missing: usize,
    #[command(flatten)]
    pub scene: SceneFlags,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Model and optimization overrides; unset flags keep the config values.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training epochs [default: 100].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.0001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Seed of initialization, split and shuffling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Window length in timesteps [default: 6].
    #[arg(long)]
    pub k: Option<usize>,
    /// Training window stride in timesteps [default: 1].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Feature dimension [default: 64].
    #[arg(long)]
    pub d: Option<usize>,
    /// Attention heads [default: 4].
    #[arg(long)]
    pub heads: Option<usize>,
    /// TGA layers [default: 2].
    #[arg(long)]
    pub tga_layers: Option<usize>,
    /// Spatial neighbors per node [default: 8].
    #[arg(long)]
    pub spatial_k: Option<usize>,
    /// Matching loss weight [default: 1.0].
    #[arg(long)]
    pub gamma1: Option<f64>,
    /// Contrastive loss weight [default: 0.5].
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Contrastive margin [default: 0.2].
    #[arg(long)]
    pub margin: Option<f64>,
    /// Fixed matching threshold instead of the validated one.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Disable the TGA layers.
    #[arg(long)]
    pub no_tga: bool,
    /// Disable the STA block.
    #[arg(long)]
    pub no_sta: bool,
    /// Restrict temporal edges to the same target.
    #[arg(long)]
    pub same_target_only: bool,
    /// Use additive tanh scoring in spatial attention.
    #[arg(long)]
    pub additive_spatial: bool,
    /// Use the `m + S_ij - S_ie` hinge instead of `m - S_ij + S_ie`.
    #[arg(long)]
    pub literal_contrastive: bool,
    /// Spline-resample tracks onto the grid instead of snapping.
    #[arg(long)]
    pub resample: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training scenario directories.
    #[arg(long = "scenario", num_args = 1..)]
    pub scenarios: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Output directory for the checkpoint, history and effective config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssociateArgs {
    /// Checkpoint written by `train` (required for gmva).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Single window index.
    #[arg(long, conflicts_with = "all")]
    pub window: Option<usize>,
    /// Every window (the default).
    #[arg(long)]
    pub all: bool,
    #[arg(long, default_value = "gmva")]
    pub method: Method,
    /// Matching threshold [default: from the checkpoint].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Window length; must agree with the checkpoint [default: 6].
    #[arg(long)]
    pub k: Option<usize>,
    /// Window stride [default: the window length].
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Checkpoint written by `train` (required for gmva).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "low,moderate,high")]
    pub densities: Vec<DensityArg>,
    /// Deletion counts.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub missing: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "gmva,ed,cd,dtw,pdf")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub scene: SceneFlags,
    /// Matching threshold [default: from the checkpoint].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Record wall-clock seconds per cell in results.csv.
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    TgaOnly,
    StaOnly,
    Full,
    None,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training scenario directories.
    #[arg(long = "scenario", num_args = 1..)]
    pub scenarios: Vec<PathBuf>,
    /// Evaluation scenario directories.
    #[arg(long = "eval", num_args = 1.., required = true)]
    pub eval: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tga-only,sta-only,full")]
    pub variants: Vec<Variant>,
    /// Training seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results CSV from `sweep`.
    #[arg(long)]
    pub results: PathBuf,
    /// Training history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
