use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "hyptree", version, about = "Embeddings of hyperbolic trees: generation, measurement, certificates")]
pub struct Cli {
    /// Directory receiving the artifacts and the manifest.
    #[arg(long, env = "HYPTREE_OUT_DIR", default_value = "hyptree-out", global = true)]
    pub out_dir: PathBuf,

    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Write a tree description.
    GenTree(GenTreeArgs),
    /// Generate a biorthogonal system or a leveled family and check its invariants.
    GenSystem(GenSystemArgs),
    /// Build an embedding map and check its witness inequalities.
    Embed(EmbedArgs),
    /// Measure the distortion of a stored map.
    Distortion(DistortionArgs),
    /// Modulus of continuity and coarse Lipschitz constants of a stored map.
    CoarseModuli(CoarseArgs),
    /// Banded filtration table and counting sums of a stored map.
    Filtration(FiltrationArgs),
    /// Integer certificate for the counting contradiction.
    Certify(CertifyArgs),
    /// Hamming-cube concentration search on James-type sums.
    Concentration(ConcentrationArgs),
    /// Minimize distortion into a finite-dimensional lp space.
    Optimize(OptimizeArgs),
    /// Best distortion found per tree depth.
    Growth(GrowthArgs),
    /// Re-execute a manifest and compare artifact checksums.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenTree(_) => "gen-tree",
            Command::GenSystem(_) => "gen-system",
            Command::Embed(_) => "embed",
            Command::Distortion(_) => "distortion",
            Command::CoarseModuli(_) => "coarse-moduli",
            Command::Filtration(_) => "filtration",
            Command::Certify(_) => "certify",
            Command::Concentration(_) => "concentration",
            Command::Optimize(_) => "optimize",
            Command::Growth(_) => "growth",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenTreeArgs {
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub branching: u32,
    /// Sign-sequence tree `B_N` instead of `T_N^b`.
    #[arg(long)]
    pub dyadic: bool,
    #[arg(long)]
    pub root_branching: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Single,
    Gluing,
    Segmented,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenSystemArgs {
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub branching: u32,
    #[arg(long, value_enum, default_value_t = FamilyArg::Single)]
    pub family: FamilyArg,
    /// Off-diagonal size for a single perturbed system; canonical when absent.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Highest level of a leveled family; derived from the depth when absent.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub segment_base: usize,
    /// Use exact canonical levels.
    #[arg(long)]
    pub zero_schedule: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionArg {
    L1,
    Dual,
    Glued,
    GluedDual,
    Segmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaArg {
    Delta,
    Zero,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[arg(long, value_enum)]
    pub construction: ConstructionArg,
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub branching: u32,
    /// Perturbation size for `l1` and `dual`; canonical when absent.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub segment_base: usize,
    #[arg(long, value_enum, default_value_t = EtaArg::Delta)]
    pub eta: EtaArg,
    #[arg(long)]
    pub zero_schedule: bool,
    /// Skip the witness checks.
    #[arg(long)]
    pub no_check: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MapInput {
    /// Map CSV written by `embed`.
    #[arg(long)]
    pub map: PathBuf,
    /// Sidecar JSON; defaults to the CSV path with `.sidecar.json`.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DistortionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MapInput,
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CoarseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MapInput,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub t_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub theta_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Truncate,
    Average,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FiltrationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MapInput,
    #[arg(long, default_value_t = 2)]
    pub a: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Truncate)]
    pub mode: ModeArg,
    /// Key level is its length minus this offset (1 for level-tagged keys).
    #[arg(long, default_value_t = 0)]
    pub grading_offset: usize,
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    /// Exponent; `inf` allowed.
    #[arg(long, default_value = "2")]
    pub p: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CertifyArgs {
    #[arg(long = "C")]
    pub c: f64,
    /// Exponent `p > 1`; `inf` allowed.
    #[arg(long)]
    pub p: String,
    /// Override for `a` (decimal integer).
    #[arg(long)]
    pub a: Option<String>,
    /// Override for `m` (decimal integer).
    #[arg(long)]
    pub m: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JamesArg {
    L1,
    Summing,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ConcentrationArgs {
    #[arg(long, value_enum, default_value_t = JamesArg::L1)]
    pub model: JamesArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value = "2")]
    pub p: String,
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 8.0)]
    pub beta0: f64,
    #[arg(long, default_value_t = 200.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    /// Distance table JSON (`labels`, `distances`).
    #[arg(long, conflicts_with_all = ["star", "depth"])]
    pub metric: Option<PathBuf>,
    /// Star with this many leaves.
    #[arg(long, conflicts_with = "depth")]
    pub star: Option<usize>,
    /// Tree `T_N^b`.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub branching: u32,
    #[arg(long, default_value = "2")]
    pub p: String,
    /// Target dimension; the point count when absent.
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GrowthArgs {
    #[arg(long, default_value_t = 2)]
    pub branching: u32,
    #[arg(long, value_delimiter = ',', required = true)]
    pub depths: Vec<usize>,
    #[arg(long, default_value = "2")]
    pub p: String,
    /// Fixed target dimension; the node count of each tree when absent.
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
