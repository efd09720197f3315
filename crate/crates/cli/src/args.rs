//! Command-line surface: one binary, seven subcommands, reproducible
//! seeding, documented artifact files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "graphldp",
    version,
    about = "Samplers, neighborhood statistics, entropies, tree extension, \
             mark discretization and tilted diffusions for sparse marked graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one marked random graph and write it as graph JSON.
    Gen(GenArgs),
    /// Empirical depth-h neighborhood distribution of a graph.
    Empirical(EmpiricalArgs),
    /// Truncated-entropy report (and optionally a rate function) of a seed.
    Entropy(EntropyArgs),
    /// Sample extension trees of a seed, one JSON tree per line.
    Ugwt(UgwtArgs),
    /// Project marks onto a finite alphabet with a certified bound report.
    Project(ProjectArgs),
    /// Simulate interacting diffusions and report the exponential tilt.
    Diffuse(DiffuseArgs),
    /// Run the exact-arithmetic identity suite and report discrepancies.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Each vertex pair joined independently with probability d/n.
    Er,
    /// Uniform skeleton with exactly m edges.
    Uniform,
    /// Uniform over the graphs with exact count vectors.
    Da,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Number of vertices.
    #[arg(long)]
    pub n: usize,
    /// Mean degree (er model).
    #[arg(long)]
    pub d: Option<f64>,
    /// Exact edge count (uniform model).
    #[arg(long)]
    pub m: Option<usize>,
    /// Mark law file: JSON {"nu": [...], "chi": [[...], ...]}.
    /// Default: single vertex and edge mark.
    #[arg(long)]
    pub marks: Option<PathBuf>,
    /// Count-vector file (da model):
    /// JSON {"u": [...], "m": [[x, x', count], ...], "xi_size": k}.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmpiricalArgs {
    /// Input graph JSON.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Neighborhood depth h.
    #[arg(long)]
    pub depth: u32,
    /// Output measure JSON (codes as hex, weights as "k/n" and floats).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateModel {
    Da,
    Uniform,
    Er,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    /// Seed: a seed JSON file, or inline
    /// "pstar:<nu>;<chi rows '|'-separated>;<d>", e.g.
    /// "pstar:0.5,0.5;1.0;2.0".
    #[arg(long)]
    pub seed: String,
    /// Truncation depth h of the entropy functional.
    #[arg(long)]
    pub depth: u32,
    /// Also evaluate this rate function at the seed.
    #[arg(long, value_enum)]
    pub model: Option<RateModel>,
    /// Reference mean degree (uniform/er rates with an explicit seed).
    #[arg(long)]
    pub d: Option<f64>,
    /// Reference mark law file (uniform/er rates with an explicit seed).
    #[arg(long)]
    pub marks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct UgwtArgs {
    /// Seed: a seed JSON file or inline "pstar:..." (see entropy --help).
    #[arg(long)]
    pub seed: String,
    /// Expected seed depth; rejected if the seed disagrees.
    #[arg(long)]
    pub h: Option<u32>,
    /// Depth to extend each sampled tree to.
    #[arg(long)]
    pub cutoff: u32,
    /// Number of trees.
    #[arg(long)]
    pub samples: u64,
    /// RNG seed; sample i uses the labeled substream ("tree", i).
    #[arg(long)]
    pub seed_rng: u64,
    /// Output JSONL, one rooted tree per line in graph JSON with "root".
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Input graph JSON.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Mark-resolution target; cells have diameter at most epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Mass allowed outside the covered region (law-based partitions).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Schedule preset k: epsilon = 1/(2k), delta = exp(-k^2).
    #[arg(long)]
    pub k: Option<u32>,
    /// Neighborhood depth of the certified bound.
    #[arg(long, default_value_t = 1)]
    pub h: u32,
    /// Ball-size cap S of the certified bound.
    #[arg(long, default_value_t = 100)]
    pub cap: usize,
    /// Output graph JSON with projected marks.
    #[arg(long)]
    pub out: PathBuf,
    /// Output bound report JSON.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    /// Network JSON: {"graph": <graph JSON>, "x0": [...]}.
    #[arg(long)]
    pub net: PathBuf,
    /// Potential preset: "kuramoto", "kuramoto:<scale>" or "zero".
    #[arg(long)]
    pub preset: Option<String>,
    /// Potential spec file: JSON {"kind": "kuramoto"|"zero", "scale": s}.
    #[arg(long)]
    pub potentials: Option<PathBuf>,
    /// Time horizon.
    #[arg(long = "T")]
    pub t_final: f64,
    /// Euler step.
    #[arg(long)]
    pub dt: f64,
    /// Noise coefficient, must be positive.
    #[arg(long)]
    pub sigma: f64,
    /// Monte Carlo samples of the tilt weight (at least 2).
    #[arg(long)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    /// Output path bundle (binary); the tilt report goes to
    /// <out with extension "tilt.json">.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Also write the report here (it always goes to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Draws per sampler frequency test.
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
}
