//! Run settings assembled from flags, an optional JSON file, and defaults,
//! in that order of precedence.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qsvt_core::maxwell::MaxwellConfig;
use qsvt_core::phasekit::{PhaseInit, TrainConfig};
use qsvt_core::{Error, Result};
use serde::Deserialize;

pub const DEFAULT_DEGREE: usize = 21;
pub const DEFAULT_OUT: &str = "out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    /// Uniform on [0, 1)
    Unit,
    /// Uniform on (-pi, pi]
    Full,
}

impl From<InitArg> for PhaseInit {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Unit => PhaseInit::UnitInterval,
            InitArg::Full => PhaseInit::FullCircle,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Directory for all outputs
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// RNG seed for phase initialization
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with default settings
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Linear-solve backend (operator, statevector, exact, classical)
    #[arg(long, global = true)]
    pub backend: Option<String>,
}

/// Phase-training hyperparameters.
#[derive(Args, Clone, Debug, Default)]
pub struct TrainArgs {
    /// Total polynomial degree, odd and at least 3
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Condition-number window [1/kappa, 1]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Scale of the target s / x
    #[arg(long)]
    pub s: Option<f64>,
    /// Number of training points
    #[arg(long)]
    pub samples: Option<usize>,
    /// Initial phase distribution
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    degree: Option<usize>,
    iters: Option<usize>,
    lr: Option<f64>,
    kappa: Option<f64>,
    s: Option<f64>,
    samples: Option<usize>,
    init: Option<InitArg>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    out: Option<PathBuf>,
    seed: Option<u64>,
    backend: Option<String>,
    schedule: Option<PathBuf>,
    #[serde(default)]
    train: TrainFile,
    maxwell: Option<MaxwellConfig>,
}

/// Fully resolved settings for one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub backend: String,
    pub schedule: Option<PathBuf>,
    pub train: TrainConfig,
    pub maxwell: MaxwellConfig,
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(common: &Common, train: &TrainArgs, schedule_flag: Option<&Path>) -> Result<Self> {
        let file = match &common.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let mut maxwell = file.maxwell.unwrap_or_default();
        let seed = common.seed.or(file.seed).unwrap_or(0);
        let backend = common.backend.clone().or(file.backend).unwrap_or_else(|| maxwell.backend.clone());
        maxwell.backend = backend.clone();

        let degree = train.degree.or(file.train.degree).unwrap_or(DEFAULT_DEGREE);
        let mut tc = TrainConfig::with_degree(degree)?;
        tc.seed = seed;
        if let Some(v) = train.iters.or(file.train.iters) {
            tc.iters = v;
        }
        if let Some(v) = train.lr.or(file.train.lr) {
            tc.lr = v;
        }
        if let Some(v) = train.kappa.or(file.train.kappa) {
            tc.kappa = v;
        }
        if let Some(v) = train.s.or(file.train.s) {
            tc.s = v;
        }
        if let Some(v) = train.samples.or(file.train.samples) {
            tc.samples = v;
        }
        if let Some(v) = train.init.or(file.train.init) {
            tc.init = v.into();
        }
        tc.validate()?;

        let schedule = schedule_flag.map(Path::to_path_buf).or(file.schedule).or(maxwell.schedule_path.clone());
        Ok(RunConfig {
            out: common.out.clone().or(file.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            seed,
            backend,
            schedule,
            train: tc,
            maxwell,
        })
    }
}
