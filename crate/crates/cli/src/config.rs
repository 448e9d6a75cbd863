use std::path::{Path, PathBuf};

use heatgen::data::DEFAULT_CAPACITY;
use heatgen::diffusion::{DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_LR, DEFAULT_STEPS};
use heatgen::net::{DEFAULT_BLOCKS, DEFAULT_TIME_DIM, DEFAULT_WIDTH};
use heatgen::spectral::DEFAULT_K;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

/// Everything a training run depends on. Written to `<run_dir>/config.toml`
/// before training starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory of baked `.hgtx` samples.
    pub data: PathBuf,
    /// Directory of `.hgop` operator caches.
    pub cache: PathBuf,
    pub run_dir: PathBuf,
    pub k: usize,
    pub blocks: usize,
    pub width: usize,
    pub time_dim: usize,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub max_steps: Option<u64>,
    pub seed: u64,
    /// Largest vertex count a sample may have.
    pub capacity: usize,
    pub precision: Precision,
    pub checkpoint_every: u64,
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            cache: PathBuf::from("cache"),
            run_dir: PathBuf::from("run"),
            k: DEFAULT_K,
            blocks: DEFAULT_BLOCKS,
            width: DEFAULT_WIDTH,
            time_dim: DEFAULT_TIME_DIM,
            diffusion_steps: DEFAULT_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
            lr: DEFAULT_LR,
            batch_size: 8,
            epochs: 96,
            max_steps: None,
            seed: 0,
            capacity: DEFAULT_CAPACITY,
            precision: Precision::F64,
            checkpoint_every: 1000,
            deterministic: false,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub data: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
    pub k: Option<usize>,
    pub blocks: Option<usize>,
    pub width: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub max_steps: Option<u64>,
    pub seed: Option<u64>,
    pub checkpoint_every: Option<u64>,
    pub deterministic: bool,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| heatgen::Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.cache, &mut cfg.run_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { self.$f = v.clone(); } )* };
        }
        set!(data, cache, run_dir, k, blocks, width, lr, batch_size, epochs, seed, checkpoint_every);
        if o.max_steps.is_some() {
            self.max_steps = o.max_steps;
        }
        self.deterministic |= o.deterministic;
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Usage(format!("invalid run config: {msg}")));
        if self.precision == Precision::F32 {
            return bad("precision = \"f32\" is not supported; training runs in f64".into());
        }
        if self.k == 0 || self.blocks == 0 || self.width == 0 || self.time_dim == 0 {
            return bad("k, blocks, width and time_dim must be positive".into());
        }
        if self.time_dim % 2 != 0 {
            return bad(format!("time_dim must be even, got {}", self.time_dim));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.checkpoint_every == 0 {
            return bad("batch_size, epochs and checkpoint_every must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always serializable")
    }
}
