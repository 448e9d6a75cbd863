//! Library side of the `heatgen` command line: run configuration and one
//! function per subcommand. `main.rs` only parses arguments and maps errors
//! to exit codes.

pub mod bake;
pub mod config;
pub mod evaluate;
pub mod export;
pub mod precompute;
pub mod sample;
pub mod train;

use std::path::{Path, PathBuf};

use heatgen::error::ErrorCategory;
use heatgen::io_util::hex;
use heatgen::spectral::read_cache;
use heatgen::SpectralOperators;

pub use config::RunConfig;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HEATGEN_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] heatgen::Error),

    #[error("{}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error("{failed} of {total} items failed")]
    Partial {
        failed: usize,
        total: usize,
        category: ErrorCategory,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Config { .. } | CliError::Usage(_) => ErrorCategory::Usage,
            CliError::Partial { category, .. } => *category,
        }
    }

    /// Process exit code: 2 usage, 3 IO, 4 bad input data, 5 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Usage => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Input => 4,
            ErrorCategory::Numerical => 5,
        }
    }
}

/// Sizes the global worker pool. `--deterministic` pins it to one thread;
/// otherwise [`THREADS_ENV`] is honoured when set.
pub fn configure_threads(deterministic: bool) -> CliResult<()> {
    let threads = if deterministic {
        Some(1)
    } else {
        match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        // A pool may already exist when called twice in one process (tests).
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialised");
        }
    }
    Ok(())
}

/// Location of the operator cache for a mesh id.
pub fn cache_path(cache_dir: &Path, key: &[u8; 32]) -> PathBuf {
    cache_dir.join(format!("{}.hgop", hex(key)))
}

/// Loads cached operators for `key`, checking that the file really holds them.
pub fn load_cached_operators(cache_dir: &Path, key: &[u8; 32]) -> CliResult<SpectralOperators> {
    let path = cache_path(cache_dir, key);
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "no operator cache for mesh {} in {} (run `heatgen precompute` with the same --k first)",
            hex(key),
            cache_dir.display()
        )));
    }
    let ops = read_cache(&path)?;
    if &ops.key != key {
        return Err(heatgen::Error::Format {
            path,
            msg: format!("holds operators for mesh {}", ops.key_hex()),
        }
        .into());
    }
    Ok(ops)
}

/// Files in `dir` with the given extension, sorted by name.
pub fn list_files(dir: &Path, extensions: &[&str]) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| heatgen::Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| heatgen::Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        if path.is_file() && extensions.contains(&ext.as_str()) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
