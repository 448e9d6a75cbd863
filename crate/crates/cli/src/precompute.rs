use std::fmt;
use std::path::{Path, PathBuf};

use heatgen::error::ErrorCategory;
use heatgen::mesh::load_mesh;
use heatgen::spectral::{operator_cache_key, read_cache, write_cache, EigenOptions};
use heatgen::SpectralOperators;

use crate::{cache_path, CliError, CliResult};

#[derive(Debug)]
pub enum Status {
    Built(PathBuf),
    Cached(PathBuf),
    Failed(heatgen::Error),
}

#[derive(Debug)]
pub struct Outcome {
    pub mesh: PathBuf,
    pub status: Status,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            Status::Built(p) => write!(f, "{}: wrote {}", self.mesh.display(), p.display()),
            Status::Cached(p) => write!(f, "{}: skipped (cached) {}", self.mesh.display(), p.display()),
            Status::Failed(e) => write!(f, "{}: failed: {e}", self.mesh.display()),
        }
    }
}

fn precompute_one(mesh_path: &Path, k: usize, cache_dir: &Path, opts: &EigenOptions) -> heatgen::Result<Status> {
    let mesh = load_mesh(mesh_path)?;
    let key = operator_cache_key(&mesh, k);
    let path = cache_path(cache_dir, &key);
    if path.is_file() {
        match read_cache(&path) {
            Ok(ops) if ops.key == key => return Ok(Status::Cached(path)),
            Ok(_) => log::warn!("{}: key mismatch, rebuilding", path.display()),
            Err(e) => log::warn!("{e}; rebuilding"),
        }
    }
    let ops = SpectralOperators::build(&mesh, k, opts)?;
    write_cache(&path, &ops)?;
    Ok(Status::Built(path))
}

/// Builds operator caches for every mesh. A failing mesh is reported in its
/// outcome and does not stop the others.
pub fn precompute(meshes: &[PathBuf], k: usize, cache_dir: &Path, opts: &EigenOptions) -> Vec<Outcome> {
    meshes
        .iter()
        .map(|m| {
            let status = precompute_one(m, k, cache_dir, opts).unwrap_or_else(Status::Failed);
            let outcome = Outcome {
                mesh: m.clone(),
                status,
            };
            log::info!("{outcome}");
            outcome
        })
        .collect()
}

/// Turns failed outcomes into a batch error carrying the first failure's category.
pub fn summarize(outcomes: &[Outcome]) -> CliResult<()> {
    let failures: Vec<ErrorCategory> = outcomes
        .iter()
        .filter_map(|o| match &o.status {
            Status::Failed(e) => Some(e.category()),
            _ => None,
        })
        .collect();
    match failures.first() {
        None => Ok(()),
        Some(&category) => Err(CliError::Partial {
            failed: failures.len(),
            total: outcomes.len(),
            category,
        }),
    }
}
