use std::path::Path;

use heatgen::data::{read_sample, TexturedSample};
use heatgen::eval::{compute_mmd_cov, time_inference, EvalReport};
use heatgen::io_util::hex;
use heatgen::mesh::load_mesh;
use heatgen::net::read_checkpoint;
use heatgen::spectral::{assemble_cotan_laplacian, operator_cache_key};

use crate::sample::operators_for_mesh;
use crate::train::checkpoint_schedule;
use crate::{list_files, load_cached_operators, CliError, CliResult};

/// Where the vertex areas for the distance come from.
pub enum MassSource<'a> {
    /// Operator cache directory holding the samples' mesh.
    Cache(&'a Path),
    /// The mesh itself, with the eigenbasis size the samples were baked for.
    Mesh { path: &'a Path, k: usize },
}

/// Inference timing request: checkpoint and number of timed samples.
pub struct Timing<'a> {
    pub checkpoint: &'a Path,
    pub repeats: usize,
}

fn read_dir_samples(dir: &Path) -> CliResult<Vec<TexturedSample>> {
    let files = list_files(dir, &["hgtx"])?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .hgtx samples in {}", dir.display())));
    }
    files.iter().map(|f| Ok(read_sample(f)?)).collect()
}

/// MMD and coverage of the generated set against the reference set. Both
/// sets must live on one mesh.
pub fn evaluate(reference: &Path, generated: &Path, mass: MassSource, timing: Option<Timing>) -> CliResult<EvalReport> {
    let refs = read_dir_samples(reference)?;
    let gens = read_dir_samples(generated)?;
    let key = refs[0].mesh_id;
    for (dir, set) in [(reference, &refs), (generated, &gens)] {
        if let Some(s) = set.iter().find(|s| s.mesh_id != key) {
            return Err(CliError::Usage(format!(
                "{}: sample {} is on mesh {}, expected {}; evaluation compares fields on one mesh",
                dir.display(),
                s.source_id,
                hex(&s.mesh_id),
                hex(&key)
            )));
        }
    }
    // Full operators are only needed for timing; distances need just the mass.
    let (mass_vec, ops) = match mass {
        MassSource::Cache(dir) => {
            let ops = load_cached_operators(dir, &key)?;
            (ops.mass.clone(), Some(ops))
        }
        MassSource::Mesh { path, k } => {
            let mesh = load_mesh(path)?;
            if operator_cache_key(&mesh, k) != key {
                return Err(CliError::Usage(format!(
                    "{} (k = {k}) is not the mesh the samples were baked on",
                    path.display()
                )));
            }
            let ops = match timing {
                Some(_) => Some(operators_for_mesh(path, k, None)?),
                None => None,
            };
            (assemble_cotan_laplacian(&mesh)?.mass, ops)
        }
    };
    let rv: Vec<_> = refs.iter().map(|s| s.colors.view()).collect();
    let gv: Vec<_> = gens.iter().map(|s| s.colors.view()).collect();
    let m = compute_mmd_cov(&rv, &gv, &mass_vec)?;
    let median_seconds_per_sample = match (timing, ops) {
        (Some(t), Some(ops)) => {
            let ckpt = read_checkpoint(t.checkpoint)?;
            if ckpt.params.config.k != ops.k() {
                return Err(CliError::Usage(format!(
                    "{} expects k = {}, the samples' operators have k = {}",
                    t.checkpoint.display(),
                    ckpt.params.config.k,
                    ops.k()
                )));
            }
            let sched = checkpoint_schedule(&ckpt.metadata)?;
            Some(time_inference(&ckpt.params, &ops, &sched, ckpt.params.config.c_in, t.repeats)?)
        }
        _ => None,
    };
    Ok(EvalReport {
        mmd: m.mmd,
        cov_percent: m.cov_percent,
        n_reference: refs.len(),
        n_generated: gens.len(),
        median_seconds_per_sample,
    })
}
