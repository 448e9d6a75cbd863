use std::path::{Path, PathBuf};

use heatgen::data::{write_sample, TexturedSample};
use heatgen::diffusion::{ancestral_sample, denormalize_colors, element_rng};
use heatgen::mesh::load_mesh;
use heatgen::net::read_checkpoint;
use heatgen::spectral::{operator_cache_key, write_cache, EigenOptions};
use heatgen::SpectralOperators;
use rand::RngCore;
use rayon::prelude::*;

use crate::train::checkpoint_schedule;
use crate::{cache_path, load_cached_operators, CliResult};

/// Operators for `mesh_path` at eigenbasis size `k`: read from `cache_dir`
/// when present there, otherwise built (and stored when a cache dir is given).
pub fn operators_for_mesh(mesh_path: &Path, k: usize, cache_dir: Option<&Path>) -> CliResult<SpectralOperators> {
    let mesh = load_mesh(mesh_path)?;
    let key = operator_cache_key(&mesh, k);
    if let Some(dir) = cache_dir {
        if cache_path(dir, &key).is_file() {
            return load_cached_operators(dir, &key);
        }
    }
    log::info!("building operators for {} (k = {k})", mesh_path.display());
    let ops = SpectralOperators::build(&mesh, k, &EigenOptions::default())?;
    if let Some(dir) = cache_dir {
        write_cache(&cache_path(dir, &key), &ops)?;
    }
    Ok(ops)
}

/// Seed of the `index`-th sample of a run seeded with `seed`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    element_rng(seed, u64::MAX, index).next_u64()
}

/// Draws `count` fields on the mesh and writes them as
/// `<out>/sample_<index>.hgtx`, with colours clamped to `[0, 1]`.
pub fn sample(
    checkpoint: &Path,
    mesh_path: &Path,
    cache_dir: Option<&Path>,
    count: usize,
    seed: u64,
    out: &Path,
) -> CliResult<Vec<PathBuf>> {
    let ckpt = read_checkpoint(checkpoint)?;
    let sched = checkpoint_schedule(&ckpt.metadata)?;
    let ops = operators_for_mesh(mesh_path, ckpt.params.config.k, cache_dir)?;
    let channels = ckpt.params.config.c_in;
    let fields = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = sample_seed(seed, i as u64);
            let f = ancestral_sample(&ckpt.params, &ops, &sched, channels, s)?;
            Ok((i, s, denormalize_colors(f.view()).mapv(|v| v.clamp(0.0, 1.0))))
        })
        .collect::<heatgen::Result<Vec<_>>>()?;
    let mut written = Vec::with_capacity(count);
    for (i, s, colors) in fields {
        let sample = TexturedSample::new(ops.key, colors, format!("sample {i} seed {s}"))?;
        let path = out.join(format!("sample_{i:04}.hgtx"));
        write_sample(&path, &sample)?;
        written.push(path);
    }
    log::info!("wrote {count} samples to {}", out.display());
    Ok(written)
}
