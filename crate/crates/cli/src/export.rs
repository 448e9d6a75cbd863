use std::path::Path;

use heatgen::data::read_sample;
use heatgen::mesh::{load_mesh, write_ply};
use ndarray::ArrayView2;

use crate::{CliError, CliResult};

/// `round(clamp(c, 0, 1) · 255)` per channel.
pub fn quantize_colors(colors: ArrayView2<f64>) -> Vec<[u8; 3]> {
    colors
        .rows()
        .into_iter()
        .map(|row| {
            let q = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
            [q(row[0]), q(row[1]), q(row[2])]
        })
        .collect()
}

/// Writes the mesh with the field's colours as a vertex-coloured PLY.
pub fn export(field: &Path, mesh_path: &Path, out: &Path) -> CliResult<()> {
    let sample = read_sample(field)?;
    let mesh = load_mesh(mesh_path)?;
    if sample.colors.ncols() != 3 {
        return Err(CliError::Usage(format!(
            "{} has {} channels; export needs RGB",
            field.display(),
            sample.colors.ncols()
        )));
    }
    if sample.n_vertices() != mesh.n_vertices() {
        return Err(CliError::Usage(format!(
            "{} has {} vertices but {} has {}",
            field.display(),
            sample.n_vertices(),
            mesh_path.display(),
            mesh.n_vertices()
        )));
    }
    write_ply(out, &mesh, Some(&quantize_colors(sample.colors.view())))?;
    Ok(())
}
