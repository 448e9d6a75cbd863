use std::path::{Path, PathBuf};

use heatgen::data::shapenet::{find_shapes, load_colored_obj};
use heatgen::data::{atlas_to_vertices, bake_image_to_vertices, load_image, read_uv_file, write_sample, write_split};
use heatgen::mesh::{load_mesh, write_ply};
use heatgen::spectral::operator_cache_key;

use crate::{list_files, CliError, CliResult};

/// Name of the id list written next to the baked samples.
pub const INDEX_FILE: &str = "samples.txt";

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Bakes every PNG/JPEG in `images` onto `mesh` through per-vertex `uv`
/// coordinates. Samples are bound to the mesh's operators for eigenbasis
/// size `k`. Returns the written sample paths.
pub fn bake_images(images: &Path, uv: &Path, mesh_path: &Path, k: usize, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mesh = load_mesh(mesh_path)?;
    let uv = read_uv_file(uv)?;
    let key = operator_cache_key(&mesh, k);
    let files = list_files(images, &["png", "jpg", "jpeg"])?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no PNG or JPEG images in {}", images.display())));
    }
    let mut written = Vec::with_capacity(files.len());
    let mut ids = Vec::with_capacity(files.len());
    for file in &files {
        let id = stem(file);
        let image = load_image(file)?;
        let sample = bake_image_to_vertices(&image, &uv, &mesh, key, id.clone()).map_err(|e| match e {
            heatgen::Error::InvalidArgument(msg) => heatgen::Error::Format {
                path: file.clone(),
                msg,
            },
            other => other,
        })?;
        let path = out.join(format!("{id}.hgtx"));
        write_sample(&path, &sample)?;
        written.push(path);
        ids.push(id);
    }
    write_split(&out.join(INDEX_FILE), &ids)?;
    log::info!("baked {} images onto {}", written.len(), mesh_path.display());
    Ok(written)
}

/// Bakes per-face material colours of a ShapeNet category. Every shape gets
/// its own mesh, written as `<out>/meshes/<id>.ply` for `heatgen precompute`.
/// Shapes that fail to load are skipped with a warning.
pub fn bake_shapenet(root: &Path, category: &str, k: usize, limit: Option<usize>, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut shapes = find_shapes(root, category)?;
    if let Some(n) = limit {
        shapes.truncate(n);
    }
    if shapes.is_empty() {
        return Err(CliError::Usage(format!("no {category} shapes under {}", root.display())));
    }
    let mut written = Vec::new();
    let mut ids = Vec::new();
    let mut skipped = 0usize;
    for (id, obj) in &shapes {
        let result = load_colored_obj(obj).and_then(|shape| {
            let key = operator_cache_key(&shape.mesh, k);
            let sample = atlas_to_vertices(&shape.face_colors, &shape.mesh, key, id.clone())?;
            write_ply(&out.join("meshes").join(format!("{id}.ply")), &shape.mesh, None)?;
            let path = out.join(format!("{id}.hgtx"));
            write_sample(&path, &sample)?;
            Ok(path)
        });
        match result {
            Ok(path) => {
                written.push(path);
                ids.push(id.clone());
            }
            Err(e) => {
                skipped += 1;
                log::warn!("skipping shape {id}: {e}");
            }
        }
    }
    if written.is_empty() {
        return Err(CliError::Partial {
            failed: skipped,
            total: shapes.len(),
            category: heatgen::error::ErrorCategory::Input,
        });
    }
    write_split(&out.join(INDEX_FILE), &ids)?;
    log::info!("baked {} {category} shapes ({skipped} skipped)", written.len());
    Ok(written)
}
