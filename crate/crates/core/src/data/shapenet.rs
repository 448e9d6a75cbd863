//! ShapeNetCore-style textured OBJ shapes.
//!
//! Each polygon's colour comes from its material: the diffuse texture
//! sampled at the triangle's centroid texture coordinate when the material
//! has a `map_Kd` and the face has texture coordinates, else the `Kd`
//! colour. Vertex colours then follow by area interpolation.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{load_image, RgbImage};
use crate::mesh::io::read_obj;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Colour used for faces without any material information.
pub const DEFAULT_FACE_COLOR: [f64; 3] = [0.5, 0.5, 0.5];

/// WordNet synset ids of a few ShapeNetCore categories.
pub fn synset_for_category(name: &str) -> Option<&'static str> {
    Some(match name.to_ascii_lowercase().as_str() {
        "chair" => "03001627",
        "table" => "04379243",
        "airplane" | "aeroplane" => "02691156",
        "car" => "02958343",
        "sofa" => "04256520",
        "lamp" => "03636649",
        "bench" => "02828884",
        "cabinet" => "02933112",
        "piano" => "03928116",
        "faucet" => "03325088",
        "train" => "04468005",
        _ => return None,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Material {
    pub diffuse: Option<[f64; 3]>,
    pub diffuse_map: Option<PathBuf>,
}

/// Parses `newmtl`, `Kd` and `map_Kd` records; everything else is ignored.
/// Texture paths are resolved against `base`.
pub fn parse_mtl(text: &str, path: &Path, base: &Path) -> Result<HashMap<String, Material>> {
    let mut out = HashMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else { continue };
        match key {
            "newmtl" => {
                let name = parts.collect::<Vec<_>>().join(" ");
                out.insert(name.clone(), Material::default());
                current = Some(name);
            }
            "Kd" | "map_Kd" => {
                let Some(name) = &current else {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        msg: format!("`{key}` before any `newmtl`"),
                    });
                };
                let mat = out.get_mut(name).expect("inserted on newmtl");
                if key == "Kd" {
                    let vals: Vec<f64> = parts
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::Parse {
                            path: path.to_path_buf(),
                            line: i + 1,
                            msg: format!("bad Kd value: {e}"),
                        })?;
                    if vals.len() < 3 {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: i + 1,
                            msg: "Kd needs three components".into(),
                        });
                    }
                    mat.diffuse = Some([vals[0], vals[1], vals[2]].map(|v| v.clamp(0.0, 1.0)));
                } else {
                    // Options such as `-s 1 1 1` may precede the file name.
                    if let Some(file) = line.split_whitespace().last().filter(|f| *f != "map_Kd") {
                        mat.diffuse_map = Some(base.join(file));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// A cleaned mesh with one colour per triangle.
#[derive(Debug, Clone)]
pub struct ColoredShape {
    pub mesh: Mesh,
    pub face_colors: Vec<[f64; 3]>,
}

/// Loads a textured OBJ. Triangles that repeat a vertex are dropped and
/// unreferenced vertices removed, so the resulting mesh may be a
/// renumbered subset of the file's vertices.
pub fn load_colored_obj(path: &Path) -> Result<ColoredShape> {
    let obj = read_obj(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut materials = HashMap::new();
    for lib in &obj.material_libs {
        let lib_path = base.join(lib);
        match std::fs::read_to_string(&lib_path) {
            Ok(text) => materials.extend(parse_mtl(&text, &lib_path, lib_path.parent().unwrap_or(base))?),
            Err(e) => log::warn!("{}: material library unavailable ({e})", lib_path.display()),
        }
    }
    let mut textures: HashMap<PathBuf, Option<RgbImage>> = HashMap::new();
    let (tris, source) = obj.triangles_with_source(path)?;

    let mut faces = Vec::with_capacity(tris.len());
    let mut colors = Vec::with_capacity(tris.len());
    let mut dropped = 0usize;
    for (tri_index, (tri, &poly)) in tris.iter().zip(&source).enumerate() {
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            dropped += 1;
            continue;
        }
        let face = &obj.faces[poly];
        // Position of this triangle's corners within the polygon (fan order).
        let first = source.iter().position(|&p| p == poly).expect("own polygon");
        let k = tri_index - first + 1;
        let corners = [0, k, k + 1];
        let mat = face.material.as_ref().and_then(|m| materials.get(m));
        let mut color = mat.and_then(|m| m.diffuse).unwrap_or(DEFAULT_FACE_COLOR);
        if let Some(map) = mat.and_then(|m| m.diffuse_map.as_ref()) {
            let uvs: Option<Vec<[f64; 2]>> = corners
                .iter()
                .map(|&c| face.texcoords.get(c).copied().flatten().map(|t| obj.texcoords[t]))
                .collect();
            let tex = textures.entry(map.clone()).or_insert_with(|| match load_image(map) {
                Ok(img) => Some(img),
                Err(e) => {
                    log::warn!("texture unavailable: {e}");
                    None
                }
            });
            if let (Some(img), Some(uvs)) = (tex.as_ref(), uvs) {
                let u = (uvs[0][0] + uvs[1][0] + uvs[2][0]) / 3.0;
                let v = (uvs[0][1] + uvs[1][1] + uvs[2][1]) / 3.0;
                // Texture coordinates wrap in most exporters.
                color = img.sample_uv(u.rem_euclid(1.0), v.rem_euclid(1.0));
            }
        }
        faces.push(*tri);
        colors.push(color);
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} triangles with repeated vertices", path.display());
    }
    let mut remap = vec![usize::MAX; obj.positions.len()];
    let mut vertices = Vec::new();
    for f in &mut faces {
        for v in f.iter_mut() {
            if remap[*v] == usize::MAX {
                remap[*v] = vertices.len();
                vertices.push(obj.positions[*v]);
            }
            *v = remap[*v];
        }
    }
    let mesh = Mesh::new(vertices, faces)?;
    Ok(ColoredShape {
        mesh,
        face_colors: colors,
    })
}

/// Shapes of one category under a ShapeNetCore root, sorted by model id.
/// Both `<synset>/<id>/models/model_normalized.obj` and `<synset>/<id>/model.obj`
/// layouts are recognised. `category` may be a name or a synset id.
pub fn find_shapes(root: &Path, category: &str) -> Result<Vec<(String, PathBuf)>> {
    let synset = synset_for_category(category).unwrap_or(category);
    let dir = root.join(synset);
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        let model_dir = entry.path();
        if !model_dir.is_dir() {
            continue;
        }
        let id = entry.file_name().to_string_lossy().into_owned();
        for candidate in ["models/model_normalized.obj", "model.obj"] {
            let p = model_dir.join(candidate);
            if p.is_file() {
                out.push((id.clone(), p));
                break;
            }
        }
    }
    out.sort();
    Ok(out)
}
