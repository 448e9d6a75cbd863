use std::path::Path;

use ndarray::Array2;

use crate::io_util::{read_file, write_atomic, BinReader, BinWriter};
use crate::mesh::Mesh;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HGTX";
pub const VERSION: u32 = 1;

/// Per-vertex RGB colours in `[0, 1]` bound to a mesh's operator cache key.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedSample {
    pub mesh_id: [u8; 32],
    /// `n × 3`.
    pub colors: Array2<f64>,
    pub source_id: String,
}

impl TexturedSample {
    pub fn new(mesh_id: [u8; 32], colors: Array2<f64>, source_id: String) -> Result<Self> {
        if colors.ncols() != 3 {
            return Err(Error::Shape(format!("colour field with {} channels", colors.ncols())));
        }
        if let Some(((i, _), _)) = colors.indexed_iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Vertex {
                vertex: i,
                reason: "colour outside [0, 1]".into(),
            });
        }
        Ok(Self {
            mesh_id,
            colors,
            source_id,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.colors.nrows()
    }
}

/// Area-weighted average of incident face colours per vertex.
pub fn atlas_to_vertices(
    face_colors: &[[f64; 3]],
    mesh: &Mesh,
    mesh_id: [u8; 32],
    source_id: impl Into<String>,
) -> Result<TexturedSample> {
    if face_colors.len() != mesh.n_faces() {
        return Err(Error::Shape(format!(
            "{} face colours for {} faces",
            face_colors.len(),
            mesh.n_faces()
        )));
    }
    let n = mesh.n_vertices();
    // Averages are accumulated as offsets from one incident face's colour,
    // so uniformly coloured neighbourhoods come out exactly.
    let mut anchor: Vec<Option<[f64; 3]>> = vec![None; n];
    let mut acc = Array2::<f64>::zeros((n, 3));
    let mut weight = vec![0.0; n];
    let mut plain = Array2::<f64>::zeros((n, 3));
    let mut touching = vec![0usize; n];
    for ((f, &area), c) in mesh.faces().iter().zip(mesh.face_areas()).zip(face_colors) {
        for &v in f {
            let a = *anchor[v].get_or_insert(*c);
            touching[v] += 1;
            weight[v] += area;
            for k in 0..3 {
                acc[[v, k]] += area * (c[k] - a[k]);
                plain[[v, k]] += c[k] - a[k];
            }
        }
    }
    for v in 0..n {
        let Some(a) = anchor[v] else {
            return Err(Error::Vertex {
                vertex: v,
                reason: "no incident faces to take a colour from".into(),
            });
        };
        for k in 0..3 {
            // Only degenerate faces touching a vertex: unweighted mean.
            let offset = if weight[v] > 0.0 {
                acc[[v, k]] / weight[v]
            } else {
                plain[[v, k]] / touching[v] as f64
            };
            acc[[v, k]] = (a[k] + offset).clamp(0.0, 1.0);
        }
    }
    TexturedSample::new(mesh_id, acc, source_id.into())
}

pub fn encode_sample(sample: &TexturedSample) -> Vec<u8> {
    let mut w = BinWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.bytes(&sample.mesh_id);
    w.u32(sample.n_vertices() as u32);
    for &v in sample.colors.iter() {
        w.f32(v as f32);
    }
    w.string(&sample.source_id);
    w.buf
}

pub fn decode_sample(data: &[u8], path: &Path) -> Result<TexturedSample> {
    let mut r = BinReader::new(data, path);
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.error(format!("unsupported sample version {version}")));
    }
    let mesh_id = r.hash()?;
    let n = r.u32()? as usize;
    if n.saturating_mul(12) > r.remaining() {
        return Err(r.error(format!("truncated colour block for {n} vertices")));
    }
    let mut colors = Array2::zeros((n, 3));
    for v in colors.iter_mut() {
        *v = r.f32()? as f64;
    }
    let source_id = r.string()?;
    r.finish()?;
    TexturedSample::new(mesh_id, colors, source_id).map_err(|e| r.error(e.to_string()))
}

pub fn write_sample(path: &Path, sample: &TexturedSample) -> Result<()> {
    write_atomic(path, &encode_sample(sample))
}

pub fn read_sample(path: &Path) -> Result<TexturedSample> {
    decode_sample(&read_file(path)?, path)
}

/// One source id per line, in file order. Blank lines are skipped.
pub fn read_split(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn write_split(path: &Path, ids: &[String]) -> Result<()> {
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Train and test ids from a partition file of `<id> <label>` lines
/// (label 0 = train, 1 = validation, 2 = test), in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

pub fn read_partition_file(path: &Path) -> Result<Partition> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut p = Partition::default();
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let (Some(id), Some(label)) = (parts.next(), parts.next()) else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected `<id> <partition>`".into(),
            });
        };
        let list = match label {
            "0" => &mut p.train,
            "1" => &mut p.validation,
            "2" => &mut p.test,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("unknown partition label {other:?}"),
                })
            }
        };
        list.push(id.to_string());
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    #[test]
    fn two_face_weighted_vertex() {
        // Vertex 0 is shared by a face of area 1 and one of area 3.
        let mesh = Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 2.0, 0.0],
                [-3.0, 0.0, 0.0],
                [0.0, -2.0, 0.0],
            ],
            vec![[0, 1, 2], [0, 3, 4]],
        )
        .unwrap();
        assert_eq!(mesh.face_areas(), &[1.0, 3.0]);
        let s = atlas_to_vertices(&[[0.0; 3], [1.0; 3]], &mesh, [0; 32], "x").unwrap();
        assert!((s.colors[[0, 0]] - 0.75).abs() < 1e-15);
        assert_eq!(s.colors[[1, 1]], 0.0);
        assert_eq!(s.colors[[3, 2]], 1.0);
    }

    #[test]
    fn sample_round_trip_and_partition() {
        let colors = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 / 16.0);
        let s = TexturedSample::new([7; 32], colors, "img_001.png".into()).unwrap();
        let bytes = encode_sample(&s);
        assert_eq!(decode_sample(&bytes, Path::new("m")).unwrap(), s);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("parts.txt");
        std::fs::write(&path, "a.jpg 0\nb.jpg 2\n\nc.jpg 1\nd.jpg 0\n").unwrap();
        let p = read_partition_file(&path).unwrap();
        assert_eq!(p.train, vec!["a.jpg", "d.jpg"]);
        assert_eq!(p.test, vec!["b.jpg"]);
        assert_eq!(p.validation, vec!["c.jpg"]);
    }
}
