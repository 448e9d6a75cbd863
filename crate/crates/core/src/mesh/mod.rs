//! Triangle meshes: validation, adjacency, areas, normals and tangent frames.

pub mod io;
pub mod primitives;
pub mod vec3;

use std::collections::HashMap;

use sha2::{Digest, Sha256};

pub use io::{load_mesh, write_obj, write_ply};
use vec3::{cross, dot, norm, normalize, scale, sub, Vec3};

use crate::{Error, Result};

/// An indexed triangle mesh `(V, F)` with derived one-ring adjacency and
/// face areas. Immutable once built.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    adjacency: Vec<Vec<usize>>,
    face_areas: Vec<f64>,
    non_manifold_edges: usize,
}

impl Mesh {
    /// Validates indices and builds adjacency. Non-manifold edges are counted
    /// and logged but kept.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {v}, but the mesh has {n} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        if let Some((i, _)) = vertices
            .iter()
            .enumerate()
            .find(|(_, p)| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidMesh(format!("vertex {i} has a non-finite coordinate")));
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut edge_faces: HashMap<(usize, usize), u32> = HashMap::with_capacity(faces.len() * 3 / 2);
        for f in &faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                adjacency[a].push(b);
                adjacency[b].push(a);
                *edge_faces.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        let non_manifold_edges = edge_faces.values().filter(|&&c| c > 2).count();
        if non_manifold_edges > 0 {
            log::warn!("mesh has {non_manifold_edges} non-manifold edges (more than two incident faces)");
        }

        let face_areas = faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| vertices[i]);
                0.5 * norm(cross(sub(b, a), sub(c, a)))
            })
            .collect();

        Ok(Self {
            vertices,
            faces,
            adjacency,
            face_areas,
            non_manifold_edges,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Sorted one-ring neighbours of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Number of edges shared by more than two faces.
    pub fn non_manifold_edge_count(&self) -> usize {
        self.non_manifold_edges
    }

    /// For every edge `(a, b)` with `a < b`, the number of incident faces.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        counts
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs.iter().filter(|&&j| j > i) {
                total += norm(sub(self.vertices[j], self.vertices[i]));
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                out[v].push(fi);
            }
        }
        out
    }

    /// Applies `map` to every vertex position, keeping connectivity.
    pub fn map_vertices(&self, map: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        Mesh::new(self.vertices.iter().map(|&p| map(p)).collect(), self.faces.clone())
    }

    /// SHA-256 over the little-endian vertex coordinates and face indices.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        for p in &self.vertices {
            for c in p {
                h.update(c.to_le_bytes());
            }
        }
        h.update((self.faces.len() as u64).to_le_bytes());
        for f in &self.faces {
            for &i in f {
                h.update((i as u32).to_le_bytes());
            }
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }
}

/// Area-weighted vertex normals. Zero-area faces contribute nothing; a vertex
/// whose incident faces are all degenerate (or that has none) is an error.
pub fn compute_vertex_normals(mesh: &Mesh) -> Result<Vec<Vec3>> {
    let mut acc = vec![[0.0; 3]; mesh.n_vertices()];
    for f in mesh.faces() {
        let [a, b, c] = f.map(|i| mesh.vertices()[i]);
        // |cross| = 2 * area, so summing raw cross products weights by area.
        let n = cross(sub(b, a), sub(c, a));
        for &v in f {
            acc[v] = vec3::add(acc[v], n);
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = norm(n);
            if len > 0.0 && len.is_finite() {
                Ok(scale(n, 1.0 / len))
            } else {
                Err(Error::Vertex {
                    vertex: i,
                    reason: "no incident face with nonzero area; normal undefined".into(),
                })
            }
        })
        .collect()
}

/// Per-vertex orthonormal right-handed frames `(x, y, n)` with `x × y = n`.
#[derive(Debug, Clone)]
pub struct TangentFrames {
    pub x: Vec<Vec3>,
    pub y: Vec<Vec3>,
    pub n: Vec<Vec3>,
}

impl TangentFrames {
    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }
}

/// Frame convention: `x` is the global x-axis projected onto the tangent
/// plane, or the global y-axis when the normal is within ~8° of x; `y = n × x`.
pub fn compute_tangent_frames(normals: &[Vec3]) -> TangentFrames {
    let mut x = Vec::with_capacity(normals.len());
    let mut y = Vec::with_capacity(normals.len());
    for &n in normals {
        let axis = if dot([1.0, 0.0, 0.0], n).abs() > 0.99 {
            [0.0, 1.0, 0.0]
        } else {
            [1.0, 0.0, 0.0]
        };
        let xi = normalize(sub(axis, scale(n, dot(axis, n))));
        x.push(xi);
        y.push(cross(n, xi));
    }
    TangentFrames {
        x,
        y,
        n: normals.to_vec(),
    }
}
