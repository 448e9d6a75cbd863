//! Procedural meshes used for fixtures, smoke runs and scaling experiments.

use std::collections::HashMap;

use super::vec3::{add, normalize, scale, sub, Vec3};
use super::Mesh;

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

fn icosahedron_vertices() -> Vec<Vec3> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
}

/// Geodesic sphere from a frequency-`freq` subdivision of the icosahedron,
/// with `10 freq² + 2` vertices (12, 42, 92, ..., 492 at 7, 100002 at 100).
pub fn icosphere(freq: usize, radius: f64) -> Mesh {
    assert!(freq >= 1, "frequency must be positive");
    let corners = icosahedron_vertices();
    let mut vertices: Vec<Vec3> = corners.clone();
    let mut edge_points: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut faces = Vec::with_capacity(20 * freq * freq);
    let nu = freq;
    let lerp = |a: Vec3, b: Vec3, t: f64| add(a, scale(sub(b, a), t));

    for &[a, b, c] in &ICOSAHEDRON_FACES {
        for (u, v) in [(a, b), (b, c), (a, c)] {
            let key = (u.min(v), u.max(v));
            edge_points.entry(key).or_insert_with(|| {
                (1..nu)
                    .map(|p| {
                        vertices.push(lerp(corners[key.0], corners[key.1], p as f64 / nu as f64));
                        vertices.len() - 1
                    })
                    .collect()
            });
        }
        let on_edge = |u: usize, v: usize, pos: usize| -> usize {
            let pts = &edge_points[&(u.min(v), u.max(v))];
            if u < v {
                pts[pos - 1]
            } else {
                pts[nu - pos - 1]
            }
        };
        let mut interior = HashMap::new();
        let (pa, pb, pc) = (corners[a], corners[b], corners[c]);
        for i in 1..nu {
            for j in 1..nu - i {
                let p = add(
                    pa,
                    add(scale(sub(pb, pa), i as f64 / nu as f64), scale(sub(pc, pa), j as f64 / nu as f64)),
                );
                vertices.push(p);
                interior.insert((i, j), vertices.len() - 1);
            }
        }
        let id = |i: usize, j: usize| -> usize {
            match (i, j) {
                (0, 0) => a,
                (i, 0) if i == nu => b,
                (0, j) if j == nu => c,
                (i, 0) => on_edge(a, b, i),
                (0, j) => on_edge(a, c, j),
                (i, j) if i + j == nu => on_edge(b, c, j),
                _ => interior[&(i, j)],
            }
        };
        for i in 0..nu {
            for j in 0..nu - i {
                faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                if i + j + 1 < nu {
                    faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
    }
    let vertices = vertices.into_iter().map(|p| scale(normalize(p), radius)).collect();
    Mesh::new(vertices, faces).expect("icosphere construction is valid")
}

/// Flat `nx × ny` vertex grid in the z=0 plane with spacing `h`, each cell
/// split along its (0,0)-(1,1) diagonal.
pub fn grid(nx: usize, ny: usize, h: f64) -> Mesh {
    height_field(nx, ny, h, |_, _| 0.0)
}

/// Grid whose vertex heights are `z(x, y)`.
pub fn height_field(nx: usize, ny: usize, h: f64, z: impl Fn(f64, f64) -> f64) -> Mesh {
    assert!(nx >= 2 && ny >= 2);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (i as f64 * h, j as f64 * h);
            vertices.push([x, y, z(x, y)]);
        }
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::new(vertices, faces).expect("grid construction is valid")
}

/// Closed axis-aligned box with `res` subdivisions per edge.
pub fn subdivided_box(min: Vec3, max: Vec3, res: usize) -> Mesh {
    assert!(res >= 1);
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut faces = Vec::new();
    let mut vid = |g: [i64; 3]| -> usize {
        *index.entry(g).or_insert_with(|| {
            let t = g.map(|c| c as f64 / res as f64);
            vertices.push([
                min[0] + (max[0] - min[0]) * t[0],
                min[1] + (max[1] - min[1]) * t[1],
                min[2] + (max[2] - min[2]) * t[2],
            ]);
            vertices.len() - 1
        })
    };
    let r = res as i64;
    // (fixed axis, fixed value, u axis, v axis) with u × v pointing outward.
    let sides = [
        (0usize, r, 1usize, 2usize),
        (0, 0, 2, 1),
        (1, r, 2, 0),
        (1, 0, 0, 2),
        (2, r, 0, 1),
        (2, 0, 1, 0),
    ];
    for (axis, value, ua, va) in sides {
        for i in 0..r {
            for j in 0..r {
                let p = |di: i64, dj: i64| {
                    let mut g = [0i64; 3];
                    g[axis] = value;
                    g[ua] = i + di;
                    g[va] = j + dj;
                    g
                };
                let (a, b, c, d) = (vid(p(0, 0)), vid(p(1, 0)), vid(p(1, 1)), vid(p(0, 1)));
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    Mesh::new(vertices, faces).expect("box construction is valid")
}

/// Disjoint union of meshes, concatenating vertex and face lists.
pub fn merge(parts: &[Mesh]) -> Mesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for part in parts {
        let offset = vertices.len();
        vertices.extend_from_slice(part.vertices());
        faces.extend(part.faces().iter().map(|f| f.map(|i| i + offset)));
    }
    Mesh::new(vertices, faces).expect("merging valid meshes is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::compute_vertex_normals;
    use crate::mesh::vec3::dot;

    #[test]
    fn icosphere_counts_and_orientation() {
        for freq in [1, 2, 3, 7] {
            let m = icosphere(freq, 1.0);
            assert_eq!(m.n_vertices(), 10 * freq * freq + 2);
            assert_eq!(m.n_faces(), 20 * freq * freq);
            assert!(m.edge_face_counts().values().all(|&c| c == 2));
            for (p, n) in m.vertices().iter().zip(compute_vertex_normals(&m).unwrap()) {
                assert!(dot(*p, n) > 0.0);
            }
        }
    }

    #[test]
    fn box_is_closed_and_outward() {
        let m = subdivided_box([0.0, 0.0, 0.0], [1.0, 2.0, 3.0], 3);
        assert!(m.edge_face_counts().values().all(|&c| c == 2));
        assert!((m.total_area() - 2.0 * (2.0 + 3.0 + 6.0)).abs() < 1e-12);
        let center = [0.5, 1.0, 1.5];
        for (p, n) in m.vertices().iter().zip(compute_vertex_normals(&m).unwrap()) {
            assert!(dot(sub(*p, center), n) > 0.0);
        }
    }

    #[test]
    fn grid_counts() {
        let m = grid(4, 3, 0.5);
        assert_eq!(m.n_vertices(), 12);
        assert_eq!(m.n_faces(), 12);
        assert!((m.total_area() - 1.5 * 1.0).abs() < 1e-12);
    }
}
