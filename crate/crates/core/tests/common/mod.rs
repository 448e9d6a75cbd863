#![allow(dead_code)]

use heatgen::mesh::{primitives, Mesh};
use heatgen_testkit::nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Icosphere with seeded radial bumps; breaks the symmetry that makes
/// spherical eigenvalues degenerate.
pub fn bumpy_sphere(freq: usize, amplitude: f64, seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = primitives::icosphere(freq, 1.0);
    let r: Vec<f64> = (0..base.n_vertices())
        .map(|_| 1.0 + amplitude * rng.random_range(-1.0..1.0))
        .collect();
    let stretched: Vec<[f64; 3]> = base
        .vertices()
        .iter()
        .zip(&r)
        .map(|(p, s)| [p[0] * s * 1.3, p[1] * s, p[2] * s * 0.8])
        .collect();
    Mesh::new(stretched, base.faces().to_vec()).unwrap()
}

/// 50-vertex wavy, jittered open patch.
pub fn patch50() -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let m = primitives::height_field(5, 10, 0.25, |x, y| 0.15 * (2.0 * x).sin() * (1.5 * y).cos());
    let jitter: Vec<[f64; 2]> = (0..m.n_vertices())
        .map(|_| [rng.random_range(-0.04..0.04), rng.random_range(-0.04..0.04)])
        .collect();
    let v: Vec<[f64; 3]> = m
        .vertices()
        .iter()
        .zip(&jitter)
        .map(|(p, j)| [p[0] + j[0], p[1] + j[1], p[2]])
        .collect();
    Mesh::new(v, m.faces().to_vec()).unwrap()
}

pub fn random_field(n: usize, c: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, c), || rng.random_range(-1.0..1.0))
}

pub fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_dmatrix(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

pub fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

pub fn apply(r: &[[f64; 3]; 3], p: [f64; 3]) -> [f64; 3] {
    [
        r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2],
        r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2],
        r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2],
    ]
}
