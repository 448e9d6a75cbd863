//! Straightforward dense reference computations, written independently of
//! the library so tests can compare against them.

pub use nalgebra;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Interior angle at `apex` of triangle `(apex, p, q)` via `acos`.
pub fn angle(apex: V3, p: V3, q: V3) -> f64 {
    let (u, v) = (sub(p, apex), sub(q, apex));
    (dot(u, v) / (dot(u, u).sqrt() * dot(v, v).sqrt())).clamp(-1.0, 1.0).acos()
}

/// Positive semidefinite cotangent stiffness built edge by edge from the
/// opposite angles, `L_ij = -½ Σ cot(angle opposite ij)`, `L_ii = -Σ_j L_ij`.
pub fn cotan_stiffness(vertices: &[V3], faces: &[[usize; 3]]) -> DMatrix<f64> {
    let n = vertices.len();
    let mut l = DMatrix::zeros(n, n);
    for f in faces {
        for k in 0..3 {
            let (o, i, j) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let theta = angle(vertices[o], vertices[i], vertices[j]);
            let w = 0.5 / theta.tan();
            l[(i, j)] -= w;
            l[(j, i)] -= w;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
        l[(i, i)] = -off;
    }
    l
}

/// One third of the incident triangle areas per vertex.
pub fn barycentric_mass(vertices: &[V3], faces: &[[usize; 3]]) -> Vec<f64> {
    let mut m = vec![0.0; vertices.len()];
    for f in faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        let (u, v) = (sub(b, a), sub(c, a));
        let cr = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let area = 0.5 * dot(cr, cr).sqrt();
        for &i in f {
            m[i] += area / 3.0;
        }
    }
    m
}

/// All generalized eigenpairs of `L φ = λ M φ` for diagonal `M`, ascending,
/// with `M`-orthonormal eigenvectors as columns.
pub fn generalized_eigen(l: &DMatrix<f64>, mass: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = mass.len();
    let s = DVector::from_iterator(n, mass.iter().map(|m| 1.0 / m.sqrt()));
    let mut a = l.clone();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= s[i] * s[j];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])] * s[r]);
    (values, vectors)
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

/// Sine of the largest principal angle between the column spans of two
/// `M`-orthonormal bases.
pub fn subspace_sine(a: &DMatrix<f64>, b: &DMatrix<f64>, mass: &[f64]) -> f64 {
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(mass));
    let proj = a - b * (b.transpose() * &m * a);
    let sq = DMatrix::from_diagonal(&DVector::from_iterator(mass.len(), mass.iter().map(|v| v.sqrt())));
    (sq * proj).singular_values().max()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_angle_has_zero_cotangent_weight() {
        let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let l = cotan_stiffness(&v, &[[0, 1, 2], [0, 2, 3]]);
        assert!(l[(0, 2)].abs() < 1e-15);
        assert!((l[(0, 1)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0, 2.0]));
        let e = expm(&a);
        assert!((e[(1, 1)] - (-1f64).exp()).abs() < 1e-14);
        assert!((e[(2, 2)] - 2f64.exp()).abs() < 1e-13);
    }
}
