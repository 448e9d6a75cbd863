//! Cotangent stiffness matrix and barycentric lumped mass.

use super::sparse::CsrMatrix;
use crate::mesh::vec3::{cross, dot, norm, sub};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Bound applied to every cotangent before assembly.
pub const COT_CLAMP: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct LaplacianAssembly {
    /// Positive semidefinite stiffness: `L_ij = -w_ij`, `L_ii = Σ_j w_ij`.
    pub stiffness: CsrMatrix<f64>,
    /// Lumped mass `Ω_i`, one third of the incident triangle areas.
    pub mass: Vec<f64>,
    /// Faces whose area was zero; their cotangent terms were skipped.
    pub skipped_faces: Vec<usize>,
}

/// Cotangent of the angle at `apex` in triangle `(apex, p, q)`, clamped.
pub fn clamped_cot(apex: [f64; 3], p: [f64; 3], q: [f64; 3]) -> f64 {
    let (a, b) = (sub(p, apex), sub(q, apex));
    (dot(a, b) / norm(cross(a, b))).clamp(-COT_CLAMP, COT_CLAMP)
}

fn is_degenerate(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> bool {
    let twice_area = norm(cross(sub(b, a), sub(c, a)));
    let longest = [dot(sub(b, a), sub(b, a)), dot(sub(c, b), sub(c, b)), dot(sub(a, c), sub(a, c))]
        .into_iter()
        .fold(0.0, f64::max);
    !(twice_area > f64::EPSILON * longest)
}

/// Assembles the stiffness and mass. Each face adds `½ cot θ_k` to the
/// weight of the edge opposite its corner `k`; edges shared by more than
/// two faces simply accumulate every contribution.
pub fn assemble_cotan_laplacian(mesh: &Mesh) -> Result<LaplacianAssembly> {
    if mesh.n_faces() == 0 {
        return Err(Error::InvalidMesh("mesh has no faces".into()));
    }
    let v = mesh.vertices();
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(mesh.n_faces() * 9);
    let mut skipped = Vec::new();
    let mut mass = vec![0.0; n];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let third = mesh.face_areas()[fi] / 3.0;
        for &i in f {
            mass[i] += third;
        }
        let [a, b, c] = f.map(|i| v[i]);
        if is_degenerate(a, b, c) {
            skipped.push(fi);
            continue;
        }
        for k in 0..3 {
            let (apex, i, j) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let w = 0.5 * clamped_cot(v[apex], v[i], v[j]);
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        }
    }
    if !skipped.is_empty() {
        log::warn!("skipped cotangent terms of {} zero-area faces", skipped.len());
    }
    let mut stiffness = CsrMatrix::from_triplets(n, n, &triplets);
    // Re-derive the diagonal as the negated off-diagonal row sum so rows sum
    // to zero independent of accumulation order.
    let mut rebuilt = Vec::with_capacity(stiffness.nnz());
    for r in 0..n {
        let off: f64 = stiffness.row(r).filter(|&(c, _)| c != r).map(|(_, w)| w).sum();
        for (c, w) in stiffness.row(r) {
            rebuilt.push((r, c, if c == r { -off } else { w }));
        }
    }
    stiffness = CsrMatrix::from_triplets(n, n, &rebuilt);
    Ok(LaplacianAssembly {
        stiffness,
        mass,
        skipped_faces: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use rand::{Rng, SeedableRng};

    fn square() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn unit_square_weights() {
        let lap = assemble_cotan_laplacian(&square()).unwrap();
        let l = &lap.stiffness;
        // Diagonal (0,2) is opposite two right angles.
        assert!(l.get(0, 2).abs() < 1e-15);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            assert!((l.get(i, j) + 0.5).abs() < 1e-15, "edge {i}-{j}: {}", l.get(i, j));
        }
        assert_eq!(lap.mass, vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0]);
    }

    #[test]
    fn constant_in_kernel_and_symmetric() {
        let m = primitives::icosphere(4, 1.0);
        let lap = assemble_cotan_laplacian(&m).unwrap();
        let y = lap.stiffness.mul_vec(&vec![3.5; m.n_vertices()]);
        for (yi, mi) in y.iter().zip(&lap.mass) {
            assert!((yi / mi).abs() <= 1e-10);
        }
        let l = &lap.stiffness;
        for r in 0..m.n_vertices() {
            for (c, v) in l.row(r) {
                assert!((v - l.get(c, r)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_form_is_nonnegative() {
        let bumpy = primitives::height_field(9, 7, 0.3, |x, y| 0.2 * (3.0 * x).sin() * (2.0 * y).cos());
        let lap = assemble_cotan_laplacian(&bumpy).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let f: Vec<f64> = (0..bumpy.n_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lf = lap.stiffness.mul_vec(&f);
            let q: f64 = f.iter().zip(&lf).map(|(a, b)| a * b).sum();
            assert!(q >= -1e-10);
        }
    }

    #[test]
    fn zero_area_faces_are_skipped() {
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3], [0, 1, 4]],
        )
        .unwrap();
        let lap = assemble_cotan_laplacian(&m).unwrap();
        assert_eq!(lap.skipped_faces, vec![2]);
        let sq = assemble_cotan_laplacian(&square()).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(lap.stiffness.get(r, c), sq.stiffness.get(r, c));
            }
        }
    }

    #[test]
    fn no_faces_is_an_error() {
        let m = Mesh::new(vec![[0.0; 3]; 3], vec![]).unwrap();
        assert!(assemble_cotan_laplacian(&m).is_err());
    }

    #[test]
    fn cot_is_clamped() {
        let c = clamped_cot([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1e-6, 0.0]);
        assert_eq!(c, COT_CLAMP);
    }
}
