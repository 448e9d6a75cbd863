//! Tangent-plane gradient operator.
//!
//! At each vertex the gradient of a scalar field is fit by least squares to
//! the one-ring edge differences, with edges projected onto the vertex's
//! tangent frame. The result is stored as one complex matrix whose real part
//! gives the `x` component and imaginary part the `y` component.

use num_complex::Complex64;

use super::sparse::CsrMatrix;
use crate::mesh::vec3::{dot, sub};
use crate::mesh::{Mesh, TangentFrames};
use crate::{Error, Result};

/// Tikhonov term added to the 2×2 normal equations.
pub const GRADIENT_REGULARIZATION: f64 = 1e-8;

pub fn build_gradient_operator(mesh: &Mesh, frames: &TangentFrames) -> Result<CsrMatrix<Complex64>> {
    let n = mesh.n_vertices();
    if frames.len() != n {
        return Err(Error::Shape(format!("{} frames for {n} vertices", frames.len())));
    }
    let mut triplets = Vec::new();
    for i in 0..n {
        let p = mesh.vertices()[i];
        let ring = mesh.neighbors(i);
        let d: Vec<[f64; 2]> = ring
            .iter()
            .map(|&j| {
                let e = sub(mesh.vertices()[j], p);
                [dot(e, frames.x[i]), dot(e, frames.y[i])]
            })
            .collect();
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for [u, v] in &d {
            a += u * u;
            b += u * v;
            c += v * v;
        }
        let det = a * c - b * b;
        let trace = a + c;
        if ring.len() < 2 || !(det > 1e-10 * trace * trace) {
            return Err(Error::Vertex {
                vertex: i,
                reason: "one-ring is rank deficient in the tangent plane (fewer than two non-collinear neighbours)"
                    .into(),
            });
        }
        let (a, c) = (a + GRADIENT_REGULARIZATION, c + GRADIENT_REGULARIZATION);
        let det = a * c - b * b;
        let mut diag = Complex64::new(0.0, 0.0);
        for (&j, [u, v]) in ring.iter().zip(&d) {
            // Row of (DᵀD + εI)⁻¹ Dᵀ for this edge.
            let wx = (c * u - b * v) / det;
            let wy = (a * v - b * u) / det;
            let w = Complex64::new(wx, wy);
            triplets.push((i, j, w));
            diag -= w;
        }
        triplets.push((i, i, diag));
    }
    Ok(CsrMatrix::from_triplets(n, n, &triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{compute_tangent_frames, compute_vertex_normals, primitives};

    #[test]
    fn rotated_linear_field_on_sphere_patch() {
        // A linear field restricted to the sphere has tangential gradient
        // equal to the projection of its ambient gradient.
        let mesh = primitives::icosphere(8, 1.0);
        let normals = compute_vertex_normals(&mesh).unwrap();
        let frames = compute_tangent_frames(&normals);
        let g = build_gradient_operator(&mesh, &frames).unwrap();
        let f: Vec<f64> = mesh.vertices().iter().map(|v| v[2]).collect();
        let re = g.map(|w| w.re).mul_vec(&f);
        let im = g.map(|w| w.im).mul_vec(&f);
        let mut worst: f64 = 0.0;
        for i in 0..mesh.n_vertices() {
            let e = [0.0, 0.0, 1.0];
            let ex = dot(e, frames.x[i]);
            let ey = dot(e, frames.y[i]);
            worst = worst.max((re[i] - ex).abs()).max((im[i] - ey).abs());
        }
        assert!(worst < 0.05, "worst {worst}");
    }

    #[test]
    fn isolated_ring_errors() {
        let mesh = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let frames = compute_tangent_frames(&compute_vertex_normals(&mesh).unwrap());
        let mut frames_bad = frames.clone();
        // Frames rotated to stand perpendicular to the face squash the ring onto a line.
        for i in 0..3 {
            frames_bad.x[i] = [1.0, 0.0, 0.0];
            frames_bad.y[i] = [0.0, 0.0, 1.0];
        }
        match build_gradient_operator(&mesh, &frames_bad) {
            Err(Error::Vertex { vertex: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(build_gradient_operator(&mesh, &frames).is_ok());
    }
}
