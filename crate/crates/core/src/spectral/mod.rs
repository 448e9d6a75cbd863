//! Spectral operators on a mesh: cotangent stiffness, lumped mass, the
//! low-frequency eigenbasis, the heat filter and tangent-plane gradients.

pub mod cache;
pub mod eigen;
pub mod gradient;
pub mod heat;
pub mod laplacian;
pub mod sparse;

pub use cache::{operator_cache_key, read_cache, write_cache};
pub use eigen::{eigendecompose, EigenMethod, EigenOptions, Eigenpairs};
pub use gradient::build_gradient_operator;
pub use heat::heat_filter;
pub use laplacian::{assemble_cotan_laplacian, LaplacianAssembly};
pub use sparse::CsrMatrix;

use ndarray::Array2;
use num_complex::Complex64;

use crate::mesh::{compute_tangent_frames, compute_vertex_normals, Mesh};
use crate::{Error, Result};

/// Default eigenbasis size.
pub const DEFAULT_K: usize = 128;

/// Everything the network needs from a mesh, precomputed once.
#[derive(Debug, Clone)]
pub struct SpectralOperators {
    /// Content hash of vertices, faces and `k`; binds fields to operators.
    pub key: [u8; 32],
    pub stiffness: CsrMatrix<f64>,
    pub mass: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `n × k`, `M`-orthonormal columns.
    pub eigenvectors: Array2<f64>,
    /// Complex gradient: `(G f)_i ≈ ∂f/∂x_i + i ∂f/∂y_i` in the vertex frame.
    pub gradient: CsrMatrix<Complex64>,
    gradient_t: CsrMatrix<Complex64>,
}

impl SpectralOperators {
    pub fn build(mesh: &Mesh, k: usize, opts: &EigenOptions) -> Result<Self> {
        let lap = assemble_cotan_laplacian(mesh)?;
        let pairs = eigendecompose(&lap.stiffness, &lap.mass, k, opts)?;
        let normals = compute_vertex_normals(mesh)?;
        let frames = compute_tangent_frames(&normals);
        let gradient = build_gradient_operator(mesh, &frames)?;
        Self::from_parts(
            operator_cache_key(mesh, k),
            lap.stiffness,
            lap.mass,
            pairs.values,
            pairs.vectors,
            gradient,
        )
    }

    pub fn from_parts(
        key: [u8; 32],
        stiffness: CsrMatrix<f64>,
        mass: Vec<f64>,
        eigenvalues: Vec<f64>,
        eigenvectors: Array2<f64>,
        gradient: CsrMatrix<Complex64>,
    ) -> Result<Self> {
        let n = mass.len();
        let k = eigenvalues.len();
        if stiffness.n_rows() != n
            || stiffness.n_cols() != n
            || eigenvectors.dim() != (n, k)
            || gradient.n_rows() != n
            || gradient.n_cols() != n
        {
            return Err(Error::Shape(format!(
                "inconsistent operator shapes: n = {n}, k = {k}, eigenvectors {:?}",
                eigenvectors.dim()
            )));
        }
        let gradient_t = gradient.transpose();
        Ok(Self {
            key,
            stiffness,
            mass,
            eigenvalues,
            eigenvectors,
            gradient,
            gradient_t,
        })
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn gradient_transpose(&self) -> &CsrMatrix<Complex64> {
        &self.gradient_t
    }

    pub fn key_hex(&self) -> String {
        crate::io_util::hex(&self.key)
    }
}
