//! Spectral heat-kernel filtering, `Φ (e^{-Λ s_c} ⊙ Φᵀ M f_c)` per channel.

use ndarray::{Array2, ArrayView2};

use super::SpectralOperators;
use crate::linalg::{matmul, matmul_tn, scale_rows};
use crate::{Error, Result};

/// Spectral coefficients `Φᵀ M f` (k × c).
pub fn to_spectral(ops: &SpectralOperators, f: ArrayView2<f64>) -> Array2<f64> {
    let mf = scale_rows(f, &ops.mass);
    matmul_tn(ops.eigenvectors.view(), mf.view())
}

/// Back to vertices: `Φ c` (n × c).
pub fn from_spectral(ops: &SpectralOperators, coeffs: ArrayView2<f64>) -> Array2<f64> {
    matmul(ops.eigenvectors.view(), coeffs)
}

/// `decay[i, c] = e^{-λ_i s_c}`.
pub fn decay_factors(eigenvalues: &[f64], s: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((eigenvalues.len(), s.len()), |(i, c)| (-eigenvalues[i] * s[c]).exp())
}

/// Diffuses every channel of `f` for its own time `s[c] ≥ 0`.
pub fn heat_filter(f: ArrayView2<f64>, s: &[f64], ops: &SpectralOperators) -> Result<Array2<f64>> {
    if f.nrows() != ops.n() {
        return Err(Error::Shape(format!(
            "field has {} rows but the operators are for {} vertices",
            f.nrows(),
            ops.n()
        )));
    }
    if s.len() != f.ncols() {
        return Err(Error::Shape(format!(
            "{} diffusion times for a {}-channel field",
            s.len(),
            f.ncols()
        )));
    }
    if let Some(c) = s.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "diffusion time for channel {c} is {}; heat only runs forward (s ≥ 0)",
            s[c]
        )));
    }
    let mut coeffs = to_spectral(ops, f);
    coeffs *= &decay_factors(&ops.eigenvalues, s);
    Ok(from_spectral(ops, coeffs.view()))
}
