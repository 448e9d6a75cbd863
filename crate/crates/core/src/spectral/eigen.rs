//! Smallest generalized eigenpairs of `L φ = λ M φ` for a sparse positive
//! semidefinite stiffness `L` and a positive diagonal mass `M`.
//!
//! Small problems are solved densely. Large ones use a block Krylov-Schur
//! iteration on the shift-inverted operator `(L - σM)⁻¹ M`, which is
//! self-adjoint in the `M` inner product and maps the wanted low end of the
//! spectrum to its dominant, well separated end.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use ndarray::{s, Array2, ArrayView2, ArrayViewMut1, Axis};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::sparse::CsrMatrix;
use crate::linalg::{matmul, matmul_tn};
use crate::{Error, Result};

/// Problems up to this size may be solved with a dense eigensolver.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense for `n ≤ DENSE_LIMIT`, iterative above.
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub method: EigenMethod,
    /// Relative residual target for Ritz pairs of the shift-inverted operator.
    pub tol: f64,
    /// Restart cap; `None` means `10 k`.
    pub max_restarts: Option<usize>,
    pub block_size: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            tol: 1e-8,
            max_restarts: None,
            block_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `n × k`, `M`-orthonormal columns.
    pub vectors: Array2<f64>,
}

pub fn eigendecompose(
    stiffness: &CsrMatrix<f64>,
    mass: &[f64],
    k: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs> {
    let n = stiffness.n_rows();
    if stiffness.n_cols() != n || mass.len() != n {
        return Err(Error::Shape(format!(
            "stiffness {}×{} with {} mass entries",
            n,
            stiffness.n_cols(),
            mass.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested k = {k} eigenpairs of an {n}-vertex operator")));
    }
    if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Vertex {
            vertex: i,
            reason: "zero lumped mass (no incident face with positive area)".into(),
        });
    }
    let block = opts.block_size.clamp(1, k);
    let ncv = krylov_dim(k, block);
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Auto => n <= DENSE_LIMIT,
        // The Krylov basis must fit strictly inside the space.
        EigenMethod::Iterative => ncv + block > n,
    };
    let mut pairs = if dense {
        dense_eigen(stiffness, mass, k)?
    } else {
        krylov_schur(stiffness, mass, k, block, ncv, opts)?
    };
    fix_signs(&mut pairs.vectors);
    Ok(pairs)
}

fn krylov_dim(k: usize, block: usize) -> usize {
    let want = (2 * k).max(k + 4 * block);
    want.div_ceil(block) * block
}

/// Flips each column so its largest-magnitude entry (lowest index on ties)
/// is positive.
fn fix_signs(vectors: &mut Array2<f64>) {
    for mut col in vectors.axis_iter_mut(Axis(1)) {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

fn dense_eigen(stiffness: &CsrMatrix<f64>, mass: &[f64], k: usize) -> Result<Eigenpairs> {
    let n = stiffness.n_rows();
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = Mat::<f64>::zeros(n, n);
    for r in 0..n {
        for (c, v) in stiffness.row(r) {
            a[(r, c)] += v * inv_sqrt[r] * inv_sqrt[c];
        }
    }
    // Exact symmetry for the solver.
    for r in 0..n {
        for c in 0..r {
            let avg = 0.5 * (a[(r, c)] + a[(c, r)]);
            a[(r, c)] = avg;
            a[(c, r)] = avg;
        }
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("dense eigensolver failed: {e:?}")))?;
    let (vals, u) = (evd.S(), evd.U());
    let values = (0..k).map(|i| vals[i]).collect();
    let vectors = Array2::from_shape_fn((n, k), |(i, j)| u[(i, j)] * inv_sqrt[i]);
    Ok(Eigenpairs { values, vectors })
}

struct ShiftInvert {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    mass: Vec<f64>,
}

impl ShiftInvert {
    fn new(stiffness: &CsrMatrix<f64>, mass: &[f64], sigma: f64) -> Result<Self> {
        let n = stiffness.n_rows();
        let mut triplets = Vec::with_capacity(stiffness.nnz() / 2 + n);
        for r in 0..n {
            for (c, v) in stiffness.row(r) {
                if c < r {
                    triplets.push(Triplet::new(r, c, v));
                } else if c == r {
                    triplets.push(Triplet::new(r, r, v - sigma * mass[r]));
                }
            }
        }
        let k = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Linalg(format!("building shifted operator: {e:?}")))?;
        let llt = k
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Linalg(format!("Cholesky of shifted stiffness failed: {e}")))?;
        Ok(Self {
            llt,
            mass: mass.to_vec(),
        })
    }

    /// Columns of `x` replaced by `(L - σM)⁻¹ M x`.
    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (n, b) = x.dim();
        let mut rhs = Mat::<f64>::from_fn(n, b, |i, j| self.mass[i] * x[[i, j]]);
        self.llt.solve_in_place(rhs.as_mut());
        Array2::from_shape_fn((n, b), |(i, j)| rhs[(i, j)])
    }
}

fn m_dot(a: &ArrayView2<f64>, ca: usize, b: &ArrayView2<f64>, cb: usize, mass: &[f64]) -> f64 {
    a.column(ca)
        .iter()
        .zip(b.column(cb).iter())
        .zip(mass)
        .map(|((x, y), m)| x * y * m)
        .sum()
}

/// Removes from `w` its `M`-projection onto the first `cols` columns of
/// `basis` (two classical Gram-Schmidt passes). Returns the coefficients.
fn project_out(basis: ArrayView2<f64>, w: &mut Array2<f64>, mass: &[f64]) -> Array2<f64> {
    let mut coeffs = Array2::<f64>::zeros((basis.ncols(), w.ncols()));
    if basis.ncols() == 0 {
        return coeffs;
    }
    for _ in 0..2 {
        let mw = crate::linalg::scale_rows(w.view(), mass);
        let c = matmul_tn(basis, mw.view());
        let update = matmul(basis, c.view());
        *w -= &update;
        coeffs += &c;
    }
    coeffs
}

/// `M`-orthonormalizes the columns of `w` in place against each other
/// (it is assumed already orthogonal to `basis`). Returns the triangular
/// factor `R` with `w_in = basis-part + Q R`. Rank-deficient columns are
/// replaced by random directions orthogonal to everything so far, with a
/// zero diagonal in `R`.
fn block_qr(
    basis: ArrayView2<f64>,
    w: &mut Array2<f64>,
    mass: &[f64],
    reference_norms: &[f64],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Array2<f64> {
    let (n, b) = w.dim();
    let mut r = Array2::<f64>::zeros((b, b));
    for c in 0..b {
        for _ in 0..2 {
            for p in 0..c {
                let h = {
                    let wv = w.view();
                    m_dot(&wv, p, &wv, c, mass)
                };
                r[[p, c]] += h;
                let (qp, mut wc) = w.multi_slice_mut((s![.., p], s![.., c]));
                wc.scaled_add(-h, &qp);
            }
        }
        let wv = w.view();
        let norm = m_dot(&wv, c, &wv, c, mass).sqrt();
        if norm > 1e-10 * reference_norms[c].max(f64::MIN_POSITIVE) {
            r[[c, c]] = norm;
            w.column_mut(c).mapv_inplace(|v| v / norm);
        } else {
            // Deflate: substitute a fresh random direction.
            loop {
                let mut fresh = Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(rng));
                project_out(basis, &mut fresh, mass);
                let prev = w.slice(s![.., ..c]).to_owned();
                project_out(prev.view(), &mut fresh, mass);
                let fv = fresh.view();
                let fnorm = m_dot(&fv, 0, &fv, 0, mass).sqrt();
                if fnorm > 0.0 {
                    assign(w.column_mut(c), fresh.column(0).map(|v| v / fnorm).view());
                    break;
                }
            }
        }
    }
    r
}

fn assign(mut dst: ArrayViewMut1<f64>, src: ndarray::ArrayView1<f64>) {
    dst.assign(&src);
}

fn krylov_schur(
    stiffness: &CsrMatrix<f64>,
    mass: &[f64],
    k: usize,
    b: usize,
    ncv: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs> {
    let n = stiffness.n_rows();
    faer::set_global_parallelism(faer::Par::Seq);

    let diag_sum: f64 = (0..n).map(|i| stiffness.get(i, i)).sum();
    let mass_sum: f64 = mass.iter().sum();
    if !(diag_sum > 0.0) {
        return Err(Error::Linalg("stiffness has an empty diagonal".into()));
    }
    // Scale-covariant shift strictly below the spectrum.
    let sigma = -1e-4 * diag_sum / mass_sum;
    let op = ShiftInvert::new(stiffness, mass, sigma)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Array2::<f64>::zeros((n, ncv + b));
    let mut h = Array2::<f64>::zeros((ncv, ncv));

    let mut start = Array2::from_shape_fn((n, b), |_| StandardNormal.sample(&mut rng));
    let ones = vec![1.0; b];
    block_qr(basis.slice(s![.., ..0]), &mut start, mass, &ones, &mut rng);
    basis.slice_mut(s![.., ..b]).assign(&start);

    let max_restarts = opts.max_restarts.unwrap_or(10 * k).max(1);
    let mut expanded = 0usize;
    let mut worst = f64::INFINITY;
    let mut residual_block = Array2::<f64>::zeros((b, b));

    for restart in 0..max_restarts {
        // Expand the basis block by block until ncv columns have images.
        let mut j = expanded;
        while j < ncv {
            let mut w = op.apply(basis.slice(s![.., j..j + b]));
            let wv = w.view();
            let ref_norms: Vec<f64> = (0..b).map(|c| m_dot(&wv, c, &wv, c, mass).sqrt()).collect();
            let coeffs = project_out(basis.slice(s![.., ..j + b]), &mut w, mass);
            h.slice_mut(s![..j + b, j..j + b]).assign(&coeffs);
            let r = block_qr(basis.slice(s![.., ..j + b]), &mut w, mass, &ref_norms, &mut rng);
            basis.slice_mut(s![.., j + b..j + 2 * b]).assign(&w);
            if j + b < ncv {
                h.slice_mut(s![j + b..j + 2 * b, j..j + b]).assign(&r);
            } else {
                residual_block = r;
            }
            j += b;
        }

        let sym = Mat::<f64>::from_fn(ncv, ncv, |r, c| 0.5 * (h[[r, c]] + h[[c, r]]));
        let evd = sym
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("projected eigenproblem failed: {e:?}")))?;
        // Descending Ritz values of the shift-inverted operator.
        let theta: Vec<f64> = (0..ncv).rev().map(|i| evd.S()[i]).collect();
        let y = Array2::from_shape_fn((ncv, ncv), |(r, c)| evd.U()[(r, ncv - 1 - c)]);

        let tail = y.slice(s![ncv - b.., ..]);
        let coupling = residual_block.dot(&tail);
        let residuals: Vec<f64> = (0..ncv)
            .map(|i| coupling.column(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        worst = (0..k)
            .map(|i| residuals[i] / theta[i].abs())
            .fold(0.0, f64::max);
        log::debug!("krylov-schur restart {restart}: worst relative residual {worst:.3e}");
        if worst <= opts.tol {
            let ritz = matmul(basis.slice(s![.., ..ncv]), y.slice(s![.., ..k]));
            let values = theta[..k].iter().map(|t| sigma + 1.0 / t).collect();
            return Ok(Eigenpairs { values, vectors: ritz });
        }

        // Thick restart: keep the leading Ritz vectors plus the residual block.
        let extra = ((ncv - k) / (2 * b)).max(1) * b;
        let keep = (ncv - extra).max(k).min(ncv - b);
        let keep = keep - (ncv - keep) % b;
        let kept = matmul(basis.slice(s![.., ..ncv]), y.slice(s![.., ..keep]));
        let next = basis.slice(s![.., ncv..ncv + b]).to_owned();
        basis.slice_mut(s![.., ..keep]).assign(&kept);
        basis.slice_mut(s![.., keep..keep + b]).assign(&next);
        h.fill(0.0);
        for i in 0..keep {
            h[[i, i]] = theta[i];
            for r in 0..b {
                h[[keep + r, i]] = coupling[[r, i]];
                h[[i, keep + r]] = coupling[[r, i]];
            }
        }
        expanded = keep;
    }
    Err(Error::NotConverged {
        iterations: max_restarts,
        residual: worst,
    })
}
