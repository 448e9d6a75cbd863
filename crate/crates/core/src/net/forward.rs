use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use num_complex::Complex64;

use super::{sigmoid, silu, silu_grad, BlockParams, ModelParams};
use crate::linalg::{column_sums, matmul, matmul_tn, scale_rows};
use crate::spectral::heat::{decay_factors, from_spectral, to_spectral};
use crate::spectral::{CsrMatrix, SpectralOperators};
use crate::{Error, Result};

const NORM_EPS: f64 = 1e-5;

/// Sinusoidal embedding `[sin(t ω_j), cos(t ω_j)]`, `ω_j = 10000^{-j/(d/2)}`.
pub fn timestep_embedding(t: usize, dim: usize) -> Array1<f64> {
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    for j in 0..half {
        let freq = (-(10000f64).ln() * j as f64 / half as f64).exp();
        let arg = t as f64 * freq;
        out[j] = arg.sin();
        out[half + j] = arg.cos();
    }
    out
}

/// `x · w + b` with `b` broadcast over rows.
fn affine(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut y = matmul(x, w.view());
    y += b;
    y
}

fn map_par(x: &Array2<f64>, f: impl Fn(f64) -> f64 + Sync + Send) -> Array2<f64> {
    let mut y = Array2::zeros(x.dim());
    Zip::from(&mut y).and(x).par_for_each(|o, &v| *o = f(v));
    y
}

struct GradientFeatures {
    zr: Array2<f64>,
    zi: Array2<f64>,
    wr: Array2<f64>,
    wi: Array2<f64>,
    features: Array2<f64>,
}

fn gradient_features(
    f: ArrayView2<f64>,
    g: &CsrMatrix<Complex64>,
    mix_re: &Array2<f64>,
    mix_im: &Array2<f64>,
) -> GradientFeatures {
    let (zr, zi) = g.mul_real_dense(f);
    // w = A z per vertex, i.e. row-wise w = z Aᵀ.
    let wr = matmul(zr.view(), mix_re.t()) - matmul(zi.view(), mix_im.t());
    let wi = matmul(zr.view(), mix_im.t()) + matmul(zi.view(), mix_re.t());
    let mut features = Array2::zeros(zr.dim());
    Zip::from(&mut features)
        .and(&zr)
        .and(&zi)
        .and(&wr)
        .and(&wi)
        .par_for_each(|o, &a, &b, &c, &d| *o = (a * c + b * d).tanh());
    GradientFeatures {
        zr,
        zi,
        wr,
        wi,
        features,
    }
}

/// Real per-vertex features `tanh(Re(conj(z) ⊙ A z))` with `z = G f`.
pub fn spatial_gradient_features(
    f: ArrayView2<f64>,
    g: &CsrMatrix<Complex64>,
    mix_re: &Array2<f64>,
    mix_im: &Array2<f64>,
) -> Result<Array2<f64>> {
    let c = f.ncols();
    if g.n_cols() != f.nrows() || mix_re.dim() != (c, c) || mix_im.dim() != (c, c) {
        return Err(Error::Shape(format!(
            "gradient features: field {:?}, operator {}×{}, mixing {:?}/{:?}",
            f.dim(),
            g.n_rows(),
            g.n_cols(),
            mix_re.dim(),
            mix_im.dim()
        )));
    }
    Ok(gradient_features(f, g, mix_re, mix_im).features)
}

struct LayerNorm {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    out: Array2<f64>,
}

fn layer_norm(x: &Array2<f64>, gamma: &Array1<f64>, beta: &Array1<f64>) -> LayerNorm {
    let (n, d) = x.dim();
    let mut xhat = Array2::zeros((n, d));
    let mut inv_std = Array1::zeros(n);
    Zip::from(xhat.rows_mut())
        .and(&mut inv_std)
        .and(x.rows())
        .par_for_each(|mut h, is, row| {
            let mean = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            *is = inv;
            Zip::from(&mut h).and(&row).for_each(|o, &v| *o = (v - mean) * inv);
        });
    let mut out = &xhat * gamma;
    out += beta;
    LayerNorm { xhat, inv_std, out }
}

/// Intermediate values of one block needed for reverse mode.
struct BlockCache {
    coeffs: Array2<f64>,
    decay: Array2<f64>,
    zr: Array2<f64>,
    zi: Array2<f64>,
    wr: Array2<f64>,
    wi: Array2<f64>,
    gf: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    ln: Array2<f64>,
    a1: Array2<f64>,
    h1: Array2<f64>,
    a2: Array2<f64>,
    h2: Array2<f64>,
}

fn block_forward(
    p: &BlockParams,
    x: Array2<f64>,
    temb: ArrayView1<f64>,
    ops: &SpectralOperators,
    keep: bool,
) -> (Array2<f64>, Option<BlockCache>) {
    let times = p.diffusion_times();
    let coeffs = to_spectral(ops, x.view());
    let decay = decay_factors(&ops.eigenvalues, &times);
    let xd = from_spectral(ops, (&coeffs * &decay).view());
    let gf = gradient_features(xd.view(), &ops.gradient, &p.mix_re, &p.mix_im);
    let cat = concatenate(Axis(1), &[xd.view(), gf.features.view(), x.view()]).expect("matching rows");
    drop(xd);
    let norm = layer_norm(&cat, &p.norm_gamma, &p.norm_beta);
    drop(cat);
    let tb = temb.dot(&p.w_time) + &p.b_time;
    let mut a1 = matmul(norm.out.view(), p.w1.view());
    a1 += &(&p.b1 + &tb);
    let h1 = map_par(&a1, silu);
    let a2 = affine(h1.view(), &p.w2, &p.b2);
    let h2 = map_par(&a2, silu);
    let a3 = affine(h2.view(), &p.w3, &p.b3);
    let out = &x + &a3;
    let cache = keep.then(|| BlockCache {
        coeffs,
        decay,
        zr: gf.zr,
        zi: gf.zi,
        wr: gf.wr,
        wi: gf.wi,
        gf: gf.features,
        xhat: norm.xhat,
        inv_std: norm.inv_std,
        ln: norm.out,
        a1,
        h1,
        a2,
        h2,
    });
    (out, cache)
}

/// Everything recorded by [`forward_train`] for [`backward`].
pub struct ForwardCache {
    f_t: Array2<f64>,
    embedding: Array1<f64>,
    temb_pre: Array1<f64>,
    temb: Array1<f64>,
    blocks: Vec<BlockCache>,
    h_last: Array2<f64>,
}

fn check_inputs(params: &ModelParams, f_t: ArrayView2<f64>, ops: &SpectralOperators) -> Result<()> {
    if f_t.nrows() != ops.n() {
        return Err(Error::Shape(format!(
            "field has {} rows but the operators belong to a {}-vertex mesh",
            f_t.nrows(),
            ops.n()
        )));
    }
    if f_t.ncols() != params.config.c_in {
        return Err(Error::Shape(format!(
            "field has {} channels, model expects {}",
            f_t.ncols(),
            params.config.c_in
        )));
    }
    if f_t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network input".into()));
    }
    Ok(())
}

fn run(
    params: &ModelParams,
    f_t: ArrayView2<f64>,
    t: usize,
    ops: &SpectralOperators,
    keep: bool,
) -> Result<(Array2<f64>, Option<ForwardCache>)> {
    check_inputs(params, f_t, ops)?;
    let embedding = timestep_embedding(t, params.config.time_dim);
    let temb_pre = embedding.dot(&params.w_temb) + &params.b_temb;
    let temb = temb_pre.mapv(silu);
    let mut h = affine(f_t, &params.w_in, &params.b_in);
    let mut caches = Vec::new();
    for (i, block) in params.blocks.iter().enumerate() {
        let (next, cache) = block_forward(block, h, temb.view(), ops, keep);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("activations of block {i}")));
        }
        caches.extend(cache);
        h = next;
    }
    let out = affine(h.view(), &params.w_out, &params.b_out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network output".into()));
    }
    let cache = keep.then(|| ForwardCache {
        f_t: f_t.to_owned(),
        embedding,
        temb_pre,
        temb,
        blocks: caches,
        h_last: h,
    });
    Ok((out, cache))
}

/// Predicted noise `ε_θ(f_t, t)`, same shape as `f_t`. Keeps no
/// intermediates, so memory stays at a few `n × width` buffers.
pub fn forward(params: &ModelParams, f_t: ArrayView2<f64>, t: usize, ops: &SpectralOperators) -> Result<Array2<f64>> {
    run(params, f_t, t, ops, false).map(|(out, _)| out)
}

/// Like [`forward`], additionally recording what [`backward`] needs.
pub fn forward_train(
    params: &ModelParams,
    f_t: ArrayView2<f64>,
    t: usize,
    ops: &SpectralOperators,
) -> Result<(Array2<f64>, ForwardCache)> {
    run(params, f_t, t, ops, true).map(|(out, cache)| (out, cache.expect("cache requested")))
}

/// Accumulates `∂loss/∂θ` into `grads` given `d_out = ∂loss/∂output`.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    ops: &SpectralOperators,
    d_out: ArrayView2<f64>,
    grads: &mut ModelParams,
) -> Result<()> {
    if d_out.dim() != (cache.f_t.nrows(), params.config.c_in) || cache.blocks.len() != params.blocks.len() {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match the recorded forward pass",
            d_out.dim()
        )));
    }
    grads.w_out += &matmul_tn(cache.h_last.view(), d_out);
    grads.b_out += &column_sums(d_out);
    let mut dh = matmul(d_out, params.w_out.t());
    let mut d_temb = Array1::<f64>::zeros(params.config.time_dim);

    for (i, (p, bc)) in params.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        dh = block_backward(p, bc, cache.temb.view(), ops, dh, &mut grads.blocks[i], &mut d_temb);
    }

    let d_pre = &d_temb * &cache.temb_pre.mapv(silu_grad);
    grads.w_temb += &outer(cache.embedding.view(), d_pre.view());
    grads.b_temb += &d_pre;
    grads.w_in += &matmul_tn(cache.f_t.view(), dh.view());
    grads.b_in += &column_sums(dh.view());
    if !grads.is_finite() {
        return Err(Error::NonFinite("parameter gradients".into()));
    }
    Ok(())
}

fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

fn block_backward(
    p: &BlockParams,
    c: &BlockCache,
    temb: ArrayView1<f64>,
    ops: &SpectralOperators,
    d_out: Array2<f64>,
    g: &mut BlockParams,
    d_temb: &mut Array1<f64>,
) -> Array2<f64> {
    let w = p.raw_time.len();

    // MLP.
    g.w3 += &matmul_tn(c.h2.view(), d_out.view());
    g.b3 += &column_sums(d_out.view());
    let mut da2 = matmul(d_out.view(), p.w3.t());
    Zip::from(&mut da2).and(&c.a2).par_for_each(|d, &a| *d *= silu_grad(a));
    g.w2 += &matmul_tn(c.h1.view(), da2.view());
    g.b2 += &column_sums(da2.view());
    let mut da1 = matmul(da2.view(), p.w2.t());
    drop(da2);
    Zip::from(&mut da1).and(&c.a1).par_for_each(|d, &a| *d *= silu_grad(a));
    g.w1 += &matmul_tn(c.ln.view(), da1.view());
    let db1 = column_sums(da1.view());
    g.b1 += &db1;
    g.w_time += &outer(temb, db1.view());
    g.b_time += &db1;
    *d_temb += &p.w_time.dot(&db1);
    let dln = matmul(da1.view(), p.w1.t());
    drop(da1);

    // Layer norm.
    g.norm_gamma += &column_sums((&dln * &c.xhat).view());
    g.norm_beta += &column_sums(dln.view());
    let dxhat = &dln * &p.norm_gamma;
    drop(dln);
    let d = dxhat.ncols() as f64;
    let mut dcat = Array2::zeros(dxhat.dim());
    Zip::from(dcat.rows_mut())
        .and(dxhat.rows())
        .and(c.xhat.rows())
        .and(&c.inv_std)
        .par_for_each(|mut o, dx, xh, &is| {
            let mean_d = dx.sum() / d;
            let mean_dx = dx.dot(&xh) / d;
            Zip::from(&mut o)
                .and(&dx)
                .and(&xh)
                .for_each(|o, &a, &b| *o = is * (a - mean_d - b * mean_dx));
        });
    drop(dxhat);

    let mut dx = d_out;
    dx += &dcat.slice(s![.., 2 * w..]);
    let mut dxd = dcat.slice(s![.., ..w]).to_owned();

    // Gradient features.
    let mut dq = dcat.slice(s![.., w..2 * w]).to_owned();
    drop(dcat);
    Zip::from(&mut dq).and(&c.gf).par_for_each(|d, &f| *d *= 1.0 - f * f);
    let dwr = &dq * &c.zr;
    let dwi = &dq * &c.zi;
    g.mix_re += &(matmul_tn(dwr.view(), c.zr.view()) + matmul_tn(dwi.view(), c.zi.view()));
    g.mix_im += &(matmul_tn(dwi.view(), c.zr.view()) - matmul_tn(dwr.view(), c.zi.view()));
    let mut dzr = &dq * &c.wr;
    dzr += &matmul(dwr.view(), p.mix_re.view());
    dzr += &matmul(dwi.view(), p.mix_im.view());
    let mut dzi = &dq * &c.wi;
    dzi -= &matmul(dwr.view(), p.mix_im.view());
    dzi += &matmul(dwi.view(), p.mix_re.view());
    dxd += &ops.gradient_transpose().mul_split_dense(dzr.view(), dzi.view());

    // Heat diffusion: xd = Φ (decay ⊙ Φᵀ M x).
    let dspec = matmul_tn(ops.eigenvectors.view(), dxd.view());
    let k = dspec.nrows();
    for ch in 0..w {
        let mut ds = 0.0;
        for i in 0..k {
            ds += dspec[[i, ch]] * c.coeffs[[i, ch]] * (-ops.eigenvalues[i]) * c.decay[[i, ch]];
        }
        // s = softplus(raw), ds/draw = sigmoid(raw).
        g.raw_time[ch] += ds * sigmoid(p.raw_time[ch]);
    }
    let dcoeff = &dspec * &c.decay;
    let back = from_spectral(ops, dcoeff.view());
    dx += &scale_rows(back.view(), &ops.mass);
    dx
}
