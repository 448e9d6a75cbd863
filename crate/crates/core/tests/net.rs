mod common;

use common::*;
use heatgen::mesh::{primitives, Mesh};
use heatgen::net::{
    backward, forward, forward_train, init_params, spatial_gradient_features, ModelParams, NetConfig,
};
use heatgen::spectral::{EigenOptions, SpectralOperators};
use heatgen_testkit::{central_difference, rel_err};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};

fn ops(mesh: &Mesh, k: usize) -> SpectralOperators {
    SpectralOperators::build(mesh, k, &EigenOptions::default()).unwrap()
}

/// Random weights everywhere, including the output projection, so every
/// parameter influences the output.
fn random_params(cfg: NetConfig, init_time: f64, seed: u64) -> ModelParams {
    let mut p = init_params(cfg, init_time, seed).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    p.w_out.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    p.b_out.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    for b in &mut p.blocks {
        b.norm_gamma.mapv_inplace(|g| g + rng.random_range(-0.3..0.3));
        b.norm_beta.mapv_inplace(|_| rng.random_range(-0.2..0.2));
        b.raw_time.mapv_inplace(|r| r + rng.random_range(-1.0..1.0));
    }
    p
}

fn set(p: &mut ModelParams, tensor: usize, elem: usize, value: f64) -> f64 {
    let mut ts = p.tensors_mut();
    let slot = ts[tensor].1.iter_mut().nth(elem).unwrap();
    std::mem::replace(slot, value)
}

#[test]
fn gradients_match_central_differences() {
    let mesh = patch50();
    let o = ops(&mesh, 30);
    let cfg = NetConfig::new(3, 16, 2, 30);
    let init_time = mesh.mean_edge_length().powi(2);
    let mut params = random_params(cfg, init_time, 1);
    let f_t = random_field(o.n(), 3, 2);
    let weights = random_field(o.n(), 3, 3);
    let t = 417;

    let loss = |p: &ModelParams| -> f64 { (&forward(p, f_t.view(), t, &o).unwrap() * &weights).sum() };
    let (_, cache) = forward_train(&params, f_t.view(), t, &o).unwrap();
    let mut grads = params.zeros_like();
    backward(&params, &cache, &o, weights.view(), &mut grads).unwrap();

    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.iter().copied().collect()))
        .collect();
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for (ti, (name, values)) in analytic.iter().enumerate() {
        for (ei, &g) in values.iter().enumerate() {
            let x0 = set(&mut params, ti, ei, 0.0);
            let fd = central_difference(
                |x| {
                    set(&mut params, ti, ei, x);
                    loss(&params)
                },
                x0,
                1e-4,
            );
            set(&mut params, ti, ei, x0);
            let e = rel_err(g, fd, 1e-6);
            if e > worst.0 {
                worst = (e, format!("{name}[{ei}]: analytic {g:e}, numeric {fd:e}"));
            }
            checked += 1;
        }
    }
    assert_eq!(checked, cfg.parameter_count());
    assert!(worst.0 <= 1e-4, "worst relative error {:e} at {}", worst.0, worst.1);
}

#[test]
fn zero_upstream_gradient_gives_zero_gradients() {
    let mesh = patch50();
    let o = ops(&mesh, 20);
    let params = random_params(NetConfig::new(3, 8, 2, 20), 0.05, 4);
    let f_t = random_field(o.n(), 3, 5);
    let (_, cache) = forward_train(&params, f_t.view(), 3, &o).unwrap();
    let mut grads = params.zeros_like();
    backward(&params, &cache, &o, Array2::zeros((o.n(), 3)).view(), &mut grads).unwrap();
    assert!(grads.to_flat().iter().all(|&g| g == 0.0));
}

#[test]
fn fresh_model_predicts_zero_and_preserves_shape() {
    for mesh in [primitives::icosphere(3, 1.0), patch50()] {
        let o = ops(&mesh, 20);
        let params = init_params(NetConfig::new(3, 12, 3, 20), 0.01, 9).unwrap();
        let out = forward(&params, random_field(o.n(), 3, 1).view(), 999, &o).unwrap();
        assert_eq!(out.dim(), (o.n(), 3));
        assert!(out.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn forward_is_bitwise_reproducible() {
    let mesh = bumpy_sphere(5, 0.1, 2);
    let o = ops(&mesh, 32);
    let params = random_params(NetConfig::new(3, 16, 2, 32), 0.02, 5);
    let f = random_field(o.n(), 3, 6);
    let a = forward(&params, f.view(), 10, &o).unwrap();
    let b = forward(&params, f.view(), 10, &o).unwrap();
    assert_eq!(a, b);
}

#[test]
fn output_is_invariant_under_rigid_motion() {
    let mesh = bumpy_sphere(4, 0.1, 3);
    let r = rotation([0.3, -1.0, 0.5], 1.1);
    let moved = mesh.map_vertices(|p| {
        let q = apply(&r, p);
        [q[0] + 2.0, q[1] - 1.0, q[2] + 0.5]
    })
    .unwrap();
    let (a, b) = (ops(&mesh, 24), ops(&moved, 24));
    let params = random_params(NetConfig::new(3, 16, 2, 24), 0.02, 7);
    let f = random_field(a.n(), 3, 8);
    let ya = forward(&params, f.view(), 250, &a).unwrap();
    let yb = forward(&params, f.view(), 250, &b).unwrap();
    let worst = (&ya - &yb).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-6, "max deviation {worst:e}");
}

#[test]
fn output_is_permutation_equivariant() {
    let mesh = bumpy_sphere(3, 0.1, 4);
    let n = mesh.n_vertices();
    // perm[new] = old
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let vertices: Vec<[f64; 3]> = perm.iter().map(|&old| mesh.vertices()[old]).collect();
    let faces: Vec<[usize; 3]> = mesh.faces().iter().map(|f| f.map(|v| inv[v])).collect();
    let relabeled = Mesh::new(vertices, faces).unwrap();
    let (a, b) = (ops(&mesh, 20), ops(&relabeled, 20));
    let params = random_params(NetConfig::new(3, 8, 2, 20), 0.02, 9);
    let f = random_field(n, 3, 10);
    let fp = f.select(Axis(0), &perm);
    let ya = forward(&params, f.view(), 40, &a).unwrap();
    let yb = forward(&params, fp.view(), 40, &b).unwrap();
    let worst = (&ya.select(Axis(0), &perm) - &yb).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-8, "max deviation {worst:e}");
}

#[test]
fn forward_rejects_mismatched_field() {
    let o = ops(&primitives::icosphere(2, 1.0), 10);
    let params = init_params(NetConfig::new(3, 4, 1, 10), 0.01, 0).unwrap();
    assert!(forward(&params, random_field(o.n() + 1, 3, 0).view(), 0, &o).is_err());
    assert!(forward(&params, random_field(o.n(), 2, 0).view(), 0, &o).is_err());
}

#[test]
fn gradient_features_examples() {
    let mesh = primitives::grid(8, 8, 0.2);
    let o = ops(&mesh, 10);
    let eye = Array2::eye(2);
    let zero = Array2::zeros((2, 2));
    let constant = Array2::from_elem((o.n(), 2), 0.7);
    let feats = spatial_gradient_features(constant.view(), &o.gradient, &eye, &zero).unwrap();
    assert!(feats.iter().all(|v| v.abs() <= 1e-8));

    // Unit gradient: f = x and f = y.
    let f = Array2::from_shape_fn((o.n(), 2), |(i, c)| mesh.vertices()[i][c]);
    let feats = spatial_gradient_features(f.view(), &o.gradient, &eye, &zero).unwrap();
    for v in feats.iter() {
        assert!((v - 1f64.tanh()).abs() <= 1e-6);
    }
    assert!(spatial_gradient_features(f.view(), &o.gradient, &Array2::eye(3), &zero).is_err());
}
