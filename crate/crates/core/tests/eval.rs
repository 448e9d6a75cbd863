mod common;

use common::*;
use heatgen::eval::{compute_mmd_cov, distance_matrix, field_distance};
use ndarray::Array2;

fn fields(count: usize, n: usize, seed: u64) -> Vec<Array2<f64>> {
    (0..count).map(|i| random_field(n, 3, seed * 100 + i as u64)).collect()
}

fn mass(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 + (i % 7) as f64 * 0.1).collect()
}

/// Direct evaluation over all pairs, written without the library's matrix.
fn brute_force(reference: &[Array2<f64>], generated: &[Array2<f64>], m: &[f64]) -> (f64, f64) {
    let d = |a: &Array2<f64>, b: &Array2<f64>| {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..a.nrows() {
            let mut s = 0.0;
            for c in 0..a.ncols() {
                s += (a[[i, c]] - b[[i, c]]).powi(2);
            }
            num += m[i] * s;
            den += m[i];
        }
        (num / den).sqrt()
    };
    let mut mmd = 0.0;
    for r in reference {
        mmd += generated.iter().map(|g| d(r, g)).fold(f64::INFINITY, f64::min);
    }
    mmd /= reference.len() as f64;
    let mut hit = vec![false; reference.len()];
    for g in generated {
        let mut best = 0;
        for (i, r) in reference.iter().enumerate() {
            if d(r, g) < d(&reference[best], g) {
                best = i;
            }
        }
        hit[best] = true;
    }
    (mmd, 100.0 * hit.iter().filter(|&&h| h).count() as f64 / reference.len() as f64)
}

fn views(v: &[Array2<f64>]) -> Vec<ndarray::ArrayView2<'_, f64>> {
    v.iter().map(|a| a.view()).collect()
}

#[test]
fn matches_brute_force_on_small_sets() {
    for size in 1..=10 {
        let r = fields(size, 30, 1 + size as u64);
        let g = fields(size, 30, 50 + size as u64);
        let m = mass(30);
        let ours = compute_mmd_cov(&views(&r), &views(&g), &m).unwrap();
        let (mmd, cov) = brute_force(&r, &g, &m);
        assert_eq!(ours.mmd, mmd);
        assert_eq!(ours.cov_percent, cov);
    }
}

#[test]
fn identical_sets_are_perfect() {
    let r = fields(6, 20, 3);
    let res = compute_mmd_cov(&views(&r), &views(&r), &mass(20)).unwrap();
    assert_eq!(res.mmd, 0.0);
    assert_eq!(res.cov_percent, 100.0);
}

#[test]
fn permutation_and_copy_properties() {
    let r = fields(7, 25, 4);
    let mut g = fields(7, 25, 5);
    let m = mass(25);
    let base = compute_mmd_cov(&views(&r), &views(&g), &m).unwrap();
    let mut rr = r.clone();
    rr.reverse();
    g.rotate_left(3);
    let permuted = compute_mmd_cov(&views(&rr), &views(&g), &m).unwrap();
    assert!((base.mmd - permuted.mmd).abs() < 1e-15);
    assert_eq!(base.cov_percent, permuted.cov_percent);

    let mut more = g.clone();
    more.push(r[2].clone());
    let with_copy = compute_mmd_cov(&views(&r), &views(&more), &m).unwrap();
    assert!(with_copy.cov_percent >= base.cov_percent);
    assert!(with_copy.mmd <= base.mmd);
}

#[test]
fn distance_is_a_metric() {
    let f = fields(3, 40, 6);
    let m = mass(40);
    let d = |a: usize, b: usize| field_distance(f[a].view(), f[b].view(), &m).unwrap();
    assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-15);
    assert_eq!(d(0, 1), d(1, 0));
    let mat = distance_matrix(&views(&f), &views(&f), &m).unwrap();
    for i in 0..3 {
        assert_eq!(mat.0[[i, i]], 0.0);
    }
    assert!(field_distance(f[0].view(), f[1].view(), &m[1..]).is_err());
}
