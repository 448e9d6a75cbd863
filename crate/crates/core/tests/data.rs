mod common;

use common::*;
use heatgen::data::{
    atlas_to_vertices, bake_image_to_vertices, build_batch, masked_loss, read_sample, write_sample, RgbImage,
    TexturedSample,
};
use heatgen::mesh::primitives;
use ndarray::{s, Array2, Array3};
use rand::{Rng, SeedableRng};

fn sphere_uv(mesh: &heatgen::Mesh) -> Vec<[f64; 2]> {
    mesh.vertices()
        .iter()
        .map(|p| {
            let u = 0.5 + p[1].atan2(p[0]) / (2.0 * std::f64::consts::PI);
            let v = 0.5 + p[2].clamp(-1.0, 1.0).asin() / std::f64::consts::PI;
            [u, v]
        })
        .collect()
}

#[test]
fn constant_image_bakes_to_constant_colors() {
    let mesh = primitives::icosphere(3, 1.0);
    let img = RgbImage::constant(7, 5, [0.5, 0.5, 0.5]);
    let s = bake_image_to_vertices(&img, &sphere_uv(&mesh), &mesh, [1; 32], "gray").unwrap();
    assert!(s.colors.iter().all(|&v| (v - 0.5).abs() < 1e-15));
}

#[test]
fn baking_is_deterministic_and_validates_uv() {
    let mesh = primitives::icosphere(3, 1.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let img = RgbImage::new(
        16,
        12,
        (0..16 * 12)
            .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect(),
    )
    .unwrap();
    let uv = sphere_uv(&mesh);
    let a = bake_image_to_vertices(&img, &uv, &mesh, [2; 32], "r").unwrap();
    let b = bake_image_to_vertices(&img, &uv, &mesh, [2; 32], "r").unwrap();
    assert_eq!(heatgen::data::encode_sample(&a), heatgen::data::encode_sample(&b));

    assert!(bake_image_to_vertices(&img, &uv[1..], &mesh, [2; 32], "r").is_err());
    let mut outside = uv.clone();
    outside[0] = [1.5, -0.2];
    let c = bake_image_to_vertices(&img, &outside, &mesh, [2; 32], "r").unwrap();
    let corner = img.sample_uv(1.0, 0.0);
    for k in 0..3 {
        assert_eq!(c.colors[[0, k]], corner[k]);
    }
}

#[test]
fn atlas_colors_are_convex_combinations() {
    let mesh = bumpy_sphere(3, 0.2, 1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let faces: Vec<[f64; 3]> = (0..mesh.n_faces())
        .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let s = atlas_to_vertices(&faces, &mesh, [0; 32], "shape").unwrap();
    let vf = mesh.vertex_faces();
    for v in 0..mesh.n_vertices() {
        for k in 0..3 {
            let lo = vf[v].iter().map(|&f| faces[f][k]).fold(f64::INFINITY, f64::min);
            let hi = vf[v].iter().map(|&f| faces[f][k]).fold(f64::NEG_INFINITY, f64::max);
            assert!(s.colors[[v, k]] >= lo - 1e-15 && s.colors[[v, k]] <= hi + 1e-15);
        }
    }
    let uniform = atlas_to_vertices(&vec![[0.2, 0.4, 0.6]; mesh.n_faces()], &mesh, [0; 32], "u").unwrap();
    for row in uniform.colors.rows() {
        assert_eq!(row.to_vec(), vec![0.2, 0.4, 0.6]);
    }
}

#[test]
fn masked_loss_equals_mean_of_per_sample_losses() {
    let sizes = [10usize, 20, 7, 31];
    let samples: Vec<TexturedSample> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let c = random_field(n, 3, i as u64).mapv(|v| 0.5 + 0.5 * v);
            TexturedSample::new([i as u8; 32], c, format!("s{i}")).unwrap()
        })
        .collect();
    let refs: Vec<&TexturedSample> = samples.iter().collect();
    let batch = build_batch(&refs, 32).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    // Garbage in the padded region must not matter.
    let pred = Array3::from_shape_simple_fn((4, 32, 3), || rng.random_range(-5.0..5.0));
    let padded = masked_loss(pred.view(), batch.colors.view(), &batch).unwrap();
    let mut per_sample = 0.0;
    for (i, &n) in sizes.iter().enumerate() {
        let diff = &pred.slice(s![i, ..n, ..]) - &samples[i].colors;
        per_sample += diff.mapv(|v| v * v).mean().unwrap();
    }
    per_sample /= sizes.len() as f64;
    assert!((padded - per_sample).abs() <= 1e-12, "{padded} vs {per_sample}");
}

#[test]
fn sample_files_round_trip_at_single_precision() {
    let c = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j) as f64 / 14.0).min(1.0));
    let s = TexturedSample::new([3; 32], c, "face_0001.jpg".into()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.hgtx");
    write_sample(&path, &s).unwrap();
    let back = read_sample(&path).unwrap();
    assert_eq!(back.mesh_id, s.mesh_id);
    assert_eq!(back.source_id, s.source_id);
    for (a, b) in back.colors.iter().zip(s.colors.iter()) {
        assert_eq!(*a, *b as f32 as f64);
    }
}
