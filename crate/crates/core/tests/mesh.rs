mod common;

use common::*;
use heatgen::mesh::{compute_vertex_normals, load_mesh, primitives, write_obj, write_ply, Mesh};
use proptest::prelude::*;

#[test]
fn round_trips_through_ply_and_obj() {
    let mesh = bumpy_sphere(4, 0.2, 1);
    let dir = tempfile::tempdir().unwrap();
    for name in ["m.ply", "m.obj"] {
        let path = dir.path().join(name);
        if name.ends_with("ply") {
            write_ply(&path, &mesh, None).unwrap();
        } else {
            write_obj(&path, &mesh).unwrap();
        }
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.faces(), mesh.faces());
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            assert!((0..3).all(|c| (a[c] - b[c]).abs() <= 1e-6));
        }
    }
}

#[test]
fn icosphere_normals_are_radial() {
    let mesh = primitives::icosphere(6, 1.0);
    let normals = compute_vertex_normals(&mesh).unwrap();
    for (n, p) in normals.iter().zip(mesh.vertices()) {
        let cos = n[0] * p[0] + n[1] * p[1] + n[2] * p[2];
        assert!(cos.clamp(-1.0, 1.0).acos().to_degrees() < 2.0);
    }
}

#[test]
fn tetrahedron_is_closed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.obj");
    std::fs::write(&path, "v 1 1 1\nv -1 -1 1\nv -1 1 -1\nv 1 -1 -1\nf 1 2 3\nf 1 4 2\nf 1 3 4\nf 2 4 3\n").unwrap();
    let m = load_mesh(&path).unwrap();
    assert_eq!((m.n_vertices(), m.n_faces()), (4, 4));
    assert!(m.edge_face_counts().values().all(|&c| c == 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn area_and_normals_follow_rigid_motion(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0,
        angle in -3.0f64..3.0,
        t in proptest::array::uniform3(-5.0f64..5.0),
        seed in 0u64..1000,
    ) {
        let mesh = bumpy_sphere(3, 0.2, seed);
        let r = rotation([ax, ay, az], angle);
        let moved: Mesh = mesh.map_vertices(|p| {
            let q = apply(&r, p);
            [q[0] + t[0], q[1] + t[1], q[2] + t[2]]
        }).unwrap();
        let (a, b) = (mesh.total_area(), moved.total_area());
        prop_assert!((a - b).abs() <= 1e-9 * a);
        prop_assert!((mesh.face_areas().iter().sum::<f64>() - a).abs() <= 1e-12 * a);
        let na = compute_vertex_normals(&mesh).unwrap();
        let nb = compute_vertex_normals(&moved).unwrap();
        for (x, y) in na.iter().zip(&nb) {
            let rx = apply(&r, *x);
            prop_assert!((0..3).all(|c| (rx[c] - y[c]).abs() <= 1e-9));
        }
    }
}
