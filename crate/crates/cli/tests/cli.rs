use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use heatgen::data::{read_sample, write_sample, TexturedSample};
use heatgen::mesh::{primitives, write_obj, write_ply, Mesh};
use heatgen::spectral::operator_cache_key;
use ndarray::Array2;

fn heatgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatgen"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = heatgen(args);
    assert!(
        out.status.success(),
        "heatgen {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn sphere_uv(mesh: &Mesh) -> Vec<[f64; 2]> {
    use std::f64::consts::PI;
    mesh.vertices()
        .iter()
        .map(|p| [0.5 + p[1].atan2(p[0]) / (2.0 * PI), 0.5 + p[2].clamp(-1.0, 1.0).asin() / PI])
        .collect()
}

fn write_uv(path: &Path, uv: &[[f64; 2]]) {
    let text: String = uv.iter().map(|[u, v]| format!("{u} {v}\n")).collect();
    std::fs::write(path, format!("# u v per vertex\n{text}")).unwrap();
}

fn write_images(dir: &Path, count: u32) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..count {
        let img = image::RgbImage::from_fn(32, 32, |x, y| {
            let phase = i as f32 * 0.8;
            image::Rgb([
                (127.0 + 100.0 * (x as f32 / 5.0 + phase).sin()) as u8,
                (127.0 + 100.0 * (y as f32 / 7.0 - phase).cos()) as u8,
                (40 + 25 * i) as u8,
            ])
        });
        img.save(dir.join(format!("img{i}.png"))).unwrap();
    }
}

/// Vertex colours of a binary PLY written by `heatgen export`.
fn ply_colors(path: &Path) -> Vec<[u8; 3]> {
    let bytes = std::fs::read(path).unwrap();
    let marker = b"end_header\n";
    let start = bytes.windows(marker.len()).position(|w| w == marker).unwrap() + marker.len();
    let header = std::str::from_utf8(&bytes[..start]).unwrap();
    let n: usize = header
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(header.contains("property uchar red"));
    (0..n)
        .map(|i| {
            let o = start + i * 27 + 24;
            [bytes[o], bytes[o + 1], bytes[o + 2]]
        })
        .collect()
}

#[test]
fn end_to_end_pipeline() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mesh = primitives::icosphere(7, 1.0);
    assert!((450..=550).contains(&mesh.n_vertices()));
    let mesh_path = dir.join("sphere.obj");
    write_obj(&mesh_path, &mesh).unwrap();
    write_uv(&dir.join("sphere.uv"), &sphere_uv(&mesh));
    write_images(&dir.join("images"), 8);
    let (cache, data, run) = (dir.join("cache"), dir.join("data"), dir.join("run"));

    let first = ok(&["precompute", "--mesh", &s(&mesh_path), "--k", "48", "--cache", &s(&cache)]);
    assert!(first.contains("wrote"), "{first}");
    let again = ok(&["precompute", "--mesh", &s(&mesh_path), "--k", "48", "--cache", &s(&cache)]);
    assert!(again.contains("skipped (cached)"), "{again}");

    ok(&[
        "bake", "--images", &s(&dir.join("images")), "--uv", &s(&dir.join("sphere.uv")), "--mesh", &s(&mesh_path), "--k", "48",
        "--out", &s(&data),
    ]);
    assert_eq!(std::fs::read_dir(&data).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "hgtx")).count(), 8);

    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        "data = \"data\"\ncache = \"cache\"\nrun_dir = \"run\"\nk = 48\nwidth = 24\nblocks = 2\nbatch_size = 8\nlr = 0.01\nepochs = 400\nmax_steps = 200\ncheckpoint_every = 100\n",
    )
    .unwrap();
    ok(&["train", "--config", &s(&config)]);
    let snapshot = std::fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(snapshot.contains("max_steps = 200") && snapshot.contains("epochs = 400"), "{snapshot}");
    let log = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    assert!(log.starts_with("step,wall_time_s,loss\n"));
    assert_eq!(log.lines().count(), 201);
    assert!(run.join("checkpoints/step_00000100.hgck").is_file());
    assert!(run.join("checkpoints/step_00000200.hgck").is_file());

    let gen = dir.join("gen");
    ok(&[
        "sample", "--ckpt", &s(&run.join("final.hgck")), "--mesh", &s(&mesh_path), "--count", "2", "--seed", "1", "--cache",
        &s(&cache), "--out", &s(&gen),
    ]);
    let report = ok(&["eval", "--ref", &s(&data), "--gen", &s(&gen), "--cache", &s(&cache), "--out", &s(&dir.join("eval.csv"))]);
    assert!(report.contains("mmd:") && report.contains("cov_percent:"), "{report}");
    let csv = std::fs::read_to_string(dir.join("eval.csv")).unwrap();
    assert!(csv.starts_with("mmd,cov_percent,"), "{csv}");
    // Distances need only the mesh when no cache is at hand.
    let via_mesh = ok(&["eval", "--ref", &s(&data), "--gen", &s(&gen), "--mesh", &s(&mesh_path), "--k", "48"]);
    assert_eq!(via_mesh, report);

    ok(&["export", "--field", &s(&gen.join("sample_0000.hgtx")), "--mesh", &s(&mesh_path), "--out", &s(&dir.join("s.ply"))]);
    assert_eq!(ply_colors(&dir.join("s.ply")).len(), mesh.n_vertices());
    assert!(start.elapsed().as_secs() < 300, "pipeline took {:?}", start.elapsed());
}

#[test]
fn export_of_constant_red_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = primitives::icosphere(2, 1.0);
    let mesh_path = tmp.path().join("m.ply");
    write_ply(&mesh_path, &mesh, None).unwrap();
    let red = Array2::from_shape_fn((mesh.n_vertices(), 3), |(_, c)| if c == 0 { 1.0 } else { 0.0 });
    let field = tmp.path().join("red.hgtx");
    write_sample(&field, &TexturedSample::new(operator_cache_key(&mesh, 128), red, "red".into()).unwrap()).unwrap();
    let out = tmp.path().join("red.ply");
    ok(&["export", "--field", &s(&field), "--mesh", &s(&mesh_path), "--out", &s(&out)]);
    let colors = ply_colors(&out);
    assert_eq!(colors.len(), mesh.n_vertices());
    assert!(colors.iter().all(|&c| c == [255, 0, 0]));
}

#[test]
fn precompute_reports_failures_without_aborting() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.obj");
    write_obj(&good, &primitives::icosphere(2, 1.0)).unwrap();
    let bad = tmp.path().join("bad.obj");
    std::fs::write(&bad, "v 0 0 0\nv 1 0 0\nf 1 2 7\n").unwrap();
    let cache = tmp.path().join("cache");
    let out = heatgen(&["precompute", "--mesh", &s(&bad), &s(&good), "--k", "8", "--cache", &s(&cache)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("bad.obj: failed"), "{stdout}");
    assert!(stdout.contains("good.obj: wrote"), "{stdout}");
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
}

#[test]
fn exit_codes_follow_error_category() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.hgtx");
    let out = heatgen(&["export", "--field", &s(&missing), "--mesh", "x.ply", "--out", "y.ply"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.hgtx"));
    assert_eq!(heatgen(&["train", "--no-such-flag"]).status.code(), Some(2));
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "precision = \"f32\"\n").unwrap();
    assert_eq!(heatgen(&["train", "--config", &s(&cfg)]).status.code(), Some(2));
}

fn small_dataset(dir: &Path) -> (PathBuf, String, String) {
    let mesh = primitives::icosphere(3, 1.0);
    let mesh_path = dir.join("m.ply");
    write_ply(&mesh_path, &mesh, None).unwrap();
    let key = operator_cache_key(&mesh, 12);
    for i in 0..3 {
        let c = Array2::from_shape_fn((mesh.n_vertices(), 3), |(v, ch)| 0.5 + 0.4 * ((v * (ch + 1) + i) as f64).sin());
        write_sample(&dir.join("data").join(format!("f{i}.hgtx")), &TexturedSample::new(key, c, format!("f{i}")).unwrap()).unwrap();
    }
    let cache = s(&dir.join("cache"));
    ok(&["precompute", "--mesh", &s(&mesh_path), "--k", "12", "--cache", &cache]);
    (mesh_path, s(&dir.join("data")), cache)
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, data, cache) = small_dataset(tmp.path());
    let common = ["--data", &data, "--cache", &cache, "--k", "12", "--width", "8", "--blocks", "1", "--batch-size", "2", "--checkpoint-every", "3"];
    let straight = s(&tmp.path().join("straight"));
    let resumed = s(&tmp.path().join("resumed"));
    ok(&[&["train", "--run-dir", &straight, "--max-steps", "7"][..], &common].concat());
    ok(&[&["train", "--run-dir", &resumed, "--max-steps", "3"][..], &common].concat());
    ok(&[&["train", "--run-dir", &resumed, "--max-steps", "7", "--resume"][..], &common].concat());
    let a = std::fs::read(Path::new(&straight).join("final.hgck")).unwrap();
    let b = std::fs::read(Path::new(&resumed).join("final.hgck")).unwrap();
    assert!(a == b, "resumed run diverged");
    let log = std::fs::read_to_string(Path::new(&resumed).join("loss.csv")).unwrap();
    let steps: Vec<&str> = log.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["0", "1", "2", "3", "4", "5", "6"]);
}

#[test]
fn sampling_is_reproducible_and_seed_dependent() {
    let tmp = tempfile::tempdir().unwrap();
    let (mesh_path, data, cache) = small_dataset(tmp.path());
    let run = s(&tmp.path().join("run"));
    ok(&["train", "--data", &data, "--cache", &cache, "--run-dir", &run, "--k", "12", "--width", "8", "--blocks", "1", "--max-steps", "2"]);
    let ckpt = s(&Path::new(&run).join("final.hgck"));
    let draw = |seed: &str, out: &str| {
        let out = tmp.path().join(out);
        ok(&["sample", "--ckpt", &ckpt, "--mesh", &s(&mesh_path), "--count", "2", "--seed", seed, "--out", &s(&out), "--cache", &cache]);
        std::fs::read(out.join("sample_0001.hgtx")).unwrap()
    };
    let (a, b, c) = (draw("5", "a"), draw("5", "b"), draw("6", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let sample = read_sample(&tmp.path().join("a/sample_0000.hgtx")).unwrap();
    assert!(sample.colors.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn training_rejects_samples_without_operator_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, data, _) = small_dataset(tmp.path());
    let empty = s(&tmp.path().join("empty_cache"));
    std::fs::create_dir_all(&empty).unwrap();
    let out = heatgen(&["train", "--data", &data, "--cache", &empty, "--run-dir", &s(&tmp.path().join("r")), "--k", "12", "--max-steps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("heatgen precompute"));
}
