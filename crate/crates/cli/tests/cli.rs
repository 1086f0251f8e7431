//! End-to-end runs of the `pnppds` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pnppds_cli::imageio::{read_image, write_image};
use pnppds_core::solver::{default_alpha, epsilon_opt, Task};
use pnppds_core::{Image, Rng, Shape};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_pnppds");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawning pnppds")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by a signal")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}\nstderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden16").join(name)
}

fn smooth(shape: Shape) -> Image {
    Image::from_fn(shape, |_, r, c| 0.5 + 0.3 * (r as f64 * 0.4).sin() * (c as f64 * 0.3).cos())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rmse(a: &Image, b: &Image) -> f64 {
    let d = a.sub(b).unwrap();
    (d.norm_sq() / d.len() as f64).sqrt()
}

#[test]
fn noiseless_identity_degradation_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for (name, bits) in [("u8.png", "8"), ("u16.png", "16"), ("u.pgm", "16")] {
        let clean = dir.path().join(name);
        let levels: f64 = if bits == "8" { 255.0 } else { 65535.0 };
        let u: Image = Rng::new(4).uniform_image(Shape::gray(13, 9), 0.0, 1.0);
        let u = u.map(|v| (v * levels).round() / levels);
        write_image(&clean, &u, bits.parse().unwrap()).unwrap();
        let obs = dir.path().join(format!("v_{name}"));
        ok(&["degrade", s(&clean), "--sigma", "0", "--bits", bits, "--out", s(&obs)]);
        assert_eq!(read_image(&obs).unwrap(), read_image(&clean).unwrap(), "{name}");
    }
}

#[test]
fn mask_removes_the_floor_of_the_fraction_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("gray.png");
    let shape = Shape::gray(20, 15);
    write_image(&clean, &Image::from_fn(shape, |_, _, _| 0.5), 16).unwrap();
    let mut bytes = Vec::new();
    for i in 0..2 {
        let obs = dir.path().join(format!("v{i}.pnpd"));
        ok(&["degrade", s(&clean), "--mask-frac", "0.2", "--seed", "9", "--sigma", "0", "--out", s(&obs)]);
        let v = read_image(&obs).unwrap();
        let zeros = v.as_slice().iter().filter(|&&x| x == 0.0).count();
        assert_eq!(zeros, (0.2 * shape.len() as f64).floor() as usize);
        bytes.push(std::fs::read(&obs).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn poisson_counts_average_to_the_scaled_intensity() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("gray.png");
    write_image(&clean, &Image::from_fn(Shape::gray(64, 64), |_, _, _| 0.5), 16).unwrap();
    let obs = dir.path().join("v.pnpd");
    ok(&["degrade", s(&clean), "--eta", "100", "--seed", "2", "--out", s(&obs)]);
    let v = read_image(&obs).unwrap();
    let mean = v.as_slice().iter().sum::<f64>() / v.len() as f64 / 100.0;
    assert!((mean - 0.5).abs() <= 0.02 * 0.5, "mean {mean}");
    assert!(v.as_slice().iter().all(|&c| c >= 0.0 && c.fract() == 0.0));

    // counts do not fit a display format
    let bad = run(&["degrade", s(&clean), "--eta", "100", "--out", s(&dir.path().join("v.png"))]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn noiseless_identity_restoration_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("u.png");
    write_image(&clean, &smooth(Shape::gray(32, 32)), 16).unwrap();
    let obs = dir.path().join("v.pnpd");
    ok(&["degrade", s(&clean), "--sigma", "0", "--out", s(&obs)]);
    let report = dir.path().join("r.json");
    ok(&[
        "restore", s(&obs), "--denoiser", "identity", "--reference", s(&clean), "--report", s(&report),
    ]);
    let psnr = &json(&report)["extra"]["psnr"];
    assert!(psnr == "inf" || psnr.as_f64().unwrap() >= 100.0, "{psnr}");
}

#[test]
fn restores_the_golden_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.pnpd");
    let report = dir.path().join("r.json");
    ok(&[
        "restore",
        s(&fixture("observed.pnpd")),
        "--denoiser",
        "dct-threshold:0.01",
        "--alpha",
        "1",
        "--tol",
        "1e-10",
        "--max-iters",
        "100000",
        "--out",
        s(&out),
        "--report",
        s(&report),
    ]);
    let x = read_image(&out).unwrap();
    let golden = read_image(&fixture("golden.pnpd")).unwrap();
    let e = rmse(&x, &golden);
    assert!(e <= 1e-6, "rmse {e:e}");
    let r = json(&report);
    assert_eq!(r["exit_code"], 0);
    assert!(report.with_extension("csv").exists());
}

#[test]
fn alpha_defaults_to_the_tabulated_value() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("u.png");
    let shape = Shape::gray(32, 32);
    write_image(&clean, &smooth(shape), 16).unwrap();
    for (task, flags) in [(Task::Deblur, ["--kernel", "motion_b"]), (Task::Inpaint, ["--mask-frac", "0.2"])] {
        let obs = dir.path().join("v.pnpd");
        let mut args = vec!["degrade", s(&clean), "--sigma", "0.01", "--out", s(&obs)];
        args.extend(flags);
        ok(&args);
        let report = dir.path().join("r.json");
        let out = run(&["restore", s(&obs), "--max-iters", "5", "--report", s(&report)]);
        assert!(matches!(code(&out), 0 | 2));
        let extra = &json(&report)["extra"];
        let alpha = default_alpha(task, 0.01).unwrap();
        assert_eq!(extra["alpha"].as_f64().unwrap(), alpha);
        let k = match task {
            Task::Deblur => shape.len(),
            Task::Inpaint => shape.len() - (0.2 * shape.len() as f64).floor() as usize,
        };
        let eps = extra["eps"].as_f64().unwrap();
        assert!((eps - alpha * epsilon_opt(0.01, k).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn exit_status_tells_the_outcome_apart() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("u.png");
    write_image(&clean, &smooth(Shape::gray(32, 32)), 16).unwrap();
    let obs = dir.path().join("v.pnpd");
    ok(&["degrade", s(&clean), "--kernel", "motion_b", "--sigma", "0.01", "--out", s(&obs)]);
    let o = s(&obs);

    assert_eq!(code(&run(&["restore", o, "--tol", "0", "--max-iters", "5"])), 2);

    let report = dir.path().join("div.json");
    let div = run(&["restore", o, "--denoiser", "scaled:3", "--report", s(&report)]);
    assert_eq!(code(&div), 3);
    let r = json(&report);
    assert_eq!(r["exit_code"], 3);
    assert!(r["extra"]["x_max"].as_f64().unwrap().is_finite());

    let rejected = run(&["restore", o, "--gamma2", "1.5"]);
    assert_eq!(code(&rejected), 4);
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("--no-strict"));
    assert_ne!(code(&run(&["restore", o, "--gamma2", "1.5", "--no-strict", "--max-iters", "5"])), 4);

    // the tabulated FBS weight for this setting breaks its step condition
    assert_eq!(code(&run(&["restore", o, "--solver", "pnp-fbs"])), 4);

    assert_eq!(code(&run(&["restore", s(&dir.path().join("missing.pnpd"))])), 1);
}

#[test]
fn poisson_observations_restore_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("u.png");
    write_image(&clean, &smooth(Shape::gray(32, 32)), 16).unwrap();
    let obs = dir.path().join("v.pnpd");
    ok(&["degrade", s(&clean), "--kernel", "gaussian_i", "--eta", "100", "--out", s(&obs)]);
    let report = dir.path().join("r.json");
    let out = run(&[
        "restore", s(&obs), "--max-iters", "300", "--reference", s(&clean), "--report", s(&report), "--out",
        s(&dir.path().join("x.png")),
    ]);
    assert!(matches!(code(&out), 0 | 2));
    let extra = json(&report)["extra"].clone();
    assert!(extra["lambda"].as_f64().unwrap() > 0.0);
    assert!(extra["psnr"].as_f64().unwrap() > 15.0);
    assert_eq!(code(&run(&["restore", s(&obs), "--solver", "pds-oracle"])), 1);
}

#[test]
fn runs_are_deterministic_given_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("u.png");
    write_image(&clean, &smooth(Shape::gray(32, 32)), 16).unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let obs = dir.path().join(format!("v{i}.pnpd"));
        ok(&["degrade", s(&clean), "--kernel", "motion_b", "--sigma", "0.02", "--seed", "5", "--out", s(&obs)]);
        let x = dir.path().join(format!("x{i}.pnpd"));
        let _ = run(&["restore", s(&obs), "--denoiser", "dct-threshold", "--max-iters", "50", "--out", s(&x)]);
        outputs.push((std::fs::read(&obs).unwrap(), std::fs::read(&x).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("u.png");
    write_image(&clean, &smooth(Shape::gray(32, 32)), 16).unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"sigma": 0.05, "seed": 3, "kernel": "motion_a"}"#).unwrap();
    let obs = dir.path().join("v.pnpd");
    ok(&["degrade", s(&clean), "--config", s(&cfg), "--sigma", "0.01", "--out", s(&obs)]);
    let side = json(&dir.path().join("v.pnpd.json"));
    assert_eq!(side["degradation"]["seed"], 3);
    assert_eq!(side["degradation"]["noise"]["sigma"], 0.01);
    assert_eq!(side["kernel"], "motion_a");

    std::fs::write(&cfg, r#"{"sigmaa": 0.05}"#).unwrap();
    assert_eq!(code(&run(&["degrade", s(&clean), "--config", s(&cfg), "--out", s(&obs)])), 1);
}

#[test]
fn check_denoiser_separates_firm_from_expansive() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("fne.json");
    ok(&["check-denoiser", "--denoiser", "identity", "--pairs", "100", "--out", s(&report)]);
    assert_eq!(json(&report)["max_ratio"].as_f64().unwrap(), 1.0);

    let out = run(&["check-denoiser", "--denoiser", "scaled:1.5", "--pairs", "100", "--out", s(&report)]);
    assert_ne!(code(&out), 0);
    assert!(json(&report)["max_ratio"].as_f64().unwrap() > 1.0);

    let endpoint = format!("exec:{BIN} serve --denoiser dct-threshold:0.02");
    ok(&["check-denoiser", "--denoiser", "external", "--endpoint", &endpoint, "--pairs", "50"]);
}

#[test]
fn external_denoiser_matches_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("u.png");
    write_image(&clean, &smooth(Shape::gray(32, 32)), 16).unwrap();
    let obs = dir.path().join("v.pnpd");
    ok(&["degrade", s(&clean), "--kernel", "motion_b", "--sigma", "0.01", "--out", s(&obs)]);
    let builtin = dir.path().join("a.pnpd");
    let external = dir.path().join("b.pnpd");
    let common = ["--max-iters", "30", "--tol", "0"];
    let mut a = vec!["restore", s(&obs), "--denoiser", "identity", "--out", s(&builtin)];
    a.extend(common);
    assert_eq!(code(&run(&a)), 2);
    let endpoint = format!("exec:{BIN} serve --denoiser identity");
    let mut b = vec!["restore", s(&obs), "--denoiser", "external", "--endpoint", &endpoint, "--out", s(&external)];
    b.extend(common);
    assert_eq!(code(&run(&b)), 2);
    // the wire format is 32-bit, so only single precision agreement is expected
    let e = rmse(&read_image(&builtin).unwrap(), &read_image(&external).unwrap());
    assert!(e <= 1e-5, "rmse {e:e}");
}

fn opnorm(kernel: &str) -> (f64, f64) {
    let out = ok(&["opnorm", "--kernel", kernel, "--shape", "32x32"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let field = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.rsplit(' ').next().unwrap().parse().unwrap()
    };
    (field("exact"), field("power"))
}

#[test]
fn opnorm_of_simple_and_shipped_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let delta = dir.path().join("delta.txt");
    std::fs::write(&delta, "1 1\n1\n").unwrap();
    let (exact, power) = opnorm(s(&delta));
    assert!((exact - 1.0).abs() <= 1e-12 && (power - 1.0).abs() <= 1e-9);

    let avg = dir.path().join("avg.txt");
    let row = vec![format!("{}", 1.0 / 9.0); 3].join(" ");
    std::fs::write(&avg, format!("3 3\n{row}\n{row}\n{row}\n")).unwrap();
    let (exact, power) = opnorm(s(&avg));
    assert!((exact - 1.0).abs() <= 1e-12 && (power - 1.0).abs() <= 1e-6);

    let (exact, power) = opnorm("motion_a");
    assert!((exact - 1.0).abs() <= 1e-9);
    assert!((power - exact).abs() <= 1e-6 * exact);

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "2 2\n1 x\n").unwrap();
    assert_eq!(code(&run(&["opnorm", "--kernel", s(&bad)])), 1);
}
