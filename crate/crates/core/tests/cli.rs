use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ktsecret::io::{load_complex, load_real};
use ktsecret::metrics::METRICS_HEADER;

const SUBCOMMANDS: [&str; 12] = [
    "phantom",
    "mask",
    "corrupt",
    "recon-zf",
    "recon-cs",
    "train-modl",
    "train-secret",
    "recon-nn",
    "quantify",
    "evaluate",
    "profile",
    "pipeline",
];

fn ktsecret(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ktsecret"))
        .args(args)
        .env("KTSECRET_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ktsecret(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn minimal_config(out: &Path, accel: &str, method: &str) -> String {
    format!(
        r#"{{"seed": 5, "phantom": {{"h": 32, "w": 32, "t": 8, "seed": 9}},
            "mask": {{"accel": {accel}, "seed": 2}}, "method": {method},
            "method-params": {{"secret": {{"epochs": 2, "lr": 0.001, "base_channels": 4}},
                               "modl": {{"epochs": 2, "base_channels": 4}},
                               "training": {{"n_train": 2, "n_val": 1}}}},
            "output-dir": "{}"}}"#,
        p(out)
    )
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

#[test]
fn every_subcommand_is_documented_with_a_seed_flag() {
    let top = ok(&["--help"]);
    for sub in SUBCOMMANDS {
        assert!(top.contains(sub), "top-level help lacks {sub}");
        let help = ok(&[sub, "--help"]);
        assert!(help.contains("--seed"), "{sub} --help lacks --seed");
        assert!(
            help.contains("KTSECRET_THREADS"),
            "{sub} --help lacks the thread variable"
        );
    }
}

#[test]
fn minimal_zero_filled_run_writes_the_documented_file_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(dir.path(), &minimal_config(&out, "6", "\"zf\""));
    ok(&["pipeline", "--config", p(&cfg)]);
    let expected: BTreeSet<String> = [
        "config.json",
        "phantom.json",
        "reference.ktsr",
        "aif.ktsr",
        "labels.ktsr",
        "ktrans_true.ktsr",
        "vp_true.ktsr",
        "mask_R6.ktsr",
        "kspace_R6.ktsr",
        "recon_zf_R6.ktsr",
        "ktrans_zf_R6.ktsr",
        "panel_zf_R6.pgm",
        "ktrans_zf_R6.pgm",
        "metrics.csv",
        "metrics_frames.csv",
        "convergence.csv",
        "quantify.csv",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    assert_eq!(listing(&out), expected);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some(METRICS_HEADER));
    assert_eq!(metrics.lines().count(), 2);
    assert_eq!(
        fs::read_to_string(out.join("metrics_frames.csv"))
            .unwrap()
            .lines()
            .count(),
        9
    );
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let cfg = write_config(
            dir.path(),
            &minimal_config(out, "10", r#"["zf", "cs", "secret", "modl"]"#),
        );
        ok(&["pipeline", "--config", p(&cfg)]);
    }
    let names = listing(&a);
    assert_eq!(names, listing(&b));
    for name in names
        .iter()
        .filter(|n| n.ends_with(".ktsr") || n.ends_with(".pgm") || n.starts_with("metrics"))
    {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn acceleration_sweep_writes_one_row_per_method_and_factor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = write_config(
        dir.path(),
        &minimal_config(&out, "[3, 6, 10]", r#"["zf", "cs"]"#),
    );
    ok(&["pipeline", "--config", p(&cfg)]);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    for method in ["zf", "cs"] {
        let accels: Vec<&str> = metrics
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(&format!("{method},")))
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(accels, ["3", "6", "10"], "{method}");
    }
    let conv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(conv.lines().skip(1).all(|l| l.starts_with("cs,")));
    assert!(conv.lines().count() > 3);
}

#[test]
fn unknown_config_keys_fail_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let body = minimal_config(&dir.path().join("x"), "6", "\"zf\"")
        .replace("\"seed\": 5", "\"seed\": 5, \"colour\": 1");
    let cfg = write_config(dir.path(), &body);
    let out = ktsecret(&["pipeline", "--config", p(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn stage_commands_chain_and_are_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["phantom", "--out", p(&d("ph")), "--seed", "3"]);
    ok(&[
        "mask",
        "--accel",
        "10",
        "--out",
        p(&d("m1.ktsr")),
        "--seed",
        "4",
    ]);
    ok(&[
        "mask",
        "--accel",
        "10",
        "--out",
        p(&d("m2.ktsr")),
        "--seed",
        "4",
    ]);
    ok(&[
        "mask",
        "--accel",
        "10",
        "--out",
        p(&d("m3.ktsr")),
        "--seed",
        "5",
    ]);
    assert_eq!(
        fs::read(d("m1.ktsr")).unwrap(),
        fs::read(d("m2.ktsr")).unwrap()
    );
    assert_ne!(
        fs::read(d("m1.ktsr")).unwrap(),
        fs::read(d("m3.ktsr")).unwrap()
    );

    for k in ["k1", "k2"] {
        let out = d(&format!("{k}.ktsr"));
        ok(&[
            "corrupt",
            "--phantom",
            p(&d("ph")),
            "--mask",
            p(&d("m1.ktsr")),
            "--noise",
            "0.01",
            "--out",
            p(&out),
            "--seed",
            "8",
        ]);
    }
    assert_eq!(
        fs::read(d("k1.ktsr")).unwrap(),
        fs::read(d("k2.ktsr")).unwrap()
    );

    let (k1, m1) = (d("k1.ktsr"), d("m1.ktsr"));
    let kin = ["--kspace", p(&k1), "--mask", p(&m1)];
    ok(&[&["recon-zf"][..], &kin, &["--out", p(&d("zf.ktsr"))]].concat());
    ok(&[
        &["recon-cs"][..],
        &kin,
        &[
            "--l1",
            "1e-3",
            "--l2",
            "5e-3",
            "--iters",
            "20",
            "--out",
            p(&d("cs.ktsr")),
        ],
    ]
    .concat());
    ok(&[
        "train-secret",
        "--data",
        &format!("{}:{}", p(&d("k1.ktsr")), p(&d("m1.ktsr"))),
        "--epochs",
        "2",
        "--base-channels",
        "4",
        "--out",
        p(&d("net")),
    ]);
    ok(&[
        &["recon-nn", "--model", p(&d("net"))][..],
        &kin,
        &["--out", p(&d("nn.ktsr"))],
    ]
    .concat());
    let q = ok(&[
        "quantify",
        "--recon",
        p(&d("cs.ktsr")),
        "--phantom",
        p(&d("ph")),
        "--out",
        p(&d("kt.ktsr")),
    ]);
    assert!(q.starts_with("ktrans_nrmse "));
    let eval = ok(&[
        "evaluate",
        "--recon",
        p(&d("zf.ktsr")),
        p(&d("cs.ktsr")),
        p(&d("nn.ktsr")),
        "--method",
        "zf",
        "cs",
        "secret",
        "--reference",
        p(&d("ph/reference.ktsr")),
        "--accel",
        "10",
    ]);
    let rows: Vec<&str> = eval.lines().collect();
    assert_eq!(rows[0], METRICS_HEADER);
    assert_eq!(rows.len(), 4);
    let psnr = |row: &str| row.split(',').nth(4).unwrap().parse::<f64>().unwrap();
    assert!(psnr(rows[2]) > psnr(rows[1]), "CS should beat zero-filling");
}

#[test]
fn zero_filled_psnr_at_ten_fold_is_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["phantom", "--out", p(&d("ph")), "--seed", "0"]);
    ok(&[
        "mask",
        "--accel",
        "10",
        "--out",
        p(&d("m.ktsr")),
        "--seed",
        "0",
    ]);
    ok(&[
        "corrupt",
        "--phantom",
        p(&d("ph")),
        "--mask",
        p(&d("m.ktsr")),
        "--out",
        p(&d("k.ktsr")),
    ]);
    ok(&[
        "recon-zf",
        "--kspace",
        p(&d("k.ktsr")),
        "--mask",
        p(&d("m.ktsr")),
        "--out",
        p(&d("zf.ktsr")),
    ]);
    let eval = ok(&[
        "evaluate",
        "--recon",
        p(&d("zf.ktsr")),
        "--reference",
        p(&d("ph/reference.ktsr")),
    ]);
    let psnr: f64 = eval
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(4)
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (psnr - PINNED_ZF_PSNR).abs() < 0.1,
        "zero-filled PSNR {psnr}"
    );
}

const PINNED_ZF_PSNR: f64 = 21.093834;

#[test]
fn profile_strips_match_container_magnitudes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["phantom", "--out", p(&d("ph")), "--seed", "1"]);
    ok(&["mask", "--accel", "6", "--out", p(&d("m.ktsr"))]);
    ok(&[
        "corrupt",
        "--phantom",
        p(&d("ph")),
        "--mask",
        p(&d("m.ktsr")),
        "--out",
        p(&d("k.ktsr")),
    ]);
    ok(&[
        "recon-zf",
        "--kspace",
        p(&d("k.ktsr")),
        "--mask",
        p(&d("m.ktsr")),
        "--out",
        p(&d("zf.ktsr")),
    ]);
    let (r, z) = (d("ph/reference.ktsr"), d("zf.ktsr"));
    ok(&[
        "profile",
        "--input",
        p(&r),
        p(&z),
        "--row",
        "16",
        "--pgm",
        p(&d("x.pgm")),
        "--csv",
        p(&d("x.csv")),
    ]);

    let pgm = fs::read(d("x.pgm")).unwrap();
    // Two 32-pixel-high strips of 8 frames each with a one-pixel gutter.
    assert!(pgm.starts_with(b"P5\n17 32\n255\n"));
    let csv = fs::read_to_string(d("x.csv")).unwrap();
    let zf = load_complex(&z).unwrap();
    let mut checked = 0;
    for line in csv.lines().skip(1).filter(|l| l.starts_with(p(&z))) {
        let f: Vec<&str> = line.rsplitn(4, ',').collect();
        let (value, x, frame): (f64, usize, usize) = (
            f[0].parse().unwrap(),
            f[1].parse().unwrap(),
            f[2].parse().unwrap(),
        );
        let expect = zf.frame(frame)[16 * 32 + x].norm();
        assert!((value - expect).abs() <= 1e-12 * expect.max(1.0));
        checked += 1;
    }
    assert_eq!(checked, 8 * 32);

    let single = ktsecret(&[
        "profile",
        "--input",
        p(&r),
        "--row",
        "1",
        "--pgm",
        p(&d("y.pgm")),
        "--csv",
        p(&d("y.csv")),
    ]);
    assert!(!single.status.success());
    let out_of_range = ktsecret(&[
        "profile",
        "--input",
        p(&r),
        p(&z),
        "--row",
        "32",
        "--pgm",
        p(&d("y.pgm")),
        "--csv",
        p(&d("y.csv")),
    ]);
    assert!(!out_of_range.status.success());
}

#[test]
fn mask_container_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.ktsr");
    ok(&[
        "mask",
        "--accel",
        "3",
        "--h",
        "64",
        "--w",
        "64",
        "--t",
        "4",
        "--out",
        p(&m),
    ]);
    let (shape, bits) = load_real(&m).unwrap();
    assert_eq!(shape, [4, 64, 64]);
    let ones = bits.iter().filter(|&&b| b == 1.0).count();
    assert!(bits.iter().all(|&b| b == 0.0 || b == 1.0));
    let achieved = bits.len() as f64 / ones as f64;
    assert!((achieved - 3.0).abs() <= 0.45);
}
