use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use l1tensor::format::{BasisFile, Encoding};
use l1tensor::randbits::reference_seed_bytes;
use l1tensor::{BlockShape, SubspaceBasis};
use serde_json::{json, Value};

const CALIBRATED: &[&str] = &["--c1", "0.73", "--c2", "0.73"];
const FAST: &[&str] = &["--samples", "2000", "--restarts", "2", "--iters", "40"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1tensor"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn construct_args<'a>(seed: &'a str, out: &'a str) -> Vec<&'a str> {
    let mut args = vec![
        "construct",
        "--N",
        "8192",
        "--eps",
        "0.5",
        "--gamma",
        "0.5",
        "--seed-file",
        seed,
        "--out",
        out,
    ];
    args.extend_from_slice(CALIBRATED);
    args.extend_from_slice(FAST);
    args
}

fn write_seed(dir: &Path, index: u64) -> String {
    let path = dir.join(format!("seed{index}.bin"));
    fs::write(&path, reference_seed_bytes(index, 1 << 12)).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn plan_reports_schedule() {
    let out = run(&["plan", "--N", "1024", "--eps", "0.5", "--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains(r#""k":2"#) && text.contains(r#""B":2"#),
        "{text}"
    );

    let mut args = vec!["plan", "--N", "1024", "--eps", "0.5", "--gamma", "0.5"];
    args.extend_from_slice(CALIBRATED);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains(r#""k":2"#) && text.contains(r#""B":2"#),
        "{text}"
    );
}

#[test]
fn plan_golden() {
    let mut args = vec!["plan", "--N", "8192", "--eps", "0.5", "--gamma", "0.5"];
    args.extend_from_slice(CALIBRATED);
    let v = stdout_json(&run(&args));
    for (key, want) in [
        ("k", json!(2)),
        ("B", json!(2)),
        ("beta", json!(4)),
        ("n", json!(19)),
        ("n_prime", json!(22)),
        ("m", json!(3)),
        ("t", json!(16)),
        ("n_final", json!(7942)),
        ("predicted_dim", json!(9)),
        ("predicted_bits", json!(3232)),
        ("budget_bits", json!(61440)),
        ("predicted_ratio_lower", json!(0.0625)),
        ("schema", json!(1)),
        ("feasible", json!(true)),
    ] {
        assert_eq!(v[key], want, "{key}");
    }
}

#[test]
fn usage_and_domain_errors_exit_64() {
    for args in [
        &["plan", "--N", "1024", "--eps", "0.5", "--gamma", "1.0"][..],
        &["plan", "--N", "15", "--eps", "0.5", "--gamma", "0.5"],
        &["plan", "--N", "1024", "--eps", "1.5", "--gamma", "0.5"],
        &["plan", "--N", "many", "--eps", "0.5", "--gamma", "0.5"],
        &["plan", "--eps", "0.5"],
        &["frobnicate"],
        &["mean-norm", "--n", "0", "--B", "1"],
    ] {
        assert_eq!(run(args).status.code(), Some(64), "{args:?}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn construct_is_deterministic_and_verifiable() {
    let dir = tempfile::tempdir().unwrap();
    let seed = write_seed(dir.path(), 0);
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    let out = run(&construct_args(&seed, a.to_str().unwrap()));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = stdout_json(&out);
    assert_eq!(summary["bits_consumed"], json!(3232));
    assert_eq!(summary["bits_available"], json!(1 << 15));
    assert_eq!(summary["dim"], json!(9));
    assert_eq!(
        run(&construct_args(&seed, b.to_str().unwrap()))
            .status
            .code(),
        Some(0)
    );
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let file = BasisFile::read(&a).unwrap();
    assert_eq!((file.header.n, file.header.b, file.header.m), (8192, 1, 9));
    assert_eq!(file.header.bits_consumed, 3232);

    let out = run(&["verify", "--basis", a.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert_eq!(stdout_json(&out)["ok"], json!(true));

    // Corrupt one payload coordinate.
    let mut bytes = fs::read(&a).unwrap();
    let last = bytes.len() - 8 * 8192 + 7;
    bytes[last] ^= 0x80;
    fs::write(&b, bytes).unwrap();
    let out = run(&["verify", "--basis", b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["ok"], json!(false));
}

#[test]
fn csv_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let seed = write_seed(dir.path(), 1);
    let bin = dir.path().join("x.bin");
    let csv = dir.path().join("x.csv");
    assert_eq!(
        run(&construct_args(&seed, bin.to_str().unwrap()))
            .status
            .code(),
        Some(0)
    );
    let mut args = construct_args(&seed, csv.to_str().unwrap());
    args.extend_from_slice(&["--format", "csv"]);
    assert_eq!(run(&args).status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# {"));
    let a = BasisFile::read(&bin).unwrap();
    let b = BasisFile::read(&csv).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.to_bytes(Encoding::Bin).unwrap(), fs::read(&bin).unwrap());
}

#[test]
fn short_seed_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let seed = write_seed(dir.path(), 2);
    let out_path = dir.path().join("never.bin");
    let mut args = construct_args(&seed, out_path.to_str().unwrap());
    args.extend_from_slice(&["--seed-bits", "3231"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(
        (v["needed"].clone(), v["available"].clone()),
        (json!(3232), json!(3231))
    );
    assert!(!out_path.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);

    let out = run(&[
        "construct",
        "--N",
        "8192",
        "--eps",
        "0.5",
        "--gamma",
        "0.5",
        "--c1",
        "0.73",
        "--c2",
        "0.73",
        "--seed-hex",
        "deadbeef",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["available"], json!(32));
}

#[test]
fn infeasible_construct_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let seed = write_seed(dir.path(), 3);
    let out_path = dir.path().join("x.bin");
    let out = run(&[
        "construct",
        "--N",
        "1000000",
        "--eps",
        "0.5",
        "--gamma",
        "0.5",
        "--seed-file",
        &seed,
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["binding"], json!("base_dimension"));
    assert!(v["suggested_c2"].as_f64().unwrap() > 0.05);
    assert!(!out_path.exists());
}

fn write_basis(dir: &Path, name: &str, n: usize, columns: &[Vec<f64>]) -> String {
    let basis = SubspaceBasis::from_columns(BlockShape::scalar(n).unwrap(), columns).unwrap();
    let path = dir.join(name);
    BasisFile::new(basis, 1.0, 0, json!({}))
        .write(&path, Encoding::Bin)
        .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn estimate_known_subspaces() {
    let dir = tempfile::tempdir().unwrap();
    let ones = write_basis(dir.path(), "ones.bin", 4, &[vec![0.5; 4]]);
    let spike = write_basis(dir.path(), "spike.bin", 4, &[vec![1.0, 0.0, 0.0, 0.0]]);
    let two = write_basis(
        dir.path(),
        "two.bin",
        4,
        &[vec![0.5; 4], vec![0.5, 0.5, -0.5, -0.5]],
    );

    let v = stdout_json(&run(&["estimate", "--basis", &ones, "--samples", "100"]));
    assert!((v["estimate"]["lambda_hat"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let v = stdout_json(&run(&[
        "estimate",
        "--basis",
        &spike,
        "--samples",
        "100",
        "--grid",
        "0.001",
    ]));
    assert_eq!(v["grid"]["lambda_hat"], json!(0.5));
    let v = stdout_json(&run(&[
        "estimate",
        "--basis",
        &two,
        "--samples",
        "1000",
        "--grid",
        "0.001",
    ]));
    let g = v["grid"]["lambda_hat"].as_f64().unwrap();
    assert!((g - 0.5f64.sqrt()).abs() <= 1e-3, "{g}");
    assert_eq!(v["grid"]["method"], json!("grid"));

    let a = run(&[
        "estimate",
        "--basis",
        &two,
        "--samples",
        "500",
        "--key",
        "3",
    ]);
    let b = run(&[
        "estimate",
        "--basis",
        &two,
        "--samples",
        "500",
        "--key",
        "3",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn grid_on_large_subspace_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cols: Vec<Vec<f64>> = (0..4)
        .map(|j| (0..6).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let path = write_basis(dir.path(), "four.bin", 6, &cols);
    assert_eq!(
        run(&["estimate", "--basis", &path, "--grid", "0.01"])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn mean_norm_command() {
    let v = stdout_json(&run(&["mean-norm", "--n", "2", "--B", "1"]));
    assert!((v["closed_form"].as_f64().unwrap() - 1.273240).abs() < 1e-6);
    assert!(v.get("mc_mean").is_none());
    let v = stdout_json(&run(&["mean-norm", "--n", "1", "--B", "7"]));
    assert_eq!(v["closed_form"], json!(1.0));
    let v = stdout_json(&run(&[
        "mean-norm",
        "--n",
        "4",
        "--B",
        "1",
        "--mc",
        "1000000",
        "--key",
        "7",
    ]));
    let (mean, se) = (
        v["mc_mean"].as_f64().unwrap(),
        v["mc_stderr"].as_f64().unwrap(),
    );
    assert!((mean - 16.0 / (3.0 * std::f64::consts::PI)).abs() <= 4.0 * se);
}

#[test]
fn bench_tables() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "N = []\neps = [0.5]\ngamma = [0.5]\n").unwrap();
    let out = run(&["bench", "--config", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        format!("{}\n", l1tensor::cli::BENCH_HEADER)
    );

    let two = dir.path().join("two.toml");
    fs::write(
        &two,
        "N = [8192]\neps = [0.5]\ngamma = [0.5]\nc1 = [0.73]\nc2 = [0.73]\nseeds = 2\nsamples = 500\nrestarts = 2\niters = 20\n",
    )
    .unwrap();
    let a = run(&["bench", "--config", two.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(
        rows[0].starts_with("0,8192,0.5,0.5,0.73,0.73,ok,2,19,2,3,22,7942,9,"),
        "{}",
        rows[0]
    );
    assert!(rows[1].starts_with("1,"));
    assert!(rows.iter().all(|r| r.ends_with(",3232")));
    let b = run(&["bench", "--config", two.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);

    let json_cfg = dir.path().join("two.json");
    fs::write(
        &json_cfg,
        r#"{"N":[8192],"eps":[0.5],"gamma":[0.5],"c1":[0.73],"c2":[0.73],"seeds":2,"samples":500,"restarts":2,"iters":20}"#,
    )
    .unwrap();
    assert_eq!(
        run(&["bench", "--config", json_cfg.to_str().unwrap()]).stdout,
        a.stdout
    );

    let infeasible = dir.path().join("inf.toml");
    fs::write(&infeasible, "N = [1000000]\neps = [0.5]\ngamma = [0.5]\n").unwrap();
    let text = String::from_utf8(run(&["bench", "--config", infeasible.to_str().unwrap()]).stdout)
        .unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",infeasible,"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "N = [8192\n").unwrap();
    assert_eq!(
        run(&["bench", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(64)
    );
    fs::write(&bad, "Nope = [1]\n").unwrap();
    assert_eq!(
        run(&["bench", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(64)
    );
}
