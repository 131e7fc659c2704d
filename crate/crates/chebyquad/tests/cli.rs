use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chebyquad::cli::LogRecord;
use chebyquad::formats::{parse_node_list, Bundle, Cubature};
use chebyquad::manifest::{RunManifest, MANIFEST_FILE};
use chebyquad_core::verify::sha256_hex;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chebyquad"));
    c.env_remove("CHEBYQUAD_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

/// Every listed output exists with the recorded hash and size.
fn check_outputs(dir: &Path, m: &RunManifest) {
    for f in &m.outputs {
        let p = if Path::new(&f.path).is_absolute() {
            PathBuf::from(&f.path)
        } else {
            dir.join(&f.path)
        };
        let bytes = fs::read(&p).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256, "{}", f.path);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
}

#[test]
fn bounds_for_uniform_degree_three() {
    let t = TempDir::new().unwrap();
    let m = write(t.path(), "uniform.json", r#"{"builtin": "uniform"}"#);
    let out = t.path().join("out");
    let o = run(&["bounds", "-m", s(&m), "-k", "3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("moment 1.6875"), "{}", stdout(&o));
    assert!(stdout(&o).contains("[lower <= upper]"));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(report["lower"]["moment_bound"], 27.0 / 16.0);
    assert!((report["lower"]["bernstein_bound"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    let man = manifest(&out);
    assert_eq!(man.subcommand, "bounds");
    assert_eq!(man.inputs.len(), 1);
    check_outputs(&out, &man);
}

#[test]
fn bounds_report_rho_for_two_interval_measure() {
    let t = TempDir::new().unwrap();
    let m = write(
        t.path(),
        "sigma0.json",
        r#"{"builtin": "two_interval_sigma0"}"#,
    );
    let out = t.path().join("out");
    let o = run(&["bounds", "-m", s(&m), "-k", "3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("bounds.json")).unwrap()).unwrap();
    assert!(report["upper"]["rho"].as_f64().unwrap() > 0.0);
}

#[test]
fn bounds_refer_heavy_atoms() {
    let t = TempDir::new().unwrap();
    let m = write(
        t.path(),
        "atom.json",
        r#"{"builtin": "mixture", "params": {"atom": 0.5, "weight": 0.5}}"#,
    );
    let o = run(&["bounds", "-m", s(&m), "-k", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("--eps"), "{}", stdout(&o));
}

#[test]
fn invalid_measure_reports_position() {
    let t = TempDir::new().unwrap();
    let m = write(
        t.path(),
        "bad.json",
        "{\"builtin\":\n  \"uniform\",\n  oops}",
    );
    let o = run(&["bounds", "-m", s(&m), "-k", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");

    let m = write(
        t.path(),
        "mass.json",
        r#"{"support": [0, 1], "pieces": [{"interval": [0, 1], "coeffs": [2]}]}"#,
    );
    let o = run(&["bounds", "-m", s(&m), "-k", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mass.json"));
}

#[test]
fn missing_parameters_are_usage_errors() {
    assert_eq!(
        run(&["sphere", "-d", "2", "-k", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn construct_guaranteed_then_verify() {
    let t = TempDir::new().unwrap();
    let m = write(t.path(), "uniform.json", r#"{"builtin": "uniform"}"#);
    let out = t.path().join("c");
    let o = run(&["construct", "-m", s(&m), "-k", "2", "--out", s(&out)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let nodes_path = out.join("nodes.txt");
    let nodes = parse_node_list(&nodes_path, &fs::read(&nodes_path).unwrap()).unwrap();
    assert_eq!(nodes.len(), 24465);
    let man = manifest(&out);
    assert_eq!(man.parameters["mode"], "guaranteed");
    assert_eq!(man.parameters["n"], 24465);
    check_outputs(&out, &man);

    let o = run(&[
        "verify",
        "--measure",
        s(&m),
        "--nodes",
        s(&nodes_path),
        "-k",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    // the third moment is not matched
    let o = run(&[
        "verify",
        "--measure",
        s(&m),
        "--nodes",
        s(&nodes_path),
        "-k",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn construct_best_effort_flagged() {
    let t = TempDir::new().unwrap();
    let m = write(t.path(), "uniform.json", r#"{"builtin": "uniform"}"#);
    let out = t.path().join("c");
    let o = run(&[
        "construct",
        "-m",
        s(&m),
        "-k",
        "5",
        "-n",
        "1000",
        "--best-effort",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out).parameters["best_effort"], true);
}

#[test]
fn construct_guaranteed_below_bound_names_required_n() {
    let t = TempDir::new().unwrap();
    let m = write(t.path(), "uniform.json", r#"{"builtin": "uniform"}"#);
    let o = run(&["construct", "-m", s(&m), "-k", "2", "-n", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("24465"));
}

#[test]
fn construct_on_wider_support_maps_nodes_back() {
    let t = TempDir::new().unwrap();
    let m = write(
        t.path(),
        "sigma0.json",
        r#"{"builtin": "two_interval_sigma0"}"#,
    );
    let out = t.path().join("c");
    let o = run(&[
        "construct",
        "-m",
        s(&m),
        "-k",
        "3",
        "-n",
        "200",
        "--best-effort",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let p = out.join("nodes.txt");
    let nodes = parse_node_list(&p, &fs::read(&p).unwrap()).unwrap();
    assert!(nodes.iter().any(|x| *x < 0.0));
    let o = run(&["verify", "--measure", s(&m), "--nodes", s(&p), "-k", "3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn sphere_circle_has_seven_arcs() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("s");
    let o = run(&[
        "sphere",
        "-d",
        "1",
        "-k",
        "1",
        "--tau",
        "1",
        "--delta",
        "0.1",
        "--verify",
        "--points",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("7 boxes"));
    let bundle: Bundle =
        serde_json::from_slice(&fs::read(out.join("bundle.json")).unwrap()).unwrap();
    let Cubature::Sphere(c) = &bundle.cubature else {
        panic!("sphere bundle expected")
    };
    assert_eq!(c.box_count(), 7);
    let points = fs::read_to_string(out.join("points.txt")).unwrap();
    assert_eq!(
        points.lines().filter(|l| !l.starts_with('#')).count(),
        7 * c.nodes_per_box()
    );
    check_outputs(&out, &manifest(&out));
}

#[test]
fn sphere_bundle_reverifies() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("s");
    let o = run(&[
        "sphere",
        "-d",
        "2",
        "-k",
        "1",
        "--tau",
        "0.8",
        "--delta",
        "0.2",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["verify", "--bundle", s(&out.join("bundle.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let t = TempDir::new().unwrap();
    let mut bundles = Vec::new();
    for threads in ["1", "3"] {
        let out = t.path().join(threads);
        let o = run(&[
            "--threads",
            threads,
            "sphere",
            "-d",
            "2",
            "-k",
            "1",
            "--tau",
            "0.8",
            "--delta",
            "0.2",
            "--out",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(manifest(&out).threads.to_string(), threads);
        bundles.push(fs::read(out.join("bundle.json")).unwrap());
    }
    assert_eq!(bundles[0], bundles[1]);
}

#[test]
fn cylinder_rejects_short_length() {
    let o = run(&[
        "cylinder", "-d", "3", "-k", "1", "-L", "1", "-W", "1", "--tau", "0.5", "--delta", "0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tampered_bundle_fails_verification() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("s");
    run(&[
        "sphere",
        "-d",
        "1",
        "-k",
        "2",
        "--tau",
        "0.5",
        "--delta",
        "0.05",
        "--out",
        s(&out),
    ]);
    let path = out.join("bundle.json");
    let mut bundle: Bundle = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let Cubature::Sphere(c) = &mut bundle.cubature else {
        panic!()
    };
    let lo = c.factors[0].interval.0;
    c.factors[0].nodes.fill(lo);
    let bad = t.path().join("bad.json");
    fs::write(&bad, bundle.to_json()).unwrap();
    assert_eq!(run(&["verify", "--bundle", s(&bad)]).status.code(), Some(2));
}

#[test]
fn randcube_analytic_case_and_rerun() {
    let t = TempDir::new().unwrap();
    let cfg = write(
        t.path(),
        "rc.json",
        r#"{"n": 1, "k": 1, "d": 1, "eps": 0.3, "reps": 20000, "seed": 5}"#,
    );
    let log = t.path().join("log.jsonl");
    for _ in 0..2 {
        let o = run(&["randcube", s(&cfg), "--log", s(&log)]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], lines[1]);
    let rec: LogRecord = serde_json::from_str(lines[0]).unwrap();
    let chebyquad::cli::Estimate::SmallBall(est) = rec.estimate else {
        panic!()
    };
    assert!(est.ci_low <= 0.3 && 0.3 <= est.ci_high, "{est:?}");
}

#[test]
fn randcube_eps_sweep_is_monotone() {
    let t = TempDir::new().unwrap();
    let cfg = write(
        t.path(),
        "rc.json",
        r#"[{"n": 10, "k": 2, "d": 1, "eps": [0.2, 0.5, 1.0, 2.0], "reps": 2000, "seed": 1, "density_bin": 0.5}]"#,
    );
    let log = t.path().join("log.jsonl");
    let o = run(&["randcube", s(&cfg), "--log", s(&log), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let recs: Vec<LogRecord> = fs::read_to_string(&log)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(recs.len(), 5);
    let hits: Vec<u64> = recs
        .iter()
        .filter_map(|r| match &r.estimate {
            chebyquad::cli::Estimate::SmallBall(e) => Some(e.hit_count),
            _ => None,
        })
        .collect();
    assert!(hits.windows(2).all(|w| w[0] <= w[1]), "{hits:?}");
}

#[test]
fn randcube_rejects_bad_config() {
    let t = TempDir::new().unwrap();
    let cfg = write(
        t.path(),
        "rc.json",
        r#"{"n": 0, "k": 1, "d": 1, "eps": 0.3, "reps": 10, "seed": 5}"#,
    );
    let o = run(&["randcube", s(&cfg), "--log", s(&t.path().join("log"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_from_environment() {
    let t = TempDir::new().unwrap();
    // a table too strict for the unit circle at tau = 1
    let strict = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../config/constants.toml"
    ))
    .unwrap()
    .replace("mass = 0.85", "mass = 0.95");
    let cfg = write(t.path(), "strict.toml", &strict);
    let args = [
        "sphere", "-d", "1", "-k", "1", "--tau", "1", "--delta", "0.1", "--verify",
    ];
    assert_eq!(run(&args).status.code(), Some(0));
    let o = bin()
        .args(args)
        .env("CHEBYQUAD_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));

    let bad = write(t.path(), "bad.toml", "format_version = 7\n");
    let o = bin()
        .args(args)
        .env("CHEBYQUAD_CONFIG", &bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
