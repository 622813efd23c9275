use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lsrecon(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsrecon"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn lsrecon")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsrecon(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for sub in ["synth", "fit", "extract", "eval", "gradcheck"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
    assert_eq!(code(&lsrecon(&["fit", "--help"], dir.path())), 0);
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lsrecon(&["synth", "sphere", "--bogus"], dir.path())), 2);
    assert_eq!(code(&lsrecon(&[], dir.path())), 2);
}

#[test]
fn missing_input_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsrecon(&["fit", "--input", "nope.pts", "--out", "f.lsf"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("nope.pts"));
}

#[test]
fn oversized_shape_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsrecon(&["synth", "sphere", "--radius", "1.5"], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(!dir.path().join("cloud.pts").exists());
}

#[test]
fn malformed_cloud_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.pts"), "0 0 0.5 0 0 1\n0 0 oops 0 0 1\n").unwrap();
    let o = lsrecon(&["fit", "--input", "bad.pts", "--out", "f.lsf"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = lsrecon(&["synth", "sphere", "--res", "24", "--seed", "3", "--out-dir", out], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["field.lsf", "cloud.pts", "mesh.obj"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let cloud = fs::read_to_string(dir.path().join("a/cloud.pts")).unwrap();
    let records = cloud.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count();
    assert_eq!(records, 2000);
}

#[test]
fn resolved_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsrecon(&["synth", "box", "--half", "0.3", "--res", "16"], dir.path());
    assert_eq!(code(&o), 0);
    let err = stderr(&o);
    assert!(err.contains("half = 0.3"), "{err}");
    assert!(err.contains("res = 16"), "{err}");
}

#[test]
fn config_file_supplies_flags_and_cli_wins() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# synth settings\nres = 12\ncount = 50\n").unwrap();
    let o = lsrecon(&["--config", "run.cfg", "synth", "torus", "--count", "70"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("res = 12") && err.contains("count = 70"), "{err}");

    fs::write(dir.path().join("bad.cfg"), "res 12\n").unwrap();
    assert_eq!(code(&lsrecon(&["--config", "bad.cfg", "synth", "torus"], dir.path())), 3);
    assert_eq!(code(&lsrecon(&["--config", "missing.cfg", "synth", "torus"], dir.path())), 3);
}

#[test]
fn gradcheck_passes_and_sabotage_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsrecon(&["gradcheck"], dir.path());
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    for term in ["data", "normal", "sdf", "area", "volume", "combined"] {
        assert!(out.contains(&format!("term={term} ")), "{out}");
    }

    let o = lsrecon(&["gradcheck", "--sabotage"], dir.path());
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("term") && err.contains("node"), "{err}");

    assert_eq!(code(&lsrecon(&["gradcheck", "--res", "24"], dir.path())), 2);
}

#[test]
fn fit_extract_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = lsrecon(args, dir.path());
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        stdout(&o)
    };
    run(&["synth", "sphere", "--res", "24", "--count", "500"]);
    let fit = run(&[
        "fit", "--input", "cloud.pts", "--res", "20", "--iters", "30", "--out", "fit.lsf", "--log", "fit.csv",
    ]);
    assert!(fit.contains("iterations=30"), "{fit}");
    let csv = fs::read_to_string(dir.path().join("fit.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,e_data,e_normal,e_sdf,e_area,e_vol,total"));
    assert_eq!(lines.count(), 4);

    let ext = run(&["extract", "--field", "fit.lsf", "--out", "fit.obj"]);
    assert!(ext.contains("watertight=true"), "{ext}");

    let eval = run(&["eval", "--pred", "fit.obj", "--gt", "mesh.obj", "--iou-res", "32", "--report", "r.txt"]);
    let iou: f64 = eval
        .lines()
        .find_map(|l| l.strip_prefix("iou="))
        .and_then(|v| v.parse().ok())
        .expect("iou line");
    assert!((0.0..=1.0).contains(&iou));
    assert_eq!(fs::read_to_string(dir.path().join("r.txt")).unwrap(), eval);

    let self_eval = run(&["eval", "--pred", "field.lsf", "--gt", "field.lsf", "--iou-res", "24"]);
    assert!(self_eval.starts_with("iou=1.000000\nchamfer=0."), "{self_eval}");
}

#[test]
fn divergence_exits_one_and_keeps_last_field() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lsrecon(&["synth", "sphere", "--res", "16", "--count", "300"], dir.path())), 0);
    let o = lsrecon(
        &["fit", "--input", "cloud.pts", "--res", "20", "--step", "50", "--iters", "200", "--out", "f.lsf"],
        dir.path(),
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(!dir.path().join("f.lsf").exists());
    assert!(dir.path().join("f.lsf.last_good").exists());
}

#[test]
fn deterministic_pipeline_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lsrecon(&["synth", "sphere", "--res", "24", "--count", "800", "--seed", "7"], dir.path())), 0);
    for (out, threads) in [("a.lsf", "1"), ("b.lsf", "4")] {
        let o = lsrecon(
            &[
                "--deterministic", "--threads", threads, "fit", "--input", "cloud.pts", "--res", "20", "--iters", "40",
                "--out", out,
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a.lsf")).unwrap();
    let b = fs::read(dir.path().join("b.lsf")).unwrap();
    assert_eq!(a, b);
}
