//! End-to-end runs of the `svi` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn svi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svi"))
        .args(args)
        .output()
        .expect("the binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = svi(args);
    assert!(
        out.status.success(),
        "svi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

/// Lines of a CSV output after the comment header.
fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn results(dir: &Path) -> toml::Table {
    let summary: toml::Table = read(dir, "summary.txt").parse().expect("summary is TOML");
    summary["results"].as_table().expect("results table").clone()
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run_ok(&[
            "simulate",
            "--seed",
            "42",
            "--out",
            &out_arg(dir),
            "--set",
            "integrators=[\"svi\"]",
        ]);
    }
    let ta = read(&a, "trajectory.csv");
    assert_eq!(ta, read(&b, "trajectory.csv"));
    assert_eq!(
        body(&ta).len(),
        1 + 1001,
        "header row plus 1000 steps and the initial state"
    );
    assert!(ta.starts_with("# svi "));
    assert!(ta.contains("# seed = 42\n"));
    assert!(ta.contains("# config_hash = "));

    let strip = |s: String| {
        s.lines()
            .filter(|l| !l.starts_with("outputs"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(read(&a, "summary.txt")), strip(read(&b, "summary.txt")));
}

#[test]
fn different_seeds_give_different_paths() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["simulate", "--seed", "1", "--out", &out_arg(&a)]);
    run_ok(&["simulate", "--seed", "2", "--out", &out_arg(&b)]);
    assert_ne!(body(&read(&a, "trajectory.csv")), body(&read(&b, "trajectory.csv")));
}

#[test]
fn convergence_schema() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("c");
    let cfg = tmp.path().join("conv.toml");
    fs::write(
        &cfg,
        "study = \"convergence\"\npaths = 64\nseed = 3\n\
         [model]\nname = \"oscillator\"\n\
         [convergence]\nlevels = [2, 4]\n",
    )
    .unwrap();
    run_ok(&[
        "convergence",
        "--config",
        &cfg.display().to_string(),
        "--out",
        &out_arg(&dir),
    ]);
    let csv = read(&dir, "convergence.csv");
    let rows = body(&csv);
    assert_eq!(rows[0], "h,ms_error");
    let hs: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    // dyadic fractions of the unit horizon
    assert_eq!(hs, vec![0.25, 0.125, 0.0625]);
    for r in &rows[1..] {
        let e: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert!(e > 0.0 && e.is_finite());
    }
    let res = results(&dir);
    assert!(res["fitted_slope"].as_float().is_some(), "{res:?}");
    assert_eq!(res["paths"].as_integer(), Some(64));
}

#[test]
fn step_not_dividing_the_horizon_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("bad");
    let out = svi(&[
        "simulate",
        "--out",
        &out_arg(&dir),
        "--set",
        "h=0.3",
        "--set",
        "horizon=[0, 1]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`h`"), "{err}");
    assert!(read(&dir, "FAILED").contains("`h`"));
    assert!(!dir.join("summary.txt").exists());
    assert!(!dir.join("trajectory.csv").exists());
}

#[test]
fn unknown_names_and_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let dir = out_arg(tmp.path());
    let cases: [(&[&str], &str); 4] = [
        (&["--set", "model.name=no_such_model"], "no_such_model"),
        (&["--set", "integrators=[\"rk4\"]"], "rk4"),
        (&["--set", "model.params.sigmaa=1"], "model.params.sigmaa"),
        (&["--set", "horizn=[0, 1]"], "horizn"),
    ];
    for (extra, needle) in cases {
        let mut args = vec!["simulate", "--out", &dir];
        args.extend_from_slice(extra);
        let out = svi(&args);
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(needle), "{extra:?}");
    }
}

#[test]
fn unsupported_integrator_and_study_mismatch() {
    let tmp = TempDir::new().unwrap();
    let dir = out_arg(tmp.path());
    let out = svi(&[
        "simulate",
        "--out",
        &dir,
        "--set",
        "model.name=constrained_pendulum",
        "--set",
        "integrators=eem",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`integrators`"));

    let out = svi(&["temperature", "--out", &dir, "--set", "study=simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`study`"));
}

#[test]
fn rerun_from_summary_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&[
        "simulate",
        "--seed",
        "11",
        "--out",
        &out_arg(&a),
        "--set",
        "model.name=two_body",
        "--set",
        "model.params.dims=2",
        "--set",
        "horizon=[0, 2]",
        "--set",
        "integrators=[\"svi\", \"eem\"]",
    ]);
    let summary = a.join("summary.txt").display().to_string();
    run_ok(&["simulate", "--config", &summary, "--out", &out_arg(&b)]);
    for name in ["trajectory_svi.csv", "trajectory_eem.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
}

#[test]
fn successful_run_clears_a_stale_failure_marker() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("o");
    assert!(!svi(&["simulate", "--out", &out_arg(&dir), "--set", "h=0.3"])
        .status
        .success());
    assert!(dir.join("FAILED").exists());
    run_ok(&["simulate", "--out", &out_arg(&dir), "--set", "horizon=[0, 1]"]);
    assert!(!dir.join("FAILED").exists());
}

#[test]
fn list_models_in_both_forms() {
    let human = String::from_utf8(run_ok(&["list-models"]).stdout).unwrap();
    let machine: toml::Table = String::from_utf8(run_ok(&["list-models", "--machine"]).stdout)
        .unwrap()
        .parse()
        .expect("machine listing is TOML");
    let models = machine["models"].as_table().unwrap();
    for name in [
        "oscillator",
        "constrained_pendulum",
        "ballistic_analog",
        "rigid_pair",
        "lattice",
    ] {
        assert!(human.contains(name), "{name}");
        let m = models[name].as_table().unwrap();
        assert!(!m["anchor"].as_str().unwrap().is_empty(), "{name}");
        assert!(m["params"].as_table().is_some(), "{name}");
    }
    assert_eq!(models["constrained_pendulum"]["constrained"].as_bool(), Some(true));
    assert!(models["rigid_pair"]["symmetries"]
        .as_array()
        .unwrap()
        .contains(&toml::Value::String("translation".into())));
}

#[test]
fn body_frame_and_spatial_runs_of_one_body_agree() {
    // independent code paths for the same single-body dynamics
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("o");
    run_ok(&[
        "simulate",
        "--out",
        &out_arg(&dir),
        "--set",
        "model.name=rigid_pair",
        "--set",
        "model.params.bodies=1",
        "--set",
        "model.params.load=1",
        "--set",
        "horizon=[0, 1]",
        "--set",
        "integrators=[\"svi-lie\", \"svi-rigid\"]",
    ]);
    let parse = |name: &str| -> Vec<Vec<f64>> {
        body(&read(&dir, name))[1..]
            .iter()
            .map(|r| r.split(',').map(|c| c.parse().unwrap()).collect())
            .collect()
    };
    let (lie, rigid) = (parse("trajectory_svi_lie.csv"), parse("trajectory_svi_rigid.csv"));
    assert_eq!(lie.len(), rigid.len());
    // orientation, angular velocity and momentum columns
    let gap = lie
        .iter()
        .zip(&rigid)
        .flat_map(|(a, b)| a[10..].iter().zip(&b[10..]).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(gap < 1e-10, "gap {gap}");
}

#[test]
fn temperature_and_invariants_studies() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path().join("t");
    run_ok(&[
        "temperature",
        "--out",
        &out_arg(&t),
        "--set",
        "paths=16",
        "--set",
        "horizon=[0, 5]",
    ]);
    assert_eq!(body(&read(&t, "temperature.csv"))[0], "t,method,mean_kinetic");
    assert!(t.join("temperature_time_averaged.csv").exists());
    let res = results(&t);
    assert_eq!(res["shared_noise"].as_bool(), Some(true));
    assert!(res["svi"]["relative_error"].as_float().is_some());

    let i = tmp.path().join("i");
    run_ok(&[
        "invariants",
        "--out",
        &out_arg(&i),
        "--set",
        "model.name=two_body",
        "--set",
        "horizon=[0, 10]",
    ]);
    let csv = read(&i, "invariants.csv");
    assert_eq!(body(&csv)[0], "check,statistic,value,tolerance,pass");
    assert!(csv.contains("momentum:svi:translation_x"));
    assert_eq!(results(&i)["all_pass"].as_bool(), Some(true));
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = TempDir::new().unwrap();
    let cases: [(&str, &str, &[&str]); 4] = [
        ("convergence", "convergence_oscillator.toml", &["--set", "paths=16"]),
        (
            "temperature",
            "temperature_ballistic.toml",
            &["--set", "paths=8", "--set", "horizon=[0, 2]"],
        ),
        ("invariants", "invariants_rigid_pair.toml", &[]),
        ("simulate", "simulate_pendulum.toml", &["--set", "horizon=[0, 0.1]"]),
    ];
    for (study, file, extra) in cases {
        let out = tmp.path().join(study);
        let config = root.join(file).display().to_string();
        let mut args = vec![study, "--config", &config];
        let o = out_arg(&out);
        args.extend(["--out", &o]);
        args.extend_from_slice(extra);
        run_ok(&args);
        assert!(out.join("summary.txt").exists(), "{file}");
    }
    assert_eq!(
        results(&tmp.path().join("invariants"))["all_pass"].as_bool(),
        Some(true)
    );
}
