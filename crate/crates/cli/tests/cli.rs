use std::path::Path;
use std::process::{Command, Output};

fn lee2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lee2d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is json")
}

#[test]
fn help_lists_exit_codes() {
    let o = lee2d(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("Exit codes"), "{text}");
    for sub in ["heat", "bound-state", "bounds", "meanfield", "sweep"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn bound_state_sits_at_mu() {
    for geom in [
        &["--geometry", "plane"][..],
        &["--geometry", "torus", "--l1", "1", "--l2", "2"],
        &["--geometry", "sphere", "--radius", "2"],
        &["--geometry", "hyperbolic", "--radius", "1"],
    ] {
        let mut args = geom.to_vec();
        args.extend(["--mu", "0.3", "--lambda", "1.5", "bound-state"]);
        let o = lee2d(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v = json(&o);
        let e = v["E"].as_f64().unwrap();
        assert!((e - 0.3).abs() < 1e-9, "{geom:?}: E = {e}");
    }
}

#[test]
fn config_errors_name_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[geometry]\nkind = \"spher\"\n[physics]\nm = -2\nlamda = 1\n[numerics]\nwidth = 0\n",
    )
    .unwrap();
    let o = lee2d(&["--config", path.to_str().unwrap(), "bound-state"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for field in [
        "geometry.kind",
        "physics.m",
        "physics.lamda",
        "numerics.width",
    ] {
        assert!(err.contains(field), "{field} missing from:\n{err}");
    }
    assert!(err.contains("did you mean `lambda`"), "{err}");
    assert!(err.contains("did you mean `sphere`"), "{err}");
}

#[test]
fn syntax_errors_report_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "[physics]\nm = = 1\n").unwrap();
    let o = lee2d(&["--config", path.to_str().unwrap(), "bound-state"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "[geometry]\nkind = \"sphere\"\nradius = 1.0\n[physics]\nmu = 0.2\n",
    )
    .unwrap();
    let o = lee2d(&[
        "--config",
        path.to_str().unwrap(),
        "--mu",
        "0.4",
        "bound-state",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["geometry"], "sphere");
    assert!((v["E"].as_f64().unwrap() - 0.4).abs() < 1e-9);
}

#[test]
fn exit_codes_follow_the_taxonomy() {
    assert_eq!(lee2d(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(lee2d(&["--mu", "2", "bound-state"]).status.code(), Some(2));
    assert_eq!(lee2d(&["heat", "--format", "json"]).status.code(), Some(2));
    let outside = lee2d(&[
        "--geometry",
        "torus",
        "--l1",
        "1",
        "--l2",
        "1",
        "heat",
        "--x",
        "5,5",
    ]);
    assert_eq!(outside.status.code(), Some(3), "{}", stderr(&outside));
    let strict = lee2d(&["--tolerance", "1e-300", "bound-state"]);
    assert_eq!(strict.status.code(), Some(4), "{}", stderr(&strict));
    // the artifact is still written when a check fails
    assert!(json(&strict)["E"].is_number());
}

#[test]
fn heat_rows_carry_residuals() {
    let o = lee2d(&[
        "--geometry",
        "sphere",
        "heat",
        "--x",
        "0.5,0.2",
        "--s-min",
        "0.01",
        "--s-max",
        "10",
        "--points",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (value, residual) = (col("value"), col("residual"));
    let mut count = 0;
    for r in rows.records() {
        let r = r.unwrap();
        let k: f64 = r[value].parse().unwrap();
        let res: f64 = r[residual].parse().unwrap();
        assert!(k > 0.0);
        assert!(res < 1e-6, "{r:?}");
        count += 1;
    }
    assert!(count >= 4);
}

#[test]
fn compact_asymptotics_approach_the_square_root_law() {
    let o = lee2d(&["--geometry", "sphere", "meanfield", "asymptotics"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let ratios: Vec<f64> = rows
        .records()
        .map(|r| r.unwrap()[5].parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios
        .windows(2)
        .all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()));
    assert!((ratios[2] - 1.0).abs() < 0.01, "{ratios:?}");
}

#[test]
fn identities_and_chain_check_pass() {
    let ids = lee2d(&[
        "identities",
        "--positivity-draws",
        "2000",
        "--minimum-draws",
        "500",
    ]);
    assert_eq!(ids.status.code(), Some(0), "{}", stderr(&ids));
    let chain = lee2d(&[
        "--geometry",
        "sphere",
        "meanfield",
        "chain-check",
        "--draws",
        "5",
    ]);
    assert_eq!(chain.status.code(), Some(0), "{}", stderr(&chain));
}

fn sweep_to(path: &Path) -> Output {
    lee2d(&[
        "--geometry",
        "sphere",
        "--seed",
        "5",
        "sweep",
        "--axis",
        "n",
        "--log",
        "10,1e4,4",
        "--outputs",
        "chi,meanfield_energy",
        "-o",
        path.to_str().unwrap(),
    ])
}

#[test]
fn sweeps_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = sweep_to(p);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(',')), "{text}");
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert!(side["failed_rows"].as_array().unwrap().is_empty());
}

#[test]
fn example_config_is_valid() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/lee2d.example.toml");
    let o = lee2d(&["--config", path, "meanfield", "solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("n,chi,E,"));
}
