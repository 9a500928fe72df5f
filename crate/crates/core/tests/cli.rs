use std::path::Path;
use std::process::{Command, Output};

fn pmvs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmvs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pmvs(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_exits_with_usage() {
    let out = pmvs(&["depth", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn failures_print_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    for args in [
        vec!["depth", "--dataset", s(&missing), "--ref", "0", "--out", s(dir.path())],
        vec!["eval-cloud", "--est", s(&missing), "--gt", s(&missing)],
    ] {
        let out = pmvs(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
}

#[test]
fn end_to_end_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--scene", "heightfield", "--seed", "3", "--cameras", "5", "--out", s(&data)]);
    assert!(data.join("pair.txt").is_file() && data.join("gt.ply").is_file());

    let info: serde_json::Value =
        serde_json::from_str(&ok(&["--json", "sweep-info", "--dataset", s(&data), "--ref", "0"])).unwrap();
    assert!(info.is_object());

    let one = dir.path().join("one");
    let four = dir.path().join("four");
    let meta: serde_json::Value = serde_json::from_str(&ok(&[
        "--json", "--threads", "1", "depth", "--dataset", s(&data), "--ref", "0", "--out", s(&one),
    ]))
    .unwrap();
    ok(&["--threads", "4", "depth", "--dataset", s(&data), "--ref", "0", "--out", s(&four)]);

    // defaults: 96 planes at the coarsest level, 8 residuals below it
    let levels = meta["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    assert_eq!(levels[1]["hypotheses_per_pixel"], 96);
    assert_eq!(levels[0]["hypotheses_per_pixel"], 8);
    assert_eq!((levels[0]["width"].as_u64(), levels[0]["height"].as_u64()), (Some(160), Some(128)));
    assert_eq!((levels[1]["width"].as_u64(), levels[1]["height"].as_u64()), (Some(80), Some(64)));

    for name in ["depth_00000000_l0.pfm", "depth_00000000_l1.pfm", "conf_00000000_l0.pfm"] {
        let a = std::fs::read(one.join(name)).unwrap();
        let b = std::fs::read(four.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread counts");
    }

    let errors: serde_json::Value =
        serde_json::from_str(&ok(&["--json", "eval-depth", "--est", s(&one), "--gt", s(&data)])).unwrap();
    let total = errors[0]["total"].as_f64().unwrap();
    assert!(total.is_finite() && total < 0.5, "{errors}");

    for id in 1..5 {
        ok(&["depth", "--dataset", s(&data), "--ref", &id.to_string(), "--out", s(&one)]);
    }
    let cloud = dir.path().join("cloud.ply");
    ok(&["fuse", "--dataset", s(&data), "--depths", s(&one), "--out", s(&cloud)]);
    let m: serde_json::Value = serde_json::from_str(&ok(&[
        "--json", "eval-cloud", "--est", s(&cloud), "--gt", s(&data.join("gt.ply")),
    ]))
    .unwrap();
    for key in ["accuracy", "completeness", "overall"] {
        let v = m[key].as_f64().unwrap();
        assert!(v.is_finite() && v < 0.1, "{key} = {v}");
    }
}

#[test]
fn dumps_volumes_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--scene", "plane", "--cameras", "3", "--out", s(&data)]);
    let out = dir.path().join("out");
    ok(&[
        "depth", "--dataset", s(&data), "--ref", "0", "--views", "3", "--coarse-planes", "24",
        "--dump-volumes", "--out", s(&out),
    ]);
    let cost = pyramid_mvs::io::volume::read_volume(&out.join("cost_00000000_l1.vol")).unwrap();
    assert_eq!((cost.width, cost.height, cost.hypotheses), (80, 64, 24));
    let prob = pyramid_mvs::io::volume::read_volume(&out.join("prob_00000000_l0.vol")).unwrap();
    assert_eq!(prob.hypotheses, 8);
}
