use std::process::Command;

use uihpq_core::planar_map::map_from_str;

fn uihpq(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_uihpq")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn prefix_law_reports_json_with_schema() {
    let (code, out, _) = uihpq(&["prefix-law", "--seed", "3"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["experiment"], "prefix-law");
    assert_eq!(v["pass"], true);
    assert_eq!(v["results"]["grid"].as_array().unwrap().len(), 3);
}

#[test]
fn csv_has_one_line_per_check() {
    let (code, out, _) = uihpq(&["prefix-law", "--format", "csv", "--n", "4,8"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "experiment,check,value,radius,threshold,pass");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("prefix-law,"));
}

#[test]
fn sample_writes_a_readable_pmap() {
    let dir = std::env::temp_dir().join(format!("uihpq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("q.pmap");
    let (code, _, err) = uihpq(&["sample", "--sigma", "5", "--p", "0.3", "--seed", "9", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let m = map_from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(m.is_valid());
    assert_eq!(m.boundary().len(), 10);
    let report: serde_json::Value = serde_json::from_str(&err).unwrap();
    assert_eq!(report["results"]["half_edges"], m.num_half_edges());
    // same seed, same file
    let (_, out, _) = uihpq(&["sample", "--sigma", "5", "--p", "0.3", "--seed", "9"]);
    assert_eq!(out, std::fs::read_to_string(&path).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn radius_zero_ball_laws_agree() {
    let (code, out, _) = uihpq(&["boltzmann-conv", "--radius", "0", "--samples", "50", "--sigma", "2,4"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["checks"][0]["value"], 0.0);
}

#[test]
fn failing_checks_exit_one() {
    // a TV threshold of -1 cannot be met
    let (code, out, _) = uihpq(&["boltzmann-conv", "--samples", "200", "--sigma", "2,4", "--tolerance=-1"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(uihpq(&["no-such-command"]).0, 2);
    assert_eq!(uihpq(&["prefix-law", "--p", "0.7"]).0, 2);
    assert_eq!(uihpq(&["percolation", "--mode", "dual"]).0, 2);
}
