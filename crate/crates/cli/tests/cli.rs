use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcrtbp")).args(args).env_remove("TBP_LOG").output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn lagrange_lists_five_ordered_points() {
    let v = json(&run(&["lagrange", "--mu", "0.1", "--format", "json"]));
    let pts = v["result"]["points"].as_array().unwrap();
    assert_eq!(pts.len(), 5);
    assert_eq!(v["result"]["ordering_holds"], true);
    let e: Vec<f64> = pts.iter().map(|p| p["energy"].as_f64().unwrap()).collect();
    assert!(e[0] < e[1] && e[1] <= e[2] && e[2] < e[3]);
    assert_eq!(v["config"]["mu"], 0.1);
}

#[test]
fn homology_table() {
    let out = run(&["homology", "--table", "--degrees", "0..5", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "degree,rank\n0,1\n1,3\n2,4\n3,4\n4,4\n5,4\n");
}

#[test]
fn ellipsoid_census_summary() {
    let v = json(&run(&["ellipsoid", "--r1", "1", "--r2", "2"]));
    assert_eq!(v["result"]["summary"], "all periodic, minimal common period 2π");
    let v = json(&run(&["ellipsoid", "--r1", "1", "--r2", "1.4142135623730951"]));
    assert_eq!(v["result"]["census"], "two closed orbits");
    assert_eq!(v["result"]["cz"][0], "3");
}

#[test]
fn invalid_input_exits_with_2() {
    assert_eq!(run(&["lagrange", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["lagrange", "--mu", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["homology", "--d", "2", "--n", "2"]).status.code(), Some(2));
    assert_eq!(run(&["ellipsoid", "--r1", "-1"]).status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("pcrtbp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.cfg");
    std::fs::write(&path, "# test run\nmu = 0.3\nseed = 7\nformat = json\n").unwrap();
    let p = path.to_str().unwrap();
    let v = json(&run(&["lagrange", "--config", p]));
    assert_eq!(v["config"]["mu"], 0.3);
    assert_eq!(v["config"]["seed"], 7);
    let v = json(&run(&["lagrange", "--config", p, "--mu", "0.01"]));
    assert_eq!(v["config"]["mu"], 0.01);
    std::fs::write(&path, "mu 0.3\n").unwrap();
    assert_eq!(run(&["lagrange", "--config", p]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn runs_are_reproducible() {
    let args = ["convexity", "--mu", "0.01", "--points", "200", "--seed", "3"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["result"]["pass"], true);
    let c = run(&["circles", "--mu", "0.1", "--samples", "32"]);
    assert_eq!(c.stdout, run(&["circles", "--mu", "0.1", "--samples", "32"]).stdout);
    assert_eq!(String::from_utf8(c.stdout).unwrap().lines().count(), 65);
}

#[test]
fn classify_scan_at_small_mass_ratio() {
    let v = json(&run(&["classify", "--mu", "0.01", "--crossings", "1", "--samples", "90"]));
    let orbits = v["result"]["orbits"].as_array().unwrap();
    assert!(orbits.len() >= 2);
    for o in orbits {
        assert_eq!(o["criteria_agree"], true);
    }
}

#[test]
fn failure_exit_codes() {
    // energy above the first critical value is a configuration problem
    assert_eq!(run(&["convexity", "--problem", "hill", "--c", "0.0"]).status.code(), Some(2));
    // a nearly round ellipsoid has a degenerate short orbit: numerical failure
    let out = run(&["ellipsoid", "--r1", "1", "--r2", "1.0000001"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}
