use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ccbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccbound"))
        .args(args)
        .env_remove("CCBOUND_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn assert_one_line_error(out: &Output) {
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

/// Value on the line starting with `key`.
fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .trim()
        .to_string()
}

fn werner(dir: &Path, name: &str, v: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["werner", "--v", v, "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    stdout(&ccbound(&args));
    path
}

#[test]
fn constants_default_and_theta() {
    let out = stdout(&ccbound(&["constants"]));
    assert_eq!(field(&out, "v_L^w"), "0.682894");
    assert_eq!(field(&out, "v_NL^w"), "0.696400");
    assert_eq!(field(&out, "v_crit^w"), "0.726291");

    let out = stdout(&ccbound(&["constants", "--theta", "0.7853981634"]));
    assert_eq!(field(&out, "v_L "), "0.707107");
    assert_eq!(field(&out, "v_crit "), "0.744521");

    let deg = stdout(&ccbound(&["constants", "--theta-deg", "45"]));
    assert_eq!(field(&deg, "v_crit "), "0.744521");
}

#[test]
fn zero_angle_is_a_usage_error() {
    let out = ccbound(&["constants", "--theta", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_one_line_error(&out);
}

#[test]
fn curve_rows() {
    let out = stdout(&ccbound(&[
        "curve", "--v-min", "0.70", "--v-max", "1.0", "--step", "0.005",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "v,S,bound");
    assert_eq!(lines.len(), 62);
    assert_eq!(lines[1], "0.700000,1.979899,0.000000");
    assert_eq!(*lines.last().unwrap(), "1.000000,2.828427,1.000000");

    let at_crit = stdout(&ccbound(&[
        "curve", "--v-min", "0.744521", "--v-max", "0.744521",
    ]));
    assert!(at_crit.lines().nth(1).unwrap().ends_with(",0.000000"));
}

#[test]
fn curve_rejects_bad_ranges() {
    assert_one_line_error(&ccbound(&["curve", "--v-min", "0.9", "--v-max", "0.8"]));
    assert_one_line_error(&ccbound(&["curve", "--step", "0"]));
    assert_one_line_error(&ccbound(&["curve", "--v-max", "1.2"]));
}

#[test]
fn region_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("region.csv");
    stdout(&ccbound(&["region", "--out", path.to_str().unwrap()]));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,t,v,theta,label"));
    assert_eq!(lines.clone().count(), 201 * 201);
    assert!(text.contains("\n0.550000,0.480000,0.730000,0.717541,RED_ZERO_KEY\n"));
    assert!(text.contains("\n0.500000,0.400000,0.640312,0.674741,LOCAL\n"));
}

#[test]
fn output_is_independent_of_jobs() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one.csv");
    let four = dir.path().join("four.csv");
    stdout(&ccbound(&[
        "--jobs",
        "1",
        "region",
        "--resolution",
        "61",
        "--out",
        one.to_str().unwrap(),
    ]));
    stdout(&ccbound(&[
        "--jobs",
        "4",
        "region",
        "--resolution",
        "61",
        "--out",
        four.to_str().unwrap(),
    ]));
    assert_eq!(std::fs::read(one).unwrap(), std::fs::read(four).unwrap());
}

#[test]
fn bound_examples() {
    let dir = TempDir::new().unwrap();
    let ideal = werner(dir.path(), "w1.json", "1", &[]);
    let out = stdout(&ccbound(&[
        "bound",
        ideal.to_str().unwrap(),
        "--setting",
        "0,2",
    ]));
    assert_eq!(field(&out, "bound"), "1.000000");

    let noisy = werner(dir.path(), "w72.json", "0.72", &[]);
    let out = stdout(&ccbound(&[
        "bound",
        noisy.to_str().unwrap(),
        "--lambda",
        "auto",
    ]));
    assert_eq!(field(&out, "bound"), "0.000000");

    let explicit = stdout(&ccbound(&[
        "bound",
        noisy.to_str().unwrap(),
        "--target",
        ideal.to_str().unwrap(),
        "--lambda",
        "1",
    ]));
    assert_eq!(field(&explicit, "q_L"), field(&out, "q_L"));
}

#[test]
fn bound_multiple_settings_share_weight() {
    let dir = TempDir::new().unwrap();
    let c = werner(dir.path(), "w.json", "0.9", &[]);
    let out = stdout(&ccbound(&[
        "bound",
        c.to_str().unwrap(),
        "--setting",
        "0,2",
        "--setting",
        "1,0",
    ]));
    assert_eq!(
        out.lines()
            .filter(|l| l.contains("weight=0.500000"))
            .count(),
        2
    );
}

#[test]
fn malformed_input_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_one_line_error(&ccbound(&["bound", bad.to_str().unwrap()]));
    assert_one_line_error(&ccbound(&["intrinsic", bad.to_str().unwrap()]));
    assert_one_line_error(&ccbound(&["localweight", bad.to_str().unwrap(), "--ns"]));
    let missing = dir.path().join("missing.json");
    assert_one_line_error(&ccbound(&["bound", missing.to_str().unwrap()]));
}

#[test]
fn localweight_examples() {
    let dir = TempDir::new().unwrap();
    let c = werner(dir.path(), "w85.json", "0.85", &[]);
    let target = werner(dir.path(), "w1.json", "1", &[]);
    let out = stdout(&ccbound(&[
        "localweight",
        c.to_str().unwrap(),
        "--target",
        target.to_str().unwrap(),
    ]));
    assert_eq!(field(&out, "q_max"), "0.512132");

    let local = werner(dir.path(), "w6.json", "0.6", &[]);
    let out = stdout(&ccbound(&["localweight", local.to_str().unwrap(), "--ns"]));
    assert_eq!(field(&out, "q_max"), "1.000000");

    let four = werner(dir.path(), "w4.json", "1", &["--bob", "four"]);
    assert_one_line_error(&ccbound(&[
        "localweight",
        c.to_str().unwrap(),
        "--target",
        four.to_str().unwrap(),
    ]));
    assert!(!ccbound(&["localweight", c.to_str().unwrap()])
        .status
        .success());
}

#[test]
fn intrinsic_examples() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("p.json");
    stdout(&ccbound(&[
        "tripartite",
        "--v",
        "0.72",
        "--out",
        path.to_str().unwrap(),
    ]));
    let out = stdout(&ccbound(&["intrinsic", path.to_str().unwrap()]));
    assert!(field(&out, "bound").parse::<f64>().unwrap() <= 1e-6);

    let copy = dir.path().join("copy.json");
    std::fs::write(
        &copy,
        r#"{"alphabets":[2,2,4],"p":[[[0.4,0,0,0],[0,0.1,0,0]],[[0,0,0.2,0],[0,0,0,0.3]]]}"#,
    )
    .unwrap();
    let out = stdout(&ccbound(&["intrinsic", copy.to_str().unwrap()]));
    assert_eq!(field(&out, "bound"), "0.000000");
}

#[test]
fn intrinsic_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("p.json");
    stdout(&ccbound(&[
        "tripartite",
        "--v",
        "0.9",
        "--out",
        path.to_str().unwrap(),
    ]));
    let p = path.to_str().unwrap();
    let a = stdout(&ccbound(&[
        "intrinsic",
        p,
        "--restarts",
        "4",
        "--seed",
        "7",
    ]));
    let b = stdout(&ccbound(&[
        "--jobs",
        "3",
        "intrinsic",
        p,
        "--restarts",
        "4",
        "--seed",
        "7",
    ]));
    assert_eq!(a, b);
    let env = Command::new(env!("CARGO_BIN_EXE_ccbound"))
        .args(["intrinsic", p, "--restarts", "4"])
        .env("CCBOUND_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&env), a);
}

#[test]
fn generated_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let path = werner(dir.path(), "w.json", "0.8", &["--theta-deg", "30"]);
    let c = ccbound_core::Correlation::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let expected = ccbound_core::chsh_protocol_correlation(30f64.to_radians(), 0.8).unwrap();
    assert!(c.max_abs_diff(&expected).unwrap() < 1e-12);
}
