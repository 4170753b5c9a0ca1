use std::process::Command;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_contactq")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn verify_torus_skips_cr_suites() {
    let (code, out) = run(&["verify", "--model", "t3_1", "--samples", "6"]);
    assert_eq!(code, 0);
    assert!(out.contains("no CR frame registered"));
}

#[test]
fn verify_with_unreachable_tolerance_fails() {
    let (code, out) = run(&["verify", "--model", "s3_hopf", "--samples", "4", "--tol", "1e-30"]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL"));
}

#[test]
fn unknown_model_is_a_usage_error() {
    assert_eq!(run(&["verify", "--model", "klein"]).0, 2);
}

#[test]
fn identical_configs_give_identical_json() {
    let args = ["verify", "--model", "heisenberg", "--seed", "7", "--samples", "5", "--format", "json"];
    let (c1, a) = run(&args);
    let (c2, b) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    assert!(a.contains("\"seed\": 7"));
}

#[test]
fn spectrum_csv_and_config_file() {
    let dir = std::env::temp_dir().join(format!("contactq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "model = s3_hopf\nN = 12\nweights = -6..6\n").unwrap();
    let csv = dir.join("spectrum.csv");
    let (code, _) = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split(',').collect()).collect();
    let ms: Vec<&str> = rows.iter().filter(|r| r[0].parse::<i64>().unwrap() >= 0).map(|r| r[4]).take(6).collect();
    assert_eq!(ms, ["1", "2", "3", "4", "5", "6"]);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn index_pair_td_debug_mode() {
    let (code, out) = run(&["index-pair", "--td-debug-one", "--k-max", "6", "-N", "8"]);
    assert_eq!(code, 0);
    assert!(out.contains("td_one_oracle_bump0"));
}
