use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interference"))
        .args(args)
        .output()
        .unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn meanfield_writes_one_curve_per_n_bar() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "meanfield",
        "--out-dir",
        &out_arg(dir.path()),
        "--mf-n-bars",
        "0.5,2",
        "--mf-b-step",
        "0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let smooth = fs::read_to_string(dir.path().join("meanfield_nbar_0.500.csv")).unwrap();
    let loop_ = fs::read_to_string(dir.path().join("meanfield_nbar_2.000.csv")).unwrap();
    assert!(smooth.lines().nth(1).unwrap() == "b,mu_ascending,mu_descending");
    assert_eq!(smooth.lines().count(), 2 + 21);
    // At b = 0 the two branches of the hysteretic curve sit at opposite signs.
    let zero = loop_.lines().find(|l| l.starts_with("0.000000,")).unwrap();
    let cols: Vec<f64> = zero.split(',').map(|v| v.parse().unwrap()).collect();
    assert!(cols[1] < -0.9 && cols[2] > 0.9);
    assert!(fs::read_to_string(dir.path().join("config.json"))
        .unwrap()
        .contains("\"n_bars\""));
}

#[test]
fn empty_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "meanfield",
        "--out-dir",
        &out_arg(dir.path()),
        "--mf-b-min",
        "1",
        "--mf-b-max",
        "0",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn config_file_wins_over_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"double_slit": {"eval_episodes": 10}}"#).unwrap();
    let out = cli(&[
        "double-slit",
        "--out-dir",
        &out_arg(&dir.path().join("o")),
        "--ds-eval-episodes",
        "50",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("episodes=10 "));
    let episodes = fs::read_to_string(dir.path().join("o/double_slit_episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 2 + 10);
}

#[test]
fn double_slit_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        assert!(cli(&["double-slit", "--out-dir", &out_arg(&d), "--ds-seed", "4"])
            .status
            .success());
        fs::read(d.join("double_slit_episodes.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn missing_inputs_fail_with_hints() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "tables",
        "--out-dir",
        &out_arg(dir.path()),
        "--policy",
        "/no/such/policy.txt",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("/no/such/policy.txt") && err.contains("train-eval"),
        "{err}"
    );

    let out = cli(&[
        "train-eval",
        "--out-dir",
        &out_arg(dir.path()),
        "--data-dir",
        "/no/such/mnist",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fetch_mnist"));

    let out = cli(&["policy-dump", "--out-dir", &out_arg(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn policy_dump_summarizes_a_saved_table() {
    let dir = tempfile::tempdir().unwrap();
    let geometry = interference::geometry::Geometry::mnist(&[0, 1, 2, 4]).unwrap();
    let policy = interference::policy::RoutePolicy::init_uniform(&geometry);
    let path = dir.path().join("p.txt");
    fs::write(&path, policy.to_text()).unwrap();
    let out = cli(&[
        "policy-dump",
        "--out-dir",
        &out_arg(dir.path()),
        "--policy",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# policy_checksum={}", policy.checksum())
    );
    assert_eq!(
        lines.next().unwrap(),
        "source,row,col,label,feasible_mass,mean_duration,mode_duration"
    );
    // Source (0,0) toward corner (-1,-1): distance 2, 23 of 25 slots feasible.
    assert_eq!(lines.next().unwrap(), "0,0,0,0,0.920000000,12.000000,0");
    assert_eq!(text.lines().count(), 2 + 81 * 4);
}
