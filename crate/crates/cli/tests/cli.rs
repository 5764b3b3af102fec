use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_risofdm"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("risofdm-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().args(["-q", "-o"]).arg(out).args(args).output().unwrap()
}

const SMALL: [&str; 6] = [
    "--set", "system.n_bs_antennas=16",
    "--set", "system.n_ris_elements=9",
    "--set", "system.n_users=3",
];

#[test]
fn short_cyclic_prefix_is_a_config_error() {
    let out = scratch("cp");
    let o = run(&out, &["--set", "system.cp_length=0", "closed-form"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("cyclic prefix"));
}

#[test]
fn unknown_override_key_is_a_config_error() {
    let out = scratch("badkey");
    let o = run(&out, &["--set", "system.bogus=1", "closed-form"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&out, &["--set", "no_equals_sign", "closed-form"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_is_reproducible_for_a_seed() {
    let (a, b) = (scratch("opt-a"), scratch("opt-b"));
    for dir in [&a, &b] {
        let mut args = SMALL.to_vec();
        args.extend(["--seed", "7", "optimize"]);
        let o = run(dir, &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = std::fs::read_to_string(a.join("theta_opt.csv")).unwrap();
    let tb = std::fs::read_to_string(b.join("theta_opt.csv")).unwrap();
    assert_eq!(ta, tb);
    assert!(ta.starts_with("element,theta\n"));
    assert_eq!(ta.lines().count(), 10);
    assert!(a.join("optimize_trace.csv").exists());
}

#[test]
fn theta_file_feeds_back_into_simulate() {
    let out = scratch("theta");
    let mut args = SMALL.to_vec();
    args.push("optimize");
    assert!(run(&out, &args).status.success());
    let theta = out.join("theta_opt.csv");
    let mut args = SMALL.to_vec();
    args.extend(["simulate", "--trials", "20", "--theta", theta.to_str().unwrap()]);
    let o = run(&out, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("simulate.csv").exists());
}

#[test]
fn sweep_writes_csv_and_metadata() {
    let out = scratch("sweep");
    let mut args = SMALL.to_vec();
    args.extend(["--seed", "5", "sweep", "--axis", "bits", "--grid", "1,2,inf", "--methods", "closed_form,mc_approx"]);
    let o = run(&out, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("axis,value,phases,method,user,rate,std_err\n"));
    assert!(csv.contains(",inf,"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(meta["scenario"]["seed"], 5);
    assert_eq!(meta["scenario"]["n_ris_elements"], 9);
    assert!(meta["version"].is_string());
}

#[test]
fn sweep_with_invalid_point_reports_numeric_failure() {
    let out = scratch("sweep-bad");
    let mut args = SMALL.to_vec();
    args.extend(["sweep", "--axis", "nb", "--grid", "16,20"]);
    let o = run(&out, &args);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("sweep.csv").exists());
}

#[test]
fn validate_passes_at_modest_draws() {
    let out = scratch("validate");
    let o = run(
        &out,
        &[
            "--set", "system.n_bs_antennas=9",
            "--set", "system.n_ris_elements=4",
            "--set", "system.n_users=2",
            "validate", "--draws", "20000",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("validate.csv")).unwrap();
    assert!(csv.lines().count() > 10);
}
