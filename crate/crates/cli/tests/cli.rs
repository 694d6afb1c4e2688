use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "tiny"
frame = "nmr"

[model]
r_angstrom = 11.3

[bath]
kind = "drude-lorentz"
lambda_hz = 2.0
gamma_hz = 500.0
temperature_k = 1e-3

[time]
t_end_s = 0.001
points = 6

[initial_state]
site = 1

[ensemble]
realizations = 4
"#;

fn bench(args: &[&str], cwd: &Path, env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_excitonbench"));
    cmd.args(args).current_dir(cwd).env_remove("EXCITONBENCH_OUT");
    if let Some(p) = env_out {
        cmd.env("EXCITONBENCH_OUT", p);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_scenario_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.scenario"), "").unwrap();
    let o = bench(&["heom", "empty.scenario"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing field `name`"), "{}", stderr(&o));
}

#[test]
fn unknown_key_and_missing_file_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.scenario"), SMALL.replace("[model]", "[model]\nradius = 3")).unwrap();
    let o = bench(&["ensemble", "bad.scenario"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("radius"));
    let o = bench(&["ensemble", "nope.scenario"], dir.path(), None);
    assert_ne!(o.status.code(), Some(0));
    let o = bench(&["reproduce", "fig9"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ensemble_writes_to_requested_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.scenario"), SMALL).unwrap();
    let o = bench(&["ensemble", "tiny.scenario", "--out", "flag", "--seed", "3", "--sequential"], dir.path(), Some(&dir.path().join("env")));
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("flag/tiny/ensemble");
    assert!(run.join("manifest.json").is_file());
    let manifest = std::fs::read_to_string(run.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"parallel\": false"));
    assert!(manifest.contains("\"seeds\": [\n    3\n  ]"));
    assert!(!dir.path().join("env").exists());
}

#[test]
fn environment_variable_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.scenario"), SMALL).unwrap();
    let env = dir.path().join("env");
    let o = bench(&["heom", "tiny.scenario", "--depth", "2"], dir.path(), Some(&env));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env.join("tiny/heom/manifest.json").is_file());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn default_output_directory_is_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["tomo", "--states", "2"], dir.path(), None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("out/tomo/manifest.json").is_file());
}

#[test]
fn complexity_reports_exact_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["complexity", "--levels", "4", "--k", "1", "--n", "4"], dir.path(), None);
    assert!(o.status.success());
    assert!(stdout(&o).contains("70 ADMs"), "{}", stdout(&o));
    let o = bench(&["complexity"], dir.path(), None);
    assert!(stdout(&o).contains("depth 4 K 49 N 42: 751"));
    let csv = std::fs::read_to_string(dir.path().join("out/complexity/complexity.csv")).unwrap();
    assert!(csv.starts_with("depth,k,n,exact"));
}
