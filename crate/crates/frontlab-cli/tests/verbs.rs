//! End-to-end checks of the CLI verbs and their exit codes, driving the
//! compiled binary directly.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn frontlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontlab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary must spawn")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const STEADY: &str = "equation = qg\nresolution = 64\nscenario = shear\nt_end = 0.5\n\
                      snapshot_interval = 0.25\noutput_dir = steady\n\
                      front.g1 = 0.5\nfront.g2 = 0\nfront.window = 0.5 2\nfront.bracket = 1.5 4.5\n";

#[test]
fn scenarios_lists_the_registry() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frontlab(&["scenarios"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["saddle", "shear", "taylor-green", "two-band"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
    assert!(
        text.contains("eps ="),
        "two-band parameters should be listed"
    );
}

#[test]
fn run_produces_a_bundle_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.cfg", STEADY);
    let out = frontlab(&["run", &cfg], tmp.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(tmp.path().join("steady/diagnostics.csv").exists());
    assert!(tmp.path().join("steady/manifest.txt").exists());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ReachedEnd"), "{text}");
}

#[test]
fn bad_config_exits_two_and_names_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "equation = mhd\nwhat = 1\n");
    let out = frontlab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unsupported equation"), "{err}");
    assert!(err.contains("unknown key 'what'"), "{err}");
    assert!(err.contains("missing required key 'resolution'"), "{err}");
}

#[test]
fn front_failure_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "nofront.cfg",
        "equation = qg\nresolution = 64\nscenario = two-band\nt_end = 0.5\noutput_dir = broken\n\
         front.g1 = 5\nfront.g2 = 6\nfront.window = 0.5 2\nfront.bracket = 3.2 6.2\n",
    );
    let out = frontlab(&["run", &cfg], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(tmp.path().join("broken/abort.txt").exists());
}

#[test]
fn solver_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "blowup.cfg",
        "equation = euler\nresolution = 64\nscenario = two-band\nscenario.eps = 1e12\n\
         t_end = 0.5\noutput_dir = blowup\n",
    );
    let out = frontlab(&["run", &cfg], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(tmp.path().join("blowup/abort.txt").exists());
}

#[test]
fn compare_prints_a_table_and_rejects_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_a = write_config(tmp.path(), "a.cfg", STEADY);
    let steady_b = STEADY.replace("output_dir = steady", "output_dir = steady-b");
    let cfg_b = write_config(tmp.path(), "b.cfg", &steady_b);
    assert!(frontlab(&["run", &cfg_a], tmp.path()).status.success());
    assert!(frontlab(&["run", &cfg_b], tmp.path()).status.success());

    let out = frontlab(&["compare", "steady", "steady-b"], tmp.path());
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("64x64"), "{table}");

    let other = "equation = euler\nresolution = 64\nscenario = taylor-green\nt_end = 0.25\noutput_dir = tg\n";
    let cfg_c = write_config(tmp.path(), "c.cfg", other);
    assert!(frontlab(&["run", &cfg_c], tmp.path()).status.success());
    let out = frontlab(&["compare", "steady", "tg"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resume_picks_up_the_bundle_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.cfg", STEADY);
    assert!(frontlab(&["run", &cfg], tmp.path()).status.success());
    let out = frontlab(
        &["resume", "steady/checkpoints/final.ckpt", "--t-end", "1.0"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let resumed = tmp.path().join("steady-resumed/diagnostics.csv");
    assert!(resumed.exists());
    let text = fs::read_to_string(resumed).unwrap();
    let last = text.lines().last().unwrap();
    assert!(
        last.starts_with("1e0,"),
        "final row should sit at t = 1: {last}"
    );
}
