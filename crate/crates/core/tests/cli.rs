//! End-to-end tests of the `phi4lab` binary: argument handling, exit codes,
//! and the report files a run leaves behind.

use std::path::Path;
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_phi4lab")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(binary()).current_dir(dir).args(args).output().expect("binary launches")
}

const PASSING: &str = r#"
experiments = ["bounds", "smatrix"]
seed = 3

[model]
mass = 1.0
box_length = 6.2831853071795862
mode_cutoff = 1
particle_cutoff = 2
shift_c = 0.5

[[coupling]]
amplitude = 0.4
temporal = { kind = "bump", center = 0.0, halfwidth = 0.3 }
spatial = { kind = "bump", center = 0.0, halfwidth = 1.0 }

[time]
t1 = 0.5
t2 = 0.5
dt = 0.03125

[output]
directory = "reports"
"#;

const FREE: &str = r#"
experiments = ["smatrix"]

[model]
mass = 1.0
box_length = 6.2831853071795862
mode_cutoff = 1
particle_cutoff = 2
shift_c = 0.5

[time]
t1 = 0.5
t2 = 0.5
dt = 0.03125

[output]
directory = "reports"
"#;

#[test]
fn listing_exits_zero_with_one_row_per_experiment() {
    let out = Command::new(binary()).arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 8, "{text}");
    for name in ["bounds", "smoothness", "propagate", "smatrix", "causality", "qcheck", "sweep", "dyson"] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn run_passes_and_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), PASSING).unwrap();

    let out = run_in(dir.path(), &["run", "--config", "run.toml", "--out", "a"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("bounds: pass"), "{stdout}");
    assert!(stdout.contains("smatrix: pass"), "{stdout}");

    let out = run_in(dir.path(), &["run", "--config", "run.toml", "--out", "b", "--threads", "2"]);
    assert!(out.status.success());
    for name in ["bounds.json", "bounds.csv", "smatrix.json"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }

    let manifest = std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap();
    assert!(manifest.contains("\"config_digest\""));
    assert!(manifest.contains("\"seed\": 3"));

    // Flag overrides land in the manifest.
    let out = run_in(dir.path(), &["run", "--config", "run.toml", "--out", "c", "--seed", "99"]);
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(dir.path().join("c/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 99"));
}

#[test]
fn free_coupling_reports_an_identity_scattering_matrix() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("free.toml"), FREE).unwrap();
    let out = run_in(dir.path(), &["run", "--config", "free.toml", "--out", "r"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let verdict = std::fs::read_to_string(dir.path().join("r/smatrix.json")).unwrap();
    assert!(verdict.contains("free scattering is the identity"), "{verdict}");
    assert!(verdict.contains("\"passed\": true"));
}

#[test]
fn configuration_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| std::fs::write(dir.path().join(name), text).unwrap();

    write("negative_mass.toml", &PASSING.replace("mass = 1.0", "mass = -1.0"));
    let out = run_in(dir.path(), &["run", "--config", "negative_mass.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.mass"));

    write("syntax.toml", "[model\nmass = 1.0");
    let out = run_in(dir.path(), &["run", "--config", "syntax.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    write("unknown.toml", &format!("{PASSING}\n[extra]\nknob = 1\n"));
    let out = run_in(dir.path(), &["run", "--config", "unknown.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown"));

    let out = run_in(dir.path(), &["run", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(2));

    // No report directory appears for a rejected config.
    assert!(!dir.path().join("reports").exists());
}

#[test]
fn failed_verdicts_exit_one_but_reports_are_written() {
    // Force a failure honestly: a growth bound of 1.05 cannot hold across
    // the particle-cutoff step where new operator classes enter.
    let config = PASSING
        .replace("experiments = [\"bounds\", \"smatrix\"]", "experiments = [\"sweep\"]")
        + "\n[tolerances]\nsweep_growth = 1.05\n";
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), &config).unwrap();

    let out = run_in(dir.path(), &["run", "--config", "run.toml", "--out", "r"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("sweep: FAIL"));

    let verdict = std::fs::read_to_string(dir.path().join("r/sweep.json")).unwrap();
    assert!(verdict.contains("\"passed\": false"));
    assert!(dir.path().join("r/sweep.csv").is_file());
    assert!(dir.path().join("r/manifest.json").is_file());
}

#[test]
fn dump_writes_the_operator_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("free.toml"), FREE).unwrap();

    let out = run_in(dir.path(), &["dump", "--config", "free.toml", "--out", "da", "--time", "0.25"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let names = ["h0.mtx", "number.mtx", "v_g.mtx", "h_tilde.mtx", "w_kernel.knl"];
    for name in names {
        assert!(dir.path().join("da").join(name).is_file(), "missing {name}");
    }

    // Dumps are deterministic byte for byte.
    run_in(dir.path(), &["dump", "--config", "free.toml", "--out", "db", "--time", "0.25"]);
    for name in names {
        assert_eq!(
            std::fs::read(dir.path().join("da").join(name)).unwrap(),
            std::fs::read(dir.path().join("db").join(name)).unwrap(),
            "{name} differs between dumps"
        );
    }

    // Switched-off coupling: the interaction dump is a zero matrix of the
    // full dimension.
    let v_g = std::fs::read_to_string(dir.path().join("da/v_g.mtx")).unwrap();
    let mut lines = v_g.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("phi4lab-matrix dim=10 "), "{header}");
    let mut entries = 0usize;
    for line in lines {
        for token in line.split_whitespace() {
            assert_eq!(token.parse::<f64>().unwrap(), 0.0);
            entries += 1;
        }
    }
    assert_eq!(entries, 2 * 10 * 10);
}
