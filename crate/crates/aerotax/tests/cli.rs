//! Exercises the compiled binary end to end: subcommand chains, stdout
//! formats, and the documented exit codes (0 success, 2 validation,
//! 3 numerical).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aerotax(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerotax"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn synth_estimate_simulate_report_chain_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    let synth = aerotax(
        dir,
        &[
            "synth",
            "--routes",
            "20",
            "--periods",
            "132",
            "--seed",
            "5",
            "--out-dir",
            "data",
        ],
    );
    assert_eq!(synth.status.code(), Some(0), "{}", stderr_of(&synth));
    for file in ["airports.csv", "panel.csv", "dgp.json"] {
        assert!(dir.join("data").join(file).exists(), "missing {file}");
    }

    let estimate = aerotax(
        dir,
        &[
            "estimate",
            "--panel",
            "data/panel.csv",
            "--airports",
            "data/airports.csv",
            "--fit",
            "fit.json",
        ],
    );
    assert_eq!(estimate.status.code(), Some(0), "{}", stderr_of(&estimate));
    let stdout = stdout_of(&estimate);
    assert!(
        stdout.contains("log_fare"),
        "estimate table missing log_fare:\n{stdout}"
    );
    assert!(dir.join("fit.json").exists());

    fs::write(
        dir.join("config.json"),
        r#"{
  "fx_brl_per_eur": 3.9,
  "airports_path": "data/airports.csv",
  "panel_path": "data/panel.csv"
}
"#,
    )
    .unwrap();
    let simulate = aerotax(
        dir,
        &[
            "simulate",
            "--config",
            "config.json",
            "--fit",
            "fit.json",
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(simulate.status.code(), Some(0), "{}", stderr_of(&simulate));
    for file in [
        "impacts_10.csv",
        "impacts_15.csv",
        "impacts_30.csv",
        "manifest.json",
    ] {
        assert!(dir.join("out").join(file).exists(), "missing {file}");
    }

    // The report subcommand reproduces the engine's segment file exactly.
    let report = aerotax(
        dir,
        &[
            "report",
            "--impacts",
            "out/impacts_15.csv",
            "--panel",
            "data/panel.csv",
            "--airports",
            "data/airports.csv",
            "--dimension",
            "lf_band",
        ],
    );
    assert_eq!(report.status.code(), Some(0), "{}", stderr_of(&report));
    let expected = fs::read_to_string(dir.join("out/segments_15_lf_band.csv")).unwrap();
    assert_eq!(stdout_of(&report), expected);
}

/// A reader that hangs up mid-stream (`aerotax ... | head`) must kill the
/// process with SIGPIPE like any other pipeline member, not trip the Rust
/// runtime's broken-pipe panic. The read end is closed before spawning, so
/// the first stdout write deterministically hits EPIPE.
#[cfg(unix)]
#[test]
fn broken_stdout_pipe_is_not_a_panic() {
    use std::os::fd::FromRawFd;
    use std::os::unix::process::ExitStatusExt;
    use std::process::Stdio;

    let mut fds = [0i32; 2];
    assert_eq!(unsafe { libc::pipe(fds.as_mut_ptr()) }, 0);
    unsafe { libc::close(fds[0]) };
    let closed_stdout = unsafe { Stdio::from_raw_fd(fds[1]) };

    let output = Command::new(env!("CARGO_BIN_EXE_aerotax"))
        .arg("--help")
        .stdout(closed_stdout)
        .stderr(Stdio::piped())
        .output()
        .expect("binary runs");

    assert_eq!(output.status.signal(), Some(libc::SIGPIPE));
    assert!(
        output.stderr.is_empty(),
        "panic spew on stderr: {}",
        stderr_of(&output)
    );
}

#[test]
fn estimate_flags_toggle_fixed_effects_and_robust_se() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    let synth = aerotax(
        dir,
        &[
            "synth",
            "--routes",
            "8",
            "--periods",
            "132",
            "--seed",
            "9",
            "--out-dir",
            "data",
        ],
    );
    assert_eq!(synth.status.code(), Some(0), "{}", stderr_of(&synth));

    let pooled = aerotax(
        dir,
        &[
            "estimate",
            "--panel",
            "data/panel.csv",
            "--airports",
            "data/airports.csv",
            "--fixed-effects",
            "off",
            "--robust",
            "off",
            "--fit",
            "pooled.json",
        ],
    );
    assert_eq!(pooled.status.code(), Some(0), "{}", stderr_of(&pooled));
    let stdout = stdout_of(&pooled);
    assert!(
        stdout.contains("fixed effects off") && stdout.contains("classical standard errors"),
        "pooled header wrong:\n{stdout}"
    );
    assert!(stdout.contains("intercept"), "{stdout}");

    let within = aerotax(
        dir,
        &[
            "estimate",
            "--panel",
            "data/panel.csv",
            "--airports",
            "data/airports.csv",
            "--fixed-effects",
            "on",
            "--fit",
            "within.json",
        ],
    );
    assert_eq!(within.status.code(), Some(0), "{}", stderr_of(&within));
    let stdout = stdout_of(&within);
    assert!(
        stdout.contains("fixed effects on") && stdout.contains("HC1 standard errors"),
        "within header wrong:\n{stdout}"
    );
    // The within transformation absorbs the intercept.
    assert!(!stdout.contains("intercept"), "{stdout}");
}

#[test]
fn emissions_subcommand_prints_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    fs::write(
        dir.join("airports.csv"),
        "code,lat_deg,lon_deg,region\n\
         GRU,-23.4356,-46.4731,Sudeste\n\
         REC,-8.1264,-34.9236,Nordeste\n",
    )
    .unwrap();
    let output = aerotax(
        dir,
        &[
            "emissions",
            "--airports",
            "airports.csv",
            "--origin",
            "GRU",
            "--dest",
            "REC",
            "--class",
            "narrow",
            "--seats",
            "180",
            "--load-factor",
            "0.8",
        ],
    );
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("great_circle_km: 2100.824"), "{stdout}");
    assert!(stdout.contains("corrected_km: 2200.824"), "{stdout}");
    assert!(stdout.contains("co2_per_pax_tonnes: 0.174174"), "{stdout}");
}

#[test]
fn validation_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    fs::write(
        dir.join("bad.json"),
        r#"{"fx_brl_per_eur": 3.9, "modee": "full"}"#,
    )
    .unwrap();
    let unknown_key = aerotax(dir, &["simulate", "--config", "bad.json"]);
    assert_eq!(unknown_key.status.code(), Some(2));
    assert!(stderr_of(&unknown_key).contains("modee"));

    let missing_file = aerotax(
        dir,
        &[
            "estimate",
            "--panel",
            "nope.csv",
            "--airports",
            "also-nope.csv",
        ],
    );
    assert_eq!(missing_file.status.code(), Some(2));

    // Clap rejects malformed flag values with the same code.
    let bad_flag = aerotax(
        dir,
        &[
            "estimate",
            "--panel",
            "x",
            "--airports",
            "y",
            "--robust",
            "maybe",
        ],
    );
    assert_eq!(bad_flag.status.code(), Some(2));

    fs::write(dir.join("config.json"), r#"{"fx_brl_per_eur": 3.9}"#).unwrap();
    let missing_paths = aerotax(dir, &["simulate", "--config", "config.json"]);
    assert_eq!(missing_paths.status.code(), Some(2));
    assert!(stderr_of(&missing_paths).contains("airports_path is required"));
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    // Too short a panel: the event dummies never vary, so the design is
    // rank deficient.
    let synth = aerotax(
        dir,
        &[
            "synth",
            "--routes",
            "8",
            "--periods",
            "24",
            "--out-dir",
            "short",
        ],
    );
    assert_eq!(synth.status.code(), Some(0), "{}", stderr_of(&synth));
    fs::write(
        dir.join("short.json"),
        r#"{"fx_brl_per_eur": 3.9, "airports_path": "short/airports.csv", "panel_path": "short/panel.csv"}"#,
    )
    .unwrap();
    let rank = aerotax(
        dir,
        &["simulate", "--config", "short.json", "--out-dir", "out1"],
    );
    assert_eq!(rank.status.code(), Some(3), "{}", stderr_of(&rank));
    assert!(
        stderr_of(&rank).contains("rank deficient"),
        "{}",
        stderr_of(&rank)
    );

    // An upward-sloping generated demand curve leaves nothing to simulate.
    let upward = r#"{
  "intercept": 9.5, "log_pop_density": 0.35, "log_income": 0.45, "log_fare": 0.5,
  "d_codeshare": -0.15, "d_apagao": -0.2, "d_crisis": 0.0, "d_lowcost": 0.25,
  "log_fare_x_share_other_mode": 0.0, "log_fare_x_share_business": 0.0,
  "log_fare_x_d_lowcost": 0.0, "noise_sd": 0.3, "seed": 0
}"#;
    fs::write(dir.join("upward_dgp.json"), upward).unwrap();
    let synth = aerotax(
        dir,
        &[
            "synth",
            "--routes",
            "8",
            "--periods",
            "132",
            "--params",
            "upward_dgp.json",
            "--out-dir",
            "up",
        ],
    );
    assert_eq!(synth.status.code(), Some(0), "{}", stderr_of(&synth));
    fs::write(
        dir.join("up.json"),
        r#"{"fx_brl_per_eur": 3.9, "airports_path": "up/airports.csv", "panel_path": "up/panel.csv"}"#,
    )
    .unwrap();
    let skipped = aerotax(
        dir,
        &["simulate", "--config", "up.json", "--out-dir", "out2"],
    );
    assert_eq!(skipped.status.code(), Some(3), "{}", stderr_of(&skipped));
    assert!(
        stderr_of(&skipped).contains("skipped"),
        "{}",
        stderr_of(&skipped)
    );
    assert!(!dir.join("out2").join("manifest.json").exists());
}

#[test]
fn simulate_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let synth = aerotax(
        dir,
        &[
            "synth",
            "--routes",
            "10",
            "--periods",
            "132",
            "--seed",
            "8",
            "--out-dir",
            "data",
        ],
    );
    assert_eq!(synth.status.code(), Some(0));
    // The config points nowhere; flags supply the real paths and mode.
    fs::write(dir.join("config.json"), r#"{"fx_brl_per_eur": 3.9}"#).unwrap();
    let simulate = aerotax(
        dir,
        &[
            "simulate",
            "--config",
            "config.json",
            "--panel",
            "data/panel.csv",
            "--airports",
            "data/airports.csv",
            "--mode",
            "fixed:0.9",
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(simulate.status.code(), Some(0), "{}", stderr_of(&simulate));

    let manifest = fs::read_to_string(dir.join("out/manifest.json")).unwrap();
    assert!(
        manifest.contains("\"fixed\": 0.9"),
        "mode override not echoed:\n{manifest}"
    );
    // Fixed pass-through applies to every route: no skips from concentration.
    assert!(manifest.contains("\"n_skipped\": 0"), "{manifest}");
}
