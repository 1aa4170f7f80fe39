//! Black-box checks of the `duochirp` binary: exit codes, CSV output, the
//! stream-dump container, and plan validation.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_duochirp"))
}

fn temp_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("duochirp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_prints_parseable_csv_and_respects_out() {
    let dir = temp_dir();
    let cfg = dir.join("tiny.cfg");
    std::fs::write(
        &cfg,
        "l_antennas = 4\nn_users = 2\ntrials = 6\nsnr_grid_db = -5, 0\npayload_min = 2\npayload_max = 3\n",
    )
    .unwrap();

    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--threads", "1", "run"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let parsed = duochirp::harness::parse_csv(&stdout_of(&out)).unwrap();
    assert_eq!(parsed.points.len(), 2);
    assert_eq!(parsed.points[0].trials, 6);

    let csv = dir.join("tiny.csv");
    let out2 = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            "1",
            "--out",
            csv.to_str().unwrap(),
            "run",
        ])
        .output()
        .unwrap();
    assert!(out2.status.success(), "{}", stderr_of(&out2));
    let from_disk = duochirp::harness::parse_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(from_disk, parsed, "stdout and --out must agree");
}

#[test]
fn missing_config_file_exits_with_io_code() {
    let out = bin()
        .args(["--config", "/nonexistent/duochirp.cfg", "run"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let dir = temp_dir();
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "sf = 40\n").unwrap();
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("error:"));
}

#[test]
fn validate_plan_distinguishes_good_and_bad_plans() {
    let dir = temp_dir();
    let good = dir.join("good.plan");
    std::fs::write(&good, "m = 128\ned_1 = 0, 30\ned_2 = 8, 24\ned_3 = 2, 40\n").unwrap();
    let out = bin()
        .args(["validate-plan", good.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("plan valid: 3 devices"));

    // (0,30) and (2,32) share a pairwise difference; (5,69) is self-resembling.
    let bad = dir.join("bad.plan");
    std::fs::write(&bad, "m = 128\ned_1 = 0, 30\ned_2 = 2, 32\ned_3 = 5, 69\n").unwrap();
    let out = bin()
        .args(["validate-plan", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_of(&out);
    assert!(report.contains("EDs 1 and 2 share"), "{report}");
    assert!(report.contains("self-resembling"), "{report}");
    assert!(stderr_of(&out).contains("violation"), "{}", stderr_of(&out));
}

#[test]
fn dump_stream_writes_binary_container() {
    let dir = temp_dir();
    let cfg = dir.join("dump.cfg");
    std::fs::write(
        &cfg,
        "l_antennas = 2\nn_users = 2\npayload_min = 2\npayload_max = 3\n",
    )
    .unwrap();

    let no_out = bin()
        .args(["--config", cfg.to_str().unwrap(), "dump-stream"])
        .output()
        .unwrap();
    assert_eq!(no_out.status.code(), Some(1));
    assert!(stderr_of(&no_out).contains("requires --out"));

    let raw = dir.join("trial.cniq");
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            raw.to_str().unwrap(),
            "dump-stream",
            "--snr-db",
            "3.0",
            "--trial-index",
            "4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("wrote 2 antennas"));

    let bytes = std::fs::read(&raw).unwrap();
    assert_eq!(&bytes[..4], b"CNIQ");
    let l = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let m = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    assert_eq!(l, 2);
    assert_eq!(m, 128);
    assert_eq!(bytes.len(), 32 + l * t * 16, "header plus L*T complex f64s");

    // The container reads back into the same stream shape.
    let (stream, m_back) = duochirp::channel::read_stream(&raw).unwrap();
    assert_eq!(stream.antennas(), 2);
    assert_eq!(stream.t, t);
    assert_eq!(m_back, m);
}

#[test]
fn scenario_subcommand_reports_and_rejects_unknown_names() {
    let out = bin().args(["scenario", "self-resemblance"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("16 of 16 grid peaks"), "{text}");
    assert!(text.trim_end().ends_with(": ok"), "{text}");

    let unknown = bin().args(["scenario", "fig99"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr_of(&unknown).contains("unknown scenario"));
}
