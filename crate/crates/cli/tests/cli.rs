use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade-verify"))
        .args(args)
        .output()
        .expect("spawn cascade-verify")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn micro_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let models = dir.path().join("models");
    let report = dir.path().join("report");

    let o = cli(&["--profile", "micro", "--jobs", "1", "synth", "--out", path(&corpus)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(corpus.join("manifest.csv").exists());
    assert!(corpus.join("config.resolved.toml").exists());

    let o = cli(&["describe", "--manifest", path(&corpus)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("utterances: 32 train, 32 test"), "{}", stdout(&o));

    let o = cli(&["--profile", "micro", "train", "--manifest", path(&corpus), "--models", path(&models)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("trained 16 models"), "{}", stdout(&o));

    let o = cli(&[
        "--profile", "micro", "evaluate", "--manifest", path(&corpus), "--models", path(&models),
        "--report", path(&report), "--modes", "three_stage",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(csv.contains("three_stage"));
    for other in ["one_stage", "two_stage_gender", "two_stage_emotion", "worst_case"] {
        assert!(!csv.contains(other), "{other} evaluated despite --modes");
    }
    assert!(report.join("det_three_stage.csv").exists());
    assert!(!report.join("det_one_stage.csv").exists());

    // Rebuilding from trials reproduces the report.
    let rebuilt = dir.path().join("rebuilt");
    let o = cli(&["report", "--trials", path(&report.join("trials.csv")), "--out", path(&rebuilt)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(rebuilt.join("report.csv")).unwrap(), csv);

    let wav = corpus.join("male/m00/neutral/s2_r0.wav");
    let verify = |threshold: &str, claimed: &str, mode: &str| {
        cli(&[
            "verify", "--models", path(&models), "--wav", path(&wav), "--claimed", claimed,
            "--threshold", threshold, "--mode", mode,
        ])
    };
    let o = verify("-inf", "m00", "three_stage");
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("ACCEPT"));
    assert!(stdout(&o).contains("G* = "));
    let o = verify("inf", "m00", "three_stage");
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("REJECT"));
    let o = verify("-inf", "m00", "forced(female,anger)");
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("forced gender = female, emotion = anger"));

    let o = verify("0", "nobody", "three_stage");
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nobody"));
    let o = verify("0", "m00", "sideways");
    assert_eq!(code(&o), 2);
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = cli(&["--profile", "micro", "--set", "synth.no_such_key=1", "synth", "--out", path(&out)]);
    assert_eq!(code(&o), 2);
    let o = cli(&["--profile", "nonexistent", "synth", "--out", path(&out)]);
    assert_eq!(code(&o), 2);
    let o = cli(&["describe", "--manifest", path(&dir.path().join("missing.csv"))]);
    assert_eq!(code(&o), 2);
    let o = cli(&["evaluate", "--manifest", "x", "--models", "y", "--report", "z", "--modes", "five_stage"]);
    assert_eq!(code(&o), 2);
}
