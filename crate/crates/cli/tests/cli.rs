use std::fs;
use std::process::Command;

fn lfsd(args: &[&str], cwd: &std::path::Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lfsd"))
        .args(args)
        .current_dir(cwd)
        .env("LFSD_NO_COLOR", "1")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lfsd(&["pipeline", "--bogus"], dir.path()).0, 1);
    assert_eq!(lfsd(&["--help"], dir.path()).0, 0);
    // from_margins needs data.
    assert_eq!(lfsd(&["pipeline", "--method", "margins", "--n", "10"], dir.path()).0, 1);
}

#[test]
fn unreadable_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ragged.csv"), "a,b\n1,2\n3\n").unwrap();
    let (code, _, err) = lfsd(&["pipeline", "--data", "ragged.csv", "--n", "5", "--keys", "a"], dir.path());
    assert_eq!(code, 1);
    assert!(err.contains("ragged.csv") || err.contains("row"), "{err}");
    assert_eq!(lfsd(&["pipeline", "--data", "absent.csv", "--n", "5", "--keys", "a"], dir.path()).0, 1);
}

#[test]
fn infer_writes_a_parseable_schema() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "sex,age\nF,31\nM,\nF,40\n").unwrap();
    let (code, out, _) = lfsd(&["infer", "--data", "d.csv"], dir.path());
    assert_eq!(code, 0);
    let parsed = lfsd_core::schema::parse_schema(&out).unwrap();
    assert!(!parsed.has_banner);
    assert!(parsed.schema.column("age").unwrap().missing_allowed);
}

#[test]
fn structured_format_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("sex,region\n");
    for i in 0..100 {
        csv.push_str(&format!("{},{}\n", ["F", "M"][i % 2], ["n", "s"][(i / 2) % 2]));
    }
    fs::write(dir.path().join("c.csv"), csv).unwrap();
    let (code, out, err) = lfsd(
        &["pipeline", "--data", "c.csv", "--n", "200", "--keys", "sex,region", "--out", "o", "--format", "structured"],
        dir.path(),
    );
    assert_eq!(code, 0, "{out}{err}");
    let report = lfsd_core::pipeline::FullReport::from_toml(&out).unwrap();
    assert!(report.passed());
    assert!(dir.path().join("o/c_synthetic.csv").exists());
}
