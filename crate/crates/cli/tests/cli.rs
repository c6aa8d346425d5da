use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn srbounds(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srbounds"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bound_reports_interval_and_embeds_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = srbounds(&["bound", "--d", "4", "--objective", "x2", "--out", "b.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("lower=optimal upper=optimal"));
    let doc = read_json(&dir.path().join("b.json"));
    assert_eq!(doc["config"]["command"]["bound"]["d"], 4);
    assert_eq!(doc["config"]["argv"][0], "bound");
    assert_eq!(doc["results"][0]["status_lower"], "optimal");
    assert_eq!(doc["model"]["variables"], serde_json::json!(["X", "y", "z"]));
}

#[test]
fn rational_and_decimal_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = srbounds(&["bound", "--d", "3", "--objective", "a1", "--A", "0.3", "--D", "0.5"], dir.path());
    let b = srbounds(&["bound", "--d", "3", "--objective", "a1", "--A", "3/10", "--D", "1/2"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a).split('(').next(), stdout(&b).split('(').next());
}

#[test]
fn degree_one_is_unbounded() {
    let dir = tempfile::tempdir().unwrap();
    let o = srbounds(&["bound", "--d", "1"], dir.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("unbounded"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let odd = srbounds(&["bound", "--objective", "x1", "--d", "2"], dir.path());
    assert_eq!(odd.status.code(), Some(2));
    assert!(stderr(&odd).contains("odd under the sign symmetry"));
    for args in [
        vec!["bound", "--D", "-1"],
        vec!["bound", "--A", "abc"],
        vec!["bound", "--objective", "x^9", "--d", "2"],
        vec!["bound", "--no-such-flag"],
        vec!["scan", "--grid", "0.5:0.1"],
        vec!["scan", "--grid", "1:0.5:3"],
        vec!["export", "--d", "2", "--objective", "x3"],
        vec!["oracle", "quad", "--D", "0"],
    ] {
        let o = srbounds(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn export_has_the_expected_block_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.dat-s", "b.dat-s"] {
        let o = srbounds(&["export", "--d", "2", "--out", name], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let a = std::fs::read(dir.path().join("a.dat-s")).unwrap();
    let text = String::from_utf8(a.clone()).unwrap();
    let blocks = text.lines().find(|l| l.ends_with("= bLOCKsTRUCT")).unwrap();
    assert!(blocks.starts_with("10 "), "{blocks}");
    assert!(text.lines().any(|l| l.starts_with("* config=")));
    let b = std::fs::read(dir.path().join("b.dat-s")).unwrap();
    // The configs differ only in the output path.
    let strip = |bytes: &[u8]| -> String {
        String::from_utf8_lossy(bytes)
            .lines()
            .filter(|l| !l.starts_with("* config="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn single_point_scan_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = srbounds(
        &["scan", "--grid", "0.5:0.5:1", "--d", "4", "--csv", "s.csv", "--json", "s.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("at grid endpoint"));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("# config="));
    assert!(lines[2].starts_with("5.0000000000000000e-1,"));
    let doc = read_json(&dir.path().join("s.json"));
    assert_eq!(doc["rows"].as_array().unwrap().len(), 1);
    assert!(doc["rows"][0].get("wall_time_s").is_none());
}

#[test]
fn oracle_outputs_embed_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = srbounds(&["oracle", "quad", "--D", "0.5", "--orders", "2,3,4", "--out", "q.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let doc = read_json(&dir.path().join("q.json"));
    assert_eq!(doc["moments"]["3"], 0.0);
    assert!(doc["moments"]["2"].as_f64().unwrap() > 0.8);
    assert_eq!(doc["config"]["command"]["oracle"]["quad"]["orders"], serde_json::json!([2, 3, 4]));

    let em = srbounds(
        &["oracle", "em", "--periods", "20", "--burn-in-periods", "4", "--paths", "8", "--out", "e.json"],
        dir.path(),
    );
    assert_eq!(em.status.code(), Some(0), "{}", stderr(&em));
    let doc = read_json(&dir.path().join("e.json"));
    assert_eq!(doc["estimate"]["method"], "em");
    assert_eq!(doc["estimate"]["metadata"]["params"]["A"], "3/10");
}

#[test]
fn oracle_em_instability_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = srbounds(&["oracle", "em", "--dt", "1.2", "--x0", "5", "--periods", "10", "--burn-in-periods", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("instability"));
}

#[test]
fn compare_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let scan = srbounds(
        &["scan", "--grid", "0.5:0.5:1", "--csv", "s.csv", "--json", "s.json"],
        dir.path(),
    );
    assert_eq!(scan.status.code(), Some(0));
    let fp = srbounds(&["oracle", "fp", "--D", "1/2", "--out", "fp.json"], dir.path());
    assert_eq!(fp.status.code(), Some(0), "{}", stderr(&fp));

    let ok = srbounds(&["compare", "--table", "s.json", "--oracle", "fp.json"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}{}", stdout(&ok), stderr(&ok));
    assert!(stdout(&ok).contains("1 checks, 0 violations"));

    let mut doc = read_json(&dir.path().join("fp.json"));
    doc["estimate"]["values"]["a1"] = serde_json::json!(0.5);
    std::fs::write(dir.path().join("bad.json"), doc.to_string()).unwrap();
    let bad = srbounds(&["compare", "--table", "s.json", "--oracle", "bad.json"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("violation"));

    let none = srbounds(&["compare", "--table", "s.json"], dir.path());
    assert_eq!(none.status.code(), Some(2));
}
