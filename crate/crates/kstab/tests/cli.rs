use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn kstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstab")).args(args).env("KSTAB_THREADS", "1").output().unwrap()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    fs::write(&p, body).unwrap();
    p
}

fn interval_scenario(name: &str, pl: &str, tasks: &str) -> String {
    format!(
        r#"{{"name": "{name}", "polytope": {{"dim": 1, "vertices": [["0"], ["1"]]}}, "pl": {pl}, "tasks": {tasks}}}"#
    )
}

fn run(scenario: &Path, out: &Path) -> Output {
    kstab(&["run", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    match fs::read_dir(dir) {
        Ok(it) => it.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn invariants_of_affine_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(
        tmp.path(),
        "line",
        &interval_scenario("line", r#"[["1", "0"]]"#, r#"[{"kind": "invariants"}]"#),
    );
    let out = tmp.path().join("out");
    let o = run(&s, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["tasks"][0]["df"]["value"], "0/1");
    assert_eq!(r["tasks"][0]["minimum_norm"]["value"], "1/2");
    assert!(files_in(&out.join("traces")).is_empty());
}

#[test]
fn vee_df_slope_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let body = interval_scenario(
        "vee",
        r#"[["1", "0"], ["-1", "1"]]"#,
        r#"[{"kind": "invariants"}, {"kind": "slopes", "theorems": ["DF"]}]"#,
    );
    let s = write_scenario(tmp.path(), "vee", &body);
    let out = tmp.path().join("out");
    let o = run(&s, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["tasks"][0]["df"]["value"], "1/2");
    let v = &r["tasks"][1]["verdicts"][0];
    assert_eq!(v["theorem"], "DF");
    assert_eq!(v["exact"], "1/2");
    assert_eq!(v["pass"], true);
    assert_eq!(v["tier"], "experimental");
}

#[test]
fn malformed_json_exits_two_with_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(tmp.path(), "bad", "{\"name\": \"bad\",\n \"polytope\": [1, }");
    let out = tmp.path().join("out");
    let o = run(&s, &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    // byte 33 is the stray closing brace
    assert!(err.contains("byte 33"), "{err}");
    assert!(!out.exists());
}

#[test]
fn empty_task_list_is_rejected_without_files() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(tmp.path(), "empty", &interval_scenario("empty", r#"[["1", "0"]]"#, "[]"));
    let out = tmp.path().join("out");
    assert_eq!(run(&s, &out).status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn bad_vertex_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let tasks = r#"[{"kind": "slopes", "theorems": ["POINT(1/2)"]}]"#;
    let s = write_scenario(tmp.path(), "v", &interval_scenario("v", r#"[["1", "0"]]"#, tasks));
    assert_eq!(run(&s, &tmp.path().join("out")).status.code(), Some(3));
}

#[test]
fn one_slope_task_gives_one_csv_and_one_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("jflow.json");
    fs::write(&s, include_str!("../scenarios/interval_jflow.json")).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&s, &out).status.code(), Some(0));
    assert_eq!(files_in(&out.join("traces")), vec!["task0_slopes.csv".to_string()]);
    assert_eq!(files_in(&out.join("plots")), vec!["task0_jalpha.svg".to_string()]);
    let svg = fs::read_to_string(out.join("plots/task0_jalpha.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
}

#[test]
fn reruns_are_identical_up_to_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("line.json");
    fs::write(&s, include_str!("../scenarios/interval_line.json")).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&s, &a).status.code(), Some(0));
    assert_eq!(run(&s, &b).status.code(), Some(0));
    let strip = |p: &Path| {
        let mut v = report(p);
        v.as_object_mut().unwrap().remove("timestamp");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(strip(&a), strip(&b));
    for f in ["traces/task1_slopes.csv", "plots/task1_am.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failed_verdict_exits_one_and_still_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let tasks = r#"[{"kind": "slopes", "theorems": ["AM"], "tol": 1e-16}]"#;
    let s = write_scenario(tmp.path(), "strict", &interval_scenario("strict", r#"[["1", "0"]]"#, tasks));
    let out = tmp.path().join("out");
    assert_eq!(run(&s, &out).status.code(), Some(1));
    assert_eq!(report(&out)["pass"], false);
}

#[test]
fn unwritable_output_exits_five() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write_scenario(
        tmp.path(),
        "line",
        &interval_scenario("line", r#"[["1", "0"]]"#, r#"[{"kind": "invariants"}]"#),
    );
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&s, &blocker.join("out")).status.code(), Some(5));
}

#[test]
fn tau_max_override_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let tasks = r#"[{"kind": "slopes", "theorems": ["AM"]}]"#;
    let s = write_scenario(tmp.path(), "t", &interval_scenario("t", r#"[["1", "0"]]"#, tasks));
    let out = tmp.path().join("out");
    let o =
        kstab(&["run", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--tau-max", "14", "--quad-order", "14"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["options"]["tau_max"], 14.0);
    assert_eq!(r["tasks"][0]["schedule"]["taus"].as_array().unwrap().last().unwrap(), 14.0);
}

#[test]
fn check_suite_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kstab(&["check-suite", "--out", tmp.path().to_str().unwrap(), "--filter", "simplex"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("simplex_blowup") && text.contains("PASS"), "{text}");
    assert!(tmp.path().join("simplex_blowup/report.json").exists());
}
