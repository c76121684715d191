use std::path::Path;
use std::process::{Command, Output};

fn packshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_packshift")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn empty_trace_exits_cleanly_with_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let config = dir.path().join("c.json");
    let report = dir.path().join("r.csv");
    std::fs::write(&trace, "").unwrap();
    std::fs::write(&config, r#"{"problem":"strip2d","epsilon":"1/10"}"#).unwrap();
    let out = packshift(&["run", "--config", path(&config), "--trace", path(&trace), "--out", path(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.trim_end(), "t,op,id,cost,live_cost,lb,phase_end,migrated,ledger_factor,bound,bound_ok");
}

#[test]
fn generated_churn_runs_strictly() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let config = dir.path().join("c.json");
    let report = dir.path().join("r.csv");
    let spec = r#"{"problem":"strip2d","pattern":"churn","n":500,"depart_prob":0.3}"#;
    let out = packshift(&["generate", "--spec", spec, "--seed", "7", "--out", path(&trace)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(&config, r#"{"problem":"strip2d","epsilon":"1/10"}"#).unwrap();
    let run = |out: &Path| {
        packshift(&[
            "run", "--config", path(&config), "--trace", path(&trace), "--check", "--strict", "--out", path(out),
        ])
    };
    let out = run(&report);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 501);

    let again = dir.path().join("r2.csv");
    assert_eq!(code(&run(&again)), 0);
    assert_eq!(std::fs::read(&again).unwrap(), csv.into_bytes());
}

#[test]
fn json_lines_go_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let config = dir.path().join("c.json");
    std::fs::write(
        &trace,
        "{\"t\":1,\"op\":\"insert\",\"id\":\"a\",\"kind\":\"vector\",\"components\":[\"0.6\",\"0.1\"]}\n\
         {\"t\":2,\"op\":\"insert\",\"id\":\"b\",\"kind\":\"vector\",\"components\":[\"0.6\",\"0.1\"]}\n",
    )
    .unwrap();
    std::fs::write(&config, r#"{"problem":"vector","epsilon":"1/100"}"#).unwrap();
    let out = packshift(&["run", "--config", path(&config), "--trace", path(&trace)]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<serde_json::Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["cost"], "2/1");
}

#[test]
fn bad_input_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    let trace = dir.path().join("t.jsonl");
    std::fs::write(&config, r#"{"problem":"strip2d","epsilon":"1/10"}"#).unwrap();
    std::fs::write(&trace, "{\"t\":0,\"op\":\"depart\",\"id\":\"nobody\"}\n").unwrap();
    let out = packshift(&["run", "--config", path(&config), "--trace", path(&trace)]);
    assert_eq!(code(&out), 3);

    std::fs::write(&config, r#"{"problem":"strip2d","epsilon":"3/4"}"#).unwrap();
    assert_eq!(code(&packshift(&["run", "--config", path(&config), "--trace", path(&trace)])), 3);

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&packshift(&["run", "--config", path(&missing)])), 3);

    let out = packshift(&["generate", "--spec", r#"{"problem":"strip2d","pattern":"nope"}"#, "--out", path(&trace)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn validate_accepts_a_written_solution_and_rejects_a_broken_one() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let config = dir.path().join("c.json");
    let solution = dir.path().join("s.json");
    let spec = r#"{"problem":"bin2d","pattern":"churn","n":80,"depart_prob":0.3}"#;
    assert_eq!(code(&packshift(&["generate", "--spec", spec, "--seed", "3", "--out", path(&trace)])), 0);
    std::fs::write(&config, r#"{"problem":"bin2d","epsilon":"1/4"}"#).unwrap();
    let out = packshift(&[
        "run", "--config", path(&config), "--trace", path(&trace), "--out", path(&dir.path().join("r.json")),
        "--solution-out", path(&solution),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ok = packshift(&["validate", "--trace", path(&trace), "--solution", path(&solution)]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));

    // move every item to the origin of bin 0
    let mut file: serde_json::Value = serde_json::from_slice(&std::fs::read(&solution).unwrap()).unwrap();
    for p in file["placements"].as_array_mut().unwrap() {
        p["bin"] = 0.into();
        for c in p["offset"].as_array_mut().unwrap() {
            *c = "0/1".into();
        }
    }
    std::fs::write(&solution, serde_json::to_vec(&file).unwrap()).unwrap();
    let bad = packshift(&["validate", "--trace", path(&trace), "--solution", path(&solution)]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn oracles_evaluate_live_items() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    std::fs::write(
        &trace,
        "{\"t\":0,\"op\":\"insert\",\"id\":\"a\",\"kind\":\"vector\",\"components\":[\"0.6\",\"0.1\"]}\n\
         {\"t\":1,\"op\":\"insert\",\"id\":\"b\",\"kind\":\"vector\",\"components\":[\"0.6\",\"0.1\"]}\n\
         {\"t\":2,\"op\":\"depart\",\"id\":\"a\"}\n",
    )
    .unwrap();
    let oracle = |at: &str, kind: &str| {
        let out = packshift(&["oracle", "--trace", path(&trace), "--at", at, "--kind", kind]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["value"].as_str().unwrap().to_string()
    };
    assert_eq!(oracle("1", "vector-exact"), "2/1");
    assert_eq!(oracle("2", "vector-exact"), "1/1");
    assert_eq!(oracle("1", "bounds"), "2/1");
    let out = packshift(&["oracle", "--trace", path(&trace), "--at", "1", "--kind", "bottom-left"]);
    assert_eq!(code(&out), 3);
}
