use std::process::{Command, Output};

use serde_json::Value;

fn sllift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sllift"))
        .args(args)
        .env_remove("SLLIFT_BUDGET")
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("one JSON record per line"))
        .collect()
}

fn one(out: &Output) -> Value {
    let mut r = records(out);
    assert_eq!(r.len(), 1, "stdout: {}", String::from_utf8_lossy(&out.stdout));
    r.pop().unwrap()
}

fn matrix(v: &Value) -> Vec<Vec<i128>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap().iter().map(|e| e.as_str().unwrap().parse().unwrap()).collect())
        .collect()
}

fn strip_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

#[test]
fn lift_example() {
    let out = sllift(&["lift", "--n", "2", "--q", "8", "--matrix", "5,0;0,5", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = one(&out);
    assert_eq!(r["command"], "lift");
    let g = matrix(&r["results"]["gamma_str"]);
    assert_eq!(g[0][0] * g[1][1] - g[0][1] * g[1][0], 1);
    let x = [[5, 0], [0, 5]];
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!((g[i][j] - x[i][j]).rem_euclid(8), 0);
        }
    }
    assert_eq!(r["results"]["verified"], true);
}

#[test]
fn lift_mod_one_is_identity() {
    let out = sllift(&["lift", "--n", "3", "--q", "1", "--matrix", "random", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let g = matrix(&one(&out)["results"]["gamma_str"]);
    assert_eq!(g, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
}

#[test]
fn lift_human_output() {
    let out = sllift(&["lift", "--n", "2", "--q", "8", "--matrix", "5,0;0,5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gamma ="), "{text}");
}

#[test]
fn exit_codes() {
    let det_two = sllift(&["lift", "--n", "2", "--q", "7", "--matrix", "2,0;0,1"]);
    assert_eq!(det_two.status.code(), Some(2));

    let bad = sllift(&["lift", "--n", "2", "--q", "7", "--matrix", "1,zz;0,1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("\"zz\""));

    assert_eq!(sllift(&["lift", "--n", "2", "--q", "0", "--matrix", "1,0;0,1"]).status.code(), Some(1));
    assert_eq!(sllift(&["lift", "--n", "1", "--q", "5", "--matrix", "1"]).status.code(), Some(1));
    assert_eq!(sllift(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sllift(&["--help"]).status.code(), Some(0));
    assert_eq!(sllift(&["hard", "--q", "8", "--sarnak-m", "1"]).status.code(), Some(1));
}

#[test]
fn sarnak_trace_rule() {
    let r = one(&sllift(&["hard", "--sarnak-m", "1", "--json"]));
    let ob = &r["results"]["obstruction"];
    assert_eq!(ob["kind"], "trace");
    assert_eq!(ob["modulus"], 64);
    assert_eq!(ob["residue"], 18);
    assert_eq!(matrix(&r["results"]["x_str"]), vec![vec![5, 0], vec![0, 5]]);
}

#[test]
fn small_modulus_is_vacuous() {
    let out = sllift(&["hard", "--q", "3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = one(&out);
    assert_eq!(r["results"]["vacuous"], true);
    assert_eq!(r["results"]["flagged"], false);
}

#[test]
fn hard_verified_by_oracle() {
    let out = sllift(&["hard", "--q", "8", "--verify-oracle", "64", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let res = &one(&out)["results"];
    assert_eq!(res["witness"]["alpha"], 57);
    assert_eq!(res["witness"]["beta"], 11);
    assert_eq!(res["oracle"]["status"], "found");
    assert_eq!(res["oracle"]["min_norm"], 13);
    assert_eq!(res["oracle"]["meets_bound"], true);
    assert_eq!(res["oracle"]["obstruction_holds"], true);
}

#[test]
fn budget_env_exits_three() {
    let out = Command::new(env!("CARGO_BIN_EXE_sllift"))
        .args(["hard", "--q", "8", "--verify-oracle", "64", "--json"])
        .env("SLLIFT_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let res = &one(&out)["results"];
    assert_eq!(res["flagged"], true);
    assert_eq!(res["oracle"]["status"], "budget_exceeded");
}

#[test]
fn drs_first_row() {
    let out = sllift(&["sweep", "drs", "--n", "2", "--T", "1..8"]);
    assert_eq!(out.status.code(), Some(0));
    let rs = records(&out);
    assert_eq!(rs.len(), 8);
    let first = &rs[0]["results"];
    assert_eq!((first["T"].as_u64(), first["count"].as_u64()), (Some(1), Some(20)));
    assert_eq!(first["ratio"].as_f64(), Some(20.0));
}

#[test]
fn sweep_errors_stay_in_stream() {
    let out = sllift(&["sweep", "roots", "--q", "1..4"]);
    assert_eq!(out.status.code(), Some(0));
    let rs = records(&out);
    assert_eq!(rs.len(), 4);
    assert_eq!(rs[0]["results"]["exit_class"], 2);
    assert!(rs[1..].iter().all(|r| r["results"]["valid"] == true));

    let all_bad = sllift(&["sweep", "roots", "--q", "1"]);
    assert_eq!(all_bad.status.code(), Some(2));
    assert_eq!(records(&all_bad).len(), 1);
}

#[test]
fn deterministic_payloads() {
    for args in [
        &["lift", "--n", "3", "--q", "1000003", "--matrix", "random", "--seed", "9", "--json"][..],
        &["sweep", "lift-bounds", "--q", "16,101", "--samples", "8", "--seed", "3"][..],
        &["sweep", "diameter", "--q", "2..4", "--space", "a"][..],
    ] {
        let a: Vec<Value> = records(&sllift(args)).into_iter().map(strip_time).collect();
        let b: Vec<Value> = records(&sllift(args)).into_iter().map(strip_time).collect();
        assert!(!a.is_empty());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap(), "{args:?}");
    }
}

#[test]
fn csv_and_out_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("drs.csv");
    let jsonl = dir.path().join("drs.jsonl");
    let out = sllift(&[
        "sweep",
        "drs",
        "--T",
        "1..3",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        jsonl.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,T,count,ratio,error");
    assert_eq!(lines[1], "2,1,20,20.0,");
    assert_eq!(lines.len(), 4);
    assert_eq!(std::fs::read(&jsonl).unwrap(), out.stdout);

    let single = dir.path().join("lift.json");
    let out = sllift(&["lift", "--n", "2", "--q", "8", "--matrix", "5,0;0,5", "--out", single.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&single).unwrap()).unwrap();
    assert_eq!(saved["command"], "lift");
}

#[test]
fn large_seed_uses_str_key() {
    let seed = u64::MAX.to_string();
    let r = one(&sllift(&["lift", "--n", "2", "--q", "8", "--matrix", "random", "--seed", &seed, "--json"]));
    assert_eq!(r["seed_str"], seed);
    assert!(r.get("seed").is_none());
}

// Subset of JSON Schema used by docs/experiment-record.schema.json.
fn validate(schema: &Value, root: &Value, v: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").ok_or(format!("unsupported ref {r}"))?;
        return validate(&root["$defs"][name], root, v, path);
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => return Err("bad type keyword".into()),
        };
        let ok = types.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "integer" => v.is_i64() || v.is_u64(),
            "number" => v.is_number(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("{path}: expected {types:?}, got {v}"));
        }
    }
    if let Some(e) = schema.get("enum").and_then(Value::as_array) {
        if !e.contains(v) {
            return Err(format!("{path}: {v} not in {e:?}"));
        }
    }
    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        if v.as_f64().is_some_and(|x| x < min) {
            return Err(format!("{path}: {v} below {min}"));
        }
    }
    if let Some(p) = schema.get("pattern").and_then(Value::as_str) {
        let s = v.as_str().unwrap_or_default();
        let digits = |d: &str| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit());
        let ok = match p {
            "^[0-9]+$" => digits(s),
            "^-?[0-9]+$" => digits(s.strip_prefix('-').unwrap_or(s)),
            _ => return Err(format!("unsupported pattern {p}")),
        };
        if !ok {
            return Err(format!("{path}: {s:?} does not match {p}"));
        }
    }
    if let (Some(req), Some(obj)) = (schema.get("required").and_then(Value::as_array), v.as_object()) {
        for k in req {
            if !obj.contains_key(k.as_str().unwrap()) {
                return Err(format!("{path}: missing {k}"));
            }
        }
    }
    if let (Some(props), Some(obj)) = (schema.get("properties").and_then(Value::as_object), v.as_object()) {
        for (k, s) in props {
            if let Some(x) = obj.get(k) {
                validate(s, root, x, &format!("{path}.{k}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, x) in arr.iter().enumerate() {
            validate(items, root, x, &format!("{path}[{i}]"))?;
        }
    }
    if let Some(alts) = schema.get("oneOf").and_then(Value::as_array) {
        let n = alts.iter().filter(|s| validate(s, root, v, path).is_ok()).count();
        if n != 1 {
            return Err(format!("{path}: {n} oneOf branches match"));
        }
    }
    if let Some(alts) = schema.get("anyOf").and_then(Value::as_array) {
        if !alts.iter().any(|s| validate(s, root, v, path).is_ok()) {
            return Err(format!("{path}: no anyOf branch matches"));
        }
    }
    Ok(())
}

#[test]
fn records_match_schema() {
    let schema: Value = serde_json::from_str(include_str!("../../../docs/experiment-record.schema.json")).unwrap();
    let runs: &[&[&str]] = &[
        &["lift", "--n", "2", "--q", "8", "--matrix", "5,0;0,5", "--json"],
        &["lift", "--n", "2", "--q", "8", "--matrix", "random", "--seed", "18446744073709551615", "--json"],
        &["hard", "--sarnak-m", "2", "--json"],
        &["hard", "--q", "8", "--verify-oracle", "64", "--json"],
        &["hard", "--q", "6", "--n", "3", "--json"],
        &["sweep", "roots", "--q", "1..12"],
        &["sweep", "drs", "--T", "1..4"],
        &["sweep", "skewed", "--T", "1..2"],
        &["sweep", "diameter", "--q", "2..3"],
        &["sweep", "lift-bounds", "--q", "16", "--samples", "4"],
    ];
    let mut seen = 0;
    for args in runs {
        for r in records(&sllift(args)) {
            validate(&schema, &schema, &r, "$").unwrap_or_else(|e| panic!("{args:?}: {e}"));
            seen += 1;
        }
    }
    assert!(seen >= 20);

    let bad: Value = serde_json::json!({"schema_version": "1", "command": "lift", "params": {}, "results": {}, "wall_time_ms": 0});
    assert!(validate(&schema, &schema, &bad, "$").is_err(), "record without a seed must be rejected");
}
