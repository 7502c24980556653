use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn stabcert(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stabcert"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("STABCERT_CACHE_DIR")
        .output()
        .expect("spawn stabcert")
}

fn document(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.json"))).expect("result document");
    serde_json::from_str(&text).expect("valid JSON")
}

const SLABS: &[&str] = &["--domain", "dim=1,R=10,m=200,periodic=true", "--set", "slabs:period=1,fill=0.25"];

#[test]
fn thick_set_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = stabcert(&[&["check-thick"], SLABS].concat(), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = document(dir.path(), "check-thick");
    assert_eq!(doc["status"], "ok");
    assert_eq!(doc["outputs"]["thickness"]["is_thick"], true);
    assert!(dir.path().join("thickness.csv").exists());
}

#[test]
fn empty_set_certificate_is_a_math_failure() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["certify", "--domain", "dim=1,R=10,m=256,periodic=true", "--set", "empty", "--k-max", "6"];
    let out = stabcert(&args, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let doc = document(dir.path(), "certify");
    assert_eq!(doc["status"], "failed");
    assert!(doc["reason"].as_str().unwrap().contains("unverifiable"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stabcert(&["certify", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(stabcert(&["check-thick", "--set", "full"], dir.path()).status.code(), Some(2));
    let bad_domain = stabcert(&["check-thick", "--domain", "dim=1,R=10"], dir.path());
    assert_eq!(bad_domain.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_domain.stderr).contains("missing key m"));
    assert!(!dir.path().join("check-thick.json").exists());
}

#[test]
fn stable_operator_has_no_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["feedback-build", "--operator", "hermite", "--c", "0.5", "--domain", "dim=1,R=8,m=128", "--set", "half:axis=0"];
    assert_eq!(stabcert(&args, dir.path()).status.code(), Some(1));
    assert_eq!(document(dir.path(), "feedback-build")["status"], "failed");
}

/// Checks `value` against the subset of JSON Schema the result schema uses:
/// `type`, `required`, `properties`, `additionalProperties`, `enum`, `const`,
/// `items`, `minimum`, `pattern` (only `^[0-9a-f]{64}$`) and `$ref` into `$defs`.
fn validate(schema: &Value, root: &Value, value: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").ok_or(format!("unsupported $ref {r}"))?;
        return validate(&root["$defs"][name], root, value, path);
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => return Err(format!("{path}: bad type keyword")),
        };
        let matches = types.iter().any(|t| match *t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        });
        if !matches {
            return Err(format!("{path}: expected {types:?}, got {value}"));
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} not in {allowed:?}"));
        }
    }
    if let Some(c) = schema.get("const") {
        if c != value {
            return Err(format!("{path}: expected {c}, got {value}"));
        }
    }
    if let (Some(min), Some(v)) = (schema.get("minimum").and_then(Value::as_f64), value.as_f64()) {
        if v < min {
            return Err(format!("{path}: {v} below minimum {min}"));
        }
    }
    if let Some(p) = schema.get("pattern").and_then(Value::as_str) {
        assert_eq!(p, "^[0-9a-f]{64}$", "validator only knows the hex digest pattern");
        let s = value.as_str().unwrap_or_default();
        if s.len() != 64 || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(format!("{path}: {s:?} is not a hex digest"));
        }
    }
    if let Some(obj) = value.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                return Err(format!("{path}: missing required key {key}"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (key, v) in obj {
            let sub = format!("{path}/{key}");
            match props.and_then(|p| p.get(key)) {
                Some(s) => validate(s, root, v, &sub)?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return Err(format!("{sub}: not allowed")),
                    Some(s @ Value::Object(_)) => validate(s, root, v, &sub)?,
                    _ => {}
                },
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            validate(items, root, v, &format!("{path}/{i}"))?;
        }
    }
    Ok(())
}

#[test]
fn documents_match_the_schema() {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/result.schema.json")).expect("schema parses");
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &[&["check-thick"], SLABS].concat(),
        &["certify", "--constants", "1,1,1,1,1,0"],
        &["simulate", "--operator", "schrodinger", "--potential", "harmonic:c=4", "--domain", "dim=1,R=8,m=128", "--set", "box:lower=0,upper=8", "--t-end", "5"],
        &["probe", "--operator", "hermite", "--c", "1", "--domain", "dim=1,R=8,m=128", "--set", "half:axis=0", "--claim-c", "0.1", "--claim-t", "1", "--claim-alpha", "0"],
    ];
    for args in runs {
        let out = stabcert(args, dir.path());
        assert!(matches!(out.status.code(), Some(0 | 1)), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let doc = document(dir.path(), args[0]);
        validate(&schema, &schema, &doc, "").unwrap_or_else(|e| panic!("{}: {e}", args[0]));
        for file in doc["files"].as_array().unwrap() {
            assert!(dir.path().join(file.as_str().unwrap()).exists());
        }
    }
    let mut broken = document(dir.path(), "probe");
    broken["schema_version"] = Value::from(2);
    assert!(validate(&schema, &schema, &broken, "").is_err());
}

#[test]
fn identical_runs_give_identical_payloads() {
    let args = [
        "simulate", "--operator", "schrodinger", "--potential", "harmonic:c=4", "--domain", "dim=1,R=8,m=128",
        "--set", "box:lower=0,upper=8", "--trajectories", "3", "--t-end", "5", "--seed", "9",
    ];
    let payload = || {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(stabcert(&args, dir.path()).status.code(), Some(0));
        let mut doc = document(dir.path(), "simulate");
        doc.as_object_mut().unwrap().remove("metadata");
        let csv = std::fs::read(dir.path().join("decay_2.csv")).unwrap();
        (doc, csv)
    };
    let (a, b) = (payload(), payload());
    assert_eq!(a, b);
    assert!(!a.0["input_hashes"]["config"].as_str().unwrap().is_empty());
}
