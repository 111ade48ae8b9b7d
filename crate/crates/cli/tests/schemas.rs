//! Every JSON output validates against the schemas shipped in-repo.
//!
//! The checker covers the subset of JSON Schema the files use: `type`,
//! `required`, `properties` and `items`, applied recursively.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn check(schema: &Value, value: &Value, at: &str, errors: &mut Vec<String>) {
    if let Some(expected) = schema.get("type").and_then(Value::as_str) {
        let ok = match expected {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            "string" => value.is_string(),
            "boolean" => value.is_boolean(),
            other => panic!("schema uses unsupported type {other}"),
        };
        if !ok {
            errors.push(format!("{at}: expected {expected}, got {value}"));
            return;
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for key in required {
            let key = key.as_str().unwrap();
            if value.get(key).is_none() {
                errors.push(format!("{at}: missing required key {key:?}"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        for (key, sub) in props {
            if let Some(v) = value.get(key) {
                check(sub, v, &format!("{at}.{key}"), errors);
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = value.as_array() {
            for (i, v) in arr.iter().enumerate() {
                check(items, v, &format!("{at}[{i}]"), errors);
            }
        }
    }
}

fn assert_valid(schema_name: &str, value: &Value) {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(schema_name);
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(&schema_path).expect("schema file")).unwrap();
    let mut errors = Vec::new();
    check(&schema, value, "$", &mut errors);
    assert!(
        errors.is_empty(),
        "{schema_name} violations:\n{}",
        errors.join("\n")
    );
}

fn run(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_delcap"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn load(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn emitted_files_validate_against_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    let dist = serde_json::json!({
        "channel": {"kind": "bdc", "param": 0.5},
        "Z_max": 6,
        "probs": [0.3, 0.25, 0.2, 0.15, 0.07, 0.03],
        "metadata": {"note": "schema test fixture"}
    });
    fs::write(dir.join("dist.json"), dist.to_string()).unwrap();
    assert_valid("distribution.schema.json", &load(dir, "dist.json"));

    run(dir, &["capacity-nk", "--n", "4", "--k", "2", "--table", "t.json"]);
    run(dir, &["fill-table", "--table", "t.json", "--n-max", "5"]);
    assert_valid("capacity_table.schema.json", &load(dir, "t.json"));
    assert_valid("manifest.schema.json", &load(dir, "t.manifest.json"));

    run(
        dir,
        &[
            "lower-bound", "--channel", "bdc", "--d", "0.5", "--hops", "1", "--z-max", "16",
            "--sweep-points", "4", "--out", "lb.json",
        ],
    );
    let report = load(dir, "lb.json");
    assert_valid("optimizer_report.schema.json", &report);
    assert_valid("manifest.schema.json", &report["manifest"]);
    assert_valid("rate_breakdown.schema.json", &report["breakdown"]);

    run(
        dir,
        &[
            "lower-bound", "--channel", "bdc", "--d", "0.5", "--dist", "dist.json", "--out",
            "fixed.json",
        ],
    );
    let fixed = load(dir, "fixed.json");
    assert_valid("fixed_distribution_report.schema.json", &fixed);
    assert_valid("manifest.schema.json", &fixed["manifest"]);

    run(dir, &["eval-distribution", "--dist", "dist.json", "--out", "eval.json"]);
    let eval = load(dir, "eval.json");
    assert_valid("eval_report.schema.json", &eval);
    assert_valid("rate_breakdown.schema.json", &eval);
}
