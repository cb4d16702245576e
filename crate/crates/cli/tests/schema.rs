use std::collections::BTreeSet;
use std::path::Path;

use oseen_cli::{run, RunConfig};
use serde_json::{json, Value};

fn schema() -> Value {
    serde_json::from_str(include_str!("../schema.json")).unwrap()
}

fn names(v: &Value) -> BTreeSet<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn artifacts_match_the_frozen_schema() {
    let s = schema();
    assert_eq!(s["schema_version"], oseen_cli::SCHEMA_VERSION);
    assert_eq!(s["config"]["output_root_env"], oseen_cli::OUTPUT_ROOT_VAR);

    let dir = tempfile::tempdir().unwrap();
    let config: RunConfig = serde_json::from_value(json!({
        "schema_version": 1,
        "output_dir": dir.path().join("run"),
        "experiments": [
            { "kind": "exponent-sums", "grid": 20 },
            { "kind": "decay-fit", "field": "initial", "enclosing_radius": 4.0,
              "temporal": { "target": { "fixed": [0.0, 5.0, 0.0] }, "t_min": 2.0, "t_max": 40.0, "count": 6 } }
        ]
    }))
    .unwrap();
    let out = run(&config).unwrap().output;

    let cfg = read_json(&out.join(s["artifacts"]["config"].as_str().unwrap()));
    assert_eq!(keys(&cfg), names(&s["config"]["keys"]));
    assert_eq!(keys(&cfg["tolerances"]), names(&s["config"]["tolerances"]));
    assert_eq!(keys(&cfg["rates"]), names(&s["config"]["rates"]));

    let summary = read_json(&out.join(s["artifacts"]["summary"].as_str().unwrap()));
    assert_eq!(keys(&summary), names(&s["summary_keys"]));
    for row in summary["rows"].as_array().unwrap() {
        assert_eq!(keys(row), names(&s["summary_row_keys"]));
    }

    let csv = std::fs::read_to_string(out.join("01-decay-fit/temporal.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let want: Vec<&str> = s["decay_csv_columns"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(header, want);
}

#[test]
fn every_documented_kind_parses() {
    let s = schema();
    for kind in names(&s["config"]["experiment_kinds"]) {
        let mut e = json!({ "kind": kind });
        if kind == "decay-fit" {
            e = json!({ "kind": kind, "field": "volume", "enclosing_radius": 4.0 });
        }
        let parsed: oseen_cli::Experiment = serde_json::from_value(e).unwrap();
        assert_eq!(parsed.kind(), kind);
    }
    for (alias, kind) in s["config"]["experiment_kind_aliases"].as_object().unwrap() {
        let parsed: oseen_cli::Experiment = serde_json::from_value(json!({ "kind": alias })).unwrap();
        assert_eq!(parsed.kind(), kind.as_str().unwrap());
    }
}
