use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hiereval_testkit::fixture::{
    queries_json, random_fixture, Fixture, Payload, Query, SPECIFICITIES,
};
use hiereval_testkit::rng;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn hiereval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiereval"))
        .args(args)
        .env("HIEREVAL_NO_COLOR", "1")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Setup {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
    fx: Fixture,
    dataset: PathBuf,
}

fn setup(seed: u64) -> Setup {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    let mut r = rng(seed);
    let fx = loop {
        let fx = random_fixture(&mut r, 24, true);
        if fx
            .annotations
            .iter()
            .any(|a| a.category.matches('/').count() == 2)
        {
            break fx;
        }
    };
    let dataset = dir.join("dataset.json");
    std::fs::write(&dataset, fx.to_json()).unwrap();
    Setup {
        _tmp: tmp,
        dir,
        fx,
        dataset,
    }
}

/// One query per annotated category, image and specificity.
fn truth_queries(fx: &Fixture, abstain: bool) -> Vec<Query> {
    let mut out = Vec::new();
    for (image, im) in fx.images.iter().enumerate() {
        for cat in fx.paths_under(&im.object) {
            let truth = fx.truth(image, &cat);
            if truth.area() == 0 {
                continue;
            }
            for sp in SPECIFICITIES {
                let payload = if abstain {
                    Payload::Abstain
                } else {
                    Payload::Mask(truth.clone())
                };
                out.push(Query {
                    image,
                    category: cat.clone(),
                    specificity: sp,
                    payload,
                });
            }
        }
    }
    out
}

fn eval_report(st: &Setup, queries: &[Query]) -> Value {
    let pred = st.dir.join("pred.json");
    std::fs::write(&pred, queries_json(&st.fx, "m", queries)).unwrap();
    let out = st.dir.join("out");
    let o = hiereval(&[
        "eval",
        "--dataset",
        s(&st.dataset),
        "--predictions",
        s(&pred),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    doc["reports"][0].clone()
}

#[test]
fn ground_truth_scores_one_hundred() {
    let st = setup(21);
    let report = eval_report(&st, &truth_queries(&st.fx, false));
    for spec in report["specificities"].as_array().unwrap() {
        for level in ["subpart", "part", "object"] {
            assert_eq!(spec["miou"][level]["value"], 1.0, "{level}");
        }
        assert_eq!(spec["spcs"]["avg"]["value"], 1.0);
        assert!(spec["spcs"]["avg"]["n"].as_u64().unwrap() > 0);
    }
    let table = std::fs::read_to_string(st.dir.join("out/table2.csv")).unwrap();
    let row = table.lines().nth(1).unwrap();
    assert!(row.split(',').skip(2).all(|c| c == "100.00"), "{row}");
}

#[test]
fn all_abstain_scores_zero() {
    let st = setup(22);
    let report = eval_report(&st, &truth_queries(&st.fx, true));
    for spec in report["specificities"].as_array().unwrap() {
        for level in ["subpart", "part", "object"] {
            if spec["miou"][level]["n"] != 0 {
                assert_eq!(spec["miou"][level]["value"], 0.0);
                assert_eq!(spec["abstention"][level]["value"], 1.0);
            }
        }
        assert!(spec["spcs"]["avg"]["value"].is_null());
    }
}

#[test]
fn corrupt_rle_is_a_usage_error() {
    let st = setup(23);
    let im = &st.fx.images[0];
    let pred = st.dir.join("bad.json");
    let doc = serde_json::json!({
        "version": 1, "mode": "query", "method": "m",
        "predictions": [{"image": im.id, "category": im.object, "specificity": "general", "mask": [1, 2, 3]}],
    });
    std::fs::write(&pred, doc.to_string()).unwrap();
    for cmd in ["validate", "eval"] {
        let o = hiereval(&[
            cmd,
            "--dataset",
            s(&st.dataset),
            "--predictions",
            s(&pred),
            "--out",
            s(&st.dir.join(cmd)),
        ]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(
            err.contains("predictions[0]") || err.contains("prediction 0"),
            "{err}"
        );
    }
}

#[test]
fn expectation_mismatch_fails_validation() {
    let st = setup(24);
    let n = st.fx.images.len();
    let ok = hiereval(&[
        "validate",
        "--dataset",
        s(&st.dataset),
        "--expect",
        &format!("images={n}"),
        "--out",
        s(&st.dir.join("a")),
    ]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let bad = hiereval(&[
        "validate",
        "--dataset",
        s(&st.dataset),
        "--expect",
        &format!("images={}", n + 1),
        "--out",
        s(&st.dir.join("b")),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("images"));
}

#[test]
fn usage_errors() {
    let st = setup(25);
    let missing = hiereval(&[
        "stats",
        "--dataset",
        s(&st.dir.join("nope.json")),
        "--out",
        s(&st.dir.join("x")),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    let pred = st.dir.join("pred.json");
    std::fs::write(
        &pred,
        queries_json(&st.fx, "m", &truth_queries(&st.fx, false)),
    )
    .unwrap();
    let svg = hiereval(&[
        "eval",
        "--dataset",
        s(&st.dataset),
        "--predictions",
        s(&pred),
        "--format",
        "svg",
        "--out",
        s(&st.dir.join("y")),
    ]);
    assert_eq!(svg.status.code(), Some(2));
    let no_pred = hiereval(&["eval", "--dataset", s(&st.dataset)]);
    assert_eq!(no_pred.status.code(), Some(2));
}

#[test]
fn manifest_records_inputs_and_artifacts() {
    let st = setup(26);
    let out = st.dir.join("stats");
    let o = hiereval(&[
        "stats",
        "--dataset",
        s(&st.dataset),
        "--workers",
        "3",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["tool"], "hiereval");
    assert_eq!(m["command"], "stats");
    assert!(m["config"].get("workers").is_none());
    let sha = |p: &Path| hex::encode(Sha256::digest(std::fs::read(p).unwrap()));
    assert_eq!(m["inputs"][0]["sha256"], sha(&st.dataset));
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let name = a["name"].as_str().unwrap();
        assert_eq!(a["sha256"], sha(&out.join(name)), "{name}");
    }
}
