use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use partshap_testkit::{make_synthetic_dataset, SyntheticConfig};
use serde_json::Value;

const CLI: &str = env!("CARGO_BIN_EXE_partshap");

struct Fixture {
    dir: tempfile::TempDir,
    manifest: String,
    model: String,
}

impl Fixture {
    fn new(config: SyntheticConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let d = make_synthetic_dataset(config).unwrap();
        d.write_to(&dir.path().join("data")).unwrap();
        let model = dir.path().join("data/model.json");
        fs::write(&model, d.matched_model().to_json().to_string()).unwrap();
        Self {
            manifest: dir.path().join("data/manifest.jsonl").display().to_string(),
            model: format!("toy:additive:{}", model.display()),
            dir,
        }
    }

    fn three_parts() -> Self {
        Self::new(SyntheticConfig {
            parts: 3,
            per_class: 2,
            ..Default::default()
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str], out: &str) -> Output {
        let out = self.out(out);
        Command::new(CLI)
            .args(args)
            .args(["--manifest", &self.manifest, "--model", &self.model])
            .arg("--out")
            .arg(out)
            .output()
            .unwrap()
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn explain_sample_caches_every_coalition() {
    let f = Fixture::three_parts();
    let o = f.run(&["explain-sample", "--sample", "s0001"], "r");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&f.out("r/samples/s0001.json"));
    let cache = s["coalition_logits"].as_object().unwrap();
    let keys: Vec<&str> = cache.keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["000", "001", "010", "011", "100", "101", "110", "111"]
    );
    assert_eq!(
        s["normalized"][s["argmax_part"].as_u64().unwrap() as usize],
        1.0
    );
    assert!(f.out("r/plots/sample_s0001.svg").exists());
    assert!(f.out("r/config.json").exists());
}

#[test]
fn class_override_equal_to_prediction_changes_nothing() {
    let f = Fixture::three_parts();
    f.run(&["explain-sample", "--sample", "s0001"], "a");
    let predicted = json(&f.out("a/samples/s0001.json"))["predicted"]
        .as_str()
        .unwrap()
        .to_string();
    f.run(
        &["explain-sample", "--sample", "s0001", "--class", &predicted],
        "b",
    );
    let a = json(&f.out("a/samples/s0001.json"));
    let b = json(&f.out("b/samples/s0001.json"));
    assert_eq!(a["histogram"], b["histogram"]);
    assert_eq!(a["normalized"], b["normalized"]);
}

#[test]
fn missing_part_is_reported_as_null() {
    let f = Fixture::three_parts();
    let text = fs::read_to_string(&f.manifest).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: Value = serde_json::from_str(&lines[1]).unwrap();
    rec["parts"]
        .as_array_mut()
        .unwrap()
        .retain(|p| p["name"] != "eye");
    lines[1] = rec.to_string();
    fs::write(&f.manifest, lines.join("\n")).unwrap();
    let id = rec["id"].as_str().unwrap();
    let o = f.run(&["explain-sample", "--sample", id], "r");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&f.out(&format!("r/samples/{id}.json")));
    assert_eq!(s["histogram"][1], Value::Null);
    assert_eq!(s["coalition_logits"].as_object().unwrap().len(), 4);
}

#[test]
fn task_histogram_sums_to_the_class_count() {
    let f = Fixture::three_parts();
    let o = f.run(&["explain-task"], "r");
    assert_eq!(code(&o), 0);
    let task = json(&f.out("r/task_histogram.json"));
    let total: f64 = task["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert_eq!(total, 2.0);
    for h in json(&f.out("r/class_histograms.json")).as_array().unwrap() {
        let mass: f64 = h["frequencies"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert_eq!(mass, 1.0);
    }
    assert!(f.out("r/plots/task.svg").exists());
}

#[test]
fn explain_class_can_report_one_class() {
    let f = Fixture::three_parts();
    f.run(&["explain-class", "--class", "male"], "r");
    let h = json(&f.out("r/class_histograms.json"));
    assert_eq!(h.as_array().unwrap().len(), 1);
    assert_eq!(h[0]["class"], 1);
}

#[test]
fn sanity_reports_are_sorted_by_contribution() {
    let f = Fixture::three_parts();
    let o = f.run(&["sanity", "--mode", "inclusion"], "r");
    assert_eq!(code(&o), 0);
    let report = json(&f.out("r/sanity/inclusion.json"));
    for class in report["classes"].as_array().unwrap() {
        let c: Vec<f64> = class["parts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p["contribution"].as_f64().unwrap())
            .collect();
        assert!(c.windows(2).all(|w| w[0] >= w[1]));
    }
    let csv = fs::read_to_string(f.out("r/sanity/inclusion.csv")).unwrap();
    assert!(csv.starts_with("class,rank,part,contribution,mean_shapley,accuracy\n"));
}

#[test]
fn identical_annotation_sources_agree_fully() {
    let f = Fixture::three_parts();
    let o = f.run(
        &[
            "sanity",
            "--mode",
            "annotation-compare",
            "--second-manifest",
            &f.manifest,
        ],
        "r",
    );
    assert_eq!(code(&o), 0);
    let cmp = json(&f.out("r/sanity/annotation_compare.json"));
    assert_eq!(cmp["per_class"], serde_json::json!([1.0, 1.0]));
}

#[test]
fn replay_reproduces_a_run() {
    let f = Fixture::three_parts();
    f.run(
        &["explain-task", "--mc-permutations", "3", "--seed", "9"],
        "a",
    );
    let config = f.out("a/config.json");
    let o = Command::new(CLI)
        .args(["replay", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(f.out("b"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for rel in [
        "config.json",
        "task_histogram.json",
        "class_histograms.json",
        "samples/s0000.json",
    ] {
        assert_eq!(
            fs::read(f.out("a").join(rel)).unwrap(),
            fs::read(f.out("b").join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn usage_errors_exit_with_2() {
    let f = Fixture::three_parts();
    assert_eq!(
        code(&f.run(
            &["explain-sample", "--sample", "s0000", "--class", "robot"],
            "r"
        )),
        2
    );
    assert_eq!(
        code(&f.run(&["sanity", "--mode", "annotation-compare"], "r")),
        2
    );
    assert_eq!(
        code(&f.run(&["explain-task", "--mc-permutations", "0"], "r")),
        2
    );
    assert_eq!(code(&f.run(&["frobnicate"], "r")), 2);
    let no_out = Command::new(CLI)
        .args([
            "explain-task",
            "--manifest",
            &f.manifest,
            "--model",
            &f.model,
        ])
        .output()
        .unwrap();
    assert_eq!(code(&no_out), 2);
}

#[test]
fn single_part_sanity_names_the_constraint() {
    let f = Fixture::three_parts();
    let text = r#"{"classes":["female","male"],"part_vocabulary":["hair"]}
{"id":"x","image":"images/s0000.png","label":"female","parts":[{"name":"hair","box":[3,3,13,13]}]}
"#;
    let manifest = f.dir.path().join("data/one.jsonl");
    fs::write(&manifest, text).unwrap();
    let o = Command::new(CLI)
        .args([
            "sanity",
            "--mode",
            "exclusion",
            "--model",
            &f.model,
            "--manifest",
        ])
        .arg(&manifest)
        .arg("--out")
        .arg(f.out("r"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2 parts"));
}

#[test]
fn data_errors_exit_with_3() {
    let f = Fixture::three_parts();
    assert_eq!(
        code(&f.run(&["explain-sample", "--sample", "nope"], "r")),
        3
    );
    let empty = Fixture::new(SyntheticConfig {
        parts: 3,
        per_class: 0,
        ..Default::default()
    });
    let o = empty.run(&["explain-task"], "r");
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));

    fs::write(&f.manifest, "{\"classes\":[\"a\"]}\n").unwrap();
    assert_eq!(code(&f.run(&["explain-task"], "r")), 3);
}

#[test]
fn model_errors_exit_with_4() {
    let f = Fixture::three_parts();
    let o = Command::new(CLI)
        .args([
            "explain-task",
            "--manifest",
            &f.manifest,
            "--model",
            "exec:/nonexistent/server",
        ])
        .arg("--out")
        .arg(f.out("r"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 4);
    let wrong_classes = f.dir.path().join("three.json");
    let cfg = serde_json::json!({
        "classes": ["a", "b", "c"],
        "parts": [{"name": "hair", "box": [3, 3, 13, 13]}],
        "weights": [[1.0, 0.0, 0.0]],
    });
    fs::write(&wrong_classes, cfg.to_string()).unwrap();
    let o = Command::new(CLI)
        .args(["explain-task", "--manifest", &f.manifest, "--model"])
        .arg(format!("toy:additive:{}", wrong_classes.display()))
        .arg("--out")
        .arg(f.out("r"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 4);
}

#[test]
fn generate_masks_needs_no_model() {
    let f = Fixture::three_parts();
    let o = Command::new(CLI)
        .args([
            "generate-masks",
            "--sample",
            "s0000",
            "--manifest",
            &f.manifest,
        ])
        .arg("--out")
        .arg(f.out("m"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let base = fs::read(f.dir.path().join("data/images/s0000.png")).unwrap();
    assert_eq!(fs::read(f.out("m/111.png")).unwrap(), base);
    assert_ne!(fs::read(f.out("m/000.png")).unwrap(), base);
}
