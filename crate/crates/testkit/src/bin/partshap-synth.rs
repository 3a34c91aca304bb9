//! Writes a synthetic part dataset and its matched additive model.
//!
//! ```text
//! partshap-synth --out DIR [--parts K] [--classes C] [--per-class N] [--seed S] [--jitter PX]
//! ```
//!
//! Produces `DIR/manifest.jsonl`, `DIR/images/*.png`, `DIR/model.json` and,
//! with `--jitter`, `DIR/jittered.jsonl`.

use std::path::PathBuf;
use std::process::ExitCode;

use partshap_testkit::{make_synthetic_dataset, SyntheticConfig};

fn run() -> Result<(), String> {
    let mut config = SyntheticConfig::default();
    let mut out = None;
    let mut jitter = None;
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let value = args.next().ok_or(format!("{flag} needs a value"))?;
        let bad = |e: std::num::ParseIntError| format!("{flag}: {e}");
        match flag.as_str() {
            "--out" => out = Some(PathBuf::from(value)),
            "--parts" => config.parts = value.parse().map_err(bad)?,
            "--classes" => config.classes = value.parse().map_err(bad)?,
            "--per-class" => config.per_class = value.parse().map_err(bad)?,
            "--seed" => config.seed = value.parse().map_err(bad)?,
            "--jitter" => jitter = Some(value.parse::<u32>().map_err(bad)?),
            other => return Err(format!("unknown flag {other}")),
        }
    }
    let out = out.ok_or("--out is required")?;
    let d = make_synthetic_dataset(config).map_err(|e| e.to_string())?;
    d.write_to(&out).map_err(|e| e.to_string())?;
    let model = serde_json::to_string_pretty(&d.matched_model().to_json()).expect("json");
    std::fs::write(out.join("model.json"), model + "\n").map_err(|e| e.to_string())?;
    if let Some(px) = jitter {
        d.write_manifest(
            &d.jittered_manifest(px, d.config.seed + 1),
            &out,
            "jittered.jsonl",
        )
        .map_err(|e| e.to_string())?;
    }
    println!("wrote {} samples to {}", d.manifest.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("partshap-synth: {e}");
            ExitCode::from(2)
        }
    }
}
