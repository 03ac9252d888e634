use std::path::Path;
use std::process::{Command, Output};

use lava::io::{save_delimited, save_labels};
use lava::synthetic::clustered_samples;
use lava::{AmfModel, CorrelationDataset, LocalitySet};

fn lava(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lava"))
        .args(args)
        .env("LAVA_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// 90 samples with 12 features, plus labels and a small config.
fn write_inputs(dir: &Path) {
    let s = clustered_samples(90, 12, 5).unwrap();
    save_delimited(s.embeddings.matrix(), None, &dir.join("emb.csv")).unwrap();
    save_delimited(
        s.features.matrix(),
        Some(s.features.feature_names()),
        &dir.join("feat.csv"),
    )
    .unwrap();
    save_labels(&s.labels, dir.join("labels.csv")).unwrap();
    std::fs::write(
        dir.join("lava.cfg"),
        "n = 30\no = 2\nnum_runs = 2\ncandidates = 2\nlearning_rate = 0.01\n",
    )
    .unwrap();
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn pipeline_writes_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_inputs(d);
    let out = lava(&[
        "pipeline",
        "--config",
        &p(d, "lava.cfg"),
        "--embeddings",
        &p(d, "emb.csv"),
        "--features",
        &p(d, "feat.csv"),
        "--labels",
        &p(d, "labels.csv"),
        "--target",
        "a",
        "--grid",
        "3x4",
        "--out",
        &p(d, "run"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("stage=pipeline event=done"));

    let run = d.join("run");
    let loc = LocalitySet::load(&run.join("localities")).unwrap();
    // round(E * o / n) = round(90 * 2 / 30)
    assert_eq!(loc.ell(), 6);
    assert!(loc.members.iter().all(|m| m.len() == 30));
    let c = CorrelationDataset::load(&run.join("correlations")).unwrap();
    assert_eq!((c.num_localities(), c.num_pairs()), (6, 12 * 11 / 2));
    let model = AmfModel::load(&run.join("selection")).unwrap();
    assert_eq!(model.num_modules(), 2);
    for f in [
        "selection/selection.json",
        "analysis/entropy.json",
        "analysis/metadata.json",
        "analysis/ranking_1.csv",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    for m in 0..2 {
        for kind in ["module", "presence"] {
            let svg = std::fs::read_to_string(run.join(format!("figures/{kind}_{m}.svg"))).unwrap();
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        }
    }

    // a grid that cannot hold the model's pairs is a parameter error
    let bad = lava(&[
        "render",
        "--model",
        &p(&run, "selection"),
        "--module",
        "0",
        "--grid",
        "3x3",
        "--out",
        &p(d, "bad.svg"),
    ]);
    assert_eq!(bad.status.code(), Some(1), "{}", stderr(&bad));
    assert!(!d.join("bad.svg").exists());

    let bars = lava(&[
        "render",
        "--model",
        &p(&run, "selection"),
        "--module",
        "1",
        "--correlations",
        &p(&run, "correlations"),
        "--out",
        &p(d, "bars.svg"),
    ]);
    assert!(bars.status.success(), "{}", stderr(&bars));
    assert!(std::fs::read_to_string(d.join("bars.svg")).unwrap().contains("feat0"));
}

#[test]
fn neighborhood_larger_than_data_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_inputs(d);
    std::fs::write(d.join("big.cfg"), "n = 90\no = 1\n").unwrap();
    let out = lava(&[
        "place",
        "--config",
        &p(d, "big.cfg"),
        "--embeddings",
        &p(d, "emb.csv"),
        "--out",
        &p(d, "loc"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("n must be smaller than the number of samples"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_input_exits_with_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_inputs(d);
    let missing = p(d, "nope.csv");
    let out = lava(&[
        "place",
        "--config",
        &p(d, "lava.cfg"),
        "--embeddings",
        &missing,
        "--out",
        &p(d, "loc"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(&missing), "{}", stderr(&out));
}

#[test]
fn bad_arguments_and_config() {
    assert_eq!(lava(&["place", "--bogus"]).status.code(), Some(1));
    assert_eq!(lava(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lava(&["--help"]).status.code(), Some(0));
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_inputs(d);
    std::fs::write(d.join("bad.cfg"), "o = 0\n").unwrap();
    let out = lava(&[
        "place",
        "--config",
        &p(d, "bad.cfg"),
        "--embeddings",
        &p(d, "emb.csv"),
        "--out",
        &p(d, "loc"),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn jaccard_reports_each_size() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_inputs(d);
    let out = lava(&[
        "jaccard",
        "--features",
        &p(d, "feat.csv"),
        "--embeddings",
        &p(d, "emb.csv"),
        "--sizes",
        "5,10,20",
        "--out",
        &p(d, "jaccard.json"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(d.join("jaccard.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let sizes: Vec<u64> = v["points"]
        .as_array()
        .or(v.as_array())
        .expect("list of points")
        .iter()
        .map(|p| p["size"].as_u64().unwrap())
        .collect();
    assert_eq!(sizes, [5, 10, 20]);
}
