//! End-to-end tests for the `cadgraph` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cadgraph"));
    cmd.env("CADGRAPH_LOG", "quiet");
    cmd
}

fn ok(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn two_family_spec(dir: &Path) -> PathBuf {
    let spec = serde_json::json!([
        {
            "name": "box-a",
            "template": "box",
            "width": [1.0, 1.4],
            "depth": [0.7, 1.0],
            "height": [0.4, 0.6],
            "attrs": [
                {"type": "cat", "name": "material", "choices": ["steel", "brass"]},
                {"type": "real", "name": "mass", "range": [0.5, 2.0]}
            ]
        },
        {
            "name": "cyl-a",
            "template": "capped_cylinder",
            "radius": [0.3, 0.5],
            "height": [1.0, 1.4]
        }
    ]);
    let path = dir.join("families.json");
    std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    path
}

fn tiny_train_config(dir: &Path) -> PathBuf {
    let config = serde_json::json!({
        "train": {
            "batch_size": 4,
            "max_epochs": 2,
            "min_epochs": 1,
            "learning_rate": 0.005
        },
        "encoder": {
            "node_dim": 16,
            "graph_dim": 12,
            "layers": 2,
            "node_uv_dim": 8,
            "node_geo_dim": 4,
            "node_product_dim": 4,
            "edge_uv_dim": 12,
            "edge_geo_dim": 4,
            "cnn_channels": [4, 6],
            "mlp_hidden": 6,
            "layer_hidden": 16
        }
    });
    let path = dir.join("train.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn generate_is_deterministic_and_labels_cover_every_part() {
    let dir = tempfile::tempdir().unwrap();
    let spec = two_family_spec(dir.path());
    for sub in ["a", "b"] {
        let out = bin()
            .args([
                "generate",
                "--spec",
                spec.to_str().unwrap(),
                "--count",
                "5",
                "--seed",
                "7",
                "--out-dir",
                dir.path().join(sub).to_str().unwrap(),
            ])
            .output()
            .unwrap();
        ok(&out);
    }
    let parts_a = std::fs::read(dir.path().join("a/parts.jsonl")).unwrap();
    let parts_b = std::fs::read(dir.path().join("b/parts.jsonl")).unwrap();
    assert_eq!(parts_a, parts_b, "same seed must produce identical bytes");
    assert_eq!(
        std::fs::read(dir.path().join("a/labels.json")).unwrap(),
        std::fs::read(dir.path().join("b/labels.json")).unwrap()
    );

    // 2 families x 5 parts -> 10 lines, each labeled exactly once
    let text = String::from_utf8(parts_a).unwrap();
    let ids: Vec<String> = text
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(ids.len(), 10);
    let labels: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/labels.json")).unwrap())
            .unwrap();
    let families = labels["families"].as_object().unwrap();
    assert_eq!(families.len(), 10);
    for id in &ids {
        assert!(families.contains_key(id), "part {id} unlabeled");
    }
}

#[test]
fn convert_reports_cube_topology_and_seam_skips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = two_family_spec(dir.path());
    ok(&bin()
        .args([
            "generate",
            "--spec",
            spec.to_str().unwrap(),
            "--count",
            "3",
            "--seed",
            "1",
            "--out-dir",
            dir.path().join("data").to_str().unwrap(),
        ])
        .output()
        .unwrap());
    let report = dir.path().join("report.json");
    ok(&bin()
        .args([
            "convert",
            "--parts",
            dir.path().join("data/parts.jsonl").to_str().unwrap(),
            "--schema",
            dir.path().join("data/schema.json").to_str().unwrap(),
            "--out",
            dir.path().join("cache.bin").to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ])
        .output()
        .unwrap());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for row in report["per_part"].as_array().unwrap() {
        let part = row["part"].as_str().unwrap();
        if part.starts_with("box-a") {
            assert_eq!(row["nodes"], 6, "{part}");
            assert_eq!(row["edges"], 12, "{part}");
            assert_eq!(row["single_adjacency_skipped"], 0);
        } else {
            // capped cylinder: 3 faces, 2 edges, 1 skipped seam
            assert_eq!(row["nodes"], 3, "{part}");
            assert_eq!(row["edges"], 2, "{part}");
            assert_eq!(row["single_adjacency_skipped"], 1, "{part}");
        }
    }
    assert_eq!(report["totals"]["single_adjacency_skipped"], 3);
}

#[test]
fn convert_names_the_malformed_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = two_family_spec(dir.path());
    ok(&bin()
        .args([
            "generate",
            "--spec",
            spec.to_str().unwrap(),
            "--count",
            "1",
            "--seed",
            "2",
            "--out-dir",
            dir.path().join("data").to_str().unwrap(),
        ])
        .output()
        .unwrap());
    let parts = dir.path().join("data/parts.jsonl");
    let mut text = std::fs::read_to_string(&parts).unwrap();
    text.push_str("{this is not json\n");
    let good = text.lines().next().unwrap().to_string();
    std::fs::write(&parts, format!("{good}\n{{broken\n{good}\n")).unwrap();
    let out = bin()
        .args([
            "convert",
            "--parts",
            parts.to_str().unwrap(),
            "--schema",
            dir.path().join("data/schema.json").to_str().unwrap(),
            "--out",
            dir.path().join("cache.bin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":2"), "stderr should name line 2: {stderr}");
}

#[test]
fn missing_input_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "convert",
            "--parts",
            dir.path().join("nope.jsonl").to_str().unwrap(),
            "--schema",
            dir.path().join("nope.json").to_str().unwrap(),
            "--out",
            dir.path().join("cache.bin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn full_pipeline_smoke_completes_quickly() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec = two_family_spec(dir.path());
    let data = dir.path().join("data");
    ok(&bin()
        .args([
            "generate",
            "--spec",
            spec.to_str().unwrap(),
            "--count",
            "5",
            "--seed",
            "3",
            "--out-dir",
            data.to_str().unwrap(),
        ])
        .output()
        .unwrap());
    let cache = dir.path().join("cache.bin");
    ok(&bin()
        .args([
            "convert",
            "--parts",
            data.join("parts.jsonl").to_str().unwrap(),
            "--schema",
            data.join("schema.json").to_str().unwrap(),
            "--out",
            cache.to_str().unwrap(),
            "--gu",
            "4",
            "--gv",
            "4",
            "--gt",
            "4",
        ])
        .output()
        .unwrap());
    let run = dir.path().join("run");
    let config = tiny_train_config(dir.path());
    ok(&bin()
        .args([
            "train",
            "--cache",
            cache.to_str().unwrap(),
            "--out-dir",
            run.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "5",
        ])
        .output()
        .unwrap());
    assert!(run.join("best.ckpt").exists());
    assert!(run.join("history.jsonl").exists());

    let index = dir.path().join("embeddings.bin");
    ok(&bin()
        .args([
            "embed",
            "--checkpoint",
            run.join("best.ckpt").to_str().unwrap(),
            "--cache",
            cache.to_str().unwrap(),
            "--out",
            index.to_str().unwrap(),
        ])
        .output()
        .unwrap());

    // query with k far beyond the corpus: clamped with a warning
    let out = bin()
        .env("CADGRAPH_LOG", "info")
        .args([
            "query",
            "--index",
            index.to_str().unwrap(),
            "--part-id",
            "box-a-0000",
            "-k",
            "999",
        ])
        .output()
        .unwrap();
    ok(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("clamping"), "expected clamp warning: {stderr}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 10, "header + 9 hits:\n{stdout}");

    // query by part file round-trips through the encoder
    let one_part = dir.path().join("one.jsonl");
    let first_line = std::fs::read_to_string(data.join("parts.jsonl"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    std::fs::write(&one_part, format!("{first_line}\n")).unwrap();
    let out = bin()
        .args([
            "query",
            "--index",
            index.to_str().unwrap(),
            "--part-file",
            one_part.to_str().unwrap(),
            "--checkpoint",
            run.join("best.ckpt").to_str().unwrap(),
            "--schema",
            data.join("schema.json").to_str().unwrap(),
            "-k",
            "3",
        ])
        .output()
        .unwrap();
    ok(&out);

    let metrics = dir.path().join("metrics.json");
    ok(&bin()
        .args([
            "eval",
            "--index",
            index.to_str().unwrap(),
            "--labels",
            data.join("labels.json").to_str().unwrap(),
            "--k",
            "5,10",
            "--out",
            metrics.to_str().unwrap(),
        ])
        .output()
        .unwrap());
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(metrics["queries"], 10);
    assert!(metrics["mean"]["recall@5"].as_f64().unwrap() >= 0.0);

    // assembly retrieval over a trivial membership split
    let memberships = dir.path().join("assemblies.json");
    std::fs::write(
        &memberships,
        serde_json::json!({
            "assemblies": [
                {"id": "A", "parts": ["box-a-0000", "box-a-0001"]},
                {"id": "B", "parts": ["box-a-0002", "box-a-0003"]},
                {"id": "C", "parts": ["cyl-a-0000", "cyl-a-0001"]}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let out = bin()
        .args([
            "assembly",
            "--index",
            index.to_str().unwrap(),
            "--memberships",
            memberships.to_str().unwrap(),
            "--query",
            "A",
            "--k-parts",
            "3",
            "--k-out",
            "2",
        ])
        .output()
        .unwrap();
    ok(&out);

    assert!(
        started.elapsed().as_secs() < 60,
        "pipeline smoke took {:?}",
        started.elapsed()
    );
}

#[test]
fn eval_reproduces_hand_computed_metrics_on_a_three_query_fixture() {
    use cadgraph::brep::PartId;
    use cadgraph::retrieval::EmbeddingIndex;
    use std::collections::BTreeMap;

    let dir = tempfile::tempdir().unwrap();
    // unit vectors at increasing angles: similarity ranks by angular distance
    let angle = |i: usize| i as f64 * 0.15;
    let mut embeddings = BTreeMap::new();
    for i in 0..6 {
        embeddings.insert(
            PartId::new(format!("p{i}")),
            vec![angle(i).cos() as f32, angle(i).sin() as f32],
        );
    }
    let index = EmbeddingIndex::build(&embeddings, [0u8; 32]).unwrap();
    let index_path = dir.path().join("index.bin");
    index.save(&index_path).unwrap();

    // p0's ranking is p1, p2, p3, ... by construction
    let labels = serde_json::json!({
        "format_version": 1,
        "config_hash": "fixture",
        "relevance": {
            "p0": {"p1": 2, "p2": 1, "p3": 0, "p4": 0, "p5": 0},
            "p1": {"p0": 0, "p2": 2, "p3": 2, "p4": 1, "p5": 0},
            "p2": {"p0": 1, "p1": 2, "p3": 2, "p4": 0, "p5": 0}
        }
    });
    let labels_path = dir.path().join("labels.json");
    std::fs::write(&labels_path, labels.to_string()).unwrap();
    let metrics_path = dir.path().join("metrics.json");
    ok(&bin()
        .args([
            "eval",
            "--index",
            index_path.to_str().unwrap(),
            "--labels",
            labels_path.to_str().unwrap(),
            "--k",
            "2",
            "--out",
            metrics_path.to_str().unwrap(),
        ])
        .output()
        .unwrap());
    let got: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics_path).unwrap()).unwrap();

    // hand-computed oracle values
    // p0 ranked: [p1(2), p2(1)]; recall@2 = 1/1; ndcg@2 = (3 + 1/log2 3)/(3 + 1/log2 3) = 1
    // p1 ranked: [p0(0), p2(2)]; recall@2 = 1/2;
    //   DCG = 0 + 3/log2(3); IDCG = 3 + 3/log2(3)
    // p2 ranked: [p1(2), p3(2)]; recall@2 = 2/2 = 1; ndcg = 1
    let log2_3 = 3f64.log2();
    let ndcg_p1 = (3.0 / log2_3) / (3.0 + 3.0 / log2_3);
    let expected_recall = (1.0 + 0.5 + 1.0) / 3.0;
    let expected_ndcg = (1.0 + ndcg_p1 + 1.0) / 3.0;
    let got_recall = got["mean"]["recall@2"].as_f64().unwrap();
    let got_ndcg = got["mean"]["ndcg@2"].as_f64().unwrap();
    assert!(
        (got_recall - expected_recall).abs() < 1e-12,
        "recall {got_recall} vs {expected_recall}"
    );
    assert!(
        (got_ndcg - expected_ndcg).abs() < 1e-12,
        "ndcg {got_ndcg} vs {expected_ndcg}"
    );
    // per-query table is present and exact for p1
    let p1 = &got["per_query"]["p1"];
    assert!((p1["recall@2"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((p1["ndcg@2"].as_f64().unwrap() - ndcg_p1).abs() < 1e-12);
}

#[test]
fn query_requires_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "query",
            "--index",
            dir.path().join("missing.bin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    // no --part-id/--part-file: contract error even before index loading
    assert_ne!(out.status.code(), Some(0));
}
