//! Scratch experiment harness (not part of the suite; run explicitly with
//! `cargo test --test exp -- --ignored --nocapture`).

use std::collections::BTreeMap;

use cadgraph::brep::{
    generate_synthetic_family, normalize_part, to_graph, FamilySpec, PartId,
};
use cadgraph::encoder::{EncoderConfig, EncoderParams};
use cadgraph::features::{extract_graph_features, AttrSchema, GraphFeatures, GridDims};
use cadgraph::retrieval::{ndcg_at_k, recall_at_k, EmbeddingIndex, Relevance};
use cadgraph::train::{embed_dataset, train, TrainConfig};

fn family_eval(
    embeddings: &BTreeMap<PartId, Vec<f32>>,
    families: &BTreeMap<PartId, String>,
) -> (f64, f64) {
    let index = EmbeddingIndex::build(embeddings, [0u8; 32]).unwrap();
    let mut recall_sum = 0.0;
    let mut ndcg_sum = 0.0;
    let mut per_family: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for query in index.ids() {
        let pool: BTreeMap<PartId, Relevance> = index
            .ids()
            .iter()
            .filter(|id| *id != query)
            .map(|id| {
                let rel = if families[id] == families[query] {
                    Relevance::Similar
                } else {
                    Relevance::Dissimilar
                };
                (id.clone(), rel)
            })
            .collect();
        let z = index.vector(query).unwrap().to_vec();
        let result = index.query(&z, 5, Some(query)).unwrap();
        let ranked: Vec<PartId> = result.hits.iter().map(|h| h.id.clone()).collect();
        let r = recall_at_k(&ranked, &pool, 5).unwrap();
        recall_sum += r;
        ndcg_sum += ndcg_at_k(&ranked, &pool, 5).unwrap();
        let slot = per_family.entry(families[query].clone()).or_insert((0.0, 0));
        slot.0 += r;
        slot.1 += 1;
    }
    for (family, (sum, n)) in &per_family {
        eprintln!("    {family:<18} recall@5 {:.3}", sum / *n as f64);
    }
    let n = index.len() as f64;
    (recall_sum / n, ndcg_sum / n)
}

#[test]
#[ignore]
fn learning_signal_probe() {
    let seed = 101u64;
    let mut parts = Vec::new();
    let mut families: BTreeMap<PartId, String> = BTreeMap::new();
    for family in FamilySpec::default_set() {
        let generated = generate_synthetic_family(&family, 20, seed).unwrap();
        for part in &generated {
            families.insert(part.id.clone(), family.name.clone());
        }
        parts.extend(generated);
    }
    let schema =
        AttrSchema::infer(parts.iter().flat_map(|p| p.faces.iter().map(|f| &f.attrs))).unwrap();
    let dataset: Vec<GraphFeatures> = parts
        .iter()
        .map(|part| {
            let normalized = normalize_part(part).unwrap();
            let graph = to_graph(&normalized);
            extract_graph_features(&normalized, &graph, &schema, GridDims::default()).unwrap()
        })
        .collect();

    let mut encoder_config = EncoderConfig::default();
    encoder_config.product_dim = schema.product_dim();

    let baseline_params = EncoderParams::<f32>::init(&encoder_config, seed).unwrap();
    let baseline = embed_dataset(&baseline_params, &dataset).unwrap();
    let (b_recall, b_ndcg) = family_eval(&baseline, &families);
    println!("baseline: recall@5 {b_recall:.3} ndcg@5 {b_ndcg:.3}");

    let lr: f64 = std::env::var("EXP_LR")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.001);
    let epochs: usize = std::env::var("EXP_EPOCHS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    if epochs == 0 {
        return; // baseline-only probe
    }
    let mut cfg = TrainConfig::default();
    cfg.seed = seed;
    cfg.augment.seed = seed;
    cfg.learning_rate = lr;
    cfg.max_epochs = epochs;
    cfg.min_epochs = epochs;
    match std::env::var("EXP_SCHEME").as_deref() {
        Ok("node1hop") => cfg.augment.scheme = cadgraph::augment::AugmentScheme::Node1Hop,
        Ok("edge") => cfg.augment.scheme = cadgraph::augment::AugmentScheme::EdgeVertices,
        _ => {}
    }
    let out = train::<f32>(&dataset, &cfg, &encoder_config, None, |e| {
        if e.epoch % 2 == 0 {
            let (r, n) = (e.epoch, e.mean_loss);
            eprintln!("epoch {r:>2} loss {n:.4}");
        }
    })
    .unwrap();
    let trained = embed_dataset(&out.params, &dataset).unwrap();
    let (t_recall, t_ndcg) = family_eval(&trained, &families);
    println!(
        "lr {lr} epochs {epochs}: trained recall@5 {t_recall:.3} ndcg@5 {t_ndcg:.3} (need >= 0.60 and >= {:.3})",
        3.0 * b_recall
    );
}
