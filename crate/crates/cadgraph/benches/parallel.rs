//! Parallel-vs-sequential benchmarks for the data-parallel hot paths:
//! dataset embedding, feature extraction, and single-query latency.
//!
//! `par::map` fans out over rayon when the `parallel` feature (default) is
//! enabled; `par::map_seq` is the always-sequential baseline. Outputs are
//! bitwise identical either way — these benches measure the time difference
//! only.

use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, Criterion};

use cadgraph::brep::{generate_synthetic_family, normalize_part, to_graph, FamilySpec, PartId};
use cadgraph::encoder::{encode_value, EncoderConfig, EncoderParams};
use cadgraph::features::{extract_graph_features, AttrSchema, GraphFeatures, GridDims};
use cadgraph::par;
use cadgraph::retrieval::EmbeddingIndex;
use cadgraph::rng::Stream;

fn dataset(parts_per_family: usize) -> (Vec<cadgraph::brep::BRepPart>, AttrSchema) {
    let mut parts = Vec::new();
    for family in FamilySpec::default_set() {
        parts.extend(generate_synthetic_family(&family, parts_per_family, 7).unwrap());
    }
    let schema =
        AttrSchema::infer(parts.iter().flat_map(|p| p.faces.iter().map(|f| &f.attrs))).unwrap();
    (parts, schema)
}

fn features_of(
    parts: &[cadgraph::brep::BRepPart],
    schema: &AttrSchema,
    dims: GridDims,
) -> Vec<GraphFeatures> {
    par::map(parts, |part| {
        let normalized = normalize_part(part).unwrap();
        let graph = to_graph(&normalized);
        extract_graph_features(&normalized, &graph, schema, dims).unwrap()
    })
}

fn bench_feature_extraction(c: &mut Criterion) {
    let (parts, schema) = dataset(4);
    let dims = GridDims::default();
    let mut group = c.benchmark_group("feature_extraction_40_parts");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| features_of(&parts, &schema, dims))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::map_seq(&parts, |part| {
                let normalized = normalize_part(part).unwrap();
                let graph = to_graph(&normalized);
                extract_graph_features(&normalized, &graph, &schema, dims).unwrap()
            })
        })
    });
    group.finish();
}

fn bench_dataset_embedding(c: &mut Criterion) {
    let (parts, schema) = dataset(4);
    let dims = GridDims { gu: 5, gv: 5, gt: 5 };
    let features = features_of(&parts, &schema, dims);
    let mut config = EncoderConfig::tiny(schema.product_dim());
    config.grid = dims;
    let params = EncoderParams::<f32>::init(&config, 3).unwrap();
    let mut group = c.benchmark_group("embed_40_graphs");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| par::map(&features, |gf| encode_value(&params, gf).unwrap()))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_seq(&features, |gf| encode_value(&params, gf).unwrap()))
    });
    group.finish();
}

fn bench_query_latency(c: &mut Criterion) {
    let mut rng = Stream::derive(5, &["bench-index"]);
    let dim = 128;
    let mut embeddings = BTreeMap::new();
    for i in 0..20_000 {
        let z: Vec<f32> = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0) as f32).collect();
        embeddings.insert(PartId::new(format!("v{i:05}")), z);
    }
    let index = EmbeddingIndex::build(&embeddings, [0u8; 32]).unwrap();
    let query: Vec<f32> = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0) as f32).collect();
    c.bench_function("query_top10_of_20k_x128", |b| {
        b.iter(|| index.query(&query, 10, None).unwrap())
    });
}

criterion_group!(
    benches,
    bench_feature_extraction,
    bench_dataset_embedding,
    bench_query_latency
);
criterion_main!(benches);
