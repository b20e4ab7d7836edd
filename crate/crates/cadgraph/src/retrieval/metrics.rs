//! Ranking metrics over graded relevance labels.
//!
//! Three levels: similar (gain 2), partially similar (gain 1), dissimilar
//! (gain 0). Recall@K counts only "similar" as relevant with denominator
//! `min(K, |relevant in pool|)`; the inclusive variant also counts
//! "partially similar" (both are reported, similar-only is the headline).
//! NDCG@K uses exponential gains `(2^g - 1) / log2(i + 1)` with the ideal
//! ordering of the full labeled pool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::brep::PartId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    Dissimilar,
    PartiallySimilar,
    Similar,
}

impl Relevance {
    pub fn gain(self) -> f64 {
        match self {
            Relevance::Dissimilar => 0.0,
            Relevance::PartiallySimilar => 1.0,
            Relevance::Similar => 2.0,
        }
    }

    pub fn from_level(level: u8) -> Result<Relevance> {
        match level {
            0 => Ok(Relevance::Dissimilar),
            1 => Ok(Relevance::PartiallySimilar),
            2 => Ok(Relevance::Similar),
            other => Err(Error::Contract(format!(
                "relevance level must be 0, 1 or 2, got {other}"
            ))),
        }
    }
}

fn check_coverage(ranked: &[PartId], labels: &BTreeMap<PartId, Relevance>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Contract("metrics need k >= 1".into()));
    }
    for id in ranked {
        if !labels.contains_key(id) {
            return Err(Error::Contract(format!(
                "ranked candidate {id} has no relevance label"
            )));
        }
    }
    Ok(())
}

fn recall_with(
    ranked: &[PartId],
    labels: &BTreeMap<PartId, Relevance>,
    k: usize,
    relevant: impl Fn(Relevance) -> bool,
) -> Result<f64> {
    check_coverage(ranked, labels, k)?;
    let pool = labels.values().filter(|&&r| relevant(r)).count();
    if pool == 0 {
        return Ok(0.0);
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|id| relevant(labels[*id]))
        .count();
    Ok(hits as f64 / pool.min(k) as f64)
}

/// Headline recall: only "similar" counts as relevant.
pub fn recall_at_k(
    ranked: &[PartId],
    labels: &BTreeMap<PartId, Relevance>,
    k: usize,
) -> Result<f64> {
    recall_with(ranked, labels, k, |r| r == Relevance::Similar)
}

/// Variant counting "partially similar" as relevant too.
pub fn recall_at_k_inclusive(
    ranked: &[PartId],
    labels: &BTreeMap<PartId, Relevance>,
    k: usize,
) -> Result<f64> {
    recall_with(ranked, labels, k, |r| r != Relevance::Dissimilar)
}

/// NDCG@K against the ideal reordering of the whole labeled pool.
pub fn ndcg_at_k(
    ranked: &[PartId],
    labels: &BTreeMap<PartId, Relevance>,
    k: usize,
) -> Result<f64> {
    check_coverage(ranked, labels, k)?;
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| (labels[id].gain().exp2() - 1.0) / ((i + 2) as f64).log2())
        .sum();
    let mut pool_gains: Vec<f64> = labels.values().map(|r| r.gain()).collect();
    pool_gains.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = pool_gains
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| (g.exp2() - 1.0) / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        return Ok(0.0);
    }
    Ok(dcg / idcg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<PartId> {
        names.iter().map(|&n| PartId::new(n)).collect()
    }

    fn labels(pairs: &[(&str, Relevance)]) -> BTreeMap<PartId, Relevance> {
        pairs
            .iter()
            .map(|(n, r)| (PartId::new(*n), *r))
            .collect()
    }

    #[test]
    fn perfect_top_five_gives_recall_one() {
        let ranked = ids(&["a", "b", "c", "d", "e"]);
        let lab = labels(&[
            ("a", Relevance::Similar),
            ("b", Relevance::Similar),
            ("c", Relevance::Similar),
            ("d", Relevance::Similar),
            ("e", Relevance::Similar),
            ("f", Relevance::Similar),
            ("g", Relevance::Similar),
        ]);
        assert_eq!(recall_at_k(&ranked, &lab, 5).unwrap(), 1.0);
    }

    #[test]
    fn small_pool_uses_min_k_pool_denominator() {
        // 2 similar exist, both retrieved in the top 5 -> min(5, 2) = 2
        let ranked = ids(&["a", "x", "b", "y", "z"]);
        let lab = labels(&[
            ("a", Relevance::Similar),
            ("b", Relevance::Similar),
            ("x", Relevance::Dissimilar),
            ("y", Relevance::Dissimilar),
            ("z", Relevance::Dissimilar),
        ]);
        assert_eq!(recall_at_k(&ranked, &lab, 5).unwrap(), 1.0);
    }

    #[test]
    fn no_similar_items_gives_zero() {
        let ranked = ids(&["x", "y"]);
        let lab = labels(&[("x", Relevance::Dissimilar), ("y", Relevance::PartiallySimilar)]);
        assert_eq!(recall_at_k(&ranked, &lab, 2).unwrap(), 0.0);
        // the inclusive variant counts the partial hit
        assert_eq!(recall_at_k_inclusive(&ranked, &lab, 2).unwrap(), 1.0);
    }

    #[test]
    fn ideal_ordering_scores_one() {
        let ranked = ids(&["a", "b", "c"]);
        let lab = labels(&[
            ("a", Relevance::Similar),
            ("b", Relevance::PartiallySimilar),
            ("c", Relevance::Dissimilar),
        ]);
        assert_eq!(ndcg_at_k(&ranked, &lab, 3).unwrap(), 1.0);
    }

    #[test]
    fn partial_then_similar_matches_the_hand_value() {
        let ranked = ids(&["p", "s"]);
        let lab = labels(&[("p", Relevance::PartiallySimilar), ("s", Relevance::Similar)]);
        let got = ndcg_at_k(&ranked, &lab, 2).unwrap();
        // DCG = 1/log2(2) + 3/log2(3); IDCG = 3/log2(2) + 1/log2(3)
        let dcg = 1.0 + 3.0 / 3f64.log2();
        let idcg = 3.0 + 1.0 / 3f64.log2();
        assert_eq!(got.to_bits(), (dcg / idcg).to_bits());
        assert!((got - 0.797).abs() < 5e-4, "got {got}");
    }

    #[test]
    fn all_dissimilar_scores_zero() {
        let ranked = ids(&["x", "y"]);
        let lab = labels(&[("x", Relevance::Dissimilar), ("y", Relevance::Dissimilar)]);
        assert_eq!(ndcg_at_k(&ranked, &lab, 2).unwrap(), 0.0);
    }

    #[test]
    fn zero_k_and_unlabeled_candidates_are_contract_errors() {
        let ranked = ids(&["a"]);
        let lab = labels(&[("a", Relevance::Similar)]);
        assert!(matches!(
            recall_at_k(&ranked, &lab, 0),
            Err(Error::Contract(_))
        ));
        let unlabeled = ids(&["a", "mystery"]);
        assert!(matches!(
            ndcg_at_k(&unlabeled, &lab, 2),
            Err(Error::Contract(_))
        ));
    }
}
