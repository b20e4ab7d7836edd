//! Product-attribute schema.
//!
//! A dataset-level JSON file declaring, per attribute, either a categorical
//! vocabulary or real-value standardization statistics. The dense encoding
//! is: for each categorical attribute (in name order) a one-hot block of
//! `vocabulary + 1` slots, the extra slot being UNK for tokens outside the
//! vocabulary; then for each real attribute (in name order) one standardized
//! scalar `(x - mean) / std`. Missing attributes encode as zeros.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::brep::AttrValue;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealStat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttrSchema {
    #[serde(default)]
    pub categorical: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub real: BTreeMap<String, RealStat>,
}

impl AttrSchema {
    /// Length of the dense product vector this schema produces.
    pub fn product_dim(&self) -> usize {
        self.categorical.values().map(|v| v.len() + 1).sum::<usize>() + self.real.len()
    }

    /// Encode one face's attribute map. Unknown tokens go to the UNK slot;
    /// attributes absent from the map encode as zeros; a value whose type
    /// contradicts the schema is an error.
    pub fn encode(&self, attrs: &BTreeMap<String, AttrValue>) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(self.product_dim());
        for (name, vocab) in &self.categorical {
            let block_start = out.len();
            out.resize(block_start + vocab.len() + 1, 0.0);
            match attrs.get(name) {
                None => {}
                Some(AttrValue::Cat(token)) => {
                    let slot = vocab
                        .iter()
                        .position(|t| t == token)
                        .unwrap_or(vocab.len()); // UNK
                    out[block_start + slot] = 1.0;
                }
                Some(AttrValue::Real(_)) => {
                    return Err(Error::Schema {
                        attr: name.clone(),
                        reason: "expected a categorical token, got a number".into(),
                    });
                }
            }
        }
        for (name, stat) in &self.real {
            match attrs.get(name) {
                None => out.push(0.0),
                Some(AttrValue::Real(x)) => {
                    let std = stat.std.max(1e-9);
                    out.push(((x - stat.mean) / std) as f32);
                }
                Some(AttrValue::Cat(_)) => {
                    return Err(Error::Schema {
                        attr: name.clone(),
                        reason: "expected a number, got a categorical token".into(),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Build a schema from a dataset: sorted distinct vocabularies for
    /// categorical attributes, mean/std for real ones.
    pub fn infer<'a>(
        attr_maps: impl Iterator<Item = &'a BTreeMap<String, AttrValue>>,
    ) -> Result<AttrSchema> {
        let mut vocab: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();
        let mut reals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for attrs in attr_maps {
            for (name, value) in attrs {
                match value {
                    AttrValue::Cat(token) => {
                        if reals.contains_key(name) {
                            return Err(Error::Schema {
                                attr: name.clone(),
                                reason: "attribute mixes tokens and numbers".into(),
                            });
                        }
                        vocab.entry(name.clone()).or_default().insert(token.clone());
                    }
                    AttrValue::Real(x) => {
                        if vocab.contains_key(name) {
                            return Err(Error::Schema {
                                attr: name.clone(),
                                reason: "attribute mixes tokens and numbers".into(),
                            });
                        }
                        reals.entry(name.clone()).or_default().push(*x);
                    }
                }
            }
        }
        let categorical = vocab
            .into_iter()
            .map(|(name, tokens)| (name, tokens.into_iter().collect()))
            .collect();
        let real = reals
            .into_iter()
            .map(|(name, xs)| {
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                (
                    name,
                    RealStat {
                        mean,
                        std: var.sqrt(),
                    },
                )
            })
            .collect();
        Ok(AttrSchema { categorical, real })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<AttrSchema> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttrSchema {
        AttrSchema {
            categorical: BTreeMap::from([(
                "material".to_string(),
                vec!["steel".to_string(), "brass".to_string()],
            )]),
            real: BTreeMap::from([("mass".to_string(), RealStat { mean: 2.0, std: 0.5 })]),
        }
    }

    #[test]
    fn dense_layout_and_known_token() {
        let s = schema();
        assert_eq!(s.product_dim(), 4); // steel, brass, UNK, mass
        let attrs = BTreeMap::from([
            ("material".to_string(), AttrValue::Cat("brass".into())),
            ("mass".to_string(), AttrValue::Real(2.5)),
        ]);
        assert_eq!(s.encode(&attrs).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn unknown_token_maps_to_unk_slot() {
        let s = schema();
        let attrs = BTreeMap::from([("material".to_string(), AttrValue::Cat("wood".into()))]);
        assert_eq!(s.encode(&attrs).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn missing_attrs_encode_as_zeros() {
        let s = schema();
        assert_eq!(s.encode(&BTreeMap::new()).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn type_mismatch_is_a_schema_error() {
        let s = schema();
        let attrs = BTreeMap::from([("material".to_string(), AttrValue::Real(3.0))]);
        assert!(matches!(
            s.encode(&attrs),
            Err(Error::Schema { .. })
        ));
        let attrs = BTreeMap::from([("mass".to_string(), AttrValue::Cat("heavy".into()))]);
        assert!(matches!(s.encode(&attrs), Err(Error::Schema { .. })));
    }

    #[test]
    fn infer_builds_sorted_vocab_and_stats() {
        let maps = vec![
            BTreeMap::from([
                ("material".to_string(), AttrValue::Cat("steel".into())),
                ("mass".to_string(), AttrValue::Real(1.0)),
            ]),
            BTreeMap::from([
                ("material".to_string(), AttrValue::Cat("brass".into())),
                ("mass".to_string(), AttrValue::Real(3.0)),
            ]),
        ];
        let s = AttrSchema::infer(maps.iter()).unwrap();
        assert_eq!(s.categorical["material"], vec!["brass", "steel"]);
        let stat = s.real["mass"];
        assert_eq!(stat.mean, 2.0);
        assert_eq!(stat.std, 1.0);
    }
}
