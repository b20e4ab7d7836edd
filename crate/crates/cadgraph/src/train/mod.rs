//! Contrastive training loop, checkpointing, and dataset embedding.
//!
//! Each epoch shuffles the dataset, splits it into batches of
//! `batch_size` graphs (a trailing batch of fewer than 2 is dropped), draws
//! two augmented views per graph, encodes all views, applies the NT-Xent
//! loss over the two view matrices and takes one Adam step. View encoding
//! and the per-view backward passes fan out in parallel; gradients are
//! reduced in batch order and the optimizer step is single-writer, so runs
//! are bit-reproducible for a fixed seed regardless of thread count.
//!
//! Early stopping tracks the best mean epoch loss and stops after
//! `patience` epochs without improvement, never before
//! `min(min_epochs, max_epochs)`. The best parameters are checkpointed.

pub mod loss;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::{augment_pair, AugmentConfig};
use crate::encoder::{encode_value, EncodeSession, EncoderConfig, EncoderParams, GraphTensors};
use crate::error::{Error, Result};
use crate::features::GraphFeatures;
use crate::nn::{checkpoint, AdamState, Real, Tape, Tensor};
use crate::par;
use crate::rng::Stream;

pub use loss::{nt_xent_loss, nt_xent_on_tape, NtXentOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Batch size N (>= 2; NT-Xent needs at least one negative).
    pub batch_size: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early stopping never fires before this many epochs.
    pub min_epochs: usize,
    pub patience: usize,
    pub augment: AugmentConfig,
    /// Average the loss over both view orderings.
    pub symmetric_loss: bool,
    /// Include the positive pair in the NT-Xent denominator.
    pub include_positive: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            temperature: 1.0,
            learning_rate: 0.001,
            max_epochs: 20,
            min_epochs: 20,
            patience: 10,
            augment: AugmentConfig::default(),
            symmetric_loss: true,
            include_positive: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be >= 2, got {}",
                self.batch_size
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if !(self.temperature > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config(
                "temperature and learning rate must be positive".into(),
            ));
        }
        self.augment.validate()
    }

    fn loss_options(&self) -> NtXentOptions {
        NtXentOptions {
            temperature: self.temperature,
            symmetric: self.symmetric_loss,
            include_positive: self.include_positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub improved: bool,
    pub checkpoint: Option<String>,
    /// Wall time is reported live but excluded from serialized artifacts so
    /// identical (inputs, config, seed) produce identical bytes.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
}

impl TrainHistory {
    /// One JSON object per epoch, then a summary line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&serde_json::json!({
            "best_epoch": self.best_epoch,
            "best_loss": self.best_loss,
        }))?);
        out.push('\n');
        Ok(out)
    }
}

pub struct TrainOutput<R: Real> {
    pub params: EncoderParams<R>,
    pub history: TrainHistory,
}

fn ensure_finite_loss(
    loss: f64,
    epoch: usize,
    batch: usize,
    parts: &[String],
    trace: &[f64],
) -> Result<()> {
    if loss.is_finite() {
        return Ok(());
    }
    Err(Error::TrainDiverged {
        epoch,
        batch,
        parts: parts.to_vec(),
        trace: trace.to_vec(),
    })
}

/// Train an encoder on a dataset of graph features. Checkpoints the best
/// parameters to `checkpoint_path` when given; `progress` sees every epoch.
pub fn train<R: Real>(
    dataset: &[GraphFeatures],
    config: &TrainConfig,
    encoder_config: &EncoderConfig,
    checkpoint_path: Option<&Path>,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutput<R>> {
    config.validate()?;
    encoder_config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("training dataset is empty".into()));
    }
    for gf in dataset {
        if gf.dims != encoder_config.grid || gf.product_dim != encoder_config.product_dim {
            return Err(Error::Config(format!(
                "dataset dims {:?}/{} do not match encoder config {:?}/{}",
                gf.dims, gf.product_dim, encoder_config.grid, encoder_config.product_dim
            )));
        }
    }

    let mut params = EncoderParams::<R>::init(encoder_config, config.seed)?;
    let named_shapes: Vec<Vec<usize>> = params
        .named()
        .iter()
        .map(|(_, t)| t.shape().to_vec())
        .collect();
    let mut adam = AdamState::<R>::new(&named_shapes, config.learning_rate);
    let opts = config.loss_options();
    let config_blob = serde_json::to_string(encoder_config)?;

    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_loss: f64::INFINITY,
    };
    let mut best_params = params.clone();
    let mut loss_trace: Vec<f64> = Vec::new();
    let effective_min = config.min_epochs.min(config.max_epochs);

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut shuffle_rng =
            Stream::derive(config.seed, &["train-shuffle", &epoch.to_string()]);
        shuffle_rng.shuffle(&mut order);

        let mut loss_weighted = 0.0f64;
        let mut loss_weight = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue; // a single leftover graph has no negatives
            }
            let batch_parts: Vec<String> = chunk
                .iter()
                .map(|&i| dataset[i].graph.part_id.to_string())
                .collect();
            // two views per graph
            let views: Vec<(usize, GraphFeatures)> = chunk
                .iter()
                .flat_map(|&i| {
                    let (v1, v2, _) = augment_pair(&dataset[i], &config.augment, epoch as u64);
                    [(i, v1), (i, v2)]
                })
                .collect();
            // forward passes, parallel over views
            let encoded: Vec<Result<(EncodeSession<R>, crate::encoder::model::EncodeTrace)>> =
                par::map(&views, |(_, gf)| {
                    let tensors = GraphTensors::build(gf)?;
                    let mut session = EncodeSession::new(&params, true);
                    let trace = session.encode(&tensors)?;
                    Ok((session, trace))
                });
            let mut sessions = Vec::with_capacity(encoded.len());
            for r in encoded {
                sessions.push(r?);
            }
            let d = encoder_config.graph_dim;
            let n = chunk.len();
            let mut z1_data = Vec::with_capacity(n * d);
            let mut z2_data = Vec::with_capacity(n * d);
            for pair in sessions.chunks(2) {
                z1_data.extend_from_slice(pair[0].0.tape.value(pair[0].1.z).data());
                z2_data.extend_from_slice(pair[1].0.tape.value(pair[1].1.z).data());
            }
            // loss tape over the 2N embeddings
            let mut loss_tape = Tape::<R>::new();
            let z1 = loss_tape.leaf(Tensor::from_vec(&[n, d], z1_data)?, true);
            let z2 = loss_tape.leaf(Tensor::from_vec(&[n, d], z2_data)?, true);
            let loss_id = nt_xent_on_tape(&mut loss_tape, z1, z2, &opts)?;
            let loss = loss_tape.value(loss_id).item().to_f64();
            ensure_finite_loss(loss, epoch, batch_idx, &batch_parts, &loss_trace)?;
            loss_trace.push(loss);
            let mut loss_grads = loss_tape.backward(loss_id)?;
            let dz1 = loss_grads.take(z1).expect("z1 reaches the loss");
            let dz2 = loss_grads.take(z2).expect("z2 reaches the loss");

            // per-view backward passes, seeded by the loss gradient rows
            let jobs: Vec<(usize, &(EncodeSession<R>, crate::encoder::model::EncodeTrace))> =
                sessions.iter().enumerate().collect();
            let view_grads: Vec<Result<Vec<Option<Tensor<R>>>>> = par::map(&jobs, |(k, sess)| {
                let row = k / 2;
                let source = if k % 2 == 0 { &dz1 } else { &dz2 };
                let seed =
                    Tensor::from_vec(&[d], source.data()[row * d..(row + 1) * d].to_vec())?;
                let mut grads = sess.0.tape.backward_from(sess.1.z, seed)?;
                Ok(sess
                    .0
                    .staged
                    .ordered_ids()
                    .iter()
                    .map(|&id| grads.take(id))
                    .collect())
            });
            // fixed-order reduction over views
            let mut total: Vec<Tensor<R>> = named_shapes
                .iter()
                .map(|s| Tensor::zeros(s))
                .collect();
            for grads in view_grads {
                for (slot, grad) in total.iter_mut().zip(grads?.into_iter()) {
                    if let Some(g) = grad {
                        let sum: Vec<R> = slot
                            .data()
                            .iter()
                            .zip(g.data().iter())
                            .map(|(&a, &b)| a + b)
                            .collect();
                        *slot = Tensor::from_vec(slot.shape(), sum)?;
                    }
                }
            }
            drop(sessions);

            let mut tensors: Vec<Tensor<R>> =
                params.named().into_iter().map(|(_, t)| t).collect();
            adam.step(&mut tensors, &total)?;
            params.set_from_list(&tensors);

            loss_weighted += loss * chunk.len() as f64;
            loss_weight += chunk.len();
        }
        if loss_weight == 0 {
            return Err(Error::Contract(
                "no trainable batch (dataset smaller than 2 graphs)".into(),
            ));
        }
        let mean_loss = loss_weighted / loss_weight as f64;
        let improved = mean_loss < history.best_loss;
        let mut checkpoint_ref = None;
        if improved {
            history.best_loss = mean_loss;
            history.best_epoch = epoch;
            best_params = params.clone();
            if let Some(path) = checkpoint_path {
                checkpoint::save(path, &config_blob, &best_params.named())?;
                checkpoint_ref = Some(path.display().to_string());
            }
        }
        let record = EpochRecord {
            epoch,
            mean_loss,
            improved,
            checkpoint: checkpoint_ref,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        progress(&record);
        history.epochs.push(record);
        if epoch >= effective_min && epoch - history.best_epoch >= config.patience {
            break;
        }
    }
    Ok(TrainOutput {
        params: best_params,
        history,
    })
}

/// Embed every graph with fixed parameters (no augmentation). Parallel over
/// parts; output order and content depend only on the inputs.
pub fn embed_dataset<R: Real>(
    params: &EncoderParams<R>,
    dataset: &[GraphFeatures],
) -> Result<BTreeMap<crate::brep::PartId, Vec<f32>>> {
    for gf in dataset {
        if gf.dims != params.config.grid || gf.product_dim != params.config.product_dim {
            return Err(Error::Config(format!(
                "dataset dims {:?}/{} do not match checkpoint config {:?}/{}",
                gf.dims, gf.product_dim, params.config.grid, params.config.product_dim
            )));
        }
    }
    let embedded: Vec<Result<(crate::brep::PartId, Vec<f32>)>> = par::map(dataset, |gf| {
        let z = encode_value(params, gf)?;
        Ok((
            gf.graph.part_id.clone(),
            z.data().iter().map(|x| x.to_f64() as f32).collect(),
        ))
    });
    let mut out = BTreeMap::new();
    for r in embedded {
        let (id, z) = r?;
        if out.insert(id.clone(), z).is_some() {
            return Err(Error::Contract(format!("duplicate part id {id}")));
        }
    }
    Ok(out)
}

/// Grid-search driver over (learning rate, temperature, alpha, beta);
/// best combination by final best training loss.
pub fn grid_search<R: Real>(
    dataset: &[GraphFeatures],
    base: &TrainConfig,
    encoder_config: &EncoderConfig,
    learning_rates: &[f64],
    temperatures: &[f64],
    alphas: &[f64],
    betas: &[f64],
) -> Result<(TrainConfig, TrainHistory)> {
    let mut best: Option<(TrainConfig, TrainHistory)> = None;
    for &lr in learning_rates {
        for &tau in temperatures {
            for &alpha in alphas {
                for &beta in betas {
                    let mut config = base.clone();
                    config.learning_rate = lr;
                    config.temperature = tau;
                    config.augment.alpha = alpha;
                    config.augment.beta = beta;
                    let out = train::<R>(dataset, &config, encoder_config, None, |_| {})?;
                    let better = match &best {
                        None => true,
                        Some((_, h)) => out.history.best_loss < h.best_loss,
                    };
                    if better {
                        best = Some((config, out.history));
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::Contract("grid search over empty ranges".into()))
}
