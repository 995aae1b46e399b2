//! Training: reconstruction-only pretraining, joint reconstruction and
//! classification, then decoder retraining against a frozen encoder.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{
    init_embeddings_random, load_embeddings_text, pad_and_index, Corpus, TrainingMeta, Vocabulary, PAD,
};
use crate::decoder::{decode_teacher_forced, decoder_backward};
use crate::encoder::{encode_with_context, encoder_backward, EncoderConfig};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{softmax_cross_entropy, Matrix, ParamTensors, Vector};
use crate::optim::{clip_global_norm, sgd_step, OptimizerState, SgdConfig};

/// Global gradient norm above which updates are rescaled.
pub const CLIP_NORM: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainPlan {
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    pub retrain_epochs: usize,
    pub batch_size: usize,
    /// Evaluate on the held-out split after every this many batches.
    pub eval_every: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Must stay 1.0; present so a config asking for anything else fails
    /// loudly instead of being ignored.
    pub reconstruction_weight: f64,
    pub classification_weight: f64,
}

impl Default for TrainPlan {
    fn default() -> Self {
        Self {
            phase1_epochs: 200,
            phase2_epochs: 100,
            retrain_epochs: 14,
            batch_size: 64,
            eval_every: 10,
            learning_rate: 5e-3,
            seed: 7,
            reconstruction_weight: 1.0,
            classification_weight: 1.0,
        }
    }
}

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.reconstruction_weight != 1.0 || self.classification_weight != 1.0 {
            return Err(Error::Input(
                "the loss is the unweighted sum of reconstruction and classification; both weights must be 1.0"
                    .into(),
            ));
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Input("batch size and eval interval must be at least 1".into()));
        }
        self.optimizer().validate()
    }

    fn optimizer(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            ..SgdConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Reconstruction only, through encoder and decoder.
    Reconstruct,
    /// Reconstruction plus classification, both networks updated.
    Joint,
    /// Decoder alone on fixed encodings.
    RetrainDecoder,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Reconstruct => "reconstruct",
            Phase::Joint => "joint",
            Phase::RetrainDecoder => "retrain-decoder",
        }
    }

    fn seed_offset(self) -> u64 {
        match self {
            Phase::Reconstruct => 1,
            Phase::Joint => 2,
            Phase::RetrainDecoder => 3,
        }
    }
}

/// Aggregate scores over a corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub examples: usize,
    pub classification_accuracy: f64,
    /// Teacher-forced argmax accuracy over every target position, EOS included.
    pub reconstruction_token_accuracy: f64,
    pub reconstruction_loss: f64,
    pub classification_loss: f64,
}

/// Periodic held-out evaluation during training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainEvent {
    pub phase: Phase,
    /// 1-based epoch within the phase.
    pub epoch: usize,
    /// 1-based batch count within the phase.
    pub batch: usize,
    pub metrics: Metrics,
}

impl fmt::Display for TrainEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} batch {} recon {:.6} class {:.6} acc {:.4}",
            self.epoch,
            self.batch,
            self.metrics.reconstruction_loss,
            self.metrics.classification_loss,
            self.metrics.classification_accuracy
        )
    }
}

/// Result of [`train_all`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub meta: TrainingMeta,
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
}

pub fn build_vocabulary(corpus: &Corpus) -> Result<Vocabulary> {
    Vocabulary::build(corpus.examples.iter().flat_map(|e| e.tokens.iter().map(String::as_str)))
}

/// A freshly initialized model whose vocabulary comes from `train`.
/// Embeddings are loaded from a word-vector file when given, random
/// otherwise.
pub fn build_model(
    train: &Corpus,
    encoder_config: EncoderConfig,
    max_len: usize,
    embeddings_path: Option<&Path>,
    seed: u64,
) -> Result<Model> {
    let vocab = build_vocabulary(train)?;
    let embeddings = match embeddings_path {
        Some(p) => load_embeddings_text(p, &vocab, seed)?,
        None => init_embeddings_random(&vocab, encoder_config.embed_dim, seed),
    };
    if embeddings.cols() != encoder_config.embed_dim {
        return Err(Error::Input(format!(
            "embedding file has dimension {}, encoder expects {}",
            embeddings.cols(),
            encoder_config.embed_dim
        )));
    }
    Model::init(vocab, embeddings, encoder_config, max_len, true, seed.wrapping_add(1))
}

/// Mean reconstruction and classification scores over `corpus`.
pub fn evaluate(model: &Model, corpus: &Corpus) -> Result<Metrics> {
    if corpus.is_empty() {
        return Err(Error::Input("cannot evaluate an empty corpus".into()));
    }
    let mut correct_labels = 0;
    let mut correct_tokens = 0;
    let mut total_tokens = 0;
    let mut recon = 0.0;
    let mut class = 0.0;
    for ex in &corpus.examples {
        let ids = pad_and_index(&ex.tokens, &model.vocab, model.max_len());
        let enc = crate::encoder::encode(&ids.encoder, &model.embeddings, &model.encoder, &model.encoder_config)?;
        let tf = decode_teacher_forced(&enc.z, &ids.target, &model.decoder, &model.embeddings, &model.decoder_config)?;
        let (closs, _) = softmax_cross_entropy(&enc.logits, ex.label.index())?;
        correct_labels += usize::from(enc.predicted_label == ex.label);
        correct_tokens += tf.correct_tokens();
        total_tokens += tf.targets.len();
        recon += tf.loss;
        class += closs;
    }
    let n = corpus.len() as f64;
    Ok(Metrics {
        examples: corpus.len(),
        classification_accuracy: correct_labels as f64 / n,
        reconstruction_token_accuracy: correct_tokens as f64 / total_tokens as f64,
        reconstruction_loss: recon / n,
        classification_loss: class / n,
    })
}

/// Trains encoder and decoder on reconstruction alone. Labels are ignored.
/// Returns the mean training loss of each epoch.
pub fn train_phase1(
    model: &mut Model,
    train: &Corpus,
    eval: Option<&Corpus>,
    plan: &TrainPlan,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<Vec<f64>> {
    run_phase(Phase::Reconstruct, plan.phase1_epochs, model, train, eval, plan, observer)
}

/// Trains both networks on reconstruction + classification loss.
pub fn train_phase2(
    model: &mut Model,
    train: &Corpus,
    eval: Option<&Corpus>,
    plan: &TrainPlan,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<Vec<f64>> {
    run_phase(Phase::Joint, plan.phase2_epochs, model, train, eval, plan, observer)
}

/// Encodes every training sentence once, then trains only the decoder on
/// those fixed vectors. The encoder and the shared embedding table are left
/// untouched.
pub fn retrain_decoder(
    model: &mut Model,
    train: &Corpus,
    eval: Option<&Corpus>,
    plan: &TrainPlan,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<Vec<f64>> {
    run_phase(Phase::RetrainDecoder, plan.retrain_epochs, model, train, eval, plan, observer)
}

/// Runs all three phases and scores the result on both splits.
pub fn train_all(
    model: &mut Model,
    train: &Corpus,
    test: &Corpus,
    plan: &TrainPlan,
    split_seed: u64,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<TrainOutcome> {
    plan.validate()?;
    let eval = (!test.is_empty()).then_some(test);
    let phase1_loss = train_phase1(model, train, eval, plan, observer)?;
    let phase2_loss = train_phase2(model, train, eval, plan, observer)?;
    let retrain_loss = retrain_decoder(model, train, eval, plan, observer)?;
    Ok(TrainOutcome {
        meta: TrainingMeta {
            seed: plan.seed,
            split_seed,
            phase1_epochs: plan.phase1_epochs,
            phase2_epochs: plan.phase2_epochs,
            retrain_epochs: plan.retrain_epochs,
            phase1_loss,
            phase2_loss,
            retrain_loss,
        },
        train_metrics: evaluate(model, train)?,
        test_metrics: match eval {
            Some(t) => evaluate(model, t)?,
            None => evaluate(model, train)?,
        },
    })
}

struct Prepared {
    encoder_ids: Vec<usize>,
    target: Vec<usize>,
    label: usize,
    /// Fixed encoding, only for decoder retraining.
    z: Option<Vector>,
}

/// Per-batch accumulators, laid out like the parameters they update.
struct BatchGrads {
    embeddings: Matrix,
    encoder: Vec<f64>,
    decoder: Vec<f64>,
}

impl BatchGrads {
    fn zeros(model: &Model) -> Self {
        Self {
            embeddings: Matrix::zeros(model.embeddings.rows(), model.embeddings.cols()),
            encoder: vec![0.0; model.encoder.num_params()],
            decoder: vec![0.0; model.decoder.num_params()],
        }
    }

    fn add_rows(&mut self, rows: &[(usize, Vector)], scale: f64) {
        for (r, g) in rows {
            for (a, b) in self.embeddings.row_mut(*r).iter_mut().zip(g.iter()) {
                *a += scale * b;
            }
        }
    }
}

fn add_scaled(acc: &mut [f64], g: &[f64], scale: f64) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += scale * b;
    }
}

/// Loss and gradient contributions of one sentence; returns
/// `(reconstruction loss, classification loss)`.
fn accumulate(
    phase: Phase,
    model: &Model,
    ex: &Prepared,
    scale: f64,
    grads: &mut BatchGrads,
) -> Result<(f64, f64)> {
    if let Some(z) = &ex.z {
        let tf = decode_teacher_forced(z, &ex.target, &model.decoder, &model.embeddings, &model.decoder_config)?;
        let dg = decoder_backward(&tf, &model.decoder);
        add_scaled(&mut grads.decoder, &dg.params.flatten(), scale);
        return Ok((tf.loss, 0.0));
    }
    let ctx = encode_with_context(&ex.encoder_ids, &model.embeddings, &model.encoder, &model.encoder_config)?;
    let z = &ctx.encoding.z;
    let tf = decode_teacher_forced(z, &ex.target, &model.decoder, &model.embeddings, &model.decoder_config)?;
    let dg = decoder_backward(&tf, &model.decoder);
    let (class_loss, d_logits) = match phase {
        Phase::Joint => softmax_cross_entropy(&ctx.encoding.logits, ex.label)?,
        _ => (0.0, Vector::zeros(ctx.encoding.logits.dim())),
    };
    let eg = encoder_backward(&ctx, &model.encoder, &dg.d_z, &d_logits)?;
    add_scaled(&mut grads.decoder, &dg.params.flatten(), scale);
    add_scaled(&mut grads.encoder, &eg.params.flatten(), scale);
    grads.add_rows(&dg.embedding_rows, scale);
    grads.add_rows(&eg.embedding_rows, scale);
    Ok((tf.loss, class_loss))
}

/// Applies one clipped optimizer step to the parameter groups the phase
/// trains.
fn apply_step(
    phase: Phase,
    model: &mut Model,
    grads: &BatchGrads,
    state: &mut OptimizerState,
    cfg: &SgdConfig,
) -> Result<()> {
    let trains_encoder = phase != Phase::RetrainDecoder;
    let mut params = Vec::new();
    let mut flat_grads = Vec::new();
    if trains_encoder {
        params.extend_from_slice(model.embeddings.data());
        flat_grads.extend_from_slice(grads.embeddings.data());
        params.extend(model.encoder.flatten());
        flat_grads.extend_from_slice(&grads.encoder);
    }
    params.extend(model.decoder.flatten());
    flat_grads.extend_from_slice(&grads.decoder);

    clip_global_norm(&mut flat_grads, CLIP_NORM);
    sgd_step(&mut params, &flat_grads, state, cfg)?;

    let mut rest = params.as_slice();
    if trains_encoder {
        let (emb, tail) = rest.split_at(model.embeddings.data().len());
        model.embeddings.data_mut().copy_from_slice(emb);
        model.embeddings.row_mut(PAD).fill(0.0);
        let (enc, tail) = tail.split_at(model.encoder.num_params());
        model.encoder.load_flat(enc)?;
        rest = tail;
    }
    model.decoder.load_flat(rest)?;
    if let Some(table) = model.decoder.input_embeddings.as_mut() {
        table.row_mut(PAD).fill(0.0);
    }
    Ok(())
}

fn run_phase(
    phase: Phase,
    epochs: usize,
    model: &mut Model,
    train: &Corpus,
    eval: Option<&Corpus>,
    plan: &TrainPlan,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<Vec<f64>> {
    plan.validate()?;
    if train.is_empty() {
        return Err(Error::Input("training corpus is empty".into()));
    }
    let cfg = plan.optimizer();
    let mut prepared = Vec::with_capacity(train.len());
    for ex in &train.examples {
        let ids = pad_and_index(&ex.tokens, &model.vocab, model.max_len());
        let z = match phase {
            Phase::RetrainDecoder => Some(
                crate::encoder::encode(&ids.encoder, &model.embeddings, &model.encoder, &model.encoder_config)?.z,
            ),
            _ => None,
        };
        prepared.push(Prepared {
            encoder_ids: ids.encoder,
            target: ids.target,
            label: ex.label.index(),
            z,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_mul(31).wrapping_add(phase.seed_offset()));
    let mut state = OptimizerState::default();
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut curve = Vec::with_capacity(epochs);
    let mut batch_count = 0;
    for epoch in 1..=epochs {
        let snapshot = model.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(plan.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut grads = BatchGrads::zeros(model);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (recon, class) = accumulate(phase, model, &prepared[i], scale, &mut grads)?;
                batch_loss += recon + class;
            }
            if !batch_loss.is_finite() {
                *model = snapshot;
                return Err(Error::Training {
                    message: format!("non-finite loss in {} phase; parameters restored to the start of the epoch", phase.name()),
                    epoch,
                });
            }
            epoch_loss += batch_loss;
            apply_step(phase, model, &grads, &mut state, &cfg)?;
            batch_count += 1;
            if batch_count % plan.eval_every == 0 {
                if let Some(eval) = eval {
                    observer(&TrainEvent {
                        phase,
                        epoch,
                        batch: batch_count,
                        metrics: evaluate(model, eval)?,
                    });
                }
            }
        }
        curve.push(epoch_loss / prepared.len() as f64);
        log::debug!("{} epoch {epoch} loss {:.6}", phase.name(), curve[curve.len() - 1]);
    }
    Ok(curve)
}
