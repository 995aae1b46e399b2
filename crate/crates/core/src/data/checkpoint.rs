//! Single-file binary checkpoints.
//!
//! Layout: the magic bytes `LSCK`, a `u32` version, then a fixed sequence of
//! sections, each a 4-byte tag, a `u64` payload length and the payload.
//! Integers and floats are little-endian; floats are IEEE-754 `f64`, so a
//! save/load round trip is bit-exact.
//!
//! | tag    | payload                                                        |
//! |--------|----------------------------------------------------------------|
//! | `ECFG` | embed dim, heights, filters per height, activation, classes    |
//! | `DCFG` | state dim, embed dim, max len, tied flag                       |
//! | `TRAV` | λ, optional σ, set size                                        |
//! | `VOCB` | token count, then length-prefixed UTF-8 tokens in id order     |
//! | `EMBD` | embedding matrix                                               |
//! | `ENCP` | filters, biases, classifier weights and bias                   |
//! | `DECP` | GRU weights, output layer, optional untied input table         |
//! | `META` | seeds, epoch counts and per-epoch loss curves                  |
//!
//! A matrix is `rows: u64, cols: u64` followed by `rows × cols` values in row
//! order; a vector is `len: u64` followed by its values.

use std::io::Write;
use std::path::Path;

use super::Vocabulary;
use crate::decoder::{DecoderConfig, DecoderParams};
use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{Activation, GruWeights, Matrix, Vector};
use crate::traversal::TraversalDefaults;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"LSCK";

/// How a model was trained.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingMeta {
    /// Seed for initialization and batch order.
    pub seed: u64,
    /// Seed of the train/test split.
    pub split_seed: u64,
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    pub retrain_epochs: usize,
    /// Mean loss per epoch, one curve per phase.
    pub phase1_loss: Vec<f64>,
    pub phase2_loss: Vec<f64>,
    pub retrain_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub traversal: TraversalDefaults,
    pub meta: TrainingMeta,
}

/// Serializes `checkpoint` to bytes.
pub fn checkpoint_bytes(checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    let model = &checkpoint.model;
    model.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());

    section(&mut out, b"ECFG", |w| {
        let c = &model.encoder_config;
        w.usize(c.embed_dim);
        w.usize(c.filter_heights.len());
        c.filter_heights.iter().for_each(|&h| w.usize(h));
        w.usize(c.filters_per_height);
        w.string(c.activation.name());
        w.usize(c.num_classes);
    });
    section(&mut out, b"DCFG", |w| {
        let c = &model.decoder_config;
        w.usize(c.state_dim);
        w.usize(c.embed_dim);
        w.usize(c.max_len);
        w.bool(c.tie_input_embeddings);
    });
    section(&mut out, b"TRAV", |w| {
        let t = &checkpoint.traversal;
        w.f64(t.lambda);
        w.bool(t.sigma.is_some());
        w.f64(t.sigma.unwrap_or(0.0));
        w.usize(t.set_size);
    });
    section(&mut out, b"VOCB", |w| {
        w.usize(model.vocab.len());
        model.vocab.tokens().iter().for_each(|t| w.string(t));
    });
    section(&mut out, b"EMBD", |w| w.matrix(&model.embeddings));
    section(&mut out, b"ENCP", |w| {
        let p = &model.encoder;
        w.usize(p.filters.len());
        p.filters.iter().for_each(|f| w.matrix(f));
        w.values(&p.biases);
        w.matrix(&p.classifier_w);
        w.values(&p.classifier_b);
    });
    section(&mut out, b"DECP", |w| {
        let p = &model.decoder;
        let g = &p.gru;
        for m in [&g.w_u, &g.w_r, &g.w_c, &g.u_u, &g.u_r, &g.u_c] {
            w.matrix(m);
        }
        for v in [&g.b_u, &g.b_r, &g.b_c] {
            w.values(v);
        }
        w.matrix(&p.out_w);
        w.values(&p.out_b);
        w.bool(p.input_embeddings.is_some());
        if let Some(m) = &p.input_embeddings {
            w.matrix(m);
        }
    });
    section(&mut out, b"META", |w| {
        let m = &checkpoint.meta;
        w.u64(m.seed);
        w.u64(m.split_seed);
        w.usize(m.phase1_epochs);
        w.usize(m.phase2_epochs);
        w.usize(m.retrain_epochs);
        w.values(&m.phase1_loss);
        w.values(&m.phase2_loss);
        w.values(&m.retrain_loss);
    });
    Ok(out)
}

/// Parses bytes produced by [`checkpoint_bytes`]. Any truncation, unknown
/// section, version mismatch or trailing data is a format error.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }

    let mut s = r.section(b"ECFG")?;
    let embed_dim = s.usize()?;
    let n_heights = s.count(8)?;
    let filter_heights = (0..n_heights).map(|_| s.usize()).collect::<Result<_>>()?;
    let filters_per_height = s.usize()?;
    let act_name = s.string()?;
    let activation = Activation::from_name(&act_name)
        .ok_or_else(|| Error::Format(format!("unknown activation {act_name:?}")))?;
    let encoder_config = EncoderConfig {
        embed_dim,
        filter_heights,
        filters_per_height,
        activation,
        num_classes: s.usize()?,
    };
    s.finish()?;

    let mut s = r.section(b"DCFG")?;
    let decoder_config = DecoderConfig {
        state_dim: s.usize()?,
        embed_dim: s.usize()?,
        max_len: s.usize()?,
        tie_input_embeddings: s.bool()?,
    };
    s.finish()?;

    let mut s = r.section(b"TRAV")?;
    let lambda = s.f64()?;
    let has_sigma = s.bool()?;
    let sigma = s.f64()?;
    let traversal = TraversalDefaults {
        lambda,
        sigma: has_sigma.then_some(sigma),
        set_size: s.usize()?,
    };
    s.finish()?;

    let mut s = r.section(b"VOCB")?;
    let n = s.count(8)?;
    let tokens = (0..n).map(|_| s.string()).collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::from_list(tokens)?;
    s.finish()?;

    let mut s = r.section(b"EMBD")?;
    let embeddings = s.matrix()?;
    s.finish()?;

    let mut s = r.section(b"ENCP")?;
    let n = s.count(16)?;
    let filters = (0..n).map(|_| s.matrix()).collect::<Result<_>>()?;
    let encoder = EncoderParams {
        filters,
        biases: s.values()?,
        classifier_w: s.matrix()?,
        classifier_b: Vector::new(s.values()?),
    };
    s.finish()?;

    let mut s = r.section(b"DECP")?;
    let gru = GruWeights {
        w_u: s.matrix()?,
        w_r: s.matrix()?,
        w_c: s.matrix()?,
        u_u: s.matrix()?,
        u_r: s.matrix()?,
        u_c: s.matrix()?,
        b_u: Vector::new(s.values()?),
        b_r: Vector::new(s.values()?),
        b_c: Vector::new(s.values()?),
    };
    let out_w = s.matrix()?;
    let out_b = Vector::new(s.values()?);
    let input_embeddings = if s.bool()? { Some(s.matrix()?) } else { None };
    let decoder = DecoderParams {
        gru,
        out_w,
        out_b,
        input_embeddings,
    };
    s.finish()?;

    let mut s = r.section(b"META")?;
    let meta = TrainingMeta {
        seed: s.u64()?,
        split_seed: s.u64()?,
        phase1_epochs: s.usize()?,
        phase2_epochs: s.usize()?,
        retrain_epochs: s.usize()?,
        phase1_loss: s.values()?,
        phase2_loss: s.values()?,
        retrain_loss: s.values()?,
    };
    s.finish()?;
    r.finish()?;

    let model = Model {
        vocab,
        embeddings,
        encoder_config,
        decoder_config,
        encoder,
        decoder,
    };
    model
        .validate()
        .map_err(|e| Error::Format(format!("inconsistent checkpoint: {e}")))?;
    Ok(Checkpoint {
        model,
        traversal,
        meta,
    })
}

/// Writes the checkpoint atomically: a temporary file in the target
/// directory is renamed over `path` only once fully written.
pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let bytes = checkpoint_bytes(checkpoint)?;
    crate::atomic::write_atomic(path.as_ref(), |w| Ok(w.write_all(&bytes)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], fill: impl FnOnce(&mut Writer)) {
    let mut w = Writer(Vec::new());
    fill(&mut w);
    out.extend_from_slice(tag);
    out.extend_from_slice(&(w.0.len() as u64).to_le_bytes());
    out.extend_from_slice(&w.0);
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn bool(&mut self, v: bool) {
        self.0.push(u8::from(v));
    }

    fn string(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn values(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|x| self.f64(*x));
    }

    fn matrix(&mut self, m: &Matrix) {
        self.usize(m.rows());
        self.usize(m.cols());
        m.data().iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(Error::Format(format!("{} unexpected trailing bytes", self.remaining())))
        }
    }

    fn section(&mut self, tag: &[u8; 4]) -> Result<Reader<'a>> {
        let found = self.take(4)?;
        if found != tag {
            return Err(Error::Format(format!(
                "expected section {:?}, found {:?}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(found)
            )));
        }
        let len = self.u64()?;
        let len = usize::try_from(len).map_err(|_| Error::Format("section too large".into()))?;
        Ok(Reader::new(self.take(len)?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("count does not fit in memory".into()))
    }

    /// A count of items each occupying at least `min_size` bytes, rejected
    /// early if the section cannot possibly hold that many.
    fn count(&mut self, min_size: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(min_size) > self.remaining() {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        Ok(n)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bool(&mut self) -> Result<bool> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Format(format!("invalid flag byte {b}"))),
        }
    }

    fn string(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("token is not valid UTF-8".into()))
    }

    fn values(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.saturating_mul(8) <= self.remaining())
            .ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<_>>()?;
        Matrix::new(rows, cols, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_toy_corpus, init_embeddings_random};

    fn sample(tied: bool) -> Checkpoint {
        let corpus = generate_toy_corpus(3, 2);
        let vocab = Vocabulary::build(corpus.examples.iter().flat_map(|e| e.tokens.iter().map(String::as_str)))
            .unwrap();
        let embeddings = init_embeddings_random(&vocab, 4, 1);
        let cfg = EncoderConfig {
            embed_dim: 4,
            filter_heights: vec![1, 2],
            filters_per_height: 3,
            activation: Activation::Tanh,
            num_classes: 2,
        };
        let model = Model::init(vocab, embeddings, cfg, 12, tied, 5).unwrap();
        Checkpoint {
            model,
            traversal: TraversalDefaults {
                lambda: 1e-3,
                sigma: Some(0.37),
                set_size: 11,
            },
            meta: TrainingMeta {
                seed: 9,
                split_seed: 10,
                phase1_epochs: 2,
                phase2_epochs: 1,
                retrain_epochs: 0,
                phase1_loss: vec![3.5, 2.25],
                phase2_loss: vec![f64::MIN_POSITIVE],
                retrain_loss: vec![],
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for tied in [true, false] {
            let c = sample(tied);
            let bytes = checkpoint_bytes(&c).unwrap();
            let back = checkpoint_from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(checkpoint_bytes(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = checkpoint_bytes(&sample(true)).unwrap();
        for len in (0..bytes.len()).step_by(7) {
            assert!(matches!(checkpoint_from_bytes(&bytes[..len]), Err(Error::Format(_))), "len {len}");
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = checkpoint_bytes(&sample(true)).unwrap();
        bytes.push(0);
        assert!(matches!(checkpoint_from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = checkpoint_bytes(&sample(true)).unwrap();
        bytes[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
        let err = checkpoint_from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn file_round_trip_leaves_no_partial_file_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let c = sample(false);
        save_checkpoint(&path, &c).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), c);

        let missing = dir.path().join("no/such/dir/model.ckpt");
        assert!(save_checkpoint(&missing, &c).is_err());
        assert!(!missing.exists());
    }
}
