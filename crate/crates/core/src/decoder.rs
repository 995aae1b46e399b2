//! GRU language decoder conditioned on a feature vector.
//!
//! The feature vector initializes the hidden state (`h₀ = z`), which is why
//! the state size must equal the encoder's feature dimension. Inputs are rows
//! of the word-embedding table, shared with the encoder when tying is on.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Vocabulary, EOS, SOS};
use crate::error::{shape, Error, Result};
use crate::numerics::{
    gru_cell_backward, gru_cell_forward, softmax_cross_entropy, GruStep, GruWeights, Matrix,
    ParamTensors, Vector,
};

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig {
    pub state_dim: usize,
    pub embed_dim: usize,
    pub max_len: usize,
    pub tie_input_embeddings: bool,
}

impl DecoderConfig {
    pub fn new(state_dim: usize, embed_dim: usize) -> Self {
        Self {
            state_dim,
            embed_dim,
            max_len: 30,
            tie_input_embeddings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.embed_dim == 0 || self.max_len == 0 {
            return Err(Error::Input("decoder dimensions and max_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    pub gru: GruWeights,
    /// `V × state_dim`
    pub out_w: Matrix,
    pub out_b: Vector,
    /// Decoder-only input table, present only when embeddings are untied.
    pub input_embeddings: Option<Matrix>,
}

impl DecoderParams {
    pub fn zeros(cfg: &DecoderConfig, vocab_size: usize) -> Self {
        Self {
            gru: GruWeights::zeros(cfg.embed_dim, cfg.state_dim),
            out_w: Matrix::zeros(vocab_size, cfg.state_dim),
            out_b: Vector::zeros(vocab_size),
            input_embeddings: (!cfg.tie_input_embeddings)
                .then(|| Matrix::zeros(vocab_size, cfg.embed_dim)),
        }
    }

    pub fn init(cfg: &DecoderConfig, vocab_size: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(cfg, vocab_size);
        let fill = |m: &mut Matrix, std: f64, rng: &mut dyn rand::RngCore| {
            let normal = Normal::new(0.0, std).expect("positive std");
            m.data_mut().iter_mut().for_each(|v| *v = normal.sample(rng));
        };
        let input_std = (1.0 / cfg.embed_dim as f64).sqrt();
        let state_std = (1.0 / cfg.state_dim as f64).sqrt();
        for m in [&mut p.gru.w_u, &mut p.gru.w_r, &mut p.gru.w_c] {
            fill(m, input_std, rng);
        }
        for m in [&mut p.gru.u_u, &mut p.gru.u_r, &mut p.gru.u_c] {
            fill(m, state_std, rng);
        }
        fill(&mut p.out_w, state_std, rng);
        if let Some(m) = p.input_embeddings.as_mut() {
            fill(m, 0.1, rng);
            m.row_mut(crate::data::PAD).fill(0.0);
        }
        p
    }

    pub fn vocab_size(&self) -> usize {
        self.out_w.rows()
    }

    /// The table whose rows feed the GRU: `shared` when tied.
    pub fn input_table<'a>(&'a self, shared: &'a Matrix) -> &'a Matrix {
        self.input_embeddings.as_ref().unwrap_or(shared)
    }

    pub fn check(&self, cfg: &DecoderConfig, embeddings: &Matrix) -> Result<()> {
        let table = self.input_table(embeddings);
        let ok = self.gru.state_dim() == cfg.state_dim
            && self.gru.input_dim() == cfg.embed_dim
            && self.out_w.cols() == cfg.state_dim
            && self.out_b.dim() == self.out_w.rows()
            && table.cols() == cfg.embed_dim
            && table.rows() == self.out_w.rows()
            && self.input_embeddings.is_some() != cfg.tie_input_embeddings;
        if ok {
            Ok(())
        } else {
            Err(shape("decoder parameters do not match the configuration"))
        }
    }
}

impl ParamTensors for DecoderParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.gru.visit(f);
        f(self.out_w.data());
        f(&self.out_b);
        if let Some(m) = &self.input_embeddings {
            f(m.data());
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.gru.visit_mut(f);
        f(self.out_w.data_mut());
        f(&mut self.out_b);
        if let Some(m) = &mut self.input_embeddings {
            f(m.data_mut());
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn output_logits(params: &DecoderParams, h: &[f64]) -> Result<Vector> {
    Ok(params.out_w.matvec(h)?.add(&params.out_b))
}

/// Greedy generation from `z`: start from SOS, feed back the most probable
/// word, stop at EOS or after `max_len` words. SOS/EOS are not returned.
pub fn decode_greedy(
    z: &[f64],
    params: &DecoderParams,
    embeddings: &Matrix,
    cfg: &DecoderConfig,
    vocab: &Vocabulary,
) -> Result<Vec<usize>> {
    if z.len() != cfg.state_dim {
        return Err(shape(format!(
            "feature vector has {} entries, decoder state has {}",
            z.len(),
            cfg.state_dim
        )));
    }
    params.check(cfg, embeddings)?;
    if params.vocab_size() != vocab.len() {
        return Err(shape("decoder output size differs from the vocabulary"));
    }
    let table = params.input_table(embeddings);
    let mut h = Vector::new(z.to_vec());
    let mut input = SOS;
    let mut out = Vec::new();
    while out.len() < cfg.max_len {
        h = gru_cell_forward(table.row(input), &h, &params.gru)?.h_next;
        let next = argmax(&output_logits(params, &h)?);
        if next == EOS {
            break;
        }
        out.push(next);
        input = next;
    }
    Ok(out)
}

/// Forward record of a teacher-forced pass.
#[derive(Clone, Debug)]
pub struct TeacherForced {
    /// Mean per-position cross-entropy.
    pub loss: f64,
    pub logits: Vec<Vector>,
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    steps: Vec<GruStep>,
    /// `dL/dlogits` per position, already divided by the sequence length.
    d_logits: Vec<Vector>,
}

impl TeacherForced {
    /// Positions where the argmax prediction equals the gold token.
    pub fn correct_tokens(&self) -> usize {
        self.logits
            .iter()
            .zip(&self.targets)
            .filter(|(l, t)| argmax(l) == **t)
            .count()
    }
}

/// Runs the GRU on `SOS, gold[..n−1]` and scores the prediction of each
/// `gold[t]`. `gold` must be nonempty and end with EOS.
pub fn decode_teacher_forced(
    z: &[f64],
    gold: &[usize],
    params: &DecoderParams,
    embeddings: &Matrix,
    cfg: &DecoderConfig,
) -> Result<TeacherForced> {
    if gold.last() != Some(&EOS) {
        return Err(Error::Input("gold sequence must be nonempty and end with EOS".into()));
    }
    if z.len() != cfg.state_dim {
        return Err(shape("feature vector does not match the decoder state size"));
    }
    params.check(cfg, embeddings)?;
    let vocab_size = params.vocab_size();
    if let Some(&bad) = gold.iter().find(|&&t| t >= vocab_size) {
        return Err(Error::Index {
            index: bad,
            size: vocab_size,
        });
    }
    let table = params.input_table(embeddings);
    let inputs: Vec<usize> = std::iter::once(SOS).chain(gold[..gold.len() - 1].iter().copied()).collect();
    let scale = 1.0 / gold.len() as f64;

    let mut h = Vector::new(z.to_vec());
    let mut steps = Vec::with_capacity(gold.len());
    let mut logits = Vec::with_capacity(gold.len());
    let mut d_logits = Vec::with_capacity(gold.len());
    let mut total = 0.0;
    for (&inp, &tgt) in inputs.iter().zip(gold) {
        let step = gru_cell_forward(table.row(inp), &h, &params.gru)?;
        let l = output_logits(params, &step.h_next)?;
        let (loss, grad) = softmax_cross_entropy(&l, tgt)?;
        total += loss;
        h = step.h_next.clone();
        steps.push(step);
        logits.push(l);
        d_logits.push(grad.scaled(scale));
    }
    Ok(TeacherForced {
        loss: total * scale,
        logits,
        inputs,
        targets: gold.to_vec(),
        steps,
        d_logits,
    })
}

#[derive(Clone, Debug)]
pub struct DecoderGrads {
    pub params: DecoderParams,
    /// Gradient with respect to the conditioning vector (`h₀`).
    pub d_z: Vector,
    /// Shared-table row gradients (tied mode only).
    pub embedding_rows: Vec<(usize, Vector)>,
}

/// Backpropagation through time for [`decode_teacher_forced`]'s loss.
pub fn decoder_backward(tf: &TeacherForced, params: &DecoderParams) -> DecoderGrads {
    let state = params.gru.state_dim();
    let mut grads = DecoderParams {
        gru: GruWeights::zeros(params.gru.input_dim(), state),
        out_w: Matrix::zeros(params.out_w.rows(), params.out_w.cols()),
        out_b: Vector::zeros(params.out_b.dim()),
        input_embeddings: params
            .input_embeddings
            .as_ref()
            .map(|m| Matrix::zeros(m.rows(), m.cols())),
    };
    let mut rows: Vec<(usize, Vector)> = Vec::new();
    let mut d_h = Vector::zeros(state);
    for t in (0..tf.steps.len()).rev() {
        let step = &tf.steps[t];
        let dl = &tf.d_logits[t];
        grads.out_w.add_outer(1.0, dl, &step.h_next);
        grads.out_b.axpy(1.0, dl);
        d_h.axpy(1.0, &params.out_w.matvec_transposed(dl).expect("shape"));
        let (d_x, d_prev) = gru_cell_backward(step, &params.gru, &d_h, &mut grads.gru);
        let tok = tf.inputs[t];
        match grads.input_embeddings.as_mut() {
            Some(table) => {
                for (a, b) in table.row_mut(tok).iter_mut().zip(d_x.iter()) {
                    *a += b;
                }
            }
            None => match rows.iter_mut().find(|(r, _)| *r == tok) {
                Some((_, acc)) => acc.axpy(1.0, &d_x),
                None => rows.push((tok, d_x)),
            },
        }
        d_h = d_prev;
    }
    DecoderGrads {
        params: grads,
        d_z: d_h,
        embedding_rows: rows,
    }
}
