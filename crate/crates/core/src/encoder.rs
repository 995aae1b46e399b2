//! Convolutional sentence encoder: one layer of full-width filters, max-over-time
//! pooling, and a linear sentiment classifier on the pooled feature vector `z`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Sentiment, PAD};
use crate::error::{shape, Error, Result};
use crate::numerics::{
    conv_full_width_backward, conv_full_width_pre, max_over_time, max_over_time_backward,
    Activation, Matrix, ParamTensors, Vector,
};

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub filter_heights: Vec<usize>,
    pub filters_per_height: usize,
    pub activation: Activation,
    pub num_classes: usize,
}

impl EncoderConfig {
    /// Desk-scale model: d = 16, eight filters for each height 1–4, z-dim 32.
    pub fn desk() -> Self {
        Self {
            embed_dim: 16,
            filter_heights: vec![1, 2, 3, 4],
            filters_per_height: 8,
            activation: Activation::Relu,
            num_classes: 2,
        }
    }

    /// 300-d embeddings, 75 filters for each height 1–4, z-dim 300.
    pub fn full_scale() -> Self {
        Self {
            embed_dim: 300,
            filters_per_height: 75,
            ..Self::desk()
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.filters_per_height * self.filter_heights.len()
    }

    pub fn max_height(&self) -> usize {
        self.filter_heights.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.filters_per_height == 0 || self.filter_heights.is_empty() {
            return Err(Error::Input("encoder dimensions must be positive".into()));
        }
        if self.filter_heights.contains(&0) || !self.filter_heights.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Input("filter heights must be positive and strictly ascending".into()));
        }
        if self.num_classes != 2 {
            return Err(Error::Input("the encoder classifies exactly two sentiments".into()));
        }
        Ok(())
    }

    /// Filter heights in feature order: grouped by height, ascending.
    fn heights_in_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.filter_heights
            .iter()
            .flat_map(move |&h| std::iter::repeat_n(h, self.filters_per_height))
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    /// One `h × d` weight per filter, in feature order.
    pub filters: Vec<Matrix>,
    pub biases: Vec<f64>,
    /// `2 × feature_dim`
    pub classifier_w: Matrix,
    pub classifier_b: Vector,
}

impl EncoderParams {
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        Self {
            filters: cfg
                .heights_in_order()
                .map(|h| Matrix::zeros(h, cfg.embed_dim))
                .collect(),
            biases: vec![0.0; cfg.feature_dim()],
            classifier_w: Matrix::zeros(cfg.num_classes, cfg.feature_dim()),
            classifier_b: Vector::zeros(cfg.num_classes),
        }
    }

    /// He-style normal filters, small normal classifier, zero biases.
    pub fn init(cfg: &EncoderConfig, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(cfg);
        for f in &mut p.filters {
            let std = (2.0 / f.data().len() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            f.data_mut().iter_mut().for_each(|v| *v = normal.sample(rng));
        }
        let std = (1.0 / cfg.feature_dim() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        p.classifier_w
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = normal.sample(rng));
        p
    }

    pub fn check(&self, cfg: &EncoderConfig) -> Result<()> {
        let ok = self.filters.len() == cfg.feature_dim()
            && self
                .filters
                .iter()
                .zip(cfg.heights_in_order())
                .all(|(f, h)| f.shape() == (h, cfg.embed_dim))
            && self.biases.len() == cfg.feature_dim()
            && self.classifier_w.shape() == (cfg.num_classes, cfg.feature_dim())
            && self.classifier_b.dim() == cfg.num_classes;
        if ok {
            Ok(())
        } else {
            Err(shape("encoder parameters do not match the configuration"))
        }
    }
}

impl ParamTensors for EncoderParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for m in &self.filters {
            f(m.data());
        }
        f(&self.biases);
        f(self.classifier_w.data());
        f(&self.classifier_b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for m in &mut self.filters {
            f(m.data_mut());
        }
        f(&mut self.biases);
        f(self.classifier_w.data_mut());
        f(&mut self.classifier_b);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    pub z: Vector,
    pub logits: Vector,
    pub predicted_label: Sentiment,
    /// Winning position of every filter.
    pub pool_argmax: Vec<usize>,
}

/// Forward state retained for [`encoder_backward`].
#[derive(Clone, Debug)]
pub struct EncodeContext {
    pub encoding: Encoding,
    tokens: Vec<usize>,
    sentence: Matrix,
    pre_activations: Vec<Vector>,
    activation: Activation,
    params_fingerprint: u64,
}

impl EncodeContext {
    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }
}

/// Sentence matrix: one embedding row per token.
fn sentence_matrix(tokens: &[usize], embeddings: &Matrix) -> Result<Matrix> {
    let d = embeddings.cols();
    let mut data = Vec::with_capacity(tokens.len() * d);
    for &t in tokens {
        if t >= embeddings.rows() {
            return Err(Error::Index {
                index: t,
                size: embeddings.rows(),
            });
        }
        data.extend_from_slice(embeddings.row(t));
    }
    Matrix::new(tokens.len(), d, data)
}

pub fn encode_with_context(
    tokens: &[usize],
    embeddings: &Matrix,
    params: &EncoderParams,
    cfg: &EncoderConfig,
) -> Result<EncodeContext> {
    if embeddings.cols() != cfg.embed_dim {
        return Err(shape(format!(
            "embedding width {} differs from encoder width {}",
            embeddings.cols(),
            cfg.embed_dim
        )));
    }
    if tokens.len() < cfg.max_height() {
        return Err(shape(format!(
            "sentence of {} tokens is shorter than the tallest filter ({}); pad it first",
            tokens.len(),
            cfg.max_height()
        )));
    }
    let sentence = sentence_matrix(tokens, embeddings)?;
    let mut z = Vector::zeros(cfg.feature_dim());
    let mut pool_argmax = Vec::with_capacity(cfg.feature_dim());
    let mut pre_activations = Vec::with_capacity(cfg.feature_dim());
    for (k, (filter, &bias)) in params.filters.iter().zip(&params.biases).enumerate() {
        let pre = conv_full_width_pre(&sentence, filter, bias)?;
        let activated: Vec<f64> = pre.iter().map(|v| cfg.activation.apply(*v)).collect();
        let (max, arg) = max_over_time(&activated)?;
        z[k] = max;
        pool_argmax.push(arg);
        pre_activations.push(pre);
    }
    let logits = params.classifier_w.matvec(&z)?.add(&params.classifier_b);
    let predicted_label = if logits[1] > logits[0] {
        Sentiment::Positive
    } else {
        Sentiment::Negative
    };
    Ok(EncodeContext {
        encoding: Encoding {
            z,
            logits,
            predicted_label,
            pool_argmax,
        },
        tokens: tokens.to_vec(),
        sentence,
        pre_activations,
        activation: cfg.activation,
        params_fingerprint: params.fingerprint(),
    })
}

/// Embeds `tokens`, convolves, pools and classifies.
pub fn encode(
    tokens: &[usize],
    embeddings: &Matrix,
    params: &EncoderParams,
    cfg: &EncoderConfig,
) -> Result<Encoding> {
    params.check(cfg)?;
    encode_with_context(tokens, embeddings, params, cfg).map(|c| c.encoding)
}

#[derive(Clone, Debug)]
pub struct EncoderGrads {
    pub params: EncoderParams,
    /// Gradient per embedding row that took part in the forward pass (PAD
    /// excluded), summed over repeated occurrences.
    pub embedding_rows: Vec<(usize, Vector)>,
}

/// Backpropagates `dL/dz` and `dL/dlogits` through the classifier, pooling
/// and convolution. Pooling gradients reach only the argmax window.
pub fn encoder_backward(
    ctx: &EncodeContext,
    params: &EncoderParams,
    d_z: &[f64],
    d_logits: &[f64],
) -> Result<EncoderGrads> {
    if ctx.params_fingerprint != params.fingerprint() {
        return Err(Error::Usage(
            "encoder parameters changed since the forward pass".into(),
        ));
    }
    let dim = ctx.encoding.z.dim();
    if d_z.len() != dim || d_logits.len() != params.classifier_b.dim() {
        return Err(shape("encoder backward: gradient sizes do not match"));
    }
    let mut grads = EncoderParams {
        filters: params.filters.iter().map(|f| Matrix::zeros(f.rows(), f.cols())).collect(),
        biases: vec![0.0; params.biases.len()],
        classifier_w: Matrix::zeros(params.classifier_w.rows(), params.classifier_w.cols()),
        classifier_b: Vector::new(d_logits.to_vec()),
    };
    grads.classifier_w.add_outer(1.0, d_logits, &ctx.encoding.z);
    let mut d_pooled = params.classifier_w.matvec_transposed(d_logits)?;
    d_pooled.axpy(1.0, d_z);

    let mut d_sentence = Matrix::zeros(ctx.sentence.rows(), ctx.sentence.cols());
    for (k, filter) in params.filters.iter().enumerate() {
        if d_pooled[k] == 0.0 {
            continue;
        }
        let pre = &ctx.pre_activations[k];
        let d_out = max_over_time_backward(pre.dim(), ctx.encoding.pool_argmax[k], d_pooled[k]);
        let g = conv_full_width_backward(&ctx.sentence, filter, pre, ctx.activation, &d_out)?;
        grads.filters[k] = g.filter;
        grads.biases[k] = g.bias;
        for (a, b) in d_sentence.data_mut().iter_mut().zip(g.sentence.data()) {
            *a += b;
        }
    }

    let mut rows: Vec<(usize, Vector)> = Vec::new();
    for (pos, &tok) in ctx.tokens.iter().enumerate() {
        if tok == PAD {
            continue;
        }
        let g = d_sentence.row(pos);
        match rows.iter_mut().find(|(t, _)| *t == tok) {
            Some((_, acc)) => acc.axpy(1.0, g),
            None => rows.push((tok, Vector::new(g.to_vec()))),
        }
    }
    Ok(EncoderGrads {
        params: grads,
        embedding_rows: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, softmax_cross_entropy};
    use crate::testutil::{central_diff, rel_err};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(act: Activation) -> EncoderConfig {
        EncoderConfig {
            embed_dim: 3,
            filter_heights: vec![1, 2, 3],
            filters_per_height: 2,
            activation: act,
            num_classes: 2,
        }
    }

    fn random_embeddings(rng: &mut ChaCha8Rng, v: usize, d: usize) -> Matrix {
        let mut m = Matrix::new(v, d, (0..v * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        m.row_mut(PAD).fill(0.0);
        m
    }

    #[test]
    fn feature_dims() {
        assert_eq!(EncoderConfig::full_scale().feature_dim(), 300);
        let desk = EncoderConfig {
            embed_dim: 8,
            filters_per_height: 3,
            ..EncoderConfig::desk()
        };
        assert_eq!(desk.feature_dim(), 12);
        assert_eq!(EncoderConfig::desk().feature_dim(), 32);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = EncoderParams::init(&desk, &mut rng);
        let emb = random_embeddings(&mut rng, 10, 8);
        let e = encode(&[4, 5, 6, 7, 0, 0], &emb, &p, &desk).unwrap();
        assert_eq!(e.z.dim(), 12);
    }

    #[test]
    fn zero_embeddings_give_zero_features() {
        let cfg = EncoderConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = EncoderParams::init(&cfg, &mut rng);
        let emb = Matrix::zeros(12, cfg.embed_dim);
        for toks in [[4, 5, 6, 7, 8], [11, 10, 9, 0, 0]] {
            let e = encode(&toks, &emb, &p, &cfg).unwrap();
            assert!(e.z.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn errors() {
        let cfg = small_cfg(Activation::Relu);
        let p = EncoderParams::zeros(&cfg);
        let emb = Matrix::zeros(6, 3);
        assert!(matches!(encode(&[4, 9, 0], &emb, &p, &cfg), Err(Error::Index { index: 9, .. })));
        assert!(matches!(encode(&[4, 5], &emb, &p, &cfg), Err(Error::Shape(_))));
        let bad = EncoderConfig {
            filter_heights: vec![2, 1],
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn predicted_label_is_argmax() {
        let cfg = small_cfg(Activation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let emb = random_embeddings(&mut rng, 8, 3);
        for _ in 0..20 {
            let p = EncoderParams::init(&cfg, &mut rng);
            let e = encode(&[4, 5, 6, 7, 0], &emb, &p, &cfg).unwrap();
            let expected = if e.logits[1] > e.logits[0] { Sentiment::Positive } else { Sentiment::Negative };
            assert_eq!(e.predicted_label, expected);
        }
    }

    #[test]
    fn trailing_padding_does_not_change_z_when_max_is_positive() {
        let cfg = small_cfg(Activation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let emb = random_embeddings(&mut rng, 8, 3);
        let mut p = EncoderParams::init(&cfg, &mut rng);
        p.biases.iter_mut().for_each(|b| *b = 0.0);
        let short = encode(&[4, 5, 6, 7], &emb, &p, &cfg).unwrap();
        let long = encode(&[4, 5, 6, 7, 0, 0, 0], &emb, &p, &cfg).unwrap();
        for k in 0..short.z.dim() {
            if short.z[k] > 0.0 {
                assert_eq!(short.z[k], long.z[k]);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let cfg = small_cfg(Activation::Tanh);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let emb = random_embeddings(&mut rng, 8, 3);
        let p = EncoderParams::init(&cfg, &mut rng);
        let ctx = encode_with_context(&[4, 5, 6, 7, 0], &emb, &p, &cfg).unwrap();
        let g = encoder_backward(&ctx, &p, &[0.0; 6], &[0.0; 2]).unwrap();
        assert!(g.params.flatten().iter().all(|v| *v == 0.0));
        assert!(g.embedding_rows.iter().all(|(_, r)| r.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn stale_context_rejected() {
        let cfg = small_cfg(Activation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let emb = random_embeddings(&mut rng, 8, 3);
        let mut p = EncoderParams::init(&cfg, &mut rng);
        let ctx = encode_with_context(&[4, 5, 6, 0], &emb, &p, &cfg).unwrap();
        p.biases[0] += 0.1;
        assert!(matches!(encoder_backward(&ctx, &p, &[0.0; 6], &[0.0; 2]), Err(Error::Usage(_))));
    }

    #[test]
    fn filter_that_never_wins_gets_no_gradient() {
        // With relu, a filter whose every window is negative pools to 0 at
        // position 0 with zero slope, so a z-only loss cannot reach it.
        let cfg = small_cfg(Activation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let emb = random_embeddings(&mut rng, 8, 3);
        let mut p = EncoderParams::init(&cfg, &mut rng);
        p.biases[1] = -100.0;
        let ctx = encode_with_context(&[4, 5, 6, 7, 0], &emb, &p, &cfg).unwrap();
        let g = encoder_backward(&ctx, &p, &[1.0; 6], &[0.0; 2]).unwrap();
        assert!(g.params.filters[1].data().iter().all(|v| *v == 0.0));
        assert_eq!(g.params.biases[1], 0.0);
        assert!(g.params.filters[0].data().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for act in [Activation::Tanh, Activation::Identity, Activation::Relu] {
            let cfg = small_cfg(act);
            for _ in 0..4 {
                let emb = random_embeddings(&mut rng, 8, 3);
                let mut p = EncoderParams::init(&cfg, &mut rng);
                p.biases.iter_mut().for_each(|b| *b = rng.random_range(0.2..0.5));
                let tokens = [4, 5, 6, 4, 7, 0];
                let proj: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let label = rng.random_range(0..2);
                let loss = |p: &EncoderParams, emb: &Matrix| {
                    let e = encode(&tokens, emb, p, &cfg).unwrap();
                    dot(&e.z, &proj) + softmax_cross_entropy(&e.logits, label).unwrap().0
                };
                let ctx = encode_with_context(&tokens, &emb, &p, &cfg).unwrap();
                let (_, d_logits) = softmax_cross_entropy(&ctx.encoding.logits, label).unwrap();
                let g = encoder_backward(&ctx, &p, &proj, &d_logits).unwrap();

                let num = central_diff(&p.flatten(), |flat| {
                    let mut q = p.clone();
                    q.load_flat(flat).unwrap();
                    loss(&q, &emb)
                });
                assert!(rel_err(&g.params.flatten(), &num) < 1e-5, "{act:?}");

                let num_emb = central_diff(emb.data(), |flat| {
                    loss(&p, &Matrix::new(8, 3, flat.to_vec()).unwrap())
                });
                let mut analytic = Matrix::zeros(8, 3);
                for (row, gv) in &g.embedding_rows {
                    analytic.row_mut(*row).copy_from_slice(gv);
                }
                // PAD is excluded from the analytic gradient by contract.
                let mut num_emb = Matrix::new(8, 3, num_emb).unwrap();
                num_emb.row_mut(PAD).fill(0.0);
                assert!(rel_err(analytic.data(), num_emb.data()) < 1e-5, "{act:?}");
            }
        }
    }
}
