//! Dense `f64` vectors and matrices with the handful of forward/backward
//! operations the encoder, decoder and traversal objective are built from.
//!
//! Every forward op that carries trainable state has a matching `*_backward`
//! that takes the upstream gradient and returns (or accumulates) gradients for
//! its inputs. The training pipeline composes these by hand; there is no tape.

use std::ops::{Deref, DerefMut};

use crate::error::{shape, Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { data: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.data, other)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        debug_assert_eq!(self.data.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector::new(self.data.iter().map(|v| v * alpha).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Vector {
        Vector::new(self.data.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &[f64]) -> Vector {
        Vector::new(self.data.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn squared_distance(&self, other: &[f64]) -> f64 {
        squared_distance(&self.data, other)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self::new(data)
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(shape("ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(shape("columns differ in length"));
        }
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m.data[i * cols + j] = *v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(shape(format!(
                "matvec: matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `Aᵀ x`
    pub fn matvec_transposed(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.rows {
            return Err(shape(format!(
                "matvec_transposed: matrix has {} rows, vector has {} entries",
                self.rows,
                x.len()
            )));
        }
        let mut out = Vector::zeros(self.cols);
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                out.axpy(*xi, self.row(i));
            }
        }
        Ok(out)
    }

    /// `A += alpha · u vᵀ`
    pub fn add_outer(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, ui) in u.iter().enumerate() {
            let a = alpha * ui;
            if a == 0.0 {
                continue;
            }
            for (m, vj) in self.row_mut(i).iter_mut().zip(v) {
                *m += a * vj;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise (cascade) summation with a fixed split rule, so the result only
/// depends on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(shape(format!(
            "matmul: {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            for (o, bv) in out.row_mut(i).iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation value.
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Pre-activation response of a full-width filter slid over the rows of
/// `sentence`: `out[t] = Σ_{i<h, j<d} sentence[t+i][j] · filter[i][j] + bias`.
pub fn conv_full_width_pre(sentence: &Matrix, filter: &Matrix, bias: f64) -> Result<Vector> {
    let (len, width) = sentence.shape();
    let (height, fwidth) = filter.shape();
    if fwidth != width {
        return Err(shape(format!(
            "filter width {fwidth} does not match embedding width {width}"
        )));
    }
    if height == 0 || height > len {
        return Err(shape(format!(
            "filter height {height} does not fit a sentence of {len} rows"
        )));
    }
    let window = height * width;
    let out = (0..=len - height)
        .map(|t| {
            let rows = &sentence.data[t * width..t * width + window];
            dot(rows, &filter.data) + bias
        })
        .collect();
    Ok(out)
}

pub fn conv_full_width(
    sentence: &Matrix,
    filter: &Matrix,
    bias: f64,
    activation: Activation,
) -> Result<Vector> {
    let mut out = conv_full_width_pre(sentence, filter, bias)?;
    for v in out.iter_mut() {
        *v = activation.apply(*v);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub filter: Matrix,
    pub bias: f64,
    pub sentence: Matrix,
}

/// Backward of [`conv_full_width`]. `pre` is the pre-activation output of the
/// forward pass and `d_out` the gradient w.r.t. the activated output.
pub fn conv_full_width_backward(
    sentence: &Matrix,
    filter: &Matrix,
    pre: &[f64],
    activation: Activation,
    d_out: &[f64],
) -> Result<ConvGrads> {
    let (len, width) = sentence.shape();
    let height = filter.rows();
    if filter.cols() != width || height > len || pre.len() != len - height + 1 {
        return Err(shape("conv backward: inconsistent shapes"));
    }
    if d_out.len() != pre.len() {
        return Err(shape("conv backward: gradient length mismatch"));
    }
    let window = height * width;
    let mut grads = ConvGrads {
        filter: Matrix::zeros(height, width),
        bias: 0.0,
        sentence: Matrix::zeros(len, width),
    };
    for (t, (&g, &p)) in d_out.iter().zip(pre).enumerate() {
        if g == 0.0 {
            continue;
        }
        let d_pre = g * activation.derivative(p);
        if d_pre == 0.0 {
            continue;
        }
        grads.bias += d_pre;
        let rows = &sentence.data[t * width..t * width + window];
        for (gf, s) in grads.filter.data.iter_mut().zip(rows) {
            *gf += d_pre * s;
        }
        let grows = &mut grads.sentence.data[t * width..t * width + window];
        for (gs, f) in grows.iter_mut().zip(&filter.data) {
            *gs += d_pre * f;
        }
    }
    Ok(grads)
}

/// Maximum entry and the lowest index attaining it.
pub fn max_over_time(v: &[f64]) -> Result<(f64, usize)> {
    let (first, rest) = v
        .split_first()
        .ok_or_else(|| shape("max_over_time of an empty vector"))?;
    let mut best = (*first, 0);
    for (i, &x) in rest.iter().enumerate() {
        if x > best.0 {
            best = (x, i + 1);
        }
    }
    Ok(best)
}

/// Routes the pooled gradient back to the argmax position only.
pub fn max_over_time_backward(len: usize, argmax: usize, d_max: f64) -> Vector {
    let mut g = Vector::zeros(len);
    g[argmax] = d_max;
    g
}

pub fn softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `−log softmax(logits)[target]` together with its gradient
/// `softmax(logits) − one_hot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vector)> {
    if target >= logits.len() {
        return Err(Error::Index {
            index: target,
            size: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let log_z = max + sum_exp.ln();
    let loss = log_z - logits[target];
    let mut grad: Vector = logits.iter().map(|l| (l - log_z).exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights of a single GRU cell. Input matrices are `state × input`,
/// recurrent matrices `state × state`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruWeights {
    pub w_u: Matrix,
    pub w_r: Matrix,
    pub w_c: Matrix,
    pub u_u: Matrix,
    pub u_r: Matrix,
    pub u_c: Matrix,
    pub b_u: Vector,
    pub b_r: Vector,
    pub b_c: Vector,
}

impl GruWeights {
    pub fn zeros(input_dim: usize, state_dim: usize) -> Self {
        Self {
            w_u: Matrix::zeros(state_dim, input_dim),
            w_r: Matrix::zeros(state_dim, input_dim),
            w_c: Matrix::zeros(state_dim, input_dim),
            u_u: Matrix::zeros(state_dim, state_dim),
            u_r: Matrix::zeros(state_dim, state_dim),
            u_c: Matrix::zeros(state_dim, state_dim),
            b_u: Vector::zeros(state_dim),
            b_r: Vector::zeros(state_dim),
            b_c: Vector::zeros(state_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_u.cols()
    }

    pub fn state_dim(&self) -> usize {
        self.w_u.rows()
    }

    fn check(&self) -> Result<()> {
        let (s, i) = self.w_u.shape();
        let ok = [&self.w_r, &self.w_c].iter().all(|m| m.shape() == (s, i))
            && [&self.u_u, &self.u_r, &self.u_c]
                .iter()
                .all(|m| m.shape() == (s, s))
            && [&self.b_u, &self.b_r, &self.b_c].iter().all(|b| b.dim() == s);
        if ok {
            Ok(())
        } else {
            Err(shape("inconsistent GRU weight shapes"))
        }
    }
}

impl ParamTensors for GruWeights {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for m in [&self.w_u, &self.w_r, &self.w_c, &self.u_u, &self.u_r, &self.u_c] {
            f(m.data());
        }
        for b in [&self.b_u, &self.b_r, &self.b_c] {
            f(b);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for m in [
            &mut self.w_u,
            &mut self.w_r,
            &mut self.w_c,
            &mut self.u_u,
            &mut self.u_r,
            &mut self.u_c,
        ] {
            f(m.data_mut());
        }
        for b in [&mut self.b_u, &mut self.b_r, &mut self.b_c] {
            f(b);
        }
    }
}

/// Intermediate values of one GRU step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GruStep {
    pub x: Vector,
    pub h_prev: Vector,
    pub update: Vector,
    pub reset: Vector,
    pub candidate: Vector,
    pub reset_h: Vector,
    pub h_next: Vector,
}

/// One GRU step:
/// `u = σ(W_u x + U_u h + b_u)`, `r = σ(W_r x + U_r h + b_r)`,
/// `c = tanh(W_c x + U_c (r ⊙ h) + b_c)`, `h' = (1 − u) ⊙ h + u ⊙ c`.
pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], w: &GruWeights) -> Result<GruStep> {
    w.check()?;
    if x.len() != w.input_dim() || h_prev.len() != w.state_dim() {
        return Err(shape(format!(
            "gru_cell: expected input {} / state {}, got {} / {}",
            w.input_dim(),
            w.state_dim(),
            x.len(),
            h_prev.len()
        )));
    }
    let gate = |wm: &Matrix, um: &Matrix, b: &Vector, h: &[f64]| -> Vector {
        let wx = wm.matvec(x).expect("checked");
        let uh = um.matvec(h).expect("checked");
        wx.iter()
            .zip(uh.iter())
            .zip(b.iter())
            .map(|((a, c), d)| a + c + d)
            .collect()
    };
    let update: Vector = gate(&w.w_u, &w.u_u, &w.b_u, h_prev)
        .iter()
        .map(|v| sigmoid(*v))
        .collect();
    let reset: Vector = gate(&w.w_r, &w.u_r, &w.b_r, h_prev)
        .iter()
        .map(|v| sigmoid(*v))
        .collect();
    let reset_h: Vector = reset.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let candidate: Vector = gate(&w.w_c, &w.u_c, &w.b_c, &reset_h)
        .iter()
        .map(|v| v.tanh())
        .collect();
    let h_next: Vector = (0..h_prev.len())
        .map(|i| (1.0 - update[i]) * h_prev[i] + update[i] * candidate[i])
        .collect();
    Ok(GruStep {
        x: Vector::new(x.to_vec()),
        h_prev: Vector::new(h_prev.to_vec()),
        update,
        reset,
        candidate,
        reset_h,
        h_next,
    })
}

pub fn gru_cell(x: &[f64], h_prev: &[f64], w: &GruWeights) -> Result<Vector> {
    gru_cell_forward(x, h_prev, w).map(|s| s.h_next)
}

/// Backward of one GRU step. Weight gradients are accumulated into `grads`;
/// returns `(dL/dx, dL/dh_prev)`.
pub fn gru_cell_backward(
    step: &GruStep,
    w: &GruWeights,
    d_h_next: &[f64],
    grads: &mut GruWeights,
) -> (Vector, Vector) {
    let n = step.h_prev.dim();
    let mut d_h_prev = Vector::zeros(n);
    let mut d_update_pre = Vector::zeros(n);
    let mut d_cand_pre = Vector::zeros(n);
    for i in 0..n {
        let u = step.update[i];
        let c = step.candidate[i];
        d_h_prev[i] = d_h_next[i] * (1.0 - u);
        d_update_pre[i] = d_h_next[i] * (c - step.h_prev[i]) * u * (1.0 - u);
        d_cand_pre[i] = d_h_next[i] * u * (1.0 - c * c);
    }

    grads.w_c.add_outer(1.0, &d_cand_pre, &step.x);
    grads.u_c.add_outer(1.0, &d_cand_pre, &step.reset_h);
    grads.b_c.axpy(1.0, &d_cand_pre);
    let mut d_x = w.w_c.matvec_transposed(&d_cand_pre).expect("shape");
    let d_reset_h = w.u_c.matvec_transposed(&d_cand_pre).expect("shape");

    let mut d_reset_pre = Vector::zeros(n);
    for i in 0..n {
        let r = step.reset[i];
        d_h_prev[i] += d_reset_h[i] * r;
        d_reset_pre[i] = d_reset_h[i] * step.h_prev[i] * r * (1.0 - r);
    }

    for (d_pre, wm, um, gw, gu, gb) in [
        (
            &d_update_pre,
            &w.w_u,
            &w.u_u,
            &mut grads.w_u,
            &mut grads.u_u,
            &mut grads.b_u,
        ),
        (
            &d_reset_pre,
            &w.w_r,
            &w.u_r,
            &mut grads.w_r,
            &mut grads.u_r,
            &mut grads.b_r,
        ),
    ] {
        gw.add_outer(1.0, d_pre, &step.x);
        gu.add_outer(1.0, d_pre, &step.h_prev);
        gb.axpy(1.0, d_pre);
        d_x.axpy(1.0, &wm.matvec_transposed(d_pre).expect("shape"));
        d_h_prev.axpy(1.0, &um.matvec_transposed(d_pre).expect("shape"));
    }
    (d_x, d_h_prev)
}

/// A fixed-order collection of parameter tensors that can be flattened into a
/// single vector and written back.
pub trait ParamTensors {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |t| n += t.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |t| out.extend_from_slice(t));
        out
    }

    /// Overwrites every tensor from `flat`, which must hold exactly
    /// [`num_params`](Self::num_params) values.
    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |t| {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        });
        Ok(())
    }

    /// FNV-1a over the bit patterns of every parameter, in visit order.
    fn fingerprint(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        self.visit(&mut |t| {
            for v in t {
                for b in v.to_bits().to_le_bytes() {
                    hash ^= u64::from(b);
                    hash = hash.wrapping_mul(0x0100_0000_01b3);
                }
            }
        });
        hash
    }
}
