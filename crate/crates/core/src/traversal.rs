//! Moves a feature vector toward the opposite-sentiment distribution.
//!
//! With `V = [z^t_1 … z^t_n, z^s_1 … z^s_m, z]` the traversed vector is
//! `z* = z + Vδ`, where `δ` minimizes `f*(z + Vδ) + λ‖Vδ‖²` and `f*` is the
//! MMD witness between the source (same sentiment) and target (opposite
//! sentiment) sets.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::kernels::{witness, witness_grad, KernelConfig, SampleSet};
use crate::numerics::{Matrix, Vector};
use crate::optim::{bfgs_minimize, BfgsConfig};

/// Budget-of-change weight used when none is given.
pub const DEFAULT_LAMBDA: f64 = 7e-5;
/// Source and target set size used when none is given.
pub const DEFAULT_SET_SIZE: usize = 90;

/// Traversal settings stored alongside a trained model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraversalDefaults {
    pub lambda: f64,
    /// Kernel bandwidth; `None` means the median heuristic over source ∪ target.
    pub sigma: Option<f64>,
    pub set_size: usize,
}

impl Default for TraversalDefaults {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            sigma: None,
            set_size: DEFAULT_SET_SIZE,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TraversalProblem {
    pub z: Vector,
    pub source: SampleSet,
    pub target: SampleSet,
    pub lambda: f64,
    pub kernel: KernelConfig,
}

impl TraversalProblem {
    pub fn new(
        z: Vector,
        source: SampleSet,
        target: SampleSet,
        lambda: f64,
        kernel: KernelConfig,
    ) -> Result<Self> {
        if source.dim() != z.dim() || target.dim() != z.dim() {
            return Err(shape(format!(
                "z has dimension {}, source {}, target {}",
                z.dim(),
                source.dim(),
                target.dim()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Input(format!("lambda must be a non-negative number, got {lambda}")));
        }
        Ok(Self {
            z,
            source,
            target,
            lambda,
            kernel,
        })
    }

    pub fn witness_at(&self, point: &[f64]) -> f64 {
        witness(point, &self.source, &self.target, self.kernel).expect("dimensions checked")
    }
}

/// `d × (n + m + 1)` matrix with target vectors, then source vectors, then `z`
/// as columns.
pub fn build_v(problem: &TraversalProblem) -> Result<Matrix> {
    let d = problem.z.dim();
    let columns: Vec<&[f64]> = problem
        .target
        .points()
        .iter()
        .chain(problem.source.points())
        .map(|p| p.as_slice())
        .chain(std::iter::once(problem.z.as_slice()))
        .collect();
    if columns.iter().any(|c| c.len() != d) {
        return Err(shape("traversal vectors differ in dimension"));
    }
    Matrix::from_columns(&columns)
}

/// `g(δ) = f*(z + Vδ) + λ‖Vδ‖²`
pub fn objective(problem: &TraversalProblem, v: &Matrix, delta: &[f64]) -> Result<f64> {
    let step = v.matvec(delta)?;
    Ok(problem.witness_at(&problem.z.add(&step)) + problem.lambda * step.norm_sq())
}

/// `∇g(δ) = Vᵀ ∇f*(z + Vδ) + 2λ VᵀVδ`
pub fn objective_grad(problem: &TraversalProblem, v: &Matrix, delta: &[f64]) -> Result<Vector> {
    let step = v.matvec(delta)?;
    let point = problem.z.add(&step);
    let mut outer = witness_grad(&point, &problem.source, &problem.target, problem.kernel)?;
    outer.axpy(2.0 * problem.lambda, &step);
    v.matvec_transposed(&outer)
}

#[derive(Clone, Debug)]
pub struct TraversalResult {
    pub z: Vector,
    pub z_star: Vector,
    pub delta: Vector,
    pub objective_value: f64,
    pub objective_at_start: f64,
    pub displacement_norm: f64,
    pub witness_before: f64,
    pub witness_after: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes the traversal objective over `δ` from `δ = 0` with BFGS.
pub fn traverse(problem: &TraversalProblem, bfgs: &BfgsConfig) -> Result<TraversalResult> {
    let v = build_v(problem)?;
    let k = v.cols();
    let start = vec![0.0; k];
    let objective_at_start = objective(problem, &v, &start)?;
    let outcome = bfgs_minimize(
        |d| objective(problem, &v, d).unwrap_or(f64::NAN),
        |d| objective_grad(problem, &v, d).unwrap_or_else(|_| Vector::new(vec![f64::NAN; k])),
        &start,
        bfgs,
    )?;
    let step = v.matvec(&outcome.x)?;
    let z_star = problem.z.add(&step);
    Ok(TraversalResult {
        displacement_norm: z_star.sub(&problem.z).norm(),
        witness_before: problem.witness_at(&problem.z),
        witness_after: problem.witness_at(&z_star),
        z: problem.z.clone(),
        z_star,
        delta: outcome.x,
        objective_value: outcome.f,
        objective_at_start,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Diagnostics of one traversal, one CSV row each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraversalReport {
    pub witness_before: f64,
    pub witness_after: f64,
    pub displacement: f64,
    pub delta_norm: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn traversal_report(result: &TraversalResult) -> TraversalReport {
    TraversalReport {
        witness_before: result.witness_before,
        witness_after: result.witness_after,
        displacement: result.displacement_norm,
        delta_norm: result.delta.norm(),
        objective_before: result.objective_at_start,
        objective_after: result.objective_value,
        iterations: result.iterations,
        converged: result.converged,
    }
}

impl std::fmt::Display for TraversalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "witness {:.6} -> {:.6}, displacement {:.6}, |delta| {:.6}, iterations {}",
            self.witness_before, self.witness_after, self.displacement, self.delta_norm, self.iterations
        )
    }
}

pub fn write_reports_csv<W: Write>(writer: W, reports: &[TraversalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(reader: R) -> Result<Vec<TraversalReport>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Up to `size` points drawn without replacement; all of them when fewer
/// are available.
pub fn sample_points(points: &[Vector], size: usize, rng: &mut impl Rng) -> Vec<Vector> {
    if points.len() <= size {
        return points.to_vec();
    }
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.shuffle(rng);
    idx.truncate(size);
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i].clone()).collect()
}
