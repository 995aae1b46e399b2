//! Two-component PCA for plotting feature vectors.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::kernels::SampleSet;
use crate::numerics::{dot, Matrix, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub mean: Vector,
    /// `2 × d`, orthonormal rows.
    pub components: Matrix,
    pub explained_variance: [f64; 2],
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns of the returned matrix.
fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut vecs = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum();
        let scale: f64 = m.data().iter().map(|v| v * v).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = vecs.get(k, p);
                    let vkq = vecs.get(k, q);
                    vecs.set(k, p, c * vkp - s * vkq);
                    vecs.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| m.get(i, i)).collect(), vecs)
}

/// Mean-centres the points and keeps the top two covariance eigenvectors
/// (covariance normalized by `N − 1`). Each component's largest-magnitude
/// entry is made positive.
pub fn fit_pca(points: &SampleSet) -> Result<Projection> {
    let n = points.len();
    let d = points.dim();
    if n < 3 || d < 2 {
        return Err(Error::Input(format!(
            "PCA needs at least 3 points of dimension ≥ 2, got {n} of dimension {d}"
        )));
    }
    let first = &points.points()[0];
    if points.points().iter().all(|p| p == first) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let mut mean = Vector::zeros(d);
    for p in points.points() {
        mean.axpy(1.0 / n as f64, p);
    }
    let mut cov = Matrix::zeros(d, d);
    for p in points.points() {
        let c = p.sub(&mean);
        cov.add_outer(1.0 / (n - 1) as f64, &c, &c);
    }
    let (values, vectors) = symmetric_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut components = Matrix::zeros(2, d);
    let mut explained = [0.0; 2];
    for (row, &idx) in order.iter().take(2).enumerate() {
        let mut v = vectors.column(idx);
        let norm = v.norm();
        v.iter_mut().for_each(|x| *x /= norm);
        let lead = v
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1.abs() { (i, x) } else { best });
        if v[lead.0] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.row_mut(row).copy_from_slice(&v);
        explained[row] = values[idx].max(0.0);
    }
    Ok(Projection {
        mean,
        components,
        explained_variance: explained,
    })
}

/// `(x − mean) · componentᵀ` for each point.
pub fn project(points: &[Vector], projection: &Projection) -> Result<Vec<(f64, f64)>> {
    points
        .iter()
        .map(|p| {
            if p.dim() != projection.mean.dim() {
                return Err(shape(format!(
                    "point of dimension {} projected with a {}-d PCA",
                    p.dim(),
                    projection.mean.dim()
                )));
            }
            let c = p.sub(&projection.mean);
            Ok((
                dot(&c, projection.components.row(0)),
                dot(&c, projection.components.row(1)),
            ))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Example,
    Original,
    Traversed,
}

/// One row of the visualization CSV: `pc1,pc2,label,topic,kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaRow {
    pub pc1: f64,
    pub pc2: f64,
    pub label: String,
    pub topic: String,
    pub kind: PointKind,
}

pub fn write_pca_csv<W: Write>(writer: W, rows: &[PcaRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(["pc1", "pc2", "label", "topic", "kind"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
