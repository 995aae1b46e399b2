//! Gaussian kernel, empirical MMD and the MMD witness function.
//!
//! The kernel is `k(x, y) = exp(−‖x − y‖² / (2σ))`. Note the bandwidth
//! enters linearly, not squared: `σ` is measured in squared feature units.
//! Code ported from the more common `2σ²` convention must square its
//! bandwidth before passing it here.

use crate::error::{shape, Error, Result};
use crate::numerics::{pairwise_sum, squared_distance, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    sigma: f64,
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { sigma })
        } else {
            Err(Error::Input(format!("kernel bandwidth must be positive, got {sigma}")))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// A nonempty set of equal-dimension points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Vec<Vector>,
}

impl SampleSet {
    pub fn new(points: Vec<Vector>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Input("sample set is empty".into()))?;
        let dim = first.dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(shape("sample set points differ in dimension"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn union(&self, other: &SampleSet) -> Result<SampleSet> {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        SampleSet::new(points)
    }
}

fn check_dims(point: &[f64], sets: &[&SampleSet]) -> Result<()> {
    for s in sets {
        if s.dim() != point.len() {
            return Err(shape(format!(
                "point has dimension {}, sample set has {}",
                point.len(),
                s.dim()
            )));
        }
    }
    Ok(())
}

pub fn gaussian_kernel(x: &[f64], y: &[f64], cfg: KernelConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(shape(format!("kernel of {}-d and {}-d points", x.len(), y.len())));
    }
    Ok(kernel_unchecked(x, y, cfg.sigma))
}

fn kernel_unchecked(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    (-squared_distance(x, y) / (2.0 * sigma)).exp()
}

fn mean_kernel(point: &[f64], set: &SampleSet, sigma: f64) -> f64 {
    let values: Vec<f64> = set
        .points
        .iter()
        .map(|p| kernel_unchecked(p, point, sigma))
        .collect();
    pairwise_sum(&values) / set.len() as f64
}

/// Empirical witness `f*(z) = (1/m) Σ k(xᵢ, z) − (1/n) Σ k(yᵢ, z)`: positive
/// near source mass, negative near target mass.
pub fn witness(
    point: &[f64],
    source: &SampleSet,
    target: &SampleSet,
    cfg: KernelConfig,
) -> Result<f64> {
    check_dims(point, &[source, target])?;
    Ok(mean_kernel(point, source, cfg.sigma) - mean_kernel(point, target, cfg.sigma))
}

fn weighted_pull(point: &[f64], set: &SampleSet, sigma: f64) -> Vector {
    // Σ k(x, u)(x − u), summed per coordinate in pairwise order.
    let dim = point.len();
    let terms: Vec<(f64, &Vector)> = set
        .points
        .iter()
        .map(|p| (kernel_unchecked(p, point, sigma), p))
        .collect();
    (0..dim)
        .map(|j| {
            let col: Vec<f64> = terms.iter().map(|(k, p)| k * (p[j] - point[j])).collect();
            pairwise_sum(&col)
        })
        .collect()
}

/// Analytic gradient of [`witness`] with respect to the point:
/// `(1/(mσ)) Σ k(xᵢ,u)(xᵢ−u) − (1/(nσ)) Σ k(yᵢ,u)(yᵢ−u)`.
pub fn witness_grad(
    point: &[f64],
    source: &SampleSet,
    target: &SampleSet,
    cfg: KernelConfig,
) -> Result<Vector> {
    check_dims(point, &[source, target])?;
    let s = weighted_pull(point, source, cfg.sigma);
    let t = weighted_pull(point, target, cfg.sigma);
    let cs = 1.0 / (source.len() as f64 * cfg.sigma);
    let ct = 1.0 / (target.len() as f64 * cfg.sigma);
    Ok(s.iter().zip(t.iter()).map(|(a, b)| cs * a - ct * b).collect())
}

/// Difference of witness means over the two sets; this is the biased
/// squared-MMD estimator.
pub fn mmd(source: &SampleSet, target: &SampleSet, cfg: KernelConfig) -> Result<f64> {
    if source.dim() != target.dim() {
        return Err(shape("source and target differ in dimension"));
    }
    let on_source: Vec<f64> = source
        .points
        .iter()
        .map(|p| witness(p, source, target, cfg))
        .collect::<Result<_>>()?;
    let on_target: Vec<f64> = target
        .points
        .iter()
        .map(|p| witness(p, source, target, cfg))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&on_source) / source.len() as f64
        - pairwise_sum(&on_target) / target.len() as f64)
}

/// Half the median pairwise squared distance; 1.0 when that median is zero.
pub fn median_heuristic_sigma(points: &SampleSet) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Input(
            "median heuristic needs at least two points".into(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(squared_distance(&points.points[i], &points.points[j]));
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    Ok(if median > 0.0 { median / 2.0 } else { 1.0 })
}
