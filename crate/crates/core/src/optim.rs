//! BFGS with a backtracking Armijo line search, plus first-order update rules
//! for network training.

use crate::error::{shape, Error, Result};
use crate::numerics::{dot, Matrix, Vector};

/// Curvature updates with `yᵀs` at or below this are skipped so the inverse
/// Hessian approximation stays positive definite.
pub const CURVATURE_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            step_tol: 1e-10,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 100,
        }
    }
}

impl BfgsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.grad_tol, self.step_tol, self.initial_step, self.armijo]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.max_iters == 0 || self.max_backtracks == 0 {
            return Err(Error::Input("BFGS settings must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Input("line-search shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One accepted line-search step.
#[derive(Clone, Debug, PartialEq)]
pub struct LineStep {
    pub alpha: f64,
    pub f_before: f64,
    pub f_after: f64,
    /// Directional derivative `∇f(x)ᵀp` at the start of the step.
    pub slope: f64,
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: Vector,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub steps: Vec<LineStep>,
}

fn non_finite(what: &str, x: &[f64], iterations: usize) -> Error {
    Error::Optimization {
        message: format!("non-finite {what}"),
        last_valid: x.to_vec(),
        iterations,
    }
}

/// Minimizes `objective` from `x0` using BFGS on the inverse Hessian.
///
/// Stops when `‖∇f‖ ≤ grad_tol`, when an accepted step is shorter than
/// `step_tol`, when the line search cannot find an Armijo point, or after
/// `max_iters`. A non-finite objective or gradient at a trial point aborts
/// with [`Error::Optimization`] carrying the last accepted iterate.
pub fn bfgs_minimize<F, G>(
    objective: F,
    gradient: G,
    x0: &[f64],
    cfg: &BfgsConfig,
) -> Result<BfgsOutcome>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vector,
{
    cfg.validate()?;
    let n = x0.len();
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("initial point is not finite".into()));
    }
    let mut x = Vector::new(x0.to_vec());
    let mut fx = objective(&x);
    let mut gx = gradient(&x);
    if !fx.is_finite() {
        return Err(non_finite("objective", &x, 0));
    }
    if gx.dim() != n {
        return Err(shape("gradient dimension differs from x"));
    }
    if !gx.is_finite() {
        return Err(non_finite("gradient", &x, 0));
    }

    let mut h_inv = Matrix::identity(n);
    let mut scaled = false;
    let mut steps = Vec::new();
    let mut iterations = 0;

    let outcome = |x: Vector, f: f64, g: &Vector, iterations, steps| {
        let grad_norm = g.norm();
        BfgsOutcome {
            x,
            f,
            grad_norm,
            iterations,
            converged: grad_norm <= cfg.grad_tol,
            steps,
        }
    };

    while iterations < cfg.max_iters {
        if gx.norm() <= cfg.grad_tol {
            break;
        }
        let mut dir = h_inv.matvec(&gx)?.scaled(-1.0);
        let mut slope = dot(&gx, &dir);
        if !(slope < 0.0) {
            // Lost descent; restart from steepest descent.
            h_inv = Matrix::identity(n);
            scaled = false;
            dir = gx.scaled(-1.0);
            slope = -gx.norm_sq();
        }

        let mut alpha = cfg.initial_step;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial = x.add(&dir.scaled(alpha));
            let f_trial = objective(&trial);
            if !f_trial.is_finite() {
                return Err(non_finite("objective", &x, iterations));
            }
            if f_trial <= fx + cfg.armijo * alpha * slope {
                accepted = Some((trial, f_trial));
                break;
            }
            alpha *= cfg.shrink;
        }
        let Some((x_new, f_new)) = accepted else {
            log::debug!("bfgs: line search exhausted at iteration {iterations}");
            break;
        };
        let g_new = gradient(&x_new);
        if !g_new.is_finite() {
            return Err(non_finite("gradient", &x, iterations));
        }
        steps.push(LineStep {
            alpha,
            f_before: fx,
            f_after: f_new,
            slope,
        });
        iterations += 1;

        let s = x_new.sub(&x);
        let y = g_new.sub(&gx);
        x = x_new;
        fx = f_new;
        gx = g_new;

        if s.norm() <= cfg.step_tol {
            break;
        }
        let ys = dot(&y, &s);
        if ys > CURVATURE_EPS {
            if !scaled {
                let gamma = ys / y.norm_sq();
                h_inv = Matrix::identity(n);
                h_inv.data_mut().iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / ys;
            let hy = h_inv.matvec(&y)?;
            let yhy = dot(&y, &hy);
            h_inv.add_outer(-rho, &hy, &s);
            h_inv.add_outer(-rho, &s, &hy);
            h_inv.add_outer(rho * rho * yhy + rho, &s, &s);
        }
    }
    Ok(outcome(x, fx, &gx, iterations, steps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgdConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 1,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero rate is allowed so a run can be made a no-op.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Input("learning rate must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Input("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Input("moment decays must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Input("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Moment estimates for the adaptive rule; unused by plain SGD.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step: 0,
        }
    }
}

/// Applies one update to `params` in place.
pub fn sgd_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    cfg: &SgdConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    let lr = cfg.learning_rate;
    match cfg.kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam => {
            if state.first_moment.len() != params.len() {
                *state = OptimizerState::new(params.len());
            }
            state.step += 1;
            let t = state.step as i32;
            let c1 = 1.0 - cfg.beta1.powi(t);
            let c2 = 1.0 - cfg.beta2.powi(t);
            for i in 0..params.len() {
                let g = grads[i];
                let m = &mut state.first_moment[i];
                let v = &mut state.second_moment[i];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = dot(grads, grads).sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}
