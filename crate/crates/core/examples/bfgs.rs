//! BFGS with backtracking on the Rosenbrock function, printing the line
//! search trace.
//!
//! cargo run --example bfgs

use latent_sentiment::numerics::Vector;
use latent_sentiment::optim::{bfgs_minimize, BfgsConfig};

fn main() -> latent_sentiment::Result<()> {
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let g = |x: &[f64]| {
        Vector::new(vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ])
    };
    let out = bfgs_minimize(f, g, &[-1.2, 1.0], &BfgsConfig::default())?;
    for (i, s) in out.steps.iter().enumerate().step_by(5) {
        println!("iter {i:>3}  alpha {:<8.4} f {:.3e} -> {:.3e}", s.alpha, s.f_before, s.f_after);
    }
    println!(
        "x = ({:.8}, {:.8})  f = {:.3e}  |g| = {:.3e}  {} iterations, converged {}",
        out.x[0], out.x[1], out.f, out.grad_norm, out.iterations, out.converged
    );
    Ok(())
}
