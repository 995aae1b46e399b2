//! The MMD witness between two 1-D point sets, sampled on a grid, and the
//! squared MMD of a few set pairs.
//!
//! cargo run --example witness

use latent_sentiment::kernels::{gaussian_kernel, median_heuristic_sigma, mmd, witness, witness_grad, KernelConfig, SampleSet};
use latent_sentiment::numerics::Vector;

fn set(values: &[f64]) -> SampleSet {
    SampleSet::new(values.iter().map(|&v| Vector::new(vec![v])).collect()).unwrap()
}

fn main() -> latent_sentiment::Result<()> {
    let source = set(&[-0.5, 0.0, 0.3]);
    let target = set(&[1.8, 2.0, 2.4]);
    let sigma = median_heuristic_sigma(&source.union(&target)?)?;
    let cfg = KernelConfig::new(sigma)?;
    println!("median heuristic sigma {sigma:.4}");
    println!("k(0, 2) = {:.6}", gaussian_kernel(&[0.0], &[2.0], cfg)?);

    println!("{:>6} {:>10} {:>10}", "x", "f*(x)", "df*/dx");
    for i in 0..=12 {
        let x = -1.0 + 0.375 * i as f64;
        let w = witness(&[x], &source, &target, cfg)?;
        let g = witness_grad(&[x], &source, &target, cfg)?;
        println!("{x:>6.3} {w:>10.5} {:>10.5}", g[0]);
    }

    for shift in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let moved = set(&[-0.5 + shift, shift, 0.3 + shift]);
        println!("shift {shift:>3}: mmd^2 {:.6}", mmd(&source, &moved, cfg)?);
    }
    Ok(())
}
