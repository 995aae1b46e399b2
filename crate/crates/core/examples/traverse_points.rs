//! Traversal on synthetic 2-D clouds: the same point moved toward the target
//! cloud under budgets from loose to tight.
//!
//! cargo run --example traverse_points

use latent_sentiment::kernels::{median_heuristic_sigma, KernelConfig, SampleSet};
use latent_sentiment::numerics::Vector;
use latent_sentiment::optim::BfgsConfig;
use latent_sentiment::traversal::{traversal_report, traverse, TraversalProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(rng: &mut ChaCha8Rng, n: usize, centre: [f64; 2]) -> SampleSet {
    let points = (0..n)
        .map(|_| Vector::new(centre.iter().map(|c| c + rng.random_range(-0.6..0.6)).collect()))
        .collect();
    SampleSet::new(points).unwrap()
}

fn main() -> latent_sentiment::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let source = cloud(&mut rng, 40, [0.0, 0.0]);
    let target = cloud(&mut rng, 40, [3.0, 1.0]);
    let kernel = KernelConfig::new(median_heuristic_sigma(&source.union(&target)?)?)?;
    let z = source.points()[0].clone();
    println!("sigma {:.3}, z = ({:.3}, {:.3})", kernel.sigma(), z[0], z[1]);

    for lambda in [1e-6, 7e-5, 1e-3, 1e-2, 1e-1, 1.0] {
        let problem = TraversalProblem::new(z.clone(), source.clone(), target.clone(), lambda, kernel)?;
        let r = traverse(&problem, &BfgsConfig::default())?;
        println!(
            "lambda {lambda:<7e} z* = ({:>6.3}, {:>6.3})  {}",
            r.z_star[0],
            r.z_star[1],
            traversal_report(&r)
        );
    }
    Ok(())
}
