//! Peel a small random coupled code above threshold and inspect what is left.
//!
//! cargo run --example stopping_set

use scldpc::peeling::{transmit, PeelOptions};
use scldpc::rng::{substream, Purpose};
use scldpc::sampler::sample_random;

fn main() -> scldpc::Result<()> {
    let graph = sample_random(3, 6, 10, 60, 11)?;
    for trial in 0..5 {
        let mut rg = transmit(&graph, 0.55, &mut substream(11, Purpose::Erasure, 0, trial));
        let traj = rg.peel(&mut substream(11, Purpose::Peel, 0, trial), PeelOptions::outcome_only());
        if traj.decoded() {
            println!("trial {trial}: decoded all {} erasures", traj.erased);
            continue;
        }
        let set = rg.extract_stopping_set()?;
        // every check touching the set sees at least two of its variables
        let min_degree = (0..graph.n_checks())
            .map(|c| rg.residual_degree(c))
            .filter(|&d| d > 0)
            .min()
            .unwrap_or(0);
        println!(
            "trial {trial}: {} of {} erasures left, smallest nonzero residual check degree {min_degree}",
            set.len(),
            traj.erased
        );
    }
    Ok(())
}
