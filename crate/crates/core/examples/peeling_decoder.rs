//! Lift a coupled protograph, erase bits and peel, printing the deg1 trajectory.
//!
//! cargo run --release --example peeling_decoder -- [M] [epsilon] [seed]

use scldpc::peeling::{transmit, PeelOptions};
use scldpc::protograph::CoupledProtograph;
use scldpc::rng::{substream, Purpose};
use scldpc::sampler::{lift, LiftOptions};

fn main() -> scldpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let eps: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.45);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let cp = CoupledProtograph::regular(3, 6, 50)?;
    let graph = lift(&cp, m, seed, LiftOptions::default())?;
    println!("lifted graph: {} variables, {} checks, {} edges", graph.n_variables(), graph.n_checks(), graph.n_edges());

    let mut residual = transmit(&graph, eps, &mut substream(seed, Purpose::Erasure, 0, 0));
    println!("{} bits erased, {} deg1 checks at start", residual.erased(), residual.deg1_count());
    let traj = residual.peel(&mut substream(seed, Purpose::Peel, 0, 0), PeelOptions::for_m(m));
    println!("outcome {:?} after {} iterations", traj.outcome, traj.ell_stop);
    if !traj.decoded() {
        println!("stopping set of {} variables", residual.extract_stopping_set()?.len());
    }
    for line in traj.to_csv(m).lines().step_by(200) {
        println!("{line}");
    }
    Ok(())
}
