//! One-step variance proxy for delta1 against a Monte Carlo estimate.
//!
//! cargo run --release --example variance_proxy -- [trials] [M]

use scldpc::mean::{integrate_ensemble, model_for, steady_state, IntegrateOptions, PlateauOptions};
use scldpc::montecarlo::run_trials;
use scldpc::variance::{estimate_delta1, monte_carlo_delta1, one_step_pmf, plateau_average};
use scldpc::EnsembleSpec;

fn main() -> scldpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let eps = 0.45;

    let spec = EnsembleSpec::random(3, 6, 60);
    let model = model_for(&spec)?;
    let traj = integrate_ensemble(model.as_ref(), eps, IntegrateOptions { snapshot_every: Some(0.1), ..Default::default() })?;
    let plateau = steady_state(&traj, PlateauOptions::default())?;
    let analytic = estimate_delta1(model.as_ref(), &traj, &plateau)?;

    let (tau, state) = &traj.snapshots[traj.snapshots.len() / 2];
    let pmf = one_step_pmf(model.as_ref(), state)?;
    println!("one-step change of C1 at tau={tau:.1}:");
    for d in pmf.support() {
        println!("  {d:+}: {:.5}", pmf.prob(d));
    }
    println!("  mean {:.5}, variance {:.5}", pmf.mean(), pmf.variance());

    let ens = run_trials(&spec, m, eps, trials, 3)?;
    let mc = monte_carlo_delta1(&ens)?;
    let mc_star = plateau_average(&mc, plateau.window.0, plateau.window.1)?;
    println!(
        "{spec}, M={m}, {trials} trials: delta1(*) proxy {:.4}, Monte Carlo {:.4}",
        analytic.delta1_star, mc_star
    );
    Ok(())
}
