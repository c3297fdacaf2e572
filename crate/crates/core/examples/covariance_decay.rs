//! Time covariance of the deg1 process and its exponential decay rate.
//!
//! cargo run --release --example covariance_decay -- [trials] [M]

use scldpc::montecarlo::run_trials;
use scldpc::variance::{fit_theta, ThetaOptions};
use scldpc::EnsembleSpec;

fn main() -> scldpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);

    let spec = EnsembleSpec::random(3, 6, 100);
    let ens = run_trials(&spec, m, 0.45, trials, 5)?;
    let fit = fit_theta(&ens, &[26.0, 28.0], ThetaOptions::default())?;
    println!("{spec}, M={m}: theta = {:.3}, delta1(*) = {:.3}, fitted on lags up to {:.1}", fit.theta, fit.delta1_star, fit.window);
    for p in fit.anchors[0].points.iter().step_by(5) {
        println!("  lag {:+.1}: phi1 = {:.3e} +- {:.1e}", p.lag, p.phi1, p.stderr);
    }
    Ok(())
}
