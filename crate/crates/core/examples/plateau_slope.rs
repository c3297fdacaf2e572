//! Plateau height c1(*) against the gap to threshold, and its slope gamma.
//!
//! cargo run --release --example plateau_slope -- [L]

use scldpc::mean::{estimate_gamma, model_for, IntegrateOptions, PlateauOptions};
use scldpc::EnsembleSpec;

fn main() -> scldpc::Result<()> {
    let len: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let deltas = [0.01, 0.02, 0.03, 0.04, 0.05];
    let mut gammas = Vec::new();
    for spec in [EnsembleSpec::protograph(3, 6, len), EnsembleSpec::random(3, 6, len)] {
        let model = model_for(&spec)?;
        let fit = estimate_gamma(model.as_ref(), 0.48815, &deltas, IntegrateOptions::default(), PlateauOptions::default(), 0.05)?;
        println!("{spec}: gamma = {:.3} (relative residual {:.4})", fit.gamma, fit.relative_residual);
        for (d, c) in &fit.points {
            println!("  gap {d:.2}: c1(*) = {c:.5}");
        }
        gammas.push(fit.gamma);
    }
    println!("ratio protograph/random = {:.3}", gammas[0] / gammas[1]);
    Ok(())
}
