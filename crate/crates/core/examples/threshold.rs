//! BP threshold by bisection on the mean evolution.
//!
//! cargo run --release --example threshold -- [random|protograph] [L] [tol]

use scldpc::mean::{find_threshold, model_for, IntegrateOptions};
use scldpc::{EnsembleSpec, Family};

fn main() -> scldpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().unwrap_or_else(|| "random".into()).parse()?;
    let len: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let tol: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let spec = EnsembleSpec::new(family, 3, 6, len)?;
    let model = model_for(&spec)?;
    let res = find_threshold(model.as_ref(), (0.0, 0.5), tol, IntegrateOptions::default())?;
    for p in &res.probes {
        println!("eps {:.6}: {} ({:?} at tau {:.2})", p.epsilon, if p.survived { "decodes" } else { "stalls" }, p.halt, p.final_tau);
    }
    println!("{spec}: threshold {:.5} (bracket [{:.5}, {:.5}])", res.epsilon_star, res.lo, res.hi);
    Ok(())
}
