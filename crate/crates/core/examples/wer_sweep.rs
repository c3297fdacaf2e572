//! Monte Carlo word error rate over an erasure sweep, with early stopping
//! and Wilson intervals. The protograph is lifted twice: with the default
//! lift and with the guard against variables that share every check.
//!
//! cargo run --release --example wer_sweep -- [M] [max_trials]

use scldpc::experiment::{simulate_point, wer_csv};
use scldpc::EnsembleSpec;

fn main() -> scldpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);
    let max_trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let plain = EnsembleSpec::protograph(3, 6, 50);
    for spec in [plain, plain.with_twin_guard(true), EnsembleSpec::random(3, 6, 50)] {
        if spec.avoid_twins {
            println!("# twin guard on");
        }
        let points = [0.42, 0.44, 0.46]
            .iter()
            .map(|&e| simulate_point(&spec, m, e, max_trials, 200, 50, 1))
            .collect::<scldpc::Result<Vec<_>>>()?;
        print!("{}", wer_csv(&spec, m, &points));
    }
    Ok(())
}
