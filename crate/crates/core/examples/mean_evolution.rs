//! Expected fraction of deg1 checks over the decoding time for both ensembles.
//!
//! cargo run --release --example mean_evolution -- [L] [epsilon]

use scldpc::mean::{integrate_ensemble, model_for, steady_state, IntegrateOptions, PlateauOptions};
use scldpc::EnsembleSpec;

fn main() -> scldpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let len: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let eps: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.45);

    for spec in [EnsembleSpec::protograph(3, 6, len), EnsembleSpec::random(3, 6, len)] {
        let model = model_for(&spec)?;
        let traj = integrate_ensemble(model.as_ref(), eps, IntegrateOptions::default())?;
        print!("{spec} at eps={eps}: halted ({:?}) at tau={:.3}", traj.halt, traj.final_tau());
        match steady_state(&traj, PlateauOptions::default()) {
            Ok(s) => println!(", plateau c1(*)={:.5} from tau*={:.2} to {:.2}", s.c1_star, s.tau_star, s.tau_end),
            Err(e) => println!(", {e}"),
        }
        for i in (0..traj.tau.len()).step_by(traj.tau.len() / 10 + 1) {
            println!("  tau {:7.3}  c1_hat {:.5}", traj.tau[i], traj.c1[i]);
        }
    }
    Ok(())
}
