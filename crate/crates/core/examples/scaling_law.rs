//! Waterfall prediction from the scaling law and the bits-per-position
//! factor separating two plateau slopes.
//!
//! cargo run --example scaling_law

use scldpc::scaling::{equivalent_m, predict_curve, AlphaConvention, ScalingParams};

fn main() -> scldpc::Result<()> {
    let protograph =
        ScalingParams { epsilon_star: 0.48815, gamma: 5.25, delta1: 0.7, theta: 0.6, tau_star: 19.0, alpha: AlphaConvention::StdDev };
    let random = ScalingParams { gamma: 4.2, tau_star: 18.0, ..protograph };

    let eps: Vec<f64> = (0..=6).map(|i| 0.43 + 0.005 * i as f64).collect();
    for (name, p) in [("protograph", &protograph), ("random", &random)] {
        println!("{name}, M=512, L=100");
        for row in predict_curve(p, 512, 100, &eps)? {
            println!("  eps {:.3}: mu0 {:10.3e}  P* {:.3e}", row.epsilon, row.mu0, row.p_star);
        }
    }
    let m = equivalent_m(&random, &protograph, 512.0, 0.45)?;
    println!("random ensemble needs M = {m:.1} to match the protograph at M = 512 ({:.4}x)", m / 512.0);
    Ok(())
}
