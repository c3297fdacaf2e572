//! Multi-edge-type degree distribution of a lifted protograph before and
//! after transmission over the BEC.
//!
//! cargo run --example degree_distribution -- [L] [M] [epsilon]

use scldpc::dd::dd_from_protograph;
use scldpc::protograph::CoupledProtograph;

fn main() -> scldpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let len: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let eps: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.45);

    let cp = CoupledProtograph::regular(3, 6, len)?;
    let dd = dd_from_protograph(&cp, m)?;
    println!("before transmission: {} variables, {} checks", dd.variable_total(), dd.check_total());

    let after = dd.normalize(m).bec_initialize(eps)?;
    println!(
        "after BEC({eps}), per M: {:.4} erased variables, {:.4} deg1 checks, {:.4} decoded checks, {} check types",
        after.variable_total(),
        after.deg1_total(),
        after.decoded_checks,
        after.chk_counts.len()
    );
    let counts = after.edge_counts();
    println!("edge type 0 carries {:.4} edges on both sides", counts.var[0]);
    println!("\nfirst rows of the check table:");
    for line in after.to_csv().lines().take(8) {
        println!("{line}");
    }
    Ok(())
}
