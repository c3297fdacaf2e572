//! Couple the (l,r) base protograph into a chain and list its edge types.
//!
//! cargo run --example coupled_protograph -- [l] [r] [L]

use scldpc::protograph::{BaseProtograph, CoupledProtograph};

fn main() -> scldpc::Result<()> {
    let arg = |i: usize, d: usize| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (l, r, len) = (arg(1, 3), arg(2, 6), arg(3, 3));
    let base = BaseProtograph::regular(l, r)?;
    println!("base ({l},{r}): {} variables, {} checks, edges {:?}", base.n_v, base.n_c, base.edges);

    let cp = CoupledProtograph::regular(l, r, len)?;
    println!(
        "coupled chain of {len}: {} edge types, {} variable nodes, {} check nodes, design rate {}",
        cp.m(),
        cp.n_variables(),
        cp.n_checks(),
        cp.design_rate()
    );
    let degrees: Vec<usize> = cp.check_nodes.iter().map(Vec::len).collect();
    println!("check degrees along the chain: {degrees:?}");
    println!("\ntype var chk var_pos chk_pos");
    print!("{}", cp.adjacency_listing());
    Ok(())
}
