//! Independent oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use scldpc::peeling::{PeelOptions, ResidualGraph};
use scldpc::rng::{substream, Purpose};
use scldpc::sampler::TannerGraph;

pub fn final_residual(graph: &TannerGraph, erased: &[bool], peel_seed: u64) -> Vec<bool> {
    let mut rg = ResidualGraph::from_erasures(graph, erased);
    rg.peel(&mut substream(peel_seed, Purpose::Peel, 0, 0), PeelOptions::outcome_only());
    (0..graph.n_variables()).map(|v| rg.is_live(v)).collect()
}

/// Union of every stopping set inside the erased set, by enumerating all subsets.
pub fn largest_stopping_set(graph: &TannerGraph, erased: &[u32]) -> Vec<u32> {
    let n = erased.len();
    assert!(n <= 20);
    let index = |v: u32| erased.iter().position(|&e| e == v);
    let masks: Vec<u32> = (0..graph.n_checks())
        .map(|c| graph.check_variables(c).iter().filter_map(|&v| index(v)).fold(0u32, |m, i| m | 1 << i))
        .filter(|&m| m != 0)
        .collect();
    let mut union = 0u32;
    for s in 1u32..(1u32 << n) {
        if masks.iter().all(|&m| (m & s).count_ones() != 1) {
            union |= s;
        }
    }
    (0..n).filter(|&i| union >> i & 1 == 1).map(|i| erased[i]).collect()
}

/// Exact variance of the number of deg1 checks right after transmission on a fixed graph.
pub fn deg1_variance_after_transmission(graph: &TannerGraph, eps: f64) -> f64 {
    let q = 1.0 - eps;
    let nc = graph.n_checks();
    let p: Vec<f64> = (0..nc)
        .map(|c| {
            let d = graph.check_degree(c) as i32;
            d as f64 * eps * q.powi(d - 1)
        })
        .collect();
    let mut var: f64 = p.iter().map(|x| x * (1.0 - x)).sum();
    for c in 0..nc {
        let mut shared = std::collections::BTreeMap::<u32, i32>::new();
        for &v in graph.check_variables(c) {
            for &c2 in graph.variable_checks(v as usize) {
                if c2 as usize != c {
                    *shared.entry(c2).or_default() += 1;
                }
            }
        }
        let d = graph.check_degree(c) as i32;
        for (&c2, &s) in &shared {
            let d2 = graph.check_degree(c2 as usize) as i32;
            let union = d + d2 - s;
            let both = s as f64 * eps * q.powi(union - 1) + ((d - s) * (d2 - s)) as f64 * eps * eps * q.powi(union - 2);
            var += both - p[c] * p[c2 as usize];
        }
    }
    var
}


/// Draws a small graph and an erased set of at most `max_erased` variables,
/// peels it and compares the residual with the exhaustive oracle.
/// Returns `(agrees, oracle set non-empty)`.
pub fn stopping_set_case(seed: u64, max_erased: usize) -> (bool, bool) {
    use rand::seq::SliceRandom;
    use rand::Rng;
    use scldpc::protograph::CoupledProtograph;
    use scldpc::sampler::{lift, sample_random, LiftOptions};

    let graph = if seed % 2 == 0 {
        sample_random(3, 6, 3, 6, seed).unwrap()
    } else {
        lift(&CoupledProtograph::regular(3, 6, 3).unwrap(), 4, seed, LiftOptions::default()).unwrap()
    };
    let mut rng = substream(seed, Purpose::Sockets, 99, 0);
    let mut vars: Vec<u32> = (0..graph.n_variables() as u32).collect();
    vars.shuffle(&mut rng);
    let n = rng.gen_range(4..=vars.len().min(max_erased));
    let erased = &vars[..n];
    let mut mask = vec![false; graph.n_variables()];
    for &v in erased {
        mask[v as usize] = true;
    }
    let mut rg = ResidualGraph::from_erasures(&graph, &mask);
    let traj = rg.peel(&mut substream(seed, Purpose::Peel, 0, 0), PeelOptions::outcome_only());
    let mut expected = largest_stopping_set(&graph, erased);
    expected.sort_unstable();
    let got = if traj.decoded() { Vec::new() } else { rg.extract_stopping_set().unwrap() };
    (got == expected, !expected.is_empty())
}

/// i.i.d. erasure pattern from the erasure stream of `seed`.
pub fn erasure_pattern(n: usize, eps: f64, seed: u64) -> Vec<bool> {
    use rand::Rng;
    let mut rng = substream(seed, Purpose::Erasure, 0, 0);
    (0..n).map(|_| rng.gen_bool(eps)).collect()
}
