//! BEC transmission and peeling decoding on finite graphs.

use std::fmt::Write as _;

use rand::Rng;

use crate::ensemble::EnsembleSpec;
use crate::protograph::CoupledProtograph;
use crate::rng::{substream, trial_seed, Purpose};
use crate::sampler::{sample, TannerGraph};
use crate::{Error, Result};

const NOT_DEG1: u32 = u32::MAX;

/// Residual graph during peeling.
///
/// Each check keeps its residual degree and the XOR of its live neighbours,
/// so the unique neighbour of a degree-one check is read off directly.
#[derive(Debug, Clone)]
pub struct ResidualGraph<'g> {
    graph: &'g TannerGraph,
    live: Vec<bool>,
    live_count: usize,
    erased: usize,
    degree: Vec<u32>,
    xor: Vec<u32>,
    deg1: Vec<u32>,
    slot: Vec<u32>,
    deg1_per_pos: Vec<u32>,
    ell: u64,
}

/// Erases each variable independently with probability `epsilon`.
pub fn transmit<'g, R: Rng>(graph: &'g TannerGraph, epsilon: f64, rng: &mut R) -> ResidualGraph<'g> {
    let erased: Vec<bool> = (0..graph.n_variables()).map(|_| rng.gen::<f64>() < epsilon).collect();
    ResidualGraph::from_erasures(graph, &erased)
}

impl<'g> ResidualGraph<'g> {
    /// Residual graph for an explicit erasure pattern.
    pub fn from_erasures(graph: &'g TannerGraph, erased: &[bool]) -> Self {
        assert_eq!(erased.len(), graph.n_variables());
        let n_checks = graph.n_checks();
        let mut degree = vec![0u32; n_checks];
        let mut xor = vec![0u32; n_checks];
        for (v, _) in erased.iter().enumerate().filter(|(_, &e)| e) {
            for &c in graph.variable_checks(v) {
                degree[c as usize] += 1;
                xor[c as usize] ^= v as u32;
            }
        }
        let live_count = erased.iter().filter(|&&e| e).count();
        let mut rg = Self {
            graph,
            live: erased.to_vec(),
            live_count,
            erased: live_count,
            degree,
            xor,
            deg1: Vec::new(),
            slot: vec![NOT_DEG1; n_checks],
            deg1_per_pos: vec![0; graph.max_position() + 1],
            ell: 0,
        };
        for c in 0..n_checks {
            if rg.degree[c] == 1 {
                rg.insert_deg1(c as u32);
            }
        }
        rg
    }

    pub fn deg1_count(&self) -> usize {
        self.deg1.len()
    }

    pub fn live_variables(&self) -> usize {
        self.live_count
    }

    pub fn erased(&self) -> usize {
        self.erased
    }

    pub fn iterations(&self) -> u64 {
        self.ell
    }

    pub fn residual_degree(&self, c: usize) -> u32 {
        self.degree[c]
    }

    pub fn is_live(&self, v: usize) -> bool {
        self.live[v]
    }

    /// Deg1 checks per check position (index 0 unused).
    pub fn deg1_by_position(&self) -> &[u32] {
        &self.deg1_per_pos
    }

    fn insert_deg1(&mut self, c: u32) {
        self.slot[c as usize] = self.deg1.len() as u32;
        self.deg1.push(c);
        self.deg1_per_pos[self.graph.check_pos[c as usize] as usize] += 1;
    }

    fn remove_deg1(&mut self, c: u32) {
        let i = self.slot[c as usize] as usize;
        let last = *self.deg1.last().expect("deg1 set is non-empty");
        self.deg1.swap_remove(i);
        if last != c {
            self.slot[last as usize] = i as u32;
        }
        self.slot[c as usize] = NOT_DEG1;
        self.deg1_per_pos[self.graph.check_pos[c as usize] as usize] -= 1;
    }

    fn remove_variable(&mut self, v: u32) {
        debug_assert!(self.live[v as usize]);
        self.live[v as usize] = false;
        self.live_count -= 1;
        for &c in self.graph.variable_checks(v as usize) {
            let ci = c as usize;
            self.degree[ci] -= 1;
            self.xor[ci] ^= v;
            match self.degree[ci] {
                0 => self.remove_deg1(c),
                1 => self.insert_deg1(c),
                _ => {}
            }
        }
    }

    /// One peeling iteration: a uniformly chosen deg1 check and its variable are removed.
    /// Returns `false` if no deg1 check exists.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> bool {
        if self.deg1.is_empty() {
            return false;
        }
        let c = self.deg1[rng.gen_range(0..self.deg1.len())];
        let v = self.xor[c as usize];
        self.remove_variable(v);
        self.ell += 1;
        true
    }

    /// Peels until no deg1 check remains, sampling `C1` every `stride` iterations.
    pub fn peel<R: Rng>(&mut self, rng: &mut R, opts: PeelOptions) -> Trajectory {
        let stride = opts.stride.max(1);
        let mut samples = Vec::new();
        let mut positions = opts.record_positions.then(Vec::new);
        loop {
            let at_sample = self.ell % stride == 0;
            if at_sample && opts.record {
                samples.push((self.ell, self.deg1.len() as u32));
                if let Some(p) = positions.as_mut() {
                    p.push(self.deg1_per_pos.clone());
                }
            }
            if !self.step(rng) {
                if !at_sample && opts.record {
                    samples.push((self.ell, 0));
                    if let Some(p) = positions.as_mut() {
                        p.push(self.deg1_per_pos.clone());
                    }
                }
                break;
            }
        }
        let outcome = if self.live_count == 0 { Outcome::Decoded } else { Outcome::Stopped };
        Trajectory { stride, samples, positions, outcome, ell_stop: self.ell, erased: self.erased }
    }

    /// Variables left after a failed decoding; they form the maximal stopping set.
    pub fn extract_stopping_set(&self) -> Result<Vec<u32>> {
        if self.live_count == 0 {
            return Err(Error::FullyDecoded);
        }
        if !self.deg1.is_empty() {
            return Err(Error::InvalidParameter("peeling has not finished".into()));
        }
        Ok((0..self.live.len() as u32).filter(|&v| self.live[v as usize]).collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PeelOptions {
    /// Sampling period of `C1` in iterations.
    pub stride: u64,
    pub record: bool,
    pub record_positions: bool,
}

impl PeelOptions {
    /// Default stride of `M/100`, i.e. 100 samples per unit of normalized time.
    pub fn for_m(bits_per_position: usize) -> Self {
        Self { stride: (bits_per_position as u64 / 100).max(1), record: true, record_positions: false }
    }

    /// Outcome only.
    pub fn outcome_only() -> Self {
        Self { stride: u64::MAX, record: false, record_positions: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Decoded,
    Stopped,
}

/// Deg1 trajectory of one decoding run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub stride: u64,
    /// `(iteration, C1)` pairs; the last one is the terminal state.
    pub samples: Vec<(u64, u32)>,
    /// Deg1 counts per check position at each sample, if requested.
    pub positions: Option<Vec<Vec<u32>>>,
    pub outcome: Outcome,
    pub ell_stop: u64,
    pub erased: usize,
}

impl Trajectory {
    pub fn decoded(&self) -> bool {
        self.outcome == Outcome::Decoded
    }

    /// `C1` at sample index `i`, if the decoder was still running there.
    pub fn c1_at(&self, i: usize) -> Option<u32> {
        self.samples.get(i).filter(|s| s.0 == i as u64 * self.stride && s.1 > 0).map(|s| s.1)
    }

    /// CSV `ell,tau,c1_count,c1_fraction`.
    pub fn to_csv(&self, bits_per_position: usize) -> String {
        let mm = bits_per_position as f64;
        let mut out = String::from("ell,tau,c1_count,c1_fraction\n");
        for &(ell, c1) in &self.samples {
            let _ = writeln!(out, "{ell},{},{c1},{}", ell as f64 / mm, c1 as f64 / mm);
        }
        out
    }

    /// One row of the per-trial outcome CSV `seed,erased,outcome,ell_stop`.
    pub fn outcome_row(&self, seed: u64) -> String {
        let o = match self.outcome {
            Outcome::Decoded => "decoded",
            Outcome::Stopped => "stopped",
        };
        format!("{seed},{},{o},{}", self.erased, self.ell_stop)
    }
}

/// Samples a graph, transmits and peels: trial `trial` of a run seeded with `seed`.
pub fn run_trial(
    spec: &EnsembleSpec,
    cp: Option<&CoupledProtograph>,
    bits_per_position: usize,
    epsilon: f64,
    seed: u64,
    trial: u64,
    opts: PeelOptions,
) -> Result<Trajectory> {
    let graph = sample(spec, cp, bits_per_position, trial_seed(seed, trial))?;
    let mut erasure_rng = substream(seed, Purpose::Erasure, 0, trial);
    let mut peel_rng = substream(seed, Purpose::Peel, 0, trial);
    let mut rg = transmit(&graph, epsilon, &mut erasure_rng);
    Ok(rg.peel(&mut peel_rng, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{lift, sample_random, LiftOptions};

    fn rng(t: u64) -> rand_chacha::ChaCha8Rng {
        substream(99, Purpose::Peel, 0, t)
    }

    #[test]
    fn erasure_extremes() {
        let cp = CoupledProtograph::regular(3, 6, 5).unwrap();
        let g = lift(&cp, 20, 1, LiftOptions::default()).unwrap();
        let mut rg = transmit(&g, 0.0, &mut rng(0));
        assert_eq!(rg.live_variables(), 0);
        let t = rg.peel(&mut rng(1), PeelOptions::for_m(20));
        assert!(t.decoded());
        assert_eq!(t.ell_stop, 0);

        let rg = transmit(&g, 1.0, &mut rng(0));
        assert_eq!(rg.live_variables(), g.n_variables());
        assert_eq!(rg.deg1_count(), 0);
    }

    #[test]
    fn erased_count_is_binomial() {
        let g = sample_random(3, 6, 20, 500, 4).unwrap();
        let n = g.n_variables() as f64;
        let eps = 0.45;
        let rg = transmit(&g, eps, &mut rng(3));
        let sd = (n * eps * (1.0 - eps)).sqrt();
        assert!((rg.erased() as f64 - n * eps).abs() < 4.0 * sd);
    }

    /// One variable attached to two checks of degree one.
    fn tiny() -> TannerGraph {
        let cp = CoupledProtograph::regular(2, 2, 1).unwrap();
        // (2,2,1)_P: one variable with checks at positions 1 and 2.
        lift(&cp, 1, 0, LiftOptions { avoid_parallel_edges: false, avoid_twins: false, max_retries: 0 }).unwrap()
    }

    #[test]
    fn single_variable_with_deg1_check() {
        let g = tiny();
        let mut rg = ResidualGraph::from_erasures(&g, &[true]);
        assert_eq!(rg.deg1_count(), 2);
        let t = rg.peel(&mut rng(0), PeelOptions { stride: 1, record: true, record_positions: true });
        assert!(t.decoded());
        assert_eq!(t.ell_stop, 1);
        assert_eq!(t.samples, vec![(0, 2), (1, 0)]);
        assert!(rg.extract_stopping_set().is_err());
    }

    /// Three variables on a 6-cycle with three degree-2 checks.
    fn six_cycle() -> TannerGraph {
        // variable v touches checks v and (v+1) % 3
        let adj = vec![vec![0, 1], vec![1, 2], vec![2, 0]];
        TannerGraph::from_adjacency(vec![1; 3], vec![1; 3], &adj, 0).unwrap()
    }

    #[test]
    fn six_cycle_is_a_stopping_set() {
        let g = six_cycle();
        let mut rg = ResidualGraph::from_erasures(&g, &[true, true, true]);
        let t = rg.peel(&mut rng(0), PeelOptions::for_m(3));
        assert_eq!(t.outcome, Outcome::Stopped);
        assert_eq!(t.ell_stop, 0);
        let s = rg.extract_stopping_set().unwrap();
        assert_eq!(s, vec![0, 1, 2]);
        for &v in &s {
            for &c in g.variable_checks(v as usize) {
                assert!(rg.residual_degree(c as usize) >= 2);
            }
        }
    }

    #[test]
    fn per_iteration_invariants() {
        let cp = CoupledProtograph::regular(3, 6, 20).unwrap();
        let g = lift(&cp, 100, 8, LiftOptions::default()).unwrap();
        let mut r = rng(5);
        let mut rg = transmit(&g, 0.45, &mut r);
        let mut prev_c1 = rg.deg1_count() as i64;
        let mut prev_live = rg.live_variables();
        while rg.step(&mut r) {
            let c1 = rg.deg1_count() as i64;
            assert_eq!(rg.live_variables(), prev_live - 1);
            assert!((-3..=2).contains(&(c1 - prev_c1)));
            prev_c1 = c1;
            prev_live = rg.live_variables();
            for c in 0..g.n_checks() {
                assert_eq!(rg.slot[c] != NOT_DEG1, rg.degree[c] == 1);
            }
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let spec = EnsembleSpec::protograph(3, 6, 10);
        let a = run_trial(&spec, None, 100, 0.45, 7, 3, PeelOptions::for_m(100)).unwrap();
        let b = run_trial(&spec, None, 100, 0.45, 7, 3, PeelOptions::for_m(100)).unwrap();
        assert_eq!(a, b);
        let csv = a.to_csv(100);
        assert!(csv.starts_with("ell,tau,c1_count,c1_fraction\n0,0,"));
        assert!(a.outcome_row(7).starts_with("7,"));
    }
}
