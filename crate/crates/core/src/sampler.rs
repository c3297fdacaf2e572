//! Finite Tanner graphs: protograph lifts and the random socket construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dd::{DdState, MultiEdgeTypeSet};
use crate::ensemble::{EnsembleSpec, Family};
use crate::protograph::CoupledProtograph;
use crate::rng::{substream, Purpose};
use crate::{Error, Result};

/// One edge of a sampled graph. `edge_type` is `None` for the random ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub var: u32,
    pub check: u32,
    pub edge_type: Option<u32>,
}

/// A finite Tanner graph in compressed adjacency form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    /// 1-based position of each variable.
    pub var_pos: Vec<u32>,
    /// 1-based position of each check.
    pub check_pos: Vec<u32>,
    var_offsets: Vec<u32>,
    var_checks: Vec<u32>,
    /// Edge type per entry of `var_checks`; empty for the random ensemble.
    var_edge_types: Vec<u32>,
    check_offsets: Vec<u32>,
    check_vars: Vec<u32>,
    pub seed: u64,
}

impl TannerGraph {
    /// Builds a graph from per-variable check lists. Positions are 1-based.
    pub fn from_adjacency(var_pos: Vec<u32>, check_pos: Vec<u32>, adjacency: &[Vec<u32>], seed: u64) -> Result<Self> {
        if adjacency.len() != var_pos.len() {
            return Err(Error::InvalidParameter("one check list per variable required".into()));
        }
        if adjacency.iter().flatten().any(|&c| c as usize >= check_pos.len()) {
            return Err(Error::InvalidParameter("check index out of range".into()));
        }
        let mut var_offsets = vec![0u32];
        for a in adjacency {
            var_offsets.push(var_offsets.last().unwrap() + a.len() as u32);
        }
        let var_checks = adjacency.concat();
        Ok(Self::assemble(var_pos, check_pos, var_offsets, var_checks, Vec::new(), seed))
    }

    fn uniform(
        var_pos: Vec<u32>,
        check_pos: Vec<u32>,
        var_checks: Vec<u32>,
        var_edge_types: Vec<u32>,
        degree: usize,
        seed: u64,
    ) -> Self {
        let var_offsets: Vec<u32> = (0..=var_pos.len()).map(|v| (v * degree) as u32).collect();
        Self::assemble(var_pos, check_pos, var_offsets, var_checks, var_edge_types, seed)
    }

    fn assemble(
        var_pos: Vec<u32>,
        check_pos: Vec<u32>,
        var_offsets: Vec<u32>,
        var_checks: Vec<u32>,
        var_edge_types: Vec<u32>,
        seed: u64,
    ) -> Self {
        let n_vars = var_pos.len();
        let n_checks = check_pos.len();
        let mut check_offsets = vec![0u32; n_checks + 1];
        for &c in &var_checks {
            check_offsets[c as usize + 1] += 1;
        }
        for c in 0..n_checks {
            check_offsets[c + 1] += check_offsets[c];
        }
        let mut fill = check_offsets.clone();
        let mut check_vars = vec![0u32; var_checks.len()];
        for v in 0..n_vars {
            for &c in &var_checks[var_offsets[v] as usize..var_offsets[v + 1] as usize] {
                check_vars[fill[c as usize] as usize] = v as u32;
                fill[c as usize] += 1;
            }
        }
        Self { var_pos, check_pos, var_offsets, var_checks, var_edge_types, check_offsets, check_vars, seed }
    }

    pub fn n_variables(&self) -> usize {
        self.var_pos.len()
    }

    pub fn n_checks(&self) -> usize {
        self.check_pos.len()
    }

    pub fn n_edges(&self) -> usize {
        self.var_checks.len()
    }

    pub fn variable_checks(&self, v: usize) -> &[u32] {
        &self.var_checks[self.var_offsets[v] as usize..self.var_offsets[v + 1] as usize]
    }

    pub fn check_variables(&self, c: usize) -> &[u32] {
        &self.check_vars[self.check_offsets[c] as usize..self.check_offsets[c + 1] as usize]
    }

    pub fn check_degree(&self, c: usize) -> usize {
        (self.check_offsets[c + 1] - self.check_offsets[c]) as usize
    }

    pub fn max_position(&self) -> usize {
        self.check_pos.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.n_variables()).flat_map(move |v| {
            let lo = self.var_offsets[v] as usize;
            self.variable_checks(v).iter().enumerate().map(move |(i, &c)| Edge {
                var: v as u32,
                check: c,
                edge_type: self.var_edge_types.get(lo + i).copied(),
            })
        })
    }

    /// True if some variable is connected twice to the same check.
    pub fn has_parallel_edges(&self) -> bool {
        (0..self.n_variables()).any(|v| {
            let mut cs = self.variable_checks(v).to_vec();
            cs.sort_unstable();
            cs.windows(2).any(|w| w[0] == w[1])
        })
    }

    /// Degree distribution measured on a lifted graph, keyed by edge types.
    pub fn empirical_dd(&self, m: usize) -> Result<DdState> {
        if self.var_edge_types.is_empty() {
            return Err(Error::InvalidParameter("graph carries no edge types".into()));
        }
        let mut var_counts = BTreeMap::new();
        let mut check_sets = vec![MultiEdgeTypeSet::empty(m); self.n_checks()];
        for v in 0..self.n_variables() {
            let lo = self.var_offsets[v] as usize;
            let hi = self.var_offsets[v + 1] as usize;
            let set = MultiEdgeTypeSet::from_types(m, self.var_edge_types[lo..hi].iter().map(|&t| t as usize));
            *var_counts.entry(set).or_insert(0.0) += 1.0;
            for i in lo..hi {
                check_sets[self.var_checks[i] as usize].insert(self.var_edge_types[i] as usize);
            }
        }
        let mut chk_counts = BTreeMap::new();
        for set in check_sets.into_iter().filter(|s| !s.is_empty()) {
            *chk_counts.entry(set).or_insert(0.0) += 1.0;
        }
        Ok(DdState { m, var_counts, chk_counts, decoded_checks: 0.0, normalized: false, transmitted: false })
    }

    /// Alist export: columns are variables, rows are checks, indices 1-based.
    pub fn to_alist(&self) -> String {
        let n = self.n_variables();
        let m = self.n_checks();
        let col_w: Vec<usize> = (0..n).map(|v| self.variable_checks(v).len()).collect();
        let row_w: Vec<usize> = (0..m).map(|c| self.check_degree(c)).collect();
        let mut out = String::new();
        let _ = writeln!(out, "{n} {m}");
        let _ = writeln!(out, "{} {}", col_w.iter().max().unwrap_or(&0), row_w.iter().max().unwrap_or(&0));
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{}", join(&mut col_w.iter().map(|w| w.to_string())));
        let _ = writeln!(out, "{}", join(&mut row_w.iter().map(|w| w.to_string())));
        for v in 0..n {
            let _ = writeln!(out, "{}", join(&mut self.variable_checks(v).iter().map(|c| (c + 1).to_string())));
        }
        for c in 0..m {
            let _ = writeln!(out, "{}", join(&mut self.check_variables(c).iter().map(|v| (v + 1).to_string())));
        }
        out
    }
}

/// Options for [`lift`].
#[derive(Debug, Clone, Copy)]
pub struct LiftOptions {
    /// Resample permutations that would put two edges between one variable and one check.
    pub avoid_parallel_edges: bool,
    /// Repair pairs of variables that share all of their checks (size-2 stopping sets).
    pub avoid_twins: bool,
    pub max_retries: usize,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self { avoid_parallel_edges: true, avoid_twins: false, max_retries: 100 }
    }
}

/// Copy-and-permute lift of `cp` to `M` bits per position.
///
/// Copy `i` of protograph variable `v` becomes variable `v * n + i` and copy
/// `i` of check `c` becomes check `c * n + i`, with `n = M / k`. Edge type `j`
/// draws its own uniform permutation from substream `(seed, Lift, j)`.
pub fn lift(cp: &CoupledProtograph, bits_per_position: usize, seed: u64, opts: LiftOptions) -> Result<TannerGraph> {
    if bits_per_position == 0 || bits_per_position % cp.k != 0 {
        return Err(Error::InvalidParameter(format!("M={bits_per_position} is not a multiple of k={}", cp.k)));
    }
    let copies = bits_per_position / cp.k;
    if opts.avoid_parallel_edges && copies < 2 {
        return Err(Error::InvalidParameter("lifting needs M/k >= 2 unless parallel-edge checks are disabled".into()));
    }
    let m = cp.m();
    let mut perms: Vec<Vec<u32>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut rng = substream(seed, Purpose::Lift, j as u64, 0);
        let mut p: Vec<u32> = (0..copies as u32).collect();
        p.shuffle(&mut rng);
        perms.push(p);
    }

    if opts.avoid_parallel_edges {
        // Two sockets of one protograph variable sharing a protograph check
        // can collide; later edge types are redrawn until they do not.
        for types in &cp.variable_nodes {
            for (a, &j) in types.iter().enumerate() {
                let clashing: Vec<usize> =
                    types[..a].iter().copied().filter(|&i| cp.edge_types[i].check == cp.edge_types[j].check).collect();
                if clashing.is_empty() {
                    continue;
                }
                let mut rng = substream(seed, Purpose::Lift, j as u64, 1);
                let mut tries = 0;
                while (0..copies).any(|i| clashing.iter().any(|&c| perms[c][i] == perms[j][i])) {
                    if tries == opts.max_retries {
                        return Err(Error::LiftFailed { edge_type: j, retries: tries });
                    }
                    perms[j].shuffle(&mut rng);
                    tries += 1;
                }
            }
        }
    }

    if opts.avoid_twins {
        repair_twins(cp, &mut perms, copies, seed, opts.max_retries)?;
    }

    let l = cp.l;
    let n_vars = cp.n_variables() * copies;
    let mut var_pos = vec![0u32; n_vars];
    let mut var_checks = vec![0u32; n_vars * l];
    let mut var_edge_types = vec![0u32; n_vars * l];
    for (v, types) in cp.variable_nodes.iter().enumerate() {
        let pos = cp.variable_position(v) as u32;
        for i in 0..copies {
            let id = v * copies + i;
            var_pos[id] = pos;
            for (s, &j) in types.iter().enumerate() {
                let c = cp.edge_types[j].check;
                var_checks[id * l + s] = (c * copies) as u32 + perms[j][i];
                var_edge_types[id * l + s] = j as u32;
            }
        }
    }
    let mut check_pos = vec![0u32; cp.n_checks() * copies];
    for c in 0..cp.n_checks() {
        let pos = cp.check_position(c) as u32;
        check_pos[c * copies..(c + 1) * copies].fill(pos);
    }
    Ok(TannerGraph::uniform(var_pos, check_pos, var_checks, var_edge_types, l, seed))
}

/// Copies `(v, i)` whose check set equals that of another variable copy,
/// all but one per class.
fn find_twins(cp: &CoupledProtograph, perms: &[Vec<u32>], copies: usize) -> Vec<(usize, usize)> {
    let l = cp.l;
    let n_vars = cp.n_variables() * copies;
    let mut checks = vec![0u32; n_vars * l];
    for (v, types) in cp.variable_nodes.iter().enumerate() {
        for i in 0..copies {
            let row = &mut checks[(v * copies + i) * l..][..l];
            for (s, &j) in types.iter().enumerate() {
                row[s] = (cp.edge_types[j].check * copies) as u32 + perms[j][i];
            }
            row.sort_unstable();
        }
    }
    let row = |id: u32| &checks[id as usize * l..][..l];
    let mut order: Vec<u32> = (0..n_vars as u32).collect();
    order.sort_unstable_by(|&a, &b| row(a).cmp(row(b)).then(a.cmp(&b)));
    order
        .windows(2)
        .filter(|w| row(w[0]) == row(w[1]))
        .map(|w| (w[1] as usize / copies, w[1] as usize % copies))
        .collect()
}

/// Applies transpositions to the last edge type of a variable until no two
/// variable copies have the same check set.
fn repair_twins(cp: &CoupledProtograph, perms: &mut [Vec<u32>], copies: usize, seed: u64, max_rounds: usize) -> Result<()> {
    let mut rng = substream(seed, Purpose::Lift, 0, 2);
    for _ in 0..=max_rounds {
        let twins = find_twins(cp, perms, copies);
        if twins.is_empty() {
            return Ok(());
        }
        for (v, i) in twins {
            let types = &cp.variable_nodes[v];
            let j = *types.last().unwrap();
            let clashing: Vec<usize> =
                types[..types.len() - 1].iter().copied().filter(|&t| cp.edge_types[t].check == cp.edge_types[j].check).collect();
            for _ in 0..copies {
                let i2 = rng.gen_range(0..copies);
                if i2 == i {
                    continue;
                }
                perms[j].swap(i, i2);
                if clashing.iter().all(|&c| perms[c][i] != perms[j][i] && perms[c][i2] != perms[j][i2]) {
                    break;
                }
                perms[j].swap(i, i2);
            }
        }
    }
    Err(Error::TwinRepairFailed { rounds: max_rounds })
}

/// Samples the random `(l,r,L)` ensemble with `M` variables per position.
///
/// Each check position owns `(l/r) M` checks of `r` sockets each. The socket
/// pool of a position is Fisher-Yates shuffled and handed out in variable
/// order; sockets left over at the boundaries stay empty.
pub fn sample_random(l: usize, r: usize, chain_len: usize, bits_per_position: usize, seed: u64) -> Result<TannerGraph> {
    EnsembleSpec::new(Family::Random, l, r, chain_len)?.validate_m(bits_per_position)?;
    let mm = bits_per_position;
    let checks_per_pos = mm * l / r;
    let n_check_pos = chain_len + l - 1;
    let n_vars = chain_len * mm;
    let var_pos: Vec<u32> = (0..n_vars).map(|v| (v / mm + 1) as u32).collect();
    let check_pos: Vec<u32> = (0..checks_per_pos * n_check_pos).map(|c| (c / checks_per_pos + 1) as u32).collect();
    let mut var_checks = vec![0u32; n_vars * l];

    let mut pool: Vec<u32> = Vec::with_capacity(checks_per_pos * r);
    for p in 1..=n_check_pos {
        pool.clear();
        pool.extend(0..(checks_per_pos * r) as u32);
        let mut rng = substream(seed, Purpose::Sockets, p as u64, 0);
        pool.shuffle(&mut rng);
        let base = ((p - 1) * checks_per_pos) as u32;
        let mut next = 0;
        let u_lo = p.saturating_sub(l - 1).max(1);
        let u_hi = p.min(chain_len);
        for u in u_lo..=u_hi {
            let offset = p - u;
            for i in 0..mm {
                let v = (u - 1) * mm + i;
                var_checks[v * l + offset] = base + pool[next] / r as u32;
                next += 1;
            }
        }
    }
    Ok(TannerGraph::uniform(var_pos, check_pos, var_checks, Vec::new(), l, seed))
}

/// Samples one graph of `spec` with `M` bits per position.
pub fn sample(spec: &EnsembleSpec, cp: Option<&CoupledProtograph>, bits_per_position: usize, seed: u64) -> Result<TannerGraph> {
    let opts = LiftOptions { avoid_twins: spec.avoid_twins, ..LiftOptions::default() };
    match spec.family {
        Family::Protograph => match cp {
            Some(cp) => lift(cp, bits_per_position, seed, opts),
            None => lift(&spec.coupled_protograph()?, bits_per_position, seed, opts),
        },
        Family::Random => sample_random(spec.l, spec.r, spec.chain_len, bits_per_position, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::dd_from_protograph;

    fn has_twins(g: &TannerGraph) -> bool {
        let mut seen = std::collections::HashSet::new();
        (0..g.n_variables()).any(|v| {
            let mut c = g.variable_checks(v).to_vec();
            c.sort_unstable();
            !seen.insert(c)
        })
    }

    #[test]
    fn twin_guard_removes_size_two_stopping_sets() {
        let cp = CoupledProtograph::regular(3, 6, 20).unwrap();
        let plain = (0..40).filter(|&s| has_twins(&lift(&cp, 16, s, LiftOptions::default()).unwrap())).count();
        assert!(plain > 0);
        let opts = LiftOptions { avoid_twins: true, ..LiftOptions::default() };
        for s in 0..40 {
            let g = lift(&cp, 16, s, opts).unwrap();
            assert!(!has_twins(&g) && !g.has_parallel_edges());
            assert_eq!(g.empirical_dd(cp.m()).unwrap(), dd_from_protograph(&cp, 16).unwrap());
        }
    }

    #[test]
    fn lift_totals_and_dd() {
        let cp = CoupledProtograph::regular(3, 6, 100).unwrap();
        let g = lift(&cp, 2000, 1, LiftOptions::default()).unwrap();
        assert_eq!(g.n_variables(), 200_000);
        assert_eq!(g.n_edges(), 600_000);
        assert!(!g.has_parallel_edges());

        let cp = CoupledProtograph::regular(3, 6, 5).unwrap();
        let g = lift(&cp, 40, 9, LiftOptions::default()).unwrap();
        assert_eq!(g.empirical_dd(cp.m()).unwrap(), dd_from_protograph(&cp, 40).unwrap());
    }

    #[test]
    fn lift_edges_form_perfect_matchings_per_type() {
        let cp = CoupledProtograph::regular(3, 6, 4).unwrap();
        let copies = 16;
        let g = lift(&cp, copies * cp.k, 5, LiftOptions::default()).unwrap();
        let mut per_type: Vec<Vec<(u32, u32)>> = vec![Vec::new(); cp.m()];
        for e in g.edges() {
            per_type[e.edge_type.unwrap() as usize].push((e.var, e.check));
        }
        for (j, edges) in per_type.iter().enumerate() {
            let et = cp.edge_types[j];
            assert_eq!(edges.len(), copies);
            let mut vs: Vec<u32> = edges.iter().map(|e| e.0).collect();
            let mut cs: Vec<u32> = edges.iter().map(|e| e.1).collect();
            vs.sort_unstable();
            cs.sort_unstable();
            vs.dedup();
            cs.dedup();
            assert_eq!(vs.len(), copies);
            assert_eq!(cs.len(), copies);
            assert!(vs.iter().all(|&v| v as usize / copies == et.var));
            assert!(cs.iter().all(|&c| c as usize / copies == et.check));
        }
    }

    #[test]
    fn single_copy_lift_is_the_protograph() {
        let cp = CoupledProtograph::regular(3, 6, 3).unwrap();
        assert!(lift(&cp, 2, 0, LiftOptions::default()).is_err());
        let g = lift(&cp, 2, 0, LiftOptions { avoid_parallel_edges: false, avoid_twins: false, max_retries: 0 }).unwrap();
        for e in g.edges() {
            let et = cp.edge_types[e.edge_type.unwrap() as usize];
            assert_eq!((e.var as usize, e.check as usize), (et.var, et.check));
        }
    }

    #[test]
    fn random_ensemble_structure() {
        let g = sample_random(3, 6, 100, 512, 3).unwrap();
        assert_eq!(g.n_variables(), 51_200);
        assert_eq!(g.n_edges(), 153_600);
        assert!(!g.has_parallel_edges());
        for v in 0..g.n_variables() {
            let u = g.var_pos[v];
            let mut ps: Vec<u32> = g.variable_checks(v).iter().map(|&c| g.check_pos[c as usize]).collect();
            ps.sort_unstable();
            assert_eq!(ps, vec![u, u + 1, u + 2]);
        }
        let checks_per_pos = 256;
        for c in 0..g.n_checks() {
            assert!(g.check_degree(c) <= 6);
        }
        // sockets per position are conserved exactly
        let mut per_pos = vec![0usize; 103];
        for c in 0..g.n_checks() {
            per_pos[g.check_pos[c] as usize] += g.check_degree(c);
        }
        assert_eq!(per_pos[1], 512);
        assert_eq!(per_pos[2], 1024);
        assert_eq!(per_pos[50], 3 * 512);
        assert_eq!(per_pos[102], 512);
        // interior checks are full
        let interior = (10 - 1) * checks_per_pos;
        assert!((interior..interior + checks_per_pos).all(|c| g.check_degree(c) == 6));
        assert!(sample_random(3, 6, 10, 7, 0).is_err());
    }

    #[test]
    fn seeds_determine_graphs() {
        let a = sample_random(3, 6, 10, 64, 11).unwrap();
        let b = sample_random(3, 6, 10, 64, 11).unwrap();
        let c = sample_random(3, 6, 10, 64, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let cp = CoupledProtograph::regular(3, 6, 10).unwrap();
        let a = lift(&cp, 64, 11, LiftOptions::default()).unwrap();
        let b = lift(&cp, 64, 11, LiftOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn alist_shape() {
        let cp = CoupledProtograph::regular(3, 6, 3).unwrap();
        let g = lift(&cp, 4, 2, LiftOptions::default()).unwrap();
        let alist = g.to_alist();
        let lines: Vec<&str> = alist.lines().collect();
        assert_eq!(lines[0], "12 10");
        assert_eq!(lines[1], "3 6");
        assert_eq!(lines.len(), 4 + 12 + 10);
    }
}
