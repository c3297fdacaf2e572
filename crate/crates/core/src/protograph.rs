//! Base protographs and their coupling into spatially coupled chains.
//!
//! Edge types of a coupled protograph are numbered position-major, then by
//! variable index inside the position, then by edge offset. Edge type `j`
//! (0-based) therefore belongs to variable `j / l` and lands on the check at
//! position `var_pos + j % l`. For the `(3,6,3)` chain this reproduces the
//! usual figure numbering `1..=18` (shifted by one).

use std::fmt::Write as _;

use num_rational::Ratio;

use crate::{Error, Result};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A small `(l,r)`-regular template graph. Multi-edges are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseProtograph {
    pub l: usize,
    pub r: usize,
    pub n_v: usize,
    pub n_c: usize,
    /// `(variable, check)` pairs, grouped by variable in socket order.
    pub edges: Vec<(usize, usize)>,
}

impl BaseProtograph {
    /// The smallest `(l,r)`-regular protograph: `r/gcd` variables and `l/gcd` checks.
    pub fn regular(l: usize, r: usize) -> Result<Self> {
        if l < 2 || r < l {
            return Err(Error::InvalidParameter(format!(
                "base protograph needs l >= 2 and r >= l, got l={l}, r={r}"
            )));
        }
        let g = gcd(l, r);
        let n_v = r / g;
        let n_c = l / g;
        let edges = (0..n_v * l).map(|e| (e / l, e % n_c)).collect();
        Self::from_edges(l, r, n_v, n_c, edges)
    }

    /// Validates an explicit edge list against the regularity invariants.
    pub fn from_edges(l: usize, r: usize, n_v: usize, n_c: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if l < 2 || r < l {
            return Err(Error::InvalidParameter(format!("need l >= 2 and r >= l, got l={l}, r={r}")));
        }
        let mut vdeg = vec![0usize; n_v];
        let mut cdeg = vec![0usize; n_c];
        for &(v, c) in &edges {
            if v >= n_v || c >= n_c {
                return Err(Error::InvalidParameter(format!("edge ({v},{c}) out of range")));
            }
            vdeg[v] += 1;
            cdeg[c] += 1;
        }
        if vdeg.iter().any(|&d| d != l) || cdeg.iter().any(|&d| d != r) {
            return Err(Error::InvalidParameter("base protograph is not (l,r)-regular".into()));
        }
        Ok(Self { l, r, n_v, n_c, edges })
    }

    /// Bits per position `k` once coupled.
    pub fn bits_per_position(&self) -> usize {
        self.n_v
    }

    /// Checks hit by variable `v`, in socket order.
    pub fn variable_checks(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect()
    }
}

/// One edge type of a coupled protograph. Node ids are 0-based, positions 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeType {
    pub var: usize,
    pub check: usize,
    pub var_pos: usize,
    pub check_pos: usize,
}

/// An `(l,r,L)_P` coupled protograph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoupledProtograph {
    pub l: usize,
    pub r: usize,
    pub chain_len: usize,
    /// Variables per position.
    pub k: usize,
    /// Checks per position.
    pub n_c: usize,
    pub edge_types: Vec<EdgeType>,
    /// Edge types of each variable node, ascending.
    pub variable_nodes: Vec<Vec<usize>>,
    /// Edge types of each check node, ascending.
    pub check_nodes: Vec<Vec<usize>>,
}

/// Couples `chain_len` copies of `base`: socket `o` of a variable at position
/// `u` attaches to the check at position `u + o` that the base edge of that
/// socket points to.
pub fn couple(base: &BaseProtograph, chain_len: usize) -> Result<CoupledProtograph> {
    if chain_len < 1 {
        return Err(Error::InvalidParameter("chain length must be >= 1".into()));
    }
    let l = base.l;
    let k = base.n_v;
    let n_c = base.n_c;
    let n_check_pos = chain_len + l - 1;
    let sockets: Vec<Vec<usize>> = (0..k).map(|v| base.variable_checks(v)).collect();

    let mut edge_types = Vec::with_capacity(l * k * chain_len);
    let mut variable_nodes = Vec::with_capacity(k * chain_len);
    let mut check_nodes = vec![Vec::new(); n_c * n_check_pos];
    for u in 1..=chain_len {
        for (v, checks) in sockets.iter().enumerate() {
            let var = (u - 1) * k + v;
            let mut own = Vec::with_capacity(l);
            for (o, &c) in checks.iter().enumerate() {
                let check_pos = u + o;
                let check = (check_pos - 1) * n_c + c;
                let id = edge_types.len();
                edge_types.push(EdgeType { var, check, var_pos: u, check_pos });
                check_nodes[check].push(id);
                own.push(id);
            }
            variable_nodes.push(own);
        }
    }

    // Sockets go to distinct positions, so this only trips on malformed input.
    for types in &variable_nodes {
        let mut seen: Vec<usize> = types.iter().map(|&j| edge_types[j].check).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("coupling would create a parallel edge".into()));
        }
    }

    Ok(CoupledProtograph { l, r: base.r, chain_len, k, n_c, edge_types, variable_nodes, check_nodes })
}

impl CoupledProtograph {
    /// Convenience: couple the minimal `(l,r)` base protograph.
    pub fn regular(l: usize, r: usize, chain_len: usize) -> Result<Self> {
        couple(&BaseProtograph::regular(l, r)?, chain_len)
    }

    /// Total number of edge types `m = l k L`.
    pub fn m(&self) -> usize {
        self.edge_types.len()
    }

    pub fn n_variables(&self) -> usize {
        self.variable_nodes.len()
    }

    pub fn n_checks(&self) -> usize {
        self.check_nodes.len()
    }

    pub fn variable_position(&self, var: usize) -> usize {
        var / self.k + 1
    }

    pub fn check_position(&self, check: usize) -> usize {
        check / self.n_c + 1
    }

    /// `1 - (#checks of nonzero degree) / (#variables)`.
    pub fn design_rate(&self) -> Ratio<i64> {
        let checks = self.check_nodes.iter().filter(|c| !c.is_empty()).count() as i64;
        Ratio::new(self.n_variables() as i64 - checks, self.n_variables() as i64)
    }

    /// One line per edge type: `type_id var_id chk_id var_pos chk_pos`, ids 1-based.
    pub fn adjacency_listing(&self) -> String {
        let mut out = String::new();
        for (j, e) in self.edge_types.iter().enumerate() {
            let _ = writeln!(out, "{} {} {} {} {}", j + 1, e.var + 1, e.check + 1, e.var_pos, e.check_pos);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_node_counts() {
        let b = BaseProtograph::regular(3, 6).unwrap();
        assert_eq!((b.n_v, b.n_c, b.edges.len()), (2, 1, 6));
        let b = BaseProtograph::regular(3, 3).unwrap();
        assert_eq!((b.n_v, b.n_c, b.edges.len()), (1, 1, 3));
        let b = BaseProtograph::regular(4, 8).unwrap();
        assert_eq!((b.n_v, b.n_c, b.edges.len()), (2, 1, 8));
        assert_eq!(b.n_v * b.l, b.n_c * b.r);
        let b = BaseProtograph::regular(4, 6).unwrap();
        assert_eq!((b.n_v, b.n_c), (3, 2));
    }

    #[test]
    fn base_rejects_bad_degrees() {
        assert!(BaseProtograph::regular(1, 6).is_err());
        assert!(BaseProtograph::regular(4, 3).is_err());
        assert!(BaseProtograph::from_edges(3, 6, 2, 1, vec![(0, 0); 6]).is_err());
    }

    #[test]
    fn coupled_3_6_3_matches_figure_numbering() {
        let cp = CoupledProtograph::regular(3, 6, 3).unwrap();
        assert_eq!(cp.n_variables(), 6);
        assert_eq!(cp.n_checks(), 5);
        assert_eq!(cp.m(), 18);
        // 1-based: x1x4, x2x5x7x10, x3x6x8x11x13x16, x9x12x14x17, x15x18
        let expected: Vec<Vec<usize>> = vec![
            vec![1, 4],
            vec![2, 5, 7, 10],
            vec![3, 6, 8, 11, 13, 16],
            vec![9, 12, 14, 17],
            vec![15, 18],
        ];
        let got: Vec<Vec<usize>> =
            cp.check_nodes.iter().map(|c| c.iter().map(|j| j + 1).collect()).collect();
        assert_eq!(got, expected);
        assert_eq!(cp.variable_nodes[0], vec![0, 1, 2]);
        assert_eq!(cp.variable_nodes[5], vec![15, 16, 17]);
    }

    #[test]
    fn single_position_chain() {
        let cp = CoupledProtograph::regular(3, 6, 1).unwrap();
        assert_eq!((cp.n_variables(), cp.n_checks(), cp.m()), (2, 3, 6));
        assert!(cp.check_nodes.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn interior_and_boundary_check_degrees() {
        let cp = CoupledProtograph::regular(4, 6, 10).unwrap();
        for (c, types) in cp.check_nodes.iter().enumerate() {
            let p = cp.check_position(c);
            if p >= cp.l && p <= cp.chain_len {
                assert_eq!(types.len(), cp.r, "check {c} at position {p}");
            } else {
                assert!(types.len() <= cp.r);
            }
        }
        for (j, e) in cp.edge_types.iter().enumerate() {
            assert!(e.check_pos >= e.var_pos && e.check_pos < e.var_pos + cp.l);
            assert!(cp.variable_nodes[e.var].contains(&j));
            assert!(cp.check_nodes[e.check].contains(&j));
        }
        let vsum: usize = cp.variable_nodes.iter().map(Vec::len).sum();
        let csum: usize = cp.check_nodes.iter().map(Vec::len).sum();
        assert_eq!(vsum, cp.m());
        assert_eq!(csum, cp.m());
        assert_eq!(cp.m(), cp.l * cp.k * cp.chain_len);
    }

    #[test]
    fn boundary_checks_of_3_6_chain_are_light() {
        let cp = CoupledProtograph::regular(3, 6, 8).unwrap();
        let degs: Vec<usize> = cp.check_nodes.iter().map(Vec::len).collect();
        assert_eq!(degs, vec![2, 4, 6, 6, 6, 6, 6, 6, 4, 2]);
    }

    #[test]
    fn design_rates() {
        let r = CoupledProtograph::regular(3, 6, 3).unwrap().design_rate();
        assert_eq!(r, Ratio::new(1, 6));
        let r = CoupledProtograph::regular(3, 6, 100).unwrap().design_rate();
        assert_eq!(r, Ratio::new(49, 100));
        let mut prev = Ratio::new(-100, 1);
        for len in [1, 2, 5, 10, 50, 1000] {
            let r = CoupledProtograph::regular(3, 6, len).unwrap().design_rate();
            assert!(r > prev && r < Ratio::new(1, 2));
            prev = r;
        }
        let far = CoupledProtograph::regular(3, 6, 100_000).unwrap().design_rate();
        assert!((0.5 - *far.numer() as f64 / *far.denom() as f64) < 1e-4);
    }

    #[test]
    fn adjacency_listing_golden() {
        let cp = CoupledProtograph::regular(3, 6, 3).unwrap();
        let listing = cp.adjacency_listing();
        let lines: Vec<&str> = listing.lines().collect();
        assert_eq!(lines.len(), 18);
        assert_eq!(lines[0], "1 1 1 1 1");
        assert_eq!(lines[3], "4 2 1 1 1");
        assert_eq!(lines[6], "7 3 2 2 2");
        assert_eq!(lines[17], "18 6 5 3 5");
        assert_eq!(listing, CoupledProtograph::regular(3, 6, 3).unwrap().adjacency_listing());
    }
}
