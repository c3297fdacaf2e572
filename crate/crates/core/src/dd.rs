//! Multi-edge-type degree distributions.
//!
//! In a coupled protograph every edge type appears exactly once, so a node's
//! multi-edge type is a set of edge types. A [`DdState`] maps each set to the
//! number of variable (check) nodes of that type, either as raw counts or as
//! fractions of `M`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::protograph::CoupledProtograph;
use crate::{Error, Result};

/// Counts smaller than this are treated as zero.
pub const CLAMP: f64 = 1e-12;

/// A set of edge types stored as a bit mask; bit `j` set means `d_j = 1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiEdgeTypeSet {
    words: Vec<u64>,
}

impl MultiEdgeTypeSet {
    pub fn empty(m: usize) -> Self {
        Self { words: vec![0; m.div_ceil(64).max(1)] }
    }

    pub fn from_types(m: usize, types: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(m);
        for j in types {
            s.insert(j);
        }
        s
    }

    pub fn insert(&mut self, j: usize) {
        self.words[j / 64] |= 1 << (j % 64);
    }

    pub fn remove(&mut self, j: usize) {
        self.words[j / 64] &= !(1 << (j % 64));
    }

    pub fn contains(&self, j: usize) -> bool {
        self.words.get(j / 64).is_some_and(|w| w >> (j % 64) & 1 == 1)
    }

    /// `|d|`, the node degree.
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// The edge type of a singleton set.
    pub fn singleton(&self) -> Option<usize> {
        if self.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }

    /// Hex digits of the mask, most significant first, `ceil(m/4)` wide.
    pub fn to_hex(&self, m: usize) -> String {
        let digits = m.div_ceil(4).max(1);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let nibble = (self.words[d / 16] >> ((d % 16) * 4)) & 0xF;
            let _ = write!(s, "{nibble:x}");
        }
        s
    }

    pub fn from_hex(m: usize, hex: &str) -> Result<Self> {
        let mut s = Self::empty(m);
        for (d, ch) in hex.chars().rev().enumerate() {
            let nibble = ch.to_digit(16).ok_or_else(|| Error::Parse(format!("bad hex digit {ch:?}")))? as u64;
            for b in 0..4 {
                if nibble >> b & 1 == 1 {
                    let j = d * 4 + b;
                    if j >= m {
                        return Err(Error::Parse(format!("edge type {j} beyond m={m}")));
                    }
                    s.insert(j);
                }
            }
        }
        Ok(s)
    }
}

impl fmt::Debug for MultiEdgeTypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Degree distribution of a (residual) coupled-protograph graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DdState {
    pub m: usize,
    pub var_counts: BTreeMap<MultiEdgeTypeSet, f64>,
    pub chk_counts: BTreeMap<MultiEdgeTypeSet, f64>,
    /// Checks that lost all their edges; tracked outside `chk_counts`.
    pub decoded_checks: f64,
    /// Counts are fractions of `M` rather than node counts.
    pub normalized: bool,
    /// BEC initialization has been applied.
    pub transmitted: bool,
}

/// Per-edge-type totals `V_{x_j}(1)`, `R_{x_j}(1)` and pair table `V_{x_j,x_k}(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCounts {
    pub var: Vec<f64>,
    pub chk: Vec<f64>,
    pairs: BTreeMap<(usize, usize), f64>,
}

impl EdgeCounts {
    /// `V_{x_j,x_k}(1)`; zero on the diagonal.
    pub fn pair(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 0.0;
        }
        let key = (j.min(k), j.max(k));
        self.pairs.get(&key).copied().unwrap_or(0.0)
    }
}

/// Full-graph DD of an `M`-bit-per-position lift of `cp`.
pub fn dd_from_protograph(cp: &CoupledProtograph, bits_per_position: usize) -> Result<DdState> {
    if bits_per_position == 0 || bits_per_position % cp.k != 0 {
        return Err(Error::InvalidParameter(format!(
            "M={bits_per_position} must be a positive multiple of k={}",
            cp.k
        )));
    }
    let copies = (bits_per_position / cp.k) as f64;
    let m = cp.m();
    let mut var_counts = BTreeMap::new();
    for types in &cp.variable_nodes {
        *var_counts.entry(MultiEdgeTypeSet::from_types(m, types.iter().copied())).or_insert(0.0) += copies;
    }
    let mut chk_counts = BTreeMap::new();
    for types in cp.check_nodes.iter().filter(|t| !t.is_empty()) {
        *chk_counts.entry(MultiEdgeTypeSet::from_types(m, types.iter().copied())).or_insert(0.0) += copies;
    }
    Ok(DdState { m, var_counts, chk_counts, decoded_checks: 0.0, normalized: false, transmitted: false })
}

impl DdState {
    /// Divides every count by `M`.
    pub fn normalize(&self, bits_per_position: usize) -> DdState {
        if self.normalized {
            return self.clone();
        }
        let s = 1.0 / bits_per_position as f64;
        DdState {
            m: self.m,
            var_counts: self.var_counts.iter().map(|(k, v)| (k.clone(), v * s)).collect(),
            chk_counts: self.chk_counts.iter().map(|(k, v)| (k.clone(), v * s)).collect(),
            decoded_checks: self.decoded_checks * s,
            normalized: true,
            transmitted: self.transmitted,
        }
    }

    /// Expected DD after the BEC removed every correctly received bit.
    pub fn bec_initialize(&self, epsilon: f64) -> Result<DdState> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("erasure probability {epsilon} outside [0,1]")));
        }
        if self.transmitted {
            return Err(Error::InvalidParameter("degree distribution was already transmitted".into()));
        }
        let mut var_counts = BTreeMap::new();
        for (d, &c) in &self.var_counts {
            let v = epsilon * c;
            if v >= CLAMP {
                var_counts.insert(d.clone(), v);
            }
        }
        let mut chk_counts: BTreeMap<MultiEdgeTypeSet, f64> = BTreeMap::new();
        let mut decoded = self.decoded_checks;
        for (d, &c) in &self.chk_counts {
            let types: Vec<usize> = d.iter().collect();
            let deg = types.len();
            assert!(deg < 32, "check degree {deg} too large for subset enumeration");
            for sub in 0u32..(1 << deg) {
                let kept = sub.count_ones() as i32;
                let w = epsilon.powi(kept) * (1.0 - epsilon).powi(deg as i32 - kept) * c;
                if sub == 0 {
                    decoded += w;
                    continue;
                }
                if w < CLAMP {
                    continue;
                }
                let set = MultiEdgeTypeSet::from_types(
                    self.m,
                    types.iter().enumerate().filter(|(b, _)| sub >> b & 1 == 1).map(|(_, &j)| j),
                );
                *chk_counts.entry(set).or_insert(0.0) += w;
            }
        }
        Ok(DdState { m: self.m, var_counts, chk_counts, decoded_checks: decoded, normalized: self.normalized, transmitted: true })
    }

    /// Total number (or fraction) of degree-one checks.
    pub fn deg1_total(&self) -> f64 {
        self.chk_counts.iter().filter(|(d, _)| d.len() == 1).map(|(_, c)| c).sum()
    }

    pub fn variable_total(&self) -> f64 {
        self.var_counts.values().sum()
    }

    pub fn check_total(&self) -> f64 {
        self.chk_counts.values().sum()
    }

    pub fn edge_counts(&self) -> EdgeCounts {
        let mut var = vec![0.0; self.m];
        let mut chk = vec![0.0; self.m];
        let mut pairs = BTreeMap::new();
        for (d, &c) in &self.var_counts {
            let types: Vec<usize> = d.iter().collect();
            for (a, &j) in types.iter().enumerate() {
                var[j] += c;
                for &k in &types[a + 1..] {
                    *pairs.entry((j, k)).or_insert(0.0) += c;
                }
            }
        }
        for (d, &c) in &self.chk_counts {
            for j in d.iter() {
                chk[j] += c;
            }
        }
        EdgeCounts { var, chk, pairs }
    }

    /// CSV dump with header `side,type_mask_hex,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("side,type_mask_hex,count\n");
        for (side, map) in [("var", &self.var_counts), ("chk", &self.chk_counts)] {
            for (d, c) in map {
                let _ = writeln!(out, "{side},{},{c:e}", d.to_hex(self.m));
            }
        }
        out
    }

    /// Parses [`DdState::to_csv`] output. `decoded_checks` is not part of the dump.
    pub fn from_csv(m: usize, csv: &str, normalized: bool, transmitted: bool) -> Result<DdState> {
        let mut var_counts = BTreeMap::new();
        let mut chk_counts = BTreeMap::new();
        for (n, line) in csv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let [side, hex, count] = fields[..] else {
                return Err(Error::Parse(format!("line {}: expected 3 fields", n + 1)));
            };
            let set = MultiEdgeTypeSet::from_hex(m, hex)?;
            let count: f64 = count.parse().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            match side {
                "var" => var_counts.insert(set, count),
                "chk" => chk_counts.insert(set, count),
                other => return Err(Error::Parse(format!("line {}: unknown side {other:?}", n + 1))),
            };
        }
        Ok(DdState { m, var_counts, chk_counts, decoded_checks: 0.0, normalized, transmitted })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(m: usize, one_based: &[usize]) -> MultiEdgeTypeSet {
        MultiEdgeTypeSet::from_types(m, one_based.iter().map(|j| j - 1))
    }

    #[test]
    fn protograph_dd_terms() {
        let cp = CoupledProtograph::regular(3, 6, 3).unwrap();
        let dd = dd_from_protograph(&cp, 1000).unwrap();
        assert_eq!(dd.var_counts.len(), 6);
        assert_eq!(dd.chk_counts.len(), 5);
        assert_eq!(dd.var_counts[&set(18, &[1, 2, 3])], 500.0);
        assert_eq!(dd.chk_counts[&set(18, &[1, 4])], 500.0);
        assert_eq!(dd.chk_counts[&set(18, &[3, 6, 8, 11, 13, 16])], 500.0);
        assert_eq!(dd.deg1_total(), 0.0);

        let unit = dd_from_protograph(&cp, cp.k).unwrap();
        assert!(unit.var_counts.values().chain(unit.chk_counts.values()).all(|&c| c == 1.0));
        assert!(dd_from_protograph(&cp, 7).is_err());
    }

    #[test]
    fn bec_splits_check_types() {
        let m = 18;
        let mut chk_counts = BTreeMap::new();
        chk_counts.insert(set(m, &[1, 4]), 500.0);
        let dd = DdState { m, var_counts: BTreeMap::new(), chk_counts, decoded_checks: 0.0, normalized: false, transmitted: false };
        let eps = 0.3;
        let out = dd.bec_initialize(eps).unwrap();
        assert!((out.chk_counts[&set(m, &[1, 4])] - eps * eps * 500.0).abs() < 1e-9);
        assert!((out.chk_counts[&set(m, &[1])] - eps * (1.0 - eps) * 500.0).abs() < 1e-9);
        assert!((out.chk_counts[&set(m, &[4])] - eps * (1.0 - eps) * 500.0).abs() < 1e-9);
        assert!((out.deg1_total() - 2.0 * eps * (1.0 - eps) * 500.0).abs() < 1e-9);
        assert!((out.decoded_checks - (1.0 - eps) * (1.0 - eps) * 500.0).abs() < 1e-9);
    }

    #[test]
    fn bec_extremes() {
        let cp = CoupledProtograph::regular(3, 6, 3).unwrap();
        let dd = dd_from_protograph(&cp, 100).unwrap();
        let same = dd.bec_initialize(1.0).unwrap();
        assert_eq!(same.var_counts, dd.var_counts);
        assert_eq!(same.chk_counts, dd.chk_counts);
        let none = dd.bec_initialize(0.0).unwrap();
        assert_eq!(none.variable_total(), 0.0);
        assert_eq!(none.check_total(), 0.0);
        assert!(dd.bec_initialize(1.5).is_err());
        assert!(dd.bec_initialize(-0.1).is_err());
        assert!(same.bec_initialize(0.5).is_err());
    }

    #[test]
    fn bec_mass_identity_exact_in_rationals() {
        use num_rational::Ratio;
        // sum over subsets of eps^|d'| (1-eps)^(|d|-|d'|) = 1, done in exact arithmetic.
        for (num, den) in [(1i128, 3i128), (45, 100), (48815, 100000), (0, 1), (1, 1)] {
            let eps = Ratio::new(num, den);
            for deg in 1..=6u32 {
                let mut total = Ratio::from_integer(0);
                for sub in 0u32..(1 << deg) {
                    let kept = sub.count_ones();
                    let mut w = Ratio::from_integer(1);
                    for _ in 0..kept {
                        w *= eps;
                    }
                    for _ in kept..deg {
                        w *= Ratio::from_integer(1) - eps;
                    }
                    total += w;
                }
                assert_eq!(total, Ratio::from_integer(1));
            }
        }
    }

    #[test]
    fn edge_counts_of_full_graph() {
        let cp = CoupledProtograph::regular(3, 6, 3).unwrap();
        let dd = dd_from_protograph(&cp, 1000).unwrap();
        let ec = dd.edge_counts();
        assert_eq!(ec.var[0], 500.0);
        assert_eq!(ec.pair(0, 1), 500.0);
        assert_eq!(ec.pair(1, 0), 500.0);
        assert_eq!(ec.pair(0, 3), 0.0);
        assert_eq!(ec.pair(2, 2), 0.0);
        assert_eq!(ec.var, ec.chk);
    }

    #[test]
    fn deg1_total_counts_singletons_only() {
        let m = 18;
        let mut chk_counts = BTreeMap::new();
        chk_counts.insert(set(m, &[7]), 0.3);
        chk_counts.insert(set(m, &[7, 8]), 1.0);
        let dd = DdState { m, var_counts: BTreeMap::new(), chk_counts, decoded_checks: 0.0, normalized: true, transmitted: true };
        assert_eq!(dd.deg1_total(), 0.3);
    }

    #[test]
    fn hex_layout() {
        let s = MultiEdgeTypeSet::from_types(18, [0, 3]);
        assert_eq!(s.to_hex(18), "00009");
        let wide = MultiEdgeTypeSet::from_types(130, [0, 64, 129]);
        assert_eq!(MultiEdgeTypeSet::from_hex(130, &wide.to_hex(130)).unwrap(), wide);
        assert!(MultiEdgeTypeSet::from_hex(18, "fffff").is_err());
    }

    proptest! {
        #[test]
        fn transmitted_dd_invariants(len in 1usize..8, eps in 0.0f64..=1.0) {
            let cp = CoupledProtograph::regular(3, 6, len).unwrap();
            let dd = dd_from_protograph(&cp, 200).unwrap();
            let out = dd.bec_initialize(eps).unwrap();
            // subset closure
            for d in out.chk_counts.keys() {
                prop_assert!(dd.chk_counts.keys().any(|orig| d.is_subset(orig)));
            }
            // probability mass, counting dropped checks
            let before = dd.check_total();
            prop_assert!((out.check_total() + out.decoded_checks - before).abs() <= 1e-12 * before);
            // edge balance
            let ec = out.edge_counts();
            for j in 0..out.m {
                prop_assert!((ec.var[j] - ec.chk[j]).abs() <= 1e-9 * (1.0 + ec.var[j]));
            }
            // csv round trip
            let back = DdState::from_csv(out.m, &out.to_csv(), out.normalized, true).unwrap();
            prop_assert_eq!(back.var_counts.len(), out.var_counts.len());
            for (k, v) in &out.chk_counts {
                prop_assert!((back.chk_counts[k] - v).abs() <= 1e-12 * v.abs());
            }
        }
    }
}
