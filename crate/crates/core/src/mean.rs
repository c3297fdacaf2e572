//! Expected graph evolution under peeling decoding.
//!
//! The normalized degree distribution (fractions of `M`) evolves in
//! normalized time `tau = ell / M` by the expected one-step change of the
//! peeling process. Per iteration a deg1 check of edge type `j` is picked
//! with probability `r(0_j) / c1`, its variable is removed, and every other
//! socket `k` of that variable removes one edge from a check holding socket
//! `k`, chosen in proportion to `r_d / R_{x_k}(1)`. The directly peeled check
//! is never counted as an indirect loss.
//!
//! Two [`MeanField`] models share one integrator: [`ProtographMeanField`]
//! (state = multi-edge types, one slot per subset of each protograph check)
//! and [`RandomMeanField`] (state = check counts per position and residual
//! degree, variable counts per position).

use rayon::prelude::*;

use crate::dd::{dd_from_protograph, DdState, MultiEdgeTypeSet, CLAMP};
use crate::ensemble::{EnsembleSpec, Family};
use crate::protograph::CoupledProtograph;
use crate::{Error, Result};

/// Outcome distribution of one socket of the removed variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocketHit {
    /// Probability that the socket's check currently has residual degree one.
    pub deg1: f64,
    /// Probability that it has residual degree two.
    pub deg2: f64,
}

/// One way a peeling iteration can go: which variable class gets removed and
/// what its remaining sockets hit.
#[derive(Debug, Clone, PartialEq)]
pub struct StepChoice {
    pub prob: f64,
    pub sockets: Vec<SocketHit>,
}

/// A mean-field model of the peeling process over a flat state vector.
pub trait MeanField: Send + Sync {
    fn dim(&self) -> usize;
    /// Variable degree `l`.
    fn variable_degree(&self) -> usize;
    /// Normalized state right after BEC transmission.
    fn initial_state(&self, epsilon: f64) -> Result<Vec<f64>>;
    /// `c1 = sum of deg1 check fractions`.
    fn deg1_total(&self, state: &[f64]) -> f64;
    fn variable_mass(&self, state: &[f64]) -> f64;
    /// `d state / d tau`. Fails with [`Error::Deg1Exhausted`] when `c1 <= 0`.
    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()>;
    /// Enumerates one iteration from `state` for the one-step variance proxy.
    fn step_choices(&self, state: &[f64]) -> Result<Vec<StepChoice>>;
}

/// Builds the mean-field model of an ensemble.
pub fn model_for(spec: &EnsembleSpec) -> Result<Box<dyn MeanField>> {
    spec.validate()?;
    Ok(match spec.family {
        Family::Protograph => Box::new(ProtographMeanField::new(spec.coupled_protograph()?)),
        Family::Random => Box::new(RandomMeanField::new(spec.l, spec.r, spec.chain_len)?),
    })
}

// ---------------------------------------------------------------------------
// protograph ensemble

/// Dense layout of the multi-edge DD of a coupled protograph.
///
/// Check `c` of degree `D` owns `2^D` consecutive slots indexed by local
/// subset masks (bit `b` = its `b`-th edge type); slot 0 collects decoded
/// checks. Variables follow, one slot per protograph variable.
#[derive(Debug, Clone)]
pub struct ProtographMeanField {
    cp: CoupledProtograph,
    check_offset: Vec<usize>,
    edge_check: Vec<u32>,
    edge_bit: Vec<u8>,
    var_base: usize,
}

impl ProtographMeanField {
    pub fn new(cp: CoupledProtograph) -> Self {
        let m = cp.m();
        let mut check_offset = Vec::with_capacity(cp.n_checks() + 1);
        let mut edge_check = vec![0u32; m];
        let mut edge_bit = vec![0u8; m];
        let mut next = 0;
        for (c, types) in cp.check_nodes.iter().enumerate() {
            assert!(types.len() <= 16, "check degree too large");
            check_offset.push(next);
            next += 1 << types.len();
            for (b, &j) in types.iter().enumerate() {
                edge_check[j] = c as u32;
                edge_bit[j] = b as u8;
            }
        }
        check_offset.push(next);
        Self { cp, check_offset, edge_check, edge_bit, var_base: next }
    }

    pub fn protograph(&self) -> &CoupledProtograph {
        &self.cp
    }

    fn check_slots(&self, c: usize) -> std::ops::Range<usize> {
        self.check_offset[c]..self.check_offset[c + 1]
    }

    /// Loads a normalized, transmitted DD into the dense layout.
    pub fn state_from_dd(&self, dd: &DdState) -> Result<Vec<f64>> {
        if dd.m != self.cp.m() {
            return Err(Error::InvalidParameter("degree distribution does not match the protograph".into()));
        }
        let mut state = vec![0.0; self.dim()];
        for (d, &count) in &dd.var_counts {
            let first = d.iter().next().ok_or_else(|| Error::InvalidParameter("empty variable type".into()))?;
            let v = self.cp.edge_types[first].var;
            let full = MultiEdgeTypeSet::from_types(dd.m, self.cp.variable_nodes[v].iter().copied());
            if *d != full {
                return Err(Error::InvalidParameter(format!("variable type {d:?} is not a protograph variable")));
            }
            state[self.var_base + v] += count;
        }
        for (d, &count) in &dd.chk_counts {
            let Some(first) = d.iter().next() else { continue };
            let c = self.edge_check[first] as usize;
            let mut mask = 0usize;
            for j in d.iter() {
                if self.edge_check[j] as usize != c {
                    return Err(Error::InvalidParameter(format!("check type {d:?} spans several protograph checks")));
                }
                mask |= 1 << self.edge_bit[j];
            }
            state[self.check_offset[c] + mask] += count;
        }
        Ok(state)
    }

    /// Converts a dense state back into a sparse DD snapshot.
    pub fn dd_from_state(&self, state: &[f64]) -> DdState {
        let m = self.cp.m();
        let mut dd = DdState {
            m,
            var_counts: Default::default(),
            chk_counts: Default::default(),
            decoded_checks: 0.0,
            normalized: true,
            transmitted: true,
        };
        for (v, types) in self.cp.variable_nodes.iter().enumerate() {
            let x = state[self.var_base + v];
            if x > 0.0 {
                dd.var_counts.insert(MultiEdgeTypeSet::from_types(m, types.iter().copied()), x);
            }
        }
        for (c, types) in self.cp.check_nodes.iter().enumerate() {
            let off = self.check_offset[c];
            dd.decoded_checks += state[off];
            for mask in 1..(1usize << types.len()) {
                let x = state[off + mask];
                if x > 0.0 {
                    let set = MultiEdgeTypeSet::from_types(
                        m,
                        types.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &j)| j),
                    );
                    dd.chk_counts.insert(set, x);
                }
            }
        }
        dd
    }

    /// Direct-removal probability of every edge type.
    fn direct_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        let c1 = self.deg1_total(state);
        if c1 <= 0.0 {
            return Err(Error::Deg1Exhausted);
        }
        Ok((0..self.cp.m())
            .map(|j| state[self.check_offset[self.edge_check[j] as usize] + (1 << self.edge_bit[j])] / c1)
            .collect())
    }

    /// `R_{x_b}(1)` for each local bit of check `c`.
    fn check_edge_totals(&self, state: &[f64], c: usize, totals: &mut [f64]) {
        let slots = &state[self.check_slots(c)];
        totals.fill(0.0);
        for (mask, &x) in slots.iter().enumerate().skip(1) {
            if x == 0.0 {
                continue;
            }
            let mut bits = mask;
            while bits != 0 {
                totals[bits.trailing_zeros() as usize] += x;
                bits &= bits - 1;
            }
        }
    }
}

impl MeanField for ProtographMeanField {
    fn dim(&self) -> usize {
        self.var_base + self.cp.n_variables()
    }

    fn variable_degree(&self) -> usize {
        self.cp.l
    }

    fn initial_state(&self, epsilon: f64) -> Result<Vec<f64>> {
        let dd = dd_from_protograph(&self.cp, self.cp.k)?.normalize(self.cp.k).bec_initialize(epsilon)?;
        self.state_from_dd(&dd)
    }

    fn deg1_total(&self, state: &[f64]) -> f64 {
        let mut c1 = 0.0;
        for (c, types) in self.cp.check_nodes.iter().enumerate() {
            let off = self.check_offset[c];
            for b in 0..types.len() {
                c1 += state[off + (1 << b)];
            }
        }
        c1
    }

    fn variable_mass(&self, state: &[f64]) -> f64 {
        state[self.var_base..].iter().sum()
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        let p_dir = self.direct_probs(state)?;
        out.fill(0.0);
        // Rate at which sockets of type k lose their edge indirectly.
        let mut hit = vec![0.0; self.cp.m()];
        for (v, types) in self.cp.variable_nodes.iter().enumerate() {
            let removal: f64 = types.iter().map(|&j| p_dir[j]).sum();
            out[self.var_base + v] = -removal;
            for &k in types {
                hit[k] = removal - p_dir[k];
            }
        }
        let mut totals = [0.0f64; 16];
        let mut rate = [0.0f64; 16];
        for (c, types) in self.cp.check_nodes.iter().enumerate() {
            let deg = types.len();
            if deg == 0 {
                continue;
            }
            self.check_edge_totals(state, c, &mut totals[..deg]);
            for (b, &k) in types.iter().enumerate() {
                rate[b] = if totals[b] > 0.0 { hit[k] / totals[b] } else { 0.0 };
            }
            let off = self.check_offset[c];
            for mask in 1..(1usize << deg) {
                let x = state[off + mask];
                if x == 0.0 {
                    continue;
                }
                let mut bits = mask;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let flow = rate[b] * x;
                    out[off + mask] -= flow;
                    out[off + (mask ^ (1 << b))] += flow;
                }
            }
            for (b, &k) in types.iter().enumerate() {
                out[off + (1 << b)] -= p_dir[k];
            }
        }
        Ok(())
    }

    fn step_choices(&self, state: &[f64]) -> Result<Vec<StepChoice>> {
        let p_dir = self.direct_probs(state)?;
        let mut hits = vec![SocketHit { deg1: 0.0, deg2: 0.0 }; self.cp.m()];
        let mut totals = [0.0f64; 16];
        for (c, types) in self.cp.check_nodes.iter().enumerate() {
            let deg = types.len();
            if deg == 0 {
                continue;
            }
            self.check_edge_totals(state, c, &mut totals[..deg]);
            let off = self.check_offset[c];
            for (b, &k) in types.iter().enumerate() {
                if totals[b] <= 0.0 {
                    continue;
                }
                let deg1 = state[off + (1 << b)];
                let deg2: f64 = (0..deg).filter(|&o| o != b).map(|o| state[off + (1 << b | 1 << o)]).sum();
                hits[k] = SocketHit { deg1: deg1 / totals[b], deg2: deg2 / totals[b] };
            }
        }
        let mut choices = Vec::new();
        for (j, &p) in p_dir.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let v = self.cp.edge_types[j].var;
            let sockets = self.cp.variable_nodes[v].iter().filter(|&&k| k != j).map(|&k| hits[k]).collect();
            choices.push(StepChoice { prob: p, sockets });
        }
        Ok(choices)
    }
}

// ---------------------------------------------------------------------------
// random ensemble

/// Mean-field model of the random `(l,r,L)` ensemble.
///
/// Check sockets at a position are exchangeable, so a check is described by
/// its position and residual degree. Variables never lose edges before
/// removal, so they are described by position alone.
#[derive(Debug, Clone)]
pub struct RandomMeanField {
    l: usize,
    r: usize,
    chain_len: usize,
}

impl RandomMeanField {
    pub fn new(l: usize, r: usize, chain_len: usize) -> Result<Self> {
        EnsembleSpec::new(Family::Random, l, r, chain_len)?;
        Ok(Self { l, r, chain_len })
    }

    fn n_check_pos(&self) -> usize {
        self.chain_len + self.l - 1
    }

    /// Slot of checks at (0-based) position `p` with residual degree `d`.
    pub fn check_slot(&self, p: usize, d: usize) -> usize {
        self.chain_len + p * (self.r + 1) + d
    }

    /// Variable positions (0-based) feeding check position `p`.
    fn window(&self, p: usize) -> std::ops::Range<usize> {
        p.saturating_sub(self.l - 1)..(p + 1).min(self.chain_len)
    }

    fn check_edges(&self, state: &[f64], p: usize) -> f64 {
        (1..=self.r).map(|d| d as f64 * state[self.check_slot(p, d)]).sum()
    }

    fn direct_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        let c1 = self.deg1_total(state);
        if c1 <= 0.0 {
            return Err(Error::Deg1Exhausted);
        }
        Ok((0..self.n_check_pos()).map(|p| state[self.check_slot(p, 1)] / c1).collect())
    }

    fn window_mass(&self, state: &[f64], p: usize) -> f64 {
        state[self.window(p)].iter().sum()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl MeanField for RandomMeanField {
    fn dim(&self) -> usize {
        self.chain_len + self.n_check_pos() * (self.r + 1)
    }

    fn variable_degree(&self) -> usize {
        self.l
    }

    fn initial_state(&self, epsilon: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("erasure probability {epsilon} outside [0,1]")));
        }
        let (l, r) = (self.l, self.r);
        let mut state = vec![0.0; self.dim()];
        state[..self.chain_len].fill(epsilon);
        let checks = l as f64 / r as f64;
        for p in 0..self.n_check_pos() {
            let feeding = self.window(p).len() as f64;
            // sockets filled with probability feeding/l, then survive the BEC with probability epsilon
            let q = epsilon * feeding / l as f64;
            for d in 0..=r {
                let w = checks * binomial(r, d) * q.powi(d as i32) * (1.0 - q).powi((r - d) as i32);
                state[self.check_slot(p, d)] = if d > 0 && w < CLAMP { 0.0 } else { w };
            }
        }
        Ok(state)
    }

    fn deg1_total(&self, state: &[f64]) -> f64 {
        (0..self.n_check_pos()).map(|p| state[self.check_slot(p, 1)]).sum()
    }

    fn variable_mass(&self, state: &[f64]) -> f64 {
        state[..self.chain_len].iter().sum()
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        let p_dir = self.direct_probs(state)?;
        out.fill(0.0);
        let np = self.n_check_pos();
        let mass: Vec<f64> = (0..np).map(|p| self.window_mass(state, p)).collect();
        for u in 0..self.chain_len {
            let v = state[u];
            if v == 0.0 {
                continue;
            }
            let removal: f64 =
                (u..u + self.l).filter(|&p| mass[p] > 0.0).map(|p| p_dir[p] * v / mass[p]).sum();
            out[u] = -removal;
        }
        for p in 0..np {
            let edges = self.check_edges(state, p);
            if edges <= 0.0 {
                continue;
            }
            let hit: f64 = self.window(p).map(|u| -out[u]).sum::<f64>() - p_dir[p];
            let rate = hit / edges;
            for d in 1..=self.r {
                let flow = rate * d as f64 * state[self.check_slot(p, d)];
                out[self.check_slot(p, d)] -= flow;
                out[self.check_slot(p, d - 1)] += flow;
            }
            out[self.check_slot(p, 1)] -= p_dir[p];
        }
        Ok(())
    }

    fn step_choices(&self, state: &[f64]) -> Result<Vec<StepChoice>> {
        let p_dir = self.direct_probs(state)?;
        let np = self.n_check_pos();
        let hits: Vec<SocketHit> = (0..np)
            .map(|p| {
                let edges = self.check_edges(state, p);
                if edges <= 0.0 {
                    SocketHit { deg1: 0.0, deg2: 0.0 }
                } else {
                    SocketHit {
                        deg1: state[self.check_slot(p, 1)] / edges,
                        deg2: 2.0 * state[self.check_slot(p, 2)] / edges,
                    }
                }
            })
            .collect();
        let mut choices = Vec::new();
        for p in 0..np {
            let mass = self.window_mass(state, p);
            if p_dir[p] <= 0.0 || mass <= 0.0 {
                continue;
            }
            for u in self.window(p) {
                if state[u] <= 0.0 {
                    continue;
                }
                let sockets = (u..u + self.l).filter(|&q| q != p).map(|q| hits[q]).collect();
                choices.push(StepChoice { prob: p_dir[p] * state[u] / mass, sockets });
            }
        }
        Ok(choices)
    }
}

// ---------------------------------------------------------------------------
// integration

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    /// All erased variables were recovered.
    VariablesExhausted,
    /// `c1` reached zero with variables left.
    Deg1Exhausted,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub step: f64,
    /// Halt once `c1` or the variable mass drops below this.
    pub halt_tol: f64,
    /// The step is capped at this multiple of `c1`.
    pub deg1_resolution: f64,
    /// Spacing of full-state snapshots in `tau`; `None` keeps none.
    pub snapshot_every: Option<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { step: 1e-3, halt_tol: 1e-7, deg1_resolution: 0.1, snapshot_every: None }
    }
}

/// Solution of the mean evolution from one initial state.
#[derive(Debug, Clone)]
pub struct MeanTrajectory {
    pub tau: Vec<f64>,
    pub c1: Vec<f64>,
    /// `(tau, state)` pairs at the requested spacing.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub halt: HaltReason,
    pub initial_variable_mass: f64,
    pub final_variable_mass: f64,
    pub step: f64,
    /// Largest negative round-off clamped to zero.
    pub max_projection: f64,
}

impl MeanTrajectory {
    /// True if `c1` stayed positive until (essentially) every variable was recovered.
    pub fn survived(&self) -> bool {
        self.halt == HaltReason::VariablesExhausted
    }

    pub fn final_tau(&self) -> f64 {
        *self.tau.last().unwrap_or(&0.0)
    }

    /// CSV `tau,c1_hat`, thinned to every `every`-th point.
    pub fn to_csv(&self, every: usize) -> String {
        let mut out = String::from("tau,c1_hat\n");
        for i in (0..self.tau.len()).step_by(every.max(1)) {
            out.push_str(&format!("{},{}\n", self.tau[i], self.c1[i]));
        }
        out
    }
}

fn axpy(out: &mut [f64], base: &[f64], h: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + h * d;
    }
}

/// Fixed-step classical Runge-Kutta integration from `state0` until `c1` or
/// the variable mass falls below the halt tolerance.
pub fn integrate(model: &dyn MeanField, state0: Vec<f64>, opts: IntegrateOptions) -> Result<MeanTrajectory> {
    if opts.step <= 0.0 || opts.deg1_resolution <= 0.0 {
        return Err(Error::InvalidParameter("integration step and resolution must be positive".into()));
    }
    let n = model.dim();
    if state0.len() != n {
        return Err(Error::InvalidParameter("state has the wrong dimension".into()));
    }
    let base = opts.step;
    let initial_mass = model.variable_mass(&state0);
    let mut y = state0;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tau = 0.0;
    let mut max_projection: f64 = 0.0;
    let mut taus = vec![0.0];
    let mut c1s = vec![model.deg1_total(&y)];
    let mut snapshots = Vec::new();
    let snap_every = opts.snapshot_every;
    let mut next_snap = snap_every.unwrap_or(f64::INFINITY);
    if snap_every.is_some() {
        snapshots.push((0.0, y.clone()));
    }

    let halt = loop {
        let c1 = model.deg1_total(&y);
        let mass = model.variable_mass(&y);
        if mass < opts.halt_tol {
            break HaltReason::VariablesExhausted;
        }
        if c1 < opts.halt_tol {
            break HaltReason::Deg1Exhausted;
        }
        // Below c1 ~ step a single step would remove every deg1 check; subdivide.
        let h = base.min(opts.deg1_resolution * c1);
        let stages = (|| -> Result<()> {
            model.rhs(&y, &mut k1)?;
            axpy(&mut tmp, &y, 0.5 * h, &k1);
            model.rhs(&tmp, &mut k2)?;
            axpy(&mut tmp, &y, 0.5 * h, &k2);
            model.rhs(&tmp, &mut k3)?;
            axpy(&mut tmp, &y, h, &k3);
            model.rhs(&tmp, &mut k4)
        })();
        match stages {
            Ok(()) => {}
            Err(Error::Deg1Exhausted) => break HaltReason::Deg1Exhausted,
            Err(e) => return Err(e),
        }
        for i in 0..n {
            tmp[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !tmp[i].is_finite() || tmp[i] < -opts.halt_tol {
                return Err(Error::Integration { tau: tau + h, reason: format!("state component {i} is {}", tmp[i]) });
            }
        }
        // Halting is judged before projection: projecting a collapsing c1
        // back onto zero would feed mass into a dead decoder.
        let halt_now = if model.variable_mass(&tmp) < opts.halt_tol {
            Some(HaltReason::VariablesExhausted)
        } else if model.deg1_total(&tmp) < opts.halt_tol {
            Some(HaltReason::Deg1Exhausted)
        } else {
            None
        };
        // round-off below the clamp is dropped
        for (yi, &ti) in y.iter_mut().zip(&tmp) {
            if ti < 0.0 {
                max_projection = max_projection.max(-ti);
            }
            *yi = if ti < CLAMP { 0.0 } else { ti };
        }
        tau += h;
        taus.push(tau);
        c1s.push(model.deg1_total(&y));
        if tau >= next_snap - 1e-9 * base {
            snapshots.push((tau, y.clone()));
            next_snap += snap_every.unwrap_or(f64::INFINITY);
        }
        if let Some(reason) = halt_now {
            break reason;
        }
    };

    let final_mass = model.variable_mass(&y);
    Ok(MeanTrajectory {
        tau: taus,
        c1: c1s,
        snapshots,
        halt,
        initial_variable_mass: initial_mass,
        final_variable_mass: final_mass,
        step: base,
        max_projection,
    })
}

/// Integrates the ensemble's mean evolution at erasure probability `epsilon`.
pub fn integrate_ensemble(model: &dyn MeanField, epsilon: f64, opts: IntegrateOptions) -> Result<MeanTrajectory> {
    integrate(model, model.initial_state(epsilon)?, opts)
}

// ---------------------------------------------------------------------------
// threshold

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProbe {
    pub epsilon: f64,
    pub survived: bool,
    pub halt: HaltReason,
    pub final_tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub epsilon_star: f64,
    /// Largest probe that survived.
    pub lo: f64,
    /// Smallest probe that failed.
    pub hi: f64,
    pub probes: Vec<ThresholdProbe>,
}

impl ThresholdResult {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn probe(model: &dyn MeanField, epsilon: f64, opts: IntegrateOptions) -> Result<ThresholdProbe> {
    let t = integrate_ensemble(model, epsilon, opts)?;
    Ok(ThresholdProbe { epsilon, survived: t.survived(), halt: t.halt, final_tau: t.final_tau() })
}

/// BP threshold by bisection with the mean evolution as survival oracle.
///
/// With several worker threads each round probes that many interior points
/// of the bracket concurrently; on one thread this is plain bisection.
pub fn find_threshold(model: &dyn MeanField, bracket: (f64, f64), tol: f64, opts: IntegrateOptions) -> Result<ThresholdResult> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("threshold tolerance must be positive".into()));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut probes: Vec<ThresholdProbe> =
        [lo, hi].par_iter().map(|&e| probe(model, e, opts)).collect::<Result<_>>()?;
    if !probes[0].survived || probes[1].survived {
        return Err(Error::NotBracketed { lo, hi });
    }
    let k = rayon::current_num_threads().max(1);
    while hi - lo > tol {
        let points: Vec<f64> = (1..=k).map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64).collect();
        let round: Vec<ThresholdProbe> = points.par_iter().map(|&e| probe(model, e, opts)).collect::<Result<_>>()?;
        for p in &round {
            if p.survived {
                lo = lo.max(p.epsilon);
            }
        }
        hi = round.iter().filter(|p| !p.survived && p.epsilon > lo).map(|p| p.epsilon).fold(hi, f64::min);
        probes.extend(round);
    }
    Ok(ThresholdResult { epsilon_star: 0.5 * (lo + hi), lo, hi, probes })
}

// ---------------------------------------------------------------------------
// steady state

#[derive(Debug, Clone, Copy)]
pub struct PlateauOptions {
    /// Largest `|d c1 / d tau|` still counted as flat.
    pub slope_tol: f64,
    /// Minimum length of the flat stretch in `tau`.
    pub dwell: f64,
    /// Central fraction of the flat window averaged for `c1(*)`.
    pub middle_fraction: f64,
}

impl Default for PlateauOptions {
    fn default() -> Self {
        Self { slope_tol: 1e-3, dwell: 2.0, middle_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Onset of the plateau.
    pub tau_star: f64,
    /// End of the flat stretch.
    pub tau_end: f64,
    /// Mean of `c1` over the central part of `[tau_star, tau_end]`.
    pub c1_star: f64,
    /// Averaging window.
    pub window: (f64, f64),
}

impl SteadyState {
    pub fn averaging_contains(&self, tau: f64) -> bool {
        tau >= self.window.0 && tau <= self.window.1
    }
}

/// Locates the steady-state plateau of `c1(tau)`.
pub fn steady_state(traj: &MeanTrajectory, opts: PlateauOptions) -> Result<SteadyState> {
    let n = traj.tau.len();
    if n < 3 {
        return Err(Error::NoPlateau("trajectory too short".into()));
    }
    let flat: Vec<bool> = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                return false;
            }
            let slope = (traj.c1[i + 1] - traj.c1[i - 1]) / (traj.tau[i + 1] - traj.tau[i - 1]);
            slope.abs() < opts.slope_tol
        })
        .collect();
    let mut i = 0;
    while i < n {
        if !flat[i] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < n && flat[j] {
            j += 1;
        }
        if traj.tau[j - 1] - traj.tau[i] >= opts.dwell {
            let (t0, t1) = (traj.tau[i], traj.tau[j - 1]);
            let pad = 0.5 * (1.0 - opts.middle_fraction) * (t1 - t0);
            let window = (t0 + pad, t1 - pad);
            let (sum, cnt) = (i..j)
                .filter(|&q| traj.tau[q] >= window.0 && traj.tau[q] <= window.1)
                .fold((0.0, 0usize), |(s, c), q| (s + traj.c1[q], c + 1));
            return Ok(SteadyState { tau_star: t0, tau_end: t1, c1_star: sum / cnt.max(1) as f64, window });
        }
        i = j;
    }
    Err(Error::NoPlateau(format!("no flat stretch of length {} in tau", opts.dwell)))
}

// ---------------------------------------------------------------------------
// gamma

#[derive(Debug, Clone, PartialEq)]
pub struct GammaFit {
    pub gamma: f64,
    /// `(delta_epsilon, c1_star)` probes.
    pub points: Vec<(f64, f64)>,
    /// Root-mean-square residual relative to the mean plateau height.
    pub relative_residual: f64,
}

/// Least-squares slope through the origin of `c1(*)` against `epsilon* - epsilon`.
pub fn estimate_gamma(
    model: &dyn MeanField,
    epsilon_star: f64,
    deltas: &[f64],
    opts: IntegrateOptions,
    plateau: PlateauOptions,
    max_residual: f64,
) -> Result<GammaFit> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("need at least one probe".into()));
    }
    let points: Vec<(f64, f64)> = deltas
        .par_iter()
        .map(|&d| {
            let traj = integrate_ensemble(model, epsilon_star - d, opts)?;
            Ok((d, steady_state(&traj, plateau)?.c1_star))
        })
        .collect::<Result<_>>()?;
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let gamma = sxy / sxx;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let rms = (points.iter().map(|(x, y)| (y - gamma * x).powi(2)).sum::<f64>() / points.len() as f64).sqrt();
    let relative_residual = rms / mean_y;
    if relative_residual > max_residual {
        return Err(Error::PoorFit(format!(
            "c1(*) is not linear in the gap: relative residual {relative_residual:.3} > {max_residual}"
        )));
    }
    Ok(GammaFit { gamma, points, relative_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto(len: usize) -> ProtographMeanField {
        ProtographMeanField::new(CoupledProtograph::regular(3, 6, len).unwrap())
    }

    #[test]
    fn initial_states_match_dd() {
        let model = proto(3);
        let s = model.initial_state(0.4).unwrap();
        assert!((model.variable_mass(&s) - 0.4 * 3.0).abs() < 1e-12);
        let dd = model.dd_from_state(&s);
        let direct = dd_from_protograph(model.protograph(), 2).unwrap().normalize(2).bec_initialize(0.4).unwrap();
        assert!((dd.deg1_total() - direct.deg1_total()).abs() < 1e-12);
        assert_eq!(dd.chk_counts.len(), direct.chk_counts.len());

        let rnd = RandomMeanField::new(3, 6, 10).unwrap();
        let s = rnd.initial_state(0.4).unwrap();
        assert!((rnd.variable_mass(&s) - 4.0).abs() < 1e-12);
        // edge balance per position
        for p in 0..12 {
            let checks = rnd.check_edges(&s, p);
            assert!((checks - rnd.window_mass(&s, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_last_peel() {
        // one deg1 check of type {0} and its variable holding types {0,1,2},
        // whose other sockets sit on checks of degree >= 3.
        let model = proto(3);
        let mut s = vec![0.0; model.dim()];
        let cp = model.protograph().clone();
        s[model.var_base] = 1.0;
        let c0 = model.edge_check[0] as usize;
        s[model.check_offset[c0] + (1 << model.edge_bit[0])] = 1.0;
        for k in [1usize, 2] {
            let c = model.edge_check[k] as usize;
            let full = (1 << cp.check_nodes[c].len()) - 1;
            s[model.check_offset[c] + full] = 1.0;
        }
        let mut d = vec![0.0; model.dim()];
        model.rhs(&s, &mut d).unwrap();
        assert!((d[model.var_base] + 1.0).abs() < 1e-12);
        assert!((model.deg1_total(&d) + 1.0).abs() < 1e-12);
        let pmf_choices = model.step_choices(&s).unwrap();
        assert_eq!(pmf_choices.len(), 1);
        assert!(pmf_choices[0].sockets.iter().all(|h| h.deg1 == 0.0 && h.deg2 == 0.0));
    }

    #[test]
    fn exhausted_deg1_is_signalled() {
        let model = proto(3);
        let s = model.initial_state(1.0).unwrap();
        let mut d = vec![0.0; model.dim()];
        assert!(matches!(model.rhs(&s, &mut d), Err(Error::Deg1Exhausted)));
    }

    fn check_conservation(model: &dyn MeanField, eps: f64) {
        let s = model.initial_state(eps).unwrap();
        let mut d = vec![0.0; model.dim()];
        model.rhs(&s, &mut d).unwrap();
        let dv = model.variable_mass(&d);
        assert!((dv + 1.0).abs() < 1e-12, "variable mass derivative {dv}");
    }

    #[test]
    fn one_variable_per_iteration() {
        check_conservation(&proto(10), 0.45);
        check_conservation(&RandomMeanField::new(3, 6, 10).unwrap(), 0.45);
    }

    #[test]
    fn edge_balance_derivative_vanishes() {
        let model = proto(6);
        let cp = model.protograph().clone();
        for eps in [0.3, 0.45, 0.6] {
            let s = model.initial_state(eps).unwrap();
            let mut d = vec![0.0; model.dim()];
            model.rhs(&s, &mut d).unwrap();
            let dd = model.dd_from_state(&d);
            // dd's maps hold the derivative; balance compares var and chk edge counts
            let mut var = vec![0.0; cp.m()];
            for (v, types) in cp.variable_nodes.iter().enumerate() {
                for &j in types {
                    var[j] += d[model.var_base + v];
                }
            }
            let mut chk = vec![0.0; cp.m()];
            for (c, types) in cp.check_nodes.iter().enumerate() {
                for mask in 1..(1usize << types.len()) {
                    for (b, &j) in types.iter().enumerate() {
                        if mask >> b & 1 == 1 {
                            chk[j] += d[model.check_offset[c] + mask];
                        }
                    }
                }
            }
            for j in 0..cp.m() {
                assert!((var[j] - chk[j]).abs() < 1e-12, "type {j}: {} vs {}", var[j], chk[j]);
            }
            let _ = dd;
        }
    }

    #[test]
    fn random_threshold_and_monotonicity() {
        let model = RandomMeanField::new(3, 6, 30).unwrap();
        let res = find_threshold(&model, (0.0, 0.5), 1e-3, IntegrateOptions::default()).unwrap();
        assert!((res.epsilon_star - 0.48815).abs() < 1e-3, "{}", res.epsilon_star);
        assert!(res.width() <= 1e-3);
        for p in &res.probes {
            if p.survived && p.epsilon >= 0.01 {
                assert!(probe(&model, p.epsilon - 0.01, IntegrateOptions::default()).unwrap().survived);
            }
        }
        let bad = find_threshold(&model, (0.49, 0.5), 1e-3, IntegrateOptions::default());
        assert!(matches!(bad, Err(Error::NotBracketed { .. })));
    }

    #[test]
    fn trajectory_invariants() {
        let model = RandomMeanField::new(3, 6, 30).unwrap();
        let t = integrate_ensemble(&model, 0.45, IntegrateOptions::default()).unwrap();
        assert!(t.survived());
        assert!(t.c1.iter().all(|&c| c >= 0.0));
        assert!(t.final_tau() <= 0.45 * 30.0 + 1e-9);
        // one variable per unit time
        assert!((t.final_tau() - (t.initial_variable_mass - t.final_variable_mass)).abs() < 1e-6);
        let dead = integrate_ensemble(&model, 0.5, IntegrateOptions::default()).unwrap();
        assert_eq!(dead.halt, HaltReason::Deg1Exhausted);
        assert!(dead.final_variable_mass > 1.0);
    }

    #[test]
    fn step_refinement_moves_plateau_little() {
        let model = RandomMeanField::new(3, 6, 40).unwrap();
        let plateau = |step| {
            let t = integrate_ensemble(&model, 0.45, IntegrateOptions { step, ..Default::default() }).unwrap();
            steady_state(&t, PlateauOptions::default()).unwrap().c1_star
        };
        let (a, b) = (plateau(1e-3), plateau(5e-4));
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn snapshots_follow_the_requested_spacing() {
        let model = RandomMeanField::new(3, 6, 10).unwrap();
        let t = integrate_ensemble(&model, 0.3, IntegrateOptions { snapshot_every: Some(0.5), ..Default::default() }).unwrap();
        assert!(t.snapshots.len() >= 5);
        for w in t.snapshots.windows(2) {
            assert!((w[1].0 - w[0].0 - 0.5).abs() < 1e-6);
        }
        assert!(t.to_csv(100).starts_with("tau,c1_hat\n0,"));
    }

    #[test]
    fn gamma_fit_rejects_curvature() {
        let model = RandomMeanField::new(3, 6, 40).unwrap();
        let fit = estimate_gamma(&model, 0.48815, &[0.02, 0.04], IntegrateOptions::default(), PlateauOptions::default(), 0.05)
            .unwrap();
        assert!(fit.gamma > 3.5 && fit.gamma < 5.0, "{}", fit.gamma);
        let strict = estimate_gamma(&model, 0.48815, &[0.02, 0.04], IntegrateOptions::default(), PlateauOptions::default(), 1e-6);
        assert!(matches!(strict, Err(Error::PoorFit(_))));
    }
}
