//! Batches of independent peeling trials and survivor-conditioned
//! statistics of the deg1 process `c1(tau) = C1(ell) / M`.
//!
//! Trials are seed-split, so the data (and every statistic, which is always
//! accumulated in trial order) do not depend on the number of threads.

use rayon::prelude::*;

use crate::ensemble::EnsembleSpec;
use crate::peeling::{run_trial, PeelOptions};
use crate::{Error, Result};

/// Deg1 counts of many trials on a common checkpoint grid.
#[derive(Debug, Clone)]
pub struct McEnsemble {
    pub bits_per_position: usize,
    /// Iterations between checkpoints.
    pub stride: u64,
    /// Per trial: `C1` at checkpoints `0, 1, ...` while the decoder is still running.
    pub alive: Vec<Vec<u32>>,
    /// Per trial: true if every erased bit was recovered.
    pub decoded: Vec<bool>,
}

/// Statistic of `c1` across the trials alive at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointStat {
    pub tau: f64,
    pub n_survivors: usize,
    pub mean: f64,
    /// Standard error of `mean`.
    pub stderr: f64,
    /// `M * Var[c1]`.
    pub delta1: f64,
}

/// Empirical covariance of `c1(tau)` and `c1(zeta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariancePoint {
    /// `tau - zeta`.
    pub lag: f64,
    pub phi1: f64,
    pub stderr: f64,
    pub n_survivors: usize,
}

/// Runs `trials` peeling trials and keeps their `C1` series.
pub fn run_trials(spec: &EnsembleSpec, bits_per_position: usize, epsilon: f64, trials: usize, seed: u64) -> Result<McEnsemble> {
    spec.validate_m(bits_per_position)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("erasure probability {epsilon} outside [0,1]")));
    }
    let cp = spec.coupled_protograph().ok();
    let opts = PeelOptions::for_m(bits_per_position);
    let runs: Vec<(Vec<u32>, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let traj = run_trial(spec, cp.as_ref(), bits_per_position, epsilon, seed, t, opts)?;
            let series = (0..traj.samples.len()).map_while(|i| traj.c1_at(i)).collect();
            Ok((series, traj.decoded()))
        })
        .collect::<Result<_>>()?;
    let (alive, decoded) = runs.into_iter().unzip();
    Ok(McEnsemble { bits_per_position, stride: opts.stride, alive, decoded })
}

impl McEnsemble {
    pub fn trials(&self) -> usize {
        self.alive.len()
    }

    pub fn tau(&self, checkpoint: usize) -> f64 {
        (checkpoint as u64 * self.stride) as f64 / self.bits_per_position as f64
    }

    /// Checkpoint closest to `tau`.
    pub fn checkpoint(&self, tau: f64) -> usize {
        (tau * self.bits_per_position as f64 / self.stride as f64).round().max(0.0) as usize
    }

    pub fn n_checkpoints(&self) -> usize {
        self.alive.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn word_errors(&self) -> usize {
        self.decoded.iter().filter(|&&d| !d).count()
    }

    fn fraction(&self, count: u32) -> f64 {
        count as f64 / self.bits_per_position as f64
    }

    /// Mean and variance of `c1` at checkpoint `i` over the trials alive there.
    pub fn stat(&self, i: usize) -> CheckpointStat {
        let values: Vec<f64> = self.alive.iter().filter_map(|s| s.get(i)).map(|&c| self.fraction(c)).collect();
        let n = values.len();
        let mean = if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN };
        let var = if n > 1 { values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { f64::NAN };
        CheckpointStat {
            tau: self.tau(i),
            n_survivors: n,
            mean,
            stderr: (var / n as f64).sqrt(),
            delta1: var * self.bits_per_position as f64,
        }
    }

    pub fn curve(&self) -> Vec<CheckpointStat> {
        (0..self.n_checkpoints()).map(|i| self.stat(i)).collect()
    }

    /// Covariance of `c1` at checkpoints `i` and `j`, over trials alive at the later one.
    pub fn covariance(&self, i: usize, j: usize) -> CovariancePoint {
        let later = i.max(j);
        let pairs: Vec<(f64, f64)> = self
            .alive
            .iter()
            .filter(|s| s.len() > later)
            .map(|s| (self.fraction(s[i]), self.fraction(s[j])))
            .collect();
        let n = pairs.len();
        let lag = self.tau(i) - self.tau(j);
        if n < 2 {
            return CovariancePoint { lag, phi1: f64::NAN, stderr: f64::NAN, n_survivors: n };
        }
        let nf = n as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
        let prods: Vec<f64> = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).collect();
        let phi1 = prods.iter().sum::<f64>() / (nf - 1.0);
        let mp = prods.iter().sum::<f64>() / nf;
        let sp = (prods.iter().map(|p| (p - mp).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        CovariancePoint { lag, phi1, stderr: sp / nf.sqrt(), n_survivors: n }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_thread_count() {
        let spec = EnsembleSpec::protograph(3, 6, 8);
        let a = run_trials(&spec, 100, 0.4, 12, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_trials(&spec, 100, 0.4, 12, 5).unwrap());
        assert_eq!(a.alive, b.alive);
        assert_eq!(a.decoded, b.decoded);
    }

    #[test]
    fn statistics_on_a_handmade_ensemble() {
        let ens = McEnsemble {
            bits_per_position: 10,
            stride: 1,
            alive: vec![vec![2, 4, 6], vec![4, 8], vec![6]],
            decoded: vec![true, true, false],
        };
        assert_eq!(ens.word_errors(), 1);
        let s0 = ens.stat(0);
        assert_eq!(s0.n_survivors, 3);
        assert!((s0.mean - 0.4).abs() < 1e-12);
        // sample variance of {0.2,0.4,0.6} is 0.04
        assert!((s0.delta1 - 0.4).abs() < 1e-12);
        let c = ens.covariance(1, 0);
        assert_eq!(c.n_survivors, 2);
        assert!((c.lag - 0.1).abs() < 1e-12);
        // pairs (0.4,0.2), (0.8,0.4): cov = 0.2*0.1*2/1 /... = 0.04
        assert!((c.phi1 - 0.04).abs() < 1e-12);
        assert_eq!(ens.stat(2).n_survivors, 1);
        assert!(ens.stat(2).delta1.is_nan());
    }
}
