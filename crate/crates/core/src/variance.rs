//! Variance of the deg1 process.
//!
//! The analytic proxy takes `delta1(tau) ~ Var[Delta1]`, the variance of the
//! one-iteration change of `C1` drawn from the mean state at `tau`. The
//! empirical side measures `M * Var[c1(tau)]` and the time covariance
//! `phi1(tau, zeta)` over surviving Monte Carlo trials, and fits an
//! exponential decay `phi1 ~ (delta1/M) exp(-theta |tau - zeta|)`.

use crate::mean::{MeanField, MeanTrajectory, SteadyState};
use crate::montecarlo::{CovariancePoint, McEnsemble};
use crate::{Error, Result};

/// Below this many survivors a Monte Carlo variance is flagged as unreliable.
pub const MIN_SURVIVORS: usize = 30;

/// Distribution of the change of `C1` over one peeling iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepPmf {
    l: usize,
    /// `probs[i]` is the probability of `Delta1 = i - l`.
    probs: Vec<f64>,
}

impl OneStepPmf {
    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        -(self.l as i64)..=self.l as i64 - 1
    }

    pub fn prob(&self, delta: i64) -> f64 {
        let i = delta + self.l as i64;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|d| d as f64 * self.prob(d)).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let second: f64 = self.support().map(|d| (d as f64).powi(2) * self.prob(d)).sum();
        (second - m * m).max(0.0)
    }
}

/// Enumerates one peeling iteration from the mean state.
///
/// The direct removal contributes `-1`; each other socket of the removed
/// variable contributes `-1` if it hits a deg1 check and `+1` if it hits a
/// deg2 check, independently across sockets.
pub fn one_step_pmf(model: &dyn MeanField, state: &[f64]) -> Result<OneStepPmf> {
    let l = model.variable_degree();
    let mut probs = vec![0.0; 2 * l];
    let mut dist = vec![0.0; 2 * l + 1];
    let mut next = vec![0.0; 2 * l + 1];
    for choice in model.step_choices(state)? {
        dist.fill(0.0);
        // index i <-> Delta1 = i - l
        dist[l - 1] = 1.0;
        for hit in &choice.sockets {
            let stay = 1.0 - hit.deg1 - hit.deg2;
            next.fill(0.0);
            for i in 0..dist.len() {
                let p = dist[i];
                if p == 0.0 {
                    continue;
                }
                if i > 0 {
                    next[i - 1] += p * hit.deg1;
                }
                next[i] += p * stay;
                if i + 1 < next.len() {
                    next[i + 1] += p * hit.deg2;
                }
            }
            std::mem::swap(&mut dist, &mut next);
        }
        for (acc, &p) in probs.iter_mut().zip(&dist) {
            *acc += choice.prob * p;
        }
        debug_assert!(dist[2 * l] == 0.0);
    }
    Ok(OneStepPmf { l, probs })
}

/// Analytic `delta1` along the snapshots of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta1Curve {
    /// `(tau, delta1)` at each snapshot with a live decoder.
    pub points: Vec<(f64, f64)>,
    /// Mean over the snapshots inside the plateau's averaging window.
    pub delta1_star: f64,
}

impl Delta1Curve {
    /// Linear interpolation at `tau`; `None` outside the sampled range.
    pub fn at(&self, tau: f64) -> Option<f64> {
        let k = self.points.partition_point(|p| p.0 < tau);
        if k == 0 {
            return self.points.first().filter(|p| (p.0 - tau).abs() < 1e-9).map(|p| p.1);
        }
        let (a, b) = (self.points[k - 1], *self.points.get(k)?);
        Some(a.1 + (b.1 - a.1) * (tau - a.0) / (b.0 - a.0))
    }
}

/// Evaluates the one-step variance at every snapshot of `traj`.
pub fn estimate_delta1(model: &dyn MeanField, traj: &MeanTrajectory, plateau: &SteadyState) -> Result<Delta1Curve> {
    if traj.snapshots.is_empty() {
        return Err(Error::InsufficientData("trajectory has no snapshots".into()));
    }
    let mut points = Vec::with_capacity(traj.snapshots.len());
    for (tau, state) in &traj.snapshots {
        match one_step_pmf(model, state) {
            Ok(pmf) => points.push((*tau, pmf.variance())),
            Err(Error::Deg1Exhausted) => break,
            Err(e) => return Err(e),
        }
    }
    let inside: Vec<f64> = points.iter().filter(|p| plateau.averaging_contains(p.0)).map(|p| p.1).collect();
    if inside.is_empty() {
        return Err(Error::NoPlateau("no snapshot inside the plateau window".into()));
    }
    let delta1_star = inside.iter().sum::<f64>() / inside.len() as f64;
    Ok(Delta1Curve { points, delta1_star })
}

/// Monte Carlo `delta1` at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McDelta1Point {
    pub tau: f64,
    pub delta1: f64,
    pub n_survivors: usize,
}

impl McDelta1Point {
    pub fn reliable(&self) -> bool {
        self.n_survivors >= MIN_SURVIVORS
    }
}

/// `delta1(tau) = M Var[c1(tau)]` over the trials alive at each checkpoint.
pub fn monte_carlo_delta1(ens: &McEnsemble) -> Result<Vec<McDelta1Point>> {
    if ens.trials() < 100 {
        return Err(Error::InsufficientData(format!("{} trials, need at least 100", ens.trials())));
    }
    Ok(ens
        .curve()
        .into_iter()
        .filter(|s| s.n_survivors >= 2)
        .map(|s| McDelta1Point { tau: s.tau, delta1: s.delta1, n_survivors: s.n_survivors })
        .collect())
}

/// Plateau average of the Monte Carlo curve over `[from, to]`, skipping unreliable points.
pub fn plateau_average(points: &[McDelta1Point], from: f64, to: f64) -> Result<f64> {
    let inside: Vec<f64> =
        points.iter().filter(|p| p.tau >= from && p.tau <= to && p.reliable()).map(|p| p.delta1).collect();
    if inside.is_empty() {
        return Err(Error::InsufficientData(format!("no reliable checkpoint in [{from}, {to}]")));
    }
    Ok(inside.iter().sum::<f64>() / inside.len() as f64)
}

/// CSV `tau,delta1_analytic,delta1_mc,n_survivors`; the analytic column is
/// interpolated onto the Monte Carlo grid and left empty where undefined.
pub fn delta1_csv(analytic: &Delta1Curve, mc: &[McDelta1Point]) -> String {
    let mut out = String::from("tau,delta1_analytic,delta1_mc,n_survivors\n");
    for p in mc {
        let a = analytic.at(p.tau).map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{a},{},{}\n", p.tau, p.delta1, p.n_survivors));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaOptions {
    /// Spacing of the lag grid in `tau`.
    pub lag_step: f64,
    pub max_lag: f64,
    /// Points below this many standard errors are noise.
    pub noise_floor: f64,
    pub min_lags: usize,
    /// Largest accepted RMS residual of `ln phi1`.
    pub max_residual: f64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self { lag_step: 0.1, max_lag: 6.0, noise_floor: 2.0, min_lags: 5, max_residual: 0.5 }
    }
}

/// Covariance series around one anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSeries {
    pub zeta: f64,
    /// Points ordered by lag, negative lags first.
    pub points: Vec<CovariancePoint>,
}

impl AnchorSeries {
    /// CSV `lag,phi1,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,phi1,stderr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.lag, p.phi1, p.stderr));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFit {
    pub theta: f64,
    /// `M` times the fitted zero-lag covariance.
    pub delta1_star: f64,
    /// RMS residual of the log-linear regression.
    pub residual: f64,
    /// Largest lag used.
    pub window: f64,
    /// `(|lag|, phi1)` pairs entering the regression.
    pub used: Vec<(f64, f64)>,
    pub anchors: Vec<AnchorSeries>,
}

/// `phi1(zeta + u, zeta)` for `u` on a symmetric lag grid.
pub fn covariance_series(ens: &McEnsemble, zeta: f64, opts: &ThetaOptions) -> AnchorSeries {
    let z = ens.checkpoint(zeta);
    let step = ens.checkpoint(opts.lag_step).max(1);
    let n_lags = (opts.max_lag / opts.lag_step).round() as i64;
    let points = (-n_lags..=n_lags)
        .filter_map(|k| {
            let i = z as i64 + k * step as i64;
            (i >= 0).then(|| ens.covariance(i as usize, z))
        })
        .filter(|p| p.n_survivors >= MIN_SURVIVORS)
        .collect();
    AnchorSeries { zeta: ens.tau(z), points }
}

/// Log-linear fit of `phi1` against `|tau - zeta|`, pooled over anchors and
/// both lag signs, on the lags whose estimate clears the noise floor at every
/// smaller lag.
pub fn fit_theta(ens: &McEnsemble, anchors: &[f64], opts: ThetaOptions) -> Result<CovarianceFit> {
    if ens.trials() < 1000 {
        return Err(Error::InsufficientData(format!("{} trials, need at least 1000", ens.trials())));
    }
    let series: Vec<AnchorSeries> = anchors.iter().map(|&z| covariance_series(ens, z, &opts)).collect();
    let mut used = Vec::new();
    let mut usable_lags = std::collections::BTreeSet::new();
    for s in &series {
        for sign in [-1.0, 1.0] {
            let mut side: Vec<&CovariancePoint> = s.points.iter().filter(|p| p.lag * sign >= -1e-12).collect();
            side.sort_by(|a, b| a.lag.abs().total_cmp(&b.lag.abs()));
            for p in side {
                if !(p.phi1 > opts.noise_floor * p.stderr) {
                    break;
                }
                used.push((p.lag.abs(), p.phi1));
                usable_lags.insert((p.lag.abs() / opts.lag_step).round() as i64);
            }
        }
    }
    if usable_lags.len() < opts.min_lags {
        return Err(Error::InsufficientData(format!(
            "{} usable lags above the noise floor, need {}",
            usable_lags.len(),
            opts.min_lags
        )));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (used.iter().map(|p| (p.1.ln() - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let theta = -slope;
    if !(theta > 0.0) {
        return Err(Error::PoorFit(format!("covariance does not decay (slope {slope})")));
    }
    if residual > opts.max_residual {
        return Err(Error::PoorFit(format!("log-linear residual {residual:.3} exceeds {}", opts.max_residual)));
    }
    let window = used.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(CovarianceFit {
        theta,
        delta1_star: intercept.exp() * ens.bits_per_position as f64,
        residual,
        window,
        used,
        anchors: series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean::{integrate_ensemble, IntegrateOptions, PlateauOptions, ProtographMeanField, RandomMeanField};
    use crate::protograph::CoupledProtograph;

    #[test]
    fn pmf_normalized_with_bounded_support() {
        let model = ProtographMeanField::new(CoupledProtograph::regular(3, 6, 6).unwrap());
        let s = model.initial_state(0.45).unwrap();
        let pmf = one_step_pmf(&model, &s).unwrap();
        assert!((pmf.total() - 1.0).abs() < 1e-10);
        assert_eq!(pmf.support(), -3..=2);
        assert_eq!(pmf.prob(2), 0.0);
        assert!(pmf.variance() > 0.0);
    }

    #[test]
    fn pmf_mean_matches_rhs() {
        let models: Vec<Box<dyn MeanField>> = vec![
            Box::new(ProtographMeanField::new(CoupledProtograph::regular(3, 6, 8).unwrap())),
            Box::new(RandomMeanField::new(3, 6, 8).unwrap()),
            Box::new(ProtographMeanField::new(CoupledProtograph::regular(4, 8, 5).unwrap())),
        ];
        for model in &models {
            let traj = integrate_ensemble(
                model.as_ref(),
                0.42,
                IntegrateOptions { snapshot_every: Some(0.5), ..Default::default() },
            )
            .unwrap();
            let mut d = vec![0.0; model.dim()];
            for (_, s) in traj.snapshots.iter().take(6) {
                let pmf = one_step_pmf(model.as_ref(), s).unwrap();
                model.rhs(s, &mut d).unwrap();
                assert!((pmf.total() - 1.0).abs() < 1e-10);
                assert!((pmf.mean() - model.deg1_total(&d)).abs() < 1e-9, "{} vs {}", pmf.mean(), model.deg1_total(&d));
            }
        }
    }

    #[test]
    fn deterministic_step_has_zero_variance() {
        // one variable on a deg1 check, its other sockets on full checks
        let model = RandomMeanField::new(3, 6, 4).unwrap();
        let mut s = vec![0.0; model.dim()];
        s[1] = 1.0;
        s[model.check_slot(1, 1)] = 1.0;
        s[model.check_slot(2, 6)] = 1.0;
        s[model.check_slot(3, 6)] = 1.0;
        let pmf = one_step_pmf(&model, &s).unwrap();
        assert!((pmf.prob(-1) - 1.0).abs() < 1e-12);
        assert_eq!(pmf.variance(), 0.0);
    }

    #[test]
    fn analytic_curve_is_positive_below_threshold() {
        let model = RandomMeanField::new(3, 6, 40).unwrap();
        let traj =
            integrate_ensemble(&model, 0.45, IntegrateOptions { snapshot_every: Some(0.25), ..Default::default() }).unwrap();
        let plateau = crate::mean::steady_state(&traj, PlateauOptions::default()).unwrap();
        let curve = estimate_delta1(&model, &traj, &plateau).unwrap();
        assert!(curve.points.iter().all(|p| p.1 >= 0.0));
        assert!(curve.delta1_star > 0.0);
        let t = curve.points[3].0;
        assert!((curve.at(t).unwrap() - curve.points[3].1).abs() < 1e-12);
    }

    #[test]
    fn theta_fit_on_synthetic_covariance() {
        // trials of an AR(1) sequence with unit-time correlation exp(-0.6)
        use rand::Rng;
        let mut rng = crate::rng::substream(1, crate::rng::Purpose::Peel, 0, 0);
        let per_unit = 10usize;
        let rho = (-0.6f64 / per_unit as f64).exp();
        let alive: Vec<Vec<u32>> = (0..1500)
            .map(|_| {
                let mut x: f64 = {
                    let u: f64 = rng.gen();
                    let v: f64 = rng.gen();
                    (-2.0 * u.max(1e-300).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
                };
                (0..200)
                    .map(|_| {
                        let u: f64 = rng.gen();
                        let v: f64 = rng.gen();
                        let z = (-2.0 * u.max(1e-300).ln()).sqrt() * (std::f64::consts::TAU * v).cos();
                        x = rho * x + (1.0 - rho * rho).sqrt() * z;
                        (1000.0 + 30.0 * x).round() as u32
                    })
                    .collect()
            })
            .collect();
        let ens = McEnsemble { bits_per_position: 1000, stride: 100, alive, decoded: vec![true; 1500] };
        let fit = fit_theta(&ens, &[8.0, 10.0], ThetaOptions::default()).unwrap();
        assert!((fit.theta - 0.6).abs() < 0.1, "{}", fit.theta);
        assert!((fit.delta1_star - 0.9).abs() < 0.15, "{}", fit.delta1_star);
        assert!(fit.anchors[0].to_csv().starts_with("lag,phi1,stderr\n"));
    }
}
