//! Experiment configuration and the analyses behind each `scldpc` subcommand.
//!
//! Every command returns a [`Report`]: a short summary record plus named CSV
//! files. Each CSV starts with `#` comment lines carrying the crate version
//! and the fully resolved configuration, so a file alone is enough to rerun
//! it. Outputs contain no timestamps; equal configurations give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ensemble::{EnsembleSpec, Family};
use crate::mean::{self, IntegrateOptions, PlateauOptions};
use crate::montecarlo::run_trials;
use crate::peeling::{run_trial, PeelOptions};
use crate::scaling::{self, AlphaConvention, ScalingParams};
use crate::variance::{self, ThetaOptions};
use crate::{Error, Result};

pub const VERSION_LINE: &str = concat!("scldpc ", env!("CARGO_PKG_VERSION"));

/// Resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub l: usize,
    pub r: usize,
    pub chain_len: usize,
    pub bits_per_position: usize,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
    pub tol: f64,
    pub step: f64,
    pub target_errors: usize,
    pub batch: usize,
    pub anchors: Vec<f64>,
    pub deltas: Vec<f64>,
    pub alpha: AlphaConvention,
    pub epsilon_star: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_b: Option<f64>,
    pub delta1: Option<f64>,
    pub theta: Option<f64>,
    pub tau_star: Option<f64>,
    pub reference_epsilon: f64,
    /// Sampled peeling trajectories emitted by the mean-evolution figures.
    pub sample_paths: usize,
    /// Protograph lifts also reject variables with identical check sets.
    pub avoid_twins: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: Family::Protograph,
            l: 3,
            r: 6,
            chain_len: 50,
            bits_per_position: 2000,
            epsilons: vec![0.45],
            trials: 1000,
            seed: 1,
            out: None,
            threads: None,
            tol: 1e-4,
            step: 1e-3,
            target_errors: 100,
            batch: 500,
            anchors: vec![26.0, 28.0],
            deltas: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            alpha: AlphaConvention::StdDev,
            epsilon_star: None,
            gamma: None,
            gamma_b: None,
            delta1: None,
            theta: None,
            tau_star: None,
            reference_epsilon: 0.45,
            sample_paths: 3,
            avoid_twins: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse(format!("bad value '{value}' for '{key}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

/// `a,b,c` or an inclusive range `start:stop:step`.
pub fn parse_sweep(value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h): (f64, f64, f64) = (parse("epsilon", start)?, parse("epsilon", stop)?, parse("epsilon", step)?);
            if !(h > 0.0) || b < a {
                return Err(Error::Parse(format!("bad sweep '{value}'")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| ((a + i as f64 * h) * 1e12).round() / 1e12).collect())
        }
        [_] => parse_list("epsilon", value),
        _ => Err(Error::Parse(format!("bad sweep '{value}'"))),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentConfig {
    /// Sets one `key = value` entry; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let maybe = |v: &str| -> Result<Option<f64>> { if v.trim().is_empty() { Ok(None) } else { parse(key, v).map(Some) } };
        match key {
            "family" => self.family = parse(key, value)?,
            "l" => self.l = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "L" => self.chain_len = parse(key, value)?,
            "M" => self.bits_per_position = parse(key, value)?,
            "epsilon" => self.epsilons = parse_sweep(value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = (!value.trim().is_empty()).then(|| PathBuf::from(value.trim())),
            "threads" => self.threads = if value.trim().is_empty() { None } else { Some(parse(key, value)?) },
            "tol" => self.tol = parse(key, value)?,
            "step" => self.step = parse(key, value)?,
            "target_errors" => self.target_errors = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "anchors" => self.anchors = parse_list(key, value)?,
            "deltas" => self.deltas = parse_list(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "epsilon_star" => self.epsilon_star = maybe(value)?,
            "gamma" => self.gamma = maybe(value)?,
            "gamma_b" => self.gamma_b = maybe(value)?,
            "delta1" => self.delta1 = maybe(value)?,
            "theta" => self.theta = maybe(value)?,
            "tau_star" => self.tau_star = maybe(value)?,
            "reference_epsilon" => self.reference_epsilon = parse(key, value)?,
            "sample_paths" => self.sample_paths = parse(key, value)?,
            "avoid_twins" => self.avoid_twins = parse(key, value)?,
            _ => return Err(Error::Parse(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Loads a config file, then applies `overrides` in order (flags win).
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ensemble(&self) -> Result<EnsembleSpec> {
        Ok(EnsembleSpec::new(self.family, self.l, self.r, self.chain_len)?.with_twin_guard(self.avoid_twins))
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.ensemble()?;
        spec.validate_m(self.bits_per_position)?;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad(format!("erasure probabilities must lie in [0,1]: {:?}", self.epsilons));
        }
        if self.trials == 0 || self.batch == 0 {
            return bad("trials and batch must be positive".into());
        }
        if !(self.tol > 0.0) || !(self.step > 0.0) {
            return bad("tol and step must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.deltas.iter().any(|d| !(*d > 0.0)) {
            return bad("gamma probes must be positive gaps".into());
        }
        Ok(())
    }

    /// The resolved configuration as `key = value` lines.
    pub fn resolved(&self) -> BTreeMap<&'static str, String> {
        let alpha = match self.alpha {
            AlphaConvention::StdDev => "stddev",
            AlphaConvention::Variance => "variance",
        };
        BTreeMap::from([
            ("family", self.family.to_string()),
            ("l", self.l.to_string()),
            ("r", self.r.to_string()),
            ("L", self.chain_len.to_string()),
            ("M", self.bits_per_position.to_string()),
            ("epsilon", join(&self.epsilons)),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("tol", self.tol.to_string()),
            ("step", self.step.to_string()),
            ("target_errors", self.target_errors.to_string()),
            ("batch", self.batch.to_string()),
            ("anchors", join(&self.anchors)),
            ("deltas", join(&self.deltas)),
            ("alpha", alpha.to_string()),
            ("epsilon_star", opt(self.epsilon_star)),
            ("gamma", opt(self.gamma)),
            ("gamma_b", opt(self.gamma_b)),
            ("delta1", opt(self.delta1)),
            ("theta", opt(self.theta)),
            ("tau_star", opt(self.tau_star)),
            ("reference_epsilon", self.reference_epsilon.to_string()),
            ("sample_paths", self.sample_paths.to_string()),
            ("avoid_twins", self.avoid_twins.to_string()),
        ])
    }

    /// Comment header embedded in every output file. Thread count and output
    /// directory are left out since they do not affect results.
    pub fn header(&self) -> String {
        let mut h = format!("# {VERSION_LINE}\n");
        for (k, v) in self.resolved() {
            let _ = writeln!(h, "# {k} = {v}");
        }
        h
    }

    fn integrate_options(&self) -> IntegrateOptions {
        IntegrateOptions { step: self.step, ..Default::default() }
    }

    fn with(&self, family: Family, chain_len: usize) -> Self {
        Self { family, chain_len, ..self.clone() }
    }
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    /// One-line record such as `{epsilon_star: 0.48815, ...}`.
    pub summary: String,
    pub files: Vec<OutputFile>,
}

impl Report {
    fn file(&mut self, cfg: &ExperimentConfig, name: impl Into<String>, csv: String) {
        self.files.push(OutputFile { name: name.into(), contents: format!("{}{csv}", cfg.header()) });
    }

    /// Writes every file into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for f in &self.files {
            std::fs::write(dir.join(&f.name), &f.contents)?;
        }
        Ok(())
    }
}

fn record(fields: &[(&str, String)]) -> String {
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    format!("{{{}}}", body.join(", "))
}

fn eps_tag(e: f64) -> String {
    format!("{e}").replace('.', "p")
}

// ---------------------------------------------------------------------------
// mean evolution

pub fn cmd_threshold(cfg: &ExperimentConfig) -> Result<(mean::ThresholdResult, Report)> {
    let model = mean::model_for(&cfg.ensemble()?)?;
    let res = mean::find_threshold(model.as_ref(), (0.0, 0.5), cfg.tol, cfg.integrate_options())?;
    let mut rep = Report::default();
    let mut csv = String::from("epsilon,survived,halt,final_tau\n");
    let mut probes = res.probes.clone();
    probes.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    for p in &probes {
        let _ = writeln!(csv, "{},{},{:?},{}", p.epsilon, p.survived, p.halt, p.final_tau);
    }
    rep.file(cfg, "threshold_probes.csv", csv);
    rep.summary = record(&[
        ("ensemble", cfg.ensemble()?.to_string()),
        ("epsilon_star", res.epsilon_star.to_string()),
        ("bracket_width", res.width().to_string()),
    ]);
    Ok((res, rep))
}

/// `tau,c1_hat` for each configured erasure probability plus the plateau of each.
pub fn cmd_mean_evolution(cfg: &ExperimentConfig) -> Result<Report> {
    let model = mean::model_for(&cfg.ensemble()?)?;
    let runs: Vec<(f64, mean::MeanTrajectory)> = cfg
        .epsilons
        .par_iter()
        .map(|&e| Ok((e, mean::integrate_ensemble(model.as_ref(), e, cfg.integrate_options())?)))
        .collect::<Result<_>>()?;
    let mut rep = Report::default();
    let mut summaries = Vec::new();
    for (e, traj) in &runs {
        rep.file(cfg, format!("mean_eps{}.csv", eps_tag(*e)), traj.to_csv(10));
        let (ts, cs) = match mean::steady_state(traj, PlateauOptions::default()) {
            Ok(s) => (s.tau_star.to_string(), s.c1_star.to_string()),
            Err(_) => (String::new(), String::new()),
        };
        summaries.push(record(&[
            ("epsilon", e.to_string()),
            ("survived", traj.survived().to_string()),
            ("tau_star", ts),
            ("c1_star", cs),
        ]));
    }
    rep.summary = summaries.join("\n");
    Ok(rep)
}

/// Threshold (unless given) and the plateau slope `gamma`.
pub fn cmd_gamma(cfg: &ExperimentConfig) -> Result<(mean::GammaFit, Report)> {
    let model = mean::model_for(&cfg.ensemble()?)?;
    let eps_star = match cfg.epsilon_star {
        Some(e) => e,
        None => mean::find_threshold(model.as_ref(), (0.0, 0.5), cfg.tol, cfg.integrate_options())?.epsilon_star,
    };
    let fit = mean::estimate_gamma(model.as_ref(), eps_star, &cfg.deltas, cfg.integrate_options(), PlateauOptions::default(), 0.05)?;
    let reference = mean::integrate_ensemble(model.as_ref(), cfg.reference_epsilon, cfg.integrate_options())?;
    let plateau = mean::steady_state(&reference, PlateauOptions::default())?;
    let mut rep = Report::default();
    let mut csv = String::from("delta_epsilon,c1_star\n");
    for (d, c) in &fit.points {
        let _ = writeln!(csv, "{d},{c}");
    }
    rep.file(cfg, "gamma_probes.csv", csv);
    rep.summary = record(&[
        ("epsilon_star", eps_star.to_string()),
        ("gamma", fit.gamma.to_string()),
        ("tau_star", plateau.tau_star.to_string()),
        ("c1_star", plateau.c1_star.to_string()),
    ]);
    Ok((fit, rep))
}

// ---------------------------------------------------------------------------
// variance

fn epsilon(cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.epsilons.as_slice() {
        [e] => Ok(*e),
        _ => Err(Error::InvalidParameter("this analysis needs a single erasure probability".into())),
    }
}

/// Result of the `variance` analysis.
#[derive(Debug, Clone)]
pub struct VarianceResult {
    pub analytic: variance::Delta1Curve,
    pub monte_carlo: Vec<variance::McDelta1Point>,
    pub plateau: mean::SteadyState,
    pub delta1_mc_star: f64,
}

pub fn cmd_variance(cfg: &ExperimentConfig) -> Result<(VarianceResult, Report)> {
    let spec = cfg.ensemble()?;
    let e = epsilon(cfg)?;
    let model = mean::model_for(&spec)?;
    let traj = mean::integrate_ensemble(model.as_ref(), e, IntegrateOptions { snapshot_every: Some(0.1), ..cfg.integrate_options() })?;
    let plateau = mean::steady_state(&traj, PlateauOptions::default())?;
    let analytic = variance::estimate_delta1(model.as_ref(), &traj, &plateau)?;
    let ens = run_trials(&spec, cfg.bits_per_position, e, cfg.trials, cfg.seed)?;
    let mc = variance::monte_carlo_delta1(&ens)?;
    let star = variance::plateau_average(&mc, plateau.window.0, plateau.window.1)?;
    let unreliable = mc.iter().filter(|p| !p.reliable()).count();
    let mut rep = Report::default();
    rep.file(cfg, "variance.csv", variance::delta1_csv(&analytic, &mc));
    rep.summary = record(&[
        ("ensemble", spec.to_string()),
        ("delta1_star_analytic", analytic.delta1_star.to_string()),
        ("delta1_star_mc", star.to_string()),
        ("window", format!("[{}, {}]", plateau.window.0, plateau.window.1)),
        ("unreliable_checkpoints", unreliable.to_string()),
    ]);
    Ok((VarianceResult { analytic, monte_carlo: mc, plateau, delta1_mc_star: star }, rep))
}

pub fn cmd_theta(cfg: &ExperimentConfig) -> Result<(variance::CovarianceFit, Report)> {
    let spec = cfg.ensemble()?;
    let e = epsilon(cfg)?;
    let ens = run_trials(&spec, cfg.bits_per_position, e, cfg.trials, cfg.seed)?;
    let fit = variance::fit_theta(&ens, &cfg.anchors, ThetaOptions::default())?;
    let mut rep = Report::default();
    for s in &fit.anchors {
        rep.file(cfg, format!("covariance_zeta{}.csv", eps_tag(s.zeta)), s.to_csv());
    }
    rep.summary = record(&[
        ("ensemble", spec.to_string()),
        ("theta", fit.theta.to_string()),
        ("delta1_star", fit.delta1_star.to_string()),
        ("residual", fit.residual.to_string()),
        ("window", fit.window.to_string()),
    ]);
    Ok((fit, rep))
}

// ---------------------------------------------------------------------------
// scaling law

/// Scaling parameters from the config, filling gaps from the analyses:
/// threshold and `gamma` from the mean evolution, `delta1(*)` and `tau*`
/// from the one-step proxy at the reference erasure probability, `theta`
/// from a Monte Carlo covariance fit.
pub fn resolve_scaling_params(cfg: &ExperimentConfig) -> Result<ScalingParams> {
    let spec = cfg.ensemble()?;
    let model = mean::model_for(&spec)?;
    let opts = cfg.integrate_options();
    let epsilon_star = match cfg.epsilon_star {
        Some(e) => e,
        None => mean::find_threshold(model.as_ref(), (0.0, 0.5), cfg.tol, opts)?.epsilon_star,
    };
    let gamma = match cfg.gamma {
        Some(g) => g,
        None => mean::estimate_gamma(model.as_ref(), epsilon_star, &cfg.deltas, opts, PlateauOptions::default(), 0.05)?.gamma,
    };
    let (delta1, tau_star) = if let (Some(d), Some(t)) = (cfg.delta1, cfg.tau_star) {
        (d, t)
    } else {
        let traj = mean::integrate_ensemble(model.as_ref(), cfg.reference_epsilon, IntegrateOptions { snapshot_every: Some(0.1), ..opts })?;
        let plateau = mean::steady_state(&traj, PlateauOptions::default())?;
        let d = match cfg.delta1 {
            Some(d) => d,
            None => variance::estimate_delta1(model.as_ref(), &traj, &plateau)?.delta1_star,
        };
        (d, cfg.tau_star.unwrap_or(plateau.tau_star))
    };
    let theta = match cfg.theta {
        Some(t) => t,
        None => {
            let ens = run_trials(&spec, cfg.bits_per_position, cfg.reference_epsilon, cfg.trials.max(1000), cfg.seed)?;
            variance::fit_theta(&ens, &cfg.anchors, ThetaOptions::default())?.theta
        }
    };
    let params = ScalingParams { epsilon_star, gamma, delta1, theta, tau_star, alpha: cfg.alpha };
    params.validate()?;
    Ok(params)
}

fn params_record(p: &ScalingParams) -> Vec<(&'static str, String)> {
    vec![
        ("epsilon_star", p.epsilon_star.to_string()),
        ("gamma", p.gamma.to_string()),
        ("delta1", p.delta1.to_string()),
        ("theta", p.theta.to_string()),
        ("tau_star", p.tau_star.to_string()),
    ]
}

pub fn cmd_predict(cfg: &ExperimentConfig) -> Result<(Vec<scaling::Prediction>, Report)> {
    let params = resolve_scaling_params(cfg)?;
    let rows = scaling::predict_curve(&params, cfg.bits_per_position, cfg.chain_len, &cfg.epsilons)?;
    let mut rep = Report::default();
    rep.file(cfg, "prediction.csv", scaling::predictions_csv(&rows));
    rep.summary = record(&params_record(&params));
    Ok((rows, rep))
}

/// `M_a` matching the survival time of ensemble b at `M`, with `gamma_a = gamma`
/// and `gamma_b` and the remaining parameters shared.
pub fn cmd_equivalent_m(cfg: &ExperimentConfig) -> Result<(f64, Report)> {
    let get = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::InvalidParameter(format!("equivalent-m needs '{name}'")));
    let a = ScalingParams {
        epsilon_star: cfg.epsilon_star.unwrap_or(0.48815),
        gamma: get(cfg.gamma, "gamma")?,
        delta1: get(cfg.delta1, "delta1")?,
        theta: get(cfg.theta, "theta")?,
        tau_star: cfg.tau_star.unwrap_or(1.0),
        alpha: cfg.alpha,
    };
    let b = ScalingParams { gamma: get(cfg.gamma_b, "gamma_b")?, ..a };
    let m_a = scaling::equivalent_m(&a, &b, cfg.bits_per_position as f64, cfg.reference_epsilon)?;
    let ratio = m_a / cfg.bits_per_position as f64;
    let rep = Report {
        summary: record(&[
            ("M_b", cfg.bits_per_position.to_string()),
            ("M_a", m_a.to_string()),
            ("ratio", ratio.to_string()),
            ("reference_epsilon", cfg.reference_epsilon.to_string()),
        ]),
        files: Vec::new(),
    };
    Ok((m_a, rep))
}

// ---------------------------------------------------------------------------
// word error rate

/// Two-sided 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub const CI_METHOD: &str = "wilson95";

#[derive(Debug, Clone, PartialEq)]
pub struct WerPoint {
    pub epsilon: f64,
    pub trials: usize,
    pub errors: usize,
    pub seed: u64,
    pub p_star: Option<f64>,
}

impl WerPoint {
    pub fn wer(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn interval(&self) -> (f64, f64) {
        wilson_interval(self.errors, self.trials)
    }
}

/// Word errors at one erasure probability, in batches of `batch` trials until
/// `target_errors` errors or `max_trials` trials. Batch boundaries are fixed,
/// so the stopping point does not depend on scheduling.
pub fn simulate_point(
    spec: &EnsembleSpec,
    bits_per_position: usize,
    epsilon: f64,
    max_trials: usize,
    batch: usize,
    target_errors: usize,
    seed: u64,
) -> Result<WerPoint> {
    spec.validate_m(bits_per_position)?;
    let cp = spec.coupled_protograph().ok();
    let (mut trials, mut errors) = (0usize, 0usize);
    while trials < max_trials && errors < target_errors {
        let end = (trials + batch).min(max_trials);
        errors += (trials as u64..end as u64)
            .into_par_iter()
            .map(|t| {
                run_trial(spec, cp.as_ref(), bits_per_position, epsilon, seed, t, PeelOptions::outcome_only())
                    .map(|tr| usize::from(!tr.decoded()))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        trials = end;
    }
    Ok(WerPoint { epsilon, trials, errors, seed, p_star: None })
}

pub fn wer_csv(spec: &EnsembleSpec, bits_per_position: usize, points: &[WerPoint]) -> String {
    let mut out = String::from("ensemble,M,epsilon,trials,errors,wer,ci_low,ci_high,ci_method,seed,p_star\n");
    for p in points {
        let (lo, hi) = p.interval();
        let _ = writeln!(
            out,
            "\"{spec}\",{bits_per_position},{},{},{},{},{lo},{hi},{CI_METHOD},{},{}",
            p.epsilon,
            p.trials,
            p.errors,
            p.wer(),
            p.seed,
            opt(p.p_star)
        );
    }
    out
}

fn has_scaling_params(cfg: &ExperimentConfig) -> bool {
    [cfg.epsilon_star, cfg.gamma, cfg.delta1, cfg.theta, cfg.tau_star].iter().all(Option::is_some)
}

/// Monte Carlo WER over the configured sweep. `P*` is attached when all
/// scaling parameters are given in the config.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<(Vec<WerPoint>, Report)> {
    let spec = cfg.ensemble()?;
    let params = if has_scaling_params(cfg) { Some(resolve_scaling_params(cfg)?) } else { None };
    let mut points = Vec::new();
    for &e in &cfg.epsilons {
        let mut p = simulate_point(&spec, cfg.bits_per_position, e, cfg.trials, cfg.batch, cfg.target_errors, cfg.seed)?;
        if let Some(params) = &params {
            p.p_star = scaling::predict_wer(params, cfg.bits_per_position as f64, e, cfg.chain_len).ok();
        }
        points.push(p);
    }
    let mut rep = Report::default();
    rep.file(cfg, "wer.csv", wer_csv(&spec, cfg.bits_per_position, &points));
    rep.summary = points
        .iter()
        .map(|p| record(&[("epsilon", p.epsilon.to_string()), ("errors", p.errors.to_string()), ("trials", p.trials.to_string())]))
        .collect::<Vec<_>>()
        .join("\n");
    Ok((points, rep))
}

// ---------------------------------------------------------------------------
// figures

pub const FIGURES: [&str; 5] = ["fig2a", "fig2b", "fig3a", "fig3b", "fig4"];

fn mean_figure(cfg: &ExperimentConfig, family: Family, chain_len: usize, name: &str) -> Result<Report> {
    let sub = ExperimentConfig { epsilons: vec![0.40, 0.45, 0.4875], ..cfg.with(family, chain_len) };
    let mut rep = cmd_mean_evolution(&sub)?;
    for f in &mut rep.files {
        f.name = format!("{name}_{}", f.name);
    }
    let spec = sub.ensemble()?;
    let cp = spec.coupled_protograph().ok();
    let m = sub.bits_per_position;
    let mut csv = String::from("trial,tau,c1\n");
    for t in 0..sub.sample_paths as u64 {
        let traj = run_trial(&spec, cp.as_ref(), m, 0.45, sub.seed, t, PeelOptions::for_m(m))?;
        for &(ell, c1) in &traj.samples {
            let _ = writeln!(csv, "{t},{},{}", ell as f64 / m as f64, c1 as f64 / m as f64);
        }
    }
    rep.file(&sub, format!("{name}_trials_eps0p45.csv"), csv);
    Ok(rep)
}

/// Data series for one figure, built from the config's `M`, trial budget and seed.
pub fn cmd_figure(name: &str, cfg: &ExperimentConfig) -> Result<Report> {
    let both = [(Family::Protograph, "protograph"), (Family::Random, "random")];
    match name {
        "fig2a" => mean_figure(cfg, Family::Protograph, 50, name),
        "fig2b" => mean_figure(cfg, Family::Random, 100, name),
        "fig3a" => {
            let mut rep = Report::default();
            for (family, tag) in both {
                let sub = ExperimentConfig { epsilons: vec![0.45], ..cfg.with(family, 100) };
                let (_, r) = cmd_variance(&sub)?;
                rep.summary.push_str(&format!("{}\n", r.summary));
                for f in r.files {
                    rep.files.push(OutputFile { name: format!("fig3a_{tag}_{}", f.name), contents: f.contents });
                }
            }
            Ok(rep)
        }
        "fig3b" => {
            let mut rep = Report::default();
            for (family, tag) in both {
                let sub = ExperimentConfig { epsilons: vec![0.45], trials: cfg.trials.max(1000), ..cfg.with(family, 100) };
                let (_, r) = cmd_theta(&sub)?;
                rep.summary.push_str(&format!("{}\n", r.summary));
                for f in r.files {
                    rep.files.push(OutputFile { name: format!("fig3b_{tag}_{}", f.name), contents: f.contents });
                }
            }
            Ok(rep)
        }
        "fig4" => {
            let eps = if cfg.epsilons.len() > 1 { cfg.epsilons.clone() } else { parse_sweep("0.43:0.47:0.005")? };
            let mut rep = Report::default();
            for (family, tag) in both {
                let base = ExperimentConfig { epsilons: eps.clone(), ..cfg.with(family, 100) };
                let params = resolve_scaling_params(&ExperimentConfig { bits_per_position: 2000, ..base.clone() })?;
                rep.summary.push_str(&format!("{{ensemble: {}, {}}}\n", base.ensemble()?, record(&params_record(&params))));
                for m in [512usize, 800, 2000] {
                    let sub = ExperimentConfig { bits_per_position: m, ..base.clone() };
                    let spec = sub.ensemble()?;
                    let mut points = Vec::new();
                    for &e in &eps {
                        let mut p = simulate_point(&spec, m, e, sub.trials, sub.batch, sub.target_errors, sub.seed)?;
                        p.p_star = scaling::predict_wer(&params, m as f64, e, sub.chain_len).ok();
                        points.push(p);
                    }
                    rep.file(&sub, format!("fig4_{tag}_M{m}.csv"), wer_csv(&spec, m, &points));
                }
            }
            Ok(rep)
        }
        _ => Err(Error::InvalidParameter(format!("unknown figure '{name}' (expected one of {})", FIGURES.join(", ")))),
    }
}
