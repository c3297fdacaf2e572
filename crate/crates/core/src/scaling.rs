//! Finite-length scaling law for the waterfall region.
//!
//! During the steady state `c1` is modelled as a stationary Gauss-Markov
//! process with mean `gamma * (eps* - eps)`, variance `delta1 / M` and
//! correlation decay `theta`. Its mean first-passage time through zero is
//!
//! ```text
//! mu0 = sqrt(2 pi) / theta * int_0^x Phi(z) exp(z^2 / 2) dz,   x = sqrt(M) (eps* - eps) / alpha
//! ```
//!
//! and a steady phase of length `eps L - tau*` fails with probability
//! `P* = 1 - exp(-(eps L - tau*) / mu0)`.

use std::f64::consts::{PI, SQRT_2};

use crate::{Error, Result};

/// How `alpha` is formed from `delta1(*)` and `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaConvention {
    /// `alpha = sqrt(delta1) / gamma`: `x` is the plateau height in standard deviations.
    #[default]
    StdDev,
    /// `alpha = delta1 / gamma`.
    Variance,
}

impl std::str::FromStr for AlphaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stddev" | "sqrt" => Ok(Self::StdDev),
            "variance" | "printed" => Ok(Self::Variance),
            _ => Err(Error::Parse(format!("unknown alpha convention '{s}' (stddev|variance)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    pub epsilon_star: f64,
    pub gamma: f64,
    pub delta1: f64,
    pub theta: f64,
    pub tau_star: f64,
    pub alpha: AlphaConvention,
}

impl ScalingParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("delta1", self.delta1),
            ("theta", self.theta),
            ("tau_star", self.tau_star),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.epsilon_star > 0.0 && self.epsilon_star < 1.0) {
            return Err(Error::InvalidParameter(format!("threshold {} outside (0,1)", self.epsilon_star)));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        match self.alpha {
            AlphaConvention::StdDev => self.delta1.sqrt() / self.gamma,
            AlphaConvention::Variance => self.delta1 / self.gamma,
        }
    }

    /// Upper integration limit `sqrt(M) (eps* - eps) / alpha`.
    pub fn upper_limit(&self, bits_per_position: f64, epsilon: f64) -> f64 {
        bits_per_position.sqrt() * (self.epsilon_star - epsilon) / self.alpha()
    }
}

/// Standard normal cdf.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `ln int_0^x Phi(z) exp(z^2/2) dz` for `x > 0`.
///
/// The integral is written as `exp(x^2/2) J(x)` with
/// `J = int_0^x Phi(z) exp((z^2 - x^2)/2) dz`, whose integrand lies in `[0, 1]`.
pub fn ln_survival_integral(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let half = 0.5 * x * x;
    let f = |z: f64| phi(z) * (0.5 * z * z - half).exp();
    // J >= min(x, 1/x) / 4, so this absolute target is a tight relative one
    let scale = x.min(1.0 / x);
    let out = quadrature::integrate(f, 0.0, x, 1e-14 * scale);
    half + out.integral.ln()
}

fn check_epsilon(params: &ScalingParams, bits_per_position: f64, epsilon: f64) -> Result<()> {
    params.validate()?;
    if !(bits_per_position >= 1.0) {
        return Err(Error::InvalidParameter(format!("M must be at least 1, got {bits_per_position}")));
    }
    if !(epsilon < params.epsilon_star) {
        return Err(Error::InvalidParameter(format!(
            "erasure probability {epsilon} is not below the threshold {}",
            params.epsilon_star
        )));
    }
    Ok(())
}

/// `ln mu0`; finite for every `eps < eps*` even when `mu0` itself overflows.
pub fn ln_mu0(params: &ScalingParams, bits_per_position: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(params, bits_per_position, epsilon)?;
    let x = params.upper_limit(bits_per_position, epsilon);
    Ok((2.0 * PI).sqrt().ln() - params.theta.ln() + ln_survival_integral(x))
}

/// Mean survival time of the deg1 process, in units of `tau`.
pub fn mu0(params: &ScalingParams, bits_per_position: f64, epsilon: f64) -> Result<f64> {
    ln_mu0(params, bits_per_position, epsilon).map(f64::exp)
}

/// Predicted word error probability `P*`.
pub fn predict_wer(params: &ScalingParams, bits_per_position: f64, epsilon: f64, chain_len: usize) -> Result<f64> {
    let steady = epsilon * chain_len as f64 - params.tau_star;
    if !(steady > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "no steady phase: eps L = {} does not exceed tau* = {}",
            epsilon * chain_len as f64,
            params.tau_star
        )));
    }
    let ln_mu = ln_mu0(params, bits_per_position, epsilon)?;
    Ok(-(-(steady.ln() - ln_mu).exp()).exp_m1())
}

/// `M_a` with `mu0(a, M_a, eps) = mu0(b, M_b, eps)`.
pub fn equivalent_m(a: &ScalingParams, b: &ScalingParams, m_b: f64, epsilon: f64) -> Result<f64> {
    let target = ln_mu0(b, m_b, epsilon)?;
    let g = |ln_m: f64| ln_mu0(a, ln_m.exp(), epsilon).map(|v| v - target);
    let (mut lo, mut hi) = (0.0f64, m_b.ln());
    // grow the bracket geometrically around M_b
    let mut width = 1.0;
    while g(lo)? > 0.0 || g(hi)? < 0.0 {
        lo = (m_b.ln() - width).max(0.0);
        hi = m_b.ln() + width;
        width *= 2.0;
        if width > 64.0 {
            return Err(Error::RootNotBracketed(format!("no M in [1, e^{hi:.0}] matches mu0 of M_b = {m_b}")));
        }
    }
    if g(lo)? > 0.0 {
        return Err(Error::RootNotBracketed("mu0 at M = 1 already exceeds the target".into()));
    }
    // mu0 is increasing in M; bisect ln M until ln mu0 agrees to 1e-9
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = g(mid)?;
        if v.abs() < 1e-9 {
            return Ok(mid.exp());
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// One row of a predicted WER curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub epsilon: f64,
    pub bits_per_position: usize,
    pub chain_len: usize,
    pub mu0: f64,
    pub p_star: f64,
}

/// Predictions over an erasure-probability sweep.
pub fn predict_curve(params: &ScalingParams, bits_per_position: usize, chain_len: usize, epsilons: &[f64]) -> Result<Vec<Prediction>> {
    epsilons
        .iter()
        .map(|&e| {
            Ok(Prediction {
                epsilon: e,
                bits_per_position,
                chain_len,
                mu0: mu0(params, bits_per_position as f64, e)?,
                p_star: predict_wer(params, bits_per_position as f64, e, chain_len)?,
            })
        })
        .collect()
}

/// CSV `epsilon,M,L,mu0,p_star`.
pub fn predictions_csv(rows: &[Prediction]) -> String {
    let mut out = String::from("epsilon,M,L,mu0,p_star\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.epsilon, r.bits_per_position, r.chain_len, r.mu0, r.p_star));
    }
    out
}
