//! GARCH(1,1) and QGARCH(1,1) parameter space, variance recursion and
//! likelihood.
//!
//! The conditional variance follows
//!
//! ```text
//! sigma_t^2 = omega + gamma * y_{t-1} + alpha * y_{t-1}^2 + beta * sigma_{t-1}^2
//! ```
//!
//! with `gamma = 0` for plain GARCH. The prior is flat on the support
//! `omega > 0, alpha >= 0, beta >= 0, alpha + beta < 1, gamma^2 <= 4 alpha omega`;
//! the last condition makes `omega + gamma y + alpha y^2` non-negative for every
//! real `y`, so the recursion stays positive whatever the data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ReturnSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Garch,
    Qgarch,
}

impl ModelKind {
    /// Number of free parameters sampled for this model.
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Garch => 3,
            ModelKind::Qgarch => 4,
        }
    }

    /// Names of the free parameters, in sampling order.
    pub fn param_names(self) -> &'static [&'static str] {
        &PARAM_NAMES[..self.dim()]
    }
}

/// Parameter names in the fixed vector order `(omega, alpha, beta, gamma)`.
pub const PARAM_NAMES: [&str; 4] = ["omega", "alpha", "beta", "gamma"];

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Garch => f.write_str("garch"),
            ModelKind::Qgarch => f.write_str("qgarch"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "garch" => Ok(ModelKind::Garch),
            "qgarch" => Ok(ModelKind::Qgarch),
            other => Err(Error::domain(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kind: ModelKind,
}

impl ModelParams {
    pub fn garch(omega: f64, alpha: f64, beta: f64) -> Self {
        ModelParams {
            omega,
            alpha,
            beta,
            gamma: 0.0,
            kind: ModelKind::Garch,
        }
    }

    pub fn qgarch(omega: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        ModelParams {
            omega,
            alpha,
            beta,
            gamma,
            kind: ModelKind::Qgarch,
        }
    }

    /// Builds parameters from a sampler vector `(omega, alpha, beta[, gamma])`.
    pub fn from_vector(kind: ModelKind, theta: &[f64]) -> Result<Self> {
        if theta.len() != kind.dim() {
            return Err(Error::domain(format!(
                "{kind} expects {} parameters, got {}",
                kind.dim(),
                theta.len()
            )));
        }
        Ok(match kind {
            ModelKind::Garch => ModelParams::garch(theta[0], theta[1], theta[2]),
            ModelKind::Qgarch => ModelParams::qgarch(theta[0], theta[1], theta[2], theta[3]),
        })
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let all = [self.omega, self.alpha, self.beta, self.gamma];
        all[..self.kind.dim()].to_vec()
    }

    pub fn in_support(&self) -> bool {
        let finite = [self.omega, self.alpha, self.beta, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        finite
            && self.omega > 0.0
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta < 1.0
            && self.gamma * self.gamma <= 4.0 * self.alpha * self.omega
            && (self.kind == ModelKind::Qgarch || self.gamma == 0.0)
    }

    pub fn check_support(&self) -> Result<()> {
        if self.in_support() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "parameters outside support (omega > 0, alpha >= 0, beta >= 0, \
                 alpha + beta < 1, gamma^2 <= 4 alpha omega): {self:?}"
            )))
        }
    }

    #[inline]
    fn next_variance(&self, y_prev: f64, var_prev: f64) -> f64 {
        self.omega + self.gamma * y_prev + self.alpha * y_prev * y_prev + self.beta * var_prev
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityPath {
    pub sigma_sq: Vec<f64>,
}

pub fn volatility_path(
    params: &ModelParams,
    returns: &ReturnSeries,
    sigma1_sq: f64,
) -> Result<VolatilityPath> {
    params.check_support()?;
    check_sigma1(sigma1_sq)?;
    let y = returns.values();
    let mut sigma_sq = Vec::with_capacity(y.len());
    let mut var = sigma1_sq;
    sigma_sq.push(var);
    for &y_prev in &y[..y.len() - 1] {
        var = params.next_variance(y_prev, var);
        sigma_sq.push(var);
    }
    Ok(VolatilityPath { sigma_sq })
}

/// Gaussian log-likelihood `-1/2 sum_t [ln(2 pi sigma_t^2) + y_t^2 / sigma_t^2]`.
pub fn log_likelihood(params: &ModelParams, returns: &ReturnSeries, sigma1_sq: f64) -> Result<f64> {
    params.check_support()?;
    check_sigma1(sigma1_sq)?;
    Ok(log_likelihood_unchecked(params, returns.values(), sigma1_sq))
}

fn log_likelihood_unchecked(params: &ModelParams, y: &[f64], sigma1_sq: f64) -> f64 {
    let mut var = sigma1_sq;
    let mut sum_log_var = 0.0;
    let mut sum_scaled = 0.0;
    for (t, &yt) in y.iter().enumerate() {
        if t > 0 {
            var = params.next_variance(y[t - 1], var);
        }
        sum_log_var += var.ln();
        sum_scaled += yt * yt / var;
    }
    -0.5 * (y.len() as f64 * (2.0 * PI).ln() + sum_log_var + sum_scaled)
}

/// Unnormalized log-posterior under the flat prior: the log-likelihood on
/// the support and `-inf` outside it.
pub fn log_posterior(params: &ModelParams, returns: &ReturnSeries, sigma1_sq: f64) -> f64 {
    if !params.in_support() || !(sigma1_sq > 0.0) {
        return f64::NEG_INFINITY;
    }
    log_likelihood_unchecked(params, returns.values(), sigma1_sq)
}

/// The posterior of one model kind on one data set, evaluated on raw
/// sampler vectors.
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    kind: ModelKind,
    returns: &'a ReturnSeries,
    sigma1_sq: f64,
}

impl<'a> Posterior<'a> {
    pub fn new(kind: ModelKind, returns: &'a ReturnSeries, sigma1_sq: f64) -> Result<Self> {
        check_sigma1(sigma1_sq)?;
        Ok(Posterior {
            kind,
            returns,
            sigma1_sq,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.sigma1_sq
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        match ModelParams::from_vector(self.kind, theta) {
            Ok(params) => log_posterior(&params, self.returns, self.sigma1_sq),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Stationary variance `omega / (1 - alpha - beta)`.
pub fn unconditional_variance(params: &ModelParams) -> Result<f64> {
    let persistence = params.alpha + params.beta;
    if !(persistence < 1.0) {
        return Err(Error::domain(format!(
            "unconditional variance undefined for alpha + beta = {persistence} >= 1"
        )));
    }
    Ok(params.omega / (1.0 - persistence))
}

/// Conditional variance as a function of the previous return, with the
/// previous variance held at the unconditional level.
pub fn news_impact_curve(params: &ModelParams, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let base = unconditional_variance(params)?;
    Ok(grid
        .iter()
        .map(|&y| (y, params.next_variance(y, base)))
        .collect())
}

/// `n` evenly spaced points on `[min, max]`.
pub fn linear_grid(min: f64, max: f64, n: usize) -> Result<Vec<f64>> {
    if !(min < max) || n < 2 {
        return Err(Error::domain(format!(
            "grid needs min < max and at least 2 points, got [{min}, {max}] with {n}"
        )));
    }
    let step = (max - min) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { max } else { min + step * i as f64 })
        .collect())
}

fn check_sigma1(sigma1_sq: f64) -> Result<()> {
    if sigma1_sq > 0.0 && sigma1_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "initial variance must be positive and finite, got {sigma1_sq}"
        )))
    }
}
