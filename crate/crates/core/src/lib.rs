//! Bayesian estimation of GARCH(1,1) and QGARCH(1,1) volatility models.
//!
//! Posterior draws come from an independence Metropolis-Hastings chain whose
//! multivariate Student's t proposal is periodically re-fitted to the mean
//! and covariance of everything the chain has sampled so far. A short
//! random-walk Metropolis run seeds the first fit.
//!
//! Modules follow the pipeline:
//! [`data`] (prices to demeaned percent log returns, synthetic series),
//! [`model`] (recursion, likelihood, flat-prior posterior, news impact),
//! [`proposal`] (Student's t fit, draw, density),
//! [`sampler`] (warm-up, MH step, adaptive driver) and
//! [`diagnostics`] (ACF, integrated autocorrelation time, jackknife, summary).

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod proposal;
pub mod rng;
pub mod sampler;

pub use data::{load_prices, load_returns, simulate_qgarch, to_returns, Column, PriceSeries, ReturnSeries};
pub use diagnostics::{acf, integrated_autocorr_time, jackknife_se, summarize, SummaryReport, TauEstimate};
pub use error::{Error, Result};
pub use model::{
    log_likelihood, log_posterior, news_impact_curve, unconditional_variance, volatility_path, ModelKind,
    ModelParams, VolatilityPath,
};
pub use proposal::{build_proposal, estimate_moments, MomentEstimate, ProposalDensity};
pub use sampler::{mh_step, metropolis_warmup, run_adaptive, ChainConfig, ChainResult, ChainState, Sigma1Policy};
