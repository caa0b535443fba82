//! Random-walk Metropolis warm-up, independence Metropolis-Hastings with a
//! Student's t proposal, and the adaptive driver that re-fits the proposal
//! from the chain's own history.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::ReturnSeries;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, Posterior};
use crate::proposal::{build_proposal, estimate_moments, ProposalDensity, ProposalSnapshot};
use crate::rng::{stream_rng, ADAPTIVE_STREAM, WARMUP_STREAM};

/// Step-size control of the random-walk warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmupSettings {
    pub initial_step: f64,
    /// Sweeps between step-size adjustments during the discarded phase.
    pub adapt_every: usize,
    /// Steps are halved below this per-component acceptance rate...
    pub low_acceptance: f64,
    /// ...and doubled above this one.
    pub high_acceptance: f64,
}

impl Default for WarmupSettings {
    fn default() -> Self {
        WarmupSettings {
            initial_step: 0.01,
            adapt_every: 200,
            low_acceptance: 0.4,
            high_acceptance: 0.6,
        }
    }
}

/// Accept/reject on a log acceptance ratio. A non-negative ratio always
/// accepts; `-inf` and NaN always reject.
pub fn metropolis_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if !(log_ratio > f64::NEG_INFINITY) {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}

/// Independence-sampler acceptance probability
/// `min(1, P(new) / P(old) * g(old) / g(new))`, from log quantities.
pub fn acceptance_probability(log_target_new: f64, log_target_old: f64, log_g_new: f64, log_g_old: f64) -> f64 {
    if log_target_new == f64::NEG_INFINITY {
        return 0.0;
    }
    let log_ratio = (log_target_new - log_target_old) + (log_g_old - log_g_new);
    log_ratio.min(0.0).exp()
}

/// Random-walk Metropolis with component-wise Gaussian steps.
///
/// Each iteration sweeps all components once. The first `n_discard`
/// iterations are dropped; during them the per-component step is doubled or
/// halved every `adapt_every` sweeps when its acceptance leaves
/// `[low_acceptance, high_acceptance]`. Steps are frozen for the `n_keep`
/// returned states.
pub fn metropolis_warmup<F, R>(
    target: F,
    theta0: &[f64],
    n_keep: usize,
    n_discard: usize,
    settings: &WarmupSettings,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut log_p = target(theta0);
    if !log_p.is_finite() {
        return Err(Error::domain(format!(
            "starting point has non-finite log target: {theta0:?}"
        )));
    }
    let p = theta0.len();
    let mut theta = theta0.to_vec();
    let mut steps = vec![settings.initial_step; p];
    let mut accepted = vec![0usize; p];
    let mut kept = Vec::with_capacity(n_keep);

    for sweep in 0..(n_discard + n_keep) {
        for k in 0..p {
            let old = theta[k];
            let z: f64 = StandardNormal.sample(rng);
            theta[k] = old + steps[k] * z;
            let candidate = target(&theta);
            if metropolis_accept(candidate - log_p, rng) {
                log_p = candidate;
                accepted[k] += 1;
            } else {
                theta[k] = old;
            }
        }
        if sweep < n_discard && settings.adapt_every > 0 && (sweep + 1) % settings.adapt_every == 0 {
            for k in 0..p {
                let rate = accepted[k] as f64 / settings.adapt_every as f64;
                if rate > settings.high_acceptance {
                    steps[k] *= 2.0;
                } else if rate < settings.low_acceptance {
                    steps[k] *= 0.5;
                }
                accepted[k] = 0;
            }
        }
        if sweep >= n_discard {
            kept.push(theta.clone());
        }
    }
    log::debug!("warm-up step sizes {steps:?}");
    Ok(kept)
}

/// A chain position with its cached log target.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub log_target: f64,
}

impl ChainState {
    pub fn new<F: Fn(&[f64]) -> f64>(target: F, theta: Vec<f64>) -> Self {
        let log_target = target(&theta);
        ChainState { theta, log_target }
    }
}

/// One independence Metropolis-Hastings transition. On rejection the
/// returned state is a clone of `current`.
pub fn mh_step<F, R>(target: F, proposal: &ProposalDensity, current: &ChainState, rng: &mut R) -> (ChainState, bool)
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let candidate = proposal.draw(rng);
    let log_target = target(&candidate);
    let log_ratio = if log_target == f64::NEG_INFINITY || log_target.is_nan() {
        f64::NEG_INFINITY
    } else {
        (log_target - current.log_target)
            + (proposal.log_density_unchecked(&current.theta) - proposal.log_density_unchecked(&candidate))
    };
    if metropolis_accept(log_ratio, rng) {
        (
            ChainState {
                theta: candidate,
                log_target,
            },
            true,
        )
    } else {
        (current.clone(), false)
    }
}

/// How the first conditional variance of the recursion is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sigma1Policy {
    SampleVariance,
    Explicit(f64),
}

impl Sigma1Policy {
    pub fn resolve(&self, returns: &ReturnSeries) -> Result<f64> {
        let v = match *self {
            Sigma1Policy::SampleVariance => returns.sample_variance(),
            Sigma1Policy::Explicit(v) => v,
        };
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("initial variance must be positive, got {v}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub kind: ModelKind,
    pub burn_in: usize,
    pub initial_pool: usize,
    pub update_interval: usize,
    pub total_samples: usize,
    pub nu: f64,
    pub seed: u64,
    /// Defaults to [`default_theta0`] when absent.
    pub theta0: Option<ModelParams>,
    pub sigma1_sq: Sigma1Policy,
    /// Stop re-fitting the proposal after this many adaptive samples.
    pub freeze_after: Option<usize>,
    pub warmup: WarmupSettings,
}

impl ChainConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ChainConfig {
            kind,
            burn_in: 5000,
            initial_pool: 1000,
            update_interval: 1000,
            total_samples: 100_000,
            nu: 10.0,
            seed,
            theta0: None,
            sigma1_sq: Sigma1Policy::SampleVariance,
            freeze_after: None,
            warmup: WarmupSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("burn_in", self.burn_in),
            ("update_interval", self.update_interval),
            ("total_samples", self.total_samples),
        ] {
            if v == 0 {
                return Err(Error::domain(format!("{name} must be at least 1")));
            }
        }
        if self.initial_pool < 2 {
            return Err(Error::domain("initial_pool must be at least 2 to estimate a covariance"));
        }
        if !(self.nu > 2.0) || !self.nu.is_finite() {
            return Err(Error::domain(format!("nu must be finite and > 2, got {}", self.nu)));
        }
        if let Some(t) = &self.theta0 {
            if t.kind != self.kind {
                return Err(Error::domain("theta0 model kind differs from the chain's"));
            }
        }
        Ok(())
    }
}

/// Starting point `omega = 0.1 var(y), alpha = 0.1, beta = 0.8, gamma = 0`.
pub fn default_theta0(kind: ModelKind, returns: &ReturnSeries) -> ModelParams {
    let omega = (0.1 * returns.sample_variance()).max(1e-8);
    match kind {
        ModelKind::Garch => ModelParams::garch(omega, 0.1, 0.8),
        ModelKind::Qgarch => ModelParams::qgarch(omega, 0.1, 0.8, 0.0),
    }
}

/// Proposal moments at one point of the adaptive phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSnapshot {
    /// Adaptive-phase samples drawn when the estimate was taken.
    pub mc_time: usize,
    /// Number of states the estimate was computed from.
    pub n_used: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub kind: ModelKind,
    pub sigma1_sq: f64,
    /// Adaptive-phase draws, in chain order.
    pub samples: Vec<Vec<f64>>,
    /// Acceptance fraction of each complete window of `update_interval` draws.
    pub acceptance_trace: Vec<f64>,
    pub update_interval: usize,
    pub moment_trace: Vec<MomentSnapshot>,
    pub warmup_samples: Vec<Vec<f64>>,
    pub accepted: usize,
    pub final_proposal: ProposalSnapshot,
}

impl ChainResult {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.samples.len() as f64
    }

    /// The sample at `i` as full `(omega, alpha, beta, gamma)` parameters.
    pub fn params_at(&self, i: usize) -> ModelParams {
        ModelParams::from_vector(self.kind, &self.samples[i]).expect("sample has chain dimension")
    }
}

/// Runs the full adaptive scheme on `returns`.
///
/// 1. Random-walk Metropolis: discard `burn_in` sweeps, keep `initial_pool`.
/// 2. Fit the Student's t proposal to the pool.
/// 3. Independence MH. After every `update_interval` draws, record the
///    window acceptance and re-fit the proposal on the pool plus every
///    adaptive draw so far (until `freeze_after`, if set).
pub fn run_adaptive(config: &ChainConfig, returns: &ReturnSeries) -> Result<ChainResult> {
    config.validate()?;
    let sigma1_sq = config.sigma1_sq.resolve(returns)?;
    let posterior = Posterior::new(config.kind, returns, sigma1_sq)?;
    let target = |theta: &[f64]| posterior.log_density(theta);

    let theta0 = config
        .theta0
        .unwrap_or_else(|| default_theta0(config.kind, returns));
    theta0.check_support()?;

    let mut warm_rng = stream_rng(config.seed, WARMUP_STREAM);
    let warmup_samples = metropolis_warmup(
        target,
        &theta0.to_vector(),
        config.initial_pool,
        config.burn_in,
        &config.warmup,
        &mut warm_rng,
    )?;

    let pool = warmup_samples.len();
    let mut history = warmup_samples.clone();
    history.reserve(config.total_samples);

    let mut moment_trace = Vec::new();
    let mut proposal = refit(&history, config.nu, 0, &mut moment_trace)?;

    let mut rng = stream_rng(config.seed, ADAPTIVE_STREAM);
    let mut state = ChainState::new(target, history[pool - 1].clone());
    let mut acceptance_trace = Vec::with_capacity(config.total_samples / config.update_interval);
    let mut window_accepted = 0usize;
    let mut accepted = 0usize;

    for i in 1..=config.total_samples {
        let (next, ok) = mh_step(target, &proposal, &state, &mut rng);
        state = next;
        history.push(state.theta.clone());
        if ok {
            window_accepted += 1;
            accepted += 1;
        }
        if i % config.update_interval == 0 {
            let rate = window_accepted as f64 / config.update_interval as f64;
            acceptance_trace.push(rate);
            window_accepted = 0;
            log::debug!("window {}: acceptance {rate:.3}", acceptance_trace.len());
            let adapting = config.freeze_after.is_none_or(|f| i <= f);
            if adapting && i < config.total_samples {
                proposal = refit(&history, config.nu, i, &mut moment_trace)?;
            }
        }
    }

    let samples = history.split_off(pool);
    Ok(ChainResult {
        kind: config.kind,
        sigma1_sq,
        samples,
        acceptance_trace,
        update_interval: config.update_interval,
        moment_trace,
        warmup_samples,
        accepted,
        final_proposal: proposal.snapshot(),
    })
}

fn refit(
    history: &[Vec<f64>],
    nu: f64,
    mc_time: usize,
    trace: &mut Vec<MomentSnapshot>,
) -> Result<ProposalDensity> {
    let moments = estimate_moments(history)?;
    let proposal = build_proposal(&moments, nu)?;
    trace.push(MomentSnapshot {
        mc_time,
        n_used: history.len(),
        mean: moments.mean.iter().copied().collect(),
        covariance: moments.covariance_rows(),
        jitter: proposal.jitter(),
    });
    Ok(proposal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::simulate_qgarch;
    use crate::proposal::MomentEstimate;
    use nalgebra::{DMatrix, DVector};

    fn std_normal(theta: &[f64]) -> f64 {
        -0.5 * theta[0] * theta[0]
    }

    #[test]
    fn nonnegative_log_ratio_always_accepts() {
        let mut rng = stream_rng(0, 0);
        for r in [0.0, 1e-300, 2.0, f64::INFINITY] {
            assert!((0..1000).all(|_| metropolis_accept(r, &mut rng)));
        }
        assert!(!(0..1000).any(|_| metropolis_accept(f64::NEG_INFINITY, &mut rng)));
        assert!(!metropolis_accept(f64::NAN, &mut rng));
    }

    #[test]
    fn acceptance_probability_cases() {
        assert_eq!(acceptance_probability(-3.0, -3.0, 1.5, 1.5), 1.0);
        // target ratio e^2, g ratio g(old)/g(new) = e^-1: overall e >= 1
        assert_eq!(acceptance_probability(2.0, 0.0, 0.0, -1.0), 1.0);
        assert!((acceptance_probability(0.0, 1.0, 0.0, 0.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(acceptance_probability(f64::NEG_INFINITY, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn warmup_samples_standard_normal() {
        let mut rng = stream_rng(21, WARMUP_STREAM);
        let s = metropolis_warmup(std_normal, &[3.0], 100_000, 5000, &WarmupSettings::default(), &mut rng).unwrap();
        assert_eq!(s.len(), 100_000);
        let n = s.len() as f64;
        let m = s.iter().map(|v| v[0]).sum::<f64>() / n;
        let var = s.iter().map(|v| (v[0] - m).powi(2)).sum::<f64>() / n;
        assert!(m.abs() < 0.05, "mean {m}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn warmup_is_deterministic_and_checks_start() {
        let run = |seed| {
            let mut rng = stream_rng(seed, WARMUP_STREAM);
            metropolis_warmup(std_normal, &[0.0], 500, 500, &WarmupSettings::default(), &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        let mut rng = stream_rng(0, 0);
        let off = |_: &[f64]| f64::NEG_INFINITY;
        assert!(metropolis_warmup(off, &[0.0], 10, 10, &WarmupSettings::default(), &mut rng).is_err());
    }

    fn fixed_proposal(mean: &[f64], cov: &[f64], nu: f64) -> ProposalDensity {
        let p = mean.len();
        build_proposal(
            &MomentEstimate {
                mean: DVector::from_column_slice(mean),
                second_central: DMatrix::from_row_slice(p, p, cov),
            },
            nu,
        )
        .unwrap()
    }

    #[test]
    fn off_support_candidates_are_rejected() {
        let g = fixed_proposal(&[0.0], &[1.0], 10.0);
        let target = |t: &[f64]| if t[0] > 100.0 { 0.0 } else { f64::NEG_INFINITY };
        let start = ChainState {
            theta: vec![200.0],
            log_target: 0.0,
        };
        let mut rng = stream_rng(1, 0);
        for _ in 0..1000 {
            let (s, ok) = mh_step(target, &g, &start, &mut rng);
            assert!(!ok);
            assert_eq!(s, start);
        }
    }

    #[test]
    fn proposal_equal_to_target_always_accepts() {
        let g = fixed_proposal(&[0.5, -1.0], &[1.0, 0.2, 0.2, 2.0], 10.0);
        let target = |t: &[f64]| g.log_density(t).unwrap();
        let mut state = ChainState::new(target, vec![0.0, 0.0]);
        let mut rng = stream_rng(2, 0);
        for _ in 0..1000 {
            let (s, ok) = mh_step(target, &g, &state, &mut rng);
            assert!(ok);
            state = s;
        }
    }

    #[test]
    fn independence_mh_recovers_gaussian_target() {
        let mu = [1.0, -0.5];
        // C = [[1, 0.6], [0.6, 2]], precision by hand
        let c = [1.0, 0.6, 0.6, 2.0];
        let det = c[0] * c[3] - c[1] * c[2];
        let prec = [c[3] / det, -c[1] / det, -c[2] / det, c[0] / det];
        let target = |t: &[f64]| {
            let d = [t[0] - mu[0], t[1] - mu[1]];
            -0.5 * (d[0] * (prec[0] * d[0] + prec[1] * d[1]) + d[1] * (prec[2] * d[0] + prec[3] * d[1]))
        };
        let g = fixed_proposal(&[0.8, -0.2], &[1.5, 0.5, 0.5, 2.5], 10.0);
        let mut state = ChainState::new(target, vec![0.0, 0.0]);
        let mut rng = stream_rng(5, ADAPTIVE_STREAM);
        let mut s = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            state = mh_step(target, &g, &state, &mut rng).0;
            s.push(state.theta.clone());
        }
        let e = estimate_moments(&s).unwrap();
        for i in 0..2 {
            // generous: chain is correlated, so inflate the iid standard error
            let se = (c[3 * i] / s.len() as f64).sqrt() * 2.0;
            assert!((e.mean[i] - mu[i]).abs() < 3.0 * se, "mean {} vs {}", e.mean[i], mu[i]);
            for j in 0..2 {
                let want = c[2 * i + j];
                assert!((e.second_central[(i, j)] - want).abs() < 0.1 * want, "cov {i}{j}");
            }
        }
    }

    fn small_config(seed: u64) -> ChainConfig {
        ChainConfig {
            burn_in: 1000,
            initial_pool: 300,
            update_interval: 250,
            total_samples: 3000,
            ..ChainConfig::new(ModelKind::Qgarch, seed)
        }
    }

    fn small_data() -> ReturnSeries {
        let p = ModelParams::qgarch(0.06219, 0.07872, 0.89390, -0.12403);
        simulate_qgarch(&p, 800, 2.27, 77).unwrap()
    }

    #[test]
    fn adaptive_run_shape_and_bookkeeping() {
        let y = small_data();
        let cfg = small_config(8);
        let r = run_adaptive(&cfg, &y).unwrap();
        assert_eq!(r.samples.len(), cfg.total_samples);
        assert_eq!(r.warmup_samples.len(), cfg.initial_pool);
        assert_eq!(r.acceptance_trace.len(), cfg.total_samples / cfg.update_interval);
        // initial fit plus one per window except the last
        assert_eq!(r.moment_trace.len(), r.acceptance_trace.len());
        assert_eq!(r.moment_trace[0].n_used, cfg.initial_pool);
        assert_eq!(r.moment_trace[1].n_used, cfg.initial_pool + cfg.update_interval);
        assert!(r.samples.iter().all(|s| s.len() == 4));
        assert_eq!(r.params_at(0).kind, ModelKind::Qgarch);

        // rejected steps repeat the previous state exactly; window acceptance
        // equals the number of moves in exactly that window
        let mut prev = r.warmup_samples.last().unwrap();
        let mut moves = Vec::new();
        for s in &r.samples {
            moves.push(s != prev);
            prev = s;
        }
        assert!(moves.iter().any(|m| !m));
        for (w, rate) in r.acceptance_trace.iter().enumerate() {
            let k = moves[w * cfg.update_interval..(w + 1) * cfg.update_interval]
                .iter()
                .filter(|m| **m)
                .count();
            assert_eq!(*rate, k as f64 / cfg.update_interval as f64);
            assert!((0.0..=1.0).contains(rate));
        }
        assert_eq!(moves.iter().filter(|m| **m).count(), r.accepted);
        for s in &r.samples {
            assert!(ModelParams::from_vector(ModelKind::Qgarch, s).unwrap().in_support());
        }
    }

    #[test]
    fn adaptive_run_is_reproducible() {
        let y = small_data();
        let a = run_adaptive(&small_config(3), &y).unwrap();
        let b = run_adaptive(&small_config(3), &y).unwrap();
        assert_eq!(a, b);
        let c = run_adaptive(&small_config(4), &y).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn freeze_stops_refits() {
        let y = small_data();
        let cfg = ChainConfig {
            freeze_after: Some(1000),
            ..small_config(5)
        };
        let r = run_adaptive(&cfg, &y).unwrap();
        assert_eq!(r.moment_trace.last().unwrap().mc_time, 1000);
        assert_eq!(r.moment_trace.len(), 1 + 1000 / cfg.update_interval);
    }

    #[test]
    fn garch_run_has_three_parameters() {
        let y = small_data();
        let cfg = ChainConfig {
            kind: ModelKind::Garch,
            ..small_config(6)
        };
        let r = run_adaptive(&cfg, &y).unwrap();
        assert!(r.samples.iter().all(|s| s.len() == 3));
        assert_eq!(r.params_at(10).gamma, 0.0);
    }

    #[test]
    fn config_validation() {
        let y = small_data();
        let bad = [
            ChainConfig { nu: 2.0, ..small_config(0) },
            ChainConfig { total_samples: 0, ..small_config(0) },
            ChainConfig { initial_pool: 1, ..small_config(0) },
            ChainConfig { sigma1_sq: Sigma1Policy::Explicit(-1.0), ..small_config(0) },
            ChainConfig { theta0: Some(ModelParams::garch(0.1, 0.1, 0.8)), ..small_config(0) },
            ChainConfig { theta0: Some(ModelParams::qgarch(0.1, 0.6, 0.8, 0.0)), ..small_config(0) },
        ];
        for cfg in bad {
            assert!(matches!(run_adaptive(&cfg, &y), Err(Error::Domain(_))), "{cfg:?}");
        }
    }
}
