//! Chain diagnostics: autocorrelation, integrated autocorrelation time,
//! block jackknife errors and posterior summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::ReturnSeries;
use crate::error::{Error, Result};
use crate::model::{unconditional_variance, ModelKind, ModelParams};
use crate::sampler::ChainResult;

/// Window factor of the self-consistent truncation `W >= c tau_int(W)`.
pub const WINDOW_FACTOR: f64 = 6.0;
pub const DEFAULT_JACKKNIFE_BLOCKS: usize = 50;
/// Shortest series accepted by [`integrated_autocorr_time`].
pub const MIN_TAU_SAMPLES: usize = 100;
/// Windows averaged for the reported acceptance plateau.
pub const PLATEAU_WINDOWS: usize = 10;

/// Mean computed from offsets to the first element, exact for constant input.
fn mean(series: &[f64]) -> f64 {
    let origin = series[0];
    origin + series.iter().map(|x| x - origin).sum::<f64>() / series.len() as f64
}

fn centered(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = series.len() as f64;
    let origin = series[0];
    let shift = series.iter().map(|x| x - origin).sum::<f64>() / n;
    let d: Vec<f64> = series.iter().map(|x| (x - origin) - shift).collect();
    let var = d.iter().map(|v| v * v).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::DegenerateSeries);
    }
    Ok((d, var))
}

fn autocov(d: &[f64], lag: usize) -> f64 {
    d.iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / d.len() as f64
}

/// Autocorrelation for lags `0..=max_lag`. Covariances use divisor `N` over
/// the available pairs and are normalized by the full-series variance.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(Error::InsufficientData(format!(
            "acf up to lag {max_lag} needs more than {max_lag} points, got {}",
            series.len()
        )));
    }
    let (d, var) = centered(series)?;
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    out.extend((1..=max_lag).map(|t| autocov(&d, t) / var));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau_int: f64,
    pub error: f64,
    pub window: usize,
}

impl TauEstimate {
    /// The inefficiency factor `2 tau_int`.
    pub fn inefficiency(&self) -> f64 {
        2.0 * self.tau_int
    }
}

/// `tau_int = 1/2 + sum_{t=1}^{W} acf(t)`, with `W` the first lag satisfying
/// `W >= 6 tau_int(W)`. The error is `tau_int sqrt(2 (2W + 1) / N)`.
pub fn integrated_autocorr_time(series: &[f64]) -> Result<TauEstimate> {
    let n = series.len();
    if n < MIN_TAU_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "tau_int needs at least {MIN_TAU_SAMPLES} samples, got {n}"
        )));
    }
    let (d, var) = centered(series)?;
    let mut tau = 0.5;
    for w in 1..n / 2 {
        tau += autocov(&d, w) / var;
        if w as f64 >= WINDOW_FACTOR * tau {
            let error = tau * (2.0 * (2 * w + 1) as f64 / n as f64).sqrt();
            return Ok(TauEstimate {
                tau_int: tau,
                error,
                window: w,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "no self-consistent window below N/2 = {} (tau_int reached {tau:.3})",
        n / 2
    )))
}

/// Block jackknife standard error of the mean over `n_blocks` contiguous
/// blocks.
pub fn jackknife_se(series: &[f64], n_blocks: usize) -> Result<f64> {
    let n = series.len();
    if n_blocks < 2 || n < 2 * n_blocks {
        return Err(Error::domain(format!(
            "jackknife with {n_blocks} blocks needs at least 2 blocks and {} samples, got {n}",
            2 * n_blocks.max(2)
        )));
    }
    // offsets from the first value keep constant series exactly zero
    let origin = series[0];
    let total: f64 = series.iter().map(|x| x - origin).sum();
    let loo: Vec<f64> = (0..n_blocks)
        .map(|b| {
            let (lo, hi) = (b * n / n_blocks, (b + 1) * n / n_blocks);
            let block: f64 = series[lo..hi].iter().map(|x| x - origin).sum();
            (total - block) / (n - (hi - lo)) as f64
        })
        .collect();
    let b = n_blocks as f64;
    let mean = loo.iter().sum::<f64>() / b;
    let ss: f64 = loo.iter().map(|m| (m - mean).powi(2)).sum();
    Ok(((b - 1.0) / b * ss).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub jackknife_se: f64,
    /// `None` when the column is constant.
    pub two_tau_int: Option<f64>,
    pub two_tau_int_error: Option<f64>,
    /// `jackknife_se / (sqrt(2 tau_int / N) sd)`.
    pub se_consistency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub model: ModelKind,
    pub n_samples: usize,
    pub n_observations: usize,
    pub sigma1_sq: f64,
    pub jackknife_blocks: usize,
    pub acceptance_overall: f64,
    /// Mean acceptance over the last ten windows.
    pub acceptance_plateau: Option<f64>,
    pub parameters: Vec<ParameterSummary>,
    /// Stationary variance at the posterior mean, when it is stationary.
    pub unconditional_variance: Option<f64>,
}

impl SummaryReport {
    pub fn posterior_mean(&self) -> ModelParams {
        let v: Vec<f64> = self.parameters.iter().map(|p| p.mean).collect();
        ModelParams::from_vector(self.model, &v).expect("one summary per parameter")
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Plain-text table: one column per parameter, one row per statistic.
    pub fn to_table(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
        let mut rows: Vec<(&str, Vec<String>)> = vec![
            ("", self.parameters.iter().map(|p| p.name.clone()).collect()),
            ("mean", self.parameters.iter().map(|p| p.mean.to_string()).collect()),
            ("SD", self.parameters.iter().map(|p| p.sd.to_string()).collect()),
            ("SE", self.parameters.iter().map(|p| p.jackknife_se.to_string()).collect()),
        ];
        rows.push((
            "2tau_int",
            self.parameters
                .iter()
                .map(|p| format!("{} ± {}", fmt_opt(p.two_tau_int), fmt_opt(p.two_tau_int_error)))
                .collect(),
        ));
        let label_w = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
        let col_w: Vec<usize> = (0..self.parameters.len())
            .map(|c| rows.iter().map(|(_, r)| r[c].chars().count()).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} model, N = {} samples, {} observations",
            self.model, self.n_samples, self.n_observations
        );
        for (label, cells) in &rows {
            let _ = write!(out, "{label:<label_w$}");
            for (cell, w) in cells.iter().zip(&col_w) {
                let pad = w - cell.chars().count();
                let _ = write!(out, "  {}{cell}", " ".repeat(pad));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "acceptance overall {}", self.acceptance_overall);
        if let Some(p) = self.acceptance_plateau {
            let _ = writeln!(out, "acceptance plateau {p}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    pub jackknife_blocks: usize,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            jackknife_blocks: DEFAULT_JACKKNIFE_BLOCKS,
        }
    }
}

pub fn summarize(result: &ChainResult, returns: &ReturnSeries) -> Result<SummaryReport> {
    summarize_with(result, returns, &SummaryOptions::default())
}

pub fn summarize_with(result: &ChainResult, returns: &ReturnSeries, opts: &SummaryOptions) -> Result<SummaryReport> {
    let n = result.samples.len();
    if n == 0 {
        return Err(Error::InsufficientData("chain has no samples".into()));
    }
    let parameters = result
        .kind
        .param_names()
        .iter()
        .enumerate()
        .map(|(k, name)| summarize_column(name, &result.column(k), opts.jackknife_blocks))
        .collect::<Result<Vec<_>>>()?;

    let trace = &result.acceptance_trace;
    let acceptance_plateau = (!trace.is_empty()).then(|| {
        let tail = &trace[trace.len().saturating_sub(PLATEAU_WINDOWS)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    });

    let mut report = SummaryReport {
        model: result.kind,
        n_samples: n,
        n_observations: returns.len(),
        sigma1_sq: result.sigma1_sq,
        jackknife_blocks: opts.jackknife_blocks,
        acceptance_overall: result.acceptance_rate(),
        acceptance_plateau,
        parameters,
        unconditional_variance: None,
    };
    report.unconditional_variance = unconditional_variance(&report.posterior_mean()).ok();
    Ok(report)
}

fn summarize_column(name: &str, x: &[f64], blocks: usize) -> Result<ParameterSummary> {
    let n = x.len() as f64;
    let mean = mean(x);
    let sd = if x.len() > 1 {
        (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let jackknife_se = jackknife_se(x, blocks)?;
    let tau = match integrated_autocorr_time(x) {
        Ok(t) => Some(t),
        Err(Error::DegenerateSeries) => None,
        Err(e) => return Err(e),
    };
    let se_consistency = tau.map(|t| jackknife_se / ((t.inefficiency() / n).sqrt() * sd));
    Ok(ParameterSummary {
        name: name.to_string(),
        mean,
        sd,
        jackknife_se,
        two_tau_int: tau.map(|t| t.inefficiency()),
        two_tau_int_error: tau.map(|t| 2.0 * t.error),
        se_consistency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposal::ProposalSnapshot;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn white_noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
        let e = white_noise(n + 1000, seed);
        let mut x = 0.0;
        let mut out = Vec::with_capacity(n);
        for (i, v) in e.into_iter().enumerate() {
            x = rho * x + v;
            if i >= 1000 {
                out.push(x);
            }
        }
        out
    }

    fn chain(samples: Vec<Vec<f64>>, kind: ModelKind) -> ChainResult {
        ChainResult {
            kind,
            sigma1_sq: 1.0,
            samples,
            acceptance_trace: vec![0.5, 0.7, 0.8],
            update_interval: 10,
            moment_trace: vec![],
            warmup_samples: vec![],
            accepted: 0,
            final_proposal: ProposalSnapshot {
                mean: vec![],
                sigma: vec![],
                nu: 10.0,
                jitter: 0.0,
            },
        }
    }

    #[test]
    fn acf_lag_zero_and_errors() {
        let x = [1.0, 3.0, 2.0, 5.0, 4.0];
        let a = acf(&x, 3).unwrap();
        assert_eq!(a[0], 1.0);
        // lag 1 by hand: mean 3, d = (-2, 0, -1, 2, 1), var = 2
        // sum d_j d_{j+1} = 0 + 0 - 2 + 2 = 0
        assert!(a[1].abs() < 1e-15);
        assert!(matches!(acf(&[2.0; 10], 2), Err(Error::DegenerateSeries)));
        assert!(acf(&x, 5).is_err());
    }

    #[test]
    fn acf_white_noise_band() {
        let x = white_noise(100_000, 1);
        let a = acf(&x, 20).unwrap();
        let band = 3.0 / (x.len() as f64).sqrt();
        assert!(a[1..].iter().all(|v| v.abs() < band), "{a:?}");
    }

    #[test]
    fn acf_ar1() {
        let x = ar1(100_000, 0.5, 2);
        let a = acf(&x, 5).unwrap();
        for (t, v) in a.iter().enumerate() {
            assert!((v - 0.5f64.powi(t as i32)).abs() < 0.02, "lag {t}: {v}");
        }
    }

    #[test]
    fn tau_white_noise_and_ar1() {
        let t = integrated_autocorr_time(&white_noise(100_000, 3)).unwrap();
        assert!((t.inefficiency() - 1.0).abs() < 0.05, "{t:?}");
        let t = integrated_autocorr_time(&ar1(100_000, 0.5, 4)).unwrap();
        assert!((t.inefficiency() / 3.0 - 1.0).abs() < 0.1, "{t:?}");
        assert!(t.window as f64 >= WINDOW_FACTOR * t.tau_int);
        assert!(t.error > 0.0);
    }

    #[test]
    fn tau_errors() {
        assert!(matches!(integrated_autocorr_time(&[1.0; 500]), Err(Error::DegenerateSeries)));
        assert!(matches!(integrated_autocorr_time(&[1.0, 2.0]), Err(Error::InsufficientData(_))));
        // a slow trend never satisfies the window condition
        let trend: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert!(matches!(integrated_autocorr_time(&trend), Err(Error::NonConvergence(_))));
    }

    #[test]
    fn jackknife_cases() {
        assert_eq!(jackknife_se(&[0.7; 1000], 50).unwrap(), 0.0);
        let x = white_noise(100_000, 5);
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = jackknife_se(&x, 50).unwrap();
        assert!((se / (sd / n.sqrt()) - 1.0).abs() < 0.2, "{se}");
        assert!(jackknife_se(&x[..99], 50).is_err());
        assert!(jackknife_se(&x, 1).is_err());
    }

    #[test]
    fn jackknife_hand_case() {
        // blocks (1,4) (2,8) (5,7): leave-one-out means 5.5, 4.25, 3.75
        let se = jackknife_se(&[1.0, 4.0, 2.0, 8.0, 5.0, 7.0], 3).unwrap();
        assert!((se - (2.0 / 3.0 * 1.625f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_chain_summary() {
        let r = chain(vec![vec![0.1, 0.2, 0.7]; 200], ModelKind::Garch);
        let y = ReturnSeries::from_raw(vec![1.0, -1.0]).unwrap();
        let s = summarize_with(&r, &y, &SummaryOptions { jackknife_blocks: 10 }).unwrap();
        for (p, want) in s.parameters.iter().zip([0.1, 0.2, 0.7]) {
            assert_eq!(p.mean, want);
            assert_eq!(p.sd, 0.0);
            assert_eq!(p.jackknife_se, 0.0);
            assert!(p.two_tau_int.is_none());
        }
        assert_eq!(s.n_observations, 2);
        assert!((s.acceptance_plateau.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn white_noise_chain_summary() {
        let cols: Vec<Vec<f64>> = (0..4).map(|k| white_noise(100_000, 10 + k)).collect();
        let samples: Vec<Vec<f64>> = (0..100_000).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let r = chain(samples, ModelKind::Qgarch);
        let y = ReturnSeries::from_raw(vec![1.0, -1.0]).unwrap();
        let s = summarize(&r, &y).unwrap();
        let n = 100_000f64;
        for (k, p) in s.parameters.iter().enumerate() {
            let col = &cols[k];
            let m = col.iter().sum::<f64>() / n;
            assert!((p.mean - m).abs() < 1e-12);
            assert!((p.two_tau_int.unwrap() - 1.0).abs() < 0.1);
            assert!((p.jackknife_se / (p.sd / n.sqrt()) - 1.0).abs() < 0.25);
            let c = p.se_consistency.unwrap();
            assert!((0.5..=2.0).contains(&c));
        }
        let table = s.to_table();
        assert!(table.contains("omega") && table.contains("2tau_int"));
    }

    proptest! {
        #[test]
        fn acf_bounded(x in proptest::collection::vec(-10.0..10.0f64, 30..300)) {
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-6));
            let a = acf(&x, 20).unwrap();
            prop_assert!(a.iter().all(|v| v.abs() <= 1.01));
        }

        #[test]
        fn jackknife_shift_and_scale(
            x in proptest::collection::vec(-10.0..10.0f64, 40..400),
            shift in -100.0..100.0f64,
            c in 0.01..100.0f64,
        ) {
            let se = jackknife_se(&x, 10).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            prop_assert!((jackknife_se(&shifted, 10).unwrap() - se).abs() < 1e-9 * (1.0 + se));
            prop_assert!((jackknife_se(&scaled, 10).unwrap() - c * se).abs() < 1e-9 * (1.0 + c * se));
        }
    }
}
