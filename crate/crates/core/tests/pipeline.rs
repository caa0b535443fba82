use qgarch_core::data::{load_prices, simulate_qgarch_raw, to_returns, Column};
use qgarch_core::diagnostics::{summarize_with, SummaryOptions};
use qgarch_core::model::{log_likelihood, ModelKind, ModelParams};
use qgarch_core::sampler::{run_adaptive, ChainConfig, Sigma1Policy};
use qgarch_core::Error;

fn prices_from_returns(returns: &[f64]) -> String {
    let mut price = 1000.0;
    let mut text = format!("{price}\n");
    for r in returns {
        price *= (r / 100.0).exp();
        text.push_str(&format!("{price}\n"));
    }
    text
}

#[test]
fn prices_to_posterior() {
    let truth = ModelParams::garch(0.05, 0.08, 0.9);
    let raw = simulate_qgarch_raw(&truth, 2000, 2.5, 21).unwrap();
    let prices = load_prices(prices_from_returns(&raw).as_bytes(), &Column::default()).unwrap();
    assert_eq!(prices.len(), 2001);
    let y = to_returns(&prices);
    assert_eq!(y.len(), 2000);
    assert!(y.mean().abs() < 1e-10);

    let cfg = ChainConfig {
        burn_in: 2000,
        initial_pool: 500,
        update_interval: 500,
        total_samples: 20_000,
        ..ChainConfig::new(ModelKind::Garch, 1)
    };
    let chain = run_adaptive(&cfg, &y).unwrap();
    let report = summarize_with(&chain, &y, &SummaryOptions { jackknife_blocks: 20 }).unwrap();

    for (p, t) in report.parameters.iter().zip(truth.to_vector()) {
        assert!(((p.mean - t) / p.sd).abs() < 3.0, "{} {} vs {t}", p.name, p.mean);
        assert!(p.two_tau_int.unwrap() < 5.0);
    }
    assert!(report.acceptance_plateau.unwrap() > 0.5);

    // the posterior mean is a better fit than the starting guess
    let start = qgarch_core::sampler::default_theta0(ModelKind::Garch, &y);
    let s1 = y.sample_variance();
    assert!(log_likelihood(&report.posterior_mean(), &y, s1).unwrap() > log_likelihood(&start, &y, s1).unwrap());
}

#[test]
fn explicit_initial_variance_is_used() {
    let truth = ModelParams::qgarch(0.06, 0.08, 0.88, -0.1);
    let y = qgarch_core::simulate_qgarch(&truth, 500, 1.5, 2).unwrap();
    let cfg = ChainConfig {
        burn_in: 200,
        initial_pool: 100,
        update_interval: 100,
        total_samples: 500,
        sigma1_sq: Sigma1Policy::Explicit(3.0),
        ..ChainConfig::new(ModelKind::Qgarch, 4)
    };
    assert_eq!(run_adaptive(&cfg, &y).unwrap().sigma1_sq, 3.0);
}

#[test]
fn short_chains_surface_insufficient_data() {
    let truth = ModelParams::qgarch(0.06, 0.08, 0.88, -0.1);
    let y = qgarch_core::simulate_qgarch(&truth, 300, 1.5, 2).unwrap();
    let cfg = ChainConfig {
        burn_in: 100,
        initial_pool: 50,
        update_interval: 10,
        total_samples: 60,
        ..ChainConfig::new(ModelKind::Qgarch, 4)
    };
    let chain = run_adaptive(&cfg, &y).unwrap();
    let err = summarize_with(&chain, &y, &SummaryOptions { jackknife_blocks: 10 }).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err:?}");
}
