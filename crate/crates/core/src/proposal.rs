//! Multivariate Student's t proposal density.
//!
//! The proposal is parameterized by its location `M`, scale matrix `Sigma`
//! and degrees of freedom `nu`. It is fitted from sampled states through
//! their mean and covariance `V`, using `nu Sigma / (nu - 2) = V`, and
//! sampled as `theta = L X + M` with `Sigma = L L^T`, `X = Y sqrt(nu / w)`,
//! `Y ~ N(0, I)` and `w ~ chi^2_nu`.

use nalgebra::Cholesky;
pub use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Number of times the diagonal jitter is doubled before giving up.
pub const MAX_JITTER_DOUBLINGS: usize = 10;
const JITTER_SCALE: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;

/// Sample mean and unbiased sample covariance of a set of states.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: DVector<f64>,
    pub second_central: DMatrix<f64>,
}

impl MomentEstimate {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance_rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.second_central)
    }
}

pub fn estimate_moments<S: AsRef<[f64]>>(samples: &[S]) -> Result<MomentEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "moment estimation needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let p = samples[0].as_ref().len();
    if p == 0 || samples.iter().any(|s| s.as_ref().len() != p) {
        return Err(Error::domain("samples must share a nonzero dimension"));
    }
    let n = samples.len() as f64;
    // accumulate offsets from the first sample so identical samples give an
    // exactly zero covariance
    let origin = samples[0].as_ref();
    let mut shift = DVector::zeros(p);
    for s in samples {
        for (k, v) in s.as_ref().iter().enumerate() {
            shift[k] += v - origin[k];
        }
    }
    shift /= n;

    let mut cov = DMatrix::zeros(p, p);
    let mut d = vec![0.0; p];
    for s in samples {
        for (k, v) in s.as_ref().iter().enumerate() {
            d[k] = (v - origin[k]) - shift[k];
        }
        for i in 0..p {
            for j in 0..=i {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    let mean = DVector::from_fn(p, |k, _| origin[k] + shift[k]);
    for i in 0..p {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(MomentEstimate {
        mean,
        second_central: cov,
    })
}

#[derive(Debug, Clone)]
pub struct ProposalDensity {
    mean: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    nu: f64,
    jitter: f64,
    log_norm: f64,
    chi_sq: ChiSquared<f64>,
}

/// Serializable view of a proposal, for trace output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSnapshot {
    pub mean: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub nu: f64,
    pub jitter: f64,
}

/// Fits a Student's t proposal to estimated moments.
///
/// `Sigma = (nu - 2) / nu * V`. When `Sigma` is not numerically positive
/// definite, `eps I` is added with `eps = 1e-8 max(1, tr(V) / p)`, doubling
/// `eps` until the factorization succeeds or the doubling budget runs out.
pub fn build_proposal(moments: &MomentEstimate, nu: f64) -> Result<ProposalDensity> {
    if !(nu > 2.0) || !nu.is_finite() {
        return Err(Error::domain(format!("degrees of freedom must be finite and > 2, got {nu}")));
    }
    let v = &moments.second_central;
    let p = moments.dim();
    if v.nrows() != p || v.ncols() != p {
        return Err(Error::domain("covariance shape does not match mean"));
    }
    if v.iter().chain(moments.mean.iter()).any(|x| !x.is_finite()) {
        return Err(Error::domain("moments contain non-finite values"));
    }
    let scale = v.amax().max(1.0);
    for i in 0..p {
        for j in 0..i {
            if (v[(i, j)] - v[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::domain(format!("covariance not symmetric at ({i}, {j})")));
            }
        }
    }

    let base = v * ((nu - 2.0) / nu);
    let mut jitter = 0.0;
    let mut factor = Cholesky::new(base.clone());
    if factor.is_none() {
        let eps0 = JITTER_SCALE * (v.trace() / p as f64).max(1.0);
        for k in 0..=MAX_JITTER_DOUBLINGS {
            let eps = eps0 * 2f64.powi(k as i32);
            let attempt = &base + DMatrix::identity(p, p) * eps;
            if let Some(c) = Cholesky::new(attempt) {
                jitter = eps;
                factor = Some(c);
                break;
            }
        }
    }
    let chol = factor
        .ok_or(Error::DegenerateCovariance {
            attempts: MAX_JITTER_DOUBLINGS + 1,
        })?
        .unpack();
    let sigma = &base + DMatrix::identity(p, p) * jitter;

    let pf = p as f64;
    let log_det_half: f64 = chol.diagonal().iter().map(|d| d.ln()).sum();
    let log_norm = ln_gamma((nu + pf) / 2.0)
        - ln_gamma(nu / 2.0)
        - log_det_half
        - 0.5 * pf * (nu * std::f64::consts::PI).ln();

    Ok(ProposalDensity {
        mean: moments.mean.clone(),
        sigma,
        chol,
        nu,
        jitter,
        log_norm,
        chi_sq: ChiSquared::new(nu).expect("nu > 2"),
    })
}

impl ProposalDensity {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower-triangular `L` with `L L^T = Sigma`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Diagonal regularization added to `Sigma`, zero when none was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let p = self.dim();
        let y: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let w = self.chi_sq.sample(rng);
        let s = (self.nu / w).sqrt();
        (0..p)
            .map(|i| {
                let lx: f64 = (0..=i).map(|j| self.chol[(i, j)] * y[j]).sum();
                self.mean[i] + lx * s
            })
            .collect()
    }

    /// Normalized log density.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::domain(format!(
                "theta has dimension {}, proposal has {}",
                theta.len(),
                self.dim()
            )));
        }
        Ok(self.log_density_unchecked(theta))
    }

    pub(crate) fn log_density_unchecked(&self, theta: &[f64]) -> f64 {
        let p = self.dim();
        // forward substitution for z = L^{-1} (theta - M)
        let mut z = vec![0.0; p];
        let mut quad = 0.0;
        for i in 0..p {
            let mut acc = theta[i] - self.mean[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * z[j];
            }
            z[i] = acc / self.chol[(i, i)];
            quad += z[i] * z[i];
        }
        self.log_norm - 0.5 * (self.nu + p as f64) * (quad / self.nu).ln_1p()
    }

    pub fn snapshot(&self) -> ProposalSnapshot {
        ProposalSnapshot {
            mean: self.mean.iter().copied().collect(),
            sigma: matrix_rows(&self.sigma),
            nu: self.nu,
            jitter: self.jitter,
        }
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
