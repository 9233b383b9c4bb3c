//! EWMA / MEWMA chart statistic.
//!
//! The free functions (`init_state`, `update`, `cov_z`, `statistic`,
//! `signals`) are the reference definitions. [`MewmaChart`] is the
//! allocation-free engine used by the simulator; it implements the
//! [`Chart`] trait so other memory-type statistics can be plugged into the
//! Monte Carlo layer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ChartDesign, ProcessModel};

/// EWMA vector `z` after `m` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartState {
    pub m: u64,
    pub z: Vec<f64>,
}

pub fn init_state(q: usize) -> Result<ChartState> {
    if q == 0 {
        return Err(Error::InvalidDimension(0));
    }
    Ok(ChartState {
        m: 0,
        z: vec![0.0; q],
    })
}

/// One EWMA step in deviation form: `z' = R(x̄ − μ₀) + (I − R) z`.
pub fn update(
    state: &ChartState,
    xbar: &[f64],
    mu0: &[f64],
    weights: &[f64],
) -> Result<ChartState> {
    let q = state.z.len();
    for v in [xbar, mu0, weights] {
        if v.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: v.len(),
            });
        }
    }
    let z = (0..q)
        .map(|j| weights[j] * (xbar[j] - mu0[j]) + (1.0 - weights[j]) * state.z[j])
        .collect();
    Ok(ChartState { m: state.m + 1, z })
}

/// Covariance of `z` after `m ≥ 1` samples (row-major q×q, q = `weights.len()`).
///
/// Equal weights use the closed form `r(1 − (1−r)^{2m}) / (n(2−r)) · Σ`;
/// unequal weights run the exact recursion
/// `Σ_m = R (Σ/n) R + (I − R) Σ_{m−1} (I − R)` from `Σ_0 = 0`.
pub fn cov_z(weights: &[f64], m: u64, n: u32, sigma: &[f64]) -> Vec<f64> {
    let q = weights.len();
    debug_assert_eq!(sigma.len(), q * q);
    let r = weights[0];
    if weights.iter().all(|&w| w == r) {
        let c = equal_weight_factor(r, m, n);
        return sigma.iter().map(|s| c * s).collect();
    }
    cov_z_recursive(weights, m, n, sigma)
}

/// `r(1 − (1−r)^{2m}) / (n(2−r))`.
pub fn equal_weight_factor(r: f64, m: u64, n: u32) -> f64 {
    let decay = (1.0 - r).powf(2.0 * m as f64);
    r * (1.0 - decay) / (n as f64 * (2.0 - r))
}

/// Limit of `cov_z` as `m → ∞`.
pub fn cov_z_asymptotic(weights: &[f64], n: u32, sigma: &[f64]) -> Vec<f64> {
    let q = weights.len();
    let mut out = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            let (ri, rj) = (weights[i], weights[j]);
            out[i * q + j] =
                ri * rj * sigma[i * q + j] / n as f64 / (1.0 - (1.0 - ri) * (1.0 - rj));
        }
    }
    out
}

/// The general recursion for `cov_z`, valid for any weights.
pub fn cov_z_recursive(weights: &[f64], m: u64, n: u32, sigma: &[f64]) -> Vec<f64> {
    let q = weights.len();
    let mut s = vec![0.0; q * q];
    for _ in 0..m {
        recursion_step(weights, n, sigma, &mut s);
    }
    s
}

fn recursion_step(weights: &[f64], n: u32, sigma: &[f64], s: &mut [f64]) {
    let q = weights.len();
    for i in 0..q {
        for j in 0..q {
            let (ri, rj) = (weights[i], weights[j]);
            let k = i * q + j;
            s[k] = ri * rj * (sigma[k] / n as f64) + (1.0 - ri) * (1.0 - rj) * s[k];
        }
    }
}

/// `Y = sqrt(z' cov⁻¹ z)`.
pub fn statistic(state: &ChartState, cov: &[f64]) -> Result<f64> {
    Ok(linalg::quad_form_inv(cov, &state.z)?.sqrt())
}

/// Signal rule: strictly above the limit.
#[inline]
pub fn signals(y: f64, ul: f64) -> bool {
    y > ul
}

/// Which covariance normalizes the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMode {
    /// The exact covariance of `z` at each sample index.
    #[default]
    Exact,
    /// The steady-state covariance at every index.
    Asymptotic,
}

/// A monitoring statistic that consumes sample-mean deviations `x̄ − μ₀`.
///
/// Implementations must be cheap to clone: the simulator clones a prototype
/// for every run and to branch a warmed-up chart.
pub trait Chart: Clone + Send + Sync {
    fn dimension(&self) -> usize;

    /// Back to the fresh state at the start of a cycle.
    fn reset(&mut self);

    /// Feeds one deviation vector and returns the plotted statistic.
    fn observe(&mut self, deviation: &[f64]) -> f64;

    fn limit(&self) -> f64;

    /// Number of samples observed since the last reset.
    fn samples_seen(&self) -> u64;

    #[inline]
    fn observe_signals(&mut self, deviation: &[f64]) -> bool {
        let y = self.observe(deviation);
        signals(y, self.limit())
    }
}

#[derive(Debug)]
enum Whitening {
    /// `cov_m = c_m Σ`; holds the Cholesky factor of Σ and `1/c_m` for
    /// m = 1..len, the last entry repeating once the factor has converged.
    Scaled {
        chol: Vec<f64>,
        inv_factor: Vec<f64>,
    },
    /// Cholesky factor of `cov_m` for m = 1..len, last entry repeating.
    General { chols: Vec<Vec<f64>> },
}

/// MEWMA chart (EWMA when q = 1) with per-characteristic weights.
#[derive(Debug)]
pub struct MewmaChart {
    weights: Arc<Vec<f64>>,
    whitening: Arc<Whitening>,
    ul: f64,
    z: Vec<f64>,
    scratch: Vec<f64>,
    m: u64,
}

/// Longest precomputed covariance table.
const MAX_TABLE: usize = 1 << 20;

impl MewmaChart {
    pub fn new(design: &ChartDesign, process: &ProcessModel, mode: CovarianceMode) -> Result<Self> {
        design.validate()?;
        process.validate()?;
        design.check_dimension(process.q)?;
        let q = process.q;
        let sigma = process.sigma_flat();
        let weights = design.weights.clone();
        let n = design.n;

        let whitening = if let Some(r) = design.common_weight() {
            let chol = linalg::cholesky_lower(&sigma, q)?;
            let asymptotic = r / (n as f64 * (2.0 - r));
            let inv_factor = match mode {
                CovarianceMode::Asymptotic => vec![1.0 / asymptotic],
                CovarianceMode::Exact => {
                    let mut v = Vec::new();
                    for m in 1..=MAX_TABLE as u64 {
                        let c = equal_weight_factor(r, m, n);
                        v.push(1.0 / c);
                        if c == asymptotic {
                            break;
                        }
                    }
                    v
                }
            };
            Whitening::Scaled { chol, inv_factor }
        } else {
            let chols = match mode {
                CovarianceMode::Asymptotic => {
                    vec![linalg::cholesky_lower(
                        &cov_z_asymptotic(&weights, n, &sigma),
                        q,
                    )?]
                }
                CovarianceMode::Exact => {
                    let mut s = vec![0.0; q * q];
                    let mut out = Vec::new();
                    while out.len() < MAX_TABLE {
                        let prev = s.clone();
                        recursion_step(&weights, n, &sigma, &mut s);
                        out.push(linalg::cholesky_lower(&s, q)?);
                        if prev == s {
                            break;
                        }
                    }
                    out
                }
            };
            Whitening::General { chols }
        };

        Ok(MewmaChart {
            weights: Arc::new(weights),
            whitening: Arc::new(whitening),
            ul: design.ul,
            z: vec![0.0; q],
            scratch: vec![0.0; q],
            m: 0,
        })
    }

    pub fn state(&self) -> ChartState {
        ChartState {
            m: self.m,
            z: self.z.clone(),
        }
    }
}

impl Clone for MewmaChart {
    fn clone(&self) -> Self {
        MewmaChart {
            weights: Arc::clone(&self.weights),
            whitening: Arc::clone(&self.whitening),
            ul: self.ul,
            z: self.z.clone(),
            scratch: self.scratch.clone(),
            m: self.m,
        }
    }

    // Branching clones a warmed-up chart once per warm-up length; reuse buffers.
    fn clone_from(&mut self, source: &Self) {
        if !Arc::ptr_eq(&self.whitening, &source.whitening) {
            self.whitening = Arc::clone(&source.whitening);
            self.weights = Arc::clone(&source.weights);
        }
        self.ul = source.ul;
        self.z.clone_from(&source.z);
        self.scratch.resize(source.scratch.len(), 0.0);
        self.m = source.m;
    }
}

impl Chart for MewmaChart {
    fn dimension(&self) -> usize {
        self.z.len()
    }

    fn reset(&mut self) {
        self.z.iter_mut().for_each(|v| *v = 0.0);
        self.m = 0;
    }

    #[inline]
    fn observe(&mut self, deviation: &[f64]) -> f64 {
        for ((z, &r), &d) in self.z.iter_mut().zip(self.weights.iter()).zip(deviation) {
            *z = r * d + (1.0 - r) * *z;
        }
        self.m += 1;
        let idx = self.m as usize - 1;
        match &*self.whitening {
            Whitening::Scaled { chol, inv_factor } => {
                let f = inv_factor[idx.min(inv_factor.len() - 1)];
                (linalg::whitened_norm_sq(chol, &self.z, &mut self.scratch) * f).sqrt()
            }
            Whitening::General { chols } => {
                let l = &chols[idx.min(chols.len() - 1)];
                linalg::whitened_norm_sq(l, &self.z, &mut self.scratch).sqrt()
            }
        }
    }

    fn limit(&self) -> f64 {
        self.ul
    }

    fn samples_seen(&self) -> u64 {
        self.m
    }
}
