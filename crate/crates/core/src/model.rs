//! Process, economic and chart-design types, plus the benchmark catalog.

mod catalog;

pub use catalog::{catalog, load_instance, read_instances, write_instances, INSTANCE_IDS};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// The monitored process: in/out-of-control means, covariance and failure rate.
///
/// `sigma` is stored as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub q: usize,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl ProcessModel {
    pub fn new(mu0: Vec<f64>, mu1: Vec<f64>, sigma: Vec<Vec<f64>>, lambda: f64) -> Result<Self> {
        let p = ProcessModel {
            q: mu0.len(),
            mu0,
            mu1,
            sigma,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// Univariate process with unit variance.
    pub fn univariate(mu0: f64, mu1: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![mu0], vec![mu1], vec![vec![1.0]], lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidDimension(0));
        }
        for v in [&self.mu0, &self.mu1] {
            if v.len() != self.q {
                return Err(Error::DimensionMismatch {
                    expected: self.q,
                    got: v.len(),
                });
            }
        }
        if self.sigma.len() != self.q {
            return Err(Error::DimensionMismatch {
                expected: self.q,
                got: self.sigma.len(),
            });
        }
        if let Some(row) = self.sigma.iter().find(|r| r.len() != self.q) {
            return Err(Error::DimensionMismatch {
                expected: self.q,
                got: row.len(),
            });
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "failure rate must be positive, got {}",
                self.lambda
            )));
        }
        linalg::cholesky_lower(&self.sigma_flat(), self.q)?;
        Ok(())
    }

    /// Row-major copy of the covariance.
    pub fn sigma_flat(&self) -> Vec<f64> {
        self.sigma.iter().flatten().copied().collect()
    }

    /// `mu1 - mu0`.
    pub fn shift(&self) -> Vec<f64> {
        self.mu1.iter().zip(&self.mu0).map(|(a, b)| a - b).collect()
    }

    /// Same process with a different out-of-control mean.
    pub fn with_mu1(&self, mu1: Vec<f64>) -> Result<Self> {
        Self::new(self.mu0.clone(), mu1, self.sigma.clone(), self.lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.mu0.clone(),
            self.mu1.clone(),
            self.sigma.clone(),
            lambda,
        )
    }
}

/// Economic parameters of the quality-control cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Cost per time unit while in control.
    pub c0: f64,
    /// Cost per time unit while out of control.
    pub c1: f64,
    /// Cost per false alarm.
    pub cf: f64,
    /// Cost to locate and repair an assignable cause.
    pub clr: f64,
    /// Fixed cost per sample.
    pub a: f64,
    /// Variable cost per sampled unit.
    pub b: f64,
    /// Time to sample and chart one item.
    pub ts: f64,
    /// Time to locate an assignable cause.
    pub tl: f64,
    /// Time to repair.
    pub tr: f64,
    /// Search time per false alarm.
    pub tf: f64,
    /// Production continues during searches.
    pub gamma1: bool,
    /// Production continues during repair.
    pub gamma2: bool,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c0", self.c0),
            ("c1", self.c1),
            ("cf", self.cf),
            ("clr", self.clr),
            ("a", self.a),
            ("b", self.b),
            ("ts", self.ts),
            ("tl", self.tl),
            ("tr", self.tr),
            ("tf", self.tf),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn g1(&self) -> f64 {
        if self.gamma1 {
            1.0
        } else {
            0.0
        }
    }

    pub fn g2(&self) -> f64 {
        if self.gamma2 {
            1.0
        } else {
            0.0
        }
    }
}

/// Designable chart parameters: sample size, interval, limit and EWMA weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDesign {
    pub n: u32,
    pub h: f64,
    pub ul: f64,
    pub weights: Vec<f64>,
}

impl ChartDesign {
    pub fn new(n: u32, h: f64, ul: f64, weights: Vec<f64>) -> Result<Self> {
        let d = ChartDesign { n, h, ul, weights };
        d.validate()?;
        Ok(d)
    }

    /// Design with the same weight `r` on every one of `q` characteristics.
    pub fn equal_weights(n: u32, h: f64, ul: f64, r: f64, q: usize) -> Result<Self> {
        Self::new(n, h, ul, vec![r; q])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("sample size n must be at least 1"));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!(
                "sampling interval h must be positive, got {}",
                self.h
            )));
        }
        if self.ul.is_nan() || self.ul <= 0.0 {
            return Err(invalid(format!(
                "control limit must be positive, got {}",
                self.ul
            )));
        }
        if self.weights.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(r) = self.weights.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
            return Err(invalid(format!("weights must lie in (0, 1], got {r}")));
        }
        Ok(())
    }

    /// Copy with every weight replaced by `r`.
    pub fn with_weight(&self, r: f64) -> Result<Self> {
        Self::new(self.n, self.h, self.ul, vec![r; self.weights.len()])
    }

    /// The common weight when all weights are equal.
    pub fn common_weight(&self) -> Option<f64> {
        let r = self.weights[0];
        self.weights.iter().all(|&w| w == r).then_some(r)
    }

    pub(crate) fn check_dimension(&self, q: usize) -> Result<()> {
        if self.weights.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: self.weights.len(),
            });
        }
        Ok(())
    }
}

/// A named benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub process: ProcessModel,
    pub costs: CostParams,
    pub design_defaults: ChartDesign,
    /// Target non-centrality of the shift.
    pub delta: f64,
}

impl Instance {
    /// Checks every component and that `delta` matches the process shift.
    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        self.costs.validate()?;
        self.design_defaults.validate()?;
        self.design_defaults.check_dimension(self.process.q)?;
        let computed = noncentrality(&self.process, self.design_defaults.n)?;
        let tol = 1e-9 * self.delta.abs().max(f64::MIN_POSITIVE);
        if (computed - self.delta).abs() > tol && !(self.delta == 0.0 && computed == 0.0) {
            return Err(Error::DeltaMismatch {
                id: self.id.clone(),
                stored: self.delta,
                computed,
            });
        }
        Ok(())
    }

    /// Default design with all weights set to `r`.
    pub fn design(&self, r: f64) -> Result<ChartDesign> {
        self.design_defaults.with_weight(r)
    }
}

/// `sqrt(n (mu1 - mu0)' Σ⁻¹ (mu1 - mu0))`.
pub fn noncentrality(process: &ProcessModel, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(invalid("sample size n must be at least 1"));
    }
    let d = process.shift();
    let qf = linalg::quad_form_inv(&process.sigma_flat(), &d)?;
    Ok((n as f64 * qf).sqrt())
}

/// Out-of-control mean `mu0 + c·direction` with `c ≥ 0` chosen so the shift
/// has non-centrality `delta` at sample size `n`.
pub fn shift_for_delta(
    process: &ProcessModel,
    delta: f64,
    n: u32,
    direction: &[f64],
) -> Result<Vec<f64>> {
    if direction.len() != process.q {
        return Err(Error::DimensionMismatch {
            expected: process.q,
            got: direction.len(),
        });
    }
    if direction.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroDirection);
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be non-negative, got {delta}")));
    }
    if n == 0 {
        return Err(invalid("sample size n must be at least 1"));
    }
    let unit = linalg::quad_form_inv(&process.sigma_flat(), direction)?;
    let c = delta / (n as f64 * unit).sqrt();
    Ok(process
        .mu0
        .iter()
        .zip(direction)
        .map(|(m, d)| m + c * d)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn trivariate_sigma() -> Vec<Vec<f64>> {
        vec![
            vec![2.0, 1.0, 1.0],
            vec![1.0, 3.0, 1.0],
            vec![1.0, 1.0, 3.0],
        ]
    }

    fn tri(mu1: Vec<f64>) -> ProcessModel {
        ProcessModel::new(vec![0.0; 3], mu1, trivariate_sigma(), 0.01).unwrap()
    }

    // Explicit adjugate inverse of the trivariate covariance: det = 12,
    // Σ⁻¹ = [[8,-2,-2],[-2,5,-1],[-2,-1,5]] / 12.
    fn explicit_quad(v: &[f64]) -> f64 {
        let inv = [[8.0, -2.0, -2.0], [-2.0, 5.0, -1.0], [-2.0, -1.0, 5.0]];
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += v[i] * inv[i][j] / 12.0 * v[j];
            }
        }
        s
    }

    #[test]
    fn univariate_noncentrality() {
        let p = ProcessModel::univariate(0.0, 0.5, 0.01).unwrap();
        assert!((noncentrality(&p, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((noncentrality(&p, 4).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_shift_has_zero_noncentrality() {
        assert_eq!(noncentrality(&tri(vec![0.0; 3]), 5).unwrap(), 0.0);
    }

    #[test]
    fn trivariate_round_trip_against_explicit_inverse() {
        let p = tri(vec![0.0; 3]);
        let mu1 = shift_for_delta(&p, 2.0, 1, &[1.0, 1.0, 1.0]).unwrap();
        let explicit = explicit_quad(&mu1).sqrt();
        assert!((explicit - 2.0).abs() < 1e-12);
        let p1 = p.with_mu1(mu1).unwrap();
        assert!((noncentrality(&p1, 1).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trivariate_shift_scale() {
        // 1'Σ⁻¹1 = 2/3, so c = 0.5 / sqrt(2/3)
        let p = tri(vec![0.0; 3]);
        let mu1 = shift_for_delta(&p, 0.5, 1, &[1.0, 1.0, 1.0]).unwrap();
        let c = 0.612_372_435_695_794_5;
        for v in mu1 {
            assert!((v - c).abs() < 1e-14);
        }
    }

    #[test]
    fn univariate_shift() {
        let p = ProcessModel::univariate(0.0, 0.0, 0.01).unwrap();
        assert_eq!(shift_for_delta(&p, 2.0, 1, &[1.0]).unwrap(), vec![2.0]);
        assert_eq!(shift_for_delta(&p, 0.0, 1, &[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_direction_rejected() {
        let p = tri(vec![0.0; 3]);
        assert_eq!(
            shift_for_delta(&p, 1.0, 1, &[0.0; 3]),
            Err(Error::ZeroDirection)
        );
    }

    #[test]
    fn invalid_process_rejected() {
        assert!(ProcessModel::univariate(0.0, 1.0, 0.0).is_err());
        assert!(ProcessModel::new(vec![0.0], vec![0.0, 1.0], vec![vec![1.0]], 1.0).is_err());
        assert_eq!(
            ProcessModel::new(
                vec![0.0; 2],
                vec![0.0; 2],
                vec![vec![1.0, 1.0], vec![1.0, 1.0]],
                1.0
            ),
            Err(Error::SingularCovariance)
        );
        assert!(ProcessModel::new(vec![], vec![], vec![], 1.0).is_err());
    }

    #[test]
    fn invalid_designs_rejected() {
        assert!(ChartDesign::new(0, 1.0, 1.0, vec![0.5]).is_err());
        assert!(ChartDesign::new(1, 0.0, 1.0, vec![0.5]).is_err());
        assert!(ChartDesign::new(1, 1.0, 0.0, vec![0.5]).is_err());
        assert!(ChartDesign::new(1, 1.0, 1.0, vec![0.0]).is_err());
        assert!(ChartDesign::new(1, 1.0, 1.0, vec![1.5]).is_err());
        assert!(ChartDesign::new(1, 1.0, 1.0, vec![1.0]).is_ok());
    }
}
