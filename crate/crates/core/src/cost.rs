//! Closed-form long-run average cost formulas.
//!
//! Three variants share one skeleton: the independent-statistics form driven
//! by error rates, the ARL form used for memory charts, and the corrected
//! form driven by the average number of false alarms per cycle and the
//! shift-averaged out-of-control ARL. Numerator and denominator are each
//! summed left to right in a fixed term order.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::model::{ChartDesign, CostParams};

/// `s`: expected number of in-control samples factor; `tau`: expected time
/// from the last in-control sample to the shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConstants {
    pub s: f64,
    pub tau: f64,
}

/// Type-I and type-II error probabilities of a chart with independent statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub alpha: f64,
    pub beta: f64,
}

pub fn cycle_constants(lambda: f64, h: f64) -> CycleConstants {
    let x = lambda * h;
    let e = (-x).exp();
    let one_minus_e = -(-x).exp_m1();
    let s = e / one_minus_e;
    let tau = (one_minus_e - x * e) / (lambda * one_minus_e);
    CycleConstants { s, tau }
}

/// Probability that the shift falls in sampling interval `m` (between
/// epochs `m·h` and `(m+1)·h`).
pub fn pr_shift_interval(m: u64, lambda: f64, h: f64) -> f64 {
    let x = lambda * h;
    // e^{-mx}(1 - e^{-x})
    (-(m as f64) * x).exp() * -(-x).exp_m1()
}

/// Smallest integer `k ≥ −ln ε / (λh)`.
pub fn truncation_k(epsilon: f64, lambda: f64, h: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let bound = -epsilon.ln() / (lambda * h);
    let nearest = bound.round();
    // absorb rounding in ln/division when the bound is an integer
    let k = if (bound - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        bound.ceil()
    };
    Ok(k.max(0.0) as u64)
}

/// Shared skeleton: `arl1_time` is the expected number of sampling intervals
/// from the first out-of-control sample to the signal (h·this enters the
/// formula), `fa_cost_count` multiplies C_F, `fa_time_count` multiplies
/// (1−γ₁)·T_F.
fn cost_skeleton(
    costs: &CostParams,
    design: &ChartDesign,
    lambda: f64,
    arl1_time: f64,
    fa_cost_count: f64,
    fa_time_count: f64,
) -> f64 {
    let CycleConstants { tau, .. } = cycle_constants(lambda, design.h);
    let n = design.n as f64;
    let h = design.h;
    let (g1, g2) = (costs.g1(), costs.g2());
    let num = costs.c0 / lambda
        + costs.c1 * (-tau + n * costs.ts + arl1_time + g1 * costs.tl + g2 * costs.tr)
        + costs.cf * fa_cost_count
        + costs.clr
        + ((costs.a + costs.b * n) / h)
            * (1.0 / lambda - tau + n * costs.ts + arl1_time + g1 * costs.tl + g2 * costs.tr);
    let den = 1.0 / lambda + (1.0 - g1) * fa_time_count * costs.tf - tau
        + n * costs.ts
        + arl1_time
        + costs.tl
        + costs.tr;
    num / den
}

/// Long-run average cost for a chart whose plotted statistics are independent.
pub fn lv_cost_independent(
    rates: ErrorRates,
    costs: &CostParams,
    design: &ChartDesign,
    lambda: f64,
) -> Result<f64> {
    if rates.beta >= 1.0 {
        return Err(Error::DivisionDomain);
    }
    let s = cycle_constants(lambda, design.h).s;
    let out_time = design.h / (1.0 - rates.beta);
    let fa = s * rates.alpha;
    Ok(cost_skeleton(costs, design, lambda, out_time, fa, fa))
}

/// The ARL form: `s/ARL₀` false alarms and `h·ARL₁` out-of-control time.
pub fn lv_cost_arl(
    arl0: f64,
    arl1: f64,
    costs: &CostParams,
    design: &ChartDesign,
    lambda: f64,
) -> f64 {
    let s = cycle_constants(lambda, design.h).s;
    let fa = s / arl0;
    cost_skeleton(costs, design, lambda, design.h * arl1, fa, fa)
}

/// How the false-alarm search time enters the corrected formula's denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnfaMode {
    /// Keep `(1−γ₁)·s·T_F/ARL₀` in the denominator.
    #[default]
    Literal,
    /// Use `(1−γ₁)·ANFA·T_F`, consistent with the numerator.
    ConsistentAnfa,
}

/// Corrected cost: ANFA replaces `s/ARL₀` and AARL₁ replaces ARL₁.
pub fn modified_cost(
    anfa: f64,
    aarl1: f64,
    arl0: f64,
    costs: &CostParams,
    design: &ChartDesign,
    lambda: f64,
    mode: AnfaMode,
) -> f64 {
    let fa_time = match mode {
        AnfaMode::Literal => cycle_constants(lambda, design.h).s / arl0,
        AnfaMode::ConsistentAnfa => anfa,
    };
    cost_skeleton(costs, design, lambda, design.h * aarl1, anfa, fa_time)
}

/// Exact error rates of the memoryless (r = 1) chart: the squared statistic is
/// central chi-square with q degrees of freedom in control and noncentral
/// with non-centrality δ² out of control.
pub fn analytic_rates_r1(q: usize, ul: f64, delta: f64) -> Result<ErrorRates> {
    if q == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if ul.is_nan() || ul <= 0.0 {
        return Err(invalid(format!("control limit must be positive, got {ul}")));
    }
    if q == 1 {
        let z = Normal::standard();
        return Ok(ErrorRates {
            alpha: 2.0 * z.sf(ul),
            beta: z.cdf(ul - delta) - z.cdf(-ul - delta),
        });
    }
    let x = ul * ul;
    let alpha = ChiSquared::new(q as f64).expect("q ≥ 1").sf(x);
    Ok(ErrorRates {
        alpha,
        beta: noncentral_chi2_cdf(x, q as f64, delta * delta),
    })
}

/// Noncentral chi-square CDF as a Poisson mixture of central laws, summed
/// outward from the Poisson mode until the remaining mass is negligible.
pub fn noncentral_chi2_cdf(x: f64, dof: f64, ncp: f64) -> f64 {
    let central = |k: f64| ChiSquared::new(dof + 2.0 * k).expect("positive dof").cdf(x);
    if ncp == 0.0 {
        return central(0.0);
    }
    let half = ncp / 2.0;
    let mode = half.floor();
    let log_w = |k: f64| -half + k * half.ln() - statrs::function::gamma::ln_gamma(k + 1.0);
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut k = mode;
    loop {
        let w = log_w(k).exp();
        total += w * central(k);
        mass += w;
        if w < 1e-18 {
            break;
        }
        k += 1.0;
    }
    let mut k = mode - 1.0;
    while k >= 0.0 {
        let w = log_w(k).exp();
        total += w * central(k);
        mass += w;
        if w < 1e-18 {
            break;
        }
        k -= 1.0;
    }
    debug_assert!((mass - 1.0).abs() < 1e-10);
    total
}
