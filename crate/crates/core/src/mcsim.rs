//! Renewal-cycle Monte Carlo.
//!
//! A cycle starts with a fresh chart and an in-control process. The shift
//! time is exponential in production time; samples are taken at epochs
//! `h, 2h, …` and a sample is in control iff its epoch precedes the shift.
//! Signals at in-control epochs are false alarms: they cost `C_F`, pause
//! production for `T_F` when `γ₁ = 0`, and leave the chart untouched. The
//! first signal at an out-of-control epoch ends monitoring.
//!
//! Every run draws from its own substream keyed by `(seed, lane, run)`, and
//! runs are reduced in fixed-size blocks in index order, so estimates are
//! bit-identical for any worker count.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, CovarianceMode, MewmaChart};
use crate::cost::{pr_shift_interval, truncation_k};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{ChartDesign, CostParams, ProcessModel};
use crate::rng::{lane, substream, SimRng};
use crate::stats::{ratio_estimate, Estimate, Moments, RatioStdError};

/// Default cap on samples in a single run.
pub const DEFAULT_RUN_CAP: u64 = 10_000_000;

/// Runs per reduction block.
const BLOCK: u64 = 64;

/// One simulated quality-control cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOutcome {
    /// Cycle time.
    pub ct: f64,
    /// Cycle cost.
    pub cc: f64,
    pub n_false_alarms: u64,
    pub n_samples: u64,
    /// Production-time epoch of the assignable cause.
    pub shift_time: f64,
    /// Index of the sample that gave the true alarm.
    pub signal_epoch_index: u64,
}

/// Where the shift-interval index starts in the AARL₁ average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftIndexBase {
    /// m = 0, 1, …: includes shifts before the first sample; weights sum to one.
    #[default]
    Zero,
    /// m = 1, 2, …: drops the first interval; retained weights are renormalized.
    One,
}

/// Conditional out-of-control ARLs, their shift-weighted average and the
/// false-alarm count per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArlProfile {
    pub arl0: Estimate,
    /// Warm-up length of `arl1_m[0]`.
    pub first_m: u64,
    pub arl1_m: Vec<Estimate>,
    /// `Pr(A_m)` for each retained m (not renormalized).
    pub weights: Vec<f64>,
    pub aarl1: Estimate,
    pub anfa: Estimate,
    pub k: u64,
    pub epsilon: f64,
}

impl ArlProfile {
    /// `(m, ARL₁^m, Pr(A_m))` rows.
    pub fn series(&self) -> impl Iterator<Item = (u64, &Estimate, f64)> + '_ {
        self.arl1_m
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(move |(i, (e, &w))| (self.first_m + i as u64, e, w))
    }
}

/// Run budgets for [`Simulator::estimate_aarl1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileBudget {
    pub runs_per_m: u64,
    pub anfa_runs: u64,
    pub arl0_runs: u64,
}

impl ProfileBudget {
    pub fn uniform(runs: u64) -> Self {
        ProfileBudget {
            runs_per_m: runs,
            anfa_runs: runs,
            arl0_runs: runs,
        }
    }
}

/// Draws sample-mean deviations `x̄ − μ₀ ~ N(shift, Σ/n)`.
#[derive(Debug, Clone)]
pub struct ProcessSampler {
    chol: Vec<f64>,
    shift: Vec<f64>,
    noise: Vec<f64>,
}

impl ProcessSampler {
    pub fn new(process: &ProcessModel, n: u32) -> Result<Self> {
        process.validate()?;
        if n == 0 {
            return Err(invalid("sample size n must be at least 1"));
        }
        let q = process.q;
        let scaled: Vec<f64> = process.sigma_flat().iter().map(|s| s / n as f64).collect();
        Ok(ProcessSampler {
            chol: linalg::cholesky_lower(&scaled, q)?,
            shift: process.shift(),
            noise: vec![0.0; q],
        })
    }

    pub fn dimension(&self) -> usize {
        self.shift.len()
    }

    #[inline]
    pub fn draw(&mut self, in_control: bool, rng: &mut SimRng, out: &mut [f64]) {
        for e in self.noise.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        linalg::lower_mul(&self.chol, &self.noise, out);
        if !in_control {
            for (o, s) in out.iter_mut().zip(&self.shift) {
                *o += s;
            }
        }
    }
}

/// One draw of the sample mean `x̄ ~ N(μ, Σ/n)`, `μ = μ₀` or `μ₁`.
pub fn sample_mean(
    process: &ProcessModel,
    n: u32,
    in_control: bool,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let mut sampler = ProcessSampler::new(process, n)?;
    let mut out = vec![0.0; process.q];
    sampler.draw(in_control, rng, &mut out);
    for (o, m) in out.iter_mut().zip(&process.mu0) {
        *o += m;
    }
    Ok(out)
}

/// Simulates one cycle with a fresh MEWMA chart.
pub fn simulate_cycle(
    design: &ChartDesign,
    process: &ProcessModel,
    costs: &CostParams,
    rng: &mut SimRng,
) -> Result<CycleOutcome> {
    let mut chart = MewmaChart::new(design, process, CovarianceMode::Exact)?;
    let mut sampler = ProcessSampler::new(process, design.n)?;
    costs.validate()?;
    let exp = Exp::new(process.lambda).map_err(|e| invalid(e.to_string()))?;
    run_cycle(
        &mut chart,
        &mut sampler,
        design,
        costs,
        &exp,
        DEFAULT_RUN_CAP,
        rng,
    )
}

/// Monitoring phase of a cycle: `(signal index M, false alarms)` for a given
/// shift time.
#[inline]
fn monitor<C: Chart>(
    chart: &mut C,
    sampler: &mut ProcessSampler,
    h: f64,
    shift_time: f64,
    cap: u64,
    rng: &mut SimRng,
    buf: &mut [f64],
) -> Result<(u64, u64)> {
    chart.reset();
    let mut false_alarms = 0;
    let mut m = 0u64;
    loop {
        m += 1;
        if m > cap {
            return Err(Error::RunLengthCap { cap });
        }
        let in_control = (m as f64) * h < shift_time;
        sampler.draw(in_control, rng, buf);
        if chart.observe_signals(buf) {
            if in_control {
                false_alarms += 1;
            } else {
                return Ok((m, false_alarms));
            }
        }
    }
}

fn run_cycle<C: Chart>(
    chart: &mut C,
    sampler: &mut ProcessSampler,
    design: &ChartDesign,
    costs: &CostParams,
    exp: &Exp<f64>,
    cap: u64,
    rng: &mut SimRng,
) -> Result<CycleOutcome> {
    let shift_time: f64 = rng.sample(exp);
    let mut buf = vec![0.0; sampler.dimension()];
    let (m, fa) = monitor(chart, sampler, design.h, shift_time, cap, rng, &mut buf)?;
    Ok(cycle_accounting(design, costs, shift_time, m, fa))
}

/// Time and cost of a cycle whose shift occurred at `shift_time`, signalled
/// at sample `m`, with `fa` false alarms.
pub fn cycle_accounting(
    design: &ChartDesign,
    costs: &CostParams,
    shift_time: f64,
    m: u64,
    fa: u64,
) -> CycleOutcome {
    let n = design.n as f64;
    let h = design.h;
    let (g1, g2) = (costs.g1(), costs.g2());
    let signal_time = m as f64 * h;
    let fa_f = fa as f64;
    let ct = signal_time + n * costs.ts + (1.0 - g1) * fa_f * costs.tf + costs.tl + costs.tr;
    let cc = costs.c0 * shift_time
        + costs.c1 * (signal_time - shift_time + n * costs.ts + g1 * costs.tl + g2 * costs.tr)
        + costs.cf * fa_f
        + costs.clr
        + (costs.a + costs.b * n) * (m as f64 + (g1 * costs.tl + g2 * costs.tr) / h);
    CycleOutcome {
        ct,
        cc,
        n_false_alarms: fa,
        n_samples: m,
        shift_time,
        signal_epoch_index: m,
    }
}

/// Monte Carlo engine settings shared by every estimator.
#[derive(Debug, Clone)]
pub struct Simulator {
    pool: Option<Arc<rayon::ThreadPool>>,
    pub covariance: CovarianceMode,
    pub run_cap: u64,
    pub ratio_std_error: RatioStdError,
    pub index_base: ShiftIndexBase,
}

impl Default for Simulator {
    fn default() -> Self {
        Simulator {
            pool: None,
            covariance: CovarianceMode::Exact,
            run_cap: DEFAULT_RUN_CAP,
            ratio_std_error: RatioStdError::DeltaMethod,
            index_base: ShiftIndexBase::Zero,
        }
    }
}

impl Simulator {
    /// Simulator on a dedicated pool of `workers` threads.
    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("worker count must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| invalid(e.to_string()))?;
        Ok(Simulator {
            pool: Some(Arc::new(pool)),
            ..Simulator::default()
        })
    }

    pub fn workers(&self) -> usize {
        match &self.pool {
            Some(p) => p.current_num_threads(),
            None => rayon::current_num_threads(),
        }
    }

    /// Runs `f` on this simulator's pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    fn chart(&self, design: &ChartDesign, process: &ProcessModel) -> Result<MewmaChart> {
        MewmaChart::new(design, process, self.covariance)
    }

    /// Maps fixed blocks of run indices in parallel, returning results in
    /// block order.
    fn blocks<T, F>(&self, n_runs: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<u64>) -> Result<T> + Sync + Send,
    {
        let n_blocks = n_runs.div_ceil(BLOCK);
        self.install(|| {
            (0..n_blocks)
                .into_par_iter()
                .map(|b| f(b * BLOCK..((b + 1) * BLOCK).min(n_runs)))
                .collect()
        })
    }

    fn moments_over_runs<C, F>(
        &self,
        n_runs: u64,
        proto: &C,
        sampler: &ProcessSampler,
        f: F,
    ) -> Result<Estimate>
    where
        C: Chart,
        F: Fn(u64, &mut C, &mut ProcessSampler, &mut [f64]) -> Result<f64> + Sync + Send,
    {
        let parts = self.blocks(n_runs, |range| {
            let mut chart = proto.clone();
            let mut sampler = sampler.clone();
            let mut buf = vec![0.0; sampler.dimension()];
            let mut acc = Moments::default();
            for run in range {
                acc.push(f(run, &mut chart, &mut sampler, &mut buf)?);
            }
            Ok(acc)
        })?;
        let mut total = Moments::default();
        parts.iter().for_each(|p| total.merge(p));
        Ok(total.estimate())
    }

    /// `n_cycles` independent cycles, in run order.
    pub fn simulate_cycles(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        costs: &CostParams,
        n_cycles: u64,
        seed: u64,
    ) -> Result<Vec<CycleOutcome>> {
        costs.validate()?;
        let proto = self.chart(design, process)?;
        self.simulate_cycles_with(&proto, design, process, costs, n_cycles, seed)
    }

    /// Same as [`Self::simulate_cycles`] for any chart implementation.
    pub fn simulate_cycles_with<C: Chart>(
        &self,
        proto: &C,
        design: &ChartDesign,
        process: &ProcessModel,
        costs: &CostParams,
        n_cycles: u64,
        seed: u64,
    ) -> Result<Vec<CycleOutcome>> {
        let sampler = ProcessSampler::new(process, design.n)?;
        let exp = Exp::new(process.lambda).map_err(|e| invalid(e.to_string()))?;
        let parts = self.blocks(n_cycles, |range| {
            let mut chart = proto.clone();
            let mut sampler = sampler.clone();
            range
                .map(|run| {
                    let mut rng = substream(seed, lane::CYCLE, run);
                    run_cycle(
                        &mut chart,
                        &mut sampler,
                        design,
                        costs,
                        &exp,
                        self.run_cap,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(parts.into_iter().flatten().collect())
    }

    /// `F̂ = Σ cc / Σ ct` over `n_cycles` simulated cycles.
    pub fn estimate_f(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        costs: &CostParams,
        n_cycles: u64,
        seed: u64,
    ) -> Result<Estimate> {
        if n_cycles == 0 {
            return Err(invalid("number of cycles must be at least 1"));
        }
        let cycles = self.simulate_cycles(design, process, costs, n_cycles, seed)?;
        let pairs: Vec<(f64, f64)> = cycles.iter().map(|c| (c.cc, c.ct)).collect();
        Ok(ratio_estimate(&pairs, self.ratio_std_error))
    }

    /// Zero-state in-control ARL.
    pub fn estimate_arl0(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        n_runs: u64,
        seed: u64,
    ) -> Result<Estimate> {
        check_runs(n_runs)?;
        let proto = self.chart(design, process)?;
        let sampler = ProcessSampler::new(process, design.n)?;
        let cap = self.run_cap;
        self.moments_over_runs(n_runs, &proto, &sampler, |run, chart, sampler, buf| {
            let mut rng = substream(seed, lane::ARL0, run);
            chart.reset();
            run_until_signal(chart, sampler, true, cap, &mut rng, buf).map(|rl| rl as f64)
        })
    }

    /// Out-of-control ARL after `m` in-control warm-up samples whose signals
    /// are ignored.
    pub fn estimate_arl1_conditional(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        m: u64,
        n_runs: u64,
        seed: u64,
    ) -> Result<Estimate> {
        check_runs(n_runs)?;
        let proto = self.chart(design, process)?;
        let sampler = ProcessSampler::new(process, design.n)?;
        let cap = self.run_cap;
        let lane = lane::arl1(m);
        self.moments_over_runs(n_runs, &proto, &sampler, |run, chart, sampler, buf| {
            let mut rng = substream(seed, lane, run);
            chart.reset();
            for _ in 0..m {
                sampler.draw(true, &mut rng, buf);
                chart.observe(buf);
            }
            run_until_signal(chart, sampler, false, cap, &mut rng, buf).map(|rl| rl as f64)
        })
    }

    /// Mean number of false alarms per cycle with failure rate `lambda`.
    pub fn estimate_anfa(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        lambda: f64,
        n_runs: u64,
        seed: u64,
    ) -> Result<Estimate> {
        check_runs(n_runs)?;
        let process = process.with_lambda(lambda)?;
        let proto = self.chart(design, &process)?;
        let sampler = ProcessSampler::new(&process, design.n)?;
        let exp = Exp::new(lambda).map_err(|e| invalid(e.to_string()))?;
        let (h, cap) = (design.h, self.run_cap);
        self.moments_over_runs(n_runs, &proto, &sampler, |run, chart, sampler, buf| {
            let mut rng = substream(seed, lane::ANFA, run);
            let shift_time: f64 = rng.sample(exp);
            monitor(chart, sampler, h, shift_time, cap, &mut rng, buf).map(|(_, fa)| fa as f64)
        })
    }

    /// ARL₁^m for every retained shift interval, their `Pr(A_m)`-weighted
    /// average AARL₁, plus ANFA and ARL₀.
    ///
    /// Each run follows one in-control warm-up path and branches an
    /// out-of-control continuation (on its own substream) after every warm-up
    /// length, so all ARL₁^m cost one pass of length k per run. Runs are
    /// independent; the per-run weighted sum gives AARL₁ and its standard error.
    pub fn estimate_aarl1(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        lambda: f64,
        epsilon: f64,
        budget: ProfileBudget,
        seed: u64,
    ) -> Result<ArlProfile> {
        check_runs(budget.runs_per_m)?;
        let k = truncation_k(epsilon, lambda, design.h)?;
        let first_m = match self.index_base {
            ShiftIndexBase::Zero => 0,
            ShiftIndexBase::One => 1,
        };
        let weights: Vec<f64> = (first_m..=k)
            .map(|m| pr_shift_interval(m, lambda, design.h))
            .collect();
        let total_weight: f64 = weights.iter().sum();
        let normalized: Vec<f64> = weights.iter().map(|w| w / total_weight).collect();

        let proto = self.chart(design, process)?;
        let sampler = ProcessSampler::new(process, design.n)?;
        let cap = self.run_cap;
        let retained = weights.len();
        let branch_lanes: Vec<u64> = (first_m..=k).map(lane::branch).collect();

        let parts = self.blocks(budget.runs_per_m, |range| {
            let mut warm = proto.clone();
            let mut branch = proto.clone();
            let mut sampler = sampler.clone();
            let mut buf = vec![0.0; sampler.dimension()];
            let mut per_m = vec![Moments::default(); retained];
            let mut averaged = Moments::default();
            for run in range {
                let mut rng_warm = substream(seed, lane::WARMUP, run);
                warm.reset();
                let mut weighted = 0.0;
                for m in 0..=k {
                    if m >= first_m {
                        let i = (m - first_m) as usize;
                        branch.clone_from(&warm);
                        let mut rng = substream(seed, branch_lanes[i], run);
                        let rl = run_until_signal(
                            &mut branch,
                            &mut sampler,
                            false,
                            cap,
                            &mut rng,
                            &mut buf,
                        )? as f64;
                        per_m[i].push(rl);
                        weighted += normalized[i] * rl;
                    }
                    if m < k {
                        sampler.draw(true, &mut rng_warm, &mut buf);
                        warm.observe(&buf);
                    }
                }
                averaged.push(weighted);
            }
            Ok((per_m, averaged))
        })?;

        let mut per_m = vec![Moments::default(); retained];
        let mut averaged = Moments::default();
        for (block_m, block_avg) in &parts {
            for (acc, b) in per_m.iter_mut().zip(block_m) {
                acc.merge(b);
            }
            averaged.merge(block_avg);
        }

        let anfa = self.estimate_anfa(design, process, lambda, budget.anfa_runs, seed)?;
        let arl0 = self.estimate_arl0(design, process, budget.arl0_runs, seed)?;
        Ok(ArlProfile {
            arl0,
            first_m,
            arl1_m: per_m.iter().map(Moments::estimate).collect(),
            weights,
            aarl1: averaged.estimate(),
            anfa,
            k,
            epsilon,
        })
    }
}

fn check_runs(n: u64) -> Result<()> {
    if n == 0 {
        return Err(invalid("number of runs must be at least 1"));
    }
    Ok(())
}

/// Samples from the chart's current state until it signals; returns the count.
#[inline]
fn run_until_signal<C: Chart>(
    chart: &mut C,
    sampler: &mut ProcessSampler,
    in_control: bool,
    cap: u64,
    rng: &mut SimRng,
    buf: &mut [f64],
) -> Result<u64> {
    let mut count = 0u64;
    loop {
        count += 1;
        if count > cap {
            return Err(Error::RunLengthCap { cap });
        }
        sampler.draw(in_control, rng, buf);
        if chart.observe_signals(buf) {
            return Ok(count);
        }
    }
}
