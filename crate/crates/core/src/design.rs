//! Choosing the EWMA weight by direct search, and the side-by-side
//! comparison of simulated cost against the ARL-based formula.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{analytic_rates_r1, lv_cost_arl, lv_cost_independent, modified_cost, AnfaMode};
use crate::error::{invalid, Result};
use crate::mcsim::{ArlProfile, ProfileBudget, Simulator};
use crate::model::{ChartDesign, Instance, ProcessModel};
use crate::rng::derive_seed;
use crate::stats::Estimate;

/// Weights tabulated in the comparison tables.
pub const TABLE_WEIGHTS: [f64; 7] = [0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0];

/// `0.01, 0.02, …, 1.00`.
pub fn default_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// The cost objective minimized over the weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Simulated long-run average cost.
    Simulation,
    /// ARL-based formula with simulated zero-state ARLs.
    LorenzenVance,
    /// Corrected formula with simulated ANFA and AARL₁.
    Modified,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Simulation => "simulation",
            Objective::LorenzenVance => "lorenzen-vance",
            Objective::Modified => "modified",
        }
    }
}

/// Simulation budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Cycles per grid point when optimizing the simulated cost.
    pub grid_cycles: u64,
    /// Cycles for the smaller comparison estimate.
    pub small_cycles: u64,
    /// Cycles for the reference comparison estimate.
    pub large_cycles: u64,
    /// Runs for each of ARL₀ and ARL₁.
    pub arl_runs: u64,
    /// Runs per warm-up length in the AARL₁ profile.
    pub runs_per_m: u64,
    pub anfa_runs: u64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 2 000 runs everywhere, for quick checks.
    Ci,
    /// 10⁴ runs for grid points and small estimates, 10⁵ for large ones.
    Paper,
}

impl Budget {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Ci => Budget {
                grid_cycles: 2_000,
                small_cycles: 2_000,
                large_cycles: 2_000,
                arl_runs: 2_000,
                runs_per_m: 2_000,
                anfa_runs: 2_000,
                epsilon: 1e-10,
            },
            Preset::Paper => Budget {
                grid_cycles: 10_000,
                small_cycles: 10_000,
                large_cycles: 100_000,
                arl_runs: 100_000,
                runs_per_m: 10_000,
                anfa_runs: 100_000,
                epsilon: 1e-10,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let runs = [
            self.grid_cycles,
            self.small_cycles,
            self.large_cycles,
            self.arl_runs,
            self.runs_per_m,
            self.anfa_runs,
        ];
        if runs.contains(&0) {
            return Err(invalid("every budget must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Simulated cost at two budgets against the ARL formula for one weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instance_id: String,
    pub r: f64,
    pub f_sim_small: Estimate,
    pub f_sim_large: Estimate,
    pub f_lv: f64,
    /// `|f_lv − f_sim_large| / f_sim_large × 100`.
    pub pct_dif: f64,
    pub arl0: Estimate,
    pub arl1: Estimate,
}

impl ComparisonRow {
    pub fn recompute_pct_dif(&self) -> f64 {
        pct_gap(self.f_lv, self.f_sim_large.value)
    }
}

/// `|a − b| / |b| × 100`.
pub fn pct_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs() * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub r: f64,
    pub f: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub instance_id: String,
    pub method: Objective,
    pub r_star: f64,
    pub f_at_r_star: Estimate,
    pub grid: Vec<GridPoint>,
}

/// Grid minimizer; ties go to the smaller weight.
pub fn argmin(grid: &[GridPoint]) -> Option<GridPoint> {
    grid.iter()
        .copied()
        .min_by(|a, b| a.f.value.total_cmp(&b.f.value).then(a.r.total_cmp(&b.r)))
}

/// Extra cost of using the formula-optimal weight instead of the
/// simulation-optimal one, both judged by simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostIncrement {
    pub instance_id: String,
    pub simulation: OptimizationResult,
    pub lorenzen_vance: OptimizationResult,
    /// Simulated cost at the formula-optimal weight.
    pub f_sim_at_lv: Estimate,
    pub increment_pct: f64,
}

type MemoKey = Vec<u64>;

/// Runs the design-level experiments with shared budgets and caches.
///
/// ARL estimates and AARL₁ profiles depend only on the chart and the shift,
/// not on costs, so they are cached by chart signature and reused across
/// instances that share a process.
#[derive(Debug)]
pub struct Designer {
    pub sim: Simulator,
    pub budget: Budget,
    /// Reuse the same simulation seed at every grid point (common random
    /// numbers). Off by default.
    pub common_random_numbers: bool,
    pub anfa_mode: AnfaMode,
    arl0_memo: Mutex<HashMap<MemoKey, Estimate>>,
    arl1_memo: Mutex<HashMap<MemoKey, Estimate>>,
    profile_memo: Mutex<HashMap<MemoKey, ArlProfile>>,
}

impl Designer {
    pub fn new(sim: Simulator, budget: Budget) -> Result<Self> {
        budget.validate()?;
        Ok(Designer {
            sim,
            budget,
            common_random_numbers: false,
            anfa_mode: AnfaMode::Literal,
            arl0_memo: Mutex::default(),
            arl1_memo: Mutex::default(),
            profile_memo: Mutex::default(),
        })
    }

    fn chart_signature(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        with_shift: bool,
        extra: &[u64],
    ) -> MemoKey {
        let mut key = vec![
            process.q as u64,
            design.n as u64,
            design.h.to_bits(),
            design.ul.to_bits(),
        ];
        key.extend(design.weights.iter().map(|w| w.to_bits()));
        if with_shift {
            key.extend(process.shift().iter().map(|v| v.to_bits()));
        }
        key.extend(process.sigma.iter().flatten().map(|v| v.to_bits()));
        key.push(self.sim.covariance as u64);
        key.push(self.sim.run_cap);
        key.push(self.sim.index_base as u64);
        key.extend_from_slice(extra);
        key
    }

    /// Zero-state `(ARL₀, ARL₁)` at `arl_runs` runs each.
    pub fn arls(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        seed: u64,
    ) -> Result<(Estimate, Estimate)> {
        let runs = self.budget.arl_runs;
        let key0 = self.chart_signature(design, process, false, &[runs, seed]);
        let cached = self.arl0_memo.lock().unwrap().get(&key0).copied();
        let arl0 = match cached {
            Some(v) => v,
            None => {
                let v = self.sim.estimate_arl0(design, process, runs, seed)?;
                self.arl0_memo.lock().unwrap().insert(key0, v);
                v
            }
        };
        let key1 = self.chart_signature(design, process, true, &[runs, seed]);
        let cached = self.arl1_memo.lock().unwrap().get(&key1).copied();
        let arl1 = match cached {
            Some(v) => v,
            None => {
                let v = self
                    .sim
                    .estimate_arl1_conditional(design, process, 0, runs, seed)?;
                self.arl1_memo.lock().unwrap().insert(key1, v);
                v
            }
        };
        Ok((arl0, arl1))
    }

    /// AARL₁ profile at the configured budget and truncation.
    pub fn profile(
        &self,
        design: &ChartDesign,
        process: &ProcessModel,
        seed: u64,
    ) -> Result<ArlProfile> {
        let b = self.budget;
        let key = self.chart_signature(
            design,
            process,
            true,
            &[
                process.lambda.to_bits(),
                b.epsilon.to_bits(),
                b.runs_per_m,
                b.anfa_runs,
                b.arl_runs,
                seed,
            ],
        );
        if let Some(v) = self.profile_memo.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let budget = ProfileBudget {
            runs_per_m: b.runs_per_m,
            anfa_runs: b.anfa_runs,
            arl0_runs: b.arl_runs,
        };
        let prof =
            self.sim
                .estimate_aarl1(design, process, process.lambda, b.epsilon, budget, seed)?;
        self.profile_memo.lock().unwrap().insert(key, prof.clone());
        Ok(prof)
    }

    /// Seed for chart-only quantities (ARLs, profiles) at weight `r`.
    fn chart_seed(master: u64, r: f64) -> u64 {
        derive_seed(master, "chart", &[r.to_bits()])
    }

    fn point_seed(&self, master: u64, instance: &Instance, r: f64) -> u64 {
        if self.common_random_numbers {
            derive_seed(master, &instance.id, &[])
        } else {
            derive_seed(master, &instance.id, &[r.to_bits()])
        }
    }

    /// ARL-formula cost at weight `r`.
    pub fn lv_value(
        &self,
        instance: &Instance,
        r: f64,
        master: u64,
    ) -> Result<(f64, Estimate, Estimate)> {
        let design = instance.design(r)?;
        let (arl0, arl1) = self.arls(&design, &instance.process, Self::chart_seed(master, r))?;
        let f = lv_cost_arl(
            arl0.value,
            arl1.value,
            &instance.costs,
            &design,
            instance.process.lambda,
        );
        Ok((f, arl0, arl1))
    }

    /// Corrected-formula cost at weight `r`, with the profile behind it.
    pub fn modified_value(
        &self,
        instance: &Instance,
        r: f64,
        master: u64,
    ) -> Result<(f64, ArlProfile)> {
        let design = instance.design(r)?;
        let prof = self.profile(&design, &instance.process, Self::chart_seed(master, r))?;
        let f = modified_cost(
            prof.anfa.value,
            prof.aarl1.value,
            prof.arl0.value,
            &instance.costs,
            &design,
            instance.process.lambda,
            self.anfa_mode,
        );
        Ok((f, prof))
    }

    /// Objective value at one weight. Formula objectives carry no standard
    /// error of their own; `n_runs` records the ARL budget behind them.
    pub fn evaluate(
        &self,
        instance: &Instance,
        method: Objective,
        r: f64,
        master: u64,
    ) -> Result<Estimate> {
        match method {
            Objective::Simulation => {
                let design = instance.design(r)?;
                self.sim.estimate_f(
                    &design,
                    &instance.process,
                    &instance.costs,
                    self.budget.grid_cycles,
                    self.point_seed(master, instance, r),
                )
            }
            Objective::LorenzenVance => {
                let (f, _, _) = self.lv_value(instance, r, master)?;
                Ok(Estimate {
                    value: f,
                    std_error: 0.0,
                    n_runs: self.budget.arl_runs,
                })
            }
            Objective::Modified => {
                let (f, _) = self.modified_value(instance, r, master)?;
                Ok(Estimate {
                    value: f,
                    std_error: 0.0,
                    n_runs: self.budget.runs_per_m,
                })
            }
        }
    }

    /// Evaluates `method` at every weight in `grid` and returns the minimizer.
    pub fn grid_search_r(
        &self,
        instance: &Instance,
        method: Objective,
        grid: &[f64],
        seed: u64,
    ) -> Result<OptimizationResult> {
        if grid.is_empty() {
            return Err(invalid("weight grid is empty"));
        }
        if let Some(r) = grid.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
            return Err(invalid(format!("grid weights must lie in (0, 1], got {r}")));
        }
        let points = self.sim.install(|| {
            grid.par_iter()
                .map(|&r| {
                    Ok(GridPoint {
                        r,
                        f: self.evaluate(instance, method, r, seed)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let best = argmin(&points).expect("grid is nonempty");
        Ok(OptimizationResult {
            instance_id: instance.id.clone(),
            method,
            r_star: best.r,
            f_at_r_star: best.f,
            grid: points,
        })
    }

    /// Small- and large-budget simulated cost against the ARL formula for
    /// each weight.
    pub fn compare_methods(
        &self,
        instance: &Instance,
        r_values: &[f64],
        seed: u64,
    ) -> Result<Vec<ComparisonRow>> {
        if r_values.is_empty() {
            return Err(invalid("no weights to compare"));
        }
        self.sim.install(|| {
            r_values
                .par_iter()
                .map(|&r| self.comparison_row(instance, r, seed))
                .collect()
        })
    }

    fn comparison_row(&self, instance: &Instance, r: f64, seed: u64) -> Result<ComparisonRow> {
        let design = instance.design(r)?;
        let (p, c) = (&instance.process, &instance.costs);
        let small_seed = comparison_seed(seed, instance, r, Run::Small);
        let large_seed = comparison_seed(seed, instance, r, Run::Large);
        let small = self
            .sim
            .estimate_f(&design, p, c, self.budget.small_cycles, small_seed)?;
        let large = self
            .sim
            .estimate_f(&design, p, c, self.budget.large_cycles, large_seed)?;
        let (f_lv, arl0, arl1) = self.lv_value(instance, r, seed)?;
        Ok(ComparisonRow {
            instance_id: instance.id.clone(),
            r,
            f_sim_small: small,
            f_sim_large: large,
            f_lv,
            pct_dif: pct_gap(f_lv, large.value),
            arl0,
            arl1,
        })
    }

    /// Percentage extra simulated cost at the formula-optimal weight.
    pub fn cost_increment(
        &self,
        instance: &Instance,
        grid: &[f64],
        seed: u64,
    ) -> Result<CostIncrement> {
        let simulation = self.grid_search_r(instance, Objective::Simulation, grid, seed)?;
        let lorenzen_vance = self.grid_search_r(instance, Objective::LorenzenVance, grid, seed)?;
        let f_sim_at_lv = simulation
            .grid
            .iter()
            .find(|p| p.r == lorenzen_vance.r_star)
            .expect("both searches share the grid")
            .f;
        let best = simulation.f_at_r_star.value;
        Ok(CostIncrement {
            instance_id: instance.id.clone(),
            increment_pct: 100.0 * (f_sim_at_lv.value - best) / best,
            simulation,
            lorenzen_vance,
            f_sim_at_lv,
        })
    }

    /// Relative errors (%) at r = 1 of the ARL formula with simulated ARLs
    /// and of the simulated cost, against the exact independent-statistics
    /// cost.
    pub fn error_vs_exact_r1(&self, instance: &Instance, seed: u64) -> Result<(f64, f64)> {
        let design = instance.design(1.0)?;
        let exact = exact_cost_r1(instance)?;
        let (f_lv, _, _) = self.lv_value(instance, 1.0, seed)?;
        let f_sim = self.sim.estimate_f(
            &design,
            &instance.process,
            &instance.costs,
            self.budget.large_cycles,
            comparison_seed(seed, instance, 1.0, Run::Large),
        )?;
        Ok((pct_gap(f_lv, exact), pct_gap(f_sim.value, exact)))
    }
}

/// Which of the two comparison budgets a simulation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Run {
    Small,
    Large,
}

/// Seed of the small or large simulated-cost run for one instance and weight,
/// as used by [`Designer::compare_methods`].
pub fn comparison_seed(master: u64, instance: &Instance, r: f64, run: Run) -> u64 {
    let base = derive_seed(master, &instance.id, &[r.to_bits()]);
    let label = match run {
        Run::Small => "small",
        Run::Large => "large",
    };
    derive_seed(base, label, &[])
}

/// Exact long-run cost of the memoryless (r = 1) chart for an instance.
pub fn exact_cost_r1(instance: &Instance) -> Result<f64> {
    let design = instance.design(1.0)?;
    let rates = analytic_rates_r1(instance.process.q, design.ul, instance.delta)?;
    lv_cost_independent(rates, &instance.costs, &design, instance.process.lambda)
}
