//! The subcommands. Failures of single instances are collected so the rest of
//! the table is still written.

use std::time::Instant;

use anyhow::{bail, Result};
use memchart::design::{comparison_seed, exact_cost_r1, pct_gap, Designer, Objective, Run};
use memchart::model::{catalog, write_instances, Instance};
use serde::Serialize;

use crate::config::{
    output_format, select_instances, CommandKind, ListArgs, PresetName, RunConfig,
};
use crate::output::{
    emit, encode, ArlRecord, BenchRecord, EvaluateRecord, InstanceRecord, OptimizeRecord,
};

/// Rows of the instances that succeeded plus the ids that failed.
#[derive(Debug)]
pub struct Table<T> {
    pub records: Vec<T>,
    pub failures: Vec<(String, anyhow::Error)>,
}

fn per_instance<T>(config: &RunConfig, mut f: impl FnMut(&Instance) -> Result<Vec<T>>) -> Table<T> {
    let mut out = Table {
        records: Vec::new(),
        failures: Vec::new(),
    };
    for inst in &config.instances {
        match f(inst) {
            Ok(mut rows) => out.records.append(&mut rows),
            Err(e) => out.failures.push((inst.id.clone(), e)),
        }
    }
    out
}

fn designer(config: &RunConfig) -> Result<Designer> {
    Ok(Designer::new(config.simulator()?, config.budget)?)
}

pub fn evaluate(config: &RunConfig) -> Result<Table<EvaluateRecord>> {
    let d = designer(config)?;
    let n_cycles = config.budget.large_cycles;
    let seed = config.seed;
    Ok(per_instance(config, |inst| {
        config
            .weights
            .iter()
            .map(|&r| {
                let design = inst.design(r)?;
                let sim_seed = comparison_seed(seed, inst, r, Run::Large);
                let f =
                    d.sim
                        .estimate_f(&design, &inst.process, &inst.costs, n_cycles, sim_seed)?;
                let (f_lv, arl0, arl1) = d.lv_value(inst, r, seed)?;
                let (f_mod, prof) = d.modified_value(inst, r, seed)?;
                Ok(EvaluateRecord {
                    instance: inst.id.clone(),
                    r,
                    seed,
                    n_cycles,
                    f_sim: f.value,
                    f_sim_se: f.std_error,
                    f_lv,
                    f_modified: f_mod,
                    pct_dif_lv: pct_gap(f_lv, f.value),
                    pct_dif_modified: pct_gap(f_mod, f.value),
                    arl0: arl0.value,
                    arl0_se: arl0.std_error,
                    arl1: arl1.value,
                    arl1_se: arl1.std_error,
                    aarl1: prof.aarl1.value,
                    aarl1_se: prof.aarl1.std_error,
                    anfa: prof.anfa.value,
                    anfa_se: prof.anfa.std_error,
                })
            })
            .collect()
    }))
}

pub fn arl(config: &RunConfig) -> Result<Table<ArlRecord>> {
    let d = designer(config)?;
    let seed = config.seed;
    Ok(per_instance(config, |inst| {
        let mut rows = Vec::new();
        for &r in &config.weights {
            let (_, prof) = d.modified_value(inst, r, seed)?;
            rows.extend(prof.series().map(|(m, e, w)| ArlRecord {
                instance: inst.id.clone(),
                r,
                seed,
                m,
                arl1_m: e.value,
                arl1_m_se: e.std_error,
                pr_shift: w,
                k: prof.k,
                epsilon: prof.epsilon,
                aarl1: prof.aarl1.value,
                aarl1_se: prof.aarl1.std_error,
                anfa: prof.anfa.value,
                anfa_se: prof.anfa.std_error,
                arl0: prof.arl0.value,
                arl0_se: prof.arl0.std_error,
            }));
        }
        Ok(rows)
    }))
}

pub fn optimize(config: &RunConfig) -> Result<Table<OptimizeRecord>> {
    let d = designer(config)?;
    let grid = &config.weights;
    let seed = config.seed;
    Ok(per_instance(config, |inst| {
        let inc = d.cost_increment(inst, grid, seed)?;
        let (mut r_modified, mut f_modified, mut f_sim_at_r_modified) = (None, None, None);
        if config.with_modified {
            let m = d.grid_search_r(inst, Objective::Modified, grid, seed)?;
            let at = inc
                .simulation
                .grid
                .iter()
                .find(|p| p.r == m.r_star)
                .map(|p| p.f.value);
            r_modified = Some(m.r_star);
            f_modified = Some(m.f_at_r_star.value);
            f_sim_at_r_modified = at;
        }
        Ok(vec![OptimizeRecord {
            instance: inst.id.clone(),
            seed,
            n_cycles: config.budget.grid_cycles,
            grid_points: grid.len(),
            r_sim: inc.simulation.r_star,
            f_sim: inc.simulation.f_at_r_star.value,
            f_sim_se: inc.simulation.f_at_r_star.std_error,
            r_lv: inc.lorenzen_vance.r_star,
            f_lv: inc.lorenzen_vance.f_at_r_star.value,
            f_sim_at_r_lv: inc.f_sim_at_lv.value,
            f_sim_at_r_lv_se: inc.f_sim_at_lv.std_error,
            increment_pct: inc.increment_pct,
            r_modified,
            f_modified,
            f_sim_at_r_modified,
        }])
    }))
}

pub fn bench(config: &RunConfig) -> Result<Table<BenchRecord>> {
    let d = designer(config)?;
    let seed = config.seed;
    Ok(per_instance(config, |inst| {
        config
            .weights
            .iter()
            .map(|&r| {
                let start = Instant::now();
                let row = d.compare_methods(inst, &[r], seed)?.remove(0);
                let seconds = start.elapsed().as_secs_f64();
                let (pct_error1, pct_error2) = if r == 1.0 {
                    let exact = exact_cost_r1(inst)?;
                    (
                        Some(pct_gap(row.f_lv, exact)),
                        Some(pct_gap(row.f_sim_large.value, exact)),
                    )
                } else {
                    (None, None)
                };
                Ok(BenchRecord {
                    instance: inst.id.clone(),
                    r,
                    seed,
                    s_small: row.f_sim_small.value,
                    s_small_se: row.f_sim_small.std_error,
                    s_large: row.f_sim_large.value,
                    s_large_se: row.f_sim_large.std_error,
                    f_lv: row.f_lv,
                    pct_dif: row.pct_dif,
                    arl0: row.arl0.value,
                    arl0_se: row.arl0.std_error,
                    arl1: row.arl1.value,
                    arl1_se: row.arl1.std_error,
                    pct_error1,
                    pct_error2,
                    seconds,
                })
            })
            .collect()
    }))
}

/// Some instances failed. Carries the ids and messages.
#[derive(Debug)]
pub struct PartialFailure(pub Vec<(String, anyhow::Error)>);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ids: Vec<&str> = self.0.iter().map(|(id, _)| id.as_str()).collect();
        write!(f, "failed instances: {}", ids.join(", "))?;
        for (id, e) in &self.0 {
            write!(f, "\n  {id}: {e:#}")?;
        }
        Ok(())
    }
}

impl std::error::Error for PartialFailure {}

fn header(config: &RunConfig) -> String {
    let ids: Vec<&str> = config.instances.iter().map(|i| i.id.as_str()).collect();
    format!(
        "memchart {}: seed={}{} workers={} preset={} instances={} weights={}",
        config.command.name(),
        config.seed,
        if config.seed_generated {
            " (generated)"
        } else {
            ""
        },
        config
            .workers
            .map_or_else(|| "default".to_string(), |n| n.to_string()),
        match config.preset {
            PresetName::Ci => "ci",
            PresetName::Paper => "paper",
        },
        ids.join(","),
        config.weights.len(),
    )
}

fn write_table<T: Serialize>(table: Table<T>, config: &RunConfig) -> Result<()> {
    emit(
        &encode(&table.records, config.format)?,
        config.out.as_deref(),
    )?;
    if table.failures.is_empty() {
        Ok(())
    } else {
        Err(PartialFailure(table.failures).into())
    }
}

/// Runs one computing command and writes its table. Rows of instances that
/// succeeded are written before failures are reported.
pub fn run(config: &RunConfig) -> Result<()> {
    eprintln!("{}", header(config));
    match config.command {
        CommandKind::Evaluate => write_table(evaluate(config)?, config),
        CommandKind::Arl => write_table(arl(config)?, config),
        CommandKind::Optimize => write_table(optimize(config)?, config),
        CommandKind::Bench => write_table(bench(config)?, config),
    }
}

fn instance_record(i: &Instance) -> InstanceRecord {
    let (c, d) = (&i.costs, &i.design_defaults);
    InstanceRecord {
        id: i.id.clone(),
        q: i.process.q,
        lambda: i.process.lambda,
        delta: i.delta,
        n: d.n,
        h: d.h,
        ul: d.ul,
        a: c.a,
        b: c.b,
        cf: c.cf,
        clr: c.clr,
        c0: c.c0,
        c1: c.c1,
        ts: c.ts,
        tl: c.tl,
        tr: c.tr,
        tf: c.tf,
    }
}

pub fn list_instances(args: &ListArgs) -> Result<()> {
    let instances = load_pool(args)?;
    let records: Vec<InstanceRecord> = instances.iter().map(instance_record).collect();
    let format = output_format(args.format, args.out.as_deref());
    emit(&encode(&records, format)?, args.out.as_deref())
}

pub fn export_instances(args: &ListArgs) -> Result<()> {
    if args.format == Some(crate::config::Format::Csv) {
        bail!("instance export is JSON only; use `instances list` for a CSV summary");
    }
    let instances = load_pool(args)?;
    let mut text = write_instances(&instances);
    text.push('\n');
    emit(text.as_bytes(), args.out.as_deref())
}

fn load_pool(args: &ListArgs) -> Result<Vec<Instance>> {
    match &args.instances_file {
        Some(path) => select_instances(&[], Some(path)),
        None => Ok(catalog()),
    }
}
