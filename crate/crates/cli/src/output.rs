//! Output records and their CSV/JSON encodings.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Format;

/// One instance and weight: simulated cost and both formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRecord {
    pub instance: String,
    pub r: f64,
    pub seed: u64,
    pub n_cycles: u64,
    pub f_sim: f64,
    pub f_sim_se: f64,
    pub f_lv: f64,
    pub f_modified: f64,
    pub pct_dif_lv: f64,
    pub pct_dif_modified: f64,
    pub arl0: f64,
    pub arl0_se: f64,
    pub arl1: f64,
    pub arl1_se: f64,
    pub aarl1: f64,
    pub aarl1_se: f64,
    pub anfa: f64,
    pub anfa_se: f64,
}

/// One point of the conditional ARL series. Summary columns repeat on every
/// row so each file stands alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArlRecord {
    pub instance: String,
    pub r: f64,
    pub seed: u64,
    pub m: u64,
    pub arl1_m: f64,
    pub arl1_m_se: f64,
    pub pr_shift: f64,
    pub k: u64,
    pub epsilon: f64,
    pub aarl1: f64,
    pub aarl1_se: f64,
    pub anfa: f64,
    pub anfa_se: f64,
    pub arl0: f64,
    pub arl0_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRecord {
    pub instance: String,
    pub seed: u64,
    pub n_cycles: u64,
    pub grid_points: usize,
    pub r_sim: f64,
    pub f_sim: f64,
    pub f_sim_se: f64,
    pub r_lv: f64,
    pub f_lv: f64,
    pub f_sim_at_r_lv: f64,
    pub f_sim_at_r_lv_se: f64,
    pub increment_pct: f64,
    pub r_modified: Option<f64>,
    pub f_modified: Option<f64>,
    pub f_sim_at_r_modified: Option<f64>,
}

/// One row of the comparison table. The error columns are filled at r = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    pub r: f64,
    pub seed: u64,
    pub s_small: f64,
    pub s_small_se: f64,
    pub s_large: f64,
    pub s_large_se: f64,
    pub f_lv: f64,
    pub pct_dif: f64,
    pub arl0: f64,
    pub arl0_se: f64,
    pub arl1: f64,
    pub arl1_se: f64,
    pub pct_error1: Option<f64>,
    pub pct_error2: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub q: usize,
    pub lambda: f64,
    pub delta: f64,
    pub n: u32,
    pub h: f64,
    pub ul: f64,
    pub a: f64,
    pub b: f64,
    pub cf: f64,
    pub clr: f64,
    pub c0: f64,
    pub c1: f64,
    pub ts: f64,
    pub tl: f64,
    pub tr: f64,
    pub tf: f64,
}

pub fn encode<T: Serialize>(records: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in records {
                w.serialize(r)?;
            }
            Ok(w.into_inner().context("flushing CSV output")?)
        }
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(records)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8], format: Format) -> Result<Vec<T>> {
    match format {
        Format::Csv => csv::Reader::from_reader(bytes)
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .context("reading CSV records"),
        Format::Json => serde_json::from_slice(bytes).context("reading JSON records"),
    }
}

/// Writes `bytes` to `out`, or to stdout when no path is given.
pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<BenchRecord> {
        vec![
            BenchRecord {
                instance: "U1".into(),
                r: 0.1 + 0.2,
                seed: u64::MAX,
                s_small: 157.06123456789012,
                s_small_se: 1.0 / 3.0,
                s_large: 1e-300,
                s_large_se: 0.0,
                f_lv: 153.9,
                pct_dif: 1.98,
                arl0: 2773.5,
                arl0_se: 8.7,
                arl1: 3.27,
                arl1_se: 0.004,
                pct_error1: None,
                pct_error2: Some(std::f64::consts::PI),
                seconds: 0.25,
            },
            BenchRecord {
                instance: "M18".into(),
                r: 1.0,
                pct_error1: Some(0.1),
                pct_error2: None,
                ..sample_base()
            },
        ]
    }

    fn sample_base() -> BenchRecord {
        BenchRecord {
            instance: String::new(),
            r: 0.0,
            seed: 0,
            s_small: 2.0,
            s_small_se: 0.5,
            s_large: 7.0 / 9.0,
            s_large_se: 0.1,
            f_lv: 1.0,
            pct_dif: 0.0,
            arl0: 1.0,
            arl0_se: 0.0,
            arl1: 1.0,
            arl1_se: 0.0,
            pct_error1: None,
            pct_error2: None,
            seconds: 1e-9,
        }
    }

    #[test]
    fn records_round_trip_exactly() {
        let records = sample();
        for format in [Format::Csv, Format::Json] {
            let bytes = encode(&records, format).unwrap();
            let back: Vec<BenchRecord> = decode(&bytes, format).unwrap();
            assert_eq!(back, records);
            assert_eq!(encode(&back, format).unwrap(), bytes);
        }
    }

    #[test]
    fn empty_tables() {
        let none: Vec<BenchRecord> = Vec::new();
        let json = encode(&none, Format::Json).unwrap();
        assert!(decode::<BenchRecord>(&json, Format::Json)
            .unwrap()
            .is_empty());
        let csv = encode(&none, Format::Csv).unwrap();
        assert!(decode::<BenchRecord>(&csv, Format::Csv).unwrap().is_empty());
    }
}
