use crate::error::{Error, Result};

use super::{shift_for_delta, ChartDesign, CostParams, Instance, ProcessModel};

/// All catalog ids: the univariate set first, then the trivariate set.
pub const INSTANCE_IDS: [&str; 36] = [
    "U1", "U2", "U3", "U4", "U5", "U6", "U7", "U8", "U9", "U10", "U11", "U12", "U13", "U14", "U15",
    "U16", "U17", "U18", "M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8", "M9", "M10", "M11", "M12",
    "M13", "M14", "M15", "M16", "M17", "M18",
];

/// One scenario row: a, b, C_F, C_LR, C_0, C_1, T_S, T_L + T_R, λ, δ.
type Row = [f64; 10];

const SCENARIOS: [Row; 18] = [
    [0.5, 0.1, 50.0, 25.0, 100.0, 250.0, 0.05, 2.0, 0.01, 0.5],
    [0.5, 0.1, 50.0, 25.0, 200.0, 500.0, 0.5, 20.0, 0.05, 0.5],
    [0.5, 0.1, 500.0, 250.0, 100.0, 250.0, 0.5, 20.0, 0.01, 2.0],
    [0.5, 0.1, 500.0, 250.0, 200.0, 500.0, 0.05, 2.0, 0.05, 2.0],
    [0.5, 1.0, 50.0, 25.0, 100.0, 250.0, 0.5, 2.0, 0.05, 2.0],
    [0.5, 1.0, 50.0, 25.0, 200.0, 500.0, 0.05, 20.0, 0.01, 2.0],
    [0.5, 1.0, 500.0, 250.0, 100.0, 250.0, 0.05, 20.0, 0.05, 0.5],
    [0.5, 1.0, 500.0, 250.0, 200.0, 500.0, 0.5, 2.0, 0.01, 0.5],
    [5.0, 0.1, 50.0, 25.0, 100.0, 250.0, 0.05, 20.0, 0.05, 2.0],
    [5.0, 0.1, 50.0, 25.0, 200.0, 500.0, 0.5, 2.0, 0.01, 2.0],
    [5.0, 0.1, 500.0, 250.0, 100.0, 250.0, 0.5, 2.0, 0.05, 0.5],
    [5.0, 0.1, 500.0, 250.0, 200.0, 500.0, 0.05, 20.0, 0.01, 0.5],
    [5.0, 1.0, 50.0, 25.0, 100.0, 250.0, 0.5, 20.0, 0.01, 0.5],
    [5.0, 1.0, 50.0, 25.0, 200.0, 500.0, 0.05, 2.0, 0.05, 0.5],
    [5.0, 1.0, 500.0, 250.0, 100.0, 250.0, 0.05, 2.0, 0.01, 2.0],
    [5.0, 1.0, 500.0, 250.0, 200.0, 500.0, 0.5, 20.0, 0.05, 2.0],
    [0.5, 0.1, 50.0, 25.0, 10.0, 100.0, 0.05, 4.0, 0.01, 0.5],
    [0.5, 0.1, 50.0, 25.0, 10.0, 100.0, 0.05, 4.0, 0.01, 2.0],
];

const SAMPLE_SIZE: u32 = 1;
const INTERVAL: f64 = 1.5;
const LIMIT_SQ: f64 = 10.5;

fn trivariate_sigma() -> Vec<Vec<f64>> {
    vec![
        vec![2.0, 1.0, 1.0],
        vec![1.0, 3.0, 1.0],
        vec![1.0, 1.0, 3.0],
    ]
}

fn build(id: &str, row: &Row, multivariate: bool) -> Result<Instance> {
    let [a, b, cf, clr, c0, c1, ts, tlr, lambda, delta] = *row;
    let (q, sigma) = if multivariate {
        (3, trivariate_sigma())
    } else {
        (1, vec![vec![1.0]])
    };
    let base = ProcessModel::new(vec![0.0; q], vec![0.0; q], sigma, lambda)?;
    let mu1 = shift_for_delta(&base, delta, SAMPLE_SIZE, &vec![1.0; q])?;
    let process = base.with_mu1(mu1)?;
    // Only T_L + T_R is known; it is all booked as location time.
    let costs = CostParams {
        c0,
        c1,
        cf,
        clr,
        a,
        b,
        ts,
        tl: tlr,
        tr: 0.0,
        tf: 0.0,
        gamma1: false,
        gamma2: false,
    };
    let design_defaults =
        ChartDesign::equal_weights(SAMPLE_SIZE, INTERVAL, LIMIT_SQ.sqrt(), 1.0, q)?;
    Ok(Instance {
        id: id.to_string(),
        process,
        costs,
        design_defaults,
        delta,
    })
}

/// Looks up a benchmark instance by id (`U1`..`U18`, `M1`..`M18`).
pub fn load_instance(id: &str) -> Result<Instance> {
    let unknown = || Error::UnknownInstance { id: id.to_string() };
    let (multivariate, rest) = match id.split_at_checked(1) {
        Some(("U", rest)) => (false, rest),
        Some(("M", rest)) => (true, rest),
        _ => return Err(unknown()),
    };
    if rest.starts_with('0') || rest.starts_with('+') {
        return Err(unknown());
    }
    let k: usize = rest.parse().map_err(|_| unknown())?;
    if !(1..=SCENARIOS.len()).contains(&k) {
        return Err(unknown());
    }
    build(id, &SCENARIOS[k - 1], multivariate)
}

/// The full 36-instance catalog in `INSTANCE_IDS` order.
pub fn catalog() -> Vec<Instance> {
    INSTANCE_IDS
        .iter()
        .map(|id| load_instance(id).expect("catalog rows are valid"))
        .collect()
}

/// Serializes instances as a pretty-printed JSON array.
pub fn write_instances(instances: &[Instance]) -> String {
    serde_json::to_string_pretty(instances).expect("instances serialize")
}

/// Parses a JSON array of instances (or a single instance object) and
/// validates each one.
pub fn read_instances(json: &str) -> Result<Vec<Instance>> {
    let format = |e: serde_json::Error| Error::Format(e.to_string());
    let value: serde_json::Value = serde_json::from_str(json).map_err(format)?;
    let list: Vec<Instance> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|one| vec![one])
    }
    .map_err(format)?;
    for inst in &list {
        inst.validate()?;
    }
    Ok(list)
}
