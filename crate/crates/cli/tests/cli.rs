use std::path::Path;
use std::process::{Command, Output};

use memchart::cost::truncation_k;
use memchart_cli::config::Format;
use memchart_cli::output::{
    decode, encode, ArlRecord, BenchRecord, EvaluateRecord, InstanceRecord, OptimizeRecord,
};

const SMALL: [&str; 10] = [
    "--preset",
    "ci",
    "--n-cycles",
    "1500",
    "--arl-runs",
    "400",
    "--runs-per-m",
    "100",
    "--anfa-runs",
    "400",
];

fn memchart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memchart"))
        .args(args)
        .env_remove("MEMCHART_WORKERS")
        .output()
        .expect("binary runs")
}

fn small(extra: &[&str]) -> Vec<String> {
    extra
        .iter()
        .chain(SMALL.iter())
        .map(|s| s.to_string())
        .collect()
}

fn run_ok(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = memchart(&refs);
    assert!(
        out.status.success(),
        "memchart {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_arg(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn zero_cycles_is_a_config_error() {
    let out = memchart(&[
        "evaluate",
        "--instance",
        "U1",
        "--r",
        "0.05",
        "--n-cycles",
        "0",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("n-cycles"), "{}", stderr(&out));
}

#[test]
fn unknown_instance_names_valid_ids() {
    let out = memchart(&["optimize", "--instance", "X7", "--r-grid", "0.5"]);
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(
        msg.contains("X7") && msg.contains("U1") && msg.contains("M18"),
        "{msg}"
    );
}

#[test]
fn bad_weight_and_epsilon_are_rejected() {
    for args in [
        vec!["evaluate", "--instance", "U1", "--r", "1.5"],
        vec!["arl", "--instance", "U1", "--epsilon", "1"],
        vec!["evaluate", "--instance", "U1", "--workers", "0"],
    ] {
        assert!(!memchart(&args).status.success(), "{args:?}");
    }
}

#[test]
fn same_seed_gives_identical_files_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        run_ok(&small(&[
            "evaluate",
            "--instance",
            "U18,M4",
            "--r",
            "0.1,1",
            "--epsilon",
            "1e-4",
            "--seed",
            "42",
            "--out",
            &path_arg(p),
        ]));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let records: Vec<EvaluateRecord> = decode(&bytes, Format::Csv).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records
        .iter()
        .all(|r| r.seed == 42 && r.n_cycles == 1500 && r.f_sim > 0.0));
    assert_eq!(encode(&records, Format::Csv).unwrap(), bytes);
}

#[test]
fn json_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    run_ok(&small(&[
        "bench",
        "--instance",
        "M18",
        "--r",
        "0.2,1",
        "--small-cycles",
        "500",
        "--seed",
        "3",
        "--out",
        &path_arg(&out),
    ]));
    let bytes = std::fs::read(&out).unwrap();
    let records: Vec<BenchRecord> = decode(&bytes, Format::Json).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.seconds > 0.0));
    assert!(records[0].pct_error1.is_none());
    let at_one = &records[1];
    assert!(at_one.pct_error1.is_some() && at_one.pct_error2.is_some());
    assert_eq!(encode(&records, Format::Json).unwrap(), bytes);
}

#[test]
fn generated_seed_is_reported_and_reproducible() {
    let out = run_ok(&small(&[
        "evaluate",
        "--instance",
        "U4",
        "--r",
        "0.5",
        "--epsilon",
        "1e-3",
    ]));
    let msg = stderr(&out);
    let seed: u64 = msg
        .split("seed=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("no seed in header: {msg}"));
    assert!(msg.contains("(generated)"));
    let again = run_ok(&small(&[
        "evaluate",
        "--instance",
        "U4",
        "--r",
        "0.5",
        "--epsilon",
        "1e-3",
        "--seed",
        &seed.to_string(),
    ]));
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "instance = [\"U18\"]\nr = [0.3]\nseed = 11\npreset = \"ci\"\nn-cycles = 700\narl-runs = 300\nruns-per-m = 50\nanfa-runs = 300\nepsilon = 1e-3\n",
    )
    .unwrap();
    let out = run_ok(&[
        "evaluate".into(),
        "--config".into(),
        path_arg(&cfg),
        "--n-cycles".into(),
        "900".into(),
    ]);
    let records: Vec<EvaluateRecord> = decode(&out.stdout, Format::Csv).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(
        (records[0].instance.as_str(), records[0].r, records[0].seed),
        ("U18", 0.3, 11)
    );
    assert_eq!(records[0].n_cycles, 900);

    let json = dir.path().join("run.json");
    std::fs::write(
        &json,
        r#"{"instance": ["U18"], "seed": 11, "unknown-key": 1}"#,
    )
    .unwrap();
    let bad = memchart(&["evaluate", "--config", json.to_str().unwrap()]);
    assert!(!bad.status.success());
}

#[test]
fn worker_env_var_is_honored_and_results_do_not_depend_on_it() {
    let args = small(&[
        "evaluate",
        "--instance",
        "M5",
        "--r",
        "0.1",
        "--epsilon",
        "1e-3",
        "--seed",
        "5",
    ]);
    let one = run_ok(&args);
    let three = Command::new(env!("CARGO_BIN_EXE_memchart"))
        .args(&args)
        .env("MEMCHART_WORKERS", "3")
        .output()
        .unwrap();
    assert!(three.status.success());
    assert!(stderr(&three).contains("workers=3"), "{}", stderr(&three));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn arl_series_matches_truncation() {
    let out = run_ok(&small(&[
        "arl",
        "--instance",
        "U4",
        "--r",
        "0.05",
        "--epsilon",
        "1e-4",
        "--seed",
        "1",
    ]));
    let rows: Vec<ArlRecord> = decode(&out.stdout, Format::Csv).unwrap();
    let k = truncation_k(1e-4, 0.05, 1.5).unwrap();
    assert_eq!(rows.len() as u64, k + 1);
    assert!(rows.iter().all(|r| r.k == k));
    assert_eq!(rows[0].m, 0);
    let mass: f64 = rows.iter().map(|r| r.pr_shift).sum();
    assert!(mass >= 1.0 - 1e-4);
    assert!(rows[0].aarl1 > rows[0].arl1_m);
}

#[test]
fn single_point_grid_returns_that_point() {
    let out = run_ok(&small(&[
        "optimize",
        "--instance",
        "U9",
        "--r-grid",
        "0.3",
        "--seed",
        "2",
        "--with-modified",
        "--epsilon",
        "1e-3",
    ]));
    let rows: Vec<OptimizeRecord> = decode(&out.stdout, Format::Csv).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!((row.r_sim, row.r_lv, row.r_modified), (0.3, 0.3, Some(0.3)));
    assert_eq!(row.increment_pct, 0.0);
    assert_eq!(row.grid_points, 1);
}

#[test]
fn optimize_increment_is_nonnegative() {
    let out = run_ok(&small(&[
        "optimize",
        "--instance",
        "M4,U16",
        "--r-grid",
        "0.1:1:0.3",
        "--seed",
        "8",
    ]));
    let rows: Vec<OptimizeRecord> = decode(&out.stdout, Format::Csv).unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row.grid_points, 4);
        assert!(row.increment_pct >= 0.0);
        assert!(row.f_sim_at_r_lv >= row.f_sim);
    }
}

#[test]
fn exported_instances_can_be_imported() {
    let dir = tempfile::tempdir().unwrap();
    let listed = run_ok(&["instances".into(), "list".into()]);
    let rows: Vec<InstanceRecord> = decode(&listed.stdout, Format::Csv).unwrap();
    assert_eq!(rows.len(), 36);
    assert_eq!(rows[17].id, "U18");
    assert_eq!(rows[35].q, 3);

    let file = dir.path().join("catalog.json");
    run_ok(&[
        "instances".into(),
        "export".into(),
        "--out".into(),
        path_arg(&file),
    ]);
    let text = std::fs::read_to_string(&file).unwrap();
    let edited = text.replacen("\"U1\"", "\"mine\"", 1);
    let custom = dir.path().join("custom.json");
    std::fs::write(&custom, edited).unwrap();

    let out = run_ok(&small(&[
        "evaluate",
        "--instances-file",
        &path_arg(&custom),
        "--instance",
        "mine",
        "--r",
        "1",
        "--epsilon",
        "1e-2",
        "--seed",
        "4",
    ]));
    let records: Vec<EvaluateRecord> = decode(&out.stdout, Format::Csv).unwrap();
    assert_eq!(records[0].instance, "mine");

    let missing = memchart(&[
        "evaluate",
        "--instances-file",
        custom.to_str().unwrap(),
        "--instance",
        "U1",
    ]);
    assert!(!missing.status.success());
    assert!(stderr(&missing).contains("mine"));
}
