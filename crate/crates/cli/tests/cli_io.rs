//! End-to-end tests of the CLI stages: exit codes, file handoff, and
//! idempotence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_privtraj")
}

fn tmp(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("privtraj-cli-{}-{label}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/porto_20.csv")
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("command runs");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn ingest_applies_porto_filters_to_the_fixture() {
    let dir = tmp("ingest");
    let out = dir.join("corpus.csv");
    let stdout = ok(Command::new(bin()).args([
        "ingest",
        "--input",
        fixture().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    // 20 rows: 18 keepers, one MISSING_DATA=True, one 25-point short trip.
    assert!(stdout.contains("read 20 rows, kept 18"), "stdout: {stdout}");
    assert!(
        stdout.contains("1 missing-data, 1 short, 0 malformed"),
        "stdout: {stdout}"
    );
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(written.lines().count(), 19); // header + 18 trips
}

#[test]
fn ingest_missing_file_exits_1_without_partial_output() {
    let dir = tmp("ingest-missing");
    let out = dir.join("corpus.csv");
    let status = Command::new(bin())
        .args([
            "ingest",
            "--input",
            "/nonexistent/porto.csv",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(!out.exists(), "failed ingest must not leave partial output");
}

#[test]
fn ingest_schema_mismatch_exits_2_naming_the_column() {
    let dir = tmp("ingest-schema");
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "TRIP_ID,MISSING_DATA,TRACK\na,False,\"[]\"\n").unwrap();
    let out = Command::new(bin())
        .args([
            "ingest",
            "--input",
            bad.to_str().unwrap(),
            "--out",
            dir.join("out.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("POLYLINE"),
        "stderr must name the missing column"
    );
}

#[test]
fn synth_is_idempotent_given_the_seed() {
    let dir = tmp("synth");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let args = |out: &Path| {
        vec![
            "synth".to_string(),
            "--out".into(),
            out.display().to_string(),
            "--n-trips".into(),
            "60".into(),
            "--n-od-pairs".into(),
            "6".into(),
            "--seed".into(),
            "9".into(),
        ]
    };
    let stdout = ok(Command::new(bin()).args(args(&a)));
    assert!(
        stdout.contains("60 trips"),
        "summary line must carry the trip count: {stdout}"
    );
    ok(Command::new(bin()).args(args(&b)));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn perturb_none_is_a_byte_identical_passthrough() {
    let dir = tmp("perturb-none");
    let corpus = dir.join("corpus.csv");
    ok(Command::new(bin()).args([
        "synth",
        "--out",
        corpus.to_str().unwrap(),
        "--n-trips",
        "40",
        "--n-od-pairs",
        "4",
    ]));
    let input_before = std::fs::read(&corpus).unwrap();
    let out = dir.join("pert.csv");
    ok(Command::new(bin()).args([
        "perturb",
        "--input",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--privacy",
        "none",
    ]));
    assert_eq!(input_before, std::fs::read(&out).unwrap());
    // Commands never mutate their inputs.
    assert_eq!(input_before, std::fs::read(&corpus).unwrap());
}

#[test]
fn environment_variables_mirror_flags() {
    let dir = tmp("env");
    let by_flag = dir.join("flag.csv");
    let by_env = dir.join("env.csv");
    ok(Command::new(bin()).args([
        "synth",
        "--out",
        by_flag.to_str().unwrap(),
        "--n-trips",
        "30",
        "--n-od-pairs",
        "3",
        "--seed",
        "77",
    ]));
    ok(Command::new(bin())
        .args(["synth", "--n-trips", "30", "--n-od-pairs", "3"])
        .env("PRIVTRAJ_OUT", by_env.to_str().unwrap())
        .env("PRIVTRAJ_SEED", "77"));
    assert_eq!(
        std::fs::read(&by_flag).unwrap(),
        std::fs::read(&by_env).unwrap()
    );
}

#[test]
fn perturb_location_requires_epsilon() {
    let dir = tmp("perturb-eps");
    let corpus = dir.join("corpus.csv");
    ok(Command::new(bin()).args([
        "synth",
        "--out",
        corpus.to_str().unwrap(),
        "--n-trips",
        "10",
        "--n-od-pairs",
        "2",
    ]));
    let out = Command::new(bin())
        .args([
            "perturb",
            "--input",
            corpus.to_str().unwrap(),
            "--out",
            dir.join("p.csv").to_str().unwrap(),
            "--privacy",
            "location",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn attack_with_zero_q_reports_zero_reward_gain() {
    let dir = tmp("attack-q0");
    let corpus = dir.join("corpus.csv");
    ok(Command::new(bin()).args([
        "synth",
        "--out",
        corpus.to_str().unwrap(),
        "--n-trips",
        "80",
        "--n-od-pairs",
        "4",
    ]));
    let atk = dir.join("atk");
    ok(Command::new(bin()).args([
        "attack",
        "--input",
        corpus.to_str().unwrap(),
        "--out",
        atk.to_str().unwrap(),
        "--q",
        "0",
        "--od",
        "same",
        "--fraction",
        "1.0",
    ]));
    let manifest = std::fs::read_to_string(atk.join("manifest.csv")).unwrap();
    let mut rows = 0;
    for line in manifest.lines().skip(1) {
        let gain: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
        assert_eq!(gain, 0.0, "row: {line}");
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn detect_seq_writes_schema_compatible_scores() {
    let dir = tmp("detect-seq");
    let corpus = dir.join("corpus.csv");
    ok(Command::new(bin()).args([
        "synth",
        "--out",
        corpus.to_str().unwrap(),
        "--n-trips",
        "60",
        "--n-od-pairs",
        "3",
        "--seed",
        "4",
    ]));
    let atk = dir.join("atk");
    ok(Command::new(bin()).args([
        "attack",
        "--input",
        corpus.to_str().unwrap(),
        "--out",
        atk.to_str().unwrap(),
        "--fraction",
        "0.5",
        "--seed",
        "4",
    ]));
    let scores = dir.join("scores.csv");
    let model = dir.join("model.ckpt");
    ok(Command::new(bin()).args([
        "detect",
        "--input",
        atk.join("attacked.csv").to_str().unwrap(),
        "--split",
        atk.join("split.csv").to_str().unwrap(),
        "--manifest",
        atk.join("manifest.csv").to_str().unwrap(),
        "--detector",
        "seq",
        "--epochs",
        "2",
        "--out",
        scores.to_str().unwrap(),
        "--model-out",
        model.to_str().unwrap(),
        "--seed",
        "4",
    ]));
    let text = std::fs::read_to_string(&scores).unwrap();
    assert!(text.starts_with("trip_id,od_key,score_m,label\n"));
    assert!(text.contains(",malicious"));
    assert!(text.contains(",normal"));
    assert!(model.exists());

    // Re-scoring from the checkpoint reproduces the same file.
    let scores2 = dir.join("scores2.csv");
    ok(Command::new(bin()).args([
        "detect",
        "--input",
        atk.join("attacked.csv").to_str().unwrap(),
        "--split",
        atk.join("split.csv").to_str().unwrap(),
        "--manifest",
        atk.join("manifest.csv").to_str().unwrap(),
        "--detector",
        "seq",
        "--model-in",
        model.to_str().unwrap(),
        "--out",
        scores2.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(&scores).unwrap(),
        std::fs::read(&scores2).unwrap()
    );
}

#[test]
fn experiment_runs_from_an_ingested_file_corpus() {
    let dir = tmp("file-corpus");
    let corpus = dir.join("corpus.csv");
    ok(Command::new(bin()).args([
        "synth",
        "--out",
        corpus.to_str().unwrap(),
        "--n-trips",
        "120",
        "--n-od-pairs",
        "6",
        "--seed",
        "13",
    ]));
    let config = dir.join("cfg.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "seed": 13,
            "out_dir": dir.join("res").to_str().unwrap(),
            "corpus": {
                "source": "file",
                "path": corpus.to_str().unwrap(),
                "min_points": 5
            },
            "grid": {
                "detectors": ["Dbscan"],
                "privacy": ["None"],
                "intents": [[300.0, 0.5]],
                "attack_fraction": 0.5
            }
        })
        .to_string(),
    )
    .unwrap();
    ok(Command::new(bin()).args(["experiment", "--config", config.to_str().unwrap()]));
    let results = std::fs::read_to_string(dir.join("res").join("results.csv")).unwrap();
    assert!(results.lines().count() > 1);

    // A file source without a path is a validation failure.
    std::fs::write(
        &config,
        serde_json::json!({"corpus": {"source": "file"}}).to_string(),
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["experiment", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_on_missing_results_exits_1_and_rerender_is_stable() {
    let empty = tmp("report-empty");
    let out = Command::new(bin())
        .args(["report", "--results", empty.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // A small real experiment, then re-render and compare bytes.
    let dir = tmp("report-real");
    let config = dir.join("cfg.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "seed": 5,
            "out_dir": dir.join("res").to_str().unwrap(),
            "corpus": {"source": "synth", "synth": {"n_trips": 120, "n_od_pairs": 6}},
            "grid": {
                "detectors": ["Dbscan"],
                "privacy": ["None", {"Location": 0.1}],
                "intents": [[300.0, 0.5], [700.0, 1.0]],
                "attack_fraction": 0.5
            }
        })
        .to_string(),
    )
    .unwrap();
    ok(Command::new(bin()).args(["experiment", "--config", config.to_str().unwrap()]));
    let res = dir.join("res");
    let summary_a = std::fs::read(res.join("summary.md")).unwrap();
    let rerendered = dir.join("rerender");
    ok(Command::new(bin()).args([
        "report",
        "--results",
        res.to_str().unwrap(),
        "--out",
        rerendered.to_str().unwrap(),
    ]));
    let summary_b = std::fs::read(rerendered.join("summary.md")).unwrap();
    assert_eq!(summary_a, summary_b, "re-rendered summary differs");

    // Panel count equals the number of distinct intents.
    let plots: Vec<_> = std::fs::read_dir(rerendered.join("plots"))
        .unwrap()
        .collect();
    assert_eq!(plots.len(), 2);
}

#[test]
fn default_grid_shape_matches_the_documented_cell_count() {
    // 2 detectors x (1 none + 2 location + 2 trajectory) x 3 intents x 2 od
    // modes = 60 cells, of which dbscan x trajectory (12) are not applicable.
    let grid = privtraj_core::eval::GridConfig::default();
    let cells =
        grid.detectors.len() * grid.privacy.len() * grid.intents.len() * grid.od_modes.len();
    assert_eq!(cells, 60);
    let na = grid.intents.len()
        * grid.od_modes.len()
        * grid
            .privacy
            .iter()
            .filter(|p| matches!(p, privtraj_core::eval::PrivacySpec::Trajectory(_)))
            .count();
    assert_eq!(na, 12);
}
