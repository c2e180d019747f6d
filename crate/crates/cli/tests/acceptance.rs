//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Criteria 7-11 share one pinned synthetic-corpus experiment
//! grid built once per test-suite run.
//!
//! Run with `cargo test -p privtraj-cli --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use privtraj_core::attack::OdMode;
use privtraj_core::dbscan::{dbscan, reference_dbscan, ClusterLabel, DbscanParams};
use privtraj_core::eval::{
    self, cell_id, od_sensitivity, roc, CellResult, CellStatus, DetectorKind, GridConfig,
    PrivacySpec, ScoredTrip,
};
use privtraj_core::frechet::{brute_force_frechet, discrete_frechet, from_dense, pairwise_matrix};
use privtraj_core::geo::PlanarPoint;
use privtraj_core::privacy::{
    geo_indistinguishability_check, ks_critical, ks_statistic, planar_laplace_sample, radial_cdf,
};
use privtraj_core::seeds;
use privtraj_core::seq::{self, gradient_check, SeqModel, SeqModelConfig};
use privtraj_core::synth::{synth_corpus, SynthParams};
use privtraj_core::trajectory::{Label, PlanarBounds, PlanarTrack};

fn pass(criterion: &str, details: &str) {
    println!("[acceptance] {criterion}: PASS - {details}");
}

// ---------------------------------------------------------------------------
// Criterion 1: planar Laplace mechanism (radial law, mean, symmetry).
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_planar_laplace_radial_law() {
    let started = Instant::now();
    let n = 1_000_000usize;
    let center = PlanarPoint::new(0.0, 0.0);
    let mut details = Vec::new();

    for &epsilon in &[0.1, 0.01] {
        let mut rng = seeds::stream(20_240_801, &["acceptance-laplace", &epsilon.to_string()]);
        let mut radii = Vec::with_capacity(n);
        let (mut sx, mut sy) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let z = planar_laplace_sample(center, epsilon, &mut rng);
            radii.push(z.dist(&center));
            sx += z.x;
            sy += z.y;
        }
        let mean: f64 = radii.iter().sum::<f64>() / n as f64;
        let expected = 2.0 / epsilon;
        assert!(
            (mean - expected).abs() / expected < 0.01,
            "eps={epsilon}: empirical mean radius {mean} not within 1% of {expected}"
        );
        let d = ks_statistic(&mut radii, |r| radial_cdf(epsilon, r));
        let critical = ks_critical(0.001, n);
        assert!(
            d < critical,
            "eps={epsilon}: KS statistic {d} >= {critical}"
        );
        if epsilon == 0.01 {
            let drift = (sx / n as f64).hypot(sy / n as f64);
            assert!(drift < 1.0, "mean displacement vector norm {drift} >= 1 m");
            details.push(format!("drift {drift:.3} m"));
        }
        details.push(format!(
            "eps={epsilon}: mean {mean:.2} m, KS {d:.5} < {critical:.5}"
        ));
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < 30.0,
        "criterion 1 took {elapsed:.1} s, budget 30 s"
    );
    pass(
        "criterion 1 (planar Laplace radial law)",
        &format!("{}; {elapsed:.1} s", details.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: geo-indistinguishability audit.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_geo_indistinguishability_audit() {
    let audit = geo_indistinguishability_check(0.01, 100.0, 1_000_000, 50.0, 500, 20_240_802);
    assert!((audit.bound - 1.0).abs() < 1e-12);
    assert!(
        audit.max_violation <= 0.15,
        "binned log-ratio violation {} exceeds 0.15 beyond eps*d",
        audit.max_violation
    );
    pass(
        "criterion 2 (geo-indistinguishability audit)",
        &format!(
            "max violation {:.4} <= 0.15 over {} qualifying bins, bound eps*d = {:.2}",
            audit.max_violation, audit.qualifying_bins, audit.bound
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: discrete Frechet oracle equivalence.
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_frechet_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = seeds::stream(20_240_803, &["acceptance-frechet"]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len_a = rng.random_range(1..=5usize);
        let len_b = rng.random_range(1..=5usize);
        let mut draw = |len: usize| -> Vec<PlanarPoint> {
            (0..len)
                .map(|_| {
                    PlanarPoint::new(
                        rng.random_range(-1000.0..1000.0),
                        rng.random_range(-1000.0..1000.0),
                    )
                })
                .collect()
        };
        let a = draw(len_a);
        let b = draw(len_b);
        let dp = discrete_frechet(&a, &b).unwrap();
        let bf = brute_force_frechet(&a, &b).unwrap();
        let rel = (dp - bf).abs() / bf.abs().max(1e-300);
        worst = worst.max(rel);
        assert!(rel <= 1e-9, "dp {dp} vs brute force {bf} (rel {rel})");
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < 10.0,
        "criterion 3 took {elapsed:.1} s, budget 10 s"
    );
    pass(
        "criterion 3 (Frechet DP = coupling oracle)",
        &format!("1000 random pairs, worst relative gap {worst:.2e}; {elapsed:.2} s"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: DBSCAN reference equivalence.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_dbscan_reference_equivalence() {
    let mut rng = seeds::stream(20_240_804, &["acceptance-dbscan"]);
    for round in 0..200 {
        let n = rng.random_range(3..=30usize);
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = rng.random_range(0.0..10.0);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        let matrix = from_dense((0..n).map(|i| format!("t{i}")).collect(), values).unwrap();
        let params = DbscanParams {
            eps_m: rng.random_range(1.0..8.0),
            min_pts: rng.random_range(2..=5),
            score_k: 2,
        };
        let ours = dbscan(&matrix, &params);
        let reference = reference_dbscan(&matrix, &params);

        assert_eq!(
            ours.noise_indices(),
            reference.noise_indices(),
            "noise sets differ on round {round}"
        );
        assert_eq!(
            ours.core_flags, reference.core_flags,
            "core flags differ on round {round}"
        );
        let mut mapping = std::collections::HashMap::new();
        for (a, b) in ours.labels.iter().zip(&reference.labels) {
            match (a, b) {
                (ClusterLabel::Noise, ClusterLabel::Noise) => {}
                (ClusterLabel::Cluster(x), ClusterLabel::Cluster(y)) => {
                    let expect = *mapping.entry(*x).or_insert(*y);
                    assert_eq!(expect, *y, "partition mismatch on round {round}");
                }
                other => panic!("label kind mismatch {other:?} on round {round}"),
            }
        }
    }
    pass(
        "criterion 4 (DBSCAN reference equivalence)",
        "200 random matrices (n <= 30): identical noise sets, cores and partitions",
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: sequence-model gradient check (release gate).
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_sequence_model_gradient_check() {
    let bounds = PlanarBounds {
        min_x: 0.0,
        min_y: 0.0,
        max_x: 4000.0,
        max_y: 4000.0,
    };
    let trips: Vec<Vec<[f64; 2]>> = (0..2)
        .map(|k| {
            let y = 600.0 + 900.0 * k as f64;
            let track = PlanarTrack {
                id: format!("g{k}"),
                points: vec![
                    PlanarPoint::new(400.0, y),
                    PlanarPoint::new(1400.0, y + 120.0),
                    PlanarPoint::new(2400.0, y - 60.0),
                    PlanarPoint::new(3400.0, y),
                ],
            };
            seq::preprocess(&track, &bounds, 6).unwrap()
        })
        .collect();

    let mut worst_overall: (String, f64) = (String::new(), 0.0);
    for (label, variational, n_mixture) in [
        ("variational 2-mixture", true, 2),
        ("plain autoencoder", false, 1),
    ] {
        let cfg = SeqModelConfig {
            hidden_dim: 4,
            latent_dim: 3,
            n_mixture,
            variational,
            kl_weight: 0.1,
            max_len: 6,
            seed: 20_240_805,
            ..Default::default()
        };
        let model = SeqModel::init(&cfg).unwrap();
        for (tensor, rel) in gradient_check(&model, &trips, 1e-5) {
            assert!(
                rel < 1e-4,
                "{label}: tensor {tensor} max relative error {rel} >= 1e-4"
            );
            if rel > worst_overall.1 {
                worst_overall = (format!("{label}/{tensor}"), rel);
            }
        }
    }
    pass(
        "criterion 5 (BPTT gradient check)",
        &format!(
            "every parameter tensor < 1e-4; worst {} at {:.2e}",
            worst_overall.0, worst_overall.1
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: AUC equals the Mann-Whitney statistic.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_auc_equals_mann_whitney() {
    let mut rng = seeds::stream(20_240_806, &["acceptance-auc"]);
    let mut checked = 0usize;
    while checked < 1000 {
        let n = rng.random_range(2..60usize);
        let scored: Vec<ScoredTrip> = (0..n)
            .map(|i| ScoredTrip {
                trip_id: format!("t{i}"),
                truth: if rng.random::<bool>() {
                    Label::Malicious
                } else {
                    Label::Normal
                },
                score: if rng.random::<f64>() < 0.1 {
                    f64::INFINITY
                } else {
                    (rng.random_range(0..10) as f64) / 3.0
                },
            })
            .collect();
        let n_pos = scored
            .iter()
            .filter(|s| s.truth == Label::Malicious)
            .count();
        if n_pos == 0 || n_pos == scored.len() {
            continue;
        }
        checked += 1;

        let auc = roc(&scored).unwrap().auc;
        let pos: Vec<f64> = scored
            .iter()
            .filter(|s| s.truth == Label::Malicious)
            .map(|s| s.score)
            .collect();
        let neg: Vec<f64> = scored
            .iter()
            .filter(|s| s.truth == Label::Normal)
            .map(|s| s.score)
            .collect();
        let mut mw = 0.0;
        for p in &pos {
            for q in &neg {
                mw += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        mw /= (pos.len() * neg.len()) as f64;
        assert!((auc - mw).abs() < 1e-12, "auc {auc} vs mann-whitney {mw}");
    }
    pass(
        "criterion 6 (AUC = Mann-Whitney)",
        "1000 random scored sets with ties and sentinels, exact to 1e-12",
    );
}

// ---------------------------------------------------------------------------
// Criteria 7-11 share one pinned experiment grid.
// ---------------------------------------------------------------------------

struct PinnedRun {
    cells: Vec<CellResult>,
    build_seconds: f64,
}

fn pinned_corpus_params() -> SynthParams {
    SynthParams {
        n_trips: 2000,
        n_od_pairs: 50,
        grid_extent_m: 4000.0,
        speed_mps: 10.0,
        sample_period_s: 15.0,
        jitter_m: 12.0,
        seed: 20_240_807,
    }
}

fn pinned_grid_config() -> GridConfig {
    GridConfig {
        detectors: vec![DetectorKind::Dbscan, DetectorKind::Seq],
        privacy: vec![
            PrivacySpec::None,
            PrivacySpec::Location(0.1),
            PrivacySpec::Location(0.01),
            PrivacySpec::Trajectory(0.01),
        ],
        intents: vec![(300.0, 0.5), (700.0, 1.0)],
        od_modes: vec![OdMode::SameOd, OdMode::ShiftedOd],
        seed: 20_240_807,
        attack_fraction: 0.3,
        // Fine OD cells put the eps = 0.1 noise scale (20 m mean radius) in
        // the group-fragmentation regime, which is what degrades the
        // clustering detector the way large perturbations degrade it at city
        // scale.
        cell_side_m: 18.0,
        ..Default::default()
    }
}

fn pinned_run() -> &'static PinnedRun {
    static RUN: OnceLock<PinnedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let started = Instant::now();
        let corpus = synth_corpus(&pinned_corpus_params()).expect("pinned corpus builds");
        let outcome = eval::run_grid(&corpus, &pinned_grid_config()).expect("pinned grid runs");
        PinnedRun {
            cells: outcome.cells,
            build_seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn auc_of(
    cells: &[CellResult],
    det: DetectorKind,
    privacy: PrivacySpec,
    c: f64,
    q: f64,
    od: OdMode,
) -> f64 {
    let id = cell_id(det, privacy, c, q, od);
    let cell = cells
        .iter()
        .find(|cell| cell.cell_id == id)
        .unwrap_or_else(|| panic!("missing cell {id}"));
    assert_eq!(
        cell.status,
        CellStatus::Ok,
        "cell {id} did not complete: {:?}",
        cell.status
    );
    cell.auc.expect("ok cell has auc")
}

#[test]
fn criterion_07_no_privacy_detection_parity() {
    let run = pinned_run();
    assert!(
        run.build_seconds < 600.0,
        "pinned grid took {:.0} s, budget 600 s",
        run.build_seconds
    );
    let dbscan_auc = auc_of(
        &run.cells,
        DetectorKind::Dbscan,
        PrivacySpec::None,
        700.0,
        1.0,
        OdMode::SameOd,
    );
    let seq_auc = auc_of(
        &run.cells,
        DetectorKind::Seq,
        PrivacySpec::None,
        700.0,
        1.0,
        OdMode::SameOd,
    );
    assert!(
        dbscan_auc >= 0.9,
        "dbscan no-privacy AUC {dbscan_auc} < 0.9"
    );
    assert!(seq_auc >= 0.9, "seq no-privacy AUC {seq_auc} < 0.9");
    assert!(
        (dbscan_auc - seq_auc).abs() <= 0.05,
        "per-detector gap {:.3} exceeds 0.05",
        (dbscan_auc - seq_auc).abs()
    );
    pass(
        "criterion 7 (no-privacy detection parity)",
        &format!(
            "intent (700 m, 1.0): dbscan {dbscan_auc:.3}, seq {seq_auc:.3}, gap {:.3}; grid built in {:.0} s",
            (dbscan_auc - seq_auc).abs(),
            run.build_seconds
        ),
    );
}

#[test]
fn criterion_08_privacy_degradation_trend() {
    let run = pinned_run();
    let at = |privacy| {
        auc_of(
            &run.cells,
            DetectorKind::Dbscan,
            privacy,
            300.0,
            0.5,
            OdMode::ShiftedOd,
        )
    };
    let none = at(PrivacySpec::None);
    let eps01 = at(PrivacySpec::Location(0.1));
    let eps001 = at(PrivacySpec::Location(0.01));
    assert!(
        none - eps01 >= 0.03,
        "AUC(none) {none:.3} does not exceed AUC(eps=0.1) {eps01:.3} by 0.03"
    );
    assert!(
        eps01 - eps001 >= 0.03,
        "AUC(eps=0.1) {eps01:.3} does not exceed AUC(eps=0.01) {eps001:.3} by 0.03"
    );
    pass(
        "criterion 8 (privacy degradation trend)",
        &format!("dbscan AUC {none:.3} > {eps01:.3} > {eps001:.3} at (300 m, 0.5)"),
    );
}

#[test]
fn criterion_09_relative_robustness() {
    let run = pinned_run();
    let dbscan_none = auc_of(
        &run.cells,
        DetectorKind::Dbscan,
        PrivacySpec::None,
        300.0,
        0.5,
        OdMode::SameOd,
    );
    let dbscan_01 = auc_of(
        &run.cells,
        DetectorKind::Dbscan,
        PrivacySpec::Location(0.1),
        300.0,
        0.5,
        OdMode::SameOd,
    );
    let seq_none = auc_of(
        &run.cells,
        DetectorKind::Seq,
        PrivacySpec::None,
        300.0,
        0.5,
        OdMode::SameOd,
    );
    let seq_01 = auc_of(
        &run.cells,
        DetectorKind::Seq,
        PrivacySpec::Location(0.1),
        300.0,
        0.5,
        OdMode::SameOd,
    );
    let dbscan_drop = (dbscan_none - dbscan_01) / dbscan_none;
    let seq_drop = (seq_none - seq_01) / seq_none;
    assert!(
        dbscan_drop > seq_drop,
        "relative drop dbscan {dbscan_drop:.3} not strictly above seq {seq_drop:.3}"
    );
    pass(
        "criterion 9 (relative robustness at eps=0.1)",
        &format!(
            "relative AUC drop: dbscan {:.1}% > seq {:.1}%",
            100.0 * dbscan_drop,
            100.0 * seq_drop
        ),
    );
}

#[test]
fn criterion_10_trajectory_vs_location_perturbation() {
    let run = pinned_run();
    let loc = auc_of(
        &run.cells,
        DetectorKind::Seq,
        PrivacySpec::Location(0.01),
        700.0,
        1.0,
        OdMode::ShiftedOd,
    );
    let traj = auc_of(
        &run.cells,
        DetectorKind::Seq,
        PrivacySpec::Trajectory(0.01),
        700.0,
        1.0,
        OdMode::ShiftedOd,
    );
    assert!(
        traj >= loc - 0.01,
        "seq AUC under trajectory-based perturbation {traj:.3} worse than location-based {loc:.3} - 0.01"
    );

    // The clustering detector cannot consume a sequential mechanism: those
    // cells must be reported not-applicable, never computed.
    let na_cells: Vec<&CellResult> = run
        .cells
        .iter()
        .filter(|cell| {
            cell.detector == DetectorKind::Dbscan
                && matches!(cell.privacy, PrivacySpec::Trajectory(_))
        })
        .collect();
    assert!(
        !na_cells.is_empty(),
        "expected dbscan x trajectory cells in the grid"
    );
    for cell in &na_cells {
        assert_eq!(
            cell.status,
            CellStatus::NotApplicable,
            "cell {} should be not-applicable",
            cell.cell_id
        );
        assert!(cell.auc.is_none());
    }
    pass(
        "criterion 10 (trajectory vs location perturbation)",
        &format!(
            "seq at eps=0.01: trajectory {traj:.3} >= location {loc:.3} - 0.01; {} dbscan x trajectory cells reported N/A",
            na_cells.len()
        ),
    );
}

#[test]
fn criterion_11_od_sensitivity() {
    let run = pinned_run();
    let rows = od_sensitivity(&run.cells);
    let gap = |det: DetectorKind, privacy: PrivacySpec| -> f64 {
        rows.iter()
            .find(|r| r.detector == det && r.privacy == privacy && r.c_m == 300.0 && r.q == 0.5)
            .unwrap_or_else(|| panic!("missing od-sensitivity row for {det:?} {privacy:?}"))
            .gap
    };
    let dbscan_none = gap(DetectorKind::Dbscan, PrivacySpec::None);
    let dbscan_01 = gap(DetectorKind::Dbscan, PrivacySpec::Location(0.1));
    let seq_none = gap(DetectorKind::Seq, PrivacySpec::None);

    assert!(
        dbscan_none >= 0.02,
        "dbscan shifted-vs-same no-privacy gap {dbscan_none:.3} below 0.02"
    );
    assert!(
        dbscan_01.abs() < dbscan_none.abs(),
        "gap did not shrink under eps=0.1: |{dbscan_01:.3}| >= |{dbscan_none:.3}|"
    );
    assert!(
        seq_none <= dbscan_none,
        "seq no-privacy gap {seq_none:.3} exceeds dbscan gap {dbscan_none:.3}"
    );
    pass(
        "criterion 11 (OD sensitivity)",
        &format!(
            "dbscan gap none {dbscan_none:+.3} -> eps=0.1 {dbscan_01:+.3} (shrinks); seq gap {seq_none:+.3} <= dbscan"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 12: the quadratic scalability wall is explicit and measurable.
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_scalability_artifact() {
    // Part 1: the CLI refuses over-budget pairwise work with exit code 3.
    let bin = env!("CARGO_BIN_EXE_privtraj");
    let dir = temp_dir("pair-budget");
    let corpus = dir.join("corpus.csv");
    run_ok(Command::new(bin).args([
        "synth",
        "--out",
        corpus.to_str().unwrap(),
        "--n-trips",
        "150",
        "--n-od-pairs",
        "1",
        "--seed",
        "7",
    ]));
    let atk = dir.join("atk");
    run_ok(Command::new(bin).args([
        "attack",
        "--input",
        corpus.to_str().unwrap(),
        "--out",
        atk.to_str().unwrap(),
        "--fraction",
        "0.5",
        "--seed",
        "7",
    ]));
    let status = Command::new(bin)
        .args([
            "detect",
            "--input",
            atk.join("attacked.csv").to_str().unwrap(),
            "--split",
            atk.join("split.csv").to_str().unwrap(),
            "--manifest",
            atk.join("manifest.csv").to_str().unwrap(),
            "--detector",
            "dbscan",
            "--out",
            dir.join("scores.csv").to_str().unwrap(),
            "--max-pairs",
            "1000",
        ])
        .output()
        .expect("detect runs");
    assert_eq!(
        status.status.code(),
        Some(3),
        "over-budget detect must exit 3, stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );

    // Part 2: measured wall time grows at least 3.5x per corpus doubling.
    // Wait for the shared pinned grid first and hold the heavy-work lock, so
    // the measurement never overlaps the other compute-bound tests; slow
    // trips make the quadratic pair cost dominate fixed overheads, and each
    // size takes the best of two passes after a warm-up.
    let _ = pinned_run();
    let _guard = heavy_lock().lock().unwrap();
    let corpus = synth_corpus(&SynthParams {
        n_trips: 1000,
        n_od_pairs: 4,
        speed_mps: 2.5,
        seed: 20_240_812,
        ..Default::default()
    })
    .unwrap();
    let tracks: Vec<PlanarTrack> = corpus
        .trajectories
        .iter()
        .map(|t| corpus.planar_track(t))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let time_for = |n: usize| -> f64 {
        let subset = &tracks[..n];
        pool.install(|| {
            let _ = pairwise_matrix(&subset[..n / 5], u64::MAX).unwrap();
            let mut best = f64::INFINITY;
            for _ in 0..2 {
                let started = Instant::now();
                let matrix = pairwise_matrix(subset, u64::MAX).unwrap();
                let assignment = dbscan(
                    &matrix,
                    &DbscanParams {
                        eps_m: 150.0,
                        min_pts: 3,
                        score_k: 3,
                    },
                );
                assert!(assignment.labels.len() == n);
                best = best.min(started.elapsed().as_secs_f64());
            }
            best
        })
    };
    let t250 = time_for(250);
    let t500 = time_for(500);
    let t1000 = time_for(1000);
    let r1 = t500 / t250;
    let r2 = t1000 / t500;
    assert!(
        r1 >= 3.5,
        "500/250 wall-time ratio {r1:.2} below 3.5 (t250={t250:.4}s t500={t500:.4}s)"
    );
    assert!(
        r2 >= 3.5,
        "1000/500 wall-time ratio {r2:.2} below 3.5 (t500={t500:.4}s t1000={t1000:.4}s)"
    );
    pass(
        "criterion 12 (scalability artifact)",
        &format!(
            "budget refusal exits 3; wall time {t250:.3}s -> {t500:.3}s -> {t1000:.3}s (ratios {r1:.1}x, {r2:.1}x >= 3.5x)"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 13: experiment determinism.
// ---------------------------------------------------------------------------

#[test]
fn criterion_13_experiment_determinism() {
    // Serialize against the wall-clock measurement of criterion 12: the two
    // subprocess runs here are compute-heavy.
    let _ = pinned_run();
    let _guard = heavy_lock().lock().unwrap();
    let bin = env!("CARGO_BIN_EXE_privtraj");
    let dir = temp_dir("determinism");
    let config_path = dir.join("config.json");
    let config = serde_json::json!({
        "seed": 20240813u64,
        "out_dir": dir.join("run-a").to_str().unwrap(),
        "corpus": {
            "source": "synth",
            "synth": { "n_trips": 500, "n_od_pairs": 12 }
        },
        "grid": {
            "privacy": [
                "None",
                { "Location": 0.1 },
                { "Trajectory": 0.1 }
            ],
            "intents": [[300.0, 0.5]],
            "attack_fraction": 0.5,
            "seq": { "epochs": 6, "hidden_dim": 16 }
        }
    });
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let run = |out: &Path| {
        run_ok(Command::new(bin).args([
            "experiment",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
        std::fs::read(out.join("results.csv")).expect("results.csv written")
    };
    let a = run(&dir.join("run-a"));
    let b = run(&dir.join("run-b"));
    assert!(!a.is_empty());
    assert_eq!(a, b, "results.csv differs between identical runs");

    // The rendered summary carries the headline detector comparison row.
    let summary = std::fs::read_to_string(dir.join("run-a").join("summary.md")).unwrap();
    assert!(
        summary.contains("AUC(dbscan, eps=0.1 location) < AUC(seq, eps=0.1 location)"),
        "summary.md must state the dbscan-vs-seq comparison at eps=0.1"
    );
    pass(
        "criterion 13 (experiment determinism)",
        &format!(
            "two runs of the pinned config produced byte-identical results.csv ({} bytes)",
            a.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Helpers.
// ---------------------------------------------------------------------------

fn heavy_lock() -> &'static std::sync::Mutex<()> {
    static LOCK: OnceLock<std::sync::Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| std::sync::Mutex::new(()))
}

fn temp_dir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "privtraj-acceptance-{}-{label}",
        std::process::id()
    ));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().expect("command runs");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
