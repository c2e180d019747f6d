//! Implementations of the CLI subcommands. Every stage reads and writes the
//! shared CSV schemas, so stages compose through file handoff.

use std::path::{Path, PathBuf};

use privtraj_core::attack::{self, MaliciousIntent, OdMode};
use privtraj_core::eval::{self, DetectorKind};
use privtraj_core::porto;
use privtraj_core::privacy::{self, PerturbationReport, PrivacyConfig, PrivacyMode};
use privtraj_core::seq;
use privtraj_core::synth::{self, SynthParams};
use privtraj_core::trajectory::{self, Corpus, Label, PlanarTrack, Trajectory};
use privtraj_core::{dbscan, Error, Result};

use crate::config::RunConfig;
use crate::report;

/// Stage files are corpora this tool wrote earlier: every row is already
/// filtered, so only the two-point floor applies on reload.
pub fn load_stage_corpus(path: &Path) -> Result<Corpus> {
    let (corpus, stats) = porto::ingest_porto(path, 1)?;
    if stats.malformed > 0 {
        eprintln!(
            "warning: {} malformed rows skipped in {}",
            stats.malformed,
            path.display()
        );
    }
    Ok(corpus)
}

pub fn cmd_synth(params: &SynthParams, out: &Path, cell_side_m: f64) -> Result<()> {
    let corpus = synth::synth_corpus(params)?;
    porto::write_porto(out, &corpus)?;
    let groups = trajectory::group_by_od(&corpus, cell_side_m);
    println!(
        "synth: {} trips, {} OD groups (cell {cell_side_m} m), bbox [{:.5},{:.5}]x[{:.5},{:.5}] -> {}",
        corpus.trajectories.len(),
        groups.len(),
        corpus.bbox.min_lon,
        corpus.bbox.max_lon,
        corpus.bbox.min_lat,
        corpus.bbox.max_lat,
        out.display()
    );
    Ok(())
}

pub fn cmd_ingest(input: &Path, out: &Path, min_points: usize, cell_side_m: f64) -> Result<()> {
    let (corpus, stats) = porto::ingest_porto(input, min_points)?;
    porto::write_porto(out, &corpus)?;
    let groups = trajectory::group_by_od(&corpus, cell_side_m);
    println!(
        "ingest: read {} rows, kept {} ({} missing-data, {} short, {} malformed), \
         {} OD groups -> {}",
        stats.rows_read,
        stats.kept,
        stats.dropped_missing_data,
        stats.dropped_short,
        stats.malformed,
        groups.len(),
        out.display()
    );
    Ok(())
}

pub struct PerturbArgs {
    pub privacy: String,
    pub epsilon: Option<f64>,
    pub threshold_factor: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

pub fn privacy_config(args: &PerturbArgs) -> Result<PrivacyConfig> {
    let mode = match args.privacy.as_str() {
        "none" => PrivacyMode::None,
        "location" => PrivacyMode::LocationBased,
        "trajectory" => PrivacyMode::TrajectoryBased,
        other => return Err(Error::invalid(format!("unknown privacy mode {other:?}"))),
    };
    if mode == PrivacyMode::None {
        return Ok(PrivacyConfig::none(args.seed));
    }
    let epsilon = args
        .epsilon
        .ok_or_else(|| Error::invalid("--epsilon is required unless --privacy none"))?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid("--epsilon must be positive"));
    }
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(Error::invalid("--test-fraction must lie in (0, 1)"));
    }
    let cfg = PrivacyConfig {
        mode,
        epsilon,
        predictive: privacy::PredictiveParams {
            threshold_l: args.threshold_factor / epsilon,
            test_fraction: args.test_fraction,
        },
        seed: args.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_perturb(input: &Path, out: &Path, args: &PerturbArgs) -> Result<()> {
    let corpus = load_stage_corpus(input)?;
    let cfg = privacy_config(args)?;
    let (perturbed, reports) = privacy::perturb_corpus(&corpus, &cfg);
    porto::write_porto(out, &perturbed)?;
    let report_path = out.with_extension("report.csv");
    write_perturbation_report(&report_path, &reports, &cfg)?;
    let predicted: usize = reports.iter().map(|r| r.n_predicted).sum();
    let points: usize = reports.iter().map(|r| r.n_points).sum();
    println!(
        "perturb[{}]: {} trips, {} points, {} reported as prediction -> {} (+ {})",
        cfg.mode_tag(),
        perturbed.trajectories.len(),
        points,
        predicted,
        out.display(),
        report_path.display()
    );
    Ok(())
}

fn write_perturbation_report(
    path: &Path,
    reports: &[PerturbationReport],
    cfg: &PrivacyConfig,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["trip_id", "n_points", "n_predicted", "epsilon_mode"])
        .map_err(|e| Error::csv(path, e))?;
    for r in reports {
        w.write_record([
            r.trip_id.as_str(),
            &r.n_points.to_string(),
            &r.n_predicted.to_string(),
            &cfg.mode_tag(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub struct AttackArgs {
    pub c_m: f64,
    pub q: f64,
    pub od: OdMode,
    pub fraction: f64,
    pub per_group: usize,
    pub cell_side_m: f64,
    pub seed: u64,
}

pub fn cmd_attack(input: &Path, out_dir: &Path, args: &AttackArgs) -> Result<()> {
    let corpus = load_stage_corpus(input)?;
    let intent = MaliciousIntent::new(args.c_m, args.q, args.od)?;
    let groups = trajectory::group_by_od(&corpus, args.cell_side_m);
    let (train_ids, test_ids) = trajectory::split_test(&groups, args.per_group, args.seed);
    let injection = attack::inject_attacks(&corpus, &test_ids, &intent, args.fraction, args.seed)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut attacked = corpus.clone();
    attacked
        .trajectories
        .extend(injection.malicious.iter().cloned());
    porto::write_porto(&out_dir.join("attacked.csv"), &attacked)?;
    attack::write_manifest(&out_dir.join("manifest.csv"), &injection.manifest)?;
    write_split(
        &out_dir.join("split.csv"),
        &train_ids,
        &test_ids,
        &injection.malicious,
    )?;

    println!(
        "attack[c={} q={} od={}]: {} malicious trips injected ({} skipped as too short), \
         {} train / {} test -> {}",
        args.c_m,
        args.q,
        args.od.tag(),
        injection.manifest.len(),
        injection.skipped,
        train_ids.len(),
        test_ids.len() + injection.manifest.len(),
        out_dir.display()
    );
    Ok(())
}

fn write_split(
    path: &Path,
    train: &[String],
    test: &[String],
    malicious: &[Trajectory],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["trip_id", "role"])
        .map_err(|e| Error::csv(path, e))?;
    for id in train {
        w.write_record([id.as_str(), "train"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for id in test {
        w.write_record([id.as_str(), "test"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for t in malicious {
        w.write_record([t.id.as_str(), "test"])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_split(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let r = record.map_err(|e| Error::csv(path, e))?;
        let id = r.get(0).unwrap_or_default().to_string();
        match r.get(1) {
            Some("train") => train.push(id),
            Some("test") => test.push(id),
            other => {
                return Err(Error::csv(path, format!("unknown split role {other:?}")));
            }
        }
    }
    Ok((train, test))
}

pub struct DetectArgs {
    pub detector: DetectorKind,
    pub cell_side_m: f64,
    pub min_pts: usize,
    pub max_pairs: u64,
    pub seq: seq::SeqModelConfig,
    pub model_in: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub seed: u64,
}

pub fn cmd_detect(
    input: &Path,
    split_path: &Path,
    manifest_path: &Path,
    out: &Path,
    args: &DetectArgs,
) -> Result<()> {
    let mut corpus = load_stage_corpus(input)?;
    let (train_ids, test_ids) = read_split(split_path)?;
    let manifest = attack::read_manifest(manifest_path)?;
    let malicious_ids: std::collections::HashSet<&str> =
        manifest.iter().map(|m| m.trip_id.as_str()).collect();
    for t in &mut corpus.trajectories {
        if malicious_ids.contains(t.id.as_str()) {
            t.label = Label::Malicious;
        }
    }

    let bounds = corpus.planar_bounds();
    let pick = |ids: &[String]| -> Vec<PlanarTrack> {
        let wanted: std::collections::HashSet<&String> = ids.iter().collect();
        corpus
            .trajectories
            .iter()
            .filter(|t| wanted.contains(&t.id))
            .map(|t| corpus.planar_track(t))
            .collect()
    };
    let train_tracks = pick(&train_ids);
    let test_tracks = pick(&test_ids);

    let scores: Vec<(String, f64)> = match args.detector {
        DetectorKind::Dbscan => {
            let out = dbscan::detect(
                &train_tracks,
                &test_tracks,
                &bounds,
                args.cell_side_m,
                args.min_pts,
                args.max_pairs,
            )?;
            if out.sentinel_count > 0 {
                eprintln!(
                    "warning: {} test trips scored by the isolation sentinel",
                    out.sentinel_count
                );
            }
            out.scores
                .into_iter()
                .map(|s| (s.trip_id, s.score_m))
                .collect()
        }
        DetectorKind::Seq => {
            let model = match &args.model_in {
                Some(path) => seq::load_checkpoint(path)?,
                None => {
                    let mut cfg = args.seq;
                    cfg.seed = args.seed;
                    let (model, report) = seq::train(&train_tracks, &bounds, &cfg)?;
                    println!(
                        "seq: trained {} params for {} epochs, final loss {:.6}",
                        report.param_count,
                        report.per_epoch_loss.len(),
                        report.per_epoch_loss.last().copied().unwrap_or(f64::NAN)
                    );
                    model
                }
            };
            if let Some(path) = &args.model_out {
                seq::save_checkpoint(path, &model)?;
            }
            seq::detect(&model, &test_tracks, &bounds)?
        }
    };

    let rows = eval::score_rows_with_od(&corpus, args.cell_side_m, &scores);
    eval::write_scores_csv(out, &rows)?;
    println!(
        "detect[{}]: scored {} test trips -> {}",
        args.detector.tag(),
        rows.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_experiment(cfg: &RunConfig) -> Result<()> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let corpus = cfg.build_corpus()?;
    let outcome = eval::run_grid(&corpus, &cfg.grid)?;

    eval::write_results_csv(&out_dir.join("results.csv"), &outcome.cells)?;
    eval::write_timings_csv(&out_dir.join("timings.csv"), &outcome.cells)?;
    eval::write_roc_csvs(&out_dir, &outcome)?;
    report::write_meta(
        &out_dir.join("meta.csv"),
        &[
            ("n_train", outcome.n_train.to_string()),
            ("n_test", outcome.n_test.to_string()),
            ("n_groups", outcome.n_groups.to_string()),
            ("seed", cfg.seed.to_string()),
        ],
    )?;
    let resolved = serde_json::to_string_pretty(cfg).expect("config serializes");
    let cfg_path = out_dir.join("resolved_config.json");
    std::fs::write(&cfg_path, resolved).map_err(|e| Error::io(&cfg_path, e))?;

    report::render_all(&out_dir, &out_dir)?;

    let ok = outcome
        .cells
        .iter()
        .filter(|c| c.status == eval::CellStatus::Ok)
        .count();
    let na = outcome
        .cells
        .iter()
        .filter(|c| c.status == eval::CellStatus::NotApplicable)
        .count();
    let failed = outcome.cells.len() - ok - na;
    println!(
        "experiment: {} cells ({} ok, {} not applicable, {} failed) -> {}",
        outcome.cells.len(),
        ok,
        na,
        failed,
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_report(results_dir: &Path, out_dir: Option<&Path>) -> Result<()> {
    let out = out_dir.unwrap_or(results_dir);
    report::render_all(results_dir, out)?;
    println!(
        "report: rendered summary.md and plots/ -> {}",
        out.display()
    );
    Ok(())
}
