//! ROC/AUC scoring and the full experiment grid: privacy mode x epsilon x
//! malicious intent x OD mode x detector.
//!
//! Pipeline order per cell: the adversary fabricates malicious test trips
//! first, then the privacy layer obfuscates everything the detector will see
//! (training normals and the attacked test set alike), then the detector
//! scores and the ROC is computed against the attack manifest. Cells derive
//! independent sub-seeds, so the table is reproducible under any parallelism.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attack::{inject_attacks, MaliciousIntent, ManifestRow, OdMode};
use crate::dbscan;
use crate::error::Error;
use crate::privacy::{perturb_corpus, PredictiveParams, PrivacyConfig, PrivacyMode};
use crate::seq;
use crate::trajectory::{
    group_by_od, od_key, split_test, Corpus, Label, ODKey, PlanarTrack, Trajectory,
};
use crate::Result;

/// One scored trip joined with its ground truth; only score ordering matters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrip {
    pub trip_id: String,
    pub truth: Label,
    pub score: f64,
}

/// ROC curve points plus the trapezoidal AUC.
#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Threshold sweep over unique scores, descending, with tied scores moving
/// together; AUC by trapezoid. Errors on single-class input.
pub fn roc(scored: &[ScoredTrip]) -> Result<RocResult> {
    let n_pos = scored
        .iter()
        .filter(|s| s.truth == Label::Malicious)
        .count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass { n_pos, n_neg });
    }

    let mut order: Vec<&ScoredTrip> = scored.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = Vec::with_capacity(scored.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = order[i].score;
        while i < order.len() && order[i].score == score {
            match order[i].truth {
                Label::Malicious => tp += 1,
                Label::Normal => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }

    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0;
    }
    Ok(RocResult {
        points,
        auc,
        n_pos,
        n_neg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorKind {
    Dbscan,
    Seq,
}

impl DetectorKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DetectorKind::Dbscan => "dbscan",
            DetectorKind::Seq => "seq",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dbscan" => Ok(DetectorKind::Dbscan),
            "seq" => Ok(DetectorKind::Seq),
            other => Err(Error::invalid(format!("unknown detector {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PrivacySpec {
    None,
    Location(f64),
    Trajectory(f64),
}

impl PrivacySpec {
    pub fn tag(&self) -> String {
        match self {
            PrivacySpec::None => "none".to_string(),
            PrivacySpec::Location(e) => format!("loc-{e}"),
            PrivacySpec::Trajectory(e) => format!("traj-{e}"),
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            PrivacySpec::None => None,
            PrivacySpec::Location(e) | PrivacySpec::Trajectory(e) => Some(*e),
        }
    }

    fn to_config(self, grid: &GridConfig) -> PrivacyConfig {
        let seed = crate::seeds::sub_seed(grid.seed, &["perturb", &self.tag()]);
        match self {
            PrivacySpec::None => PrivacyConfig::none(seed),
            PrivacySpec::Location(e) => PrivacyConfig::location(e, seed),
            PrivacySpec::Trajectory(e) => PrivacyConfig {
                mode: PrivacyMode::TrajectoryBased,
                epsilon: e,
                predictive: PredictiveParams {
                    threshold_l: grid.predictive_threshold_factor / e,
                    test_fraction: grid.predictive_test_fraction,
                },
                seed,
            },
        }
    }
}

/// Everything needed to run the experiment grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub detectors: Vec<DetectorKind>,
    pub privacy: Vec<PrivacySpec>,
    /// Malicious intents as (c meters, q fraction).
    pub intents: Vec<(f64, f64)>,
    pub od_modes: Vec<OdMode>,
    pub seed: u64,
    pub per_group: usize,
    pub cell_side_m: f64,
    pub attack_fraction: f64,
    pub min_pts_candidates: Vec<usize>,
    pub max_pairs: u64,
    pub seq: seq::SeqModelConfig,
    pub predictive_test_fraction: f64,
    /// `threshold_l = factor / epsilon`.
    pub predictive_threshold_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            detectors: vec![DetectorKind::Dbscan, DetectorKind::Seq],
            privacy: vec![
                PrivacySpec::None,
                PrivacySpec::Location(0.1),
                PrivacySpec::Location(0.01),
                PrivacySpec::Trajectory(0.1),
                PrivacySpec::Trajectory(0.01),
            ],
            intents: vec![(300.0, 0.5), (500.0, 0.7), (700.0, 1.0)],
            od_modes: vec![OdMode::SameOd, OdMode::ShiftedOd],
            seed: 42,
            per_group: 5,
            cell_side_m: crate::trajectory::DEFAULT_CELL_SIDE_M,
            attack_fraction: 0.3,
            min_pts_candidates: vec![2, 3, 4, 5],
            max_pairs: 20_000_000,
            seq: seq::SeqModelConfig::default(),
            predictive_test_fraction: 0.1,
            predictive_threshold_factor: 2.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() || self.privacy.is_empty() || self.intents.is_empty() {
            return Err(Error::invalid(
                "grid needs detectors, privacy modes and intents",
            ));
        }
        if self.od_modes.is_empty() {
            return Err(Error::invalid("grid needs at least one od mode"));
        }
        if self.per_group == 0 {
            return Err(Error::invalid("per_group must be at least 1"));
        }
        if !(self.cell_side_m > 0.0) {
            return Err(Error::invalid("cell_side_m must be positive"));
        }
        if !(self.attack_fraction > 0.0 && self.attack_fraction <= 1.0) {
            return Err(Error::invalid("attack_fraction must lie in (0, 1]"));
        }
        if self.min_pts_candidates.is_empty()
            || self
                .min_pts_candidates
                .iter()
                .any(|&m| !(2..=10).contains(&m))
        {
            return Err(Error::invalid("min_pts candidates must lie in 2..=10"));
        }
        for (c, q) in &self.intents {
            MaliciousIntent::new(*c, *q, OdMode::SameOd)?;
        }
        if !(self.predictive_test_fraction > 0.0 && self.predictive_test_fraction < 1.0) {
            return Err(Error::invalid(
                "predictive_test_fraction must lie in (0, 1)",
            ));
        }
        self.seq.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    NotApplicable,
    Failed(String),
}

impl CellStatus {
    pub fn tag(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NotApplicable => "not_applicable",
            CellStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell_id: String,
    pub detector: DetectorKind,
    pub privacy: PrivacySpec,
    pub c_m: f64,
    pub q: f64,
    pub od_mode: OdMode,
    pub status: CellStatus,
    pub auc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Chosen dbscan min_pts (calibrated per cell).
    pub min_pts: Option<usize>,
    pub sentinel_count: usize,
    /// Wall time of the detector stage; reported in the timing sidecar, never
    /// in the deterministic results table.
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GridOutcome {
    pub cells: Vec<CellResult>,
    pub roc_points: BTreeMap<String, Vec<(f64, f64)>>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_groups: usize,
}

pub fn cell_id(detector: DetectorKind, privacy: PrivacySpec, c: f64, q: f64, od: OdMode) -> String {
    format!(
        "{}_{}_{}_c{:.0}_q{:.0}",
        detector.tag(),
        privacy.tag(),
        od.tag(),
        c,
        q * 100.0
    )
}

/// Calibrate dbscan's min_pts by AUC on a deterministic half of the scored
/// trips (mirroring the per-noise-level manual selection the clustering
/// detector needs), then return the chosen candidate's full scored set.
fn choose_min_pts(
    candidates: &[usize],
    outputs: &[dbscan::DetectOutput],
    labels: &BTreeMap<String, Label>,
) -> (usize, usize, Vec<ScoredTrip>) {
    let to_scored = |out: &dbscan::DetectOutput| -> Vec<ScoredTrip> {
        out.scores
            .iter()
            .map(|s| ScoredTrip {
                trip_id: s.trip_id.clone(),
                truth: labels[&s.trip_id],
                score: s.score_m,
            })
            .collect()
    };
    let mut best: Option<(f64, usize)> = None;
    for (slot, _) in candidates.iter().enumerate() {
        let scored = to_scored(&outputs[slot]);
        let calibration: Vec<ScoredTrip> = scored.iter().step_by(2).cloned().collect();
        let auc = roc(&calibration)
            .or_else(|_| roc(&scored))
            .map(|r| r.auc)
            .unwrap_or(0.5);
        if best.map(|(b, _)| auc > b).unwrap_or(true) {
            best = Some((auc, slot));
        }
    }
    let slot = best.expect("at least one candidate").1;
    (slot, candidates[slot], to_scored(&outputs[slot]))
}

/// Run every cell of the grid over a labeled corpus of normal trips.
pub fn run_grid(corpus: &Corpus, grid: &GridConfig) -> Result<GridOutcome> {
    grid.validate()?;
    let bounds = corpus.planar_bounds();
    let groups = group_by_od(corpus, grid.cell_side_m);
    let (train_ids, test_ids) = split_test(&groups, grid.per_group, grid.seed);
    let train_set: std::collections::HashSet<&String> = train_ids.iter().collect();

    let train_trips: Vec<Trajectory> = corpus
        .trajectories
        .iter()
        .filter(|t| train_set.contains(&t.id) && t.label == Label::Normal)
        .cloned()
        .collect();
    let train_corpus = Corpus {
        trajectories: train_trips,
        bbox: corpus.bbox,
        origin: corpus.origin,
    };

    // Fabricated test sets per (intent, od): originals plus malicious.
    let mut attacked: BTreeMap<String, (Vec<Trajectory>, Vec<ManifestRow>)> = BTreeMap::new();
    for &(c, q) in &grid.intents {
        for &od in &grid.od_modes {
            let intent = MaliciousIntent::new(c, q, od)?;
            let seed =
                crate::seeds::sub_seed(grid.seed, &["attack", &format!("{c}-{q}-{}", od.tag())]);
            let injection = inject_attacks(corpus, &test_ids, &intent, grid.attack_fraction, seed)?;
            let mut test_trips: Vec<Trajectory> = corpus
                .trajectories
                .iter()
                .filter(|t| test_ids.binary_search(&t.id).is_ok())
                .cloned()
                .collect();
            test_trips.extend(injection.malicious);
            attacked.insert(attack_key(c, q, od), (test_trips, injection.manifest));
        }
    }

    // Perturbed training tracks and (lazily) a trained sequence model per
    // privacy spec. Training happens once per spec, not once per cell.
    let needs_seq = grid.detectors.contains(&DetectorKind::Seq);
    let mut train_tracks: BTreeMap<String, Vec<PlanarTrack>> = BTreeMap::new();
    let mut models: BTreeMap<String, seq::SeqModel> = BTreeMap::new();
    for &privacy in &grid.privacy {
        let cfg = privacy.to_config(grid);
        let (perturbed, _) = perturb_corpus(&train_corpus, &cfg);
        let tracks: Vec<PlanarTrack> = perturbed
            .trajectories
            .iter()
            .map(|t| perturbed.planar_track(t))
            .collect();
        if needs_seq {
            let mut seq_cfg = grid.seq;
            seq_cfg.seed = crate::seeds::sub_seed(grid.seed, &["seq-train", &privacy.tag()]);
            let (model, _report) = seq::train(&tracks, &bounds, &seq_cfg)?;
            models.insert(privacy.tag(), model);
        }
        train_tracks.insert(privacy.tag(), tracks);
    }

    let mut outcome = GridOutcome {
        cells: Vec::new(),
        roc_points: BTreeMap::new(),
        n_train: train_corpus.trajectories.len(),
        n_test: test_ids.len(),
        n_groups: groups.len(),
    };

    // Cells are independent jobs; run them on the worker pool and assemble
    // results in enumeration order so the table never depends on scheduling.
    let mut coords = Vec::new();
    for &detector in &grid.detectors {
        for &privacy in &grid.privacy {
            for &(c, q) in &grid.intents {
                for &od in &grid.od_modes {
                    coords.push((detector, privacy, c, q, od));
                }
            }
        }
    }
    use rayon::prelude::*;
    let results: Vec<(CellResult, Option<Vec<(f64, f64)>>)> = coords
        .par_iter()
        .map(|&(detector, privacy, c, q, od)| {
            run_cell(
                corpus,
                grid,
                &bounds,
                &attacked,
                &train_tracks,
                &models,
                detector,
                privacy,
                c,
                q,
                od,
            )
        })
        .collect();
    for (cell, points) in results {
        if let Some(points) = points {
            outcome.roc_points.insert(cell.cell_id.clone(), points);
        }
        outcome.cells.push(cell);
    }
    Ok(outcome)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    corpus: &Corpus,
    grid: &GridConfig,
    bounds: &crate::trajectory::PlanarBounds,
    attacked: &BTreeMap<String, (Vec<Trajectory>, Vec<ManifestRow>)>,
    train_tracks: &BTreeMap<String, Vec<PlanarTrack>>,
    models: &BTreeMap<String, seq::SeqModel>,
    detector: DetectorKind,
    privacy: PrivacySpec,
    c: f64,
    q: f64,
    od: OdMode,
) -> (CellResult, Option<Vec<(f64, f64)>>) {
    let id = cell_id(detector, privacy, c, q, od);
    let mut cell = CellResult {
        cell_id: id,
        detector,
        privacy,
        c_m: c,
        q,
        od_mode: od,
        status: CellStatus::Ok,
        auc: None,
        n_pos: 0,
        n_neg: 0,
        min_pts: None,
        sentinel_count: 0,
        runtime_s: 0.0,
    };

    // Clustering needs complete trajectories up front, which a sequential
    // reporting mechanism never yields.
    if detector == DetectorKind::Dbscan && matches!(privacy, PrivacySpec::Trajectory(_)) {
        cell.status = CellStatus::NotApplicable;
        return (cell, None);
    }

    let started = Instant::now();
    let (test_trips, manifest) = &attacked[&attack_key(c, q, od)];
    let cfg = privacy.to_config(grid);
    let test_corpus = Corpus {
        trajectories: test_trips.clone(),
        bbox: corpus.bbox,
        origin: corpus.origin,
    };
    let (test_perturbed, _) = perturb_corpus(&test_corpus, &cfg);
    let labels: BTreeMap<String, Label> = test_perturbed
        .trajectories
        .iter()
        .map(|t| (t.id.clone(), t.label))
        .collect();
    let test_tracks: Vec<PlanarTrack> = test_perturbed
        .trajectories
        .iter()
        .map(|t| test_perturbed.planar_track(t))
        .collect();

    let scored = match detector {
        DetectorKind::Dbscan => dbscan::detect_multi(
            &train_tracks[&privacy.tag()],
            &test_tracks,
            bounds,
            grid.cell_side_m,
            &grid.min_pts_candidates,
            grid.max_pairs,
        )
        .map(|outputs| {
            let (slot, min_pts, scored) =
                choose_min_pts(&grid.min_pts_candidates, &outputs, &labels);
            cell.min_pts = Some(min_pts);
            cell.sentinel_count = outputs[slot].sentinel_count;
            scored
        }),
        DetectorKind::Seq => {
            seq::detect(&models[&privacy.tag()], &test_tracks, bounds).map(|scores| {
                scores
                    .into_iter()
                    .map(|(trip_id, score)| ScoredTrip {
                        truth: labels[&trip_id],
                        trip_id,
                        score,
                    })
                    .collect::<Vec<_>>()
            })
        }
    };

    let mut points = None;
    match scored.and_then(|s| roc(&s)) {
        Ok(r) => {
            debug_assert_eq!(r.n_pos, manifest.len());
            cell.auc = Some(r.auc);
            cell.n_pos = r.n_pos;
            cell.n_neg = r.n_neg;
            points = Some(r.points);
        }
        Err(e) => cell.status = CellStatus::Failed(e.to_string()),
    }
    cell.runtime_s = started.elapsed().as_secs_f64();
    (cell, points)
}

fn attack_key(c: f64, q: f64, od: OdMode) -> String {
    format!("c{c}-q{q}-{}", od.tag())
}

/// Shifted-minus-same AUC per (detector, privacy, intent).
#[derive(Debug, Clone, PartialEq)]
pub struct OdSensitivityRow {
    pub detector: DetectorKind,
    pub privacy: PrivacySpec,
    pub c_m: f64,
    pub q: f64,
    pub auc_same: f64,
    pub auc_shifted: f64,
    pub gap: f64,
}

pub fn od_sensitivity(cells: &[CellResult]) -> Vec<OdSensitivityRow> {
    let mut rows = Vec::new();
    for cell in cells {
        if cell.od_mode != OdMode::SameOd {
            continue;
        }
        let Some(auc_same) = cell.auc else { continue };
        let twin = cells.iter().find(|c| {
            c.detector == cell.detector
                && c.privacy == cell.privacy
                && c.c_m == cell.c_m
                && c.q == cell.q
                && c.od_mode == OdMode::ShiftedOd
        });
        let Some(auc_shifted) = twin.and_then(|c| c.auc) else {
            continue;
        };
        rows.push(OdSensitivityRow {
            detector: cell.detector,
            privacy: cell.privacy,
            c_m: cell.c_m,
            q: cell.q,
            auc_same,
            auc_shifted,
            gap: auc_shifted - auc_same,
        });
    }
    rows
}

/// Deterministic results table (no wall-clock columns).
pub fn write_results_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut sorted: Vec<&CellResult> = cells.iter().collect();
    sorted.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "cell_id",
        "detector",
        "privacy",
        "epsilon",
        "c_m",
        "q",
        "od_mode",
        "status",
        "auc",
        "n_pos",
        "n_neg",
        "min_pts",
        "sentinels",
        "note",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for cell in sorted {
        let note = match &cell.status {
            CellStatus::Failed(msg) => msg.clone(),
            _ => String::new(),
        };
        w.write_record([
            cell.cell_id.as_str(),
            cell.detector.tag(),
            &cell.privacy.tag(),
            &cell
                .privacy
                .epsilon()
                .map(|e| e.to_string())
                .unwrap_or_default(),
            &format!("{:.0}", cell.c_m),
            &cell.q.to_string(),
            cell.od_mode.tag(),
            cell.status.tag(),
            &cell.auc.map(|a| format!("{a:.6}")).unwrap_or_default(),
            &cell.n_pos.to_string(),
            &cell.n_neg.to_string(),
            &cell.min_pts.map(|m| m.to_string()).unwrap_or_default(),
            &cell.sentinel_count.to_string(),
            &note,
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Wall-clock sidecar, one row per cell. Deliberately a separate file: the
/// results table must be byte-identical across reruns.
pub fn write_timings_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut sorted: Vec<&CellResult> = cells.iter().collect();
    sorted.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["cell_id", "runtime_s"])
        .map_err(|e| Error::csv(path, e))?;
    for cell in sorted {
        w.write_record([cell.cell_id.as_str(), &format!("{:.3}", cell.runtime_s)])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Per-cell ROC point files under `dir/roc/`.
pub fn write_roc_csvs(dir: &Path, outcome: &GridOutcome) -> Result<()> {
    let roc_dir = dir.join("roc");
    std::fs::create_dir_all(&roc_dir).map_err(|e| Error::io(&roc_dir, e))?;
    for (cell, points) in &outcome.roc_points {
        let path = roc_dir.join(format!("{cell}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(["fpr", "tpr"])
            .map_err(|e| Error::csv(&path, e))?;
        for (fpr, tpr) in points {
            w.write_record([format!("{fpr:.6}"), format!("{tpr:.6}")])
                .map_err(|e| Error::csv(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Scores CSV shared by both detectors: trip_id, od_key, score_m, label.
pub fn write_scores_csv(path: &Path, rows: &[(String, ODKey, f64, Label)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["trip_id", "od_key", "score_m", "label"])
        .map_err(|e| Error::csv(path, e))?;
    for (id, key, score, label) in rows {
        let label = match label {
            Label::Normal => "normal",
            Label::Malicious => "malicious",
        };
        w.write_record([
            id.as_str(),
            &key.to_cell_string(),
            &format!("{score:.6}"),
            label,
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// OD key of every test trip for score reporting.
pub fn score_rows_with_od(
    corpus: &Corpus,
    cell_side_m: f64,
    scores: &[(String, f64)],
) -> Vec<(String, ODKey, f64, Label)> {
    let bounds = corpus.planar_bounds();
    let by_id: std::collections::HashMap<&str, &Trajectory> = corpus
        .trajectories
        .iter()
        .map(|t| (t.id.as_str(), t))
        .collect();
    scores
        .iter()
        .map(|(id, score)| {
            let t = by_id[id.as_str()];
            let key = od_key(&corpus.planar_track(t), &bounds, cell_side_m);
            (id.clone(), key, *score, t.label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(pairs: &[(f64, Label)]) -> Vec<ScoredTrip> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(score, truth))| ScoredTrip {
                trip_id: format!("t{i}"),
                truth,
                score,
            })
            .collect()
    }

    #[test]
    fn perfect_separation_gives_auc_one() {
        let s = scored(&[
            (10.0, Label::Malicious),
            (9.0, Label::Malicious),
            (1.0, Label::Normal),
            (0.5, Label::Normal),
        ]);
        let r = roc(&s).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn all_tied_scores_give_the_diagonal() {
        let s = scored(&[
            (1.0, Label::Malicious),
            (1.0, Label::Normal),
            (1.0, Label::Malicious),
            (1.0, Label::Normal),
        ]);
        let r = roc(&s).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        let s = scored(&[(1.0, Label::Normal), (2.0, Label::Normal)]);
        assert!(matches!(roc(&s), Err(Error::SingleClass { .. })));
    }

    /// Brute-force pair enumeration: P(pos > neg) + 0.5 P(tie).
    fn mann_whitney(s: &[ScoredTrip]) -> f64 {
        let pos: Vec<f64> = s
            .iter()
            .filter(|t| t.truth == Label::Malicious)
            .map(|t| t.score)
            .collect();
        let neg: Vec<f64> = s
            .iter()
            .filter(|t| t.truth == Label::Normal)
            .map(|t| t.score)
            .collect();
        let mut total = 0.0;
        for p in &pos {
            for n in &neg {
                total += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_equals_mann_whitney_on_random_sets() {
        use rand::Rng;
        let mut rng = crate::seeds::stream(17, &["auc-mw"]);
        for _ in 0..300 {
            let n = rng.random_range(2..40usize);
            let mut set = Vec::new();
            let mut has = (false, false);
            for i in 0..n {
                let truth = if rng.random::<bool>() {
                    Label::Malicious
                } else {
                    Label::Normal
                };
                match truth {
                    Label::Malicious => has.0 = true,
                    Label::Normal => has.1 = true,
                }
                // Coarse grid of scores forces plenty of ties.
                let score = (rng.random_range(0..8) as f64) / 2.0;
                set.push(ScoredTrip {
                    trip_id: format!("t{i}"),
                    truth,
                    score,
                });
            }
            if !(has.0 && has.1) {
                continue;
            }
            let r = roc(&set).unwrap();
            let mw = mann_whitney(&set);
            assert!((r.auc - mw).abs() < 1e-12, "auc {} vs mw {}", r.auc, mw);
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_transforms() {
        let s = scored(&[
            (3.0, Label::Malicious),
            (2.0, Label::Normal),
            (2.0, Label::Malicious),
            (0.5, Label::Normal),
            (7.0, Label::Malicious),
        ]);
        let base = roc(&s).unwrap();
        let transformed: Vec<ScoredTrip> = s
            .iter()
            .map(|t| ScoredTrip {
                score: (t.score * 3.0).exp(),
                ..t.clone()
            })
            .collect();
        let r = roc(&transformed).unwrap();
        assert_eq!(base.auc, r.auc);
        assert_eq!(base.points, r.points);
    }

    #[test]
    fn infinite_sentinels_sort_first() {
        let s = scored(&[
            (f64::INFINITY, Label::Malicious),
            (5.0, Label::Normal),
            (f64::INFINITY, Label::Normal),
            (1.0, Label::Malicious),
        ]);
        let r = roc(&s).unwrap();
        // inf group: 1 pos + 1 neg tie, then 5.0 neg, then 1.0 pos.
        assert_eq!(r.points[1], (0.5, 0.5));
        assert!((r.auc - 0.375).abs() < 1e-12);
    }

    #[test]
    fn mini_grid_runs_and_is_deterministic() {
        let corpus = crate::synth::synth_corpus(&crate::synth::SynthParams {
            n_trips: 160,
            n_od_pairs: 8,
            ..Default::default()
        })
        .unwrap();
        let grid = GridConfig {
            detectors: vec![DetectorKind::Dbscan, DetectorKind::Seq],
            privacy: vec![PrivacySpec::None, PrivacySpec::Trajectory(0.1)],
            intents: vec![(700.0, 1.0)],
            od_modes: vec![OdMode::SameOd],
            attack_fraction: 0.5,
            seq: seq::SeqModelConfig {
                hidden_dim: 8,
                latent_dim: 4,
                epochs: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        let a = run_grid(&corpus, &grid).unwrap();
        assert_eq!(a.cells.len(), 4);
        let na = a
            .cells
            .iter()
            .find(|c| {
                c.detector == DetectorKind::Dbscan
                    && matches!(c.privacy, PrivacySpec::Trajectory(_))
            })
            .unwrap();
        assert_eq!(na.status, CellStatus::NotApplicable);
        let ok_cells: Vec<_> = a
            .cells
            .iter()
            .filter(|c| c.status == CellStatus::Ok)
            .collect();
        assert_eq!(ok_cells.len(), 3);
        for cell in &ok_cells {
            // Label hygiene: positives equal the manifest size.
            assert_eq!(cell.n_pos, (a.n_test as f64 * 0.5).round() as usize);
        }

        let b = run_grid(&corpus, &grid).unwrap();
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            assert_eq!(ca.auc, cb.auc);
            assert_eq!(ca.cell_id, cb.cell_id);
        }
    }

    #[test]
    fn cell_failures_are_recorded_not_fatal() {
        let corpus = crate::synth::synth_corpus(&crate::synth::SynthParams {
            n_trips: 120,
            n_od_pairs: 4,
            ..Default::default()
        })
        .unwrap();
        // A pair budget the clustering cells cannot meet; the sequence
        // detector is unaffected.
        let grid = GridConfig {
            detectors: vec![DetectorKind::Dbscan, DetectorKind::Seq],
            privacy: vec![PrivacySpec::None],
            intents: vec![(700.0, 1.0)],
            od_modes: vec![OdMode::SameOd],
            attack_fraction: 0.5,
            max_pairs: 10,
            seq: seq::SeqModelConfig {
                hidden_dim: 8,
                latent_dim: 4,
                epochs: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let outcome = run_grid(&corpus, &grid).unwrap();
        let dbscan_cell = outcome
            .cells
            .iter()
            .find(|c| c.detector == DetectorKind::Dbscan)
            .unwrap();
        match &dbscan_cell.status {
            CellStatus::Failed(msg) => assert!(msg.contains("budget"), "{msg}"),
            other => panic!("expected failed dbscan cell, got {other:?}"),
        }
        assert!(dbscan_cell.auc.is_none());
        let seq_cell = outcome
            .cells
            .iter()
            .find(|c| c.detector == DetectorKind::Seq)
            .unwrap();
        assert_eq!(seq_cell.status, CellStatus::Ok);
    }

    #[test]
    fn od_sensitivity_pairs_rows() {
        let mk = |od, auc| CellResult {
            cell_id: cell_id(DetectorKind::Dbscan, PrivacySpec::None, 300.0, 0.5, od),
            detector: DetectorKind::Dbscan,
            privacy: PrivacySpec::None,
            c_m: 300.0,
            q: 0.5,
            od_mode: od,
            status: CellStatus::Ok,
            auc: Some(auc),
            n_pos: 10,
            n_neg: 10,
            min_pts: None,
            sentinel_count: 0,
            runtime_s: 0.0,
        };
        let rows = od_sensitivity(&[mk(OdMode::SameOd, 0.75), mk(OdMode::ShiftedOd, 0.82)]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].gap - 0.07).abs() < 1e-12);
    }
}
