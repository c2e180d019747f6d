//! Malicious trip generation: a greedy heuristic for reward inflation under a
//! per-point displacement budget and a feasibility region.
//!
//! The adversary's reward is trip path length (the taximeter/distance-fraud
//! motive). Given malicious intent `(c, q)`, a fraction `q` of the points are
//! displaced by exactly `c` meters perpendicular to the local heading with
//! alternating sign — a zig-zag, the length-maximizing pattern under an
//! independent per-point budget — and the result is clipped to the corpus
//! bounding box. Same-OD attacks keep both endpoints bit-exact; shifted-OD
//! attacks redraw origin and destination uniformly inside the feasibility box.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::Error;
use crate::geo::{project, unproject, GeoPoint, PlanarPoint};
use crate::seeds;
use crate::trajectory::{path_length_m, Corpus, Label, PlanarBounds, Trajectory};
use crate::Result;

/// Whether fabricated trips keep or replace their endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdMode {
    SameOd,
    ShiftedOd,
}

impl OdMode {
    pub fn tag(&self) -> &'static str {
        match self {
            OdMode::SameOd => "same",
            OdMode::ShiftedOd => "shifted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "same" => Ok(OdMode::SameOd),
            "shifted" => Ok(OdMode::ShiftedOd),
            other => Err(Error::invalid(format!("unknown od mode {other:?}"))),
        }
    }
}

/// Attack strength: per-point displacement bound and tampered-point ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaliciousIntent {
    pub c_m: f64,
    pub q: f64,
    pub od_mode: OdMode,
}

impl MaliciousIntent {
    pub fn new(c_m: f64, q: f64, od_mode: OdMode) -> Result<Self> {
        if !(c_m >= 0.0) {
            return Err(Error::invalid("malicious intent c must be non-negative"));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid("malicious intent q must lie in [0, 1]"));
        }
        Ok(MaliciousIntent { c_m, q, od_mode })
    }
}

/// One fabricated trip and what the attack achieved.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub trajectory: Trajectory,
    /// Number of points displaced by the zig-zag (endpoint redraws in shifted
    /// mode are counted separately by the mode itself, not in `m`).
    pub m: usize,
    pub reward_gain_m: f64,
    /// True when bbox clipping reduced some effective displacement.
    pub clipped: bool,
}

/// Evenly spaced interior indices (1..=n-2), at most `interior` of them.
fn select_interior_indices(n: usize, m: usize) -> Vec<usize> {
    let interior = n.saturating_sub(2);
    let m = m.min(interior);
    (0..m)
        .map(|j| 1 + ((j as f64 + 0.5) * interior as f64 / m as f64).floor() as usize)
        .collect()
}

/// Fabricate a malicious counterpart of `t` under `intent`.
///
/// Same-OD attacks need at least three points so the endpoints stay
/// untouched. The tampered count is `round(q * n)`, capped by the number of
/// interior points.
pub fn generate_malicious(
    t: &Trajectory,
    intent: &MaliciousIntent,
    bounds: &PlanarBounds,
    origin: GeoPoint,
    seed: u64,
) -> Result<AttackOutcome> {
    let n = t.points.len();
    if intent.od_mode == OdMode::SameOd && n < 3 {
        return Err(Error::TooShort {
            id: t.id.clone(),
            n,
            min: 3,
        });
    }

    let mut rng = seeds::stream(seed, &["attack", &t.id]);
    let mut planar: Vec<PlanarPoint> = t.points.iter().map(|p| project(*p, origin)).collect();
    let original = planar.clone();

    let m_requested = (intent.q * n as f64).round() as usize;
    let indices = select_interior_indices(n, m_requested);
    let m = indices.len();

    // Alternating perpendicular displacement; the starting sign is randomized
    // per trip so co-located fabrications do not share a phase.
    let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut clipped = false;
    for &i in &indices {
        let heading = PlanarPoint::new(
            original[i + 1].x - original[i - 1].x,
            original[i + 1].y - original[i - 1].y,
        );
        let norm = heading.x.hypot(heading.y);
        let (ux, uy) = if norm > 1e-9 {
            (heading.x / norm, heading.y / norm)
        } else {
            (1.0, 0.0)
        };
        let moved = PlanarPoint::new(
            original[i].x + sign * intent.c_m * (-uy),
            original[i].y + sign * intent.c_m * ux,
        );
        let inside = bounds.clamp(moved);
        if inside != moved {
            clipped = true;
        }
        planar[i] = inside;
        sign = -sign;
    }

    if intent.od_mode == OdMode::ShiftedOd {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            PlanarPoint::new(
                rng.random_range(bounds.min_x..=bounds.max_x),
                rng.random_range(bounds.min_y..=bounds.max_y),
            )
        };
        planar[0] = draw(&mut rng);
        planar[n - 1] = draw(&mut rng);
    }

    let points: Vec<GeoPoint> = planar.into_iter().map(|p| unproject(p, origin)).collect();
    let trajectory = Trajectory {
        id: format!("{}-m", t.id),
        points,
        label: Label::Malicious,
    };
    let reward_gain_m = path_length_m(&trajectory) - path_length_m(t);
    Ok(AttackOutcome {
        trajectory,
        m,
        reward_gain_m,
        clipped,
    })
}

/// One row of the attack manifest, the ground-truth record of every injected
/// trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub trip_id: String,
    pub source_trip_id: String,
    pub c_m: f64,
    pub q: f64,
    pub od_mode: String,
    pub m: usize,
    pub reward_gain_m: f64,
}

#[derive(Debug, Clone, Default)]
pub struct InjectionResult {
    pub malicious: Vec<Trajectory>,
    pub manifest: Vec<ManifestRow>,
    /// Test trips rejected because they were too short for the mode.
    pub skipped: usize,
}

/// Fabricate malicious counterparts for a deterministic `attack_fraction`
/// subset of the test trips. Originals are retained untouched.
pub fn inject_attacks(
    corpus: &Corpus,
    test_ids: &[String],
    intent: &MaliciousIntent,
    attack_fraction: f64,
    seed: u64,
) -> Result<InjectionResult> {
    if !(attack_fraction > 0.0 && attack_fraction <= 1.0) {
        return Err(Error::invalid("attack_fraction must lie in (0, 1]"));
    }
    let bounds = corpus.planar_bounds();
    let by_id: std::collections::HashMap<&str, &Trajectory> = corpus
        .trajectories
        .iter()
        .map(|t| (t.id.as_str(), t))
        .collect();
    let mut ids: Vec<&String> = test_ids.iter().collect();
    ids.sort();
    let mut rng = seeds::stream(seed, &["attack-select"]);
    ids.shuffle(&mut rng);
    let k = ((attack_fraction * ids.len() as f64).round() as usize).min(ids.len());
    let mut chosen: Vec<&String> = ids.into_iter().take(k).collect();
    chosen.sort();

    let mut result = InjectionResult::default();
    for id in chosen {
        let source = *by_id
            .get(id.as_str())
            .ok_or_else(|| Error::invalid(format!("test id {id} not in corpus")))?;
        match generate_malicious(source, intent, &bounds, corpus.origin, seed) {
            Ok(outcome) => {
                result.manifest.push(ManifestRow {
                    trip_id: outcome.trajectory.id.clone(),
                    source_trip_id: source.id.clone(),
                    c_m: intent.c_m,
                    q: intent.q,
                    od_mode: intent.od_mode.tag().to_string(),
                    m: outcome.m,
                    reward_gain_m: outcome.reward_gain_m,
                });
                result.malicious.push(outcome.trajectory);
            }
            Err(Error::TooShort { .. }) => result.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

/// Write the attack manifest CSV.
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "trip_id",
        "source_trip_id",
        "c",
        "q",
        "od_mode",
        "m",
        "reward_gain_m",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record([
            r.trip_id.as_str(),
            r.source_trip_id.as_str(),
            &r.c_m.to_string(),
            &r.q.to_string(),
            &r.od_mode,
            &r.m.to_string(),
            &r.reward_gain_m.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read an attack manifest CSV back.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::csv(path, "manifest row too short"))
        };
        rows.push(ManifestRow {
            trip_id: field(0)?.to_string(),
            source_trip_id: field(1)?.to_string(),
            c_m: field(2)?.parse().map_err(|e| Error::csv(path, e))?,
            q: field(3)?.parse().map_err(|e| Error::csv(path, e))?,
            od_mode: field(4)?.to_string(),
            m: field(5)?.parse().map_err(|e| Error::csv(path, e))?,
            reward_gain_m: field(6)?.parse().map_err(|e| Error::csv(path, e))?,
        });
    }
    Ok(rows)
}
