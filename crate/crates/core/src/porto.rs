//! Porto taxi CSV format: ingestion with the quality filters applied to the
//! original dataset, and serialization of corpora back to the same schema so
//! every downstream stage is format-agnostic.
//!
//! Expected schema: a header row containing at least `TRIP_ID`, `MISSING_DATA`
//! (`"True"`/`"False"`) and `POLYLINE` (a JSON array string of
//! `[longitude,latitude]` pairs). Extra columns are ignored on read and not
//! reproduced on write.

use std::path::Path;

use crate::error::Error;
use crate::geo::GeoPoint;
use crate::trajectory::{Corpus, Label, Trajectory};
use crate::Result;

/// Default sampling period of the Porto dataset, seconds between fixes.
pub const SAMPLE_PERIOD_S: f64 = 15.0;

/// Row-level bookkeeping from one ingestion pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows_read: usize,
    pub kept: usize,
    pub dropped_missing_data: usize,
    pub dropped_short: usize,
    pub malformed: usize,
}

/// Parse a POLYLINE cell: `[[-8.618643,41.141412],[-8.618499,41.141376]]`.
pub fn parse_polyline(raw: &str) -> Option<Vec<GeoPoint>> {
    let value: serde_json::Value = serde_json::from_str(raw.trim()).ok()?;
    let pairs = value.as_array()?;
    let mut points = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let coords = pair.as_array()?;
        if coords.len() != 2 {
            return None;
        }
        let lon = coords[0].as_f64()?;
        let lat = coords[1].as_f64()?;
        let p = GeoPoint::new(lon, lat);
        if !p.is_valid() {
            return None;
        }
        points.push(p);
    }
    Some(points)
}

/// Format points back into the POLYLINE cell syntax.
///
/// Uses Rust's shortest round-trip float formatting, matching the source data
/// style, so parse -> format is byte-stable for files we wrote ourselves.
pub fn format_polyline(points: &[GeoPoint]) -> String {
    let mut out = String::with_capacity(points.len() * 24 + 2);
    out.push('[');
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        out.push_str(&p.lon.to_string());
        out.push(',');
        out.push_str(&p.lat.to_string());
        out.push(']');
    }
    out.push(']');
    out
}

/// Ingest a Porto-format CSV.
///
/// Drops rows with `MISSING_DATA=True` and malformed polylines, keeps
/// trajectories with strictly more than `min_points` points. The corpus
/// bounding box and projection origin come from the retained rows.
pub fn ingest_porto(path: &Path, min_points: usize) -> Result<(Corpus, IngestStats)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::io(path, into_io(e)))?;

    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let trip_col =
        col("TRIP_ID").ok_or_else(|| Error::csv(path, "missing required column TRIP_ID"))?;
    let missing_col = col("MISSING_DATA")
        .ok_or_else(|| Error::csv(path, "missing required column MISSING_DATA"))?;
    let poly_col =
        col("POLYLINE").ok_or_else(|| Error::csv(path, "missing required column POLYLINE"))?;

    let mut stats = IngestStats::default();
    let mut trips = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                stats.rows_read += 1;
                stats.malformed += 1;
                continue;
            }
        };
        stats.rows_read += 1;
        let (Some(id), Some(missing), Some(poly)) = (
            record.get(trip_col),
            record.get(missing_col),
            record.get(poly_col),
        ) else {
            stats.malformed += 1;
            continue;
        };
        if missing.trim().eq_ignore_ascii_case("true") {
            stats.dropped_missing_data += 1;
            continue;
        }
        let Some(points) = parse_polyline(poly) else {
            stats.malformed += 1;
            continue;
        };
        if points.len() < 2 {
            // Empty or single-point polylines cannot form a trajectory.
            stats.malformed += 1;
            continue;
        }
        if points.len() <= min_points {
            stats.dropped_short += 1;
            continue;
        }
        stats.kept += 1;
        trips.push(Trajectory::new(id.to_string(), points, Label::Normal)?);
    }

    if trips.is_empty() {
        return Err(Error::invalid(format!(
            "no usable trajectories in {} ({} rows read)",
            path.display(),
            stats.rows_read
        )));
    }
    Ok((Corpus::new(trips)?, stats))
}

/// Write a corpus in the Porto schema (TRIP_ID, MISSING_DATA, POLYLINE).
pub fn write_porto(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::io(path, into_io(e)))?;
    writer
        .write_record(["TRIP_ID", "MISSING_DATA", "POLYLINE"])
        .map_err(|e| Error::csv(path, e))?;
    for t in &corpus.trajectories {
        writer
            .write_record([t.id.as_str(), "False", &format_polyline(&t.points)])
            .map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn into_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}
