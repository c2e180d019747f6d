//! Trip data model: labeled trajectories, corpora with a feasibility bounding
//! box, origin-destination grouping and the train/test split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geo::{haversine_m, project, GeoPoint, PlanarPoint};
use crate::seeds;
use crate::Result;

/// Ground-truth class of a trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Malicious,
}

/// An ordered sequence of GPS fixes with an opaque id and a ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub points: Vec<GeoPoint>,
    pub label: Label,
}

impl Trajectory {
    /// A trajectory needs at least two points.
    pub fn new(id: impl Into<String>, points: Vec<GeoPoint>, label: Label) -> Result<Self> {
        let id = id.into();
        if points.len() < 2 {
            return Err(Error::TooShort {
                id,
                n: points.len(),
                min: 2,
            });
        }
        Ok(Trajectory { id, points, label })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sum of haversine distances over consecutive point pairs, in meters.
pub fn path_length_m(t: &Trajectory) -> f64 {
    t.points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// Geographic bounding box; doubles as the feasibility region for fabricated
/// points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl GeoBounds {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = GeoBounds {
            min_lon: first.lon,
            min_lat: first.lat,
            max_lon: first.lon,
            max_lat: first.lat,
        };
        for p in it {
            b.min_lon = b.min_lon.min(p.lon);
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lon = b.max_lon.max(p.lon);
            b.max_lat = b.max_lat.max(p.lat);
        }
        Some(b)
    }

    pub fn centroid(&self) -> GeoPoint {
        GeoPoint::new(
            (self.min_lon + self.max_lon) / 2.0,
            (self.min_lat + self.max_lat) / 2.0,
        )
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        p.lon >= self.min_lon
            && p.lon <= self.max_lon
            && p.lat >= self.min_lat
            && p.lat <= self.max_lat
    }
}

/// Axis-aligned planar box in meters (the projected [`GeoBounds`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarBounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl PlanarBounds {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn clamp(&self, p: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(
            p.x.clamp(self.min_x, self.max_x),
            p.y.clamp(self.min_y, self.max_y),
        )
    }

    pub fn contains(&self, p: &PlanarPoint) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

/// A set of trajectories plus the feasibility region and projection origin.
///
/// The bounding box is fixed when the corpus is built (ingested or
/// synthesized); privacy perturbation keeps the original box so that grouping,
/// normalization and attack feasibility stay stable across pipeline stages.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub trajectories: Vec<Trajectory>,
    pub bbox: GeoBounds,
    pub origin: GeoPoint,
}

impl Corpus {
    /// Build a corpus; the projection origin defaults to the bbox centroid.
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let bbox = GeoBounds::from_points(trajectories.iter().flat_map(|t| t.points.iter()))
            .ok_or(Error::EmptyTrajectory)?;
        let origin = bbox.centroid();
        Ok(Corpus {
            trajectories,
            bbox,
            origin,
        })
    }

    pub fn with_bounds(trajectories: Vec<Trajectory>, bbox: GeoBounds) -> Self {
        let origin = bbox.centroid();
        Corpus {
            trajectories,
            bbox,
            origin,
        }
    }

    pub fn planar_bounds(&self) -> PlanarBounds {
        let lo = project(
            GeoPoint::new(self.bbox.min_lon, self.bbox.min_lat),
            self.origin,
        );
        let hi = project(
            GeoPoint::new(self.bbox.max_lon, self.bbox.max_lat),
            self.origin,
        );
        PlanarBounds {
            min_x: lo.x,
            min_y: lo.y,
            max_x: hi.x,
            max_y: hi.y,
        }
    }

    /// Project one trajectory onto the corpus plane, dropping its label.
    pub fn planar_track(&self, t: &Trajectory) -> PlanarTrack {
        PlanarTrack {
            id: t.id.clone(),
            points: t.points.iter().map(|p| project(*p, self.origin)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }
}

/// Label-free planar view of a trip: the only trip representation detectors
/// ever see, so ground truth cannot leak into scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarTrack {
    pub id: String,
    pub points: Vec<PlanarPoint>,
}

/// Ordered origin/destination cell pair on a fixed grid over the corpus box.
///
/// Each cell index packs the `(column, row)` pair of a square grid anchored at
/// the bbox minimum corner, so the key is a pure function of the endpoints,
/// the box and the cell side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ODKey {
    pub origin_cell: i64,
    pub dest_cell: i64,
}

impl ODKey {
    pub fn to_cell_string(self) -> String {
        format!("{}:{}", self.origin_cell, self.dest_cell)
    }
}

fn cell_index(p: PlanarPoint, bounds: &PlanarBounds, cell_side_m: f64) -> i64 {
    let ix = ((p.x - bounds.min_x) / cell_side_m).floor() as i32;
    let iy = ((p.y - bounds.min_y) / cell_side_m).floor() as i32;
    ((ix as i64) << 32) | (iy as u32 as i64)
}

/// OD key of a planar track under the given grid.
pub fn od_key(track: &PlanarTrack, bounds: &PlanarBounds, cell_side_m: f64) -> ODKey {
    let first = track.points[0];
    let last = track.points[track.points.len() - 1];
    ODKey {
        origin_cell: cell_index(first, bounds, cell_side_m),
        dest_cell: cell_index(last, bounds, cell_side_m),
    }
}

/// Default grouping granularity: about one urban block.
pub const DEFAULT_CELL_SIDE_M: f64 = 200.0;

/// Group every trajectory id by the cell pair of its endpoints.
///
/// Deterministic: a `BTreeMap` keyed by the packed cells, ids in corpus order.
pub fn group_by_od(corpus: &Corpus, cell_side_m: f64) -> BTreeMap<ODKey, Vec<String>> {
    let bounds = corpus.planar_bounds();
    let mut groups: BTreeMap<ODKey, Vec<String>> = BTreeMap::new();
    for t in &corpus.trajectories {
        let track = corpus.planar_track(t);
        groups
            .entry(od_key(&track, &bounds, cell_side_m))
            .or_default()
            .push(t.id.clone());
    }
    groups
}

/// Train/test split over OD groups.
///
/// Up to `per_group` trips per group are held out for testing. Groups with a
/// single trip go entirely to train; smaller groups (2..=per_group members)
/// keep one trip in train and test the rest.
pub fn split_test(
    groups: &BTreeMap<ODKey, Vec<String>>,
    per_group: usize,
    seed: u64,
) -> (Vec<String>, Vec<String>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (key, ids) in groups {
        let mut ids: Vec<String> = ids.clone();
        ids.sort();
        let mut rng = seeds::stream(seed, &["split", &key.to_cell_string()]);
        ids.shuffle(&mut rng);
        let n_test = if ids.len() <= 1 {
            0
        } else if ids.len() <= per_group {
            ids.len() - 1
        } else {
            per_group
        };
        for (i, id) in ids.into_iter().enumerate() {
            if i < n_test {
                test.push(id);
            } else {
                train.push(id);
            }
        }
    }
    train.sort();
    test.sort();
    (train, test)
}
