//! Synthetic trip corpus generator.
//!
//! Builds a Manhattan-style street grid over a square service area, samples
//! origin-destination pairs at intersections, and emits trips that follow
//! block-wise routes between them at a fixed speed and sampling period, with
//! Gaussian GPS jitter on the moving fixes. Endpoints are pinned to the exact
//! pickup/dropoff intersection so origin-destination grouping is stable.
//!
//! Route shapes vary per trip (two elbow orientations plus an occasional
//! detour through an off-route waypoint), which gives every OD group a
//! realistic spread of normal behavior instead of a single canonical path.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geo::{unproject, GeoPoint, PlanarPoint};
use crate::seeds;
use crate::trajectory::{Corpus, GeoBounds, Label, Trajectory};
use crate::Result;

/// Geographic center of the synthetic service area.
const CENTER: GeoPoint = GeoPoint {
    lon: -8.61,
    lat: 41.15,
};

/// Streets per axis (intersections are one more per axis).
const STREETS_PER_AXIS: usize = 10;

/// Fraction of the extent kept as a margin: OD intersections are sampled from
/// the inner region so attack displacements never leave the feasibility box.
const INNER_MARGIN_FRAC: f64 = 0.2;

/// Minimum Manhattan separation between an origin and its destination,
/// as a fraction of the extent.
const MIN_OD_SEPARATION_FRAC: f64 = 0.3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_trips: usize,
    pub n_od_pairs: usize,
    pub grid_extent_m: f64,
    pub speed_mps: f64,
    pub sample_period_s: f64,
    pub jitter_m: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_trips: 2000,
            n_od_pairs: 50,
            grid_extent_m: 4000.0,
            speed_mps: 10.0,
            sample_period_s: 15.0,
            jitter_m: 12.0,
            seed: 42,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("n_trips", self.n_trips as f64),
            ("n_od_pairs", self.n_od_pairs as f64),
            ("grid_extent_m", self.grid_extent_m),
            ("speed_mps", self.speed_mps),
            ("sample_period_s", self.sample_period_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(format!(
                    "synth parameter {name} must be positive"
                )));
            }
        }
        if self.jitter_m < 0.0 {
            return Err(Error::invalid(
                "synth parameter jitter_m must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Grid coordinates in meters, origin at the bbox minimum corner.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GridPoint {
    x: f64,
    y: f64,
}

fn elbow(from: GridPoint, to: GridPoint, x_first: bool) -> Vec<GridPoint> {
    let corner = if x_first {
        GridPoint { x: to.x, y: from.y }
    } else {
        GridPoint { x: from.x, y: to.y }
    };
    let mut path = vec![from];
    if corner != from && corner != to {
        path.push(corner);
    }
    path.push(to);
    path
}

fn polyline_length(path: &[GridPoint]) -> f64 {
    path.windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum()
}

/// Sample the polyline every `step` meters of arc length, always including
/// the exact final vertex.
fn resample(path: &[GridPoint], step: f64) -> Vec<GridPoint> {
    let total = polyline_length(path);
    let mut out = Vec::with_capacity((total / step) as usize + 2);
    let mut seg = 0;
    let mut seg_start = 0.0;
    let mut target = 0.0;
    while target < total {
        loop {
            let seg_len = (path[seg + 1].x - path[seg].x).hypot(path[seg + 1].y - path[seg].y);
            if seg_start + seg_len >= target || seg + 2 == path.len() {
                let t = if seg_len > 0.0 {
                    (target - seg_start) / seg_len
                } else {
                    0.0
                };
                out.push(GridPoint {
                    x: path[seg].x + t * (path[seg + 1].x - path[seg].x),
                    y: path[seg].y + t * (path[seg + 1].y - path[seg].y),
                });
                break;
            }
            seg_start += seg_len;
            seg += 1;
        }
        target += step;
    }
    out.push(*path.last().unwrap());
    out
}

/// Generate a deterministic synthetic corpus. All trips are labeled Normal.
pub fn synth_corpus(params: &SynthParams) -> Result<Corpus> {
    params.validate()?;
    let extent = params.grid_extent_m;
    let spacing = extent / STREETS_PER_AXIS as f64;
    let lo = (INNER_MARGIN_FRAC * STREETS_PER_AXIS as f64).ceil() as i64;
    let hi = STREETS_PER_AXIS as i64 - lo;
    let min_sep = MIN_OD_SEPARATION_FRAC * extent;

    // Ordered OD pairs between inner intersections, far enough apart.
    let mut pair_rng = seeds::stream(params.seed, &["synth", "od-pairs"]);
    let mut pairs: Vec<(GridPoint, GridPoint)> = Vec::with_capacity(params.n_od_pairs);
    let mut seen = std::collections::BTreeSet::new();
    let mut attempts = 0usize;
    while pairs.len() < params.n_od_pairs {
        attempts += 1;
        if attempts > params.n_od_pairs * 1000 {
            return Err(Error::invalid(
                "could not sample enough distinct OD pairs; grid too small for n_od_pairs",
            ));
        }
        let cell = |rng: &mut rand_chacha::ChaCha8Rng| {
            (rng.random_range(lo..=hi), rng.random_range(lo..=hi))
        };
        let o = cell(&mut pair_rng);
        let d = cell(&mut pair_rng);
        let l1 = ((o.0 - d.0).abs() + (o.1 - d.1).abs()) as f64 * spacing;
        if l1 < min_sep || !seen.insert((o, d)) {
            continue;
        }
        let at = |(i, j): (i64, i64)| GridPoint {
            x: i as f64 * spacing,
            y: j as f64 * spacing,
        };
        pairs.push((at(o), at(d)));
    }

    let step = params.speed_mps * params.sample_period_s;
    let half = extent / 2.0;
    let to_geo = |g: GridPoint| unproject(PlanarPoint::new(g.x - half, g.y - half), CENTER);

    let mut trips = Vec::with_capacity(params.n_trips);
    for k in 0..params.n_trips {
        let id = format!("synth-{k:06}");
        let mut rng = seeds::stream(params.seed, &["synth", "trip", &id]);
        let (o, d) = pairs[k % pairs.len()];

        let variant: f64 = rng.random();
        let path = if variant < 0.45 {
            elbow(o, d, true)
        } else if variant < 0.70 {
            elbow(o, d, false)
        } else {
            // Detour: route via an intersection bordering the elbow corner,
            // bounding the deviation from the direct route to about a block.
            let x_first: bool = rng.random();
            let corner = if x_first {
                GridPoint { x: d.x, y: o.y }
            } else {
                GridPoint { x: o.x, y: d.y }
            };
            // Diagonal neighbors only: those never lie on the direct route,
            // so every detour is a real deviation.
            let neighbors: [(i64, i64); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
            let (di, dj) = neighbors[rng.random_range(0..neighbors.len())];
            let wi = ((corner.x / spacing).round() as i64 + di).clamp(lo, hi);
            let wj = ((corner.y / spacing).round() as i64 + dj).clamp(lo, hi);
            let w = GridPoint {
                x: wi as f64 * spacing,
                y: wj as f64 * spacing,
            };
            let mut path = elbow(o, w, x_first);
            let second = elbow(w, d, x_first);
            path.extend_from_slice(&second[1..]);
            path
        };

        let mut sampled = resample(&path, step);
        if sampled.len() < 2 {
            sampled.push(*path.last().unwrap());
        }
        if params.jitter_m > 0.0 {
            let noise = Normal::new(0.0, params.jitter_m).expect("finite sigma");
            let last = sampled.len() - 1;
            for p in &mut sampled[1..last] {
                p.x += noise.sample(&mut rng);
                p.y += noise.sample(&mut rng);
            }
        }
        let points: Vec<GeoPoint> = sampled.into_iter().map(to_geo).collect();
        trips.push(Trajectory::new(id, points, Label::Normal)?);
    }

    let min = to_geo(GridPoint { x: 0.0, y: 0.0 });
    let max = to_geo(GridPoint {
        x: extent,
        y: extent,
    });
    let bbox = GeoBounds {
        min_lon: min.lon,
        min_lat: min.lat,
        max_lon: max.lon,
        max_lat: max.lat,
    };
    Ok(Corpus::with_bounds(trips, bbox))
}
