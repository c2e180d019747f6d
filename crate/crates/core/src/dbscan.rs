//! Clustering-based anomaly detection over a precomputed Frechet distance
//! matrix: classic density clustering per origin-destination group, plus a
//! continuous k-distance outlier score so a binary clusterer yields ROC
//! curves.
//!
//! Detection never sees ground-truth labels: the interface consumes
//! [`PlanarTrack`]s, which carry only an id and geometry.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::frechet::{pairwise_matrix, DistanceMatrix};
use crate::trajectory::{od_key, ODKey, PlanarBounds, PlanarTrack};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius in Frechet meters.
    pub eps_m: f64,
    /// Minimum trips per micro-cluster (its own point included).
    pub min_pts: usize,
    /// Neighbor rank for the continuous outlier score (self excluded).
    pub score_k: usize,
}

impl DbscanParams {
    pub fn new(eps_m: f64, min_pts: usize) -> Result<Self> {
        if !(eps_m > 0.0) {
            return Err(Error::invalid("dbscan eps must be positive"));
        }
        if !(2..=10).contains(&min_pts) {
            return Err(Error::invalid("dbscan min_pts must lie in 2..=10"));
        }
        Ok(DbscanParams {
            eps_m,
            min_pts,
            score_k: min_pts,
        })
    }
}

/// Per-trip cluster assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterLabel {
    Cluster(usize),
    Noise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<ClusterLabel>,
    pub core_flags: Vec<bool>,
}

impl ClusterAssignment {
    pub fn noise_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| (*l == ClusterLabel::Noise).then_some(i))
            .collect()
    }
}

fn region_query(matrix: &DistanceMatrix, i: usize, eps: f64) -> Vec<usize> {
    matrix
        .row(i)
        .iter()
        .enumerate()
        .filter_map(|(j, &d)| (d <= eps).then_some(j))
        .collect()
}

/// Density clustering generalized to a precomputed distance matrix.
///
/// Deterministic: points are seeded in ascending index order and clusters are
/// expanded to exhaustion before the next seed, so border points attach to the
/// first-discovered cluster.
pub fn dbscan(matrix: &DistanceMatrix, params: &DbscanParams) -> ClusterAssignment {
    let n = matrix.n;
    let mut labels = vec![ClusterLabel::Noise; n];
    let mut core_flags = vec![false; n];
    let mut visited = vec![false; n];
    let mut next_cluster = 0usize;

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let neighbors = region_query(matrix, seed, params.eps_m);
        if neighbors.len() < params.min_pts {
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[seed] = ClusterLabel::Cluster(cluster);
        core_flags[seed] = true;
        let mut queue: VecDeque<usize> = neighbors.into();
        while let Some(j) = queue.pop_front() {
            if labels[j] == ClusterLabel::Noise {
                labels[j] = ClusterLabel::Cluster(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nj = region_query(matrix, j, params.eps_m);
            if nj.len() >= params.min_pts {
                core_flags[j] = true;
                queue.extend(nj);
            }
        }
    }
    ClusterAssignment { labels, core_flags }
}

/// Independent O(n^3) reference formulation of the same clustering, used as a
/// test oracle: core flags by direct counting, clusters as connected
/// components of the core-core eps-graph ordered by their smallest core
/// index, then borders claimed by the earliest-created adjacent cluster.
pub fn reference_dbscan(matrix: &DistanceMatrix, params: &DbscanParams) -> ClusterAssignment {
    let n = matrix.n;
    let core: Vec<bool> = (0..n)
        .map(|i| region_query(matrix, i, params.eps_m).len() >= params.min_pts)
        .collect();

    let mut component = vec![usize::MAX; n];
    let mut next = 0usize;
    for i in 0..n {
        if !core[i] || component[i] != usize::MAX {
            continue;
        }
        let id = next;
        next += 1;
        let mut stack = vec![i];
        component[i] = id;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if core[v] && component[v] == usize::MAX && matrix.get(u, v) <= params.eps_m {
                    component[v] = id;
                    stack.push(v);
                }
            }
        }
    }

    let mut labels = vec![ClusterLabel::Noise; n];
    for i in 0..n {
        if core[i] {
            labels[i] = ClusterLabel::Cluster(component[i]);
        } else {
            // Border point: earliest cluster with a core neighbor in range.
            let claim = (0..n)
                .filter(|&j| core[j] && matrix.get(i, j) <= params.eps_m)
                .map(|j| component[j])
                .min();
            if let Some(c) = claim {
                labels[i] = ClusterLabel::Cluster(c);
            }
        }
    }
    ClusterAssignment {
        labels,
        core_flags: core,
    }
}

/// Distance to the `score_k`-th nearest other trip; `+inf` when the candidate
/// set is too small (an isolated trip is maximally anomalous).
pub fn outlier_score(matrix: &DistanceMatrix, score_k: usize, index: usize) -> f64 {
    let mut others: Vec<f64> = matrix
        .row(index)
        .iter()
        .enumerate()
        .filter_map(|(j, &d)| (j != index).then_some(d))
        .collect();
    if score_k == 0 || score_k > others.len() {
        return f64::INFINITY;
    }
    others.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    others[score_k - 1]
}

/// One scored test trip.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrack {
    pub trip_id: String,
    pub od_key: ODKey,
    pub score_m: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DetectOutput {
    pub scores: Vec<ScoredTrack>,
    /// Test trips that received the +inf sentinel.
    pub sentinel_count: usize,
}

/// Full detection pipeline for a batch of `score_k` candidates at once: group
/// train and test trips by OD, build one distance matrix per group that
/// contains a test trip, and emit each test trip's k-distance within its
/// group.
///
/// The pair budget applies to the total matrix work, making the quadratic
/// cost of clustering-based detection an explicit, refusable quantity.
pub fn detect_multi(
    train: &[PlanarTrack],
    test: &[PlanarTrack],
    bounds: &PlanarBounds,
    cell_side_m: f64,
    score_ks: &[usize],
    max_pairs: u64,
) -> Result<Vec<DetectOutput>> {
    let mut groups: BTreeMap<ODKey, (Vec<&PlanarTrack>, Vec<usize>)> = BTreeMap::new();
    for t in train {
        groups
            .entry(od_key(t, bounds, cell_side_m))
            .or_default()
            .0
            .push(t);
    }
    for t in test {
        let entry = groups.entry(od_key(t, bounds, cell_side_m)).or_default();
        entry.1.push(entry.0.len());
        entry.0.push(t);
    }

    let needed: u64 = groups
        .values()
        .filter(|(_, test_idx)| !test_idx.is_empty())
        .map(|(members, _)| DistanceMatrix::pair_count(members.len()))
        .sum();
    if needed > max_pairs {
        return Err(Error::PairBudgetExceeded {
            needed,
            allowed: max_pairs,
        });
    }

    let mut outputs: Vec<DetectOutput> = score_ks.iter().map(|_| DetectOutput::default()).collect();
    for (key, (members, test_idx)) in &groups {
        if test_idx.is_empty() {
            continue;
        }
        let tracks: Vec<PlanarTrack> = members.iter().map(|t| (*t).clone()).collect();
        let matrix = pairwise_matrix(&tracks, u64::MAX)?;
        for (slot, &k) in score_ks.iter().enumerate() {
            for &i in test_idx {
                let score = outlier_score(&matrix, k, i);
                if score.is_infinite() {
                    outputs[slot].sentinel_count += 1;
                }
                outputs[slot].scores.push(ScoredTrack {
                    trip_id: tracks[i].id.clone(),
                    od_key: *key,
                    score_m: score,
                });
            }
        }
    }
    for out in &mut outputs {
        out.scores.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
    }
    Ok(outputs)
}

/// Single-`score_k` convenience wrapper over [`detect_multi`].
pub fn detect(
    train: &[PlanarTrack],
    test: &[PlanarTrack],
    bounds: &PlanarBounds,
    cell_side_m: f64,
    score_k: usize,
    max_pairs: u64,
) -> Result<DetectOutput> {
    Ok(
        detect_multi(train, test, bounds, cell_side_m, &[score_k], max_pairs)?
            .pop()
            .expect("one"),
    )
}
