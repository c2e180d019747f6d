//! Discrete Frechet distance between planar tracks, an exhaustive coupling
//! oracle for verification, and the all-pairs distance matrix that feeds the
//! clustering detector.
//!
//! The all-pairs stage is the scalability wall of clustering-based detection:
//! the pair count grows quadratically with corpus size, so [`pairwise_matrix`]
//! takes an explicit budget and refuses oversized inputs instead of silently
//! grinding.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::Error;
use crate::geo::PlanarPoint;
use crate::seeds::fnv1a64;
use crate::trajectory::PlanarTrack;
use crate::Result;

/// Discrete Frechet distance by dynamic programming over the coupling table:
/// `ca(i,j) = max(d(a_i, b_j), min(ca(i-1,j), ca(i-1,j-1), ca(i,j-1)))`.
///
/// O(n*m) time, O(min(n,m)) memory via rolling rows.
pub fn discrete_frechet(a: &[PlanarPoint], b: &[PlanarPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    // Roll over the shorter curve.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    let mut prev = vec![0.0f64; m];
    let mut row = vec![0.0f64; m];

    for (j, q) in short.iter().enumerate() {
        let d = long[0].dist(q);
        prev[j] = if j == 0 { d } else { prev[j - 1].max(d) };
    }
    for p in long.iter().skip(1) {
        row[0] = prev[0].max(p.dist(&short[0]));
        for (j, q) in short.iter().enumerate().skip(1) {
            let reach = prev[j].min(prev[j - 1]).min(row[j - 1]);
            row[j] = reach.max(p.dist(q));
        }
        std::mem::swap(&mut prev, &mut row);
    }
    Ok(prev[m - 1])
}

/// Largest `|a| * |b|` the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 64;

/// Exact minimum over all monotone couplings of the maximum pair distance,
/// by explicit enumeration of every coupling path. Exponential; the size
/// guard keeps it to test-oracle scale.
pub fn brute_force_frechet(a: &[PlanarPoint], b: &[PlanarPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let cells = a.len() * b.len();
    if cells > BRUTE_FORCE_LIMIT {
        return Err(Error::BruteForceTooLarge {
            limit: BRUTE_FORCE_LIMIT,
            got: cells,
        });
    }

    fn walk(a: &[PlanarPoint], b: &[PlanarPoint], i: usize, j: usize, max_so_far: f64) -> f64 {
        let max_here = max_so_far.max(a[i].dist(&b[j]));
        let last = (i + 1 == a.len(), j + 1 == b.len());
        match last {
            (true, true) => max_here,
            (true, false) => walk(a, b, i, j + 1, max_here),
            (false, true) => walk(a, b, i + 1, j, max_here),
            (false, false) => walk(a, b, i + 1, j, max_here)
                .min(walk(a, b, i, j + 1, max_here))
                .min(walk(a, b, i + 1, j + 1, max_here)),
        }
    }
    Ok(walk(a, b, 0, 0, 0.0))
}

/// Symmetric all-pairs Frechet distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    pub n: usize,
    values: Vec<f64>,
    /// Measured wall time per thousand pairs, milliseconds.
    pub wall_ms_per_1k: f64,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Distances from trip `i` to every other trip.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn pair_count(n: usize) -> u64 {
        (n as u64) * (n as u64 - 1) / 2
    }
}

/// Build a matrix from a dense row-major buffer, validating shape and
/// symmetry. Mostly useful for tests and reference oracles.
pub fn from_dense(ids: Vec<String>, values: Vec<f64>) -> Result<DistanceMatrix> {
    let n = ids.len();
    if values.len() != n * n {
        return Err(Error::invalid(format!(
            "dense matrix needs {} values for {n} ids, got {}",
            n * n,
            values.len()
        )));
    }
    for i in 0..n {
        if values[i * n + i] != 0.0 {
            return Err(Error::invalid("distance matrix diagonal must be zero"));
        }
        for j in 0..n {
            let d = values[i * n + j];
            if !(d >= 0.0) {
                return Err(Error::invalid(
                    "distance matrix entries must be non-negative",
                ));
            }
            if d != values[j * n + i] {
                return Err(Error::invalid("distance matrix must be symmetric"));
            }
        }
    }
    Ok(DistanceMatrix {
        ids,
        n,
        values,
        wall_ms_per_1k: 0.0,
    })
}

/// Content hash of a set of planar tracks, used to key matrix caches.
pub fn tracks_hash(tracks: &[PlanarTrack]) -> u64 {
    let mut bytes = Vec::new();
    for t in tracks {
        bytes.extend_from_slice(t.id.as_bytes());
        bytes.push(0);
        for p in &t.points {
            bytes.extend_from_slice(&p.x.to_bits().to_le_bytes());
            bytes.extend_from_slice(&p.y.to_bits().to_le_bytes());
        }
    }
    fnv1a64(&bytes)
}

/// Compute all pairwise distances, refusing when the pair count exceeds
/// `max_pairs_budget`.
pub fn pairwise_matrix(tracks: &[PlanarTrack], max_pairs_budget: u64) -> Result<DistanceMatrix> {
    let n = tracks.len();
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let needed = DistanceMatrix::pair_count(n);
    if needed > max_pairs_budget {
        return Err(Error::PairBudgetExceeded {
            needed,
            allowed: max_pairs_budget,
        });
    }

    let start = Instant::now();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let distances: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| discrete_frechet(&tracks[i].points, &tracks[j].points).expect("non-empty"))
        .collect();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut values = vec![0.0; n * n];
    for (&(i, j), &d) in pairs.iter().zip(&distances) {
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    Ok(DistanceMatrix {
        ids: tracks.iter().map(|t| t.id.clone()).collect(),
        n,
        values,
        wall_ms_per_1k: if needed > 0 {
            elapsed_ms * 1000.0 / needed as f64
        } else {
            0.0
        },
    })
}

/// Write a matrix cache keyed by the corpus content hash.
pub fn save_matrix(path: &Path, matrix: &DistanceMatrix, corpus_hash: u64) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let emit = |w: &mut BufWriter<std::fs::File>, s: String| -> Result<()> {
        w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    emit(
        &mut w,
        format!(
            "privtraj-matrix v1\nhash {corpus_hash:016x}\nn {}\n",
            matrix.n
        ),
    )?;
    for id in &matrix.ids {
        emit(&mut w, format!("id {id}\n"))?;
    }
    for i in 0..matrix.n {
        for j in i + 1..matrix.n {
            emit(&mut w, format!("{i} {j} {}\n", matrix.get(i, j)))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a matrix cache, verifying the corpus hash.
pub fn load_matrix(path: &Path, expected_hash: u64) -> Result<DistanceMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| Error::invalid(format!("truncated matrix cache {}", path.display())))
    };
    if next()? != "privtraj-matrix v1" {
        return Err(Error::invalid(format!(
            "{} is not a matrix cache",
            path.display()
        )));
    }
    let hash_line = next()?;
    let found = u64::from_str_radix(hash_line.trim_start_matches("hash "), 16)
        .map_err(|_| Error::invalid("bad hash line in matrix cache"))?;
    if found != expected_hash {
        return Err(Error::CacheMismatch {
            expected: expected_hash,
            found,
        });
    }
    let n: usize = next()?
        .trim_start_matches("n ")
        .parse()
        .map_err(|_| Error::invalid("bad n line in matrix cache"))?;
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        ids.push(next()?.trim_start_matches("id ").to_string());
    }
    let mut values = vec![0.0; n * n];
    for _ in 0..DistanceMatrix::pair_count(n) {
        let line = next()?;
        let mut parts = line.split_ascii_whitespace();
        let bad = || Error::invalid("bad value line in matrix cache");
        let i: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let j: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let d: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    Ok(DistanceMatrix {
        ids,
        n,
        values,
        wall_ms_per_1k: 0.0,
    })
}
