//! Epsilon-geo-indistinguishable perturbation of trajectories.
//!
//! Two mechanisms share the planar Laplace primitive, whose density around the
//! true location x is `D_eps(x)(z) = eps^2 / (2 pi) * exp(-eps * d(x, z))`:
//!
//! * location-based: every fix is independently replaced by a planar Laplace
//!   sample, the classic geo-indistinguishability mechanism;
//! * trajectory-based: a prediction/test mechanism that exploits temporal
//!   correlation. Each step first asks, under a noisy threshold test, whether
//!   the previously reported point is already a good enough report for the
//!   current true point; only when the test fails is fresh planar noise spent.
//!
//! Epsilon is interpreted per point in 1/meters: eps = 0.1 means 20 m mean
//! noise radius, eps = 0.01 means 200 m. Radial sampling uses the exact
//! inverse CDF through the Lambert W branch -1, so a fixed seed yields a fixed
//! output with no rejection loops.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geo::{project, unproject, GeoPoint, PlanarPoint};
use crate::lambert::lambert_w_m1;
use crate::seeds;
use crate::trajectory::{Corpus, Trajectory};
use crate::Result;

/// Which perturbation runs, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PrivacyMode {
    None,
    LocationBased,
    TrajectoryBased,
}

/// Parameters of the predictive (trajectory-based) mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveParams {
    /// Threshold of the noisy distance test, meters. The default is `2 / eps`.
    pub threshold_l: f64,
    /// Fraction of the per-point budget spent on the test; the rest funds
    /// fresh noise when the test fails.
    pub test_fraction: f64,
}

impl PredictiveParams {
    pub fn default_for(epsilon: f64) -> Self {
        PredictiveParams {
            threshold_l: 2.0 / epsilon,
            test_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    pub mode: PrivacyMode,
    /// Per-point privacy parameter, 1/meters. Ignored when mode is None.
    pub epsilon: f64,
    pub predictive: PredictiveParams,
    pub seed: u64,
}

impl PrivacyConfig {
    pub fn none(seed: u64) -> Self {
        PrivacyConfig {
            mode: PrivacyMode::None,
            epsilon: 0.0,
            predictive: PredictiveParams {
                threshold_l: 0.0,
                test_fraction: 0.1,
            },
            seed,
        }
    }

    pub fn location(epsilon: f64, seed: u64) -> Self {
        PrivacyConfig {
            mode: PrivacyMode::LocationBased,
            epsilon,
            predictive: PredictiveParams::default_for(epsilon),
            seed,
        }
    }

    pub fn trajectory(epsilon: f64, seed: u64) -> Self {
        PrivacyConfig {
            mode: PrivacyMode::TrajectoryBased,
            epsilon,
            predictive: PredictiveParams::default_for(epsilon),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != PrivacyMode::None && !(self.epsilon > 0.0) {
            return Err(Error::invalid(
                "epsilon must be positive when a mechanism is enabled",
            ));
        }
        let f = self.predictive.test_fraction;
        if self.mode == PrivacyMode::TrajectoryBased {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(
                    "predictive test_fraction must lie in (0, 1)",
                ));
            }
            if self.predictive.threshold_l < 0.0 {
                return Err(Error::invalid(
                    "predictive threshold_l must be non-negative",
                ));
            }
        }
        Ok(())
    }

    /// Short identifier used in report files, e.g. `loc-0.1`.
    pub fn mode_tag(&self) -> String {
        match self.mode {
            PrivacyMode::None => "none".to_string(),
            PrivacyMode::LocationBased => format!("loc-{}", self.epsilon),
            PrivacyMode::TrajectoryBased => format!("traj-{}", self.epsilon),
        }
    }
}

/// Per-trip budget observability.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub trip_id: String,
    pub n_points: usize,
    /// Points reported as the prediction (trajectory mode only).
    pub n_predicted: usize,
    pub epsilon_spent_per_point: Vec<f64>,
}

/// One draw of the planar Laplace mechanism centered on `center`.
///
/// The radius follows the density `eps^2 * r * exp(-eps * r)` (Gamma with
/// shape 2 and scale 1/eps), sampled by inverting the CDF
/// `F(r) = 1 - (1 + eps r) e^(-eps r)`:
/// `r = -(1/eps) * (W_{-1}((p - 1)/e) + 1)`. The angle is uniform.
pub fn planar_laplace_sample(
    center: PlanarPoint,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> PlanarPoint {
    let p: f64 = rng.random();
    let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let w = lambert_w_m1((p - 1.0) / std::f64::consts::E)
        .expect("(p-1)/e lies in [-1/e, 0) for p in [0, 1)");
    let r = -(w + 1.0) / epsilon;
    PlanarPoint::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// One-dimensional Laplace noise with the given scale.
fn laplace_scalar(scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    let magnitude = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -scale * u.signum() * magnitude.ln()
}

/// Perturb one trajectory according to the configured mechanism.
///
/// Point count, ordering and the label are preserved; all randomness derives
/// from `(cfg.seed, trip id)` so trips can be processed in any order.
pub fn perturb_trajectory(
    t: &Trajectory,
    cfg: &PrivacyConfig,
    origin: GeoPoint,
) -> (Trajectory, PerturbationReport) {
    let mut report = PerturbationReport {
        trip_id: t.id.clone(),
        n_points: t.points.len(),
        n_predicted: 0,
        epsilon_spent_per_point: Vec::with_capacity(t.points.len()),
    };
    match cfg.mode {
        PrivacyMode::None => {
            report.epsilon_spent_per_point = vec![0.0; t.points.len()];
            (t.clone(), report)
        }
        PrivacyMode::LocationBased => {
            let mut rng = seeds::stream(cfg.seed, &["perturb", &t.id]);
            let points = t
                .points
                .iter()
                .map(|p| {
                    report.epsilon_spent_per_point.push(cfg.epsilon);
                    unproject(
                        planar_laplace_sample(project(*p, origin), cfg.epsilon, &mut rng),
                        origin,
                    )
                })
                .collect();
            (
                Trajectory {
                    id: t.id.clone(),
                    points,
                    label: t.label,
                },
                report,
            )
        }
        PrivacyMode::TrajectoryBased => {
            let mut rng = seeds::stream(cfg.seed, &["perturb", &t.id]);
            let eps_test = cfg.predictive.test_fraction * cfg.epsilon;
            let eps_noise = (1.0 - cfg.predictive.test_fraction) * cfg.epsilon;
            let mut points = Vec::with_capacity(t.points.len());
            let mut last_reported: Option<PlanarPoint> = None;
            for p in &t.points {
                let truth = project(*p, origin);
                let reported = match last_reported {
                    None => {
                        report.epsilon_spent_per_point.push(eps_noise);
                        planar_laplace_sample(truth, eps_noise, &mut rng)
                    }
                    Some(prediction) => {
                        let noisy_dist =
                            truth.dist(&prediction) + laplace_scalar(1.0 / eps_test, &mut rng);
                        if noisy_dist <= cfg.predictive.threshold_l {
                            report.n_predicted += 1;
                            report.epsilon_spent_per_point.push(eps_test);
                            prediction
                        } else {
                            report.epsilon_spent_per_point.push(eps_test + eps_noise);
                            planar_laplace_sample(truth, eps_noise, &mut rng)
                        }
                    }
                };
                last_reported = Some(reported);
                points.push(unproject(reported, origin));
            }
            (
                Trajectory {
                    id: t.id.clone(),
                    points,
                    label: t.label,
                },
                report,
            )
        }
    }
}

/// Perturb a whole corpus. The feasibility bbox and projection origin are
/// carried over unchanged: the service area does not move because reports are
/// noisy.
pub fn perturb_corpus(corpus: &Corpus, cfg: &PrivacyConfig) -> (Corpus, Vec<PerturbationReport>) {
    use rayon::prelude::*;
    let results: Vec<(Trajectory, PerturbationReport)> = corpus
        .trajectories
        .par_iter()
        .map(|t| perturb_trajectory(t, cfg, corpus.origin))
        .collect();
    let (trajectories, reports) = results.into_iter().unzip();
    (
        Corpus {
            trajectories,
            bbox: corpus.bbox,
            origin: corpus.origin,
        },
        reports,
    )
}

/// CDF of the planar Laplace radius, `1 - (1 + eps r) e^(-eps r)`.
pub fn radial_cdf(epsilon: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 + epsilon * r) * (-epsilon * r).exp()
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &r) in samples.iter().enumerate() {
        let f = cdf(r);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    d
}

/// Asymptotic KS critical value at significance `alpha` for sample size `n`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Result of the empirical geo-indistinguishability audit.
#[derive(Debug, Clone, Copy)]
pub struct GeoIndAudit {
    /// Max over qualifying bins of `|log ratio| - eps * d`; at most
    /// statistical slack when the mechanism is correct.
    pub max_violation: f64,
    /// The bound `eps * d(x, x')` the mechanism must respect.
    pub bound: f64,
    /// Bins with at least `min_hits` samples from both centers.
    pub qualifying_bins: usize,
}

/// Statistical audit of the defining inequality: sample the mechanism from two
/// centers `d_m` apart, histogram both output clouds, and compare binned
/// log-density ratios against `eps * d`.
pub fn geo_indistinguishability_check(
    epsilon: f64,
    d_m: f64,
    n_samples: usize,
    bin_m: f64,
    min_hits: u64,
    seed: u64,
) -> GeoIndAudit {
    let a = PlanarPoint::new(-d_m / 2.0, 0.0);
    let b = PlanarPoint::new(d_m / 2.0, 0.0);
    let mut counts: std::collections::HashMap<(i64, i64), (u64, u64)> =
        std::collections::HashMap::new();
    let mut rng = seeds::stream(seed, &["geo-ind-audit"]);
    for _ in 0..n_samples {
        let z = planar_laplace_sample(a, epsilon, &mut rng);
        let key = ((z.x / bin_m).floor() as i64, (z.y / bin_m).floor() as i64);
        counts.entry(key).or_default().0 += 1;
    }
    for _ in 0..n_samples {
        let z = planar_laplace_sample(b, epsilon, &mut rng);
        let key = ((z.x / bin_m).floor() as i64, (z.y / bin_m).floor() as i64);
        counts.entry(key).or_default().1 += 1;
    }
    let bound = epsilon * d_m;
    let mut max_violation = f64::NEG_INFINITY;
    let mut qualifying = 0usize;
    for &(ca, cb) in counts.values() {
        if ca >= min_hits && cb >= min_hits {
            qualifying += 1;
            let log_ratio = ((ca as f64) / (cb as f64)).ln().abs();
            max_violation = max_violation.max(log_ratio - bound);
        }
    }
    GeoIndAudit {
        max_violation,
        bound,
        qualifying_bins: qualifying,
    }
}
