//! Workbench for quantifying the tradeoff between differential location
//! privacy and trajectory anomaly detection.
//!
//! The pipeline: build or ingest a trip corpus ([`trajectory`], [`porto`],
//! [`synth`]), fabricate malicious trips under a bounded-displacement attack
//! model ([`attack`]), obfuscate everything with epsilon-geo-indistinguishable
//! noise ([`privacy`]), run two anomaly detectors — Frechet-distance k-NN /
//! DBSCAN scoring ([`frechet`], [`dbscan`]) and a sequence autoencoder
//! ([`seq`]) — and measure detection quality as ROC/AUC over a grid of privacy
//! levels and attack intensities ([`eval`]).

pub mod attack;
pub mod dbscan;
pub mod error;
pub mod eval;
pub mod frechet;
pub mod geo;
pub mod lambert;
pub mod porto;
pub mod privacy;
pub mod seeds;
pub mod seq;
pub mod synth;
pub mod trajectory;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
