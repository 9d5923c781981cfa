//! Sequential collaborative-recommendation simulator.
//!
//! The library models a ratings database that grows one user per time step,
//! where existing users keep revealing item ratings over time and a new user
//! asks for a prediction of an item they have not rated. The prediction is a
//! cosine-type k-nearest-neighbor estimate over corated items, with a
//! penalty that down-weights recent entrants.
//!
//! Modules map onto the moving parts of that pipeline:
//!
//! - [`model`]: rating vectors, item masks, nested mask sequences, database
//!   snapshots.
//! - [`similarity`]: corating-aware cosine similarity, penalties, smoothing,
//!   and the rating value that maximizes similarity.
//! - [`estimator`]: neighbor selection and the k-NN estimate with its
//!   degenerate-case conventions.
//! - [`generators`]: seeded scenario generation (latent users, mask and
//!   reveal processes).
//! - [`theory`]: closed-form quantities (true regression, non-corating
//!   probabilities, error-bound terms, neighbor-count schedules).
//! - [`experiments`]: Monte Carlo harness for mean-absolute-error curves,
//!   rate fitting, and independent brute-force oracles.
//! - [`config`], [`fixture`], [`report`]: scenario files, snapshot fixture
//!   files, and CSV/plot-data emission with run manifests.
//!
//! All randomness flows from a single 64-bit seed through content-addressed
//! substreams (see [`rng`]), so every result is reproducible bit-for-bit.

pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod fixture;
pub mod generators;
pub mod model;
pub mod report;
pub mod rng;
pub mod similarity;
pub mod theory;

pub use error::{Error, Result};
