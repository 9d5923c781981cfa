//! Browser bindings for the simulation laboratory.
//!
//! Three interactive operations back the static demo page in `www/`:
//! a similarity playground for two rating vectors, the k-NN estimator over
//! an editable snapshot fixture, and a closed-form-versus-simulation
//! explorer for the non-corating probabilities. Every function takes plain
//! strings/numbers and returns a JSON string (`{"error": ...}` on bad
//! input), so the page needs no glue beyond `JSON.parse`.
//!
//! The crate also compiles natively, which is how its tests run.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use seqrec::estimator;
use seqrec::experiments;
use seqrec::fixture::parse_fixture_str;
use seqrec::model::{MaskSet, RatingScale, RatingVector};
use seqrec::similarity::{self, SmoothingPsi};

#[derive(Serialize)]
struct ErrorOut {
    error: String,
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value)
        .unwrap_or_else(|e| format!("{{\"error\":\"serialization failed: {e}\"}}"))
}

fn error_json(message: impl std::fmt::Display) -> String {
    json(&ErrorOut {
        error: message.to_string(),
    })
}

fn parse_vector(csv: &str) -> Result<Vec<f64>, String> {
    let entries: Result<Vec<f64>, _> = csv.split(',').map(|f| f.trim().parse::<f64>()).collect();
    entries.map_err(|e| format!("cannot parse vector `{csv}`: {e}"))
}

#[derive(Serialize)]
struct SimilarityOut {
    corated_items: Vec<usize>,
    sbar: f64,
    penalty: f64,
    similarity: f64,
    /// Closed-form target value maximizing the extended similarity, when
    /// the two vectors share the same support.
    best_extension: Option<f64>,
}

/// Similarity playground: two comma-separated rating vectors (0 = not
/// rated), the smoothing name, and a target value for the extension.
///
/// The first vector plays the new user (query); the penalty is the share
/// of its rated items the second vector has corated.
#[wasm_bindgen]
pub fn similarity_report(query_csv: &str, row_csv: &str, target: f64, psi: &str) -> String {
    let inner = || -> Result<SimilarityOut, String> {
        let psi: SmoothingPsi = psi.parse().map_err(|e| format!("{e}"))?;
        let q = parse_vector(query_csv)?;
        let r = parse_vector(row_csv)?;
        if q.len() != r.len() {
            return Err(format!("vector lengths differ: {} vs {}", q.len(), r.len()));
        }
        let d = q.len();
        let s = q.iter().chain(&r).fold(1.0f64, |acc, &v| acc.max(v));
        let scale = RatingScale::new(d, s).map_err(|e| e.to_string())?;
        let query = RatingVector::new(q, &scale).map_err(|e| e.to_string())?;
        let row = RatingVector::new(r, &scale).map_err(|e| e.to_string())?;
        let query_mask = MaskSet::new(query.support(), d).map_err(|e| e.to_string())?;
        if query_mask.is_empty() {
            return Err("the query must rate at least one item".into());
        }
        let row_mask = MaskSet::new(row.support(), d).map_err(|e| e.to_string())?;
        let sbar = similarity::sbar(&query, &row);
        let penalty = similarity::penalty(&row_mask, &query_mask).map_err(|e| e.to_string())?;
        let best_extension = if target > 0.0 {
            similarity::best_rating_extension(&query, &row, target).ok()
        } else {
            None
        };
        Ok(SimilarityOut {
            corated_items: query
                .support()
                .into_iter()
                .filter(|&j| row.entry(j) != 0.0)
                .collect(),
            sbar,
            penalty,
            similarity: psi.apply(penalty) * sbar,
            best_extension,
        })
    };
    match inner() {
        Ok(out) => json(&out),
        Err(message) => error_json(message),
    }
}

#[derive(Serialize)]
struct NeighborOut {
    user: usize,
    sbar: f64,
    penalty: f64,
    similarity: f64,
    target: f64,
}

#[derive(Serialize)]
struct EstimateOut {
    value: f64,
    degenerate: String,
    query_norm: f64,
    reveal_size: usize,
    neighbors: Vec<NeighborOut>,
}

/// Runs the k-NN estimator over fixture text (see the fixture format in
/// the library docs); returns the estimate, the degenerate tag, and the
/// ranked neighbors.
#[wasm_bindgen]
pub fn estimate_fixture(fixture_text: &str, k: usize, psi: &str) -> String {
    let inner = || -> Result<EstimateOut, String> {
        let psi: SmoothingPsi = psi.parse().map_err(|e| format!("{e}"))?;
        let snapshot = parse_fixture_str(fixture_text).map_err(|e| e.to_string())?;
        let result = estimator::estimate(&snapshot, k, psi).map_err(|e| e.to_string())?;
        Ok(EstimateOut {
            value: result.value,
            degenerate: result.degenerate_tag().to_string(),
            query_norm: snapshot.query().norm(),
            reveal_size: snapshot.reveal().len(),
            neighbors: result
                .selection
                .neighbors
                .iter()
                .map(|n| NeighborOut {
                    user: n.user,
                    sbar: n.sbar,
                    penalty: n.penalty,
                    similarity: n.similarity,
                    target: snapshot.target(n.user).unwrap_or(f64::NAN),
                })
                .collect(),
        })
    };
    match inner() {
        Ok(out) => json(&out),
        Err(message) => error_json(message),
    }
}

#[derive(Serialize)]
struct AlphaPoint {
    i: usize,
    closed_form: f64,
    mc: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct AlphaOut {
    d: usize,
    n: usize,
    trials: usize,
    points: Vec<AlphaPoint>,
    max_abs_z: f64,
}

/// Closed-form non-corating probabilities against a fresh simulation, for
/// every user index at time `n` under the incremental 4-item mask process.
#[wasm_bindgen]
pub fn alpha_profile(d: usize, n: usize, trials: usize, seed: u64) -> String {
    let inner = || -> Result<AlphaOut, String> {
        if n > 200 {
            return Err("n capped at 200 for the in-browser explorer".into());
        }
        if trials > 200_000 {
            return Err("trials capped at 200000 for the in-browser explorer".into());
        }
        let rows = experiments::validate_alpha(n, d, trials, seed).map_err(|e| e.to_string())?;
        let max_abs_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0f64, f64::max);
        Ok(AlphaOut {
            d,
            n,
            trials,
            points: rows
                .into_iter()
                .map(|r| AlphaPoint {
                    i: r.i,
                    closed_form: r.closed_form,
                    mc: r.mc,
                    stderr: r.stderr,
                })
                .collect(),
            max_abs_z,
        })
    };
    match inner() {
        Ok(out) => json(&out),
        Err(message) => error_json(message),
    }
}

/// Crate version plus the RNG algorithm id stamped into manifests.
#[wasm_bindgen]
pub fn version() -> String {
    format!(
        "seqrec-wasm {} (rng: {})",
        env!("CARGO_PKG_VERSION"),
        seqrec::rng::ALGORITHM_ID
    )
}

/// The bundled worked-example fixture, for pre-filling the demo page.
#[wasm_bindgen]
pub fn table1_fixture() -> String {
    seqrec::fixture::TABLE1.to_string()
}
