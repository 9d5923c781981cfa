//! The cosine-type k-nearest-neighbor regression estimate.
//!
//! Given a snapshot, the estimator ranks revealed users by the penalized
//! similarity to the query, keeps the top `k` (ties broken by ascending
//! user index), and averages their target-to-norm ratios:
//!
//! ```text
//! value = ‖x*‖ · (1/k) · Σ_selected  Y_i / ‖X_i‖
//! ```
//!
//! Degenerate-case conventions:
//! - if the reveal set has fewer than `k` members, the selection is empty
//!   and the estimate is 0;
//! - all-zero rows never enter the selection (their would-be `0 · ∞`
//!   contribution is 0);
//! - the estimate always divides by `k`, so the weights sum to at most 1
//!   and to exactly 1 when `k` eligible rows exist.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::DatabaseSnapshot;
use crate::similarity::{penalized_similarity, sbar, SmoothingPsi};

/// One selected neighbor with its ranking diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    /// 1-based user index in the snapshot.
    pub user: usize,
    /// Penalized similarity `ψ(p) · sbar` used for ranking.
    pub similarity: f64,
    /// Unpenalized corated cosine.
    pub sbar: f64,
    /// Corating penalty of this user.
    pub penalty: f64,
}

/// The ranked neighbor set for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSelection {
    /// Neighbors by decreasing similarity, ties by ascending index.
    pub neighbors: Vec<Neighbor>,
    /// The requested neighbor count (the weight denominator).
    pub k: usize,
}

impl NeighborSelection {
    pub fn indices(&self) -> Vec<usize> {
        self.neighbors.iter().map(|n| n.user).collect()
    }

    /// Σ of the selection's weights, each `1/k`; at most 1 by construction.
    pub fn weight_sum(&self) -> f64 {
        self.neighbors.len() as f64 / self.k as f64
    }
}

/// Why an estimate came out as the conventional 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateReason {
    /// Fewer revealed users than requested neighbors.
    RevealSetSmallerThanK,
    /// Every revealed row is the zero vector.
    AllRowsZero,
}

impl DegenerateReason {
    pub fn tag(self) -> &'static str {
        match self {
            DegenerateReason::RevealSetSmallerThanK => "reveal_set_smaller_than_k",
            DegenerateReason::AllRowsZero => "all_rows_zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// The estimate; 0 whenever `degenerate` is set.
    pub value: f64,
    pub selection: NeighborSelection,
    pub degenerate: Option<DegenerateReason>,
}

impl EstimateResult {
    pub fn degenerate_tag(&self) -> &'static str {
        self.degenerate.map_or("none", DegenerateReason::tag)
    }
}

fn rank_cmp(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    // Similarities are finite and non-negative, so total_cmp agrees with
    // the usual order; exact float ties fall through to the index rule.
    b.similarity
        .total_cmp(&a.similarity)
        .then(a.user.cmp(&b.user))
}

/// Ranks eligible revealed rows by penalized similarity and keeps the top
/// `k`. Empty when the reveal set is smaller than `k`.
pub fn select_neighbors(
    snapshot: &DatabaseSnapshot,
    k: usize,
    psi: SmoothingPsi,
) -> Result<NeighborSelection> {
    if k < 1 {
        return Err(Error::Estimator("k must be at least 1".into()));
    }
    if snapshot.reveal().len() < k {
        return Ok(NeighborSelection {
            neighbors: Vec::new(),
            k,
        });
    }
    let query = snapshot.query();
    let mut candidates: Vec<Neighbor> = snapshot
        .reveal()
        .iter()
        .filter(|&&i| !snapshot.row(i).is_zero())
        .map(|&i| {
            let row = snapshot.row(i);
            let p = snapshot.penalty(i);
            Neighbor {
                user: i,
                similarity: penalized_similarity(query, row, p, psi),
                sbar: sbar(query, row),
                penalty: p,
            }
        })
        .collect();
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, rank_cmp);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(rank_cmp);
    Ok(NeighborSelection {
        neighbors: candidates,
        k,
    })
}

/// The k-NN estimate with the conventions listed in the module docs.
pub fn estimate(
    snapshot: &DatabaseSnapshot,
    k: usize,
    psi: SmoothingPsi,
) -> Result<EstimateResult> {
    estimate_with_options(snapshot, k, psi, false)
}

/// Like [`estimate`], with an optional diagnostic variant that divides each
/// neighbor's contribution by its cosine (the plain estimate drops that
/// factor; asymptotically it does not matter). Rows with zero cosine
/// contribute nothing under the diagnostic variant.
pub fn estimate_with_options(
    snapshot: &DatabaseSnapshot,
    k: usize,
    psi: SmoothingPsi,
    cosine_corrected: bool,
) -> Result<EstimateResult> {
    let selection = select_neighbors(snapshot, k, psi)?;
    if snapshot.reveal().len() < k {
        return Ok(EstimateResult {
            value: 0.0,
            selection,
            degenerate: Some(DegenerateReason::RevealSetSmallerThanK),
        });
    }
    if selection.neighbors.is_empty() {
        return Ok(EstimateResult {
            value: 0.0,
            selection,
            degenerate: Some(DegenerateReason::AllRowsZero),
        });
    }
    let mut sum = 0.0;
    for neighbor in &selection.neighbors {
        let target = snapshot
            .target(neighbor.user)
            .expect("selected neighbors are revealed");
        let norm = snapshot.row(neighbor.user).norm();
        let mut contribution = target / norm;
        if cosine_corrected {
            contribution = if neighbor.sbar == 0.0 {
                0.0
            } else {
                contribution / neighbor.sbar
            };
        }
        sum += contribution;
    }
    Ok(EstimateResult {
        value: snapshot.query().norm() * sum / k as f64,
        selection,
        degenerate: None,
    })
}

/// Applies [`estimate`] along a stream of snapshots with a per-n neighbor
/// count. Errors when the schedule lacks an entry for some snapshot's n.
pub fn estimate_curve(
    snapshots: &[DatabaseSnapshot],
    schedule: &BTreeMap<usize, usize>,
    psi: SmoothingPsi,
) -> Result<Vec<EstimateResult>> {
    snapshots
        .iter()
        .map(|snap| {
            let k = *schedule
                .get(&snap.n())
                .ok_or(Error::ScheduleGap(snap.n()))?;
            estimate(snap, k, psi)
        })
        .collect()
}
