//! Domain types: rating vectors, item masks, user trajectories, and the
//! observable database snapshot.
//!
//! Ratings live in `{0} ∪ [1, s]`: a literal `0.0` means "not rated" and is
//! structural, never a sentinel. Item indices are 1-based in masks and in
//! the external fixture format; dense storage is 0-based.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::similarity;

/// The rating domain: `d` rateable items plus one prediction target, with
/// scores in `{0} ∪ [1, s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    d: usize,
    s: f64,
}

impl RatingScale {
    pub fn new(d: usize, s: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::Scale("item count d must be >= 1".into()));
        }
        if !s.is_finite() || s < 1.0 {
            return Err(Error::Scale(format!(
                "maximal rating s must be >= 1, got {s}"
            )));
        }
        Ok(RatingScale { d, s })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// A length-d vector over `{0} ∪ [1, s]`; zero encodes "not rated" or
/// "not corated".
#[derive(Debug, Clone, PartialEq)]
pub struct RatingVector(pub(crate) Vec<f64>);

impl RatingVector {
    /// Validating constructor: every entry must be exactly `0.0` or lie in
    /// `[1, s]`.
    pub fn new(entries: Vec<f64>, scale: &RatingScale) -> Result<Self> {
        if entries.len() != scale.d() {
            return Err(Error::Ratings(format!(
                "expected {} entries, got {}",
                scale.d(),
                entries.len()
            )));
        }
        for (idx, &v) in entries.iter().enumerate() {
            if v != 0.0 && !(1.0..=scale.s()).contains(&v) {
                return Err(Error::Ratings(format!(
                    "entry {} = {v} is neither 0 nor in [1, {}]",
                    idx + 1,
                    scale.s()
                )));
            }
        }
        Ok(RatingVector(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Entry for item `j` (1-based).
    pub fn entry(&self, j: usize) -> f64 {
        self.0[j - 1]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// 1-based indices of nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// The vector scaled by `lambda > 0`. The zero pattern is preserved;
    /// scaled entries may leave `[1, s]`, which is fine for query vectors
    /// (the estimator only uses norms and angles).
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Ratings(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        Ok(RatingVector(self.0.iter().map(|v| v * lambda).collect()))
    }
}

/// A subset of the item indices `{1, ..., d}`.
///
/// Emptiness is allowed (intersections may be empty); call sites that need
/// a non-empty mask (the new user's mask, the first step of a trajectory)
/// enforce it themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet(BTreeSet<usize>);

impl MaskSet {
    pub fn new(items: impl IntoIterator<Item = usize>, d: usize) -> Result<Self> {
        let set: BTreeSet<usize> = items.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&j| j < 1 || j > d) {
            return Err(Error::Mask(format!("item {bad} outside 1..={d}")));
        }
        Ok(MaskSet(set))
    }

    pub fn empty() -> Self {
        MaskSet(BTreeSet::new())
    }

    pub fn full(d: usize) -> Self {
        MaskSet((1..=d).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains(&j)
    }

    pub fn is_full(&self, d: usize) -> bool {
        self.0.len() == d
    }

    pub fn is_subset(&self, other: &MaskSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn intersection(&self, other: &MaskSet) -> MaskSet {
        MaskSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn union(&self, other: &MaskSet) -> MaskSet {
        MaskSet(self.0.union(&other.0).copied().collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub(crate) fn insert(&mut self, j: usize) {
        self.0.insert(j);
    }
}

/// A nested mask sequence `M^1 ⊆ M^2 ⊆ ...` for one user.
///
/// Steps are materialized up to the first full mask; from there on the
/// sequence is implicitly `{1, ..., d}`. A sequence that never saturates
/// within its materialized steps is still usable up to its horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    steps: Vec<MaskSet>,
    d: usize,
}

impl MaskSequence {
    pub fn new(steps: Vec<MaskSet>, d: usize) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::MaskSequence("at least one step required".into()));
        }
        if steps[0].is_empty() {
            return Err(Error::MaskSequence("first mask must be non-empty".into()));
        }
        for (j, pair) in steps.windows(2).enumerate() {
            if !pair[0].is_subset(&pair[1]) {
                return Err(Error::MaskSequence(format!(
                    "step {} is not contained in step {}",
                    j + 1,
                    j + 2
                )));
            }
        }
        if let Some(&bad) = steps
            .iter()
            .flat_map(|m| m.0.iter())
            .find(|&&j| j < 1 || j > d)
        {
            return Err(Error::MaskSequence(format!("item {bad} outside 1..={d}")));
        }
        // Drop redundant trailing copies of the full mask.
        let mut steps = steps;
        if let Some(first_full) = steps.iter().position(|m| m.is_full(d)) {
            steps.truncate(first_full + 1);
        }
        Ok(MaskSequence { steps, d })
    }

    /// Constant sequence at the full item set (users who rate everything on
    /// entry).
    pub fn saturated(d: usize) -> Self {
        MaskSequence {
            steps: vec![MaskSet::full(d)],
            d,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Time of first full mask (1-based), if reached.
    pub fn saturation(&self) -> Option<usize> {
        self.steps
            .last()
            .filter(|m| m.is_full(self.d))
            .map(|_| self.steps.len())
    }

    /// Number of materialized steps.
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// The mask after `j >= 1` time steps in the system.
    pub fn mask_at(&self, j: usize) -> Result<&MaskSet> {
        assert!(j >= 1, "mask time is 1-based");
        if j <= self.steps.len() {
            return Ok(&self.steps[j - 1]);
        }
        if self.saturation().is_some() {
            return Ok(self.steps.last().expect("non-empty steps"));
        }
        Err(Error::MaskHorizon {
            want: j,
            have: self.steps.len(),
        })
    }
}

/// A database user's latent data: full ratings, target rating, and the
/// nested mask sequence describing how they reveal ratings over time.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTrajectory {
    pub full_ratings: Vec<f64>,
    pub target: f64,
    pub masks: MaskSequence,
}

impl UserTrajectory {
    /// `full_ratings` must lie in `[1, s]^d`; the target only has to be
    /// positive and finite (noise models may widen its range beyond `s`,
    /// with the generator enforcing the scenario's effective bounds).
    pub fn new(
        full_ratings: Vec<f64>,
        target: f64,
        masks: MaskSequence,
        scale: &RatingScale,
    ) -> Result<Self> {
        if full_ratings.len() != scale.d() {
            return Err(Error::Ratings(format!(
                "expected {} latent ratings, got {}",
                scale.d(),
                full_ratings.len()
            )));
        }
        if let Some(&bad) = full_ratings
            .iter()
            .find(|&&v| !(1.0..=scale.s()).contains(&v))
        {
            return Err(Error::Ratings(format!(
                "latent rating {bad} outside [1, {}]",
                scale.s()
            )));
        }
        if !target.is_finite() || target <= 0.0 {
            return Err(Error::Ratings(format!("target {target} must be positive")));
        }
        if masks.d() != scale.d() {
            return Err(Error::MaskSequence(format!(
                "mask universe {} does not match d = {}",
                masks.d(),
                scale.d()
            )));
        }
        Ok(UserTrajectory {
            full_ratings,
            target,
            masks,
        })
    }
}

/// The new user: latent full ratings plus the mask of items they revealed.
#[derive(Debug, Clone, PartialEq)]
pub struct NewUser {
    pub full: Vec<f64>,
    pub mask: MaskSet,
}

impl NewUser {
    pub fn new(full: Vec<f64>, mask: MaskSet, scale: &RatingScale) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::Mask("new-user mask must be non-empty".into()));
        }
        if full.len() != scale.d() {
            return Err(Error::Ratings(format!(
                "expected {} latent ratings, got {}",
                scale.d(),
                full.len()
            )));
        }
        Ok(NewUser { full, mask })
    }

    pub fn masked(&self) -> RatingVector {
        masked_new_user(&self.full, &self.mask).expect("mask checked non-empty")
    }
}

/// Keeps `full[j]` where `j` is rated by both the user and the new user,
/// zero elsewhere. The intersection may be empty, giving the zero vector.
pub fn mask_vector(full: &[f64], user_mask: &MaskSet, new_user_mask: &MaskSet) -> RatingVector {
    let entries = full
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let j = idx + 1;
            if user_mask.contains(j) && new_user_mask.contains(j) {
                v
            } else {
                0.0
            }
        })
        .collect();
    RatingVector(entries)
}

/// The observable new-user vector: `full[j]` inside the mask, zero outside.
pub fn masked_new_user(full: &[f64], new_user_mask: &MaskSet) -> Result<RatingVector> {
    if new_user_mask.is_empty() {
        return Err(Error::Mask("new-user mask must be non-empty".into()));
    }
    let entries = full
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            if new_user_mask.contains(idx + 1) {
                v
            } else {
                0.0
            }
        })
        .collect();
    Ok(RatingVector(entries))
}

/// The state visible to the estimator at time `n`: masked rows, the reveal
/// set with its targets, corating penalties, and the query user.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseSnapshot {
    scale: RatingScale,
    rows: Vec<RatingVector>,
    penalties: Vec<f64>,
    reveal: BTreeSet<usize>,
    targets: BTreeMap<usize, f64>,
    query: RatingVector,
    query_mask: MaskSet,
}

impl DatabaseSnapshot {
    fn validate(self) -> Result<Self> {
        let n = self.rows.len();
        if self.reveal.is_empty() {
            return Err(Error::Snapshot("reveal set must be non-empty".into()));
        }
        if let Some(&bad) = self.reveal.iter().find(|&&i| i < 1 || i > n) {
            return Err(Error::Snapshot(format!(
                "reveal user {bad} outside 1..={n}"
            )));
        }
        let revealed: BTreeSet<usize> = self.targets.keys().copied().collect();
        if revealed != self.reveal {
            return Err(Error::Snapshot(
                "target values must be given exactly on the reveal set".into(),
            ));
        }
        if self.query.is_zero() {
            return Err(Error::Snapshot("new-user vector must be nonzero".into()));
        }
        if self.query.norm() < 1.0 - 1e-12 {
            return Err(Error::Snapshot(format!(
                "new-user vector norm {} < 1",
                self.query.norm()
            )));
        }
        for (idx, p) in self.penalties.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Snapshot(format!(
                    "penalty for user {} is {p}, outside [0, 1]",
                    idx + 1
                )));
            }
        }
        Ok(self)
    }

    /// Assembles the snapshot at time `n` from user trajectories: row `i`
    /// uses the mask after `n + 1 - i` steps in the system.
    pub fn build(
        users: &[UserTrajectory],
        reveal: &BTreeSet<usize>,
        new_user: &NewUser,
        n: usize,
        scale: &RatingScale,
    ) -> Result<Self> {
        if users.len() != n {
            return Err(Error::Snapshot(format!(
                "expected {n} users at time {n}, got {}",
                users.len()
            )));
        }
        let mut rows = Vec::with_capacity(n);
        let mut penalties = Vec::with_capacity(n);
        for (idx, user) in users.iter().enumerate() {
            let i = idx + 1;
            let mask_i = user.masks.mask_at(n + 1 - i)?;
            rows.push(mask_vector(&user.full_ratings, mask_i, &new_user.mask));
            penalties.push(similarity::penalty(mask_i, &new_user.mask)?);
        }
        let targets = reveal
            .iter()
            .filter(|&&i| i >= 1 && i <= n)
            .map(|&i| (i, users[i - 1].target))
            .collect();
        DatabaseSnapshot {
            scale: *scale,
            rows,
            penalties,
            reveal: reveal.clone(),
            targets,
            query: masked_new_user(&new_user.full, &new_user.mask)?,
            query_mask: new_user.mask.clone(),
        }
        .validate()
    }

    /// Builds a snapshot from per-user rated items observed at one instant
    /// (the fixture-file view: no time dynamics, each user's mask is their
    /// currently rated set).
    pub fn from_rated_rows(
        scale: &RatingScale,
        users: &[(BTreeMap<usize, f64>, Option<f64>)],
        new_user_items: &BTreeMap<usize, f64>,
    ) -> Result<Self> {
        let d = scale.d();
        let new_mask = MaskSet::new(new_user_items.keys().copied(), d)?;
        if new_mask.is_empty() {
            return Err(Error::Snapshot(
                "new user must rate at least one item".into(),
            ));
        }
        let mut full_query = vec![0.0; d];
        for (&j, &v) in new_user_items {
            full_query[j - 1] = v;
        }
        let query = RatingVector::new(full_query, scale)?;

        let mut rows = Vec::with_capacity(users.len());
        let mut penalties = Vec::with_capacity(users.len());
        let mut reveal = BTreeSet::new();
        let mut targets = BTreeMap::new();
        for (idx, (items, target)) in users.iter().enumerate() {
            let i = idx + 1;
            let mask_i = MaskSet::new(items.keys().copied(), d)?;
            if mask_i.is_empty() {
                return Err(Error::Snapshot(format!("user {i} has no rated items")));
            }
            let mut full = vec![0.0; d];
            for (&j, &v) in items {
                full[j - 1] = v;
            }
            RatingVector::new(full.clone(), scale)?;
            rows.push(mask_vector(&full, &mask_i, &new_mask));
            penalties.push(similarity::penalty(&mask_i, &new_mask)?);
            if let Some(y) = *target {
                reveal.insert(i);
                targets.insert(i, y);
            }
        }
        DatabaseSnapshot {
            scale: *scale,
            rows,
            penalties,
            reveal,
            targets,
            query,
            query_mask: new_mask,
        }
        .validate()
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.scale.d()
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    /// Masked row of user `i` (1-based).
    pub fn row(&self, i: usize) -> &RatingVector {
        &self.rows[i - 1]
    }

    /// Corating penalty of user `i` (1-based).
    pub fn penalty(&self, i: usize) -> f64 {
        self.penalties[i - 1]
    }

    pub fn reveal(&self) -> &BTreeSet<usize> {
        &self.reveal
    }

    pub fn target(&self, i: usize) -> Option<f64> {
        self.targets.get(&i).copied()
    }

    pub fn query(&self) -> &RatingVector {
        &self.query
    }

    pub fn query_mask(&self) -> &MaskSet {
        &self.query_mask
    }

    /// The same snapshot with the query vector scaled by `lambda > 0`.
    ///
    /// Rows and penalties are untouched; the scaled query may leave the
    /// rating domain, which the estimator tolerates (it is positively
    /// homogeneous in the query).
    pub fn scaled_query(&self, lambda: f64) -> Result<Self> {
        let mut out = self.clone();
        out.query = self.query.scaled(lambda)?;
        Ok(out)
    }
}
