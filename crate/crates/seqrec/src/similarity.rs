//! Corating-aware cosine similarity, penalties, and smoothing.
//!
//! The base similarity restricts the cosine to items rated by both vectors,
//! so non-answers never contribute. The penalized similarity multiplies by
//! a smoothed fraction of the query's items the database user has corated,
//! which keeps fresh entrants (few rated items, hence deceptively aligned)
//! from crowding out established users.

use crate::error::{Error, Result};
use crate::model::{MaskSet, RatingVector};

/// Smoothing applied to the corating penalty before it multiplies the
/// similarity. Both choices are non-decreasing maps of [0, 1] into [0, 1]
/// with value < 1 at 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmoothingPsi {
    /// No smoothing: the penalty enters linearly.
    #[default]
    Identity,
    /// Square-root smoothing; lifts small penalties, promoting users with
    /// few but well-aligned corated items.
    Sqrt,
}

impl SmoothingPsi {
    pub fn apply(self, p: f64) -> f64 {
        match self {
            SmoothingPsi::Identity => p,
            SmoothingPsi::Sqrt => p.sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SmoothingPsi::Identity => "identity",
            SmoothingPsi::Sqrt => "sqrt",
        }
    }
}

impl std::str::FromStr for SmoothingPsi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(SmoothingPsi::Identity),
            "sqrt" => Ok(SmoothingPsi::Sqrt),
            other => Err(Error::Config {
                key: "psi".into(),
                message: format!("unknown smoothing `{other}`; expected identity or sqrt"),
            }),
        }
    }
}

impl std::fmt::Display for SmoothingPsi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Cosine similarity restricted to corated items.
///
/// With `J = {j : x_j != 0 and y_j != 0}`, returns
/// `Σ_J x_j y_j / (sqrt(Σ_J x_j²) · sqrt(Σ_J y_j²))`, and 0 when `J` is
/// empty. Symmetric, in `[0, 1]` on the rating domain.
pub fn sbar(x: &RatingVector, y: &RatingVector) -> f64 {
    debug_assert_eq!(x.len(), y.len(), "dimension mismatch");
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for (&a, &b) in x.as_slice().iter().zip(y.as_slice()) {
        if a != 0.0 && b != 0.0 {
            dot += a * b;
            nx += a * a;
            ny += b * b;
        }
    }
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    (dot / (nx.sqrt() * ny.sqrt())).min(1.0)
}

/// Fraction of the new user's items the database user has rated:
/// `|user_mask ∩ new_user_mask| / |new_user_mask|`.
pub fn penalty(user_mask_at_time: &MaskSet, new_user_mask: &MaskSet) -> Result<f64> {
    if new_user_mask.is_empty() {
        return Err(Error::Mask(
            "penalty needs a non-empty new-user mask".into(),
        ));
    }
    let shared = user_mask_at_time.intersection(new_user_mask).len();
    Ok(shared as f64 / new_user_mask.len() as f64)
}

/// The similarity the estimator ranks by: `ψ(p) · sbar(x*, row)`.
///
/// `p` must lie in [0, 1] (it is a set-cardinality ratio at every call
/// site).
pub fn penalized_similarity(
    x_star: &RatingVector,
    row: &RatingVector,
    p: f64,
    psi: SmoothingPsi,
) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "penalty {p} outside [0, 1]");
    psi.apply(p) * sbar(x_star, row)
}

/// The positive target value `y` maximizing the similarity between
/// `(x*, y)` and `(row*, y_i)`, for two vectors sharing the same nonzero
/// support: `‖x*‖ · y_i / (‖row*‖ · cos(x*, row*))`.
pub fn best_rating_extension(
    x_star: &RatingVector,
    row_star: &RatingVector,
    y_i: f64,
) -> Result<f64> {
    if x_star.is_zero() || row_star.is_zero() {
        return Err(Error::Estimator(
            "rating extension needs nonzero vectors".into(),
        ));
    }
    if x_star.support() != row_star.support() {
        return Err(Error::Estimator(
            "rating extension needs vectors with identical support".into(),
        ));
    }
    if !y_i.is_finite() || y_i <= 0.0 {
        return Err(Error::Estimator(format!("target {y_i} must be positive")));
    }
    let cos = sbar(x_star, row_star);
    if cos == 0.0 {
        return Err(Error::Estimator("zero cosine has no maximizer".into()));
    }
    Ok(x_star.norm() * y_i / (row_star.norm() * cos))
}

/// Residual of the cosine-distance identity
/// `cos(z, z') = 1 - ‖z - z'‖² / 2` for unit vectors with identical
/// support. Algebraically exact; the residual is floating-point noise.
pub fn cosine_distance_identity_check(z: &RatingVector, z2: &RatingVector) -> Result<f64> {
    const UNIT_TOL: f64 = 1e-9;
    for (name, v) in [("first", z), ("second", z2)] {
        if (v.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::Estimator(format!(
                "{name} vector has norm {}, expected 1",
                v.norm()
            )));
        }
    }
    if z.support() != z2.support() {
        return Err(Error::Estimator(
            "identity check needs identical supports".into(),
        ));
    }
    let cos = sbar(z, z2);
    let dist_sq: f64 = z
        .as_slice()
        .iter()
        .zip(z2.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((cos - (1.0 - 0.5 * dist_sq)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatingScale;
    use crate::rng::{Purpose, RngStream, StreamKey};

    fn vector(entries: &[f64]) -> RatingVector {
        let scale = RatingScale::new(entries.len(), 100.0).unwrap();
        RatingVector::new(entries.to_vec(), &scale).unwrap()
    }

    // Worked values for the Table-1 pairs, exact closed forms:
    //   cos((3,3,4,5),(6,7,8,9))  = 116 / sqrt(59 * 230)
    //   cos((3,3,4),(10,2,7))     =  64 / sqrt(34 * 153)
    const BOB_JIM: f64 = 0.9957906987396443; // 116/sqrt(13570)
    const BOB_LUCY: f64 = 0.8873496861948832; // 64/sqrt(5202)

    #[test]
    fn sbar_bob_jim() {
        let got = sbar(
            &vector(&[0.0, 3.0, 3.0, 4.0, 5.0]),
            &vector(&[0.0, 6.0, 7.0, 8.0, 9.0]),
        );
        assert!((got - 116.0 / (59.0f64 * 230.0).sqrt()).abs() < 1e-15);
        assert!((got - BOB_JIM).abs() < 1e-12);
    }

    #[test]
    fn sbar_bob_lucy() {
        let got = sbar(
            &vector(&[0.0, 3.0, 3.0, 4.0, 5.0]),
            &vector(&[3.0, 10.0, 2.0, 7.0, 0.0]),
        );
        assert!((got - 64.0 / (34.0f64 * 153.0).sqrt()).abs() < 1e-15);
        assert!((got - BOB_LUCY).abs() < 1e-12);
        assert!((got - 0.89).abs() < 0.005);
    }

    #[test]
    fn sbar_self_is_one() {
        let x = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
        assert!((sbar(&x, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sbar_disjoint_support_is_zero() {
        let x = vector(&[1.0, 0.0, 0.0]);
        let y = vector(&[0.0, 1.0, 0.0]);
        assert_eq!(sbar(&x, &y), 0.0);
        assert_eq!(sbar(&vector(&[0.0; 3]), &vector(&[0.0; 3])), 0.0);
    }

    #[test]
    fn sbar_symmetry_and_range_random() {
        let mut rng = RngStream::new(91, StreamKey::new(0, 0, Purpose::Ratings));
        for _ in 0..500 {
            let d = 2 + rng.below(8) as usize;
            let draw = |rng: &mut RngStream| {
                let entries: Vec<f64> = (0..d)
                    .map(|_| {
                        if rng.bernoulli(0.3) {
                            0.0
                        } else {
                            rng.uniform(1.0, 10.0)
                        }
                    })
                    .collect();
                vector(&entries)
            };
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            let a = sbar(&x, &y);
            let b = sbar(&y, &x);
            assert_eq!(a, b);
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn sbar_scale_invariance() {
        let mut rng = RngStream::new(17, StreamKey::new(1, 0, Purpose::Ratings));
        for _ in 0..200 {
            let x = vector(&[
                rng.uniform(1.0, 10.0),
                0.0,
                rng.uniform(1.0, 10.0),
                rng.uniform(1.0, 10.0),
            ]);
            let y = vector(&[
                rng.uniform(1.0, 10.0),
                rng.uniform(1.0, 10.0),
                0.0,
                rng.uniform(1.0, 10.0),
            ]);
            let lambda = rng.uniform(0.1, 5.0);
            let scaled = x.scaled(lambda).unwrap();
            assert!((sbar(&scaled, &y) - sbar(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_examples() {
        let d = 5;
        let m = |items: &[usize]| MaskSet::new(items.iter().copied(), d).unwrap();
        // Superset of the new-user mask.
        assert_eq!(penalty(&MaskSet::full(d), &m(&[2, 3])).unwrap(), 1.0);
        // Disjoint.
        assert_eq!(penalty(&m(&[1]), &m(&[2, 3])).unwrap(), 0.0);
        // 3 of 4 corated.
        assert_eq!(penalty(&m(&[2, 3, 4]), &m(&[2, 3, 4, 5])).unwrap(), 0.75);
        // Empty new-user mask rejected.
        assert!(penalty(&m(&[1]), &MaskSet::empty()).is_err());
    }

    #[test]
    fn penalized_similarity_cases() {
        let x = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
        let lucy = vector(&[3.0, 10.0, 2.0, 7.0, 0.0]);
        // p = 1 with identity reduces to sbar.
        assert_eq!(
            penalized_similarity(&x, &lucy, 1.0, SmoothingPsi::Identity),
            sbar(&x, &lucy)
        );
        // p = 0 kills any similarity.
        assert_eq!(
            penalized_similarity(&x, &lucy, 0.0, SmoothingPsi::Identity),
            0.0
        );
        // sqrt smoothing: psi(0.75) * 0.89 ~ 0.7707.
        let smoothed = SmoothingPsi::Sqrt.apply(0.75) * 0.89;
        assert!((smoothed - 0.75f64.sqrt() * 0.89).abs() < 1e-15);
        assert!((smoothed - 0.7707).abs() < 5e-4);
    }

    #[test]
    fn psi_half_below_one() {
        assert!(SmoothingPsi::Identity.apply(0.5) < 1.0);
        assert!(SmoothingPsi::Sqrt.apply(0.5) < 1.0);
        assert!((SmoothingPsi::Sqrt.apply(0.5) - 0.5f64.sqrt()).abs() < 1e-15);
        // Non-decreasing on a grid.
        for psi in [SmoothingPsi::Identity, SmoothingPsi::Sqrt] {
            let mut prev = 0.0;
            for t in 0..=100 {
                let v = psi.apply(t as f64 / 100.0);
                assert!(v >= prev - 1e-15);
                assert!((0.0..=1.0).contains(&v));
                prev = v;
            }
        }
    }

    /// Independent 1-D oracle: scan a y-grid for the similarity maximizer.
    fn grid_argmax(x: &RatingVector, row: &RatingVector, y_i: f64, y_max: f64, step: f64) -> f64 {
        let dot: f64 = x
            .as_slice()
            .iter()
            .zip(row.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let nx2 = x.norm() * x.norm();
        let nr2 = row.norm() * row.norm();
        let mut best_y = step;
        let mut best = f64::NEG_INFINITY;
        let mut y = step;
        while y <= y_max {
            let sim = (dot + y * y_i) / ((nx2 + y * y).sqrt() * (nr2 + y_i * y_i).sqrt());
            if sim > best {
                best = sim;
                best_y = y;
            }
            y += step;
        }
        best_y
    }

    #[test]
    fn extension_identical_row_returns_target() {
        let x = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
        assert!((best_rating_extension(&x, &x, 7.0).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn extension_proportional_row_rescales() {
        let x = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
        let double = x.scaled(2.0).unwrap();
        assert!((best_rating_extension(&x, &double, 7.0).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn extension_matches_grid_scan() {
        let x = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
        let row = vector(&[0.0, 6.0, 7.0, 8.0, 9.0]);
        let y = best_rating_extension(&x, &row, 7.0).unwrap();
        let closed = 7.0 * 59.0f64.sqrt() / (230.0f64.sqrt() * BOB_JIM);
        assert!((y - closed).abs() < 1e-12);
        let scanned = grid_argmax(&x, &row, 7.0, 100.0, 1e-3);
        assert!(
            (y - scanned).abs() <= 1e-3 + 1e-12,
            "closed {y} vs grid {scanned}"
        );
    }

    #[test]
    fn extension_rejects_bad_inputs() {
        let x = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
        let other_support = vector(&[1.0, 3.0, 3.0, 4.0, 5.0]);
        let zero = vector(&[0.0; 5]);
        assert!(best_rating_extension(&x, &zero, 7.0).is_err());
        assert!(best_rating_extension(&x, &other_support, 7.0).is_err());
        assert!(best_rating_extension(&x, &x, 0.0).is_err());
    }

    fn unit_pair(rng: &mut RngStream, d: usize) -> (RatingVector, RatingVector) {
        // Common support of size >= 1, entries in [1, 10], then normalize.
        loop {
            let keep: Vec<bool> = (0..d).map(|_| rng.bernoulli(0.7)).collect();
            if !keep.iter().any(|&k| k) {
                continue;
            }
            let draw = |rng: &mut RngStream| {
                let entries: Vec<f64> = keep
                    .iter()
                    .map(|&k| if k { rng.uniform(1.0, 10.0) } else { 0.0 })
                    .collect();
                let v = vector(&entries);
                let norm = v.norm();
                RatingVector(v.as_slice().iter().map(|e| e / norm).collect())
            };
            return (draw(rng), draw(rng));
        }
    }

    #[test]
    fn identity_self_residual_zero() {
        let z = {
            let v = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
            let n = v.norm();
            RatingVector(v.as_slice().iter().map(|e| e / n).collect())
        };
        assert!(cosine_distance_identity_check(&z, &z).unwrap() <= 1e-15);
    }

    #[test]
    fn identity_residual_random_pairs() {
        let mut rng = RngStream::new(2024, StreamKey::new(0, 0, Purpose::Ratings));
        let mut max_residual: f64 = 0.0;
        for _ in 0..10_000 {
            let d = 2 + rng.below(15) as usize;
            let (z, z2) = unit_pair(&mut rng, d);
            max_residual = max_residual.max(cosine_distance_identity_check(&z, &z2).unwrap());
        }
        assert!(max_residual <= 1e-12, "max residual {max_residual}");
    }

    #[test]
    fn identity_rejects_non_unit() {
        let x = vector(&[0.0, 3.0, 3.0, 4.0, 5.0]);
        let z = {
            let n = x.norm();
            RatingVector(x.as_slice().iter().map(|e| e / n).collect())
        };
        assert!(cosine_distance_identity_check(&x, &z).is_err());
    }
}
