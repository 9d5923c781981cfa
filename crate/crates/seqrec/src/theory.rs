//! Closed-form quantities: the true regression function, non-corating
//! probabilities for the incremental mask process, error-bound terms, and
//! neighbor-count schedules.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::{RatingModel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::model::RatingVector;

/// The true regression value under the mean-rating model: the coordinate
/// mean `(1/d) Σ_j x_j`. Positively 1-homogeneous, as the estimator's
/// structure forces.
///
/// Only meaningful when the new user reveals every item (the observed
/// query then equals the latent vector); the noisy model keeps the same
/// conditional mean.
pub fn eta_true(x: &RatingVector, cfg: &ScenarioConfig) -> Result<f64> {
    if x.is_zero() {
        return Err(Error::Theory(
            "regression undefined at the zero vector".into(),
        ));
    }
    match cfg.rating_model {
        RatingModel::MeanRating | RatingModel::MeanRatingMultiplicativeNoise { .. } => {
            Ok(x.as_slice().iter().sum::<f64>() / x.len() as f64)
        }
    }
}

/// Exact binomial coefficient in integer arithmetic (u128 is comfortable
/// for the d <= ~100 range this simulator targets).
fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for j in 0..k {
        // Multiply first, divide exactly: the running value is always a
        // binomial coefficient times an integer.
        result = result * (n - j) as u128 / (j + 1) as u128;
    }
    result
}

/// Probability that a user who entered at time `i` has not yet rated all
/// of the new user's 4 items by time `n`, under the incremental mask
/// process (4 items at entry, one more per step).
///
/// Zero for `i <= n - d + 4` (the user's mask has saturated); otherwise
/// `1 - C(d-4, n-i) / C(d, n+4-i)`, evaluated with exact integer
/// binomials. Identical to the expanded ratio
/// `1 - m(m-1)(m-2)(m-3) / (d(d-1)(d-2)(d-3))` with `m = n+4-i`.
pub fn alpha_example2(n: usize, i: usize, d: usize) -> Result<f64> {
    if d < 4 {
        return Err(Error::Theory(format!("alpha needs d >= 4, got {d}")));
    }
    if i < 1 || i > n {
        return Err(Error::Theory(format!("user index {i} outside 1..={n}")));
    }
    if i + d <= n + 4 {
        // i <= n - d + 4 without underflow on usize.
        return Ok(0.0);
    }
    let m = (n + 4 - i) as u64; // mask size of user i at time n, in 4..d
    let num = binomial(d as u64 - 4, m - 4);
    let den = binomial(d as u64, m);
    Ok(1.0 - num as f64 / den as f64)
}

/// Non-corating probabilities for all users at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTable {
    pub n: usize,
    pub d: usize,
    values: Vec<f64>,
}

impl AlphaTable {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        let values = (1..=n)
            .map(|i| alpha_example2(n, i, d))
            .collect::<Result<Vec<f64>>>()?;
        Ok(AlphaTable { n, d, values })
    }

    /// Value for user `i` (1-based).
    pub fn alpha(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Upper bound on `Σ_i α_ni` for the incremental mask process:
/// `(d-4) · (1 - 24 / (d(d-1)(d-2)(d-3)))`.
pub fn alpha_sum_bound(d: usize) -> Result<f64> {
    if d < 5 {
        return Err(Error::Theory(format!("sum bound needs d >= 5, got {d}")));
    }
    let d = d as f64;
    Ok((d - 4.0) * (1.0 - 24.0 / (d * (d - 1.0) * (d - 2.0) * (d - 3.0))))
}

/// The four per-realization error-bound terms. Averaging each across
/// Monte Carlo trials estimates the expectations in the rate bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundBreakdown {
    /// `(k_n / |R_n|) · Σ_{i ∈ R_n} α_ni` — weight mass on unsaturated users.
    pub term_alpha_sum: f64,
    /// `Π_{i ∈ R_n} α_ni` — probability no revealed user is saturated.
    pub term_alpha_prod: f64,
    /// `(k_n / |R_n|)^{P_n}` — bias in effective dimension `|M| - 1`;
    /// `P_n = 1/(|M|-1)` when `k_n <= |R_n|`, else 1.
    pub term_bias: f64,
    /// `1 / sqrt(k_n)` — averaging variance.
    pub term_variance: f64,
}

impl BoundBreakdown {
    pub fn total(&self) -> f64 {
        self.term_alpha_sum + self.term_alpha_prod + self.term_bias + self.term_variance
    }
}

/// Evaluates the bound terms for one realization: the realized reveal set,
/// the per-user non-corating probabilities (index `i` at `alphas[i-1]`),
/// the new-user mask size, and the neighbor count.
pub fn bound_breakdown(
    alphas: &[f64],
    reveal: &BTreeSet<usize>,
    new_user_mask_size: usize,
    k_n: usize,
) -> BoundBreakdown {
    debug_assert!(new_user_mask_size >= 2, "bound needs |M| >= 2");
    let r = reveal.len() as f64;
    let ratio = k_n as f64 / r;
    let mut alpha_sum = 0.0;
    let mut alpha_prod = 1.0;
    for &i in reveal {
        let a = alphas[i - 1];
        alpha_sum += a;
        alpha_prod *= a;
    }
    let p_n = if k_n as f64 <= r {
        1.0 / (new_user_mask_size as f64 - 1.0)
    } else {
        1.0
    };
    BoundBreakdown {
        term_alpha_sum: ratio * alpha_sum,
        term_alpha_prod: alpha_prod,
        term_bias: ratio.powf(p_n),
        term_variance: 1.0 / (k_n as f64).sqrt(),
    }
}

/// Closed form of `E[k / |R_n|]` under the Bernoulli reveal-growth
/// process: `|R_n| - 1` is Binomial(n-1, p), and
/// `E[1/(1+B)] = (1 - (1-p)^n) / (n p)` for B Binomial(n-1, p).
///
/// This is the quantity that must vanish for the estimate to stay
/// consistent; it also governs how quickly degenerate (k > |R_n|)
/// snapshots die out.
pub fn expected_neighbor_share(n: usize, p: f64, k: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Theory("time must be at least 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Theory(format!(
            "growth probability must lie in (0, 1), got {p}"
        )));
    }
    Ok(k as f64 * (1.0 - (1.0 - p).powi(n as i32)) / (n as f64 * p))
}

/// Neighbor-count schedules `n -> k_n`, always clamped into `[1, n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSchedule {
    /// `k_n = round(n^{2/(d+1)})` — the rate-optimal choice when every user
    /// rates everything.
    Ex1Rate { d: usize },
    /// `k_n = round(n^{2/5})` — the rate-optimal choice for the incremental
    /// 4-item mask process.
    Ex2Rate,
    /// Fixed `k`, clamped to `n`.
    Constant(usize),
    /// `k_n = round(n^a)` for a chosen exponent `a` in (0, 1].
    Power(f64),
}

impl KSchedule {
    pub fn ex1_rate(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Theory(format!("ex1_rate needs d >= 2, got {d}")));
        }
        Ok(KSchedule::Ex1Rate { d })
    }

    pub fn constant(k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::Theory("constant schedule needs k >= 1".into()));
        }
        Ok(KSchedule::Constant(k))
    }

    pub fn power(a: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Theory(format!(
                "power exponent must lie in (0, 1], got {a}"
            )));
        }
        Ok(KSchedule::Power(a))
    }

    pub fn k(&self, n: usize) -> usize {
        let raw = match *self {
            KSchedule::Ex1Rate { d } => (n as f64).powf(2.0 / (d as f64 + 1.0)).round(),
            KSchedule::Ex2Rate => (n as f64).powf(0.4).round(),
            KSchedule::Constant(c) => c as f64,
            KSchedule::Power(a) => (n as f64).powf(a).round(),
        };
        (raw as usize).clamp(1, n)
    }

    /// The schedule materialized as an explicit map over given n values.
    pub fn table(&self, n_values: &[usize]) -> BTreeMap<usize, usize> {
        n_values.iter().map(|&n| (n, self.k(n))).collect()
    }
}
