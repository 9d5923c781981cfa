//! Monte Carlo harness: mean-absolute-error curves over growing database
//! sizes, empirical rate fitting, non-corating-probability validation, and
//! independent brute-force oracles for the estimator.
//!
//! Trials run in parallel when the `parallel` feature is on (the default).
//! Results do not depend on the worker count: every trial owns a
//! content-addressed substream and the reduction folds trial results in
//! index order.

use crate::config::{NewUserMaskLaw, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimator::{DegenerateReason, EstimateResult, Neighbor, NeighborSelection};
use crate::generators::{gen_mask_sequence_example2, gen_scenario_run};
use crate::model::DatabaseSnapshot;
use crate::rng::{derive_seed, Purpose, RngStream, StreamKey};
use crate::similarity::SmoothingPsi;
use crate::theory::{alpha_example2, eta_true, KSchedule};

/// One row of an error table: everything measured at a single database
/// size.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// Monte Carlo estimate of the mean absolute estimation error,
    /// degenerate zero-estimates included as-is.
    pub mae: f64,
    /// Sample standard deviation of the absolute error over trials,
    /// divided by sqrt(trials); 0 for a single trial.
    pub mae_stderr: f64,
    /// Fraction of trials whose estimate was the conventional 0.
    pub degenerate_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaeTable {
    pub rows: Vec<MaeRow>,
}

/// Least-squares fit of `log(mae)` against `log(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// The empirical rate exponent (negative for decaying error).
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Range of n values actually used in the fit.
    pub n_range: (usize, usize),
}

#[cfg(feature = "parallel")]
fn map_trials<T: Send>(trials: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..trials as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_trials<T: Send>(trials: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..trials as u64).map(f).collect()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `trials` independent scenario realizations at every database size
/// in `n_values` and records the absolute estimation error against the
/// closed-form regression value.
///
/// Each (n, trial) pair draws a fresh new user: the estimated quantity is
/// the unconditional mean error. Requires the full-set new-user mask law
/// (otherwise no closed-form truth exists). Fully deterministic given
/// `cfg.seed`.
pub fn run_mae(
    cfg: &ScenarioConfig,
    n_values: &[usize],
    schedule: &KSchedule,
    trials: usize,
) -> Result<MaeTable> {
    if cfg.new_user_mask != NewUserMaskLaw::FullSet {
        return Err(Error::Experiment(
            "error experiments need new_user.mask = full_set for a closed-form truth".into(),
        ));
    }
    if trials < 1 {
        return Err(Error::Experiment("need at least one trial".into()));
    }
    if !n_values.windows(2).all(|w| w[0] < w[1]) || n_values.is_empty() {
        return Err(Error::Experiment(
            "n values must be non-empty and ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let k = schedule.k(n);
        let seed_n = derive_seed(cfg.seed, n as u64);
        let outcomes = map_trials(trials, |trial| -> Result<(f64, bool)> {
            let run = gen_scenario_run(seed_n, trial, cfg, n)?;
            let snapshot =
                DatabaseSnapshot::build(&run.users, &run.reveal, &run.new_user, n, &cfg.scale)?;
            let result = crate::estimator::estimate(&snapshot, k, cfg.psi)?;
            let truth = eta_true(snapshot.query(), cfg)?;
            Ok(((result.value - truth).abs(), result.degenerate.is_some()))
        });
        let mut errors = Vec::with_capacity(trials);
        let mut degenerate = 0usize;
        for outcome in outcomes {
            let (err, is_degenerate) = outcome?;
            errors.push(err);
            if is_degenerate {
                degenerate += 1;
            }
        }
        let (mae, mae_stderr) = mean_and_stderr(&errors);
        rows.push(MaeRow {
            n,
            k,
            trials,
            mae,
            mae_stderr,
            degenerate_fraction: degenerate as f64 / trials as f64,
        });
    }
    Ok(MaeTable { rows })
}

/// One realization observed at each database size: the same trial's users
/// and reveal process, re-snapshotted as the database grows (draws are
/// content-addressed, so the runs are nested in n — older users only gain
/// rated items and the reveal set only grows).
///
/// Complements [`run_mae`], whose rows are independent across sizes.
pub fn trajectory_curve(
    cfg: &ScenarioConfig,
    trial: u64,
    n_values: &[usize],
    schedule: &KSchedule,
) -> Result<Vec<(usize, EstimateResult)>> {
    let snapshots = n_values
        .iter()
        .map(|&n| {
            let run = gen_scenario_run(cfg.seed, trial, cfg, n)?;
            DatabaseSnapshot::build(&run.users, &run.reveal, &run.new_user, n, &cfg.scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let results = crate::estimator::estimate_curve(&snapshots, &schedule.table(n_values), cfg.psi)?;
    Ok(n_values.iter().copied().zip(results).collect())
}

/// Fits `log(mae) ~ slope · log(n) + intercept` over the usable rows.
///
/// Rows with more than 1% degenerate trials are excluded (their zero
/// estimates distort the power-law regime), and rows with mae = 0 are
/// excluded with a warning. Fewer than 3 usable rows is an error.
pub fn fit_rate(table: &MaeTable) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut n_min = usize::MAX;
    let mut n_max = 0usize;
    for row in &table.rows {
        if row.degenerate_fraction >= 0.01 {
            log::warn!(
                "rate fit: dropping n = {} ({:.1}% degenerate trials)",
                row.n,
                row.degenerate_fraction * 100.0
            );
            continue;
        }
        if row.mae == 0.0 {
            log::warn!(
                "rate fit: dropping n = {} (mae = 0 has no logarithm)",
                row.n
            );
            continue;
        }
        xs.push((row.n as f64).ln());
        ys.push(row.mae.ln());
        n_min = n_min.min(row.n);
        n_max = n_max.max(row.n);
    }
    if xs.len() < 3 {
        return Err(Error::Experiment(format!(
            "rate fit needs at least 3 usable rows, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy <= 1e-30 {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        n_range: (n_min, n_max),
    })
}

/// Monotone-consistency verdict comparing the first and last rows of an
/// error table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub first: MaeRow,
    pub last: MaeRow,
    /// (mae_first - mae_last) in combined-standard-error units.
    pub separation_sigmas: f64,
    pub holds: bool,
}

/// Checks that the error at the largest database size sits below the error
/// at the smallest, separated by at least 3 combined standard errors.
pub fn monotone_consistency(table: &MaeTable) -> Result<ConsistencyReport> {
    if table.rows.len() < 2 {
        return Err(Error::Experiment(
            "consistency check needs at least 2 rows".into(),
        ));
    }
    let first = table.rows.first().expect("non-empty").clone();
    let last = table.rows.last().expect("non-empty").clone();
    let combined = (first.mae_stderr.powi(2) + last.mae_stderr.powi(2)).sqrt();
    let separation_sigmas = if combined > 0.0 {
        (first.mae - last.mae) / combined
    } else if first.mae > last.mae {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    Ok(ConsistencyReport {
        holds: last.mae < first.mae && separation_sigmas > 3.0,
        first,
        last,
        separation_sigmas,
    })
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Corated cosine, written independently of the similarity module.
fn oracle_sbar(x: &[f64], y: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for j in 0..x.len() {
        if x[j] != 0.0 && y[j] != 0.0 {
            dot += x[j] * y[j];
            nx += x[j] * x[j];
            ny += y[j] * y[j];
        }
    }
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        (dot / (nx.sqrt() * ny.sqrt())).min(1.0)
    }
}

/// Reference estimator: full sort of every eligible revealed row by
/// `(-similarity, index)`, then the explicit averaging formula. Same
/// contract as [`crate::estimator::estimate`]; written as a plain
/// transcription so the two paths check each other.
pub fn brute_force_estimate(
    snapshot: &DatabaseSnapshot,
    k: usize,
    psi: SmoothingPsi,
) -> Result<EstimateResult> {
    if k < 1 {
        return Err(Error::Estimator("k must be at least 1".into()));
    }
    if snapshot.reveal().len() < k {
        return Ok(EstimateResult {
            value: 0.0,
            selection: NeighborSelection {
                neighbors: Vec::new(),
                k,
            },
            degenerate: Some(DegenerateReason::RevealSetSmallerThanK),
        });
    }
    let q = snapshot.query().as_slice();
    let mut ranked: Vec<Neighbor> = Vec::new();
    for &i in snapshot.reveal() {
        let row = snapshot.row(i).as_slice();
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        let cos = oracle_sbar(q, row);
        let p = snapshot.penalty(i);
        ranked.push(Neighbor {
            user: i,
            similarity: psi.apply(p) * cos,
            sbar: cos,
            penalty: p,
        });
    }
    ranked.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.user.cmp(&b.user))
    });
    ranked.truncate(k);
    if ranked.is_empty() {
        return Ok(EstimateResult {
            value: 0.0,
            selection: NeighborSelection {
                neighbors: ranked,
                k,
            },
            degenerate: Some(DegenerateReason::AllRowsZero),
        });
    }
    let qnorm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sum = 0.0;
    for neighbor in &ranked {
        let row = snapshot.row(neighbor.user).as_slice();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        sum += snapshot.target(neighbor.user).expect("revealed") / norm;
    }
    Ok(EstimateResult {
        value: qnorm * sum / k as f64,
        selection: NeighborSelection {
            neighbors: ranked,
            k,
        },
        degenerate: None,
    })
}

/// Monte Carlo estimate of the probability that a user who entered at time
/// `i` has not corated all of an independent uniform 4-subset by time `n`,
/// under the incremental mask process. Returns `(estimate, stderr)`.
pub fn alpha_mc(n: usize, i: usize, d: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if d < 4 {
        return Err(Error::Experiment(format!(
            "alpha simulation needs d >= 4, got {d}"
        )));
    }
    if i < 1 || i > n {
        return Err(Error::Experiment(format!("user index {i} outside 1..={n}")));
    }
    if trials < 1 {
        return Err(Error::Experiment("need at least one trial".into()));
    }
    let steps = n + 1 - i;
    let hits = map_trials(trials, |trial| -> Result<bool> {
        let mut rng = RngStream::new(seed, StreamKey::new(trial, i as u64, Purpose::Mask));
        let masks = gen_mask_sequence_example2(&mut rng, d)?;
        let mut m_rng = RngStream::new(seed, StreamKey::new(trial, i as u64, Purpose::NewUserMask));
        let m = m_rng.subset(d, 4);
        let mask = masks.mask_at(steps)?;
        Ok(!m.iter().all(|&j| mask.contains(j)))
    });
    let mut count = 0usize;
    for hit in hits {
        if hit? {
            count += 1;
        }
    }
    let estimate = count as f64 / trials as f64;
    let stderr = (estimate * (1.0 - estimate) / trials as f64).sqrt();
    Ok((estimate, stderr))
}

/// One row of the closed-form-versus-simulation comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaValidationRow {
    pub i: usize,
    pub closed_form: f64,
    pub mc: f64,
    pub stderr: f64,
    pub z_score: f64,
}

/// Compares the closed-form non-corating probability against simulation
/// for every user index at time `n`.
pub fn validate_alpha(
    n: usize,
    d: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<AlphaValidationRow>> {
    (1..=n)
        .map(|i| {
            let closed_form = alpha_example2(n, i, d)?;
            let (mc, stderr) = alpha_mc(n, i, d, trials, seed)?;
            let diff = mc - closed_form;
            let z_score = if stderr > 0.0 {
                diff / stderr
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            };
            Ok(AlphaValidationRow {
                i,
                closed_form,
                mc,
                stderr,
                z_score,
            })
        })
        .collect()
}
