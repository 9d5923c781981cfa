//! Seeded scenario generation: latent users, mask processes, reveal-set
//! processes, and the new user.
//!
//! Every random object is drawn from its own content-addressed substream
//! (see [`crate::rng`]), keyed by `(trial, entity, purpose)`. That makes
//! the pieces mutually independent by construction, lets trials run in
//! parallel without coordination, and keeps a user's draw identical no
//! matter in which order the run assembles its parts.

use std::collections::BTreeSet;

use crate::config::{MaskProcess, NewUserMaskLaw, RatingModel, RevealProcess, ScenarioConfig};
use crate::error::{Error, Result};
use crate::model::{MaskSequence, MaskSet, NewUser, UserTrajectory};
use crate::rng::{Purpose, RngStream, StreamKey};

/// One realized scenario at a fixed horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub users: Vec<UserTrajectory>,
    /// The reveal set at the horizon.
    pub reveal: BTreeSet<usize>,
    pub new_user: NewUser,
}

/// The noiseless conditional-mean target: the coordinate mean of the
/// latent ratings.
pub fn mean_rating(full: &[f64]) -> f64 {
    full.iter().sum::<f64>() / full.len() as f64
}

/// Draws one latent user: i.i.d. uniform ratings on `[1, s]` and the
/// model's target (the coordinate mean, optionally times an independent
/// mean-one uniform factor).
pub fn gen_latent_user(rng: &mut RngStream, cfg: &ScenarioConfig) -> (Vec<f64>, f64) {
    let d = cfg.scale.d();
    let s = cfg.scale.s();
    let full: Vec<f64> = (0..d).map(|_| rng.uniform(1.0, s)).collect();
    let base = mean_rating(&full);
    let target = match cfg.rating_model {
        RatingModel::MeanRating => base,
        RatingModel::MeanRatingMultiplicativeNoise { delta } => {
            base * rng.uniform(1.0 - delta, 1.0 + delta)
        }
    };
    (full, target)
}

/// Incremental mask process: a uniform `start_size`-subset at entry, then
/// one uniform unrated item per step until saturation. The mask size after
/// `j` steps is `min(d, j + start_size - 1)`.
pub fn gen_mask_sequence_incremental(
    rng: &mut RngStream,
    d: usize,
    start_size: usize,
) -> Result<MaskSequence> {
    if start_size < 1 || start_size > d {
        return Err(Error::Generator(format!(
            "start size {start_size} outside 1..={d}"
        )));
    }
    let first = MaskSet::new(rng.subset(d, start_size), d)?;
    let mut steps = vec![first];
    while !steps.last().expect("non-empty").is_full(d) {
        let current = steps.last().expect("non-empty");
        let complement: Vec<usize> = (1..=d).filter(|&j| !current.contains(j)).collect();
        let mut next = current.clone();
        next.insert(rng.pick(&complement));
        steps.push(next);
    }
    MaskSequence::new(steps, d)
}

/// The 4-items-at-entry incremental process (`|M^j| = min(d, j + 3)`).
pub fn gen_mask_sequence_example2(rng: &mut RngStream, d: usize) -> Result<MaskSequence> {
    if d < 4 {
        return Err(Error::Generator(format!(
            "incremental process needs d >= 4, got {d}"
        )));
    }
    gen_mask_sequence_incremental(rng, d, 4)
}

/// Draws a mask sequence according to the configured process.
pub fn gen_mask_sequence(
    rng: &mut RngStream,
    process: &MaskProcess,
    d: usize,
) -> Result<MaskSequence> {
    match *process {
        MaskProcess::FullAtEntry => Ok(MaskSequence::saturated(d)),
        MaskProcess::Example2Incremental { start_size } => {
            gen_mask_sequence_incremental(rng, d, start_size)
        }
    }
}

fn reveal_step(
    rng: &mut RngStream,
    p: f64,
    reveal: &mut BTreeSet<usize>,
    absent: &mut Vec<usize>,
    m: usize,
) {
    absent.push(m);
    if rng.bernoulli(p) {
        let idx = rng.below(absent.len() as u64) as usize;
        reveal.insert(absent.swap_remove(idx));
    }
}

/// The whole nested reveal sequence `R_1 ⊆ ... ⊆ R_n`.
///
/// Materializes n sets; meant for small-n inspection and tests. Use
/// [`gen_reveal_final`] inside experiment loops.
pub fn gen_reveal_sequence(
    rng: &mut RngStream,
    process: &RevealProcess,
    n: usize,
) -> Vec<BTreeSet<usize>> {
    match *process {
        RevealProcess::AllUsers => (1..=n).map(|m| (1..=m).collect()).collect(),
        RevealProcess::BernoulliGrowth { p } => {
            let mut out = Vec::with_capacity(n);
            let mut reveal = BTreeSet::from([1]);
            let mut absent: Vec<usize> = Vec::new();
            out.push(reveal.clone());
            for m in 2..=n {
                reveal_step(rng, p, &mut reveal, &mut absent, m);
                out.push(reveal.clone());
            }
            out
        }
    }
}

/// The reveal set at the horizon only; O(n) time and memory.
pub fn gen_reveal_final(rng: &mut RngStream, process: &RevealProcess, n: usize) -> BTreeSet<usize> {
    match *process {
        RevealProcess::AllUsers => (1..=n).collect(),
        RevealProcess::BernoulliGrowth { p } => {
            let mut reveal = BTreeSet::from([1]);
            let mut absent: Vec<usize> = Vec::new();
            for m in 2..=n {
                reveal_step(rng, p, &mut reveal, &mut absent, m);
            }
            reveal
        }
    }
}

/// Draws the new user: latent ratings plus the configured mask law.
pub fn gen_new_user(seed: u64, trial: u64, cfg: &ScenarioConfig) -> Result<NewUser> {
    let d = cfg.scale.d();
    let mut ratings_rng = RngStream::new(seed, StreamKey::new(trial, 0, Purpose::NewUserRatings));
    let full: Vec<f64> = (0..d)
        .map(|_| ratings_rng.uniform(1.0, cfg.scale.s()))
        .collect();
    let mask = match cfg.new_user_mask {
        NewUserMaskLaw::FullSet => MaskSet::full(d),
        NewUserMaskLaw::SameAsM1 => {
            if d < 4 {
                return Err(Error::Generator("same_as_m1 mask law needs d >= 4".into()));
            }
            let mut mask_rng = RngStream::new(seed, StreamKey::new(trial, 0, Purpose::NewUserMask));
            MaskSet::new(mask_rng.subset(d, 4), d)?
        }
    };
    NewUser::new(full, mask, &cfg.scale)
}

/// Draws one full scenario realization at horizon `n` with the configured
/// mask process.
pub fn gen_scenario_run(
    seed: u64,
    trial: u64,
    cfg: &ScenarioConfig,
    n: usize,
) -> Result<ScenarioRun> {
    gen_scenario_run_with_masks(seed, trial, cfg, n, |rng, d| {
        gen_mask_sequence(rng, &cfg.mask_process, d)
    })
}

/// Like [`gen_scenario_run`] but with a caller-supplied mask-sequence
/// sampler, the hook for nested mask processes beyond the shipped ones.
/// The sampler must produce sequences covering the horizon (saturating
/// sequences always do).
pub fn gen_scenario_run_with_masks<F>(
    seed: u64,
    trial: u64,
    cfg: &ScenarioConfig,
    n: usize,
    mut mask_sampler: F,
) -> Result<ScenarioRun>
where
    F: FnMut(&mut RngStream, usize) -> Result<MaskSequence>,
{
    if n < 1 {
        return Err(Error::Generator("horizon must be at least 1".into()));
    }
    let d = cfg.scale.d();
    let mut users = Vec::with_capacity(n);
    for i in 1..=n as u64 {
        let mut ratings_rng = RngStream::new(seed, StreamKey::new(trial, i, Purpose::Ratings));
        let (full, target) = gen_latent_user(&mut ratings_rng, cfg);
        let mut mask_rng = RngStream::new(seed, StreamKey::new(trial, i, Purpose::Mask));
        let masks = mask_sampler(&mut mask_rng, d)?;
        users.push(UserTrajectory::new(full, target, masks, &cfg.scale)?);
    }
    let mut reveal_rng = RngStream::new(seed, StreamKey::new(trial, 0, Purpose::Reveal));
    let reveal = gen_reveal_final(&mut reveal_rng, &cfg.reveal_process, n);
    let new_user = gen_new_user(seed, trial, cfg)?;
    Ok(ScenarioRun {
        users,
        reveal,
        new_user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn cfg(text: &str) -> ScenarioConfig {
        parse_config_str(text).unwrap()
    }

    fn stream(seed: u64, trial: u64, entity: u64) -> RngStream {
        RngStream::new(seed, StreamKey::new(trial, entity, Purpose::Mask))
    }

    #[test]
    fn mean_rating_extremes() {
        assert_eq!(mean_rating(&[1.0; 5]), 1.0);
        assert_eq!(mean_rating(&[10.0; 5]), 10.0);
        assert_eq!(mean_rating(&[2.0, 4.0, 6.0]), 4.0);
    }

    #[test]
    fn latent_user_in_domain() {
        let cfg = cfg("model.d = 6\nmodel.s = 10\n");
        let mut rng = stream(1, 0, 1);
        for _ in 0..200 {
            let (full, target) = gen_latent_user(&mut rng, &cfg);
            assert!(full.iter().all(|&v| (1.0..=10.0).contains(&v)));
            assert_eq!(target, mean_rating(&full));
        }
    }

    #[test]
    fn noisy_target_keeps_conditional_mean() {
        // Binned check of E[Y/‖X‖ | direction]: with multiplicative
        // mean-one noise the bin averages of Y/‖X‖ and of the noiseless
        // ratio must agree within Monte Carlo error.
        let cfg = cfg(
            "model.d = 4\nmodel.s = 10\nrating.model = mean_rating_multiplicative_noise\nrating.delta = 0.5\n",
        );
        let mut rng = stream(7, 0, 1);
        let bins = 8;
        let mut noisy_sum = vec![0.0f64; bins];
        let mut noisy_sq = vec![0.0f64; bins];
        let mut clean_sum = vec![0.0f64; bins];
        let mut count = vec![0usize; bins];
        let samples = 100_000;
        for _ in 0..samples {
            let (full, target) = gen_latent_user(&mut rng, &cfg);
            let norm = full.iter().map(|v| v * v).sum::<f64>().sqrt();
            // Bin by the direction's first coordinate.
            let dir0 = full[0] / norm;
            let bin = (((dir0 - 0.05) / 0.95 * bins as f64) as usize).min(bins - 1);
            noisy_sum[bin] += target / norm;
            noisy_sq[bin] += (target / norm) * (target / norm);
            clean_sum[bin] += mean_rating(&full) / norm;
            count[bin] += 1;
        }
        for b in 0..bins {
            if count[b] < 1000 {
                continue;
            }
            let n = count[b] as f64;
            let mean_noisy = noisy_sum[b] / n;
            let mean_clean = clean_sum[b] / n;
            let var = (noisy_sq[b] / n - mean_noisy * mean_noisy).max(0.0);
            let se = (var / n).sqrt();
            assert!(
                (mean_noisy - mean_clean).abs() <= 4.0 * se + 1e-9,
                "bin {b}: {mean_noisy} vs {mean_clean} (se {se})"
            );
        }
    }

    #[test]
    fn incremental_sizes_and_saturation() {
        let d = 10;
        let mut rng = stream(3, 0, 2);
        for _ in 0..100 {
            let seq = gen_mask_sequence_example2(&mut rng, d).unwrap();
            // |M^j| = min(d, j + 3), saturation exactly at j = d - 3.
            assert_eq!(seq.saturation(), Some(d - 3));
            for j in 1..=seq.horizon() {
                assert_eq!(seq.mask_at(j).unwrap().len(), (j + 3).min(d));
            }
            assert_eq!(seq.mask_at(3).unwrap().len(), 6);
        }
    }

    #[test]
    fn incremental_d4_saturates_immediately() {
        let mut rng = stream(3, 0, 3);
        let seq = gen_mask_sequence_example2(&mut rng, 4).unwrap();
        assert_eq!(seq.saturation(), Some(1));
        assert!(seq.mask_at(1).unwrap().is_full(4));
        assert!(gen_mask_sequence_example2(&mut rng, 3).is_err());
    }

    #[test]
    fn incremental_nested() {
        let mut rng = stream(9, 0, 4);
        let seq = gen_mask_sequence_incremental(&mut rng, 12, 4).unwrap();
        for j in 1..seq.horizon() {
            assert!(seq
                .mask_at(j)
                .unwrap()
                .is_subset(seq.mask_at(j + 1).unwrap()));
        }
    }

    #[test]
    fn first_mask_uniform_chi_square() {
        // d = 6: C(6,4) = 15 equally likely first masks. Chi-square with
        // 14 degrees of freedom; critical value at the 1% level is 29.141.
        let d = 6;
        let trials = 100_000;
        let mut counts = std::collections::HashMap::new();
        let mut rng = stream(2718, 0, 5);
        for _ in 0..trials {
            let seq = gen_mask_sequence_example2(&mut rng, d).unwrap();
            let key: Vec<usize> = seq.mask_at(1).unwrap().iter().collect();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 15);
        let expected = trials as f64 / 15.0;
        let chi2: f64 = counts
            .values()
            .map(|&o| {
                let diff = o as f64 - expected;
                diff * diff / expected
            })
            .sum();
        assert!(
            chi2 < 29.141,
            "chi-square {chi2} exceeds the 1% critical value"
        );
    }

    #[test]
    fn reveal_all_users() {
        let mut rng = stream(1, 0, 6);
        let seq = gen_reveal_sequence(&mut rng, &RevealProcess::AllUsers, 5);
        assert_eq!(seq.len(), 5);
        assert_eq!(seq[4], (1..=5).collect());
        assert_eq!(seq[0], BTreeSet::from([1]));
    }

    #[test]
    fn reveal_sequence_nested_and_final_matches() {
        let process = RevealProcess::BernoulliGrowth { p: 0.4 };
        for trial in 0..50u64 {
            let mut a = stream(77, trial, 0);
            let seq = gen_reveal_sequence(&mut a, &process, 40);
            for w in seq.windows(2) {
                assert!(w[0].is_subset(&w[1]));
            }
            let mut b = stream(77, trial, 0);
            let fin = gen_reveal_final(&mut b, &process, 40);
            assert_eq!(seq.last().unwrap(), &fin);
        }
    }

    #[test]
    fn reveal_mean_size_matches_binomial() {
        // E|R_n| = 1 + (n-1)p; check within 4 standard errors.
        let n = 10;
        let p = 0.3;
        let trials = 100_000;
        let process = RevealProcess::BernoulliGrowth { p };
        let mut sum = 0.0;
        for trial in 0..trials as u64 {
            let mut rng = stream(4242, trial, 0);
            sum += gen_reveal_final(&mut rng, &process, n).len() as f64;
        }
        let mean = sum / trials as f64;
        let expect = 1.0 + (n as f64 - 1.0) * p;
        let var = (n as f64 - 1.0) * p * (1.0 - p);
        let se = (var / trials as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 4.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn reveal_size_two_steps() {
        // n = 2, p = 0.5: |R_2| is 1 or 2 with equal probability.
        let trials = 100_000;
        let process = RevealProcess::BernoulliGrowth { p: 0.5 };
        let mut twos = 0usize;
        for trial in 0..trials as u64 {
            let mut rng = stream(515, trial, 0);
            let r = gen_reveal_final(&mut rng, &process, 2);
            assert!(r.len() == 1 || r.len() == 2);
            assert!(r.contains(&1));
            if r.len() == 2 {
                twos += 1;
            }
        }
        let freq = twos as f64 / trials as f64;
        let se = (0.25f64 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() <= 4.0 * se, "freq {freq}");
    }

    #[test]
    fn reveal_size_binomial_chi_square() {
        // |R_n| - 1 ~ Binomial(n-1, p) for the growth process.
        let n = 6;
        let p = 0.4;
        let trials = 100_000usize;
        let process = RevealProcess::BernoulliGrowth { p };
        let mut counts = vec![0usize; n];
        for trial in 0..trials as u64 {
            let mut rng = stream(90210, trial, 0);
            counts[gen_reveal_final(&mut rng, &process, n).len() - 1] += 1;
        }
        let mut chi2 = 0.0;
        for (k, &observed) in counts.iter().enumerate() {
            let mut prob = 1.0;
            // C(5, k) p^k (1-p)^(5-k)
            let m = n - 1;
            let mut comb = 1.0;
            for j in 0..k {
                comb *= (m - j) as f64 / (j + 1) as f64;
            }
            prob *= comb * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32);
            let expected = prob * trials as f64;
            let diff = observed as f64 - expected;
            chi2 += diff * diff / expected;
        }
        // 5 degrees of freedom, 1% critical value 15.086.
        assert!(chi2 < 15.086, "chi-square {chi2}");
    }

    #[test]
    fn scenario_run_deterministic() {
        let cfg = cfg(
            "model.d = 6\nmodel.s = 10\nmask.process = example2_incremental\nreveal.process = bernoulli_growth\nreveal.p = 0.5\n",
        );
        let a = gen_scenario_run(99, 3, &cfg, 12).unwrap();
        let b = gen_scenario_run(99, 3, &cfg, 12).unwrap();
        assert_eq!(a, b);
        let c = gen_scenario_run(99, 4, &cfg, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn streams_are_content_addressed() {
        // A user's draw depends only on its address, not on how many other
        // users the run generates.
        let cfg = cfg("model.d = 5\nmodel.s = 10\n");
        let small = gen_scenario_run(7, 0, &cfg, 3).unwrap();
        let large = gen_scenario_run(7, 0, &cfg, 30).unwrap();
        for i in 0..3 {
            assert_eq!(small.users[i], large.users[i]);
        }
        assert_eq!(small.new_user, large.new_user);
    }

    #[test]
    fn ratings_independent_of_other_users_masks() {
        // Correlation between user 1's first rating and user 2's first-mask
        // minimum over many trials should vanish.
        let cfg = cfg("model.d = 8\nmodel.s = 10\nmask.process = example2_incremental\n");
        let trials = 10_000;
        let mut xs = Vec::with_capacity(trials);
        let mut ys = Vec::with_capacity(trials);
        for t in 0..trials as u64 {
            let run = gen_scenario_run(1234, t, &cfg, 2).unwrap();
            xs.push(run.users[0].full_ratings[0]);
            ys.push(
                run.users[1]
                    .masks
                    .mask_at(1)
                    .unwrap()
                    .iter()
                    .next()
                    .unwrap() as f64,
            );
        }
        let n = trials as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            cov += (x - mx) * (y - my);
            vx += (x - mx) * (x - mx);
            vy += (y - my) * (y - my);
        }
        let corr = cov / (vx.sqrt() * vy.sqrt());
        assert!(corr.abs() < 4.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn new_user_mask_laws() {
        let full = cfg("model.d = 6\nmodel.s = 10\n");
        let nu = gen_new_user(1, 0, &full).unwrap();
        assert!(nu.mask.is_full(6));

        let four = cfg("model.d = 6\nmodel.s = 10\nnew_user.mask = same_as_m1\n");
        for t in 0..100 {
            let nu = gen_new_user(1, t, &four).unwrap();
            assert_eq!(nu.mask.len(), 4);
        }
    }
}
