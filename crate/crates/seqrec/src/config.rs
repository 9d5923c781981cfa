//! Scenario configuration: the full description of a simulation run.
//!
//! Configs live in flat `section.key = value` text files (UTF-8, `#`
//! comments). Unknown keys are hard errors, every omitted key gets a
//! documented default, and the resolved config echoes back into output
//! manifests so any result file names the exact scenario that produced it.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::RatingScale;
use crate::similarity::SmoothingPsi;
use crate::theory::KSchedule;

/// How database users reveal item ratings over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskProcess {
    /// Every user rates all items on entry.
    FullAtEntry,
    /// Users rate `start_size` random items on entry, then one more random
    /// unrated item per time step until all are rated.
    Example2Incremental { start_size: usize },
}

/// Which users have rated the target item by time n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RevealProcess {
    /// Everyone: the reveal set is always `{1, ..., n}`.
    AllUsers,
    /// Start from user 1; each step adds one uniformly chosen absent user
    /// with probability `p`. `|R_n| - 1` is Binomial(n-1, p).
    BernoulliGrowth { p: f64 },
}

/// Law of the new user's revealed-item mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewUserMaskLaw {
    /// The new user rates every item; the true regression is then known in
    /// closed form, which the error experiments need.
    FullSet,
    /// A uniform 4-subset, like a fresh entrant's first step. No closed-form
    /// regression target; used for non-corating-probability studies.
    SameAsM1,
}

/// Joint law of the latent ratings and the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatingModel {
    /// Ratings i.i.d. uniform on [1, s]; the target is exactly their mean.
    MeanRating,
    /// Target = mean times an independent uniform factor on
    /// `[1 - delta, 1 + delta]`; the conditional mean is unchanged.
    MeanRatingMultiplicativeNoise { delta: f64 },
}

/// Everything that defines a simulation scenario: domain, stochastic
/// processes, estimator smoothing, neighbor schedule, and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scale: RatingScale,
    pub mask_process: MaskProcess,
    pub reveal_process: RevealProcess,
    pub new_user_mask: NewUserMaskLaw,
    pub rating_model: RatingModel,
    pub psi: SmoothingPsi,
    pub schedule: KSchedule,
    pub n_values: Vec<usize>,
    pub seed: u64,
    pub trials: usize,
}

impl ScenarioConfig {
    /// Maximal possible target value under the rating model.
    pub fn target_ceiling(&self) -> f64 {
        match self.rating_model {
            RatingModel::MeanRating => self.scale.s(),
            RatingModel::MeanRatingMultiplicativeNoise { delta } => self.scale.s() * (1.0 + delta),
        }
    }

    /// Minimal possible target value under the rating model.
    pub fn target_floor(&self) -> f64 {
        match self.rating_model {
            RatingModel::MeanRating => 1.0,
            RatingModel::MeanRatingMultiplicativeNoise { delta } => 1.0 - delta,
        }
    }

    /// Canonical `key = value` lines with every default materialized.
    /// Parsing these lines reproduces the config exactly.
    pub fn resolved_lines(&self) -> Vec<String> {
        let (mask_name, start_size) = match self.mask_process {
            MaskProcess::FullAtEntry => ("full_at_entry", 4),
            MaskProcess::Example2Incremental { start_size } => ("example2_incremental", start_size),
        };
        let (reveal_name, p) = match self.reveal_process {
            RevealProcess::AllUsers => ("all_users", 0.5),
            RevealProcess::BernoulliGrowth { p } => ("bernoulli_growth", p),
        };
        let new_user = match self.new_user_mask {
            NewUserMaskLaw::FullSet => "full_set",
            NewUserMaskLaw::SameAsM1 => "same_as_m1",
        };
        let (model_name, delta) = match self.rating_model {
            RatingModel::MeanRating => ("mean_rating", 0.1),
            RatingModel::MeanRatingMultiplicativeNoise { delta } => {
                ("mean_rating_multiplicative_noise", delta)
            }
        };
        let (schedule_name, constant_k, exponent) = match self.schedule {
            KSchedule::Ex1Rate { .. } => ("ex1_rate", 1, 0.4),
            KSchedule::Ex2Rate => ("ex2_rate", 1, 0.4),
            KSchedule::Constant(c) => ("constant", c, 0.4),
            KSchedule::Power(a) => ("power", 1, a),
        };
        let n_values = self
            .n_values
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            format!("model.d = {}", self.scale.d()),
            format!("model.s = {}", self.scale.s()),
            format!("mask.process = {mask_name}"),
            format!("mask.start_size = {start_size}"),
            format!("reveal.process = {reveal_name}"),
            format!("reveal.p = {p}"),
            format!("new_user.mask = {new_user}"),
            format!("rating.model = {model_name}"),
            format!("rating.delta = {delta}"),
            format!("estimator.psi = {}", self.psi),
            format!("experiment.schedule = {schedule_name}"),
            format!("experiment.k = {constant_k}"),
            format!("experiment.exponent = {exponent}"),
            format!("experiment.n_values = {n_values}"),
            format!("run.seed = {}", self.seed),
            format!("run.trials = {}", self.trials),
        ]
    }

    pub fn resolved_text(&self) -> String {
        let mut text = self.resolved_lines().join("\n");
        text.push('\n');
        text
    }
}

const KNOWN_KEYS: &[&str] = &[
    "model.d",
    "model.s",
    "mask.process",
    "mask.start_size",
    "reveal.process",
    "reveal.p",
    "new_user.mask",
    "rating.model",
    "rating.delta",
    "estimator.psi",
    "experiment.schedule",
    "experiment.k",
    "experiment.exponent",
    "experiment.n_values",
    "run.seed",
    "run.trials",
];

fn bad_key(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| bad_key(key, format!("cannot parse `{raw}`"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| bad_key(key, "required key is missing"))?;
        raw.parse()
            .map_err(|_| bad_key(key, format!("cannot parse `{raw}`")))
    }
}

/// Parses config text; see the module docs for the format.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let mut raw = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::ConfigFormat(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(bad_key(&key, "unknown key"));
        }
        if raw.insert(key.clone(), value).is_some() {
            return Err(bad_key(&key, "duplicate key"));
        }
    }
    build(RawConfig(raw))
}

/// Reads and parses a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_config_str(&text)
}

fn build(raw: RawConfig) -> Result<ScenarioConfig> {
    let d: usize = raw.require("model.d")?;
    let s: f64 = raw.require("model.s")?;
    let scale = RatingScale::new(d, s).map_err(|e| bad_key("model.d/model.s", e.to_string()))?;

    let start_size: usize = raw.parse("mask.start_size", 4)?;
    if start_size < 1 {
        return Err(bad_key("mask.start_size", "must be at least 1"));
    }
    let mask_process = match raw.get("mask.process").unwrap_or("full_at_entry") {
        "full_at_entry" => MaskProcess::FullAtEntry,
        "example2_incremental" => {
            if d < start_size {
                return Err(bad_key(
                    "mask.start_size",
                    format!("needs d >= start_size, got d = {d} < {start_size}"),
                ));
            }
            MaskProcess::Example2Incremental { start_size }
        }
        other => {
            return Err(bad_key(
                "mask.process",
                format!(
                    "unknown process `{other}`; expected full_at_entry or example2_incremental"
                ),
            ))
        }
    };

    let p: f64 = raw.parse("reveal.p", 0.5)?;
    if raw.get("reveal.p").is_some() && !(p > 0.0 && p < 1.0) {
        return Err(bad_key("reveal.p", format!("must lie in (0, 1), got {p}")));
    }
    let reveal_process = match raw.get("reveal.process").unwrap_or("all_users") {
        "all_users" => RevealProcess::AllUsers,
        "bernoulli_growth" => RevealProcess::BernoulliGrowth { p },
        other => {
            return Err(bad_key(
                "reveal.process",
                format!("unknown process `{other}`; expected all_users or bernoulli_growth"),
            ))
        }
    };

    let new_user_mask = match raw.get("new_user.mask").unwrap_or("full_set") {
        "full_set" => NewUserMaskLaw::FullSet,
        "same_as_m1" => {
            if d < 4 {
                return Err(bad_key("new_user.mask", "same_as_m1 needs d >= 4"));
            }
            NewUserMaskLaw::SameAsM1
        }
        other => {
            return Err(bad_key(
                "new_user.mask",
                format!("unknown law `{other}`; expected full_set or same_as_m1"),
            ))
        }
    };

    let delta: f64 = raw.parse("rating.delta", 0.1)?;
    let rating_model = match raw.get("rating.model").unwrap_or("mean_rating") {
        "mean_rating" => RatingModel::MeanRating,
        "mean_rating_multiplicative_noise" => {
            let ceiling = (s - 1.0) / (s + 1.0);
            if !(delta >= 0.0 && delta < ceiling) {
                return Err(bad_key(
                    "rating.delta",
                    format!("must lie in [0, {ceiling}) for s = {s}, got {delta}"),
                ));
            }
            RatingModel::MeanRatingMultiplicativeNoise { delta }
        }
        other => {
            return Err(bad_key(
                "rating.model",
                format!(
                "unknown model `{other}`; expected mean_rating or mean_rating_multiplicative_noise"
            ),
            ))
        }
    };

    let psi: SmoothingPsi = match raw.get("estimator.psi") {
        None => SmoothingPsi::Identity,
        Some(raw_psi) => raw_psi
            .parse()
            .map_err(|_| bad_key("estimator.psi", format!("unknown smoothing `{raw_psi}`")))?,
    };

    let constant_k: usize = raw.parse("experiment.k", 1)?;
    let exponent: f64 = raw.parse("experiment.exponent", 0.4)?;
    let schedule =
        match raw.get("experiment.schedule").unwrap_or("ex1_rate") {
            "ex1_rate" => {
                KSchedule::ex1_rate(d).map_err(|e| bad_key("experiment.schedule", e.to_string()))?
            }
            "ex2_rate" => KSchedule::Ex2Rate,
            "constant" => KSchedule::constant(constant_k)
                .map_err(|e| bad_key("experiment.k", e.to_string()))?,
            "power" => KSchedule::power(exponent)
                .map_err(|e| bad_key("experiment.exponent", e.to_string()))?,
            other => {
                return Err(bad_key(
                    "experiment.schedule",
                    format!(
                    "unknown schedule `{other}`; expected ex1_rate, ex2_rate, constant or power"
                ),
                ))
            }
        };

    let n_values = match raw.get("experiment.n_values") {
        None => vec![100, 400, 1600, 6400],
        Some(list) => {
            let mut values = Vec::new();
            for part in list.split(',') {
                let n: usize = part.trim().parse().map_err(|_| {
                    bad_key("experiment.n_values", format!("cannot parse `{part}`"))
                })?;
                if n < 1 {
                    return Err(bad_key("experiment.n_values", "entries must be >= 1"));
                }
                values.push(n);
            }
            if values.is_empty() {
                return Err(bad_key("experiment.n_values", "must not be empty"));
            }
            if !values.windows(2).all(|w| w[0] < w[1]) {
                return Err(bad_key("experiment.n_values", "must be strictly ascending"));
            }
            values
        }
    };

    let seed: u64 = raw.parse("run.seed", 42)?;
    let trials: usize = raw.parse("run.trials", 200)?;
    if trials < 1 {
        return Err(bad_key("run.trials", "must be at least 1"));
    }

    Ok(ScenarioConfig {
        scale,
        mask_process,
        reveal_process,
        new_user_mask,
        rating_model,
        psi,
        schedule,
        n_values,
        seed,
        trials,
    })
}
