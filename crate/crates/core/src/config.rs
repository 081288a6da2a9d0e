//! Hyperparameters of the learner.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};

/// When covering creates a new rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverTrigger {
    /// No rule in the match set advocates the sample's class.
    EmptyCorrectSet,
    /// No rule matches the sample at all.
    EmptyMatchSet,
}

/// What batch-lexicase does with a candidate that matches nothing in a batch.
///
/// Its batch accuracy is 0/0. `Eliminate` treats that as failing the
/// threshold. `Retain` lets the candidate through, which in practice
/// favours very specific rules, since they match almost no batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroMatchPolicy {
    Retain,
    Eliminate,
}

/// How lexicase variants choose among several candidates left at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalPick {
    /// Uniform over macroclassifiers.
    Uniform,
    /// Proportional to numerosity.
    Numerosity,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    _ => Err(Error::Parse(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), s
                    ))),
                }
            }
        }
    };
}

text_enum!(CoverTrigger { EmptyCorrectSet => "correct-set", EmptyMatchSet => "match-set" });
text_enum!(ZeroMatchPolicy { Retain => "retain", Eliminate => "eliminate" });
text_enum!(FinalPick { Uniform => "uniform", Numerosity => "numerosity" });

#[derive(Debug, Clone, PartialEq)]
pub struct UcsConfig {
    /// Exponent turning accuracy into fitness.
    pub nu: f64,
    /// Carried for completeness; the supervised fitness never reads it.
    pub alpha: f64,
    /// Learning rate of the correct-set size estimate.
    pub beta: f64,
    pub theta_ga: u64,
    /// Crossover probability.
    pub chi: f64,
    /// Per-position mutation probability.
    pub mu: f64,
    pub theta_del: u64,
    pub delta: f64,
    /// Bound on total numerosity.
    pub max_population: u64,
    /// Probability that covering turns a position into `#`.
    pub p_hash: f64,
    pub tournament_fraction: f64,
    pub batch_size: usize,
    pub batch_threshold: f64,
    /// Training steps between subsumption passes.
    pub subsumption_interval: u64,
    pub theta_sub: u64,
    pub acc_sub: f64,
    pub seed: u64,
    pub cover_trigger: CoverTrigger,
    pub zero_match_policy: ZeroMatchPolicy,
    pub final_pick: FinalPick,
}

impl Default for UcsConfig {
    fn default() -> Self {
        Self {
            nu: 5.0,
            alpha: 0.1,
            beta: 0.2,
            theta_ga: 25,
            chi: 0.8,
            mu: 0.04,
            theta_del: 20,
            delta: 0.1,
            max_population: 1000,
            p_hash: 0.33,
            tournament_fraction: 0.4,
            batch_size: 100,
            batch_threshold: 0.9,
            subsumption_interval: 1000,
            theta_sub: 20,
            acc_sub: 0.99,
            seed: 0,
            cover_trigger: CoverTrigger::EmptyCorrectSet,
            zero_match_policy: ZeroMatchPolicy::Eliminate,
            final_pick: FinalPick::Uniform,
        }
    }
}

fn probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("{p} is not a probability")))
    }
}

fn positive<T: PartialOrd + Default + core::fmt::Display>(name: &'static str, v: T) -> Result<()> {
    if v > T::default() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be positive")))
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse(format!("invalid value {value:?} for {key}")))
}

impl UcsConfig {
    /// Keys accepted by [`UcsConfig::set`], in the order of
    /// [`UcsConfig::entries`].
    pub const KEYS: [&'static str; 20] = [
        "nu",
        "alpha",
        "beta",
        "theta-ga",
        "chi",
        "mu",
        "theta-del",
        "delta",
        "max-population",
        "p-hash",
        "tournament-fraction",
        "batch-size",
        "batch-threshold",
        "subsumption-interval",
        "theta-sub",
        "acc-sub",
        "seed",
        "cover-trigger",
        "zero-match",
        "final-pick",
    ];

    pub fn validate(&self) -> Result<()> {
        positive("nu", self.nu)?;
        probability("alpha", self.alpha)?;
        probability("beta", self.beta)?;
        positive("theta-ga", self.theta_ga)?;
        probability("chi", self.chi)?;
        probability("mu", self.mu)?;
        positive("theta-del", self.theta_del)?;
        probability("delta", self.delta)?;
        positive("max-population", self.max_population)?;
        probability("p-hash", self.p_hash)?;
        if !(self.tournament_fraction > 0.0 && self.tournament_fraction <= 1.0) {
            return Err(invalid("tournament-fraction", "must lie in (0, 1]"));
        }
        positive("batch-size", self.batch_size)?;
        if !(self.batch_threshold > 0.0 && self.batch_threshold < 1.0) {
            return Err(invalid("batch-threshold", "must lie strictly between 0 and 1"));
        }
        positive("subsumption-interval", self.subsumption_interval)?;
        positive("theta-sub", self.theta_sub)?;
        probability("acc-sub", self.acc_sub)?;
        Ok(())
    }

    /// Sets one parameter from its `key = value` text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "nu" => self.nu = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "theta-ga" => self.theta_ga = parse(key, value)?,
            "chi" => self.chi = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "theta-del" => self.theta_del = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "max-population" => self.max_population = parse(key, value)?,
            "p-hash" => self.p_hash = parse(key, value)?,
            "tournament-fraction" => self.tournament_fraction = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "batch-threshold" => self.batch_threshold = parse(key, value)?,
            "subsumption-interval" => self.subsumption_interval = parse(key, value)?,
            "theta-sub" => self.theta_sub = parse(key, value)?,
            "acc-sub" => self.acc_sub = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "cover-trigger" => self.cover_trigger = value.trim().parse()?,
            "zero-match" => self.zero_match_policy = value.trim().parse()?,
            "final-pick" => self.final_pick = value.trim().parse()?,
            _ => return Err(Error::Parse(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Every parameter as `(key, value)` text, readable back with `set`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let values = [
            self.nu.to_string(),
            self.alpha.to_string(),
            self.beta.to_string(),
            self.theta_ga.to_string(),
            self.chi.to_string(),
            self.mu.to_string(),
            self.theta_del.to_string(),
            self.delta.to_string(),
            self.max_population.to_string(),
            self.p_hash.to_string(),
            self.tournament_fraction.to_string(),
            self.batch_size.to_string(),
            self.batch_threshold.to_string(),
            self.subsumption_interval.to_string(),
            self.theta_sub.to_string(),
            self.acc_sub.to_string(),
            self.seed.to_string(),
            self.cover_trigger.as_str().to_string(),
            self.zero_match_policy.as_str().to_string(),
            self.final_pick.as_str().to_string(),
        ];
        Self::KEYS.into_iter().zip(values).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = UcsConfig::default();
        c.validate().unwrap();
        assert_eq!((c.nu, c.alpha, c.beta), (5.0, 0.1, 0.2));
        assert_eq!((c.theta_ga, c.chi, c.mu), (25, 0.8, 0.04));
        assert_eq!((c.theta_del, c.delta, c.max_population), (20, 0.1, 1000));
        assert_eq!((c.tournament_fraction, c.batch_size, c.batch_threshold), (0.4, 100, 0.9));
    }

    #[test]
    fn entries_round_trip() {
        let mut c = UcsConfig { mu: 0.125, seed: 99, final_pick: FinalPick::Numerosity, ..Default::default() };
        c.cover_trigger = CoverTrigger::EmptyMatchSet;
        let mut back = UcsConfig::default();
        for (k, v) in c.entries() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = UcsConfig::default();
        assert!(c.set("mu", "abc").is_err());
        assert!(c.set("bogus", "1").is_err());
        c.batch_threshold = 1.0;
        assert!(c.validate().is_err());
        c.batch_threshold = 0.9;
        c.chi = 1.5;
        assert!(c.validate().is_err());
    }
}
