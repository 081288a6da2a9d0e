//! Rule representation and the accuracy/fitness arithmetic.
//!
//! A classifier is an `if <condition> then <class>` rule over binary
//! features. Conditions are ternary strings over `{0, 1, #}` where `#`
//! matches either bit.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bits::{words_for, BitString, WORD};
use crate::config::UcsConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TernarySymbol {
    Zero,
    One,
    /// Don't care.
    Hash,
}

impl TernarySymbol {
    pub fn to_char(self) -> char {
        match self {
            TernarySymbol::Zero => '0',
            TernarySymbol::One => '1',
            TernarySymbol::Hash => '#',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(TernarySymbol::Zero),
            '1' => Some(TernarySymbol::One),
            '#' => Some(TernarySymbol::Hash),
            _ => None,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            TernarySymbol::One
        } else {
            TernarySymbol::Zero
        }
    }
}

/// A ternary condition stored as two bit planes: `care` marks the
/// specified positions and `value` holds their bit (zero where `care` is
/// zero).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TernaryCondition {
    care: Vec<u64>,
    value: Vec<u64>,
    len: usize,
}

impl TernaryCondition {
    /// All-wildcard condition of the given length.
    pub fn general(len: usize) -> Self {
        let n = words_for(len);
        Self { care: vec![0; n], value: vec![0; n], len }
    }

    /// Fully specified condition equal to `bits`.
    pub fn from_bits(bits: &BitString) -> Self {
        let mut c = Self::general(bits.len());
        for (i, b) in bits.iter().enumerate() {
            c.set(i, TernarySymbol::from_bit(b));
        }
        c
    }

    pub fn from_symbols(symbols: &[TernarySymbol]) -> Self {
        let mut c = Self::general(symbols.len());
        for (i, &s) in symbols.iter().enumerate() {
            c.set(i, s);
        }
        c
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> TernarySymbol {
        assert!(i < self.len, "position {i} out of range for length {}", self.len);
        let (w, m) = (i / WORD, 1u64 << (i % WORD));
        if self.care[w] & m == 0 {
            TernarySymbol::Hash
        } else if self.value[w] & m == 0 {
            TernarySymbol::Zero
        } else {
            TernarySymbol::One
        }
    }

    pub fn set(&mut self, i: usize, symbol: TernarySymbol) {
        assert!(i < self.len, "position {i} out of range for length {}", self.len);
        let (w, m) = (i / WORD, 1u64 << (i % WORD));
        match symbol {
            TernarySymbol::Hash => {
                self.care[w] &= !m;
                self.value[w] &= !m;
            }
            TernarySymbol::Zero => {
                self.care[w] |= m;
                self.value[w] &= !m;
            }
            TernarySymbol::One => {
                self.care[w] |= m;
                self.value[w] |= m;
            }
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = TernarySymbol> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Number of `#` positions.
    pub fn hash_count(&self) -> usize {
        let specified: u32 = self.care.iter().map(|w| w.count_ones()).sum();
        self.len - specified as usize
    }

    /// Unchecked match on equal-length inputs; the hot path of training.
    #[inline]
    pub(crate) fn matches_unchecked(&self, features: &BitString) -> bool {
        self.care.iter().zip(&self.value).zip(features.words()).all(|((&care, &value), &f)| (f ^ value) & care == 0)
    }

    /// Unchecked generality test on equal-length conditions.
    pub(crate) fn generalizes_unchecked(&self, other: &Self) -> bool {
        let covers = self
            .care
            .iter()
            .zip(&self.value)
            .zip(other.care.iter().zip(&other.value))
            .all(|((&ca, &va), (&cb, &vb))| ca & !cb == 0 && (va ^ vb) & ca == 0);
        covers && self.hash_count() > other.hash_count()
    }
}

impl fmt::Display for TernaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.symbols() {
            fmt::Write::write_char(f, s.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for TernaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for TernaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(|c| {
                TernarySymbol::from_char(c)
                    .ok_or_else(|| Error::Parse(alloc::format!("invalid condition symbol {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_symbols(&symbols))
    }
}

/// True iff every specified position of `condition` equals the feature bit.
pub fn matches(condition: &TernaryCondition, features: &BitString) -> Result<bool> {
    if condition.len() != features.len() {
        return Err(Error::LengthMismatch { expected: condition.len(), found: features.len() });
    }
    Ok(condition.matches_unchecked(features))
}

/// True iff `a` agrees with `b` wherever `a` is specified and `a` has
/// strictly more wildcards. Identical conditions are not more general than
/// each other.
pub fn is_more_general(a: &TernaryCondition, b: &TernaryCondition) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.generalizes_unchecked(b))
}

/// A macroclassifier: one rule plus its statistics. `numerosity` counts the
/// identical microclassifiers it stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub condition: TernaryCondition,
    pub class_label: usize,
    /// Times the rule was in the match set (its experience).
    pub matches: u64,
    pub corrects: u64,
    pub numerosity: u64,
    pub fitness: f64,
    /// Running estimate of the correct-set size the rule takes part in.
    pub cs_size_estimate: f64,
    pub ga_timestamp: u64,
}

impl Classifier {
    pub fn new(condition: TernaryCondition, class_label: usize) -> Self {
        Self {
            condition,
            class_label,
            matches: 0,
            corrects: 0,
            numerosity: 1,
            fitness: 1.0,
            cs_size_estimate: 1.0,
            ga_timestamp: 0,
        }
    }

    /// `corrects / matches`, or `None` before the first match.
    pub fn accuracy(&self) -> Option<f64> {
        (self.matches > 0).then(|| self.corrects as f64 / self.matches as f64)
    }

    #[inline]
    pub fn matches(&self, features: &BitString) -> bool {
        self.condition.matches_unchecked(features)
    }

    /// Matches the sample and advocates its class.
    #[inline]
    pub fn is_correct_on(&self, sample: &Sample) -> bool {
        self.class_label == sample.class_label && self.matches(&sample.features)
    }
}

/// Fitness of a rule with the given counters: accuracy raised to `nu`.
pub fn accuracy_fitness(corrects: u64, matches: u64, nu: f64) -> f64 {
    libm::pow(corrects as f64 / matches as f64, nu)
}

/// True iff `general` may absorb `specific`: same class, strictly more
/// general condition, and `general` is both experienced and accurate enough.
pub fn subsumes(general: &Classifier, specific: &Classifier, config: &UcsConfig) -> bool {
    general.class_label == specific.class_label
        && general.matches >= config.theta_sub
        && general.accuracy().is_some_and(|acc| acc >= config.acc_sub)
        && general.condition.len() == specific.condition.len()
        && general.condition.generalizes_unchecked(&specific.condition)
}

/// Applies the statistics update for one presentation of a sample that
/// `classifier` matched. `correct_set_size` is the numerosity of the
/// correct set.
pub fn update_on_outcome(classifier: &mut Classifier, in_correct_set: bool, correct_set_size: u64, config: &UcsConfig) {
    classifier.matches += 1;
    if in_correct_set {
        classifier.corrects += 1;
        classifier.cs_size_estimate += config.beta * (correct_set_size as f64 - classifier.cs_size_estimate);
    }
    classifier.fitness = accuracy_fitness(classifier.corrects, classifier.matches, config.nu);
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    pub features: BitString,
    pub class_label: usize,
}

impl Sample {
    pub fn new(features: BitString, class_label: usize) -> Self {
        Self { features, class_label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub n_features: usize,
    pub n_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Builds a dataset, checking every row against the declared shape.
    pub fn new(name: impl Into<String>, n_features: usize, n_classes: usize, samples: Vec<Sample>) -> Result<Self> {
        if n_features == 0 {
            return Err(crate::error::invalid("n_features", "must be positive"));
        }
        if n_classes < 2 {
            return Err(crate::error::invalid("n_classes", "need at least two classes"));
        }
        for s in &samples {
            if s.features.len() != n_features {
                return Err(Error::LengthMismatch { expected: n_features, found: s.features.len() });
            }
            if s.class_label >= n_classes {
                return Err(crate::error::invalid(
                    "class_label",
                    alloc::format!("{} is not below {n_classes}", s.class_label),
                ));
            }
        }
        Ok(Self { name: name.into(), n_features, n_classes, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for s in &self.samples {
            counts[s.class_label] += 1;
        }
        counts
    }
}
