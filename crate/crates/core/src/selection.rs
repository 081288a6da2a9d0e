//! Parent selection over the correct set.
//!
//! Four strategies are available. Roulette and tournament rank candidates
//! by their aggregate fitness. Lexicase filters candidates one training case
//! at a time in random order, keeping only those that classify the case
//! correctly. Batch-lexicase filters on shuffled batches of cases instead,
//! keeping candidates whose accuracy on the batch clears a threshold; the
//! batch size and threshold set its selection pressure.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::config::{FinalPick, UcsConfig, ZeroMatchPolicy};
use crate::error::{invalid, Error, Result};
use crate::model::{Classifier, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionStrategy {
    Roulette,
    Tournament { fraction: f64 },
    Lexicase,
    BatchLexicase { batch_size: usize, threshold: f64 },
}

impl SelectionStrategy {
    pub fn tournament() -> Self {
        SelectionStrategy::Tournament { fraction: 0.4 }
    }

    pub fn batch_lexicase() -> Self {
        SelectionStrategy::BatchLexicase { batch_size: 100, threshold: 0.9 }
    }

    /// Short name of the strategy family, without parameters.
    pub fn kind(&self) -> &'static str {
        match self {
            SelectionStrategy::Roulette => "roulette",
            SelectionStrategy::Tournament { .. } => "tournament",
            SelectionStrategy::Lexicase => "lexicase",
            SelectionStrategy::BatchLexicase { .. } => "batch-lexicase",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionStrategy::Tournament { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                Err(invalid("tournament fraction", format!("{fraction} is outside (0, 1]")))
            }
            SelectionStrategy::BatchLexicase { batch_size: 0, .. } => Err(invalid("batch size", "must be at least 1")),
            SelectionStrategy::BatchLexicase { threshold, .. } if !(threshold > 0.0 && threshold < 1.0) => {
                Err(invalid("batch threshold", format!("{threshold} is outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    /// Picks one parent index (into `candidates`).
    pub fn select<R: Rng + ?Sized>(
        &self,
        candidates: &CandidateView<'_>,
        cases: &[Sample],
        config: &UcsConfig,
        rng: &mut R,
    ) -> Result<usize> {
        match *self {
            SelectionStrategy::Roulette => select_roulette(candidates, rng),
            SelectionStrategy::Tournament { fraction } => select_tournament(candidates, fraction, rng),
            SelectionStrategy::Lexicase => select_lexicase_with(candidates, cases, config.final_pick, rng),
            SelectionStrategy::BatchLexicase { batch_size, threshold } => select_batch_lexicase_with(
                candidates,
                cases,
                batch_size,
                threshold,
                config.zero_match_policy,
                config.final_pick,
                rng,
            ),
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionStrategy::Roulette => f.write_str("roulette"),
            SelectionStrategy::Tournament { fraction } => write!(f, "tournament:{fraction}"),
            SelectionStrategy::Lexicase => f.write_str("lexicase"),
            SelectionStrategy::BatchLexicase { batch_size, threshold } => {
                write!(f, "batch-lexicase:{batch_size}:{threshold}")
            }
        }
    }
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    /// Parses `roulette`, `tournament[:fraction]`, `lexicase` and
    /// `batch-lexicase[:size[:threshold]]`. Omitted parameters take their
    /// defaults (0.4, 100, 0.9).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid selection strategy {s:?}"));
        let mut parts = s.trim().split(':');
        let name = parts.next().ok_or_else(bad)?;
        let args: Vec<&str> = parts.collect();
        let strategy = match (name, args.as_slice()) {
            ("roulette", []) => SelectionStrategy::Roulette,
            ("lexicase", []) => SelectionStrategy::Lexicase,
            ("tournament", []) => SelectionStrategy::tournament(),
            ("tournament", [f]) => SelectionStrategy::Tournament { fraction: f.parse().map_err(|_| bad())? },
            ("batch-lexicase", rest) if rest.len() <= 2 => {
                let mut st = SelectionStrategy::batch_lexicase();
                if let SelectionStrategy::BatchLexicase { batch_size, threshold } = &mut st {
                    if let Some(b) = rest.first() {
                        *batch_size = b.parse().map_err(|_| bad())?;
                    }
                    if let Some(t) = rest.get(1) {
                        *threshold = t.parse().map_err(|_| bad())?;
                    }
                }
                st
            }
            _ => return Err(bad()),
        };
        strategy.validate().map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        Ok(strategy)
    }
}

/// The candidates of one selection: a borrowed subset of the population
/// (normally the correct set). Indices returned by the selectors refer to
/// positions in this view.
#[derive(Debug, Clone, Copy)]
pub struct CandidateView<'a> {
    pool: &'a [Classifier],
    members: Option<&'a [usize]>,
}

impl<'a> CandidateView<'a> {
    /// Every classifier of `pool` is a candidate.
    pub fn all(pool: &'a [Classifier]) -> Self {
        Self { pool, members: None }
    }

    /// Only `pool[members[i]]` are candidates.
    pub fn subset(pool: &'a [Classifier], members: &'a [usize]) -> Self {
        Self { pool, members: Some(members) }
    }

    pub fn len(&self) -> usize {
        self.members.map_or(self.pool.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> &'a Classifier {
        &self.pool[self.pool_index(i)]
    }

    /// Position in the underlying pool of candidate `i`.
    #[inline]
    pub fn pool_index(&self, i: usize) -> usize {
        self.members.map_or(i, |m| m[i])
    }

    pub fn micro_count(&self) -> u64 {
        (0..self.len()).map(|i| self.get(i).numerosity).sum()
    }
}

fn non_empty(candidates: &CandidateView<'_>) -> Result<()> {
    if candidates.is_empty() {
        Err(Error::EmptyCandidates)
    } else {
        Ok(())
    }
}

/// Fitness-proportionate choice with weight `fitness * numerosity`. Falls
/// back to a uniform pick when every weight is zero.
pub fn select_roulette<R: Rng + ?Sized>(candidates: &CandidateView<'_>, rng: &mut R) -> Result<usize> {
    non_empty(candidates)?;
    let weight = |i: usize| {
        let c = candidates.get(i);
        c.fitness * c.numerosity as f64
    };
    let total: f64 = (0..candidates.len()).map(weight).sum();
    if total <= 0.0 {
        return Ok(rng.gen_range(0..candidates.len()));
    }
    let mut target = rng.gen::<f64>() * total;
    let mut last_positive = 0;
    for i in 0..candidates.len() {
        let w = weight(i);
        if w > 0.0 {
            last_positive = i;
            if target < w {
                return Ok(i);
            }
            target -= w;
        }
    }
    // Rounding can leave a sliver past the final bucket.
    Ok(last_positive)
}

/// Number of microclassifier slots drawn by a tournament.
pub fn tournament_size(fraction: f64, micro_count: u64) -> usize {
    let t = libm::ceil(fraction * micro_count as f64) as usize;
    t.clamp(1, micro_count.max(1) as usize)
}

/// Samples `tournament_size` microclassifier slots without replacement and
/// returns the fittest candidate among them, breaking exact ties uniformly.
pub fn select_tournament<R: Rng + ?Sized>(candidates: &CandidateView<'_>, fraction: f64, rng: &mut R) -> Result<usize> {
    non_empty(candidates)?;
    // Cumulative numerosity: slot s belongs to the first candidate whose
    // prefix sum exceeds s.
    let mut prefix = Vec::with_capacity(candidates.len());
    let mut acc = 0u64;
    for i in 0..candidates.len() {
        acc += candidates.get(i).numerosity;
        prefix.push(acc);
    }
    let t = tournament_size(fraction, acc);
    let mut best: Vec<usize> = Vec::new();
    let mut best_fitness = f64::NEG_INFINITY;
    for slot in rand::seq::index::sample(rng, acc as usize, t) {
        let i = prefix.partition_point(|&p| p <= slot as u64);
        let f = candidates.get(i).fitness;
        if f > best_fitness {
            best_fitness = f;
            best.clear();
            best.push(i);
        } else if f == best_fitness && !best.contains(&i) {
            best.push(i);
        }
    }
    Ok(if best.len() == 1 { best[0] } else { best[rng.gen_range(0..best.len())] })
}

/// A Fisher-Yates shuffle performed one draw at a time, so selection that
/// stops early does not pay for ordering the whole case list.
struct LazyShuffle {
    order: Vec<usize>,
    next: usize,
}

impl LazyShuffle {
    fn new(n: usize) -> Self {
        Self { order: (0..n).collect(), next: 0 }
    }

    fn remaining(&self) -> usize {
        self.order.len() - self.next
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<usize> {
        if self.next == self.order.len() {
            return None;
        }
        let j = rng.gen_range(self.next..self.order.len());
        self.order.swap(self.next, j);
        self.next += 1;
        Some(self.order[self.next - 1])
    }
}

fn final_pick<R: Rng + ?Sized>(alive: &[usize], candidates: &CandidateView<'_>, pick: FinalPick, rng: &mut R) -> usize {
    match pick {
        FinalPick::Uniform => alive[rng.gen_range(0..alive.len())],
        FinalPick::Numerosity => {
            let total: u64 = alive.iter().map(|&i| candidates.get(i).numerosity).sum();
            let mut slot = rng.gen_range(0..total);
            for &i in alive {
                let n = candidates.get(i).numerosity;
                if slot < n {
                    return i;
                }
                slot -= n;
            }
            unreachable!("slot drawn below the numerosity total")
        }
    }
}

/// Lexicase selection with a uniform final pick.
pub fn select_lexicase<R: Rng + ?Sized>(
    candidates: &CandidateView<'_>,
    cases: &[Sample],
    rng: &mut R,
) -> Result<usize> {
    select_lexicase_with(candidates, cases, FinalPick::Uniform, rng)
}

/// Lexicase selection. Cases are visited in random order; a candidate
/// survives a case if it matches it and advocates its class. A case that
/// nobody survives is skipped.
pub fn select_lexicase_with<R: Rng + ?Sized>(
    candidates: &CandidateView<'_>,
    cases: &[Sample],
    pick: FinalPick,
    rng: &mut R,
) -> Result<usize> {
    non_empty(candidates)?;
    if candidates.len() == 1 {
        return Ok(0);
    }
    let mut alive: Vec<usize> = (0..candidates.len()).collect();
    let mut next = Vec::with_capacity(alive.len());
    let mut order = LazyShuffle::new(cases.len());
    while let Some(case) = order.draw(rng) {
        let case = &cases[case];
        next.clear();
        next.extend(alive.iter().copied().filter(|&i| candidates.get(i).is_correct_on(case)));
        if !next.is_empty() {
            core::mem::swap(&mut alive, &mut next);
        }
        if alive.len() == 1 {
            return Ok(alive[0]);
        }
    }
    Ok(final_pick(&alive, candidates, pick, rng))
}

/// Batch-lexicase selection with the default policies (zero-match
/// candidates eliminated, uniform final pick).
pub fn select_batch_lexicase<R: Rng + ?Sized>(
    candidates: &CandidateView<'_>,
    cases: &[Sample],
    batch_size: usize,
    threshold: f64,
    rng: &mut R,
) -> Result<usize> {
    select_batch_lexicase_with(
        candidates,
        cases,
        batch_size,
        threshold,
        ZeroMatchPolicy::Eliminate,
        FinalPick::Uniform,
        rng,
    )
}

/// Which candidates survive one batch: those whose accuracy on the batch
/// exceeds `threshold`, plus (under [`ZeroMatchPolicy::Retain`]) those that
/// match nothing in it.
pub fn batch_survivors<'s, I>(
    candidates: &CandidateView<'_>,
    alive: &[usize],
    batch: I,
    threshold: f64,
    zero_match: ZeroMatchPolicy,
) -> Vec<usize>
where
    I: IntoIterator<Item = &'s Sample> + Clone,
{
    alive
        .iter()
        .copied()
        .filter(|&i| {
            let c = candidates.get(i);
            let (mut matched, mut correct) = (0u32, 0u32);
            for case in batch.clone() {
                if c.matches(&case.features) {
                    matched += 1;
                    if c.class_label == case.class_label {
                        correct += 1;
                    }
                }
            }
            if matched == 0 {
                zero_match == ZeroMatchPolicy::Retain
            } else {
                correct as f64 / matched as f64 > threshold
            }
        })
        .collect()
}

/// Batch-lexicase selection. Cases are shuffled and cut into consecutive
/// batches of `batch_size` (the last one may be shorter); each batch keeps
/// the survivors given by [`batch_survivors`]. A batch that nobody survives
/// is skipped.
pub fn select_batch_lexicase_with<R: Rng + ?Sized>(
    candidates: &CandidateView<'_>,
    cases: &[Sample],
    batch_size: usize,
    threshold: f64,
    zero_match: ZeroMatchPolicy,
    pick: FinalPick,
    rng: &mut R,
) -> Result<usize> {
    non_empty(candidates)?;
    if batch_size == 0 {
        return Err(invalid("batch size", "must be at least 1"));
    }
    if candidates.len() == 1 {
        return Ok(0);
    }
    let mut alive: Vec<usize> = (0..candidates.len()).collect();
    let mut order = LazyShuffle::new(cases.len());
    let mut batch = Vec::with_capacity(batch_size.min(cases.len()));
    while order.remaining() > 0 {
        batch.clear();
        while batch.len() < batch_size {
            match order.draw(rng) {
                Some(i) => batch.push(i),
                None => break,
            }
        }
        let survivors = batch_survivors(candidates, &alive, batch.iter().map(|&i| &cases[i]), threshold, zero_match);
        if !survivors.is_empty() {
            alive = survivors;
        }
        if alive.len() == 1 {
            return Ok(alive[0]);
        }
    }
    Ok(final_pick(&alive, candidates, pick, rng))
}
