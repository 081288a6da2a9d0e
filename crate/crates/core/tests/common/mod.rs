#![allow(dead_code)]

use ucs_core::{BitString, Classifier, Sample, TernaryCondition};

/// Every ternary string of length `len`, as text.
pub fn all_conditions(len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..len {
        out = out.into_iter().flat_map(|p| ['0', '1', '#'].map(|c| format!("{p}{c}"))).collect();
    }
    out
}

/// Every binary string of length `len`, as text.
pub fn all_inputs(len: usize) -> Vec<String> {
    (0..1u32 << len).map(|v| format!("{v:0len$b}")).collect()
}

/// Text-level matching: each position is `#` or equals the input bit.
pub fn oracle_matches(cond: &str, input: &str) -> bool {
    cond.chars().zip(input.chars()).all(|(c, b)| c == '#' || c == b)
}

/// Inputs matched by `cond`, found by enumeration.
pub fn matched_set(cond: &str) -> Vec<String> {
    all_inputs(cond.len()).into_iter().filter(|i| oracle_matches(cond, i)).collect()
}

pub fn bits(s: &str) -> BitString {
    s.chars().map(|c| c == '1').collect()
}

pub fn cond(s: &str) -> TernaryCondition {
    s.parse().unwrap()
}

pub fn sample(s: &str, class: usize) -> Sample {
    Sample::new(bits(s), class)
}

pub fn rule(c: &str, class: usize, fitness: f64, numerosity: u64) -> Classifier {
    let mut r = Classifier::new(cond(c), class);
    r.fitness = fitness;
    r.numerosity = numerosity;
    r
}
