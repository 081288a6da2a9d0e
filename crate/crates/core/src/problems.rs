//! Benchmark problems: multiplexer, parity and the seven-segment LED
//! display. The car-evaluation data is read from disk by the `ucs` crate.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bits::BitString;
use crate::error::{invalid, Error, Result};
use crate::model::{Dataset, Sample};

/// Largest truth table [`gen_boolean_dataset`] will enumerate.
pub const ENUMERATION_LIMIT_BITS: usize = 24;

pub const LED_FEATURES: usize = 7;
pub const LED_CLASSES: usize = 10;
pub const CAR_FEATURES: usize = 21;
pub const CAR_CLASSES: usize = 4;

/// Segment patterns for digits 0-9 in the order top, top-left, top-right,
/// middle, bottom-left, bottom-right, bottom.
pub const LED_SEGMENTS: [[bool; 7]; 10] = {
    const O: bool = true;
    const X: bool = false;
    [
        [O, O, O, X, O, O, O],
        [X, X, O, X, X, O, X],
        [O, X, O, O, O, X, O],
        [O, X, O, O, X, O, O],
        [X, O, O, O, X, O, X],
        [O, O, X, O, X, O, O],
        [O, O, X, O, O, O, O],
        [O, X, O, X, X, O, X],
        [O, O, O, O, O, O, O],
        [O, O, O, O, X, O, O],
    ]
};

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// `address_bits + 2^address_bits` inputs. `samples` draws that many
    /// distinct rows instead of enumerating the truth table.
    Multiplexer {
        address_bits: usize,
        samples: Option<usize>,
    },
    Parity {
        bits: usize,
        samples: Option<usize>,
    },
    Led {
        noise: f64,
        samples: usize,
    },
    CarEval {
        path: String,
    },
}

impl ProblemSpec {
    /// Multiplexer with the given total width, if that width is valid.
    pub fn multiplexer(total_bits: usize) -> Result<Self> {
        (1..6)
            .find(|&k| k + (1usize << k) == total_bits)
            .map(|address_bits| ProblemSpec::Multiplexer { address_bits, samples: None })
            .ok_or_else(|| invalid("multiplexer width", format!("{total_bits} is not k + 2^k")))
    }

    pub fn n_features(&self) -> usize {
        match *self {
            ProblemSpec::Multiplexer { address_bits, .. } => address_bits + (1 << address_bits),
            ProblemSpec::Parity { bits, .. } => bits,
            ProblemSpec::Led { .. } => LED_FEATURES,
            ProblemSpec::CarEval { .. } => CAR_FEATURES,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            ProblemSpec::Multiplexer { .. } | ProblemSpec::Parity { .. } => 2,
            ProblemSpec::Led { .. } => LED_CLASSES,
            ProblemSpec::CarEval { .. } => CAR_CLASSES,
        }
    }

    /// Replaces the sample count (boolean problems switch to sampling).
    pub fn with_samples(mut self, n: Option<usize>) -> Self {
        match &mut self {
            ProblemSpec::Multiplexer { samples, .. } | ProblemSpec::Parity { samples, .. } => *samples = n,
            ProblemSpec::Led { samples, .. } => {
                if let Some(n) = n {
                    *samples = n;
                }
            }
            ProblemSpec::CarEval { .. } => {}
        }
        self
    }

    /// Short name used in output files, e.g. `mux11` or `parity10`.
    pub fn name(&self) -> String {
        match self {
            ProblemSpec::Multiplexer { .. } => format!("mux{}", self.n_features()),
            ProblemSpec::Parity { bits, .. } => format!("parity{bits}"),
            ProblemSpec::Led { .. } => "led".into(),
            ProblemSpec::CarEval { .. } => "car".into(),
        }
    }

    /// The class function of the noise-free boolean problems.
    pub fn class_of(&self, bits: &BitString) -> Result<usize> {
        match *self {
            ProblemSpec::Multiplexer { address_bits, .. } => mux_class(bits, address_bits),
            ProblemSpec::Parity { .. } => Ok(parity_class(bits)),
            _ => Err(invalid("problem", "only multiplexer and parity have a class function")),
        }
    }

    /// Builds the dataset for generated problems. Car evaluation has to be
    /// loaded from its file and yields [`Error::ExternalData`] here.
    pub fn materialize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        match self {
            ProblemSpec::Multiplexer { samples: None, .. } | ProblemSpec::Parity { samples: None, .. } => {
                gen_boolean_dataset(self)
            }
            ProblemSpec::Multiplexer { samples: Some(n), .. } | ProblemSpec::Parity { samples: Some(n), .. } => {
                sample_boolean_dataset(self, *n, rng)
            }
            ProblemSpec::Led { noise, samples } => gen_led(*samples, *noise, rng),
            ProblemSpec::CarEval { path } => Err(Error::ExternalData(format!("car evaluation file {path}"))),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::CarEval { path } => write!(f, "car:{path}"),
            _ => f.write_str(&self.name()),
        }
    }
}

impl FromStr for ProblemSpec {
    type Err = Error;

    /// `mux<total bits>`, `parity<n>`, `led` or `car:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid problem {s:?} (expected mux<bits>, parity<n>, led or car:<path>)"));
        if let Some(total) = s.strip_prefix("mux") {
            ProblemSpec::multiplexer(total.parse().map_err(|_| bad())?).map_err(|_| bad())
        } else if let Some(n) = s.strip_prefix("parity") {
            let bits: usize = n.parse().map_err(|_| bad())?;
            if bits == 0 {
                return Err(bad());
            }
            Ok(ProblemSpec::Parity { bits, samples: None })
        } else if s == "led" {
            Ok(ProblemSpec::Led { noise: 0.1, samples: 2000 })
        } else if let Some(path) = s.strip_prefix("car:") {
            if path.is_empty() {
                return Err(bad());
            }
            Ok(ProblemSpec::CarEval { path: path.into() })
        } else {
            Err(bad())
        }
    }
}

/// The data bit selected by the first `k` (address) bits, read most
/// significant first.
pub fn mux_class(bits: &BitString, k: usize) -> Result<usize> {
    let expected = k + (1 << k);
    if bits.len() != expected {
        return Err(Error::LengthMismatch { expected, found: bits.len() });
    }
    let address = (0..k).fold(0usize, |acc, i| (acc << 1) | bits.get(i) as usize);
    Ok(bits.get(k + address) as usize)
}

/// 1 when the number of set bits is odd.
pub fn parity_class(bits: &BitString) -> usize {
    (bits.count_ones() % 2) as usize
}

fn boolean_shape(spec: &ProblemSpec) -> Result<usize> {
    match spec {
        ProblemSpec::Multiplexer { .. } | ProblemSpec::Parity { .. } => Ok(spec.n_features()),
        _ => Err(invalid("problem", "expected a multiplexer or parity problem")),
    }
}

/// The complete truth table, rows in increasing binary order.
pub fn gen_boolean_dataset(spec: &ProblemSpec) -> Result<Dataset> {
    let len = boolean_shape(spec)?;
    if len > ENUMERATION_LIMIT_BITS {
        return Err(Error::EnumerationTooLarge { bits: len, limit: ENUMERATION_LIMIT_BITS });
    }
    let samples = (0..1u64 << len)
        .map(|row| {
            let features = BitString::from_index(row, len);
            let class = spec.class_of(&features)?;
            Ok(Sample::new(features, class))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(spec.name(), len, 2, samples)
}

/// `n_samples` distinct rows drawn uniformly at random, in draw order.
pub fn sample_boolean_dataset<R: Rng + ?Sized>(spec: &ProblemSpec, n_samples: usize, rng: &mut R) -> Result<Dataset> {
    let len = boolean_shape(spec)?;
    let available = if len >= 64 { u64::MAX } else { 1u64 << len };
    if len < 64 && n_samples as u64 > available {
        return Err(Error::TooManySamples { requested: n_samples, available });
    }
    let rows: Vec<BitString> = if len <= ENUMERATION_LIMIT_BITS && (n_samples as u64) * 2 > available {
        // Dense request: partial shuffle of the full index range.
        let mut all: Vec<u64> = (0..available).collect();
        let (chosen, _) = all.partial_shuffle(rng, n_samples);
        chosen.iter().map(|&row| BitString::from_index(row, len)).collect()
    } else {
        let mut seen = BTreeSet::new();
        let mut rows = Vec::with_capacity(n_samples);
        while rows.len() < n_samples {
            let row: BitString = (0..len).map(|_| rng.gen::<bool>()).collect();
            if seen.insert(row.clone()) {
                rows.push(row);
            }
        }
        rows
    };
    let samples = rows
        .into_iter()
        .map(|features| {
            let class = spec.class_of(&features)?;
            Ok(Sample::new(features, class))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(spec.name(), len, 2, samples)
}

/// Noisy seven-segment digits: a uniform digit, its segment pattern, and
/// each segment flipped independently with probability `noise`.
pub fn gen_led<R: Rng + ?Sized>(n_samples: usize, noise: f64, rng: &mut R) -> Result<Dataset> {
    if !(0.0..0.5).contains(&noise) {
        return Err(invalid("noise", format!("{noise} is outside [0, 0.5)")));
    }
    let samples = (0..n_samples)
        .map(|_| {
            let digit = rng.gen_range(0..LED_CLASSES);
            let features: BitString = LED_SEGMENTS[digit]
                .iter()
                .map(|&lit| if noise > 0.0 && rng.gen_bool(noise) { !lit } else { lit })
                .collect();
            Sample::new(features, digit)
        })
        .collect();
    Dataset::new("led", LED_FEATURES, LED_CLASSES, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn bits(s: &str) -> BitString {
        s.split_whitespace().map(|c| c == "1").collect()
    }

    #[test]
    fn mux_examples() {
        assert_eq!(mux_class(&BitString::zeros(11), 3), Ok(0));
        assert_eq!(mux_class(&bits("0 1 0"), 1), Ok(1));
        assert_eq!(mux_class(&bits("1 0 0 1 1 0"), 2), Ok(1));
        assert!(mux_class(&bits("1 0 0"), 2).is_err());
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_class(&bits("0 0 0 0")), 0);
        assert_eq!(parity_class(&bits("1 0 1")), 0);
        assert_eq!(parity_class(&bits("1 1 1 1 1")), 1);
    }

    #[test]
    fn mux3_truth_table() {
        // address bit a, data bits d0 d1: class = d0 if a == 0 else d1
        let d = gen_boolean_dataset(&ProblemSpec::multiplexer(3).unwrap()).unwrap();
        let labels: Vec<usize> = d.samples.iter().map(|s| s.class_label).collect();
        assert_eq!(labels, [0, 0, 1, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn enumeration_sizes() {
        let mux11 = gen_boolean_dataset(&"mux11".parse().unwrap()).unwrap();
        assert_eq!(mux11.len(), 2048);
        let parity = gen_boolean_dataset(&"parity10".parse().unwrap()).unwrap();
        assert_eq!(parity.len(), 1024);
        assert_eq!(parity.class_counts(), [512, 512]);
        assert!(matches!(
            gen_boolean_dataset(&"parity25".parse().unwrap()),
            Err(Error::EnumerationTooLarge { bits: 25, .. })
        ));
        assert!(gen_boolean_dataset(&"led".parse().unwrap()).is_err());
    }

    #[test]
    fn sampling_draws_distinct_rows() {
        let mut rng = crate::TrialRng::seed_from_u64(3);
        let spec: ProblemSpec = "mux20".parse().unwrap();
        let d = sample_boolean_dataset(&spec, 2000, &mut rng).unwrap();
        let distinct: BTreeSet<_> = d.samples.iter().map(|s| s.features.clone()).collect();
        assert_eq!(distinct.len(), 2000);
        for s in &d.samples {
            assert_eq!(spec.class_of(&s.features).unwrap(), s.class_label);
        }

        let small: ProblemSpec = "parity4".parse().unwrap();
        let mut full = sample_boolean_dataset(&small, 16, &mut rng).unwrap().samples;
        full.sort_by(|a, b| a.features.cmp(&b.features));
        let mut table = gen_boolean_dataset(&small).unwrap().samples;
        table.sort_by(|a, b| a.features.cmp(&b.features));
        assert_eq!(full, table);

        assert!(matches!(
            sample_boolean_dataset(&small, 17, &mut rng),
            Err(Error::TooManySamples { requested: 17, available: 16 })
        ));
    }

    #[test]
    fn led_examples() {
        let mut rng = crate::TrialRng::seed_from_u64(0);
        let d = gen_led(500, 0.0, &mut rng).unwrap();
        for s in &d.samples {
            let expected: BitString = LED_SEGMENTS[s.class_label].iter().copied().collect();
            assert_eq!(s.features, expected);
        }
        assert_eq!(LED_SEGMENTS[8], [true; 7]);
        assert_eq!(BitString::from_bools(&LED_SEGMENTS[1]), bits("0 0 1 0 0 1 0"));
        let distinct: BTreeSet<_> = d.samples.iter().map(|s| s.features.clone()).collect();
        assert!(distinct.len() <= 10);
        assert!(gen_led(10, 0.5, &mut rng).is_err());
    }

    #[test]
    fn led_patterns_are_distinct() {
        let distinct: BTreeSet<[bool; 7]> = LED_SEGMENTS.iter().copied().collect();
        assert_eq!(distinct.len(), 10);
    }

    #[test]
    fn problem_shorthand() {
        assert_eq!("mux6".parse(), Ok(ProblemSpec::Multiplexer { address_bits: 2, samples: None }));
        assert_eq!("mux20".parse::<ProblemSpec>().unwrap().n_features(), 20);
        assert_eq!("car:data/car.data".parse(), Ok(ProblemSpec::CarEval { path: "data/car.data".into() }));
        for bad in ["mux12", "mux", "parity", "parity0", "car:", "iris"] {
            assert!(bad.parse::<ProblemSpec>().is_err(), "{bad}");
        }
        assert_eq!(alloc::format!("{}", "parity10".parse::<ProblemSpec>().unwrap()), "parity10");
    }
}
