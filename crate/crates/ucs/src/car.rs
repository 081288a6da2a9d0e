//! Loader for the UCI car-evaluation file (`car.data`): six categorical
//! attributes one-hot encoded into 21 bits, four classes.

use std::path::Path;

use ucs_core::problems::{CAR_CLASSES, CAR_FEATURES};
use ucs_core::{BitString, Dataset, Error, Result, Sample};

const LAYOUT: &str = include_str!("../data/car_attributes.txt");

/// Attribute categories and class labels, read from the bundled layout file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarLayout {
    pub attributes: Vec<(String, Vec<String>)>,
    pub classes: Vec<String>,
}

impl CarLayout {
    pub fn bundled() -> Self {
        Self::parse(LAYOUT).expect("bundled car layout is well formed")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut attributes = Vec::new();
        let mut classes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, values) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("layout line {}: expected `name: values`", n + 1)))?;
            let values: Vec<String> = values.split_whitespace().map(str::to_owned).collect();
            if name.trim() == "class" {
                classes = values;
            } else {
                attributes.push((name.trim().to_owned(), values));
            }
        }
        Ok(Self { attributes, classes })
    }

    pub fn n_features(&self) -> usize {
        self.attributes.iter().map(|(_, v)| v.len()).sum()
    }

    /// Encodes one comma-separated row. `line_no` only labels errors.
    pub fn encode_row(&self, row: &str, line_no: usize) -> Result<Sample> {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != self.attributes.len() + 1 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected {} comma-separated fields, found {}",
                self.attributes.len() + 1,
                fields.len()
            )));
        }
        let mut bits = BitString::zeros(self.n_features());
        let mut offset = 0;
        for ((name, values), field) in self.attributes.iter().zip(&fields) {
            let k = values
                .iter()
                .position(|v| v == field)
                .ok_or_else(|| Error::Parse(format!("line {line_no}: unknown {name} value {field:?}")))?;
            bits.set(offset + k, true);
            offset += values.len();
        }
        let label = fields[self.attributes.len()];
        let class = self
            .classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::Parse(format!("line {line_no}: unknown class {label:?}")))?;
        Ok(Sample::new(bits, class))
    }
}

/// Parses car-evaluation text. Blank lines are ignored.
pub fn parse_car_eval(text: &str) -> Result<Dataset> {
    let layout = CarLayout::bundled();
    debug_assert_eq!((layout.n_features(), layout.classes.len()), (CAR_FEATURES, CAR_CLASSES));
    let samples = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| layout.encode_row(l, n + 1))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new("car", CAR_FEATURES, CAR_CLASSES, samples)
}

pub fn load_car_eval(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ExternalData(format!("cannot read {}: {e}", path.display())))?;
    parse_car_eval(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
