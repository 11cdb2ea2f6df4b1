//! Seeded synthetic population tables.

use std::collections::HashSet;

use idtrace_core::{Attribute, AttributeSchema, Universe, UniverseError};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resampling budget per row when distinct rows are required.
pub const MAX_ROW_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("need at least 2 objects, got {0}")]
    TooFewObjects(usize),
    #[error("{expected} attributes declared but {found} cardinalities given")]
    CardinalityCount { expected: usize, found: usize },
    #[error("attribute {attribute} has cardinality {cardinality}; must be between 1 and 65534")]
    BadCardinality {
        attribute: usize,
        cardinality: usize,
    },
    #[error("zipf exponent must be finite and non-negative, got {0}")]
    BadExponent(f64),
    #[error("only {capacity} distinct rows exist for {n_objects} unique objects")]
    TooFewCombinations { capacity: u128, n_objects: usize },
    #[error("could not draw a distinct row {row} after {attempts} attempts")]
    UniquenessUnreachable { row: usize, attempts: usize },
    #[error(transparent)]
    Universe(#[from] UniverseError),
}

/// Value frequency shape shared by every attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Skew {
    Uniform,
    /// Value `r` (0-based) is drawn with weight `1 / (r + 1)^exponent`.
    Zipf {
        exponent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_objects: usize,
    pub n_attributes: usize,
    /// One cardinality per attribute.
    pub cardinalities: Vec<usize>,
    pub skew: Skew,
    pub seed: u64,
    /// Reject and redraw rows until every row is distinct.
    pub unique: bool,
}

/// Cardinalities of the default profile: mostly binary flags plus a few
/// wider attributes up to 12 values, the shape of a typical census extract.
pub const DEFAULT_CARDINALITIES: [usize; 20] =
    [2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 4, 6, 8, 10, 12];

impl Default for GeneratorConfig {
    /// 5000 distinct objects over [`DEFAULT_CARDINALITIES`], zipf exponent 1.1.
    fn default() -> Self {
        GeneratorConfig {
            n_objects: 5000,
            n_attributes: DEFAULT_CARDINALITIES.len(),
            cardinalities: DEFAULT_CARDINALITIES.to_vec(),
            skew: Skew::Zipf { exponent: 1.1 },
            seed: 2024,
            unique: true,
        }
    }
}

impl GeneratorConfig {
    /// Zipf(1.1) table whose cardinalities cycle through `min_card..=max_card`.
    pub fn with_shape(
        n_objects: usize,
        n_attributes: usize,
        min_card: usize,
        max_card: usize,
        seed: u64,
    ) -> Self {
        let span = max_card.saturating_sub(min_card) + 1;
        GeneratorConfig {
            n_objects,
            n_attributes,
            cardinalities: (0..n_attributes).map(|i| min_card + i % span).collect(),
            skew: Skew::Zipf { exponent: 1.1 },
            seed,
            unique: true,
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.n_objects < 2 {
            return Err(GenerateError::TooFewObjects(self.n_objects));
        }
        if self.cardinalities.len() != self.n_attributes {
            return Err(GenerateError::CardinalityCount {
                expected: self.n_attributes,
                found: self.cardinalities.len(),
            });
        }
        for (attribute, &cardinality) in self.cardinalities.iter().enumerate() {
            if cardinality == 0 || cardinality >= usize::from(idtrace_core::MISSING) {
                return Err(GenerateError::BadCardinality {
                    attribute,
                    cardinality,
                });
            }
        }
        if let Skew::Zipf { exponent } = self.skew {
            if !exponent.is_finite() || exponent < 0.0 {
                return Err(GenerateError::BadExponent(exponent));
            }
        }
        if self.unique {
            let capacity = self.capacity();
            if capacity < self.n_objects as u128 {
                return Err(GenerateError::TooFewCombinations {
                    capacity,
                    n_objects: self.n_objects,
                });
            }
        }
        Ok(())
    }

    /// Number of distinct rows the cardinalities allow, saturating.
    pub fn capacity(&self) -> u128 {
        self.cardinalities
            .iter()
            .fold(1u128, |acc, &k| acc.saturating_mul(k as u128))
    }

    fn weights(&self, cardinality: usize) -> Vec<f64> {
        match self.skew {
            Skew::Uniform => vec![1.0; cardinality],
            Skew::Zipf { exponent } => (0..cardinality)
                .map(|r| 1.0 / ((r + 1) as f64).powf(exponent))
                .collect(),
        }
    }
}

pub fn attribute_name(i: usize) -> String {
    format!("attr{:02}", i + 1)
}

pub fn object_name(i: usize, n: usize) -> String {
    let width = n.to_string().len();
    format!("u{:0width$}", i + 1)
}

/// Draws a table row by row. Value codes are declared in rank order, so
/// under zipf skew `v0` is the most frequent value of every attribute.
pub fn generate_universe(config: &GeneratorConfig) -> Result<Universe, GenerateError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let samplers: Vec<WeightedIndex<f64>> = config
        .cardinalities
        .iter()
        .map(|&k| WeightedIndex::new(config.weights(k)).expect("weights are positive"))
        .collect();

    let m = config.n_attributes;
    let mut cells = Vec::with_capacity(config.n_objects * m);
    let mut seen: HashSet<Vec<u16>> = HashSet::new();
    let mut row = vec![0u16; m];
    for r in 0..config.n_objects {
        let mut attempts = 0;
        loop {
            for (cell, sampler) in row.iter_mut().zip(&samplers) {
                *cell = sampler.sample(&mut rng) as u16;
            }
            attempts += 1;
            if !config.unique || seen.insert(row.clone()) {
                break;
            }
            if attempts >= MAX_ROW_ATTEMPTS {
                return Err(GenerateError::UniquenessUnreachable { row: r, attempts });
            }
        }
        cells.extend_from_slice(&row);
    }

    let attributes = config
        .cardinalities
        .iter()
        .enumerate()
        .map(|(id, &k)| Attribute {
            id,
            name: attribute_name(id),
            values: (0..k).map(|v| format!("v{v}")).collect(),
        })
        .collect();
    let schema = AttributeSchema::new(attributes)?;
    let ids = (0..config.n_objects)
        .map(|i| object_name(i, config.n_objects))
        .collect();
    Ok(Universe::from_parts(schema, ids, cells)?)
}
