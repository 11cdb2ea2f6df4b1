//! Identity entropy and attribute discriminability.
//!
//! All quantities are in bits. Probabilities are exact count ratios within a
//! candidate set and become floating point only at the final logarithm.
//! Conditioning on known observations is done by filtering the candidate set
//! first and then applying the unconditional formula.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::universe::{AttrId, CandidateSet, Observation, Universe};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EntropyError {
    #[error("identity entropy of an empty search space is undefined")]
    EmptySearchSpace,

    #[error("observations are inconsistent: no candidate matches all of them")]
    Inconsistent,

    #[error("value {value} of attribute {attribute} has zero probability in the candidate set")]
    ZeroProbability { attribute: AttrId, value: u16 },

    #[error("attribute {0} is missing for every candidate")]
    UndefinedAttribute(AttrId),

    #[error("attribute {0} observed more than once")]
    DuplicateAttribute(AttrId),
}

pub type Result<T> = std::result::Result<T, EntropyError>;

/// An information quantity in bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bits(f64);

impl Bits {
    pub const ZERO: Bits = Bits(0.0);

    pub fn new(value: f64) -> Self {
        debug_assert!(!value.is_nan(), "bits must not be NaN");
        Self(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `log2(count)` for a positive count.
    pub fn log2_count(count: usize) -> Self {
        debug_assert!(count > 0);
        Self((count as f64).log2())
    }
}

impl Add for Bits {
    type Output = Bits;
    fn add(self, rhs: Bits) -> Bits {
        Bits(self.0 + rhs.0)
    }
}

impl Sub for Bits {
    type Output = Bits;
    fn sub(self, rhs: Bits) -> Bits {
        Bits(self.0 - rhs.0)
    }
}

impl Sum for Bits {
    fn sum<I: Iterator<Item = Bits>>(iter: I) -> Bits {
        Bits(iter.map(|b| b.0).sum())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*}", p, self.0),
            None => write!(f, "{}", self.0),
        }
    }
}

/// Known observations, at most one per attribute, kept sorted by attribute.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Observation>", into = "Vec<Observation>")]
pub struct ObservationSet {
    observations: Vec<Observation>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, obs: Observation) -> Result<()> {
        match self
            .observations
            .binary_search_by_key(&obs.attribute, |o| o.attribute)
        {
            Ok(_) => Err(EntropyError::DuplicateAttribute(obs.attribute)),
            Err(pos) => {
                self.observations.insert(pos, obs);
                Ok(())
            }
        }
    }

    pub fn contains_attribute(&self, attr: AttrId) -> bool {
        self.get(attr).is_some()
    }

    pub fn get(&self, attr: AttrId) -> Option<Observation> {
        self.observations
            .binary_search_by_key(&attr, |o| o.attribute)
            .ok()
            .map(|i| self.observations[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn as_slice(&self) -> &[Observation] {
        &self.observations
    }
}

impl TryFrom<Vec<Observation>> for ObservationSet {
    type Error = EntropyError;

    fn try_from(observations: Vec<Observation>) -> Result<Self> {
        let mut set = Self::new();
        for obs in observations {
            set.insert(obs)?;
        }
        Ok(set)
    }
}

impl From<ObservationSet> for Vec<Observation> {
    fn from(set: ObservationSet) -> Self {
        set.observations
    }
}

impl<'a> IntoIterator for &'a ObservationSet {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;
    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

/// `H = log2 n` for a search space of `n` candidates.
pub fn identity_entropy(n: usize) -> Result<Bits> {
    if n == 0 {
        return Err(EntropyError::EmptySearchSpace);
    }
    Ok(Bits::log2_count(n))
}

/// Identity entropy of the search space left after applying every observation.
pub fn conditional_identity_entropy(
    universe: &Universe,
    cand0: &CandidateSet,
    known: &ObservationSet,
) -> Result<Bits> {
    if cand0.is_empty() {
        return Err(EntropyError::EmptySearchSpace);
    }
    let survivors = universe.filter_all(cand0, known);
    if survivors.is_empty() {
        return Err(EntropyError::Inconsistent);
    }
    Ok(Bits::log2_count(survivors.len()))
}

/// `-log2 p` where `p` is the share of `cand` holding `obs.value`.
pub fn attribute_discriminability(
    universe: &Universe,
    cand: &CandidateSet,
    obs: Observation,
) -> Result<Bits> {
    if cand.is_empty() {
        return Err(EntropyError::EmptySearchSpace);
    }
    let count = universe.filter_count(cand, obs);
    discriminability_from_counts(count, cand.len()).ok_or(EntropyError::ZeroProbability {
        attribute: obs.attribute,
        value: obs.value,
    })
}

/// [`attribute_discriminability`] within `cand` already narrowed by `given`.
pub fn conditional_discriminability(
    universe: &Universe,
    cand: &CandidateSet,
    given: &ObservationSet,
    obs: Observation,
) -> Result<Bits> {
    let conditioned = conditioned(universe, cand, given)?;
    attribute_discriminability(universe, &conditioned, obs)
}

/// Shannon entropy of `attr`'s value distribution over `cand` narrowed by
/// `given`. MISSING cells are left out of both the distribution and its
/// denominator.
pub fn avg_conditional_discriminability(
    universe: &Universe,
    cand: &CandidateSet,
    given: &ObservationSet,
    attr: AttrId,
) -> Result<Bits> {
    let conditioned = conditioned(universe, cand, given)?;
    category_entropy(universe, &conditioned, attr)
}

/// The unconditioned form of [`avg_conditional_discriminability`], for a
/// candidate set that is already filtered.
pub fn category_entropy(universe: &Universe, cand: &CandidateSet, attr: AttrId) -> Result<Bits> {
    if cand.is_empty() {
        return Err(EntropyError::EmptySearchSpace);
    }
    let counts = universe.value_counts(cand, attr);
    let present = counts.present();
    if present == 0 {
        return Err(EntropyError::UndefinedAttribute(attr));
    }
    Ok(Bits::new(shannon_entropy(
        counts.nonzero().map(|(_, c)| c),
        present,
    )))
}

/// Discriminability of an ordered observation list, accumulated term by term:
/// the first observation's discriminability plus each next observation's
/// discriminability conditioned on all earlier ones.
pub fn set_discriminability(
    universe: &Universe,
    cand: &CandidateSet,
    obs_ordered: &[Observation],
) -> Result<Bits> {
    if cand.is_empty() {
        return Err(EntropyError::EmptySearchSpace);
    }
    let mut seen = ObservationSet::new();
    let mut current = cand.clone();
    let mut total = Bits::ZERO;
    for &obs in obs_ordered {
        seen.insert(obs)?;
        let next = universe.filter(&current, obs);
        let term = discriminability_from_counts(next.len(), current.len()).ok_or(
            EntropyError::ZeroProbability {
                attribute: obs.attribute,
                value: obs.value,
            },
        )?;
        total = total + term;
        current = next;
    }
    Ok(total)
}

/// `-log2(count / total)`, or `None` when `count` is zero.
pub(crate) fn discriminability_from_counts(count: usize, total: usize) -> Option<Bits> {
    if count == 0 || total == 0 {
        return None;
    }
    if count == total {
        return Some(Bits::ZERO);
    }
    let p = count as f64 / total as f64;
    Some(Bits::new(-p.log2()))
}

/// `-sum p log2 p` over `counts / total`, with `0 log 0 = 0`.
///
/// Terms are summed in ascending count order so attributes with the same count
/// profile tie exactly, whatever their value codes.
pub(crate) fn shannon_entropy<I: IntoIterator<Item = usize>>(counts: I, total: usize) -> f64 {
    let total_f = total as f64;
    let mut counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    let h: f64 = counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / total_f;
            -p * p.log2()
        })
        .sum();
    // A single value contributes -1 * log2(1) = -0.0.
    h.max(0.0)
}

fn conditioned(
    universe: &Universe,
    cand: &CandidateSet,
    given: &ObservationSet,
) -> Result<CandidateSet> {
    if cand.is_empty() {
        return Err(EntropyError::EmptySearchSpace);
    }
    let out = universe.filter_all(cand, given);
    if out.is_empty() {
        return Err(EntropyError::EmptySearchSpace);
    }
    Ok(out)
}
