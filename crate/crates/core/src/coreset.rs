//! Core identification sets.
//!
//! An attribute set identifies a target when filtering the search space by the
//! target's own values on those attributes leaves only the target. A core set
//! is an identifying set none of whose proper subsets identifies the target.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{self, Bits, EntropyError, ObservationSet};
use crate::universe::{AttrId, CandidateSet, ObjectIdx, Observation, Universe};

/// Upper bound on the number of subsets `enumerate_core_sets` may visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Largest set for which strict minimality checks every proper subset.
pub const STRICT_CHECK_MAX_SET: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreSetError {
    #[error("object {0} is not in the search space")]
    TargetNotInSearchSpace(ObjectIdx),

    #[error("object {target} has no value for attribute {attribute}")]
    MissingValue {
        target: ObjectIdx,
        attribute: AttrId,
    },

    #[error("attribute {0} out of range")]
    AttributeOutOfRange(AttrId),

    #[error("attribute {0} listed more than once")]
    DuplicateAttribute(AttrId),

    #[error("object {target} cannot be distinguished: {} candidates share all its values", survivors.len())]
    NotDistinguishable {
        target: ObjectIdx,
        survivors: CandidateSet,
    },

    #[error("{subsets} subsets of up to {max_set_size} of {attributes} attributes exceed the enumeration limit")]
    ResourceLimit {
        attributes: usize,
        max_set_size: usize,
        subsets: u128,
    },

    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub type Result<T> = std::result::Result<T, CoreSetError>;

/// What "no proper subset identifies" is checked against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Minimality {
    /// No proper subset identifies the target.
    #[default]
    Target,
    /// No proper subset identifies any object in the search space.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreSetReport {
    pub target: ObjectIdx,
    pub attribute_ids: Vec<AttrId>,
    pub is_identifying: bool,
    pub is_minimal: bool,
    /// Identity entropy after each attribute is added, in addition order.
    pub entropy_trace: Vec<Bits>,
    /// Greedy selection order before pruning. Empty for plain checks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selection_order: Vec<AttrId>,
}

/// True when the target's values on `attribute_ids` single it out within `cand0`.
pub fn is_identification_set(
    universe: &Universe,
    cand0: &CandidateSet,
    target: ObjectIdx,
    attribute_ids: &[AttrId],
) -> Result<bool> {
    let obs = target_observations(universe, cand0, target, attribute_ids)?;
    Ok(identifies(universe, cand0, &obs))
}

/// Checks identification and target-relative minimality.
pub fn is_core_identification_set(
    universe: &Universe,
    cand0: &CandidateSet,
    target: ObjectIdx,
    attribute_ids: &[AttrId],
) -> Result<CoreSetReport> {
    check_core_set(universe, cand0, target, attribute_ids, Minimality::Target)
}

/// Checks identification and minimality under the chosen reading.
pub fn check_core_set(
    universe: &Universe,
    cand0: &CandidateSet,
    target: ObjectIdx,
    attribute_ids: &[AttrId],
    minimality: Minimality,
) -> Result<CoreSetReport> {
    let obs = target_observations(universe, cand0, target, attribute_ids)?;

    let mut entropy_trace = Vec::with_capacity(obs.len());
    let mut current = cand0.clone();
    for &o in &obs {
        current = universe.filter(&current, o);
        entropy_trace.push(Bits::log2_count(current.len()));
    }
    let is_identifying = current.len() == 1;

    // Filtering is monotone, so if no drop-one subset identifies the target,
    // no smaller subset does either.
    let is_minimal = match minimality {
        Minimality::Target => drop_one_minimal(universe, cand0, &obs),
        Minimality::Strict => strict_minimal(universe, cand0, attribute_ids)?,
    };

    Ok(CoreSetReport {
        target,
        attribute_ids: attribute_ids.to_vec(),
        is_identifying,
        is_minimal,
        entropy_trace,
        selection_order: Vec::new(),
    })
}

/// Greedy core set: repeatedly add the unused attribute whose value
/// distribution over the current search space has the highest entropy
/// (lowest attribute id on ties), narrow by the target's value, stop once the
/// target is alone, then drop redundant attributes in reverse addition order.
///
/// `seed` narrows the initial search space; the returned set identifies the
/// target within `cand0` filtered by `seed`.
pub fn greedy_core_set(
    universe: &Universe,
    cand0: &CandidateSet,
    target: ObjectIdx,
    seed: &ObservationSet,
) -> Result<CoreSetReport> {
    for obs in seed {
        universe
            .validate(*obs)
            .map_err(|_| CoreSetError::AttributeOutOfRange(obs.attribute))?;
    }
    let space = universe.filter_all(cand0, seed);
    if target >= universe.n_objects() || !space.contains(target) {
        return Err(CoreSetError::TargetNotInSearchSpace(target));
    }

    let m = universe.n_attributes();
    let mut used = vec![false; m];
    for obs in seed {
        used[obs.attribute] = true;
    }

    let mut order = Vec::new();
    let mut entropy_trace = Vec::new();
    let mut current = space.clone();
    while current.len() > 1 {
        let mut best: Option<(AttrId, Bits)> = None;
        for attr in (0..m).filter(|&a| !used[a]) {
            if universe.observation_of(target, attr).is_none() {
                continue;
            }
            let h = match entropy::category_entropy(universe, &current, attr) {
                Ok(h) => h,
                Err(EntropyError::UndefinedAttribute(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            if best.is_none_or(|(_, b)| h > b) {
                best = Some((attr, h));
            }
        }
        let Some((attr, _)) = best else {
            return Err(CoreSetError::NotDistinguishable {
                target,
                survivors: current,
            });
        };
        used[attr] = true;
        order.push(attr);
        let obs = universe
            .observation_of(target, attr)
            .expect("checked above");
        current = universe.filter(&current, obs);
        entropy_trace.push(Bits::log2_count(current.len()));
    }

    let mut kept = order.clone();
    for &attr in order.iter().rev() {
        let trial: Vec<AttrId> = kept.iter().copied().filter(|&a| a != attr).collect();
        let obs = target_observations(universe, &space, target, &trial)?;
        if identifies(universe, &space, &obs) {
            kept = trial;
        }
    }

    let obs = target_observations(universe, &space, target, &kept)?;
    Ok(CoreSetReport {
        target,
        is_identifying: identifies(universe, &space, &obs),
        is_minimal: drop_one_minimal(universe, &space, &obs),
        attribute_ids: kept,
        entropy_trace,
        selection_order: order,
    })
}

/// Every core set of at most `max_set_size` attributes for `target`, sorted
/// by size and then lexicographically.
pub fn enumerate_core_sets(
    universe: &Universe,
    cand0: &CandidateSet,
    target: ObjectIdx,
    max_set_size: usize,
) -> Result<Vec<Vec<AttrId>>> {
    if target >= universe.n_objects() || !cand0.contains(target) {
        return Err(CoreSetError::TargetNotInSearchSpace(target));
    }
    let m = universe.n_attributes();
    let max_set_size = max_set_size.min(m);
    let subsets = subsets_up_to(m, max_set_size);
    if subsets > ENUMERATION_LIMIT {
        return Err(CoreSetError::ResourceLimit {
            attributes: m,
            max_set_size,
            subsets,
        });
    }

    // A set containing an attribute the target lacks can never be checked.
    let eligible: Vec<Observation> = (0..m)
        .filter_map(|a| universe.observation_of(target, a))
        .collect();

    let mut found = Vec::new();
    if cand0.len() == 1 {
        found.push(Vec::new());
        return Ok(found);
    }
    let mut search = Enumeration {
        universe,
        cand0,
        eligible: &eligible,
        max_set_size,
        chosen: Vec::new(),
        found: &mut found,
    };
    search.descend(0, cand0);

    found.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(found)
}

struct Enumeration<'a> {
    universe: &'a Universe,
    cand0: &'a CandidateSet,
    eligible: &'a [Observation],
    max_set_size: usize,
    chosen: Vec<Observation>,
    found: &'a mut Vec<Vec<AttrId>>,
}

impl Enumeration<'_> {
    fn descend(&mut self, start: usize, current: &CandidateSet) {
        for i in start..self.eligible.len() {
            let obs = self.eligible[i];
            let next = self.universe.filter(current, obs);
            // If the attribute removes nobody here, it removes nobody from any
            // narrower space either, so every identifying superset that
            // contains it stays identifying without it.
            if next.len() == current.len() {
                continue;
            }
            self.chosen.push(obs);
            if next.len() == 1 {
                if drop_one_minimal(self.universe, self.cand0, &self.chosen) {
                    self.found
                        .push(self.chosen.iter().map(|o| o.attribute).collect());
                }
            } else if self.chosen.len() < self.max_set_size {
                self.descend(i + 1, &next);
            }
            self.chosen.pop();
        }
    }
}

/// `sum_{k <= max} C(m, k)`, saturating.
pub fn subsets_up_to(m: usize, max: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for k in 0..=max.min(m) {
        total = total.saturating_add(c);
        c = c.saturating_mul((m - k) as u128) / (k as u128 + 1);
    }
    total
}

fn target_observations(
    universe: &Universe,
    cand0: &CandidateSet,
    target: ObjectIdx,
    attribute_ids: &[AttrId],
) -> Result<Vec<Observation>> {
    if target >= universe.n_objects() || !cand0.contains(target) {
        return Err(CoreSetError::TargetNotInSearchSpace(target));
    }
    let mut seen = vec![false; universe.n_attributes()];
    attribute_ids
        .iter()
        .map(|&attr| {
            if attr >= universe.n_attributes() {
                return Err(CoreSetError::AttributeOutOfRange(attr));
            }
            if std::mem::replace(&mut seen[attr], true) {
                return Err(CoreSetError::DuplicateAttribute(attr));
            }
            universe
                .observation_of(target, attr)
                .ok_or(CoreSetError::MissingValue {
                    target,
                    attribute: attr,
                })
        })
        .collect()
}

fn identifies(universe: &Universe, cand0: &CandidateSet, obs: &[Observation]) -> bool {
    universe.filter_all(cand0, obs).len() == 1
}

fn drop_one_minimal(universe: &Universe, cand0: &CandidateSet, obs: &[Observation]) -> bool {
    (0..obs.len()).all(|skip| {
        let rest = obs
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, o)| o);
        universe.filter_all(cand0, rest).len() != 1
    })
}

fn strict_minimal(
    universe: &Universe,
    cand0: &CandidateSet,
    attribute_ids: &[AttrId],
) -> Result<bool> {
    let k = attribute_ids.len();
    if k > STRICT_CHECK_MAX_SET {
        return Err(CoreSetError::ResourceLimit {
            attributes: k,
            max_set_size: k,
            subsets: 1u128 << k,
        });
    }
    let full = (1u32 << k) - 1;
    for mask in 0..full {
        let subset: Vec<AttrId> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| attribute_ids[i])
            .collect();
        if identifies_someone(universe, cand0, &subset) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True when some object in `cand0` has a value combination on `attrs` that
/// no other object shares. Objects missing any of the attributes are skipped.
fn identifies_someone(universe: &Universe, cand0: &CandidateSet, attrs: &[AttrId]) -> bool {
    let mut groups: HashMap<Vec<u16>, usize> = HashMap::new();
    for obj in cand0.iter() {
        let key: Vec<u16> = attrs.iter().map(|&a| universe.cell(obj, a)).collect();
        *groups.entry(key).or_default() += 1;
    }
    groups
        .iter()
        .any(|(key, &count)| count == 1 && !key.contains(&crate::universe::MISSING))
}
