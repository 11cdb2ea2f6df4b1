//! Greedy identity tracing.
//!
//! A [`Session`] holds what is known about an unknown object and the search
//! space that knowledge leaves. At each step the attribute category whose
//! value distribution over the current candidates has the highest entropy is
//! recommended for acquisition. [`run_titf`] drives that loop against a known
//! target; [`run_random_baseline`] picks the next attribute uniformly instead.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{self, Bits, EntropyError, ObservationSet};
use crate::universe::{AttrId, CandidateSet, ObjectIdx, Observation, Universe, UniverseError};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("session is {0}, not active")]
    NotActive(Status),

    #[error("attribute {0} has already been acquired")]
    AlreadyAcquired(AttrId),

    #[error("invalid observation: {0}")]
    InvalidObservation(#[from] UniverseError),

    #[error("duplicate attribute in known set: {0}")]
    DuplicateKnown(#[from] EntropyError),

    #[error("no attribute with defined discriminability remains")]
    Exhausted,

    #[error("object {0} is not consistent with the known observations")]
    TargetExcluded(ObjectIdx),

    #[error("object index {0} out of range")]
    UnknownObject(ObjectIdx),
}

pub type Result<T> = std::result::Result<T, TraceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Identified,
    Ambiguous,
    Inconsistent,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Active => "active",
            Status::Identified => "identified",
            Status::Ambiguous => "ambiguous",
            Status::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Titf,
    Random,
}

/// When a session with several candidates stops being worth continuing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePolicy {
    /// Stop as ambiguous once every remaining attribute has zero entropy over
    /// the candidates. When false, tracing keeps acquiring until no attribute
    /// with a defined distribution remains.
    pub stop_on_zero_information: bool,
}

impl Default for TracePolicy {
    fn default() -> Self {
        Self {
            stop_on_zero_information: true,
        }
    }
}

/// Simulated cost of one acquisition.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum AcquisitionCost {
    #[default]
    Instant,
    Fixed(Duration),
    /// Indexed by attribute; attributes past the end cost nothing.
    PerAttribute(Vec<Duration>),
}

impl AcquisitionCost {
    fn pay(&self, attr: AttrId) {
        let delay = match self {
            AcquisitionCost::Instant => return,
            AcquisitionCost::Fixed(d) => *d,
            AcquisitionCost::PerAttribute(ds) => ds.get(attr).copied().unwrap_or_default(),
        };
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TraceOptions {
    pub policy: TracePolicy,
    pub cost: AcquisitionCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub attribute: AttrId,
    pub bits: Bits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Descending by bits, ascending attribute id on ties.
    pub ranking: Vec<RankedAttribute>,
    pub chosen: AttrId,
}

/// Counterfactual outcome of observing one value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub value: u16,
    pub count: usize,
    pub entropy: Bits,
}

/// A live tracing session.
#[derive(Clone)]
pub struct Session {
    universe: Arc<Universe>,
    policy: TracePolicy,
    known: ObservationSet,
    path: Vec<Observation>,
    unavailable: BTreeSet<AttrId>,
    candidates: CandidateSet,
    entropy_history: Vec<Bits>,
    status: Status,
    ranking: Vec<RankedAttribute>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("known", &self.known)
            .field("path", &self.path)
            .field("candidates", &self.candidates.len())
            .field("status", &self.status)
            .finish()
    }
}

impl Session {
    pub fn start(universe: Arc<Universe>, known: ObservationSet) -> Result<Self> {
        Self::with_policy(universe, known, TracePolicy::default())
    }

    pub fn with_policy(
        universe: Arc<Universe>,
        known: ObservationSet,
        policy: TracePolicy,
    ) -> Result<Self> {
        for obs in &known {
            universe.validate(*obs)?;
        }
        let candidates = universe.filter_all(&universe.all(), &known);
        let mut session = Self {
            universe,
            policy,
            known,
            path: Vec::new(),
            unavailable: BTreeSet::new(),
            candidates,
            entropy_history: Vec::new(),
            status: Status::Active,
            ranking: Vec::new(),
        };
        session.record_entropy();
        session.refresh();
        Ok(session)
    }

    /// Rebuilds a session by replaying an acquisition path.
    pub fn replay(
        universe: Arc<Universe>,
        known: ObservationSet,
        path: &[Observation],
        policy: TracePolicy,
    ) -> Result<Self> {
        let mut session = Self::with_policy(universe, known, policy)?;
        for &obs in path {
            session.observe(obs)?;
        }
        Ok(session)
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn policy(&self) -> TracePolicy {
        self.policy
    }

    pub fn known(&self) -> &ObservationSet {
        &self.known
    }

    pub fn path(&self) -> &[Observation] {
        &self.path
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    /// One entry per non-empty search space, starting with the seed state.
    /// An inconsistent observation empties the space and adds no entry.
    pub fn entropy_history(&self) -> &[Bits] {
        &self.entropy_history
    }

    pub fn entropy(&self) -> Option<Bits> {
        (!self.candidates.is_empty()).then(|| Bits::log2_count(self.candidates.len()))
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn unavailable(&self) -> &BTreeSet<AttrId> {
        &self.unavailable
    }

    pub fn is_acquired(&self, attr: AttrId) -> bool {
        self.known.contains_attribute(attr)
            || self.path.iter().any(|o| o.attribute == attr)
            || self.unavailable.contains(&attr)
    }

    /// Attributes not yet known, acquired, or marked unavailable.
    pub fn remaining(&self) -> impl Iterator<Item = AttrId> + '_ {
        (0..self.universe.n_attributes()).filter(|&a| !self.is_acquired(a))
    }

    pub fn recommend_next(&self) -> Result<Recommendation> {
        if self.status != Status::Active {
            return Err(TraceError::NotActive(self.status));
        }
        let chosen = self.ranking.first().ok_or(TraceError::Exhausted)?.attribute;
        Ok(Recommendation {
            ranking: self.ranking.clone(),
            chosen,
        })
    }

    pub fn observe(&mut self, obs: Observation) -> Result<Status> {
        if self.status != Status::Active {
            return Err(TraceError::NotActive(self.status));
        }
        self.universe.validate(obs)?;
        if self.is_acquired(obs.attribute) {
            return Err(TraceError::AlreadyAcquired(obs.attribute));
        }
        self.path.push(obs);
        self.candidates = self.universe.filter(&self.candidates, obs);
        self.record_entropy();
        self.refresh();
        Ok(self.status)
    }

    /// Records that `attr` cannot be acquired for this object.
    pub fn mark_unavailable(&mut self, attr: AttrId) -> Result<Status> {
        if self.status != Status::Active {
            return Err(TraceError::NotActive(self.status));
        }
        if attr >= self.universe.n_attributes() {
            return Err(UniverseError::AttributeOutOfRange(attr).into());
        }
        if self.is_acquired(attr) {
            return Err(TraceError::AlreadyAcquired(attr));
        }
        self.unavailable.insert(attr);
        self.refresh();
        Ok(self.status)
    }

    /// Candidate count and entropy for every value of `attr` present among the
    /// candidates, without changing the session.
    pub fn whatif(&self, attr: AttrId) -> Result<Vec<WhatIf>> {
        if self.status != Status::Active {
            return Err(TraceError::NotActive(self.status));
        }
        if attr >= self.universe.n_attributes() {
            return Err(UniverseError::AttributeOutOfRange(attr).into());
        }
        if self.is_acquired(attr) {
            return Err(TraceError::AlreadyAcquired(attr));
        }
        let counts = self.universe.value_counts(&self.candidates, attr);
        Ok(counts
            .nonzero()
            .map(|(value, count)| WhatIf {
                value,
                count,
                entropy: Bits::log2_count(count),
            })
            .collect())
    }

    fn record_entropy(&mut self) {
        if let Some(h) = self.entropy() {
            self.entropy_history.push(h);
        }
    }

    fn refresh(&mut self) {
        self.ranking.clear();
        self.status = match self.candidates.len() {
            0 => Status::Inconsistent,
            1 => Status::Identified,
            _ => {
                self.ranking = rank_attributes(&self.universe, &self.candidates, self.remaining());
                match self.ranking.first() {
                    None => Status::Ambiguous,
                    Some(top)
                        if self.policy.stop_on_zero_information && top.bits.value() <= 0.0 =>
                    {
                        Status::Ambiguous
                    }
                    Some(_) => Status::Active,
                }
            }
        };
    }
}

/// Entropy of each attribute's value distribution over `cand`, sorted
/// descending with ties broken by attribute id. Attributes missing for every
/// candidate are left out.
pub fn rank_attributes<I: IntoIterator<Item = AttrId>>(
    universe: &Universe,
    cand: &CandidateSet,
    attributes: I,
) -> Vec<RankedAttribute> {
    let mut ranking: Vec<RankedAttribute> = attributes
        .into_iter()
        .filter_map(|attr| {
            entropy::category_entropy(universe, cand, attr)
                .ok()
                .map(|bits| RankedAttribute {
                    attribute: attr,
                    bits,
                })
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.bits
            .value()
            .total_cmp(&a.bits.value())
            .then(a.attribute.cmp(&b.attribute))
    });
    ranking
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum TargetFound {
    Identified { object: ObjectIdx },
    Survivors { objects: Vec<ObjectIdx> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub strategy: Strategy,
    pub status: Status,
    pub target_found: TargetFound,
    /// Attributes acquired after the seed; always `path.len()`.
    pub acquisitions: usize,
    pub path: Vec<Observation>,
    pub entropy_history: Vec<Bits>,
    #[serde(with = "duration_secs")]
    pub elapsed: Duration,
}

impl TraceResult {
    fn from_session(session: &Session, strategy: Strategy, elapsed: Duration) -> Self {
        let target_found = if session.status() == Status::Identified {
            TargetFound::Identified {
                object: session.candidates().iter().next().expect("one candidate"),
            }
        } else {
            TargetFound::Survivors {
                objects: session.candidates().iter().collect(),
            }
        };
        Self {
            strategy,
            status: session.status(),
            target_found,
            acquisitions: session.path().len(),
            path: session.path().to_vec(),
            entropy_history: session.entropy_history().to_vec(),
            elapsed,
        }
    }
}

/// Traces `target` by always acquiring the top-ranked attribute, answering
/// each acquisition with the target's stored value.
pub fn run_titf(
    universe: &Arc<Universe>,
    target: ObjectIdx,
    known: ObservationSet,
    options: &TraceOptions,
) -> Result<TraceResult> {
    run(
        universe,
        target,
        known,
        options,
        Strategy::Titf,
        |session| session.recommend_next().map(|r| r.chosen).ok(),
    )
}

/// Traces `target` acquiring attributes in uniformly random order.
pub fn run_random_baseline(
    universe: &Arc<Universe>,
    target: ObjectIdx,
    known: ObservationSet,
    seed: u64,
    options: &TraceOptions,
) -> Result<TraceResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run(
        universe,
        target,
        known,
        options,
        Strategy::Random,
        move |session| {
            let remaining: Vec<AttrId> = session.remaining().collect();
            remaining.choose(&mut rng).copied()
        },
    )
}

fn run<F>(
    universe: &Arc<Universe>,
    target: ObjectIdx,
    known: ObservationSet,
    options: &TraceOptions,
    strategy: Strategy,
    mut next: F,
) -> Result<TraceResult>
where
    F: FnMut(&Session) -> Option<AttrId>,
{
    if target >= universe.n_objects() {
        return Err(TraceError::UnknownObject(target));
    }
    let start = Instant::now();
    let mut session = Session::with_policy(universe.clone(), known, options.policy)?;
    if !session.candidates().contains(target) {
        return Err(TraceError::TargetExcluded(target));
    }
    while session.status() == Status::Active {
        let Some(attr) = next(&session) else {
            break;
        };
        options.cost.pay(attr);
        match universe.observation_of(target, attr) {
            Some(obs) => session.observe(obs)?,
            None => session.mark_unavailable(attr)?,
        };
    }
    Ok(TraceResult::from_session(
        &session,
        strategy,
        start.elapsed(),
    ))
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}
