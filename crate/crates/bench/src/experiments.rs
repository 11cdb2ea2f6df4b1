//! Core-set multiplicity and discriminability profiles over grouped search spaces.

use idtrace_core::{
    attribute_discriminability, enumerate_core_sets, AttrId, Attribute, CandidateSet, CoreSetError,
    EntropyError, ObjectIdx, Universe,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{fmt_f64, Table, CENSORED};

/// Cell written where a statistic does not apply, such as the smallest core
/// set of a probe that has none.
pub const NOT_APPLICABLE: &str = "na";

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error(
        "{group_count} groups of {group_size} need more than the {n_objects} objects available"
    )]
    GroupingTooLarge {
        group_count: usize,
        group_size: usize,
        n_objects: usize,
    },
    #[error("cannot sample {wanted} distinct objects from {available}")]
    SampleTooLarge { wanted: usize, available: usize },
    #[error("object {0} is out of range")]
    UnknownObject(ObjectIdx),
    #[error(transparent)]
    CoreSet(#[from] CoreSetError),
    #[error("building a search space table: {0}")]
    Subset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub group_count: usize,
    pub group_size: usize,
}

/// Mixes a base seed with a path of indices into an independent stream seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Shuffles the objects with `seed` and deals them into disjoint groups.
pub fn partition(
    universe: &Universe,
    grouping: Grouping,
    seed: u64,
) -> Result<Vec<CandidateSet>, ExperimentError> {
    let n = universe.n_objects();
    let needed = grouping.group_count.checked_mul(grouping.group_size);
    if needed.is_none_or(|k| k > n) || grouping.group_size == 0 {
        return Err(ExperimentError::GroupingTooLarge {
            group_count: grouping.group_count,
            group_size: grouping.group_size,
            n_objects: n,
        });
    }
    let mut order: Vec<ObjectIdx> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order
        .chunks(grouping.group_size)
        .take(grouping.group_count)
        .map(|chunk| CandidateSet::from_indices(n, chunk.iter().copied()))
        .collect())
}

/// `count` distinct objects drawn with `seed`, in draw order.
pub fn sample_objects(
    universe: &Universe,
    count: usize,
    seed: u64,
) -> Result<Vec<ObjectIdx>, ExperimentError> {
    let n = universe.n_objects();
    if count > n {
        return Err(ExperimentError::SampleTooLarge {
            wanted: count,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, n, count).into_vec())
}

fn with_probe(group: &CandidateSet, probe: ObjectIdx) -> CandidateSet {
    let mut space = group.clone();
    space.insert(probe);
    space
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplicityStatus {
    /// Enumeration completed.
    Ok,
    /// Another object in the space shares every value of the probe.
    Indistinguishable,
    /// The subset count exceeded the enumeration limit.
    Censored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityRow {
    pub probe: ObjectIdx,
    pub group: usize,
    pub space_size: usize,
    pub status: MultiplicityStatus,
    /// Core sets found; zero unless `status` is ok.
    pub core_sets: usize,
    pub min_size: Option<usize>,
    pub max_size: Option<usize>,
}

/// Counts the core sets of each probe placed into each group (the group
/// plus the probe itself), considering sets of at most `max_set_size`.
pub fn coreset_multiplicity(
    universe: &Universe,
    groups: &[CandidateSet],
    probes: &[ObjectIdx],
    max_set_size: usize,
) -> Result<Vec<MultiplicityRow>, ExperimentError> {
    if let Some(&p) = probes.iter().find(|&&p| p >= universe.n_objects()) {
        return Err(ExperimentError::UnknownObject(p));
    }
    let cells: Vec<(usize, usize)> = (0..probes.len())
        .flat_map(|p| (0..groups.len()).map(move |g| (p, g)))
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(p, g)| {
            let probe = probes[p];
            let space = with_probe(&groups[g], probe);
            let full_row: Vec<_> = (0..universe.n_attributes())
                .filter_map(|a| universe.observation_of(probe, a))
                .collect();
            let twins = universe.filter_all(&space, &full_row).len();
            let mut row = MultiplicityRow {
                probe,
                group: g,
                space_size: space.len(),
                status: MultiplicityStatus::Ok,
                core_sets: 0,
                min_size: None,
                max_size: None,
            };
            if twins > 1 {
                row.status = MultiplicityStatus::Indistinguishable;
                return Ok((p, row));
            }
            // Enumerating inside a table of just the space keeps every mask
            // as short as the space itself.
            let local = universe
                .subset(&space)
                .map_err(|e| ExperimentError::Subset(e.to_string()))?;
            let local_probe = space
                .iter()
                .position(|o| o == probe)
                .expect("probe is in its space");
            match enumerate_core_sets(&local, &local.all(), local_probe, max_set_size) {
                Ok(sets) => {
                    row.core_sets = sets.len();
                    row.min_size = sets.iter().map(Vec::len).min();
                    row.max_size = sets.iter().map(Vec::len).max();
                }
                Err(CoreSetError::ResourceLimit { .. }) => {
                    row.status = MultiplicityStatus::Censored
                }
                Err(e) => return Err(e.into()),
            }
            Ok((p, row))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    rows.sort_by_key(|(p, row)| (*p, row.group));
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

pub fn multiplicity_table(universe: &Universe, rows: &[MultiplicityRow]) -> Table {
    let mut t = Table::new([
        "probe_id",
        "group",
        "space_size",
        "core_sets",
        "min_size",
        "max_size",
        "status",
    ]);
    let opt = |x: Option<usize>| x.map_or_else(|| NOT_APPLICABLE.to_string(), |v| v.to_string());
    for r in rows {
        let status = match r.status {
            MultiplicityStatus::Ok => "ok",
            MultiplicityStatus::Indistinguishable => "indistinguishable",
            MultiplicityStatus::Censored => CENSORED,
        };
        let count = if r.status == MultiplicityStatus::Censored {
            CENSORED.to_string()
        } else {
            r.core_sets.to_string()
        };
        t.push(vec![
            universe.object_id(r.probe).to_string(),
            r.group.to_string(),
            r.space_size.to_string(),
            count,
            opt(r.min_size),
            opt(r.max_size),
            status.to_string(),
        ]);
    }
    t
}

/// Discriminability of `object`'s own value on `attr` within `space`;
/// `None` when the object has no value there, infinite when no member of the
/// space shares it.
pub fn own_value_bits(
    universe: &Universe,
    space: &CandidateSet,
    object: ObjectIdx,
    attr: AttrId,
) -> Option<f64> {
    let obs = universe.observation_of(object, attr)?;
    match attribute_discriminability(universe, space, obs) {
        Ok(bits) => Some(bits.value()),
        Err(EntropyError::ZeroProbability { .. }) => Some(f64::INFINITY),
        Err(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectProfile {
    pub group: usize,
    pub object: ObjectIdx,
    /// Indexed by attribute id.
    pub bits: Vec<Option<f64>>,
}

impl ObjectProfile {
    /// `(attribute, bits)` in descending order of bits, ascending id on ties;
    /// attributes without a value are left out.
    pub fn sorted(&self) -> Vec<(AttrId, f64)> {
        let mut v: Vec<(AttrId, f64)> = self
            .bits
            .iter()
            .enumerate()
            .filter_map(|(a, b)| b.map(|b| (a, b)))
            .collect();
        v.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        v
    }
}

/// Every member's own-value discriminability per attribute within its group.
pub fn discriminability_across_objects(
    universe: &Universe,
    groups: &[CandidateSet],
) -> Vec<ObjectProfile> {
    let m = universe.n_attributes();
    groups
        .par_iter()
        .enumerate()
        .flat_map_iter(|(g, space)| {
            space.iter().map(move |object| ObjectProfile {
                group: g,
                object,
                bits: (0..m)
                    .map(|a| own_value_bits(universe, space, object, a))
                    .collect(),
            })
        })
        .collect()
}

fn attribute(universe: &Universe, a: AttrId) -> &Attribute {
    universe.schema().attribute(a).expect("attribute in range")
}

fn bits_cell(b: Option<f64>) -> String {
    b.map_or_else(|| NOT_APPLICABLE.to_string(), fmt_f64)
}

/// Long format: one row per (object, attribute).
pub fn across_objects_table(universe: &Universe, profiles: &[ObjectProfile]) -> Table {
    let mut t = Table::new(["group", "object_id", "attribute", "value", "bits"]);
    for p in profiles {
        for (a, &b) in p.bits.iter().enumerate() {
            t.push(vec![
                p.group.to_string(),
                universe.object_id(p.object).to_string(),
                attribute(universe, a).name.clone(),
                attribute(universe, a)
                    .value_name(universe.cell(p.object, a))
                    .to_string(),
                bits_cell(b),
            ]);
        }
    }
    t
}

/// One row per (object, rank) with attributes sorted by descending bits.
pub fn sorted_profile_table(universe: &Universe, profiles: &[ObjectProfile]) -> Table {
    let mut t = Table::new(["group", "object_id", "rank", "attribute", "bits"]);
    for p in profiles {
        for (rank, (a, b)) in p.sorted().into_iter().enumerate() {
            t.push(vec![
                p.group.to_string(),
                universe.object_id(p.object).to_string(),
                (rank + 1).to_string(),
                attribute(universe, a).name.clone(),
                fmt_f64(b),
            ]);
        }
    }
    t
}

/// The probe's own-value discriminability per attribute in each group. With
/// `insert_probe` the probe joins every group first; without it a group that
/// lacks the probe's value yields an infinite cell.
pub fn discriminability_across_spaces(
    universe: &Universe,
    groups: &[CandidateSet],
    probe: ObjectIdx,
    insert_probe: bool,
) -> Result<Vec<ObjectProfile>, ExperimentError> {
    if probe >= universe.n_objects() {
        return Err(ExperimentError::UnknownObject(probe));
    }
    let m = universe.n_attributes();
    Ok(groups
        .iter()
        .enumerate()
        .map(|(g, group)| {
            let space = if insert_probe {
                with_probe(group, probe)
            } else {
                group.clone()
            };
            ObjectProfile {
                group: g,
                object: probe,
                bits: (0..m)
                    .map(|a| own_value_bits(universe, &space, probe, a))
                    .collect(),
            }
        })
        .collect())
}

/// Wide format: one row per group, one column per attribute.
pub fn across_spaces_table(
    universe: &Universe,
    groups: &[CandidateSet],
    profiles: &[ObjectProfile],
    insert_probe: bool,
) -> Table {
    let mut columns = vec![
        "probe_id".to_string(),
        "group".to_string(),
        "space_size".to_string(),
    ];
    columns.extend(universe.schema().iter().map(|a| a.name.clone()));
    let mut t = Table::new(columns);
    for p in profiles {
        let mut size = groups[p.group].len();
        if insert_probe && !groups[p.group].contains(p.object) {
            size += 1;
        }
        let mut row = vec![
            universe.object_id(p.object).to_string(),
            p.group.to_string(),
            size.to_string(),
        ];
        row.extend(p.bits.iter().map(|&b| bits_cell(b)));
        t.push(row);
    }
    t
}

/// Population variance of the finite values.
pub fn variance(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
}
