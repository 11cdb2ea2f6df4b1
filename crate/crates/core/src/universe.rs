//! Population table storage.
//!
//! A [`Universe`] is an immutable N x M table of categorical value codes plus a
//! per-(attribute, value) inverted index of membership bitmasks. Every search
//! space in the crate is a [`CandidateSet`] over the universe's object indices,
//! and narrowing a search space by an [`Observation`] is a single bitmask
//! intersection.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved cell code for an unknown value. Never matched by an observation.
pub const MISSING: u16 = u16::MAX;

/// Index of an attribute category (column).
pub type AttrId = usize;

/// Index of an object (row).
pub type ObjectIdx = usize;

const INDEX_MAGIC: &[u8; 8] = b"IDTRIDX1";

#[derive(Debug, Error)]
pub enum UniverseError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: expected {expected} fields, found {found}")]
    Arity {
        row: u64,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: duplicate object id `{id}`")]
    DuplicateObject { row: u64, id: String },

    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),

    #[error("header must be `object_id,<attr1>,...` with at least one attribute")]
    BadHeader,

    #[error("table has no data rows")]
    Empty,

    #[error("attribute `{attribute}` has more than {max} distinct values")]
    TooManyValues { attribute: String, max: usize },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{attribute}` has no value `{value}`")]
    UnknownValue { attribute: String, value: String },

    #[error("attribute index {0} out of range")]
    AttributeOutOfRange(AttrId),

    #[error("value code {code} is not declared for attribute {attribute}")]
    InvalidCode { attribute: AttrId, code: u16 },

    #[error("not a binary index file")]
    BadIndexMagic,

    #[error("binary index decode error: {0}")]
    Decode(#[from] bincode::Error),

    #[error("invalid table: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, UniverseError>;

/// One attribute category with its declared value list, in code order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub id: AttrId,
    pub name: String,
    pub values: Vec<String>,
}

impl Attribute {
    /// Number of declared values, `k_i`.
    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn code_of(&self, value: &str) -> Option<u16> {
        self.values
            .iter()
            .position(|v| v == value)
            .map(|p| p as u16)
    }

    /// External name of a code; `?` for [`MISSING`].
    pub fn value_name(&self, code: u16) -> &str {
        if code == MISSING {
            "?"
        } else {
            &self.values[code as usize]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, a) in attributes.iter().enumerate() {
            if a.id != i {
                return Err(UniverseError::Invalid(format!(
                    "attribute `{}` has id {} at position {}",
                    a.name, a.id, i
                )));
            }
            if seen.insert(a.name.as_str(), i).is_some() {
                return Err(UniverseError::DuplicateAttribute(a.name.clone()));
            }
            if a.values.is_empty() {
                return Err(UniverseError::Invalid(format!(
                    "attribute `{}` declares no values",
                    a.name
                )));
            }
            if a.values.len() >= MISSING as usize {
                return Err(UniverseError::TooManyValues {
                    attribute: a.name.clone(),
                    max: MISSING as usize - 1,
                });
            }
            let mut values = HashMap::new();
            for v in &a.values {
                if values.insert(v.as_str(), ()).is_some() {
                    return Err(UniverseError::Invalid(format!(
                        "attribute `{}` declares value `{}` twice",
                        a.name, v
                    )));
                }
            }
        }
        Ok(Self { attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attribute(&self, id: AttrId) -> Option<&Attribute> {
        self.attributes.get(id)
    }

    pub fn by_name(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.attributes.iter().map(Attribute::cardinality).collect()
    }
}

/// One known (attribute, value) pair about the unknown object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Observation {
    pub attribute: AttrId,
    pub value: u16,
}

impl Observation {
    pub fn new(attribute: AttrId, value: u16) -> Self {
        Self { attribute, value }
    }
}

/// Membership mask over object indices with a cached population count.
#[derive(Clone, PartialEq, Eq)]
pub struct CandidateSet {
    mask: FixedBitSet,
    size: usize,
}

impl CandidateSet {
    pub fn empty(universe_len: usize) -> Self {
        Self {
            mask: FixedBitSet::with_capacity(universe_len),
            size: 0,
        }
    }

    pub fn full(universe_len: usize) -> Self {
        let mut mask = FixedBitSet::with_capacity(universe_len);
        mask.insert_range(..);
        Self {
            mask,
            size: universe_len,
        }
    }

    /// Indices at or beyond `universe_len` are ignored.
    pub fn from_indices<I: IntoIterator<Item = ObjectIdx>>(
        universe_len: usize,
        indices: I,
    ) -> Self {
        let mut mask = FixedBitSet::with_capacity(universe_len);
        for i in indices {
            if i < universe_len {
                mask.insert(i);
            }
        }
        Self::from_mask(mask)
    }

    fn from_mask(mask: FixedBitSet) -> Self {
        let size = mask.count_ones(..);
        Self { mask, size }
    }

    /// Number of candidates, `n`.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Size of the universe this mask ranges over.
    pub fn universe_len(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, idx: ObjectIdx) -> bool {
        self.mask.contains(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = ObjectIdx> + '_ {
        self.mask.ones()
    }

    pub fn insert(&mut self, idx: ObjectIdx) {
        assert!(idx < self.mask.len(), "object index {idx} out of range");
        if !self.mask.put(idx) {
            self.size += 1;
        }
    }

    pub fn remove(&mut self, idx: ObjectIdx) {
        if self.mask.contains(idx) {
            self.mask.remove(idx);
            self.size -= 1;
        }
    }

    pub fn intersection(&self, other: &CandidateSet) -> CandidateSet {
        self.intersect_mask(&other.mask)
    }

    pub fn union(&self, other: &CandidateSet) -> CandidateSet {
        let mut mask = self.mask.clone();
        mask.union_with(&other.mask);
        Self::from_mask(mask)
    }

    pub fn is_subset(&self, other: &CandidateSet) -> bool {
        self.mask.is_subset(&other.mask)
    }

    fn intersect_mask(&self, mask: &FixedBitSet) -> CandidateSet {
        let mut out = self.mask.clone();
        out.intersect_with(mask);
        Self::from_mask(out)
    }

    fn intersection_count(&self, mask: &FixedBitSet) -> usize {
        self.mask.intersection_count(mask)
    }
}

impl fmt::Debug for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateSet")
            .field("size", &self.size)
            .field("members", &self.mask.ones().take(16).collect::<Vec<_>>())
            .finish()
    }
}

/// Per-value tallies of one attribute over a candidate set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValueCounts {
    /// Count per declared code, indexed by code.
    pub by_code: Vec<usize>,
    pub missing: usize,
}

impl ValueCounts {
    pub fn total(&self) -> usize {
        self.by_code.iter().sum::<usize>() + self.missing
    }

    /// Candidates holding a non-missing value.
    pub fn present(&self) -> usize {
        self.by_code.iter().sum()
    }

    pub fn get(&self, code: u16) -> usize {
        if code == MISSING {
            self.missing
        } else {
            self.by_code.get(code as usize).copied().unwrap_or(0)
        }
    }

    /// Non-zero entries as a map; MISSING appears under its own key.
    pub fn to_map(&self) -> BTreeMap<u16, usize> {
        let mut map: BTreeMap<u16, usize> = self
            .by_code
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(code, &c)| (code as u16, c))
            .collect();
        if self.missing > 0 {
            map.insert(MISSING, self.missing);
        }
        map
    }

    /// Non-zero counts of declared values.
    pub fn nonzero(&self) -> impl Iterator<Item = (u16, usize)> + '_ {
        self.by_code
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(code, &c)| (code as u16, c))
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    schema: AttributeSchema,
    object_ids: Vec<String>,
    cells: Vec<u16>,
}

/// Immutable indexed population table.
#[derive(Clone)]
pub struct Universe {
    schema: AttributeSchema,
    object_ids: Vec<String>,
    // Row-major, N * M.
    cells: Vec<u16>,
    // index[attr][code] = objects whose cell equals code.
    index: Vec<Vec<FixedBitSet>>,
    by_id: HashMap<String, ObjectIdx>,
}

impl fmt::Debug for Universe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Universe")
            .field("n_objects", &self.n_objects())
            .field("n_attributes", &self.n_attributes())
            .field("cardinalities", &self.schema.cardinalities())
            .finish()
    }
}

impl Universe {
    /// Builds a universe from already-coded cells.
    pub fn from_parts(
        schema: AttributeSchema,
        object_ids: Vec<String>,
        cells: Vec<u16>,
    ) -> Result<Self> {
        let n = object_ids.len();
        let m = schema.len();
        if n == 0 {
            return Err(UniverseError::Empty);
        }
        if m == 0 {
            return Err(UniverseError::BadHeader);
        }
        if cells.len() != n * m {
            return Err(UniverseError::Invalid(format!(
                "expected {} cells, found {}",
                n * m,
                cells.len()
            )));
        }

        let mut by_id = HashMap::with_capacity(n);
        for (i, id) in object_ids.iter().enumerate() {
            if by_id.insert(id.clone(), i).is_some() {
                return Err(UniverseError::DuplicateObject {
                    row: i as u64 + 2,
                    id: id.clone(),
                });
            }
        }

        let mut index: Vec<Vec<FixedBitSet>> = schema
            .iter()
            .map(|a| vec![FixedBitSet::with_capacity(n); a.cardinality()])
            .collect();
        for (obj, row) in cells.chunks_exact(m).enumerate() {
            for (attr, &code) in row.iter().enumerate() {
                if code == MISSING {
                    continue;
                }
                let masks = &mut index[attr];
                match masks.get_mut(code as usize) {
                    Some(mask) => mask.insert(obj),
                    None => {
                        return Err(UniverseError::InvalidCode {
                            attribute: attr,
                            code,
                        })
                    }
                }
            }
        }

        Ok(Self {
            schema,
            object_ids,
            cells,
            index,
            by_id,
        })
    }

    /// Builds a universe from string rows. Empty strings and `?` are MISSING;
    /// codes are assigned in first-seen order per column.
    pub fn from_string_rows<S, I, R>(attribute_names: &[S], rows: I) -> Result<Self>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (String, R)>,
        R: IntoIterator,
        R::Item: AsRef<str>,
    {
        let mut builder = TableBuilder::new(attribute_names)?;
        for (row_no, (id, values)) in rows.into_iter().enumerate() {
            let values: Vec<R::Item> = values.into_iter().collect();
            builder.push(row_no as u64 + 2, id, values.iter().map(AsRef::as_ref))?;
        }
        builder.finish()
    }

    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = File::open(path)?;
        Self::read_csv(BufReader::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(UniverseError::BadHeader);
        }
        let names: Vec<&str> = headers.iter().skip(1).map(str::trim).collect();
        let mut builder = TableBuilder::new(&names)?;
        let expected = headers.len();
        for record in rdr.records() {
            let record = record?;
            let row = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != expected {
                return Err(UniverseError::Arity {
                    row,
                    expected,
                    found: record.len(),
                });
            }
            let id = record[0].trim().to_string();
            builder.push(row, id, record.iter().skip(1))?;
        }
        builder.finish()
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().from_writer(writer);
        let mut header = vec!["object_id"];
        header.extend(self.schema.iter().map(|a| a.name.as_str()));
        wtr.write_record(&header)?;
        for obj in 0..self.n_objects() {
            let mut rec = Vec::with_capacity(self.n_attributes() + 1);
            rec.push(self.object_ids[obj].as_str());
            for (attr, &code) in self.row(obj).iter().enumerate() {
                rec.push(self.schema.attributes[attr].value_name(code));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Serializes the table into the binary index format.
    pub fn write_index<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(INDEX_MAGIC)?;
        let snap = Snapshot {
            schema: self.schema.clone(),
            object_ids: self.object_ids.clone(),
            cells: self.cells.clone(),
        };
        bincode::serialize_into(&mut writer, &snap)?;
        Ok(())
    }

    pub fn read_index<R: Read>(mut reader: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(UniverseError::BadIndexMagic);
        }
        let snap: Snapshot = bincode::deserialize_from(reader)?;
        Self::from_parts(snap.schema, snap.object_ids, snap.cells)
    }

    /// Loads either a binary index or a CSV file, sniffing the magic bytes.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut file = BufReader::new(File::open(path.as_ref())?);
        let mut magic = [0u8; 8];
        let is_index = file.read_exact(&mut magic).is_ok() && &magic == INDEX_MAGIC;
        if is_index {
            Self::read_index(BufReader::new(File::open(path)?))
        } else {
            Self::load_csv(path)
        }
    }

    pub fn n_objects(&self) -> usize {
        self.object_ids.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.schema.len()
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn object_id(&self, idx: ObjectIdx) -> &str {
        &self.object_ids[idx]
    }

    pub fn object_ids(&self) -> &[String] {
        &self.object_ids
    }

    pub fn object_index(&self, id: &str) -> Option<ObjectIdx> {
        self.by_id.get(id).copied()
    }

    pub fn cell(&self, obj: ObjectIdx, attr: AttrId) -> u16 {
        self.cells[obj * self.n_attributes() + attr]
    }

    pub fn row(&self, obj: ObjectIdx) -> &[u16] {
        let m = self.n_attributes();
        &self.cells[obj * m..(obj + 1) * m]
    }

    /// Every object in the universe.
    pub fn all(&self) -> CandidateSet {
        CandidateSet::full(self.n_objects())
    }

    /// The object's own value on `attr` as an observation, or `None` if MISSING.
    pub fn observation_of(&self, obj: ObjectIdx, attr: AttrId) -> Option<Observation> {
        let code = self.cell(obj, attr);
        (code != MISSING).then(|| Observation::new(attr, code))
    }

    /// Resolves external names to an observation.
    pub fn observation(&self, attribute: &str, value: &str) -> Result<Observation> {
        let attr = self
            .schema
            .by_name(attribute)
            .ok_or_else(|| UniverseError::UnknownAttribute(attribute.to_string()))?;
        let code = attr
            .code_of(value)
            .ok_or_else(|| UniverseError::UnknownValue {
                attribute: attribute.to_string(),
                value: value.to_string(),
            })?;
        Ok(Observation::new(attr.id, code))
    }

    pub fn validate(&self, obs: Observation) -> Result<()> {
        let attr = self
            .schema
            .attribute(obs.attribute)
            .ok_or(UniverseError::AttributeOutOfRange(obs.attribute))?;
        if obs.value == MISSING || obs.value as usize >= attr.cardinality() {
            return Err(UniverseError::InvalidCode {
                attribute: obs.attribute,
                code: obs.value,
            });
        }
        Ok(())
    }

    /// Objects whose cell equals the observed value.
    pub fn value_mask(&self, obs: Observation) -> Option<&FixedBitSet> {
        self.index.get(obs.attribute)?.get(obs.value as usize)
    }

    /// Intersects `base` with the objects holding `obs.value` on `obs.attribute`.
    ///
    /// Objects MISSING that attribute never survive. An observation that is not
    /// declared in the schema matches nothing.
    pub fn filter(&self, base: &CandidateSet, obs: Observation) -> CandidateSet {
        match self.value_mask(obs) {
            Some(mask) => base.intersect_mask(mask),
            None => CandidateSet::empty(base.universe_len()),
        }
    }

    pub fn filter_all<'a, I>(&self, base: &CandidateSet, observations: I) -> CandidateSet
    where
        I: IntoIterator<Item = &'a Observation>,
    {
        let mut out = base.clone();
        for obs in observations {
            if out.is_empty() {
                break;
            }
            out = self.filter(&out, *obs);
        }
        out
    }

    /// Size of `filter(base, obs)` without materializing it.
    pub fn filter_count(&self, base: &CandidateSet, obs: Observation) -> usize {
        self.value_mask(obs)
            .map(|mask| base.intersection_count(mask))
            .unwrap_or(0)
    }

    /// Tallies `attr`'s values over `cand`. Counts sum to `cand.len()`.
    pub fn value_counts(&self, cand: &CandidateSet, attr: AttrId) -> ValueCounts {
        let masks = &self.index[attr];
        let words = cand.universe_len().div_ceil(64);
        if cand.len() * 4 < masks.len() * words {
            // Sparse candidate sets: a row scan touches fewer words than the masks do.
            let mut by_code = vec![0usize; masks.len()];
            let mut missing = 0;
            for obj in cand.iter() {
                match self.cell(obj, attr) {
                    MISSING => missing += 1,
                    code => by_code[code as usize] += 1,
                }
            }
            ValueCounts { by_code, missing }
        } else {
            let by_code: Vec<usize> = masks.iter().map(|m| cand.intersection_count(m)).collect();
            let present: usize = by_code.iter().sum();
            ValueCounts {
                by_code,
                missing: cand.len() - present,
            }
        }
    }

    /// Restricts the table to `objects`, keeping the schema.
    pub fn subset(&self, objects: &CandidateSet) -> Result<Self> {
        let m = self.n_attributes();
        let mut ids = Vec::with_capacity(objects.len());
        let mut cells = Vec::with_capacity(objects.len() * m);
        for obj in objects.iter() {
            ids.push(self.object_ids[obj].clone());
            cells.extend_from_slice(self.row(obj));
        }
        Self::from_parts(self.schema.clone(), ids, cells)
    }
}

struct TableBuilder {
    names: Vec<String>,
    values: Vec<Vec<String>>,
    lookup: Vec<HashMap<String, u16>>,
    ids: Vec<String>,
    seen_ids: HashMap<String, u64>,
    cells: Vec<u16>,
}

impl TableBuilder {
    fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(UniverseError::BadHeader);
        }
        let mut seen = HashMap::new();
        for n in names {
            if seen.insert(n.as_ref().to_string(), ()).is_some() {
                return Err(UniverseError::DuplicateAttribute(n.as_ref().to_string()));
            }
        }
        Ok(Self {
            names: names.iter().map(|n| n.as_ref().to_string()).collect(),
            values: vec![Vec::new(); names.len()],
            lookup: vec![HashMap::new(); names.len()],
            ids: Vec::new(),
            seen_ids: HashMap::new(),
            cells: Vec::new(),
        })
    }

    fn push<'a, I: Iterator<Item = &'a str>>(
        &mut self,
        row: u64,
        id: String,
        fields: I,
    ) -> Result<()> {
        if self.seen_ids.insert(id.clone(), row).is_some() {
            return Err(UniverseError::DuplicateObject { row, id });
        }
        let start = self.cells.len();
        for (attr, raw) in fields.enumerate() {
            if attr >= self.names.len() {
                return Err(UniverseError::Arity {
                    row,
                    expected: self.names.len() + 1,
                    found: attr + 2,
                });
            }
            let raw = raw.trim();
            let code = if raw.is_empty() || raw == "?" {
                MISSING
            } else if let Some(&c) = self.lookup[attr].get(raw) {
                c
            } else {
                let c = self.values[attr].len();
                if c >= MISSING as usize {
                    return Err(UniverseError::TooManyValues {
                        attribute: self.names[attr].clone(),
                        max: MISSING as usize - 1,
                    });
                }
                self.values[attr].push(raw.to_string());
                self.lookup[attr].insert(raw.to_string(), c as u16);
                c as u16
            };
            self.cells.push(code);
        }
        let found = self.cells.len() - start;
        if found != self.names.len() {
            return Err(UniverseError::Arity {
                row,
                expected: self.names.len() + 1,
                found: found + 1,
            });
        }
        self.ids.push(id);
        Ok(())
    }

    fn finish(self) -> Result<Universe> {
        if self.ids.is_empty() {
            return Err(UniverseError::Empty);
        }
        let attributes = self
            .names
            .into_iter()
            .zip(self.values)
            .enumerate()
            .map(|(id, (name, mut values))| {
                // A column that is entirely MISSING still needs k_i >= 1.
                if values.is_empty() {
                    values.push("?missing".to_string());
                }
                Attribute { id, name, values }
            })
            .collect();
        let schema = AttributeSchema::new(attributes)?;
        Universe::from_parts(schema, self.ids, self.cells)
    }
}
