//! Dataset registry and tracing sessions behind the HTTP routes.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{SecondsFormat, Utc};
use idtrace_core::{ObservationSet, Session, Status, TracePolicy, Universe};
use parking_lot::{Mutex, RwLock};
use sha2::{Digest, Sha256};

use crate::error::ApiError;
use crate::model::{
    AttributeInfo, BitsValue, CreateSession, DatasetRecord, NamedObservation, ObjectRow, PathStep,
    PostObservation, PostUnavailable, RankedView, RecommendationsView, SessionView, WhatIfOutcome,
    WhatIfView,
};
use crate::store::{LogEvent, Store};

/// Default candidate count at or below which session views list the rows.
pub const DEFAULT_DISPLAY_THRESHOLD: usize = 50;
/// A snapshot is written every this many revisions.
pub const SNAPSHOT_INTERVAL: u64 = 16;
/// Recommendations returned when the request does not say.
pub const DEFAULT_TOP: usize = 5;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub display_threshold: usize,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            display_threshold: DEFAULT_DISPLAY_THRESHOLD,
        }
    }
}

struct Dataset {
    record: DatasetRecord,
    universe: Arc<Universe>,
}

#[derive(Clone)]
struct SessionEntry {
    id: String,
    dataset: Arc<Dataset>,
    session: Session,
    known: Vec<NamedObservation>,
    literal: bool,
    revision: u64,
    created_at: String,
    updated_at: String,
    deleted: bool,
}

/// Shared state of a running service. Every method is synchronous; mutations
/// of one session are serialized by its lock and checked against the
/// caller's expected revision.
pub struct ServiceState {
    store: Store,
    display_threshold: usize,
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<SessionEntry>>>>,
    uploads: Mutex<()>,
}

/// What happened while loading persisted state.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub datasets: usize,
    pub sessions: usize,
    /// `(session id, reason)` for logs that could not be replayed.
    pub skipped: Vec<(String, String)>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn dataset_record(name: String, digest: String, universe: &Universe) -> DatasetRecord {
    DatasetRecord {
        dataset_id: format!("ds-{}", &digest[..16]),
        name,
        digest,
        n_objects: universe.n_objects(),
        n_attributes: universe.n_attributes(),
        created_at: now(),
        attributes: universe
            .schema()
            .iter()
            .map(|a| AttributeInfo {
                name: a.name.clone(),
                values: a.values.clone(),
            })
            .collect(),
    }
}

fn attribute_id(universe: &Universe, name: &str) -> Result<usize, ApiError> {
    universe
        .schema()
        .by_name(name)
        .map(|a| a.id)
        .ok_or_else(|| ApiError::invalid_observation(format!("unknown attribute `{name}`")))
}

fn object_row(universe: &Universe, obj: usize) -> ObjectRow {
    ObjectRow {
        object_id: universe.object_id(obj).to_string(),
        values: universe
            .schema()
            .iter()
            .map(|a| a.value_name(universe.cell(obj, a.id)).to_string())
            .collect(),
    }
}

impl SessionEntry {
    fn create(
        id: String,
        dataset: Arc<Dataset>,
        known: Vec<NamedObservation>,
        literal: bool,
        at: String,
    ) -> Result<Self, ApiError> {
        let universe = &dataset.universe;
        let mut set = ObservationSet::new();
        for k in &known {
            let obs = universe
                .observation(&k.attribute, &k.value)
                .map_err(|e| ApiError::invalid_observation(e.to_string()))?;
            set.insert(obs).map_err(idtrace_core::TraceError::from)?;
        }
        let policy = TracePolicy {
            stop_on_zero_information: !literal,
        };
        let session = Session::with_policy(universe.clone(), set, policy)?;
        Ok(SessionEntry {
            id,
            dataset,
            session,
            known,
            literal,
            revision: 0,
            created_at: at.clone(),
            updated_at: at,
            deleted: false,
        })
    }

    fn observe(&mut self, attribute: &str, value: &str, at: String) -> Result<(), ApiError> {
        let obs = self
            .dataset
            .universe
            .observation(attribute, value)
            .map_err(|e| ApiError::invalid_observation(e.to_string()))?;
        self.session.observe(obs)?;
        self.revision += 1;
        self.updated_at = at;
        Ok(())
    }

    fn mark_unavailable(&mut self, attribute: &str, at: String) -> Result<(), ApiError> {
        let attr = attribute_id(&self.dataset.universe, attribute)?;
        self.session.mark_unavailable(attr)?;
        self.revision += 1;
        self.updated_at = at;
        Ok(())
    }

    fn view(&self, display_threshold: usize) -> SessionView {
        let universe = &self.dataset.universe;
        let schema = universe.schema();
        let s = &self.session;
        let history = s.entropy_history();
        let count = s.candidates().len();
        SessionView {
            session_id: self.id.clone(),
            dataset_id: self.dataset.record.dataset_id.clone(),
            revision: self.revision,
            status: s.status(),
            literal: self.literal,
            candidate_count: count,
            entropy: s.entropy().map(BitsValue::from),
            known: self.known.clone(),
            path: s
                .path()
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    let a = schema.attribute(o.attribute).expect("validated attribute");
                    PathStep {
                        attribute: a.name.clone(),
                        value: a.value_name(o.value).to_string(),
                        entropy_after: history.get(i + 1).map(|b| BitsValue::from(*b)),
                    }
                })
                .collect(),
            unavailable: s
                .unavailable()
                .iter()
                .map(|&a| {
                    schema
                        .attribute(a)
                        .expect("validated attribute")
                        .name
                        .clone()
                })
                .collect(),
            entropy_history: history.iter().map(|b| BitsValue::from(*b)).collect(),
            identified: (s.status() == Status::Identified).then(|| {
                object_row(
                    universe,
                    s.candidates().iter().next().expect("one candidate"),
                )
            }),
            survivors: (count > 0 && count <= display_threshold).then(|| {
                s.candidates()
                    .iter()
                    .map(|o| object_row(universe, o))
                    .collect()
            }),
            created_at: self.created_at.clone(),
            updated_at: self.updated_at.clone(),
        }
    }

    fn whatif(&self, attr: usize) -> Result<WhatIfView, ApiError> {
        let universe = &self.dataset.universe;
        let a = universe
            .schema()
            .attribute(attr)
            .expect("attribute in range");
        let outcomes = self.session.whatif(attr)?;
        let present: usize = outcomes.iter().map(|w| w.count).sum();
        let expected = if present == 0 {
            0.0
        } else {
            outcomes
                .iter()
                .map(|w| (w.count * w.count) as f64)
                .sum::<f64>()
                / present as f64
        };
        Ok(WhatIfView {
            attribute: a.name.clone(),
            outcomes: outcomes
                .into_iter()
                .map(|w| WhatIfOutcome {
                    value: a.value_name(w.value).to_string(),
                    count: w.count,
                    entropy: w.entropy.into(),
                })
                .collect(),
            missing: self.session.candidates().len() - present,
            expected_candidates: expected,
        })
    }
}

impl ServiceState {
    /// Opens the data directory, reloading datasets and replaying every
    /// session log found there.
    pub fn open(config: &ServiceConfig) -> Result<(Self, LoadReport), ApiError> {
        let store = Store::open(&config.data_dir)?;
        let state = ServiceState {
            store,
            display_threshold: config.display_threshold,
            datasets: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(BTreeMap::new()),
            uploads: Mutex::new(()),
        };
        let mut report = LoadReport::default();
        for (record, csv) in state.store.load_datasets()? {
            let universe = Universe::read_csv(csv.as_slice()).map_err(ApiError::invalid_csv)?;
            let id = record.dataset_id.clone();
            state.datasets.write().insert(
                id,
                Arc::new(Dataset {
                    record,
                    universe: Arc::new(universe),
                }),
            );
            report.datasets += 1;
        }
        for id in state.store.session_ids()? {
            match state.replay(&id) {
                Ok(Some(entry)) => {
                    state
                        .sessions
                        .write()
                        .insert(id, Arc::new(Mutex::new(entry)));
                    report.sessions += 1;
                }
                Ok(None) => {}
                Err(e) => {
                    tracing::warn!(session = %id, error = %e, "skipping session log");
                    report.skipped.push((id, e.to_string()));
                }
            }
        }
        Ok((state, report))
    }

    pub fn display_threshold(&self) -> usize {
        self.display_threshold
    }

    /// Rebuilds a session from its log alone; `None` if it was deleted. A
    /// snapshot, when present, must agree with the replayed state at its
    /// revision.
    fn replay(&self, session_id: &str) -> Result<Option<SessionEntry>, ApiError> {
        let events = self.store.read_log(session_id)?;
        let snapshot = self.store.read_snapshot(session_id)?;
        let mut events = events.into_iter();
        let Some(LogEvent::Created {
            session_id: sid,
            dataset_id,
            known,
            literal,
            at,
        }) = events.next()
        else {
            return Err(ApiError::storage(
                "log does not start with a creation event",
            ));
        };
        if sid != session_id {
            return Err(ApiError::storage(format!("log names session `{sid}`")));
        }
        let dataset = self.dataset_entry(&dataset_id)?;
        let mut entry = SessionEntry::create(sid, dataset, known, literal, at)?;
        let check = |entry: &SessionEntry| -> Result<(), ApiError> {
            match &snapshot {
                Some(snap)
                    if snap.revision == entry.revision
                        && *snap != entry.view(self.display_threshold) =>
                {
                    Err(ApiError::storage(format!(
                        "snapshot at revision {} disagrees with the log",
                        snap.revision
                    )))
                }
                _ => Ok(()),
            }
        };
        check(&entry)?;
        for event in events {
            match event {
                LogEvent::Created { .. } => return Err(ApiError::storage("second creation event")),
                LogEvent::Deleted { .. } => return Ok(None),
                LogEvent::Observed {
                    revision,
                    attribute,
                    value,
                    at,
                } => {
                    entry.observe(&attribute, &value, at)?;
                    if entry.revision != revision {
                        return Err(ApiError::storage(format!(
                            "revision {revision} out of sequence"
                        )));
                    }
                }
                LogEvent::Unavailable {
                    revision,
                    attribute,
                    at,
                } => {
                    entry.mark_unavailable(&attribute, at)?;
                    if entry.revision != revision {
                        return Err(ApiError::storage(format!(
                            "revision {revision} out of sequence"
                        )));
                    }
                }
            }
            check(&entry)?;
        }
        Ok(Some(entry))
    }

    /// The session as rebuilt from its persisted log, without touching the
    /// live copy.
    pub fn replay_from_log(&self, session_id: &str) -> Result<SessionView, ApiError> {
        self.replay(session_id)?
            .map(|e| e.view(self.display_threshold))
            .ok_or_else(|| ApiError::session_not_found(session_id))
    }

    fn dataset_entry(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        self.datasets
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::dataset_not_found(id))
    }

    fn session_entry(&self, id: &str) -> Result<Arc<Mutex<SessionEntry>>, ApiError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::session_not_found(id))
    }

    /// Parses and registers a CSV upload. Uploading the same bytes again
    /// returns the existing record with `false`.
    pub fn upload_dataset(
        &self,
        name: Option<String>,
        csv: &[u8],
    ) -> Result<(DatasetRecord, bool), ApiError> {
        let digest = hex::encode(Sha256::digest(csv));
        let id = format!("ds-{}", &digest[..16]);
        if let Ok(existing) = self.dataset_entry(&id) {
            return Ok((existing.record.clone(), false));
        }
        let universe = Universe::read_csv(csv).map_err(ApiError::invalid_csv)?;
        let _guard = self.uploads.lock();
        if let Ok(existing) = self.dataset_entry(&id) {
            return Ok((existing.record.clone(), false));
        }
        let record = dataset_record(
            name.unwrap_or_else(|| "dataset".to_string()),
            digest,
            &universe,
        );
        self.store.save_dataset(&record, csv)?;
        self.datasets.write().insert(
            id,
            Arc::new(Dataset {
                record: record.clone(),
                universe: Arc::new(universe),
            }),
        );
        Ok((record, true))
    }

    pub fn datasets(&self) -> Vec<DatasetRecord> {
        self.datasets
            .read()
            .values()
            .map(|d| d.record.clone())
            .collect()
    }

    pub fn dataset(&self, id: &str) -> Result<DatasetRecord, ApiError> {
        Ok(self.dataset_entry(id)?.record.clone())
    }

    pub fn universe(&self, dataset_id: &str) -> Result<Arc<Universe>, ApiError> {
        Ok(self.dataset_entry(dataset_id)?.universe.clone())
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionView, ApiError> {
        let dataset = self.dataset_entry(&req.dataset_id)?;
        let known = req
            .known
            .into_iter()
            .map(|k| {
                let text = format!("{k:?}");
                k.into_pair().ok_or_else(|| {
                    ApiError::bad_request(format!("known entry {text} is not attribute=value"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let id = uuid::Uuid::new_v4().to_string();
        let at = now();
        let entry = SessionEntry::create(
            id.clone(),
            dataset.clone(),
            known.clone(),
            req.literal,
            at.clone(),
        )?;
        self.store.append_event(
            &id,
            &LogEvent::Created {
                session_id: id.clone(),
                dataset_id: req.dataset_id,
                known,
                literal: req.literal,
                at,
            },
        )?;
        let view = entry.view(self.display_threshold);
        self.sessions
            .write()
            .insert(id, Arc::new(Mutex::new(entry)));
        Ok(view)
    }

    pub fn session(&self, id: &str) -> Result<SessionView, ApiError> {
        let entry = self.session_entry(id)?;
        let entry = entry.lock();
        Ok(entry.view(self.display_threshold))
    }

    /// Every session, optionally only those of one dataset, ordered by id.
    pub fn sessions(&self, dataset_id: Option<&str>) -> Vec<SessionView> {
        let entries: Vec<_> = self.sessions.read().values().cloned().collect();
        entries
            .iter()
            .map(|e| e.lock())
            .filter(|e| dataset_id.is_none_or(|d| e.dataset.record.dataset_id == d))
            .map(|e| e.view(self.display_threshold))
            .collect()
    }

    pub fn delete_session(&self, id: &str) -> Result<(), ApiError> {
        let entry = self.session_entry(id)?;
        let mut entry = entry.lock();
        if entry.deleted {
            return Err(ApiError::session_not_found(id));
        }
        self.store
            .append_event(id, &LogEvent::Deleted { at: now() })?;
        self.store.remove_snapshot(id)?;
        entry.deleted = true;
        self.sessions.write().remove(id);
        Ok(())
    }

    /// The `top` best attributes with their what-if previews.
    pub fn recommendations(
        &self,
        id: &str,
        top: Option<usize>,
    ) -> Result<RecommendationsView, ApiError> {
        let entry = self.session_entry(id)?;
        let entry = entry.lock();
        let rec = entry.session.recommend_next()?;
        let universe = &entry.dataset.universe;
        let ranking = rec
            .ranking
            .iter()
            .take(top.unwrap_or(DEFAULT_TOP))
            .enumerate()
            .map(|(i, r)| {
                Ok(RankedView {
                    rank: i + 1,
                    attribute: universe
                        .schema()
                        .attribute(r.attribute)
                        .expect("ranked attribute")
                        .name
                        .clone(),
                    bits: r.bits.into(),
                    whatif: entry.whatif(r.attribute)?,
                })
            })
            .collect::<Result<Vec<_>, ApiError>>()?;
        Ok(RecommendationsView {
            session_id: entry.id.clone(),
            revision: entry.revision,
            candidate_count: entry.session.candidates().len(),
            total: rec.ranking.len(),
            ranking,
        })
    }

    pub fn whatif(&self, id: &str, attribute: &str) -> Result<WhatIfView, ApiError> {
        let entry = self.session_entry(id)?;
        let entry = entry.lock();
        let attr = attribute_id(&entry.dataset.universe, attribute)?;
        entry.whatif(attr)
    }

    fn mutate<F>(&self, id: &str, expected_revision: u64, apply: F) -> Result<SessionView, ApiError>
    where
        F: FnOnce(&mut SessionEntry, String) -> Result<LogEvent, ApiError>,
    {
        let handle = self.session_entry(id)?;
        let mut live = handle.lock();
        if live.deleted {
            return Err(ApiError::session_not_found(id));
        }
        if live.revision != expected_revision {
            return Err(ApiError::revision_conflict(
                expected_revision,
                live.revision,
            ));
        }
        let mut next = live.clone();
        let event = apply(&mut next, now())?;
        self.store.append_event(id, &event)?;
        *live = next;
        let view = live.view(self.display_threshold);
        if live.revision % SNAPSHOT_INTERVAL == 0 {
            self.store.write_snapshot(&view)?;
        }
        Ok(view)
    }

    pub fn observe(&self, id: &str, req: PostObservation) -> Result<SessionView, ApiError> {
        self.mutate(id, req.expected_revision, |entry, at| {
            entry.observe(&req.attribute, &req.value, at.clone())?;
            Ok(LogEvent::Observed {
                revision: entry.revision,
                attribute: req.attribute,
                value: req.value,
                at,
            })
        })
    }

    pub fn mark_unavailable(
        &self,
        id: &str,
        req: PostUnavailable,
    ) -> Result<SessionView, ApiError> {
        self.mutate(id, req.expected_revision, |entry, at| {
            entry.mark_unavailable(&req.attribute, at.clone())?;
            Ok(LogEvent::Unavailable {
                revision: entry.revision,
                attribute: req.attribute,
                at,
            })
        })
    }
}
