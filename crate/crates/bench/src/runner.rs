//! JSON-configured benchmark runs and their output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use idtrace_core::{ObjectIdx, Universe, UniverseError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chart::{Chart, Kind};
use crate::efficiency::{titf_vs_random, EfficiencyConfig, EfficiencyError, EfficiencyReport};
use crate::experiments::{
    across_objects_table, across_spaces_table, coreset_multiplicity, derive_seed,
    discriminability_across_objects, discriminability_across_spaces, multiplicity_table, partition,
    sample_objects, sorted_profile_table, ExperimentError, Grouping, MultiplicityRow,
    MultiplicityStatus, ObjectProfile,
};
use crate::generator::{generate_universe, GenerateError, GeneratorConfig};
use crate::table::{Table, TableError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(#[from] serde_json::Error),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("loading dataset: {0}")]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Efficiency(#[from] EfficiencyError),
    #[error("unknown probe object {0:?}")]
    UnknownProbe(String),
    #[error("table {name}: {source}")]
    Table { name: String, source: TableError },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Where the population table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Generate(GeneratorConfig),
    /// CSV or binary index; relative paths resolve against the config file.
    Path(PathBuf),
}

impl Default for Dataset {
    fn default() -> Self {
        Dataset::Generate(GeneratorConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiplicityConfig {
    pub grouping: Grouping,
    pub probes: usize,
    pub max_set_size: usize,
}

impl Default for MultiplicityConfig {
    fn default() -> Self {
        MultiplicityConfig {
            grouping: Grouping {
                group_count: 10,
                group_size: 500,
            },
            probes: 10,
            max_set_size: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcrossObjectsConfig {
    pub grouping: Grouping,
}

impl Default for AcrossObjectsConfig {
    fn default() -> Self {
        AcrossObjectsConfig {
            grouping: Grouping {
                group_count: 10,
                group_size: 100,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcrossSpacesConfig {
    pub grouping: Grouping,
    /// Object id of the probe; drawn with the run seed when absent.
    pub probe: Option<String>,
    /// Add the probe to every group before measuring.
    pub insert_probe: bool,
}

impl Default for AcrossSpacesConfig {
    fn default() -> Self {
        AcrossSpacesConfig {
            grouping: Grouping {
                group_count: 10,
                group_size: 100,
            },
            probe: None,
            insert_probe: true,
        }
    }
}

/// A benchmark run. Experiments whose section is absent are skipped; a
/// config with no experiment sections runs all four with defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dataset: Dataset,
    pub seed: u64,
    pub q1: Option<MultiplicityConfig>,
    pub q2: Option<AcrossObjectsConfig>,
    pub q3: Option<AcrossSpacesConfig>,
    pub q4: Option<EfficiencyConfig>,
    /// Also write SVG charts.
    pub charts: bool,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let mut config: BenchConfig = serde_json::from_str(text)?;
        if config.q1.is_none() && config.q2.is_none() && config.q3.is_none() && config.q4.is_none()
        {
            config.q1 = Some(MultiplicityConfig::default());
            config.q2 = Some(AcrossObjectsConfig::default());
            config.q3 = Some(AcrossSpacesConfig::default());
            config.q4 = Some(EfficiencyConfig::default());
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        if let Dataset::Path(p) = &mut config.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn load_dataset(&self) -> Result<Universe, BenchError> {
        Ok(match &self.dataset {
            Dataset::Generate(g) => generate_universe(g)?,
            Dataset::Path(p) => Universe::load(p)?,
        })
    }
}

/// Seed, dataset fingerprint and timer facts written next to the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMeta {
    pub seed: u64,
    pub dataset: DatasetMeta,
    /// Smallest observed step of the monotonic clock.
    pub timer_resolution_ns: u64,
    pub experiments: Vec<String>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q4: Option<EfficiencyMeta>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    pub n_objects: usize,
    pub n_attributes: usize,
    /// SHA-256 of the dataset in canonical CSV form.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMeta {
    pub aggregate_reduction: f64,
    pub pooled_reduction: f64,
    pub aggregate_time_reduction: f64,
}

pub fn dataset_digest(universe: &Universe) -> String {
    hex::encode(Sha256::digest(universe.to_csv_string().as_bytes()))
}

pub fn timer_resolution() -> std::time::Duration {
    let mut best = std::time::Duration::MAX;
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

/// Everything a run produced, before anything is written.
#[derive(Debug)]
pub struct BenchOutcome {
    pub universe: Arc<Universe>,
    pub q1: Option<Vec<MultiplicityRow>>,
    pub q2: Option<Vec<ObjectProfile>>,
    pub q3: Option<Vec<ObjectProfile>>,
    pub q4: Option<EfficiencyReport>,
    /// `(file stem, table)` in output order.
    pub tables: Vec<(String, Table)>,
    pub charts: Vec<(String, Chart)>,
    pub meta: BenchMeta,
}

/// Runs the configured experiments. Timings cover the experiments only, not
/// dataset generation or loading.
pub fn run_bench(config: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    let universe = Arc::new(config.load_dataset()?);
    let dataset = DatasetMeta {
        source: match &config.dataset {
            Dataset::Generate(_) => "generated".to_string(),
            Dataset::Path(p) => p.display().to_string(),
        },
        n_objects: universe.n_objects(),
        n_attributes: universe.n_attributes(),
        sha256: dataset_digest(&universe),
    };
    let started = Instant::now();
    let seed = config.seed;
    let mut out = BenchOutcome {
        universe: universe.clone(),
        q1: None,
        q2: None,
        q3: None,
        q4: None,
        tables: Vec::new(),
        charts: Vec::new(),
        meta: BenchMeta {
            seed,
            dataset,
            timer_resolution_ns: timer_resolution().as_nanos() as u64,
            experiments: Vec::new(),
            files: Vec::new(),
            q4: None,
            elapsed_seconds: 0.0,
        },
    };
    let u = &*universe;

    if let Some(q1) = &config.q1 {
        let groups = partition(u, q1.grouping, derive_seed(seed, &[1, 0]))?;
        let probes = sample_objects(u, q1.probes, derive_seed(seed, &[1, 1]))?;
        let rows = coreset_multiplicity(u, &groups, &probes, q1.max_set_size)?;
        out.tables.push(("q1".into(), multiplicity_table(u, &rows)));
        out.charts
            .push(("q1".into(), q1_chart(u, &rows, &probes, groups.len())));
        out.q1 = Some(rows);
        out.meta.experiments.push("q1".into());
    }

    if let Some(q2) = &config.q2 {
        let groups = partition(u, q2.grouping, derive_seed(seed, &[2, 0]))?;
        let profiles = discriminability_across_objects(u, &groups);
        out.tables
            .push(("q2".into(), across_objects_table(u, &profiles)));
        out.tables
            .push(("q2_profile".into(), sorted_profile_table(u, &profiles)));
        out.charts.extend(q2_charts(u, &profiles));
        out.q2 = Some(profiles);
        out.meta.experiments.push("q2".into());
    }

    if let Some(q3) = &config.q3 {
        let groups = partition(u, q3.grouping, derive_seed(seed, &[3, 0]))?;
        let probe: ObjectIdx = match &q3.probe {
            Some(id) => u
                .object_index(id)
                .ok_or_else(|| BenchError::UnknownProbe(id.clone()))?,
            None => sample_objects(u, 1, derive_seed(seed, &[3, 1]))?[0],
        };
        let profiles = discriminability_across_spaces(u, &groups, probe, q3.insert_probe)?;
        out.tables.push((
            "q3".into(),
            across_spaces_table(u, &groups, &profiles, q3.insert_probe),
        ));
        out.charts.push(("q3".into(), q3_chart(u, &profiles)));
        out.q3 = Some(profiles);
        out.meta.experiments.push("q3".into());
    }

    if let Some(q4) = &config.q4 {
        let report = titf_vs_random(&universe, q4, derive_seed(seed, &[4]))?;
        out.tables.push(("q4".into(), report.summary_table()));
        out.tables
            .push(("q4_objects".into(), report.objects_table(u)));
        out.tables.push(("q4_timing".into(), report.timing_table()));
        out.charts.extend(q4_charts(&report));
        out.meta.q4 = Some(EfficiencyMeta {
            aggregate_reduction: report.aggregate_reduction(),
            pooled_reduction: report.pooled_reduction(),
            aggregate_time_reduction: report.aggregate_time_reduction(),
        });
        out.q4 = Some(report);
        out.meta.experiments.push("q4".into());
    }

    for (name, table) in &out.tables {
        table.validate().map_err(|source| BenchError::Table {
            name: name.clone(),
            source,
        })?;
    }
    if !config.charts {
        out.charts.clear();
    }
    out.meta.files = out
        .tables
        .iter()
        .map(|(n, _)| format!("{n}.csv"))
        .chain(out.charts.iter().map(|(n, _)| format!("{n}.svg")))
        .chain(["meta.json".to_string()])
        .collect();
    out.meta.elapsed_seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

impl BenchOutcome {
    /// Writes every table, chart and `meta.json` into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        let io = |path: PathBuf| move |source| BenchError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        for (name, table) in &self.tables {
            let path = dir.join(format!("{name}.csv"));
            table.write_csv(&path).map_err(io(path))?;
        }
        for (name, chart) in &self.charts {
            let path = dir.join(format!("{name}.svg"));
            fs::write(&path, chart.to_svg()).map_err(io(path))?;
        }
        let path = dir.join("meta.json");
        let json = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        fs::write(&path, json + "\n").map_err(io(path))?;
        Ok(())
    }
}

fn attribute_names(u: &Universe) -> Vec<String> {
    u.schema().iter().map(|a| a.name.clone()).collect()
}

fn q1_chart(u: &Universe, rows: &[MultiplicityRow], probes: &[ObjectIdx], groups: usize) -> Chart {
    let series = probes
        .iter()
        .map(|&p| {
            let mut ys = vec![f64::NAN; groups];
            for r in rows
                .iter()
                .filter(|r| r.probe == p && r.status == MultiplicityStatus::Ok)
            {
                ys[r.group] = r.core_sets as f64;
            }
            (u.object_id(p).to_string(), ys)
        })
        .collect();
    Chart {
        kind: Kind::Line,
        title: "Core identification sets per search space".into(),
        x_label: "group".into(),
        y_label: "core sets".into(),
        categories: (0..groups).map(|g| g.to_string()).collect(),
        series,
    }
}

fn q2_charts(u: &Universe, profiles: &[ObjectProfile]) -> Vec<(String, Chart)> {
    let first: Vec<&ObjectProfile> = profiles.iter().filter(|p| p.group == 0).take(5).collect();
    let by_attribute = Chart {
        kind: Kind::Line,
        title: "Attribute discriminability of objects in one search space".into(),
        x_label: "attribute".into(),
        y_label: "bits".into(),
        categories: attribute_names(u),
        series: first
            .iter()
            .map(|p| {
                (
                    u.object_id(p.object).to_string(),
                    p.bits.iter().map(|b| b.unwrap_or(f64::NAN)).collect(),
                )
            })
            .collect(),
    };
    let sorted = Chart {
        kind: Kind::Line,
        title: "Sorted attribute discriminability".into(),
        x_label: "rank".into(),
        y_label: "bits".into(),
        categories: (1..=u.n_attributes()).map(|r| r.to_string()).collect(),
        series: first
            .iter()
            .take(2)
            .map(|p| {
                (
                    u.object_id(p.object).to_string(),
                    p.sorted().into_iter().map(|(_, b)| b).collect(),
                )
            })
            .collect(),
    };
    vec![("q2".into(), by_attribute), ("q2_profile".into(), sorted)]
}

fn q3_chart(u: &Universe, profiles: &[ObjectProfile]) -> Chart {
    Chart {
        kind: Kind::Line,
        title: "Attribute discriminability of one object across search spaces".into(),
        x_label: "attribute".into(),
        y_label: "bits".into(),
        categories: attribute_names(u),
        series: profiles
            .iter()
            .map(|p| {
                (
                    format!("group {}", p.group),
                    p.bits.iter().map(|b| b.unwrap_or(f64::NAN)).collect(),
                )
            })
            .collect(),
    }
}

fn q4_charts(report: &EfficiencyReport) -> Vec<(String, Chart)> {
    let categories: Vec<String> = report
        .summary
        .iter()
        .map(|s| format!("{:.0}%", 100.0 * s.rate))
        .collect();
    let acquisitions = Chart {
        kind: Kind::Bars,
        title: "Mean acquisitions to trace an identity".into(),
        x_label: "missing rate".into(),
        y_label: "acquisitions".into(),
        categories: categories.clone(),
        series: vec![
            (
                "TITF".into(),
                report
                    .summary
                    .iter()
                    .map(|s| s.titf_mean_acquisitions)
                    .collect(),
            ),
            (
                "random".into(),
                report
                    .summary
                    .iter()
                    .map(|s| s.random_mean_acquisitions)
                    .collect(),
            ),
        ],
    };
    let timing = Chart {
        kind: Kind::Bars,
        title: "Mean time to trace an identity".into(),
        x_label: "missing rate".into(),
        y_label: "milliseconds".into(),
        categories,
        series: vec![
            (
                "TITF".into(),
                report
                    .summary
                    .iter()
                    .map(|s| 1e3 * s.titf_mean_seconds)
                    .collect(),
            ),
            (
                "random".into(),
                report
                    .summary
                    .iter()
                    .map(|s| 1e3 * s.random_mean_seconds)
                    .collect(),
            ),
        ],
    };
    vec![("q4".into(), acquisitions), ("q4_timing".into(), timing)]
}
