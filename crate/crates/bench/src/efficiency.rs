//! Greedy tracing against the random acquisition order under missing data.

use std::sync::Arc;

use idtrace_core::{
    run_random_baseline, run_titf, ObjectIdx, ObservationSet, Status, TraceError, TraceOptions,
    TracePolicy, Universe,
};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{derive_seed, sample_objects, ExperimentError};
use crate::table::{fmt_f64, Table};

#[derive(Debug, Error)]
pub enum EfficiencyError {
    #[error("missing rate {0} is outside [0, 1)")]
    BadRate(f64),
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error(transparent)]
    Sample(#[from] ExperimentError),
    #[error("tracing object {object} failed: {source}")]
    Trace {
        object: ObjectIdx,
        source: TraceError,
    },
}

/// How the hidden attributes of a traced object are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingProtocol {
    /// Each attribute is hidden independently with probability S.
    #[default]
    Bernoulli,
    /// Exactly `ceil(S * M)` attributes are hidden, chosen uniformly.
    FixedCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfficiencyConfig {
    pub missing_rates: Vec<f64>,
    pub objects: usize,
    pub baseline_repetitions: usize,
    pub protocol: MissingProtocol,
    /// Keep acquiring after every remaining attribute carries zero bits.
    pub literal: bool,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        EfficiencyConfig {
            missing_rates: vec![0.2, 0.4, 0.6, 0.8],
            objects: 100,
            baseline_repetitions: 20,
            protocol: MissingProtocol::Bernoulli,
            literal: false,
        }
    }
}

impl EfficiencyConfig {
    pub fn validate(&self) -> Result<(), EfficiencyError> {
        if let Some(&s) = self.missing_rates.iter().find(|s| !(0.0..1.0).contains(*s)) {
            return Err(EfficiencyError::BadRate(s));
        }
        if self.objects == 0 {
            return Err(EfficiencyError::Zero("objects"));
        }
        if self.baseline_repetitions == 0 {
            return Err(EfficiencyError::Zero("baseline_repetitions"));
        }
        Ok(())
    }

    fn options(&self) -> TraceOptions {
        TraceOptions {
            policy: TracePolicy {
                stop_on_zero_information: !self.literal,
            },
            ..TraceOptions::default()
        }
    }
}

/// One traced object at one missing rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRun {
    pub rate: f64,
    pub object: ObjectIdx,
    /// Attributes left visible before tracing.
    pub known: usize,
    pub titf_acquisitions: usize,
    pub titf_status: Status,
    pub titf_seconds: f64,
    pub random_mean_acquisitions: f64,
    pub random_min_acquisitions: usize,
    pub random_max_acquisitions: usize,
    pub random_mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub rate: f64,
    pub objects: usize,
    pub mean_known: f64,
    pub titf_mean_acquisitions: f64,
    pub random_mean_acquisitions: f64,
    /// `(random - titf) / random` over mean acquisitions.
    pub reduction: f64,
    pub titf_identified: usize,
    pub titf_mean_seconds: f64,
    pub random_mean_seconds: f64,
    /// `(random - titf) / random` over mean wall time.
    pub time_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub runs: Vec<ObjectRun>,
    pub summary: Vec<RateSummary>,
}

fn reduction(random: f64, titf: f64) -> f64 {
    if random > 0.0 {
        (random - titf) / random
    } else {
        0.0
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl EfficiencyReport {
    /// Mean of the per-rate acquisition reductions.
    pub fn aggregate_reduction(&self) -> f64 {
        mean(self.summary.iter().map(|s| s.reduction))
    }

    /// Reduction of total acquisitions pooled over every rate and object.
    pub fn pooled_reduction(&self) -> f64 {
        let titf: f64 = self.runs.iter().map(|r| r.titf_acquisitions as f64).sum();
        let random: f64 = self.runs.iter().map(|r| r.random_mean_acquisitions).sum();
        reduction(random, titf)
    }

    /// Mean of the per-rate wall-time reductions.
    pub fn aggregate_time_reduction(&self) -> f64 {
        mean(self.summary.iter().map(|s| s.time_reduction))
    }

    /// Per-rate acquisition means and reductions. Contains no timings, so it
    /// is identical across reruns.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new([
            "missing_rate",
            "objects",
            "mean_known",
            "titf_mean_acquisitions",
            "random_mean_acquisitions",
            "reduction_pct",
            "titf_identified",
        ]);
        for s in &self.summary {
            t.push(vec![
                fmt_f64(s.rate),
                s.objects.to_string(),
                fmt_f64(s.mean_known),
                fmt_f64(s.titf_mean_acquisitions),
                fmt_f64(s.random_mean_acquisitions),
                fmt_f64(100.0 * s.reduction),
                s.titf_identified.to_string(),
            ]);
        }
        t
    }

    pub fn objects_table(&self, universe: &Universe) -> Table {
        let mut t = Table::new([
            "missing_rate",
            "object_id",
            "known",
            "titf_acquisitions",
            "titf_status",
            "random_mean_acquisitions",
            "random_min_acquisitions",
            "random_max_acquisitions",
        ]);
        for r in &self.runs {
            t.push(vec![
                fmt_f64(r.rate),
                universe.object_id(r.object).to_string(),
                r.known.to_string(),
                r.titf_acquisitions.to_string(),
                r.titf_status.to_string(),
                fmt_f64(r.random_mean_acquisitions),
                r.random_min_acquisitions.to_string(),
                r.random_max_acquisitions.to_string(),
            ]);
        }
        t
    }

    /// Mean wall time per strategy and rate, in milliseconds.
    pub fn timing_table(&self) -> Table {
        let mut t = Table::new([
            "missing_rate",
            "titf_mean_ms",
            "random_mean_ms",
            "time_reduction_pct",
        ]);
        for s in &self.summary {
            t.push(vec![
                fmt_f64(s.rate),
                fmt_f64(1e3 * s.titf_mean_seconds),
                fmt_f64(1e3 * s.random_mean_seconds),
                fmt_f64(100.0 * s.time_reduction),
            ]);
        }
        t
    }
}

/// Attributes of `object` left visible at missing rate `rate`.
pub fn visible_attributes(
    universe: &Universe,
    object: ObjectIdx,
    rate: f64,
    protocol: MissingProtocol,
    seed: u64,
) -> ObservationSet {
    let m = universe.n_attributes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let visible: Vec<usize> = match protocol {
        MissingProtocol::Bernoulli => (0..m).filter(|_| !rng.gen_bool(rate)).collect(),
        MissingProtocol::FixedCount => {
            let hidden = ((rate * m as f64).ceil() as usize).min(m);
            let mut keep = index::sample(&mut rng, m, m - hidden).into_vec();
            keep.sort_unstable();
            keep
        }
    };
    let mut known = ObservationSet::new();
    for obs in visible
        .into_iter()
        .filter_map(|a| universe.observation_of(object, a))
    {
        known.insert(obs).expect("one observation per attribute");
    }
    known
}

/// For every rate, traces each sampled object once greedily and
/// `baseline_repetitions` times in random order from the same visible set.
/// The same objects are sampled for every rate.
pub fn titf_vs_random(
    universe: &Arc<Universe>,
    config: &EfficiencyConfig,
    seed: u64,
) -> Result<EfficiencyReport, EfficiencyError> {
    config.validate()?;
    let objects = sample_objects(universe, config.objects, derive_seed(seed, &[0]))?;
    let options = config.options();

    let cells: Vec<(usize, ObjectIdx)> = (0..config.missing_rates.len())
        .flat_map(|r| objects.iter().map(move |&o| (r, o)))
        .collect();
    let mut runs = cells
        .par_iter()
        .map(|&(r, object)| {
            let rate = config.missing_rates[r];
            let known = visible_attributes(
                universe,
                object,
                rate,
                config.protocol,
                derive_seed(seed, &[1, r as u64, object as u64]),
            );
            let fail = |source| EfficiencyError::Trace { object, source };
            let titf = run_titf(universe, object, known.clone(), &options).map_err(fail)?;
            let mut acquisitions = Vec::with_capacity(config.baseline_repetitions);
            let mut seconds = 0.0;
            for rep in 0..config.baseline_repetitions {
                let rep_seed = derive_seed(seed, &[2, r as u64, object as u64, rep as u64]);
                let random =
                    run_random_baseline(universe, object, known.clone(), rep_seed, &options)
                        .map_err(fail)?;
                acquisitions.push(random.acquisitions);
                seconds += random.elapsed.as_secs_f64();
            }
            let reps = config.baseline_repetitions as f64;
            Ok((
                r,
                ObjectRun {
                    rate,
                    object,
                    known: known.len(),
                    titf_acquisitions: titf.acquisitions,
                    titf_status: titf.status,
                    titf_seconds: titf.elapsed.as_secs_f64(),
                    random_mean_acquisitions: acquisitions.iter().sum::<usize>() as f64 / reps,
                    random_min_acquisitions: *acquisitions
                        .iter()
                        .min()
                        .expect("at least one repetition"),
                    random_max_acquisitions: *acquisitions
                        .iter()
                        .max()
                        .expect("at least one repetition"),
                    random_mean_seconds: seconds / reps,
                },
            ))
        })
        .collect::<Result<Vec<_>, EfficiencyError>>()?;
    runs.sort_by_key(|(r, run)| (*r, run.object));

    let summary = (0..config.missing_rates.len())
        .map(|r| {
            let rows: Vec<&ObjectRun> = runs
                .iter()
                .filter(|(i, _)| *i == r)
                .map(|(_, run)| run)
                .collect();
            let titf = mean(rows.iter().map(|x| x.titf_acquisitions as f64));
            let random = mean(rows.iter().map(|x| x.random_mean_acquisitions));
            let titf_seconds = mean(rows.iter().map(|x| x.titf_seconds));
            let random_seconds = mean(rows.iter().map(|x| x.random_mean_seconds));
            RateSummary {
                rate: config.missing_rates[r],
                objects: rows.len(),
                mean_known: mean(rows.iter().map(|x| x.known as f64)),
                titf_mean_acquisitions: titf,
                random_mean_acquisitions: random,
                reduction: reduction(random, titf),
                titf_identified: rows
                    .iter()
                    .filter(|x| x.titf_status == Status::Identified)
                    .count(),
                titf_mean_seconds: titf_seconds,
                random_mean_seconds: random_seconds,
                time_reduction: reduction(random_seconds, titf_seconds),
            }
        })
        .collect();

    Ok(EfficiencyReport {
        runs: runs.into_iter().map(|(_, run)| run).collect(),
        summary,
    })
}
