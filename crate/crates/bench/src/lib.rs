//! Synthetic population tables and the experiment suite run by `idtrace bench`.
//!
//! * [`generator`] draws seeded categorical tables with a chosen cardinality
//!   profile and value skew.
//! * [`experiments`] counts core identification sets per search space and
//!   profiles attribute discriminability across objects and across spaces.
//! * [`efficiency`] compares greedy tracing with a random acquisition order
//!   while a share of each object's attributes is hidden.
//! * [`runner`] reads a JSON config, runs the selected experiments and writes
//!   CSV tables, SVG charts and `meta.json`.
//!
//! Every experiment is deterministic given its dataset and seed; timings are
//! kept out of the CSV tables that are meant to be compared across runs.

pub mod chart;
pub mod efficiency;
pub mod experiments;
pub mod generator;
pub mod runner;
pub mod table;

pub use efficiency::{
    titf_vs_random, EfficiencyConfig, EfficiencyError, EfficiencyReport, MissingProtocol,
};
pub use experiments::{
    coreset_multiplicity, derive_seed, discriminability_across_objects,
    discriminability_across_spaces, partition, sample_objects, ExperimentError, Grouping,
    MultiplicityRow, MultiplicityStatus, ObjectProfile,
};
pub use generator::{generate_universe, GenerateError, GeneratorConfig, Skew};
pub use runner::{run_bench, BenchConfig, BenchError, BenchOutcome, Dataset};
pub use table::{Table, TableError};
