//! Identity tracing over categorical population tables.
//!
//! The crate quantifies how uncertain the identity of a partially observed
//! object is (identity entropy, in bits), finds minimal attribute sets that
//! single an object out, and recommends which attribute to acquire next so the
//! candidate search space shrinks fastest.
//!
//! ```
//! use std::sync::Arc;
//! use idtrace_core::{run_titf, ObservationSet, TraceOptions, Universe};
//!
//! let csv = "object_id,X,Y\na,0,0\nb,0,1\nc,1,0\nd,1,1\n";
//! let universe = Arc::new(Universe::read_csv(csv.as_bytes()).unwrap());
//! let result = run_titf(&universe, 2, ObservationSet::new(), &TraceOptions::default()).unwrap();
//! assert_eq!(result.acquisitions, 2);
//! ```

pub mod coreset;
pub mod entropy;
pub mod tracer;
pub mod universe;

pub use coreset::{
    check_core_set, enumerate_core_sets, greedy_core_set, is_core_identification_set,
    is_identification_set, CoreSetError, CoreSetReport, Minimality,
};
pub use entropy::{
    attribute_discriminability, avg_conditional_discriminability, category_entropy,
    conditional_discriminability, conditional_identity_entropy, identity_entropy,
    set_discriminability, Bits, EntropyError, ObservationSet,
};
pub use tracer::{
    rank_attributes, run_random_baseline, run_titf, AcquisitionCost, RankedAttribute,
    Recommendation, Session, Status, Strategy, TargetFound, TraceError, TraceOptions, TracePolicy,
    TraceResult, WhatIf,
};
pub use universe::{
    AttrId, Attribute, AttributeSchema, CandidateSet, ObjectIdx, Observation, Universe,
    UniverseError, ValueCounts, MISSING,
};
