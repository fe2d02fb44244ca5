//! The inverse-limit engine: staged mass-weighted structures over a tree of
//! addresses.
//!
//! A run builds stages `X_n ⊆ ℕ^{2n}` of tree addresses.  Each stage `n ≥ 2`
//! applies four substages to the previous boundary: `n.0` injects a fresh
//! mass root, `n.1` adds a witness root for the scheduled one-point extension
//! demand, `n.2` duplicates every element `Λ_n` times, and `n.3` expands the
//! language — either appending a single child per element (case (a)) or
//! splitting every element into two children under an enlarged language
//! (case (b), for classes that declare a splitting order).
//!
//! Stages are stored as scalar records plus a replayable generation log; the
//! boundary sets themselves are astronomically large and are never
//! enumerated.  All masses are exact rationals, every atomic fact about a
//! tuple of addresses is answered lazily by [`address_type`], small stages
//! can be materialized explicitly as an independent oracle, and the
//! truncated invariant measure is sampled by walking the mass tree.

mod engine;
mod materialize;
mod oracle;
mod reports;
mod sample;
mod verify;

pub use engine::{
    lambda_min, LimitEngine, RootInfo, RootKind, SplitKind, StageRecord, WitnessRecord,
};
pub use materialize::{materialize_stage, MaterializedStage, DEFAULT_STAGE_CAP};
pub use oracle::{address_type, validate_address};
pub use reports::{as_model_report, eta_report, eta_target_default, exchangeability_report};
pub use sample::{sample_invariant, SampledStructure};
pub use verify::{extension_property_report, verify_suite, verify_suite_with_fault};
