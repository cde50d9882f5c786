//! Three-tier automatic parameter tuning.
//!
//! Environment parameters (prefetch stride/depth) only move memory traffic
//! in time and cannot change results, so they are grid-searched on
//! throughput alone. Query parameters are tuned per query by a small
//! decision tree that inspects the pool mid-search and shrinks it for easy
//! queries. Index parameters never require a rebuild: the labeled graph
//! answers every (degree limit, pruning rate) combination, and a sweep over
//! it yields a Pareto frontier to select from.

mod elp;
mod ilp;
mod qlp;

pub use elp::{tune_elp, tune_elp_with_measure, ElpGrid};
pub use ilp::{
    select_ilp, sweep_ilp, Constraint, IlpConfig, IlpPoint, ParetoFrontier, SweepConfig,
    SweepOutcome,
};
pub use qlp::{
    adaptive_search, extract_features, train_qlp_model, DecisionModel, ModelMeta, PoolDecision,
    QlpTrainConfig, QueryClassifier, QueryFeatures,
};
