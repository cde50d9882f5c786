//! Graph-based approximate nearest neighbor search with labeled edges.
//!
//! One physical index, built once under relaxed limits, carries a pruning
//! rate label per edge; filtering edges by label at query time emulates any
//! stricter construction configuration, so construction-level knobs become
//! runtime knobs. Traversal runs on truncated scalar-quantized codes with
//! deterministic payload access and stride prefetching, followed by a
//! selective exact-distance re-rank. A three-tier tuner covers environment
//! parameters (grid search on throughput), query parameters (a decision
//! tree that shrinks the pool for easy queries mid-search), and index
//! parameters (a Pareto sweep over the labeled graph with zero rebuilds).
//!
//! The `bench` module and the companion CLI provide fvecs/ivecs dataset
//! I/O, brute-force ground truth, and recall/QPS reporting.

pub mod bench;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod quant;
pub mod search;
pub mod tune;

pub use dataset::{Dataset, Metric};
pub use distance::{decomposed_distance, exact_distance, precompute_base_norms, PreparedQuery};
pub use error::{Error, Result};
pub use eval::{brute_force_groundtruth, compute_recall};
pub use graph::{
    build_index, build_index_traced, build_index_with_metric, build_invocations, load_index,
    prune_based_labeling, save_index, BuildParams, GraphIndex, LabeledNeighbor,
};
pub use io::{read_fvecs, read_ivecs, write_fvecs, write_ivecs};
pub use quant::{
    code_store_from_bytes, code_store_to_bytes, load_code_store, save_code_store, train_quantizer,
    CodeStore, LowPrecQuery, QuantizerModel,
};
pub use search::{
    build_prs, greedy_search, selective_rerank, CandidatePool, CountingStore, EnvParams,
    FullPrecisionStore, PrsStore, QuantizedStore, SearchParams, SearchResult, SearchStats,
    SearchStore,
};
pub use tune::{
    adaptive_search, extract_features, select_ilp, sweep_ilp, train_qlp_model, tune_elp,
    Constraint, DecisionModel, ElpGrid, IlpPoint, ParetoFrontier, QueryFeatures, SweepConfig,
    SweepOutcome,
};
