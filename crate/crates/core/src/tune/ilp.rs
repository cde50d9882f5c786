//! Index-parameter sweep and Pareto selection.
//!
//! Degree limit and pruning rate are evaluated by filtered search on the
//! one physical labeled index (never rebuilding), producing a
//! (recall, throughput) profile per configuration. Non-dominated points
//! form the frontier; selection picks the highest-throughput point that
//! satisfies the caller's constraint.

use std::time::Instant;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::compute_recall;
use crate::graph::GraphIndex;
use crate::search::{greedy_search, EnvParams, SearchParams, SearchStore};

/// One evaluated configuration: search-time degree limit, pruning rate, and
/// the pool size it was measured at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IlpConfig {
    pub degree_limit: usize,
    pub pruning_rate: f32,
    pub ef_search: usize,
}

impl IlpConfig {
    fn sort_key(&self) -> (usize, f32, usize) {
        (self.degree_limit, self.pruning_rate, self.ef_search)
    }
}

/// A measured (configuration, recall, throughput) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IlpPoint {
    pub config: IlpConfig,
    pub recall: f64,
    pub qps: f64,
}

impl IlpPoint {
    /// True when `self` is at least as good as `other` on both objectives
    /// and strictly better on one.
    pub fn dominates(&self, other: &IlpPoint) -> bool {
        self.recall >= other.recall
            && self.qps >= other.qps
            && (self.recall > other.recall || self.qps > other.qps)
    }
}

/// Non-dominated (config, recall, qps) triples.
#[derive(Debug, Clone, Serialize)]
pub struct ParetoFrontier {
    points: Vec<IlpPoint>,
}

impl ParetoFrontier {
    /// Keeps only non-dominated points, sorted by descending recall.
    pub fn from_points(evaluated: &[IlpPoint]) -> Self {
        let mut points: Vec<IlpPoint> = evaluated
            .iter()
            .filter(|p| !evaluated.iter().any(|q| q.dominates(p)))
            .copied()
            .collect();
        points.sort_by(|a, b| {
            b.recall
                .total_cmp(&a.recall)
                .then(b.qps.total_cmp(&a.qps))
                .then(a.config.sort_key().partial_cmp(&b.config.sort_key()).unwrap())
        });
        ParetoFrontier { points }
    }

    pub fn points(&self) -> &[IlpPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sweep measurement settings. Every configuration is evaluated at each
/// pool size of the fixed schedule; the schedule itself is not tuned here.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub k: usize,
    pub ef_schedule: Vec<usize>,
    pub repetitions: usize,
    pub env: EnvParams,
    pub rerank_factor: f32,
}

impl SweepConfig {
    pub fn new(k: usize, ef_schedule: Vec<usize>) -> Self {
        SweepConfig {
            k,
            ef_schedule,
            repetitions: 3,
            env: EnvParams::default(),
            rerank_factor: 3.0,
        }
    }
}

/// Every evaluated point plus the frontier over them.
#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub evaluated: Vec<IlpPoint>,
    pub frontier: ParetoFrontier,
}

/// Evaluates every (degree limit, pruning rate) grid point on the same
/// physical index via label filtering. Recall comes from an untimed pass;
/// throughput is queries per second over the median of timed repetitions.
#[allow(clippy::too_many_arguments)]
pub fn sweep_ilp(
    index: &GraphIndex,
    store: &impl SearchStore,
    dataset: &Dataset,
    queries: &Dataset,
    truth: &[Vec<u32>],
    degree_limits: &[usize],
    pruning_rates: &[f32],
    cfg: &SweepConfig,
) -> Result<SweepOutcome> {
    if queries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if truth.len() != queries.len() {
        return Err(Error::InvalidParameter(format!(
            "{} queries but {} ground-truth lists",
            queries.len(),
            truth.len()
        )));
    }
    if degree_limits.is_empty() || pruning_rates.is_empty() || cfg.ef_schedule.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    for &rate in pruning_rates {
        if !(index.min_rate()..=index.max_rate()).contains(&rate) {
            return Err(Error::InvalidParameter(format!(
                "pruning rate {rate} outside trained range [{}, {}]",
                index.min_rate(),
                index.max_rate()
            )));
        }
    }

    let mut evaluated = Vec::new();
    for &degree_limit in degree_limits {
        for &rate in pruning_rates {
            for &ef in &cfg.ef_schedule {
                let params = SearchParams {
                    k: cfg.k,
                    ef_search: ef.max(cfg.k),
                    degree_limit,
                    pruning_rate: rate,
                    rerank_factor: cfg.rerank_factor,
                };
                // untimed pass doubles as warm-up and produces recall
                let mut recall_sum = 0.0;
                for (i, q) in queries.iter().enumerate() {
                    let result = greedy_search(
                        index,
                        store,
                        dataset,
                        index.entry_points(),
                        q,
                        &params,
                        &cfg.env,
                    )?;
                    recall_sum += compute_recall(&result.ids, &truth[i], cfg.k);
                }
                let recall = recall_sum / queries.len() as f64;

                let mut times = Vec::with_capacity(cfg.repetitions);
                for _ in 0..cfg.repetitions.max(1) {
                    let start = Instant::now();
                    for q in queries.iter() {
                        greedy_search(
                            index,
                            store,
                            dataset,
                            index.entry_points(),
                            q,
                            &params,
                            &cfg.env,
                        )?;
                    }
                    times.push(start.elapsed());
                }
                times.sort_unstable();
                let median = times[(times.len() - 1) / 2];
                let qps = queries.len() as f64 / median.as_secs_f64().max(1e-12);
                evaluated.push(IlpPoint {
                    config: IlpConfig {
                        degree_limit,
                        pruning_rate: rate,
                        ef_search: ef,
                    },
                    recall,
                    qps,
                });
            }
        }
    }
    let frontier = ParetoFrontier::from_points(&evaluated);
    Ok(SweepOutcome {
        evaluated,
        frontier,
    })
}

/// Selection constraint: a recall floor or a mean-latency ceiling.
#[derive(Debug, Clone, Copy)]
pub enum Constraint {
    /// Keep points with recall ≥ the threshold (inclusive); maximize qps.
    MinRecall(f64),
    /// Keep points with mean per-query latency ≤ the bound; maximize recall.
    MaxLatencySecs(f64),
}

/// Picks from the frontier under the constraint. Deterministic: qps ties
/// break to higher recall, then the lexicographically smaller configuration.
pub fn select_ilp(frontier: &ParetoFrontier, constraint: Constraint) -> Result<IlpPoint> {
    if frontier.is_empty() {
        return Err(Error::InvalidParameter("empty frontier".into()));
    }
    let best_recall = frontier
        .points()
        .iter()
        .map(|p| p.recall)
        .fold(f64::NEG_INFINITY, f64::max);
    let candidates: Vec<&IlpPoint> = match constraint {
        Constraint::MinRecall(threshold) => frontier
            .points()
            .iter()
            .filter(|p| p.recall >= threshold)
            .collect(),
        Constraint::MaxLatencySecs(bound) => frontier
            .points()
            .iter()
            .filter(|p| 1.0 / p.qps <= bound)
            .collect(),
    };
    if candidates.is_empty() {
        return Err(Error::NoFeasibleConfig { best_recall });
    }
    let mut best = candidates[0];
    for p in &candidates[1..] {
        let better = match constraint {
            Constraint::MinRecall(_) => {
                (p.qps, p.recall) > (best.qps, best.recall)
                    || ((p.qps, p.recall) == (best.qps, best.recall)
                        && p.config.sort_key() < best.config.sort_key())
            }
            Constraint::MaxLatencySecs(_) => {
                (p.recall, p.qps) > (best.recall, best.qps)
                    || ((p.recall, p.qps) == (best.recall, best.qps)
                        && p.config.sort_key() < best.config.sort_key())
            }
        };
        if better {
            best = p;
        }
    }
    Ok(*best)
}
