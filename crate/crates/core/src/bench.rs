//! Benchmark harness: configuration, sweep driver, cost accounting, and
//! seeded synthetic datasets.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Metric};
use crate::error::{Error, Result};
use crate::eval::{brute_force_groundtruth, compute_recall};
use crate::graph::{build_index_with_metric, BuildParams, GraphIndex};
use crate::io::{read_fvecs, read_ivecs};
use crate::quant::{train_quantizer, CodeStore};
use crate::search::{
    build_prs, greedy_search, EnvParams, FullPrecisionStore, SearchParams, SearchStore,
};
use crate::tune::{tune_elp, ElpGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildSection {
    pub max_degree: usize,
    pub ef_construction: usize,
    pub pruning_rates: Vec<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchGrid {
    pub ef_search: Vec<usize>,
    pub degree_limit: Vec<usize>,
    pub pruning_rate: Vec<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantSection {
    pub bits: u8,
    pub quantile: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvGrid {
    pub strides: Vec<usize>,
    pub depths: Vec<usize>,
    #[serde(default = "default_env_samples")]
    pub samples: usize,
    #[serde(default = "default_env_reps")]
    pub repetitions: usize,
}

fn default_env_samples() -> usize {
    32
}

fn default_env_reps() -> usize {
    3
}

fn default_metric() -> Metric {
    Metric::SquaredEuclidean
}

fn default_k() -> usize {
    10
}

fn default_rerank() -> f32 {
    3.0
}

fn default_delta() -> f32 {
    0.0
}

/// Benchmark configuration, loaded from JSON with flag overrides applied by
/// the CLI on top.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dataset: PathBuf,
    pub queries: PathBuf,
    /// Ground-truth ivecs path; computed by brute force when absent.
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    pub build: BuildSection,
    pub search_grid: SearchGrid,
    #[serde(default)]
    pub quantizer: Option<QuantSection>,
    #[serde(default)]
    pub env_grid: Option<EnvGrid>,
    #[serde(default = "default_delta")]
    pub redundancy_ratio: f32,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_rerank")]
    pub rerank_factor: f32,
    /// Base path for the CSV/JSON report files (extension added).
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl BenchConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: BenchConfig =
            serde_json::from_str(json).map_err(|e| Error::format("bench config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        if self.search_grid.ef_search.is_empty()
            || self.search_grid.degree_limit.is_empty()
            || self.search_grid.pruning_rate.is_empty()
        {
            return Err(Error::InvalidParameter("empty search grid".into()));
        }
        if !(0.0..=1.0).contains(&self.redundancy_ratio) {
            return Err(Error::InvalidParameter(
                "redundancy_ratio must lie in [0, 1]".into(),
            ));
        }
        if self.rerank_factor < 1.0 {
            return Err(Error::InvalidParameter(
                "rerank_factor must be at least 1.0".into(),
            ));
        }
        BuildParams::new(
            self.build.max_degree,
            self.build.ef_construction,
            self.build.pruning_rates.clone(),
        )
        .validate()
    }
}

/// Distance-computation cost: counts of low/high-precision evaluations and
/// the measured seconds per evaluation; the total is their weighted sum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CostBreakdown {
    pub low_prec_evals: f64,
    pub high_prec_evals: f64,
    pub low_prec_secs_per_eval: f64,
    pub high_prec_secs_per_eval: f64,
    pub total_cost_secs: f64,
}

impl CostBreakdown {
    pub fn new(n_lp: f64, n_hp: f64, t_lp: f64, t_hp: f64) -> Self {
        CostBreakdown {
            low_prec_evals: n_lp,
            high_prec_evals: n_hp,
            low_prec_secs_per_eval: t_lp,
            high_prec_secs_per_eval: t_hp,
            total_cost_secs: n_lp * t_lp + n_hp * t_hp,
        }
    }
}

/// One sweep row: a configuration with its measured recall, throughput, and
/// cost counters (mean per query).
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub ef_search: usize,
    pub degree_limit: usize,
    pub pruning_rate: f32,
    pub recall_at_k: f64,
    pub qps: f64,
    pub mean_hops: f64,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecallReport {
    pub k: usize,
    pub n_base: usize,
    pub n_queries: usize,
    pub quantized: bool,
    pub redundancy_ratio: f32,
    pub env: (usize, usize),
    pub rows: Vec<ReportRow>,
}

impl RecallReport {
    /// CSV with one row per configuration. Column names follow the
    /// benchmark file contract.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("ef_s,m_s,alpha_s,recall_at_k,qps,mean_hops,n_lp,n_hp,t_lp,t_hp\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.2},{:.2},{:.2},{:.2},{:.3e},{:.3e}\n",
                r.ef_search,
                r.degree_limit,
                r.pruning_rate,
                r.recall_at_k,
                r.qps,
                r.mean_hops,
                r.cost.low_prec_evals,
                r.cost.high_prec_evals,
                r.cost.low_prec_secs_per_eval,
                r.cost.high_prec_secs_per_eval,
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Measures mean seconds per low-precision and per high-precision distance
/// evaluation with the given store and dataset.
fn measure_eval_costs(
    store: &impl SearchStore,
    dataset: &Dataset,
    metric: Metric,
) -> Result<(f64, f64)> {
    let reps = 20_000usize.min(dataset.len() * 50);
    let query = dataset.vector(0).to_vec();
    let prepared = store.prepare(&query, metric)?;
    let n = dataset.len() as u64;

    let start = Instant::now();
    let mut sink = 0.0f32;
    for i in 0..reps as u64 {
        sink += store.candidate_distance(&prepared, ((i * 2654435761) % n) as u32, None);
    }
    let t_lp = start.elapsed().as_secs_f64() / reps as f64;

    let start = Instant::now();
    for i in 0..reps as u64 {
        let id = ((i * 2654435761) % n) as usize;
        sink += crate::distance::exact_distance(&query, dataset.vector(id), metric)?;
    }
    let t_hp = start.elapsed().as_secs_f64() / reps as f64;
    std::hint::black_box(sink);
    Ok((t_lp, t_hp))
}

/// Full benchmark drive: load data, build, encode, optionally tune the
/// environment, sweep the search grid, and emit the report. Errors are
/// tagged with the stage that produced them.
pub fn run_bench(cfg: &BenchConfig) -> Result<RecallReport> {
    cfg.validate()?;
    let dataset = read_fvecs(&cfg.dataset).map_err(|e| e.in_stage("read dataset"))?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset.in_stage("read dataset"));
    }
    let queries = read_fvecs(&cfg.queries).map_err(|e| e.in_stage("read queries"))?;
    if queries.is_empty() {
        return Err(Error::EmptyDataset.in_stage("read queries"));
    }

    let truth: Vec<Vec<u32>> = match &cfg.ground_truth {
        Some(path) => read_ivecs(path).map_err(|e| e.in_stage("read ground truth"))?,
        None => {
            brute_force_groundtruth(&dataset, &queries, cfg.k, cfg.metric)
                .map_err(|e| e.in_stage("ground truth"))?
                .0
        }
    };
    if truth.len() < queries.len() {
        return Err(Error::InvalidParameter(format!(
            "{} ground-truth lists for {} queries",
            truth.len(),
            queries.len()
        ))
        .in_stage("read ground truth"));
    }

    let build_params = BuildParams::new(
        cfg.build.max_degree,
        cfg.build.ef_construction,
        cfg.build.pruning_rates.clone(),
    );
    let index = build_index_with_metric(&dataset, cfg.metric, &build_params)
        .map_err(|e| e.in_stage("build index"))?;

    // quantized path owns its model/codes; both paths continue generically
    let quant_state = match &cfg.quantizer {
        Some(q) => {
            let model = train_quantizer(&dataset, q.bits, q.quantile)
                .map_err(|e| e.in_stage("train quantizer"))?;
            let codes =
                CodeStore::encode_dataset(&model, &dataset).map_err(|e| e.in_stage("encode"))?;
            Some((model, codes))
        }
        None => None,
    };

    match &quant_state {
        Some((model, codes)) => {
            let store = build_prs(&index, model, codes, cfg.redundancy_ratio)
                .map_err(|e| e.in_stage("build redundant store"))?;
            sweep(cfg, &dataset, &queries, &truth, &index, &store, true)
        }
        None => {
            let store =
                FullPrecisionStore::new(&dataset).map_err(|e| e.in_stage("prepare store"))?;
            sweep(cfg, &dataset, &queries, &truth, &index, &store, false)
        }
    }
}

fn sweep(
    cfg: &BenchConfig,
    dataset: &Dataset,
    queries: &Dataset,
    truth: &[Vec<u32>],
    index: &GraphIndex,
    store: &impl SearchStore,
    quantized: bool,
) -> Result<RecallReport> {
    let env = match &cfg.env_grid {
        Some(grid) if grid.strides.len() * grid.depths.len() > 1 => {
            let mid_ef = cfg.search_grid.ef_search[cfg.search_grid.ef_search.len() / 2];
            let params = SearchParams {
                k: cfg.k,
                ef_search: mid_ef.max(cfg.k),
                degree_limit: index.max_degree(),
                pruning_rate: index.max_rate(),
                rerank_factor: cfg.rerank_factor,
            };
            let elp = ElpGrid::from_base_vectors(
                dataset,
                grid.samples,
                grid.strides.clone(),
                grid.depths.clone(),
                grid.repetitions,
            )?;
            tune_elp(index, store, dataset, &params, &elp)
                .map_err(|e| e.in_stage("tune environment"))?
        }
        Some(grid) => EnvParams {
            prefetch_stride: grid.strides.first().copied().unwrap_or(0),
            prefetch_depth: grid.depths.first().copied().unwrap_or(1),
        },
        None => EnvParams::default(),
    };

    let (t_lp, t_hp) =
        measure_eval_costs(store, dataset, cfg.metric).map_err(|e| e.in_stage("calibrate"))?;

    let mut rows = Vec::new();
    for &ef in &cfg.search_grid.ef_search {
        for &degree_limit in &cfg.search_grid.degree_limit {
            for &rate in &cfg.search_grid.pruning_rate {
                let params = SearchParams {
                    k: cfg.k,
                    ef_search: ef.max(cfg.k),
                    degree_limit: degree_limit.min(index.max_degree()),
                    pruning_rate: rate,
                    rerank_factor: cfg.rerank_factor,
                };
                // untimed warm-up pass collects recall and counters
                let mut recall_sum = 0.0;
                let mut hops = 0usize;
                let mut n_lp = 0usize;
                let mut n_hp = 0usize;
                for (i, q) in queries.iter().enumerate() {
                    let result = greedy_search(
                        index,
                        store,
                        dataset,
                        index.entry_points(),
                        q,
                        &params,
                        &env,
                    )
                    .map_err(|e| e.in_stage("search"))?;
                    recall_sum += compute_recall(&result.ids, &truth[i], cfg.k);
                    hops += result.stats.hops;
                    n_lp += result.stats.low_prec_evals;
                    n_hp += result.stats.high_prec_evals;
                }
                let nq = queries.len() as f64;

                let start = Instant::now();
                for q in queries.iter() {
                    greedy_search(index, store, dataset, index.entry_points(), q, &params, &env)
                        .map_err(|e| e.in_stage("search"))?;
                }
                let qps = nq / start.elapsed().as_secs_f64().max(1e-12);

                rows.push(ReportRow {
                    ef_search: ef,
                    degree_limit,
                    pruning_rate: rate,
                    recall_at_k: recall_sum / nq,
                    qps,
                    mean_hops: hops as f64 / nq,
                    cost: CostBreakdown::new(n_lp as f64 / nq, n_hp as f64 / nq, t_lp, t_hp),
                });
            }
        }
    }

    let report = RecallReport {
        k: cfg.k,
        n_base: dataset.len(),
        n_queries: queries.len(),
        quantized,
        redundancy_ratio: cfg.redundancy_ratio,
        env: (env.prefetch_stride, env.prefetch_depth),
        rows,
    };
    if let Some(base) = &cfg.output {
        let csv_path = base.with_extension("csv");
        let json_path = base.with_extension("json");
        std::fs::write(&csv_path, report.to_csv()).map_err(Error::from)?;
        std::fs::write(&json_path, report.to_json()).map_err(Error::from)?;
    }
    Ok(report)
}

/// Synthetic data layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GenMode {
    /// Components i.i.d. uniform in [−1, 1].
    Uniform,
    /// Gaussian mixture: uniform cluster centers with per-component noise
    /// of the given standard deviation. Point i belongs to cluster
    /// i % clusters.
    Clustered { clusters: usize, sigma: f32 },
}

/// Deterministic synthetic dataset; identical (n, dim, seed, mode) inputs
/// produce identical bytes.
pub fn generate_dataset(n: usize, dim: usize, seed: u64, mode: GenMode) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * dim);
    match mode {
        GenMode::Uniform => {
            for _ in 0..n * dim {
                data.push(rng.gen_range(-1.0..1.0));
            }
        }
        GenMode::Clustered { clusters, sigma } => {
            let clusters = clusters.max(1);
            let centers: Vec<Vec<f32>> = (0..clusters)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            for i in 0..n {
                for &component in &centers[i % clusters] {
                    data.push(component + sigma * gaussian(&mut rng));
                }
            }
        }
    }
    Dataset::from_flat(dim, data).expect("generated data is finite")
}

/// Standard normal sample via Box-Muller.
fn gaussian(rng: &mut StdRng) -> f32 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}
