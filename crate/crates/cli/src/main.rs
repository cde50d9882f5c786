//! Benchmark and tuning CLI.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vicinity::bench::{generate_dataset, BenchConfig, GenMode};
use vicinity::quant::CodeStore;
use vicinity::tune::QlpTrainConfig;
use vicinity::{
    brute_force_groundtruth, build_index_with_metric, build_prs, compute_recall, greedy_search,
    load_index,
    save_index, select_ilp, sweep_ilp, train_qlp_model, train_quantizer, tune_elp, BuildParams,
    Constraint, Dataset, ElpGrid, EnvParams, FullPrecisionStore, GraphIndex, Metric, SearchParams,
    SearchStore, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "vicinity",
    about = "Graph-based approximate nearest neighbor search: build, tune, benchmark",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L2,
    Ip,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::L2 => Metric::SquaredEuclidean,
            MetricArg::Ip => Metric::InnerProduct,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Uniform,
    Clustered,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset in fvecs format.
    Gen {
        /// Output fvecs path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Uniform)]
        mode: ModeArg,
        #[arg(long, default_value_t = 16)]
        clusters: usize,
        #[arg(long, default_value_t = 0.15)]
        sigma: f32,
    },
    /// Compute exact ground truth by brute force and write it as ivecs.
    Gt {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::L2)]
        metric: MetricArg,
    },
    /// Build the labeled index and save it.
    Build {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        max_degree: usize,
        #[arg(long, default_value_t = 200)]
        ef_construction: usize,
        /// Comma-separated ascending pruning rates.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0])]
        pruning_rates: Vec<f32>,
        #[arg(long, value_enum, default_value_t = MetricArg::L2)]
        metric: MetricArg,
    },
    /// Train the quantizer and encode the dataset into a code file.
    Encode {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        bits: u8,
        #[arg(long, default_value_t = 0.995)]
        quantile: f32,
    },
    /// Run queries against a built index and report recall and throughput.
    Search(SearchArgs),
    /// Sweep a search grid from a JSON config and emit CSV/JSON reports.
    Bench {
        /// JSON configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Flag overrides (flags win over the file).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        redundancy_ratio: Option<f32>,
        #[arg(long)]
        rerank_factor: Option<f32>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid-search prefetch stride and depth for peak throughput.
    TuneElp {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        codes: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 1, 2, 4, 8])]
        strides: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4])]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value_t = 100)]
        ef: usize,
    },
    /// Sweep degree limit and pruning rate on one index, print the Pareto
    /// frontier, and select under a recall constraint.
    TuneIlp {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![8usize, 16, 24, 32])]
        degree_limits: Vec<usize>,
        /// Pruning rates to emulate; defaults to the index's trained set.
        #[arg(long, value_delimiter = ',')]
        pruning_rates: Option<Vec<f32>>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![100usize])]
        ef: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        min_recall: Option<f64>,
    },
    /// Train the query-difficulty decision model.
    TrainQlp {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.95)]
        target_recall: f64,
        #[arg(long, default_value_t = 50)]
        ef_low: usize,
        #[arg(long, default_value_t = 300)]
        ef_high: usize,
        #[arg(long, default_value_t = 10)]
        checkpoint_hop: usize,
        /// Write the trained model as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Code file; searches run on quantized codes when given.
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Ground-truth ivecs for recall reporting.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    ef: usize,
    #[arg(long)]
    degree_limit: Option<usize>,
    #[arg(long)]
    pruning_rate: Option<f32>,
    #[arg(long, default_value_t = 3.0)]
    rerank_factor: f32,
    #[arg(long, default_value_t = 0.0)]
    redundancy_ratio: f32,
    #[arg(long, default_value_t = 0)]
    stride: usize,
    #[arg(long, default_value_t = 1)]
    depth: usize,
}

fn read_required_queries(path: &PathBuf) -> anyhow::Result<Dataset> {
    let queries = vicinity::read_fvecs(path).with_context(|| format!("reading {path:?}"))?;
    if queries.is_empty() {
        bail!("query file {path:?} is empty");
    }
    Ok(queries)
}

fn ground_truth(
    gt: &Option<PathBuf>,
    dataset: &Dataset,
    queries: &Dataset,
    k: usize,
    metric: Metric,
) -> anyhow::Result<Vec<Vec<u32>>> {
    match gt {
        Some(path) => {
            let lists = vicinity::read_ivecs(path).with_context(|| format!("reading {path:?}"))?;
            if lists.len() < queries.len() {
                bail!(
                    "{} ground-truth records for {} queries",
                    lists.len(),
                    queries.len()
                );
            }
            Ok(lists)
        }
        None => Ok(brute_force_groundtruth(dataset, queries, k, metric)?.0),
    }
}

fn run_search(args: SearchArgs) -> anyhow::Result<()> {
    let index = load_index(&args.index).context("loading index")?;
    let dataset = vicinity::read_fvecs(&args.base).context("reading base vectors")?;
    let queries = read_required_queries(&args.queries)?;
    let truth = match &args.gt {
        Some(_) => Some(ground_truth(
            &args.gt,
            &dataset,
            &queries,
            args.k,
            index.metric(),
        )?),
        None => None,
    };
    let params = SearchParams {
        k: args.k,
        ef_search: args.ef.max(args.k),
        degree_limit: args.degree_limit.unwrap_or(index.max_degree()),
        pruning_rate: args.pruning_rate.unwrap_or(index.max_rate()),
        rerank_factor: args.rerank_factor,
    };
    let env = EnvParams {
        prefetch_stride: args.stride,
        prefetch_depth: args.depth,
    };

    let quant_state = match &args.codes {
        Some(path) => Some(vicinity::load_code_store(path).context("loading codes")?),
        None => None,
    };
    let (results, elapsed) = match &quant_state {
        Some((model, codes)) => {
            let store = build_prs(&index, model, codes, args.redundancy_ratio)?;
            timed_queries(&index, &store, &dataset, &queries, &params, &env)?
        }
        None => {
            let store = FullPrecisionStore::new(&dataset)?;
            timed_queries(&index, &store, &dataset, &queries, &params, &env)?
        }
    };

    let nq = queries.len() as f64;
    let qps = nq / elapsed.max(1e-12);
    let mean_hops =
        results.iter().map(|r| r.stats.hops).sum::<usize>() as f64 / nq;
    let mean_lp =
        results.iter().map(|r| r.stats.low_prec_evals).sum::<usize>() as f64 / nq;
    let mean_hp =
        results.iter().map(|r| r.stats.high_prec_evals).sum::<usize>() as f64 / nq;
    println!("queries: {}", queries.len());
    println!("qps: {qps:.1}");
    println!("mean hops: {mean_hops:.1}");
    println!("mean low-precision evals: {mean_lp:.1}");
    println!("mean high-precision evals: {mean_hp:.1}");
    if let Some(truth) = truth {
        let recall = results
            .iter()
            .enumerate()
            .map(|(i, r)| compute_recall(&r.ids, &truth[i], args.k))
            .sum::<f64>()
            / nq;
        println!("recall@{}: {recall:.4}", args.k);
    }
    Ok(())
}

fn timed_queries(
    index: &GraphIndex,
    store: &impl SearchStore,
    dataset: &Dataset,
    queries: &Dataset,
    params: &SearchParams,
    env: &EnvParams,
) -> anyhow::Result<(Vec<vicinity::SearchResult>, f64)> {
    // warm-up pass, then one timed pass
    for q in queries.iter() {
        greedy_search(index, store, dataset, index.entry_points(), q, params, env)?;
    }
    let start = std::time::Instant::now();
    let mut results = Vec::with_capacity(queries.len());
    for q in queries.iter() {
        results.push(greedy_search(
            index,
            store,
            dataset,
            index.entry_points(),
            q,
            params,
            env,
        )?);
    }
    Ok((results, start.elapsed().as_secs_f64()))
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Gen {
            out,
            n,
            dim,
            seed,
            mode,
            clusters,
            sigma,
        } => {
            let mode = match mode {
                ModeArg::Uniform => GenMode::Uniform,
                ModeArg::Clustered => GenMode::Clustered { clusters, sigma },
            };
            let dataset = generate_dataset(n, dim, seed, mode);
            vicinity::write_fvecs(&dataset, &out)?;
            println!("wrote {} vectors of dim {} to {}", n, dim, out.display());
        }
        Command::Gt {
            base,
            queries,
            out,
            k,
            metric,
        } => {
            let dataset = vicinity::read_fvecs(&base).context("reading base vectors")?;
            let queries = read_required_queries(&queries)?;
            let (ids, _) = brute_force_groundtruth(&dataset, &queries, k, metric.into())?;
            vicinity::write_ivecs(&ids, &out)?;
            println!("wrote ground truth for {} queries to {}", ids.len(), out.display());
        }
        Command::Build {
            base,
            out,
            max_degree,
            ef_construction,
            pruning_rates,
            metric,
        } => {
            let dataset = vicinity::read_fvecs(&base).context("reading base vectors")?;
            let params = BuildParams::new(max_degree, ef_construction, pruning_rates);
            let start = std::time::Instant::now();
            let index = build_index_with_metric(&dataset, metric.into(), &params)?;
            save_index(&index, &out)?;
            println!(
                "built index over {} vectors in {:.2?} ({} edges), saved to {}",
                index.len(),
                start.elapsed(),
                index.edge_count(),
                out.display()
            );
        }
        Command::Encode {
            base,
            out,
            bits,
            quantile,
        } => {
            let dataset = vicinity::read_fvecs(&base).context("reading base vectors")?;
            let model = train_quantizer(&dataset, bits, quantile)?;
            let codes = CodeStore::encode_dataset(&model, &dataset)?;
            vicinity::save_code_store(&model, &codes, &out)?;
            println!(
                "encoded {} vectors at {} bits ({} bytes per code) to {}",
                codes.len(),
                bits,
                codes.code_len_bytes(),
                out.display()
            );
        }
        Command::Search(args) => run_search(args)?,
        Command::Bench {
            config,
            k,
            redundancy_ratio,
            rerank_factor,
            output,
        } => {
            let mut cfg = BenchConfig::from_file(&config).context("reading bench config")?;
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(r) = redundancy_ratio {
                cfg.redundancy_ratio = r;
            }
            if let Some(r) = rerank_factor {
                cfg.rerank_factor = r;
            }
            if let Some(o) = output {
                cfg.output = Some(o);
            }
            let report = vicinity::bench::run_bench(&cfg)?;
            print!("{}", report.to_csv());
            if let Some(base) = &cfg.output {
                eprintln!(
                    "wrote {} and {}",
                    base.with_extension("csv").display(),
                    base.with_extension("json").display()
                );
            }
        }
        Command::TuneElp {
            index,
            base,
            codes,
            strides,
            depths,
            samples,
            repetitions,
            ef,
        } => {
            let index = load_index(&index).context("loading index")?;
            let dataset = vicinity::read_fvecs(&base).context("reading base vectors")?;
            let params = SearchParams::new(
                10.min(index.len()),
                ef,
                index.max_degree(),
                index.max_rate(),
            );
            let grid = ElpGrid::from_base_vectors(&dataset, samples, strides, depths, repetitions)?;
            let quant_state = match &codes {
                Some(path) => Some(vicinity::load_code_store(path)?),
                None => None,
            };
            let chosen = match &quant_state {
                Some((model, codes)) => {
                    let store = build_prs(&index, model, codes, 0.0)?;
                    tune_elp(&index, &store, &dataset, &params, &grid)?
                }
                None => {
                    let store = FullPrecisionStore::new(&dataset)?;
                    tune_elp(&index, &store, &dataset, &params, &grid)?
                }
            };
            println!(
                "{}",
                serde_json::json!({
                    "prefetch_stride": chosen.prefetch_stride,
                    "prefetch_depth": chosen.prefetch_depth,
                })
            );
        }
        Command::TuneIlp {
            index,
            base,
            queries,
            gt,
            degree_limits,
            pruning_rates,
            ef,
            k,
            min_recall,
        } => {
            let index = load_index(&index).context("loading index")?;
            let dataset = vicinity::read_fvecs(&base).context("reading base vectors")?;
            let queries = read_required_queries(&queries)?;
            let truth = ground_truth(&gt, &dataset, &queries, k, index.metric())?;
            let rates = pruning_rates.unwrap_or_else(|| index.pruning_rates().to_vec());
            let store = FullPrecisionStore::new(&dataset)?;
            let outcome = sweep_ilp(
                &index,
                &store,
                &dataset,
                &queries,
                &truth,
                &degree_limits,
                &rates,
                &SweepConfig::new(k, ef),
            )?;
            let selection = min_recall
                .map(|threshold| select_ilp(&outcome.frontier, Constraint::MinRecall(threshold)));
            let report = serde_json::json!({
                "evaluated": outcome.evaluated,
                "frontier": outcome.frontier.points(),
                "selection": match selection {
                    Some(Ok(point)) => serde_json::to_value(point).unwrap(),
                    Some(Err(e)) => serde_json::json!({ "error": e.to_string() }),
                    None => serde_json::Value::Null,
                },
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::TrainQlp {
            index,
            base,
            queries,
            gt,
            k,
            target_recall,
            ef_low,
            ef_high,
            checkpoint_hop,
            out,
        } => {
            let index = load_index(&index).context("loading index")?;
            let dataset = vicinity::read_fvecs(&base).context("reading base vectors")?;
            let queries = read_required_queries(&queries)?;
            let truth = ground_truth(&gt, &dataset, &queries, k, index.metric())?;
            let store = FullPrecisionStore::new(&dataset)?;
            let cfg = QlpTrainConfig {
                checkpoint_hop,
                ..QlpTrainConfig::new(k, target_recall, ef_low, ef_high)
            };
            let model = train_qlp_model(&index, &store, &dataset, &queries, &truth, &cfg)?;
            eprintln!(
                "trained on {} queries: holdout accuracy {:.3}{}",
                queries.len(),
                model.meta.holdout_accuracy,
                if model.meta.degenerate {
                    " (degenerate: all labels in one class)"
                } else {
                    ""
                }
            );
            match out {
                Some(path) => {
                    std::fs::write(&path, model.to_json())?;
                    println!("wrote model to {}", path.display());
                }
                None => println!("{}", model.to_json()),
            }
        }
    }
    Ok(())
}
