//! `train` and `eval`: data loading, fitting, metrics and seed sweeps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lanczos_net::io::{
    parse_checkpoint, parse_graph, parse_graph_set, parse_labels, parse_matrix_csv, parse_split, write_checkpoint,
};
use lanczos_net::nn::{Model, ModelConfig, PreparedGraph};
use lanczos_net::train::{evaluate, fit, history_csv, Dataset, EpochRecord, Split, Task};
use lanczos_net::{Labels, Matrix};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::error::{read_file, write_file, CliError, CliResult};
use crate::sbm;

pub const METRICS_FILE: &str = "metrics.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";

fn metric_name(task: Task) -> &'static str {
    match task {
        Task::NodeClassification => "accuracy",
        Task::GraphRegression => "mae",
    }
}

/// Builds the dataset and split described by `data`. `seed` drives SBM generation
/// when the SBM spec has none and the Lanczos start vector of every prepared graph.
pub fn load_data(data: &DataSource, model: &ModelConfig, seed: u64) -> CliResult<(Dataset, Split)> {
    let parse = |path: &Path| -> CliResult<String> { read_file(path) };
    match data {
        DataSource::Sbm { spec } => {
            let d = sbm::generate(spec, spec.seed.unwrap_or(seed))?;
            let graph = PreparedGraph::new(&d.graph, model, seed)?;
            Ok((
                Dataset::Nodes {
                    graph,
                    labels: d.labels,
                },
                d.split,
            ))
        }
        DataSource::Files {
            graph,
            features,
            labels,
            split,
        } => {
            let g = parse_graph(&parse(graph)?).map_err(|e| CliError::core_in(graph, e))?;
            let x = parse_matrix_csv(&parse(features)?).map_err(|e| CliError::core_in(features, e))?;
            let classes = match parse_labels(&parse(labels)?).map_err(|e| CliError::core_in(labels, e))? {
                Labels::Classes(c) => c,
                Labels::Targets(_) => {
                    return Err(CliError::Usage(format!(
                        "{}: node labels must be class indices",
                        labels.display()
                    )))
                }
            };
            if classes.len() != g.num_nodes() {
                return Err(CliError::Usage(format!(
                    "{}: {} labels for {} nodes",
                    labels.display(),
                    classes.len(),
                    g.num_nodes()
                )));
            }
            let sp = parse_split(&parse(split)?).map_err(|e| CliError::core_in(split, e))?;
            let g = g.with_features(x).map_err(|e| CliError::core_in(features, e))?;
            let graph = PreparedGraph::new(&g, model, seed)?;
            Ok((Dataset::Nodes { graph, labels: classes }, sp))
        }
        DataSource::GraphSet { path, split } => {
            let records = parse_graph_set(&parse(path)?).map_err(|e| CliError::core_in(path, e))?;
            let sp = parse_split(&parse(split)?).map_err(|e| CliError::core_in(split, e))?;
            let mut graphs = Vec::with_capacity(records.len());
            let mut targets = Vec::with_capacity(records.len());
            for r in &records {
                graphs.push(PreparedGraph::new(&r.graph, model, seed)?);
                targets.push(Matrix::from_vec(1, r.target.len(), r.target.clone()));
            }
            Ok((Dataset::Graphs { graphs, targets }, sp))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub task: Task,
    pub seed: u64,
    pub metric: String,
    /// `None` when the split has no test items.
    pub test_metric: Option<f64>,
    pub test_loss: Option<f64>,
    pub best_val_metric: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub near_breakdown_epochs: usize,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub task: Task,
    pub seed: u64,
    pub metric: String,
    pub test_metric: Option<f64>,
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: TrainMetrics,
    pub history: Vec<EpochRecord>,
    pub best: Model,
}

fn test_scores(model: &Model, data: &Dataset, split: &Split) -> CliResult<(Option<f64>, Option<f64>)> {
    if split.test.is_empty() {
        return Ok((None, None));
    }
    let (loss, metric) = evaluate(model, data, &split.test)?;
    Ok((Some(metric), Some(loss)))
}

/// One training run held in memory.
pub fn train_run(cfg: &RunConfig, seed: u64) -> CliResult<TrainOutcome> {
    let start = Instant::now();
    let tc = cfg.train_config(seed)?;
    let (data, split) = load_data(&cfg.data, &cfg.model, seed)?;
    let mut model = Model::new(cfg.model.clone(), seed)?;
    let res = fit(&mut model, &data, &split, &tc)?;
    let (test_metric, test_loss) = test_scores(&res.best, &data, &split)?;
    let best_val_metric = res.history[res.best_epoch - 1].val_metric;
    let metrics = TrainMetrics {
        task: tc.task,
        seed,
        metric: metric_name(tc.task).into(),
        test_metric,
        test_loss,
        best_val_metric,
        best_epoch: res.best_epoch,
        epochs_run: res.history.len(),
        stopped_early: res.stopped_early,
        near_breakdown_epochs: res.near_breakdown_epochs,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        metrics,
        history: res.history,
        best: res.best,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("metrics serialize") + "\n"
}

/// Trains and writes the resolved config, history, checkpoint and metrics to `out`.
pub fn train_to_dir(cfg: &RunConfig, seed: u64, out: &Path) -> CliResult<TrainMetrics> {
    let resolved = cfg.resolved(seed)?;
    write_file(&out.join(RESOLVED_CONFIG_FILE), &resolved.to_json())?;
    let outcome = train_run(&resolved, seed)?;
    write_file(&out.join(HISTORY_FILE), &history_csv(&outcome.history))?;
    write_file(&out.join(CHECKPOINT_FILE), &write_checkpoint(&outcome.best))?;
    write_file(&out.join(METRICS_FILE), &to_json(&outcome.metrics))?;
    Ok(outcome.metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub metric: String,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single seed.
    pub std: f64,
}

impl SweepSummary {
    pub fn new(metric: &str, seeds: Vec<u64>, values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            metric: metric.into(),
            seeds,
            values,
            mean,
            std,
        }
    }
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Runs one isolated trial per seed, concurrently, each in `out/seed-<s>/`.
pub fn sweep(cfg: &RunConfig, seeds: &[u64], out: &Path) -> CliResult<(Vec<TrainMetrics>, SweepSummary)> {
    if seeds.is_empty() {
        return Err(CliError::Usage("--seeds needs at least one seed".into()));
    }
    let results: Vec<CliResult<TrainMetrics>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&s| scope.spawn(move || train_to_dir(cfg, s, &seed_dir(out, s))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread panicked"))
            .collect()
    });
    let metrics = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let values = metrics
        .iter()
        .map(|m| {
            m.test_metric
                .ok_or_else(|| CliError::Usage("sweep needs a non-empty test split".into()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let summary = SweepSummary::new(metric_name(cfg.data.task()), seeds.to_vec(), values);
    write_file(&out.join("sweep.json"), &to_json(&summary))?;
    Ok((metrics, summary))
}

/// Test metrics of a checkpoint on the data of `cfg`, regenerated with the checkpoint's seed.
pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> CliResult<EvalMetrics> {
    let model = parse_checkpoint(&read_file(checkpoint)?).map_err(|e| CliError::core_in(checkpoint, e))?;
    if model.config != cfg.model {
        return Err(CliError::Usage(format!(
            "{}: checkpoint model config differs from the run config",
            checkpoint.display()
        )));
    }
    let (data, split) = load_data(&cfg.data, &model.config, model.seed)?;
    let (test_metric, test_loss) = test_scores(&model, &data, &split)?;
    let task = data.task();
    Ok(EvalMetrics {
        task,
        seed: model.seed,
        metric: metric_name(task).into(),
        test_metric,
        test_loss,
    })
}

pub fn eval_json(m: &EvalMetrics) -> String {
    to_json(m)
}

pub fn train_json(m: &TrainMetrics) -> String {
    to_json(m)
}

pub fn sweep_json(s: &SweepSummary) -> String {
    to_json(s)
}
