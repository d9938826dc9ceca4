//! Adam, losses, metrics and the early-stopping training loop.

use std::collections::HashSet;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{backward_from, model_forward, Mode, Model, PreparedGraph, Tape};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClassification,
    GraphRegression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub early_stop_window: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Task-dependent defaults.
    pub fn for_task(task: Task, seed: u64) -> Self {
        let (learning_rate, weight_decay) = match task {
            Task::NodeClassification => (1e-2, 5e-4),
            Task::GraphRegression => (1e-4, 0.0),
        };
        Self {
            task,
            learning_rate,
            weight_decay,
            max_epochs: 200,
            early_stop_window: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be finite and >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be >= 1".into()));
        }
        if self.early_stop_window == 0 {
            return Err(Error::InvalidArgument("early_stop_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Disjoint train / validation / test index sets over nodes or graphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>, population: usize) -> Result<Self> {
        let s = Self { train, val, test };
        s.validate(population)?;
        Ok(s)
    }

    pub fn validate(&self, population: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= population {
                return Err(Error::InvalidArgument(format!(
                    "split index {i} outside population of {population}"
                )));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!("split index {i} appears twice")));
            }
        }
        if self.train.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        Ok(())
    }
}

/// First and second moments plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (m, v): (Vec<_>, Vec<_>) = shapes
            .into_iter()
            .map(|(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
            .unzip();
        Self { m, v, t: 0 }
    }
}

/// One Adam update with L2 regularization folded into the gradient.
pub fn adam_step(
    params: &mut [&mut Matrix],
    grads: &[Matrix],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} tensors", state.m.len()),
            format!("{} params and {} grads", params.len(), grads.len()),
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("{:?}", p.shape()),
                format!("{:?}", g.shape()),
            ));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let ps = p.as_mut_slice();
        for (k, x) in ps.iter_mut().enumerate() {
            let gk = g.as_slice()[k] + weight_decay * *x;
            let mk = &mut m.as_mut_slice()[k];
            *mk = ADAM_BETA1 * *mk + (1.0 - ADAM_BETA1) * gk;
            let vk = &mut v.as_mut_slice()[k];
            *vk = ADAM_BETA2 * *vk + (1.0 - ADAM_BETA2) * gk * gk;
            let mhat = *mk / c1;
            let vhat = *vk / c2;
            *x -= lr * mhat / (vhat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

fn check_mask(mask: &[usize], rows: usize, op: &'static str) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::InvalidArgument(format!("{op}: empty mask")));
    }
    if let Some(&i) = mask.iter().find(|&&i| i >= rows) {
        return Err(Error::InvalidArgument(format!("{op}: mask index {i} >= {rows} rows")));
    }
    Ok(())
}

fn check_labels(labels: &[usize], logits: &Matrix, mask: &[usize], op: &'static str) -> Result<()> {
    if labels.len() != logits.rows() {
        return Err(Error::shape(
            op,
            format!("{} labels", logits.rows()),
            format!("{} labels", labels.len()),
        ));
    }
    if let Some(&i) = mask.iter().find(|&&i| labels[i] >= logits.cols()) {
        return Err(Error::InvalidArgument(format!(
            "{op}: label {} of node {i} >= {} classes",
            labels[i],
            logits.cols()
        )));
    }
    Ok(())
}

/// Mean softmax cross-entropy over `mask` and its gradient with respect to the logits.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize], mask: &[usize]) -> Result<(f64, Matrix)> {
    check_mask(mask, logits.rows(), "cross_entropy_loss")?;
    check_labels(labels, logits, mask, "cross_entropy_loss")?;
    let scale = 1.0 / mask.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &i in mask {
        let row = logits.row(i);
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let z: f64 = row.iter().map(|x| (x - m).exp()).sum();
        loss += m + z.ln() - row[labels[i]];
        for (c, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g += scale * ((row[c] - m).exp() / z - if c == labels[i] { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * scale, grad))
}

/// Mean squared error over all entries and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    let n = pred.len().max(1) as f64;
    let diff = pred.sub(target);
    let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff.scale(2.0 / n)))
}

/// Mean absolute error with uniform weights.
pub fn mae_metric(pred: &Matrix, target: &Matrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mae_metric",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    let n = pred.len().max(1) as f64;
    Ok(pred.sub(target).as_slice().iter().map(|d| d.abs()).sum::<f64>() / n)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = c;
        }
    }
    best
}

pub fn accuracy(logits: &Matrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    check_mask(mask, logits.rows(), "accuracy")?;
    if labels.len() != logits.rows() {
        return Err(Error::shape(
            "accuracy",
            format!("{} labels", logits.rows()),
            format!("{} labels", labels.len()),
        ));
    }
    let hits = mask.iter().filter(|&&i| argmax(logits.row(i)) == labels[i]).count();
    Ok(hits as f64 / mask.len() as f64)
}

/// Training data for either task.
// Built once per run, so the size gap between variants does not matter.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Dataset {
    /// One graph, node labels, transductive split over nodes.
    Nodes { graph: PreparedGraph, labels: Vec<usize> },
    /// Many graphs, one `1 × P` target each, split over graphs.
    Graphs {
        graphs: Vec<PreparedGraph>,
        targets: Vec<Matrix>,
    },
}

impl Dataset {
    pub fn population(&self) -> usize {
        match self {
            Dataset::Nodes { labels, .. } => labels.len(),
            Dataset::Graphs { graphs, .. } => graphs.len(),
        }
    }

    pub fn task(&self) -> Task {
        match self {
            Dataset::Nodes { .. } => Task::NodeClassification,
            Dataset::Graphs { .. } => Task::GraphRegression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub history: Vec<EpochRecord>,
    /// Parameters of the epoch with the best validation metric.
    pub best: Model,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Some forward pass ran next to a Lanczos breakdown.
    pub near_breakdown_epochs: usize,
}

/// Loss and metric of `model` in eval mode on the given indices.
/// The metric is accuracy for classification and MAE for regression.
pub fn evaluate(model: &Model, data: &Dataset, indices: &[usize]) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("evaluate: empty index set".into()));
    }
    match data {
        Dataset::Nodes { graph, labels } => {
            let mut tape = Tape::unchecked();
            let pass = model_forward(model, graph, &mut tape, Mode::Eval)?;
            let logits = tape.value(pass.output);
            let (loss, _) = cross_entropy_loss(logits, labels, indices)?;
            Ok((loss, accuracy(logits, labels, indices)?))
        }
        Dataset::Graphs { graphs, targets } => {
            let (mut loss, mut mae) = (0.0, 0.0);
            for &g in indices {
                let mut tape = Tape::unchecked();
                let pass = model_forward(model, &graphs[g], &mut tape, Mode::Eval)?;
                let pred = tape.value(pass.output);
                loss += mse_loss(pred, &targets[g])?.0;
                mae += mae_metric(pred, &targets[g])?;
            }
            let n = indices.len() as f64;
            Ok((loss / n, mae / n))
        }
    }
}

fn metric_improves(task: Task, candidate: (f64, f64), best: (f64, f64)) -> bool {
    // (metric, loss): strictly better metric, or equal metric with lower loss.
    let better = match task {
        Task::NodeClassification => candidate.0 > best.0,
        Task::GraphRegression => candidate.0 < best.0,
    };
    better || (candidate.0 == best.0 && candidate.1 < best.1)
}

/// Trains `model` with Adam; returns the per-epoch history and the best checkpoint.
pub fn fit(model: &mut Model, data: &Dataset, split: &Split, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    split.validate(data.population())?;
    if data.task() != cfg.task {
        return Err(Error::InvalidArgument(format!(
            "training config is for {:?} but the data is for {:?}",
            cfg.task,
            data.task()
        )));
    }
    if split.val.is_empty() {
        return Err(Error::InvalidArgument("validation set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.named_params().iter().map(|(_, p)| p.shape()));
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_score = (f64::NAN, f64::INFINITY);
    let mut best_val_loss = f64::INFINITY;
    let mut since_improvement = 0;
    let mut stopped_early = false;
    let mut near_breakdown_epochs = 0;
    let train_mask = Rc::new(split.train.clone());

    for epoch in 1..=cfg.max_epochs {
        let mut near = false;
        let train_loss = match data {
            Dataset::Nodes { graph, labels } => {
                let labels = Rc::new(labels.clone());
                let mut tape = Tape::unchecked();
                let pass = model_forward(model, graph, &mut tape, Mode::Train(&mut rng))?;
                near |= pass.near_breakdown;
                let loss = tape.cross_entropy(pass.output, labels, Rc::clone(&train_mask));
                let lv = tape.value(loss).item();
                if !lv.is_finite() {
                    return Err(Error::Diverged { epoch, loss: lv });
                }
                let grads = backward_from(model, &tape, &pass, loss, &Matrix::scalar(1.0));
                adam_step(
                    &mut model.params_mut(),
                    &grads.values,
                    &mut adam,
                    cfg.learning_rate,
                    cfg.weight_decay,
                )?;
                lv
            }
            Dataset::Graphs { graphs, targets } => {
                let mut order = split.train.clone();
                order.shuffle(&mut rng);
                let mut total = 0.0;
                for &g in &order {
                    let mut tape = Tape::unchecked();
                    let pass = model_forward(model, &graphs[g], &mut tape, Mode::Train(&mut rng))?;
                    near |= pass.near_breakdown;
                    let loss = tape.mse(pass.output, Rc::new(targets[g].clone()));
                    let lv = tape.value(loss).item();
                    if !lv.is_finite() {
                        return Err(Error::Diverged { epoch, loss: lv });
                    }
                    total += lv;
                    let grads = backward_from(model, &tape, &pass, loss, &Matrix::scalar(1.0));
                    adam_step(
                        &mut model.params_mut(),
                        &grads.values,
                        &mut adam,
                        cfg.learning_rate,
                        cfg.weight_decay,
                    )?;
                }
                total / order.len() as f64
            }
        };
        if near {
            near_breakdown_epochs += 1;
        }
        if model.named_params().iter().any(|(_, p)| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss: f64::NAN });
        }
        let (val_loss, val_metric) = evaluate(model, data, &split.val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_loss });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_metric,
        });
        if best_epoch == 0 || metric_improves(cfg.task, (val_metric, val_loss), best_score) {
            best = model.clone();
            best_epoch = epoch;
            best_score = (val_metric, val_loss);
        }
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= cfg.early_stop_window {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(FitResult {
        history,
        best,
        best_epoch,
        stopped_early,
        near_breakdown_epochs,
    })
}

/// History as CSV with a header row.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_metric\n");
    for r in history {
        s.push_str(&format!(
            "{},{:.10e},{:.10e},{:.10e}\n",
            r.epoch, r.train_loss, r.val_loss, r.val_metric
        ));
    }
    s
}
