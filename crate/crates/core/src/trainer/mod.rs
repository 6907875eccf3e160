//! The training loop for ICMT and the normal / IPS baselines.

mod analysis;
mod config;

pub use analysis::{analyze_gradients, spearman, GradientReport, ItemGradient, PairCosine};
pub use config::{Method, TrainConfig, HYPERPARAM_GRID};

use std::fmt::Write as _;

use crate::cluster::{clustering_embeddings, kmeans, ClusterAssignment};
use crate::data::{partition_head_tail, BatchSampler, DataSplit, TrainBatch};
use crate::error::{Error, Result};
use crate::lossgrad::{apply_shared_update, apply_weighted_update, assemble_gradients, RegConfig};
use crate::metrics::{evaluate, EvalTarget};
use crate::model::{init_params, ModelParams, NormalizedAdjacency};
use crate::optim::AdamState;
use crate::pareto::{gram_matrix, pe_solve, ObjectiveWeights, PeStep};
use crate::rng::{stream, Stream};

/// One validation evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub batches: usize,
    pub epoch: usize,
    pub recall: f64,
    pub ndcg: f64,
    /// Mean weight of the least popular cluster since the previous record.
    pub mean_tail_weight: f64,
    /// Mean per-batch positive loss of each cluster since the previous record.
    pub cluster_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub method: Method,
    pub k: usize,
    pub eval_n: usize,
    pub records: Vec<HistoryRecord>,
    /// Total loss (BCE plus regularisers) of every batch, in order.
    pub batch_losses: Vec<f64>,
    /// Summed BCE over each epoch.
    pub epoch_losses: Vec<f64>,
    /// Weight of the least popular cluster at every batch (ICMT only).
    pub tail_weights: Vec<f64>,
    /// Index into `records` of the returned parameters.
    pub best: Option<usize>,
}

impl TrainHistory {
    /// CSV `batches,recall20,ndcg20,mean_tail_weight[,loss_cluster_k...]`.
    /// Cluster columns appear only for ICMT.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "batches,recall{n},ndcg{n},mean_tail_weight",
            n = self.eval_n
        );
        let clusters = self.method == Method::Icmt;
        if clusters {
            for k in 0..self.k {
                write!(out, ",loss_cluster_{k}").unwrap();
            }
        }
        out.push('\n');
        for r in &self.records {
            write!(out, "{},{},{},{}", r.batches, r.recall, r.ndcg, r.mean_tail_weight).unwrap();
            if clusters {
                for l in &r.cluster_losses {
                    write!(out, ",{l}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation NDCG.
    pub params: ModelParams,
    pub history: TrainHistory,
    /// `(batch, step)` pairs, filled when `debug_pe_trace` is set.
    pub pe_trace: Vec<(usize, PeStep)>,
}

/// Per-item positive weights `1/popularity`, scaled to average 1 over the
/// training positives.
pub fn ips_weights(popularity: &[u32]) -> Vec<f64> {
    let n_pos: u64 = popularity.iter().map(|&p| p as u64).sum();
    let n_active = popularity.iter().filter(|&&p| p > 0).count();
    popularity
        .iter()
        .map(|&p| {
            if p == 0 {
                1.0
            } else {
                n_pos as f64 / (n_active as f64 * p as f64)
            }
        })
        .collect()
}

/// Relabels clusters by descending mean popularity, so the last cluster is the
/// tail-dominant one.
fn canonicalize(mut assign: ClusterAssignment, popularity: &[u32]) -> ClusterAssignment {
    let k = assign.k;
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (i, &c) in assign.assign.iter().enumerate() {
        sum[c] += popularity[i] as f64;
        count[c] += 1;
    }
    let mean: Vec<f64> = (0..k)
        .map(|c| if count[c] == 0 { 0.0 } else { sum[c] / count[c] as f64 })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    for c in &mut assign.assign {
        *c = relabel[*c];
    }
    let d = assign.dim;
    let mut centroids = vec![0.0; assign.centroids.len()];
    for (new, &old) in order.iter().enumerate() {
        centroids[new * d..(new + 1) * d].copy_from_slice(&assign.centroids[old * d..(old + 1) * d]);
    }
    assign.centroids = centroids;
    assign
}

struct Interval {
    tail_weight: f64,
    cluster_losses: Vec<f64>,
    batches: usize,
}

impl Interval {
    fn new(k: usize) -> Self {
        Self {
            tail_weight: 0.0,
            cluster_losses: vec![0.0; k],
            batches: 0,
        }
    }
}

/// Runs the batch loop with validation-based early stopping.
pub fn train(config: &TrainConfig, split: &DataSplit) -> Result<TrainOutcome> {
    config.validate()?;
    let k = config.effective_k();
    let model_cfg = config.model_config();
    let mut params = init_params(&model_cfg, split.n_users, split.n_items, config.seed);
    let adj = NormalizedAdjacency::new(split.n_users, split.n_items, &split.train);
    let train_ds = split.train_dataset();
    let partition = partition_head_tail(&train_ds);
    let sampler = BatchSampler::new(split, config.batch_size, config.neg_ratio)?;
    let mut sampling_rng = stream(config.seed, Stream::Sampling);
    let mut adam = AdamState::new(params.user_emb.len(), params.item_emb.len(), params.dim);
    let reg = RegConfig {
        lambda_c: if config.method == Method::Icmt { config.lambda_c } else { 0.0 },
        lambda_1: config.lambda_1,
    };
    let pos_weights = (config.method == Method::Ips).then(|| ips_weights(&train_ds.popularity));
    if k > split.n_items {
        return Err(Error::Config(format!(
            "K = {k} exceeds the number of items ({})",
            split.n_items
        )));
    }

    let mut assign = ClusterAssignment::single(split.n_items, params.dim);
    let mut weights = ObjectiveWeights::uniform(k);
    let mut history = TrainHistory {
        method: config.method,
        k,
        eval_n: config.eval_n,
        records: Vec::new(),
        batch_losses: Vec::new(),
        epoch_losses: Vec::new(),
        tail_weights: Vec::new(),
        best: None,
    };
    let mut pe_trace = Vec::new();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut stale = 0usize;
    let mut seen = 0usize;
    let mut interval = Interval::new(k);
    let mut stop = false;

    'epochs: for epoch in 0..config.max_epochs {
        let mut epoch_loss = 0.0;
        for batch in sampler.epoch(&mut sampling_rng, seen) {
            let losses = match config.method {
                Method::Icmt => {
                    if k > 1 && seen.is_multiple_of(config.recluster_every) {
                        assign = recluster(&params, &adj, config, k, seen, &train_ds.popularity)?;
                    }
                    let (bundle, losses) =
                        assemble_gradients(&params, &adj, &batch, &assign, reg, None)?;
                    let gram = gram_matrix(&bundle.per_cluster_shared)?;
                    let solution = pe_solve(&gram, config.pe_max_iter, config.pe_tol)?;
                    if !solution.converged {
                        log::warn!("batch {seen}: PE solver hit the {}-iteration cap", config.pe_max_iter);
                    }
                    if config.debug_pe_trace {
                        pe_trace.extend(solution.trace.iter().map(|s| (seen, *s)));
                    }
                    weights = solution.weights;
                    apply_weighted_update(&mut params, &bundle, &weights, &mut adam, config.lr)
                        .map_err(|e| diagnose(e, &batch))?;
                    losses
                }
                Method::Normal | Method::Ips => {
                    let (bundle, losses) = assemble_gradients(
                        &params,
                        &adj,
                        &batch,
                        &assign,
                        reg,
                        pos_weights.as_deref(),
                    )?;
                    let shared = bundle.unweighted_shared();
                    apply_shared_update(&mut params, &bundle, &shared, &mut adam, config.lr)
                        .map_err(|e| diagnose(e, &batch))?;
                    losses
                }
            };
            let total = losses.total();
            if !total.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss diverged to {total} at batch {seen} (epoch {epoch})"
                )));
            }
            history.batch_losses.push(total);
            epoch_loss += losses.bce();
            let tail_weight = weights.w[k - 1];
            if config.method == Method::Icmt {
                history.tail_weights.push(tail_weight);
            }
            interval.tail_weight += tail_weight;
            for (acc, l) in interval.cluster_losses.iter_mut().zip(&losses.cluster) {
                *acc += l;
            }
            interval.batches += 1;
            seen += 1;

            if seen.is_multiple_of(config.eval_every_batches) {
                stop = record_eval(
                    config, &params, &adj, split, &partition, seen, epoch,
                    &mut interval, &mut history, &mut best, &mut stale,
                );
                if stop {
                    history.epoch_losses.push(epoch_loss);
                    break 'epochs;
                }
            }
        }
        history.epoch_losses.push(epoch_loss);
    }
    if !stop && interval.batches > 0 {
        let epoch = history.epoch_losses.len().saturating_sub(1);
        record_eval(
            config, &params, &adj, split, &partition, seen, epoch,
            &mut interval, &mut history, &mut best, &mut stale,
        );
    }
    let params = best.map(|(_, p)| p).unwrap_or(params);
    Ok(TrainOutcome {
        params,
        history,
        pe_trace,
    })
}

fn diagnose(err: Error, batch: &TrainBatch) -> Error {
    match err {
        Error::Numerical(msg) => Error::Numerical(format!("{msg} (batch {})", batch.ordinal)),
        other => other,
    }
}

fn recluster(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    config: &TrainConfig,
    k: usize,
    seen: usize,
    popularity: &[u32],
) -> Result<ClusterAssignment> {
    let reps = params.representations(adj);
    let emb = clustering_embeddings(&reps, &params.pop_emb);
    let seed = config.seed.wrapping_add(seen as u64);
    let assign = kmeans(&emb, params.dim, k, seed, config.kmeans_max_iter, config.kmeans_tol)?;
    Ok(canonicalize(assign, popularity))
}

/// Evaluates on validation, updates the best snapshot, and reports whether
/// patience ran out.
#[allow(clippy::too_many_arguments)]
fn record_eval(
    config: &TrainConfig,
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    split: &DataSplit,
    partition: &crate::data::HeadTailPartition,
    seen: usize,
    epoch: usize,
    interval: &mut Interval,
    history: &mut TrainHistory,
    best: &mut Option<(f64, ModelParams)>,
    stale: &mut usize,
) -> bool {
    let report = evaluate(
        params,
        adj,
        split,
        partition,
        config.eval_n,
        EvalTarget::Validation,
        config.exclude_seen,
    );
    let n = interval.batches.max(1) as f64;
    history.records.push(HistoryRecord {
        batches: seen,
        epoch,
        recall: report.recall,
        ndcg: report.ndcg,
        mean_tail_weight: interval.tail_weight / n,
        cluster_losses: interval.cluster_losses.iter().map(|l| l / n).collect(),
    });
    *interval = Interval::new(interval.cluster_losses.len());
    let improved = best.as_ref().is_none_or(|(b, _)| report.ndcg > *b);
    if improved {
        *best = Some((report.ndcg, params.clone()));
        history.best = Some(history.records.len() - 1);
        *stale = 0;
        false
    } else {
        *stale += 1;
        *stale >= config.patience
    }
}
