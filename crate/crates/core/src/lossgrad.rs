//! Losses and analytic gradients, split into the shared group (user table)
//! and the item-specific group (item table and popularity embedding).
//!
//! Positive-pair gradients on the user table are kept per item cluster so the
//! caller can reweight them; everything else is unweighted.

use std::collections::BTreeSet;

use crate::cluster::ClusterAssignment;
use crate::data::TrainBatch;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, NormalizedAdjacency, Representations};
use crate::optim::AdamState;
use crate::pareto::ObjectiveWeights;

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_loss(score: f64, positive: bool) -> f64 {
    if positive {
        softplus(-score)
    } else {
        softplus(score)
    }
}

/// `d bce / d score`.
pub fn bce_grad(score: f64, positive: bool) -> f64 {
    sigmoid(score) - if positive { 1.0 } else { 0.0 }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Regularisation strengths.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegConfig {
    pub lambda_c: f64,
    pub lambda_1: f64,
}

/// Distinct users and items of the batch positives.
fn positive_nodes(batch: &TrainBatch) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let users = batch.positives.iter().map(|p| p.0).collect();
    let items = batch.positives.iter().map(|p| p.1).collect();
    (users, items)
}

/// Batch estimate of the contractive penalty: the squared Frobenius norms of
/// `dv_u/de_i` over batch-positive users and items. Zero for PMF, whose
/// representations are lookups.
pub fn contractive_loss(p: &ModelParams, adj: &NormalizedAdjacency, batch: &TrainBatch) -> f64 {
    if p.kind == ModelKind::Pmf || p.n_layers == 0 {
        return 0.0;
    }
    let (users, items) = positive_nodes(batch);
    let mut total = 0.0;
    for &u in &users {
        let influence = adj.user_item_influence(p.n_layers, u);
        for &i in &items {
            total += influence[i] * influence[i];
        }
    }
    // dv_i/dv' vanishes: v' never enters a representation.
    total * p.dim as f64
}

/// Rows touched by the batch, for the L2 term.
fn touched(batch: &TrainBatch) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let pairs = batch.positives.iter().chain(&batch.negatives);
    let users = pairs.clone().map(|p| p.0).collect();
    let items = pairs.map(|p| p.1).collect();
    (users, items)
}

/// Loss components of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLosses {
    /// Positive loss per item cluster, `L_k`.
    pub cluster: Vec<f64>,
    pub negative: f64,
    /// Unscaled contractive penalty.
    pub contractive: f64,
    /// Unscaled sum of squares of touched parameters.
    pub l2: f64,
    pub lambda_c: f64,
    pub lambda_1: f64,
}

impl BatchLosses {
    /// Unweighted BCE over positives and negatives.
    pub fn bce(&self) -> f64 {
        self.cluster.iter().sum::<f64>() + self.negative
    }

    /// BCE plus both regularisers.
    pub fn total(&self) -> f64 {
        self.bce() + self.lambda_c * self.contractive + self.lambda_1 * self.l2
    }
}

fn check_assignment(assign: &ClusterAssignment, n_items: usize, batch: &TrainBatch) -> Result<()> {
    for &(_, i) in &batch.positives {
        match assign.assign.get(i) {
            Some(&c) if c < assign.k => {}
            _ => return Err(Error::UnassignedItem(i)),
        }
    }
    if assign.assign.len() < n_items {
        log::debug!("cluster assignment covers {} of {n_items} items", assign.assign.len());
    }
    Ok(())
}

/// Batch loss without gradients. `pos_weights`, when given, scales the BCE
/// term of each positive by the weight of its item.
pub fn batch_loss(
    p: &ModelParams,
    adj: &NormalizedAdjacency,
    batch: &TrainBatch,
    assign: &ClusterAssignment,
    reg: RegConfig,
    pos_weights: Option<&[f64]>,
) -> Result<BatchLosses> {
    check_assignment(assign, p.n_items, batch)?;
    let reps = p.representations(adj);
    let mut cluster = vec![0.0; assign.k];
    for &(u, i) in &batch.positives {
        let w = pos_weights.map_or(1.0, |w| w[i]);
        cluster[assign.assign[i]] += w * bce_loss(reps.training_score(&p.pop_emb, p.lambda_p, u, i), true);
    }
    let negative = batch
        .negatives
        .iter()
        .map(|&(u, i)| bce_loss(reps.training_score(&p.pop_emb, p.lambda_p, u, i), false))
        .sum();
    Ok(BatchLosses {
        cluster,
        negative,
        contractive: if reg.lambda_c > 0.0 {
            contractive_loss(p, adj, batch)
        } else {
            0.0
        },
        l2: if reg.lambda_1 > 0.0 { l2_value(p, batch) } else { 0.0 },
        lambda_c: reg.lambda_c,
        lambda_1: reg.lambda_1,
    })
}

fn l2_value(p: &ModelParams, batch: &TrainBatch) -> f64 {
    let (users, items) = touched(batch);
    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    users.iter().map(|&u| sq(p.user_row(u))).sum::<f64>()
        + items.iter().map(|&i| sq(p.item_row(i))).sum::<f64>()
        + sq(&p.pop_emb)
}

/// Gradients of one batch, restricted to the rows they touch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub dim: usize,
    /// User rows covered by the shared vectors, ascending.
    pub user_rows: Vec<usize>,
    /// Positive-loss gradient on the user table, one vector per cluster,
    /// laid out as `user_rows.len() x dim`.
    pub per_cluster_shared: Vec<Vec<f64>>,
    /// Negative-loss, contractive and L2 gradient on the user table.
    pub shared_negative: Vec<f64>,
    /// Item rows covered by `item_grads`, ascending.
    pub item_rows: Vec<usize>,
    pub item_grads: Vec<f64>,
    pub pop_grad: Vec<f64>,
}

impl GradientBundle {
    /// `Σ_k w_k g_k + g_neg` over the covered user rows.
    pub fn weighted_shared(&self, weights: &ObjectiveWeights) -> Vec<f64> {
        let mut out = vec![0.0; self.shared_negative.len()];
        for (g, w) in self.per_cluster_shared.iter().zip(&weights.w) {
            for (o, x) in out.iter_mut().zip(g) {
                *o += w * x;
            }
        }
        for (o, x) in out.iter_mut().zip(&self.shared_negative) {
            *o += x;
        }
        out
    }

    /// Shared gradient with every cluster weighted 1.
    pub fn unweighted_shared(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.shared_negative.len()];
        for g in &self.per_cluster_shared {
            for (o, x) in out.iter_mut().zip(g) {
                *o += x;
            }
        }
        for (o, x) in out.iter_mut().zip(&self.shared_negative) {
            *o += x;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.per_cluster_shared
            .iter()
            .flatten()
            .chain(&self.shared_negative)
            .chain(&self.item_grads)
            .chain(&self.pop_grad)
            .all(|x| x.is_finite())
    }
}

/// Dense representation-space gradients for one loss group.
struct RepGrad {
    users: Vec<f64>,
    items: Vec<f64>,
}

impl RepGrad {
    fn zeros(n_users: usize, n_items: usize, dim: usize) -> Self {
        Self {
            users: vec![0.0; n_users * dim],
            items: vec![0.0; n_items * dim],
        }
    }
}

/// Accumulates `dl/d score` of one pair into representation gradients.
#[allow(clippy::too_many_arguments)]
fn accumulate_pair(
    reps: &Representations,
    p: &ModelParams,
    u: usize,
    i: usize,
    s: f64,
    group: &mut RepGrad,
    pop_grad: &mut [f64],
) {
    let d = p.dim;
    let vu = reps.user(u);
    let vi = reps.item(i);
    for k in 0..d {
        group.users[u * d + k] += s * vi[k];
        group.items[i * d + k] += s * (vu[k] + p.lambda_p * p.pop_emb[k]);
        pop_grad[k] += s * p.lambda_p * vi[k];
    }
}

/// Assembles the gradient bundle and the per-cluster losses of a batch.
pub fn assemble_gradients(
    p: &ModelParams,
    adj: &NormalizedAdjacency,
    batch: &TrainBatch,
    assign: &ClusterAssignment,
    reg: RegConfig,
    pos_weights: Option<&[f64]>,
) -> Result<(GradientBundle, BatchLosses)> {
    check_assignment(assign, p.n_items, batch)?;
    let d = p.dim;
    let reps = p.representations(adj);
    let mut groups: Vec<RepGrad> = (0..=assign.k)
        .map(|_| RepGrad::zeros(p.n_users, p.n_items, d))
        .collect();
    let mut pop_grad = vec![0.0; d];
    let mut cluster = vec![0.0; assign.k];
    let mut negative = 0.0;

    for &(u, i) in &batch.positives {
        let c = assign.assign[i];
        let w = pos_weights.map_or(1.0, |w| w[i]);
        let score = reps.training_score(&p.pop_emb, p.lambda_p, u, i);
        cluster[c] += w * bce_loss(score, true);
        accumulate_pair(&reps, p, u, i, w * bce_grad(score, true), &mut groups[c], &mut pop_grad);
    }
    let neg = assign.k;
    for &(u, i) in &batch.negatives {
        let score = reps.training_score(&p.pop_emb, p.lambda_p, u, i);
        negative += bce_loss(score, false);
        accumulate_pair(&reps, p, u, i, bce_grad(score, false), &mut groups[neg], &mut pop_grad);
    }

    // Representation gradients -> parameter gradients.
    if p.kind == ModelKind::Lgc && p.n_layers > 0 {
        for g in &mut groups {
            let (users, items) = adj.propagate(p.n_layers, &g.users, &g.items, d);
            g.users = users;
            g.items = items;
        }
    }

    let (user_rows, item_rows): (Vec<usize>, Vec<usize>) = match p.kind {
        ModelKind::Lgc if p.n_layers > 0 => ((0..p.n_users).collect(), (0..p.n_items).collect()),
        _ => {
            let (u, i) = touched(batch);
            (u.into_iter().collect(), i.into_iter().collect())
        }
    };
    let gather = |dense: &[f64], rows: &[usize]| -> Vec<f64> {
        rows.iter()
            .flat_map(|&r| dense[r * d..(r + 1) * d].iter().copied())
            .collect()
    };

    let per_cluster_shared: Vec<Vec<f64>> = groups[..assign.k]
        .iter()
        .map(|g| gather(&g.users, &user_rows))
        .collect();
    let mut shared_negative = gather(&groups[neg].users, &user_rows);
    let mut item_dense = vec![0.0; p.n_items * d];
    for g in &groups {
        for (o, x) in item_dense.iter_mut().zip(&g.items) {
            *o += x;
        }
    }
    let mut item_grads = gather(&item_dense, &item_rows);

    // The contractive penalty depends on the graph alone, so its parameter
    // gradient is identically zero and contributes nothing here.
    let contractive = if reg.lambda_c > 0.0 {
        contractive_loss(p, adj, batch)
    } else {
        0.0
    };

    let mut l2 = 0.0;
    if reg.lambda_1 > 0.0 {
        let (users, items) = touched(batch);
        let scale = 2.0 * reg.lambda_1;
        for u in users {
            let slot = user_rows.binary_search(&u).expect("touched user is covered");
            for (k, x) in p.user_row(u).iter().enumerate() {
                shared_negative[slot * d + k] += scale * x;
                l2 += x * x;
            }
        }
        for i in items {
            let slot = item_rows.binary_search(&i).expect("touched item is covered");
            for (k, x) in p.item_row(i).iter().enumerate() {
                item_grads[slot * d + k] += scale * x;
                l2 += x * x;
            }
        }
        for (g, x) in pop_grad.iter_mut().zip(&p.pop_emb) {
            *g += scale * x;
            l2 += x * x;
        }
    }

    Ok((
        GradientBundle {
            dim: d,
            user_rows,
            per_cluster_shared,
            shared_negative,
            item_rows,
            item_grads,
            pop_grad,
        },
        BatchLosses {
            cluster,
            negative,
            contractive,
            l2,
            lambda_c: reg.lambda_c,
            lambda_1: reg.lambda_1,
        },
    ))
}

/// Adam step with the shared group driven by `Σ_k w_k g_k + g_neg` and the
/// item group by the unweighted item gradients.
pub fn apply_weighted_update(
    p: &mut ModelParams,
    bundle: &GradientBundle,
    weights: &ObjectiveWeights,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    apply_shared_update(p, bundle, &bundle.weighted_shared(weights), state, lr)
}

/// Adam step with an already combined shared gradient.
pub fn apply_shared_update(
    p: &mut ModelParams,
    bundle: &GradientBundle,
    shared: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !bundle.is_finite() || !shared.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("non-finite gradient; update aborted".into()));
    }
    let d = bundle.dim;
    let mut user_grad = vec![0.0; p.user_emb.len()];
    for (slot, &u) in bundle.user_rows.iter().enumerate() {
        user_grad[u * d..(u + 1) * d].copy_from_slice(&shared[slot * d..(slot + 1) * d]);
    }
    let mut item_grad = vec![0.0; p.item_emb.len()];
    for (slot, &i) in bundle.item_rows.iter().enumerate() {
        item_grad[i * d..(i + 1) * d].copy_from_slice(&bundle.item_grads[slot * d..(slot + 1) * d]);
    }
    state.t += 1;
    let t = state.t;
    state.user.step(&mut p.user_emb, &user_grad, lr, t);
    state.item.step(&mut p.item_emb, &item_grad, lr, t);
    state.pop.step(&mut p.pop_emb, &bundle.pop_grad, lr, t);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_values() {
        assert!((bce_loss(0.0, true) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(30.0, true) < 1e-12);
        assert!((bce_loss(1.0, false) - 1.313_261_687_518_222_6).abs() < 1e-12);
        assert!(bce_loss(-800.0, true).is_finite());
        assert!(bce_loss(800.0, false).is_finite());
        assert_eq!(bce_grad(0.0, true), -0.5);
    }
}
