//! Gradient-domination diagnostics: per-item gradient norms against
//! popularity, and head/tail conflicts in the shared-parameter gradients.

use serde::Serialize;

use crate::data::{partition_head_tail, DataSplit};
use crate::lossgrad::bce_grad;
use crate::model::{ModelKind, ModelParams, NormalizedAdjacency, Representations};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemGradient {
    pub item: usize,
    pub popularity: u32,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCosine {
    pub head: usize,
    pub tail: usize,
    /// `None` when either gradient is zero.
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    /// Sorted by popularity descending, then item id.
    pub items: Vec<ItemGradient>,
    /// Spearman correlation of popularity and gradient norm; `None` when
    /// either is constant.
    pub spearman: Option<f64>,
    pub pairs: Vec<PairCosine>,
}

/// Accumulates the positive-loss gradient over one pass of the training
/// positives. Reports each item-embedding row norm, and cosines between the
/// user-table gradients of the `top_pairs` most popular head items and the
/// `top_pairs` most popular tail items.
pub fn analyze_gradients(params: &ModelParams, split: &DataSplit, top_pairs: usize) -> GradientReport {
    let adj = NormalizedAdjacency::new(split.n_users, split.n_items, &split.train);
    let reps = params.representations(&adj);
    let ds = split.train_dataset();
    let d = params.dim;

    let (_, item_grad) = positive_gradient(params, &adj, &reps, &split.train);
    let mut items: Vec<ItemGradient> = (0..split.n_items)
        .map(|i| ItemGradient {
            item: i,
            popularity: ds.popularity[i],
            grad_norm: norm(&item_grad[i * d..(i + 1) * d]),
        })
        .collect();
    items.sort_by(|a, b| b.popularity.cmp(&a.popularity).then(a.item.cmp(&b.item)));
    let pops: Vec<f64> = items.iter().map(|g| g.popularity as f64).collect();
    let norms: Vec<f64> = items.iter().map(|g| g.grad_norm).collect();

    let partition = partition_head_tail(&ds);
    let by_pop = |pool: &[usize]| -> Vec<usize> {
        let mut v = pool.to_vec();
        v.sort_by(|&a, &b| ds.popularity[b].cmp(&ds.popularity[a]).then(a.cmp(&b)));
        v.truncate(top_pairs);
        v
    };
    let heads = by_pop(&partition.head);
    let tails = by_pop(&partition.tail);
    let item_pairs = |i: usize| -> Vec<(usize, usize)> {
        split.train.iter().copied().filter(|p| p.1 == i).collect()
    };
    let shared = |i: usize| positive_gradient(params, &adj, &reps, &item_pairs(i)).0;
    let tail_grads: Vec<Vec<f64>> = tails.iter().map(|&t| shared(t)).collect();
    let mut pairs = Vec::new();
    for &h in &heads {
        let gh = shared(h);
        for (&t, gt) in tails.iter().zip(&tail_grads) {
            pairs.push(PairCosine {
                head: h,
                tail: t,
                cosine: cosine(&gh, gt),
            });
        }
    }
    GradientReport {
        items,
        spearman: spearman(&pops, &norms),
        pairs,
    }
}

/// Dense `(user table, item table)` gradient of the summed positive BCE over
/// `pairs`.
fn positive_gradient(
    p: &ModelParams,
    adj: &NormalizedAdjacency,
    reps: &Representations,
    pairs: &[(usize, usize)],
) -> (Vec<f64>, Vec<f64>) {
    let d = p.dim;
    let mut gu = vec![0.0; p.n_users * d];
    let mut gi = vec![0.0; p.n_items * d];
    for &(u, i) in pairs {
        let s = bce_grad(reps.training_score(&p.pop_emb, p.lambda_p, u, i), true);
        let (vu, vi) = (reps.user(u), reps.item(i));
        for k in 0..d {
            gu[u * d + k] += s * vi[k];
            gi[i * d + k] += s * (vu[k] + p.lambda_p * p.pop_emb[k]);
        }
    }
    match p.kind {
        ModelKind::Lgc if p.n_layers > 0 => adj.propagate(p.n_layers, &gu, &gi, d),
        _ => (gu, gi),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    }
}
