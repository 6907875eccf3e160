//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

/// Comparison of an oracle against a candidate.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub oracle: Vec<f64>,
    pub candidate: Vec<f64>,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Per-entry relative error with an absolute floor on the denominator.
pub fn compare(oracle: &[f64], candidate: &[f64], tolerance: f64, floor: f64) -> OracleReport {
    assert_eq!(oracle.len(), candidate.len(), "oracle/candidate length mismatch");
    let max_rel_err = oracle
        .iter()
        .zip(candidate)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max);
    OracleReport {
        oracle: oracle.to_vec(),
        candidate: candidate.to_vec(),
        max_rel_err,
        tolerance,
        pass: max_rel_err <= tolerance,
    }
}

/// Block-wise relative error `||a - b|| / max(||a||, ||b||, floor)`.
pub fn block_rel_err(oracle: &[f64], candidate: &[f64], floor: f64) -> f64 {
    let diff: f64 = oracle
        .iter()
        .zip(candidate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let na = oracle.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = candidate.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

/// Central finite differences of `f` at `x`.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + eps;
            let up = f(&probe);
            probe[k] = orig - eps;
            let down = f(&probe);
            probe[k] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Exhaustive search over the simplex grid with step `resolution`.
/// Returns the minimizing unit-simplex weights and `wᵀMw`.
pub fn grid_min_norm(m: &[Vec<f64>], resolution: f64) -> (Vec<f64>, f64) {
    let k = m.len();
    assert!((1..=4).contains(&k), "grid oracle supports 1 <= K <= 4");
    let steps = (1.0 / resolution).round() as usize;
    let quad = |w: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += w[i] * m[i][j] * w[j];
            }
        }
        s
    };
    let mut best = (vec![0.0; k], f64::INFINITY);
    let mut counts = vec![0usize; k];
    fn rec(
        idx: usize,
        left: usize,
        counts: &mut Vec<usize>,
        steps: usize,
        quad: &dyn Fn(&[f64]) -> f64,
        best: &mut (Vec<f64>, f64),
    ) {
        let k = counts.len();
        if idx == k - 1 {
            counts[idx] = left;
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
            let v = quad(&w);
            if v < best.1 {
                *best = (w, v);
            }
            return;
        }
        for c in 0..=left {
            counts[idx] = c;
            rec(idx + 1, left - c, counts, steps, quad, best);
        }
    }
    rec(0, steps, &mut counts, steps, &quad, &mut best);
    best
}

/// Minimum inertia over every 2-partition of `points` (rows of `dim`).
pub fn exhaustive_two_means(points: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = points.len();
    assert!(n <= 16, "exhaustive oracle is exponential");
    let mut best = (vec![0; n], f64::INFINITY);
    // Fix point 0 in cluster 0 to skip mirrored partitions.
    for mask in 0u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n)
            .map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize })
            .collect();
        if !labels.contains(&1) {
            continue;
        }
        let mut cost = 0.0;
        for c in 0..2 {
            let members: Vec<&Vec<f64>> = (0..n).filter(|&i| labels[i] == c).map(|i| &points[i]).collect();
            let dim = members[0].len();
            let mean: Vec<f64> = (0..dim)
                .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                .collect();
            for p in members {
                cost += p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
        if cost < best.1 {
            best = (labels, cost);
        }
    }
    best
}

/// Iterative k-core over raw token pairs; returns surviving (users, items, pairs).
pub fn brute_force_k_core(pairs: &[(String, String)], k: usize) -> (usize, usize, usize) {
    let mut live: BTreeSet<(String, String)> = pairs.iter().cloned().collect();
    loop {
        let mut ucount: BTreeMap<&str, usize> = BTreeMap::new();
        let mut icount: BTreeMap<&str, usize> = BTreeMap::new();
        for (u, i) in &live {
            *ucount.entry(u).or_default() += 1;
            *icount.entry(i).or_default() += 1;
        }
        let doomed: Vec<(String, String)> = live
            .iter()
            .filter(|(u, i)| ucount[u.as_str()] < k || icount[i.as_str()] < k)
            .cloned()
            .collect();
        if doomed.is_empty() {
            return (ucount.len(), icount.len(), live.len());
        }
        for p in doomed {
            live.remove(&p);
        }
    }
}

/// Naive top-N: full stable sort by (score desc, id asc) after removing
/// exclusions.
pub fn naive_top_n(scores: &[f64], n: usize, exclude: &[usize]) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !exclude.contains(i))
        .map(|(i, s)| (*s, i))
        .collect();
    // bubble-sort style ordering keeps this independent of slice::sort_by
    for a in 0..all.len() {
        for b in 0..all.len() - 1 - a {
            let swap = all[b].0 < all[b + 1].0 || (all[b].0 == all[b + 1].0 && all[b].1 > all[b + 1].1);
            if swap {
                all.swap(b, b + 1);
            }
        }
    }
    all.into_iter().take(n).map(|(_, i)| i).collect()
}

/// Recall, NDCG straight from the definitions.
pub fn naive_recall_ndcg(list: &[usize], truth: &[usize]) -> (f64, f64) {
    let mut hits = 0.0;
    let mut dcg = 0.0;
    for (pos, item) in list.iter().enumerate() {
        if truth.contains(item) {
            hits += 1.0;
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for pos in 0..truth.len().min(list.len()) {
        idcg += 1.0 / ((pos + 2) as f64).log2();
    }
    (hits / truth.len() as f64, dcg / idcg)
}

/// Deterministic SplitMix64 stream for oracle-side randomness.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.unit().max(1e-300);
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Random PSD Gram matrix `G Gᵀ` from `k` gradients of length `len`.
pub fn random_gram(rng: &mut SplitMix, k: usize, len: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let grads: Vec<Vec<f64>> = (0..k).map(|_| (0..len).map(|_| rng.normal()).collect()).collect();
    let m = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    (grads, m)
}

/// Zipf-distributed `(user, item)` token log with `n` records.
pub fn zipf_log(rng: &mut SplitMix, n: usize, n_users: usize, n_items: usize, exponent: f64) -> Vec<(String, String)> {
    let weights: Vec<f64> = (1..=n_items).map(|r| (r as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let u = rng.below(n_users);
            let mut target = rng.unit() * total;
            let mut item = n_items - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    item = i;
                    break;
                }
                target -= w;
            }
            (format!("u{u}"), format!("i{item}"))
        })
        .collect()
}

/// Plain description of a scoring model for the dense loss oracle.
pub struct DenseModel<'a> {
    pub n_users: usize,
    pub n_items: usize,
    pub dim: usize,
    /// 0 means lookup (matrix factorization).
    pub n_layers: usize,
    pub lambda_p: f64,
    pub train: &'a [(usize, usize)],
}

/// Dense propagation matrix `(1/(L+1)) Σ_l A^l` over users then items.
pub fn dense_propagation(m: &DenseModel) -> Vec<Vec<f64>> {
    let n = m.n_users + m.n_items;
    let mut deg = vec![0.0f64; n];
    for &(u, i) in m.train {
        deg[u] += 1.0;
        deg[m.n_users + i] += 1.0;
    }
    let mut a = vec![vec![0.0; n]; n];
    for &(u, i) in m.train {
        let c = 1.0 / (deg[u] * deg[m.n_users + i]).sqrt();
        a[u][m.n_users + i] = c;
        a[m.n_users + i][u] = c;
    }
    let mut power: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| f64::from(r == c)).collect()).collect();
    let mut sum = power.clone();
    for _ in 0..m.n_layers {
        let mut next = vec![vec![0.0; n]; n];
        for r in 0..n {
            for k in 0..n {
                if power[r][k] != 0.0 {
                    for c in 0..n {
                        next[r][c] += power[r][k] * a[k][c];
                    }
                }
            }
        }
        power = next;
        for r in 0..n {
            for c in 0..n {
                sum[r][c] += power[r][c];
            }
        }
    }
    let scale = 1.0 / (m.n_layers + 1) as f64;
    sum.iter().map(|row| row.iter().map(|x| x * scale).collect()).collect()
}

/// Loss terms recomputed from scratch on a flat parameter vector laid out as
/// `user table | item table | popularity vector`.
pub struct DenseLoss {
    /// Positive BCE per cluster.
    pub cluster: Vec<f64>,
    pub negative: f64,
    pub contractive: f64,
    pub l2: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn dense_loss(
    m: &DenseModel,
    prop: &[Vec<f64>],
    theta: &[f64],
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
    assign: &[usize],
    k: usize,
    pos_weight: Option<&[f64]>,
) -> DenseLoss {
    let d = m.dim;
    let n = m.n_users + m.n_items;
    let pop = &theta[n * d..];
    let mut reps = vec![0.0; n * d];
    for r in 0..n {
        for c in 0..n {
            let w = prop[r][c];
            if w != 0.0 {
                for j in 0..d {
                    reps[r * d + j] += w * theta[c * d + j];
                }
            }
        }
    }
    let score = |u: usize, i: usize| -> f64 {
        let vu = &reps[u * d..(u + 1) * d];
        let vi = &reps[(m.n_users + i) * d..(m.n_users + i + 1) * d];
        (0..d).map(|j| vu[j] * vi[j] + m.lambda_p * pop[j] * vi[j]).sum()
    };
    let log_sigmoid = |x: f64| -> f64 { -((-x).exp() + 1.0).ln() };
    let mut cluster = vec![0.0; k];
    for &(u, i) in positives {
        let w = pos_weight.map_or(1.0, |w| w[i]);
        cluster[assign[i]] += -w * log_sigmoid(score(u, i));
    }
    let negative = negatives.iter().map(|&(u, i)| -log_sigmoid(-score(u, i))).sum();

    let mut contractive = 0.0;
    if m.n_layers > 0 {
        let users: BTreeSet<usize> = positives.iter().map(|p| p.0).collect();
        let items: BTreeSet<usize> = positives.iter().map(|p| p.1).collect();
        for &u in &users {
            for &i in &items {
                contractive += prop[u][m.n_users + i].powi(2) * d as f64;
            }
        }
    }

    let all = || positives.iter().chain(negatives);
    let users: BTreeSet<usize> = all().map(|p| p.0).collect();
    let items: BTreeSet<usize> = all().map(|p| p.1).collect();
    let mut l2: f64 = pop.iter().map(|x| x * x).sum();
    for &u in &users {
        l2 += theta[u * d..(u + 1) * d].iter().map(|x| x * x).sum::<f64>();
    }
    for &i in &items {
        let r = m.n_users + i;
        l2 += theta[r * d..(r + 1) * d].iter().map(|x| x * x).sum::<f64>();
    }
    DenseLoss { cluster, negative, contractive, l2 }
}
