//! Popularity-correlation clustering embeddings and k-means.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Representations;
use crate::rng::{stream, Stream};

pub const DEFAULT_K: usize = 2;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

/// `(v_i ⊙ v') / (||v_i|| ||v'||)`. Zero-norm inputs give the zero vector.
pub fn clustering_embedding(item: &[f64], pop: &[f64]) -> Vec<f64> {
    let scale = norm(item) * norm(pop);
    if scale == 0.0 {
        return vec![0.0; item.len()];
    }
    item.iter().zip(pop).map(|(a, b)| a * b / scale).collect()
}

/// Clustering embeddings of every item, row-major `n_items x dim`.
pub fn clustering_embeddings(reps: &Representations, pop: &[f64]) -> Vec<f64> {
    let n = reps.n_items();
    let mut degenerate = 0usize;
    let mut out = Vec::with_capacity(n * reps.dim);
    for i in 0..n {
        let row = clustering_embedding(reps.item(i), pop);
        if row.iter().all(|x| *x == 0.0) {
            degenerate += 1;
        }
        out.extend(row);
    }
    if degenerate > 0 {
        log::warn!("{degenerate} items have a zero clustering embedding");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub dim: usize,
    /// Cluster id of each item.
    pub assign: Vec<usize>,
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
}

impl ClusterAssignment {
    /// Every item in cluster 0.
    pub fn single(n_items: usize, dim: usize) -> Self {
        Self {
            k: 1,
            dim,
            assign: vec![0; n_items],
            centroids: vec![0.0; dim],
            inertia: 0.0,
            iterations: 0,
            inertia_trace: Vec::new(),
        }
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assign {
            sizes[c] += 1;
        }
        sizes
    }
}

/// k-means++ seeding followed by Lloyd iterations until the largest centroid
/// shift drops below `tol`. Empty clusters take the point farthest from its
/// centroid.
pub fn kmeans(
    points: &[f64],
    dim: usize,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    let n = points.len() / dim.max(1);
    if k == 0 || k > n {
        return Err(Error::Precondition(format!(
            "k-means needs 1 <= K <= n_items (K = {k}, n_items = {n})"
        )));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = stream(seed, Stream::KMeans);
    let mut centroids = seed_plus_plus(points, dim, k, &mut rng);
    let mut assign = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut inertia_trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let inertia = assign_points(points, dim, &centroids, &mut assign, &mut dists);
        inertia_trace.push(inertia);
        repair_empty(points, dim, k, &mut centroids, &mut assign, &mut dists);

        let mut next = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in next[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            next[c * dim..(c + 1) * dim].iter_mut().for_each(|x| *x *= inv);
        }
        let shift = (0..k)
            .map(|c| sq_dist(&next[c * dim..(c + 1) * dim], &centroids[c * dim..(c + 1) * dim]).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < tol {
            break;
        }
    }
    let inertia = assign_points(points, dim, &centroids, &mut assign, &mut dists);
    Ok(ClusterAssignment {
        k,
        dim,
        assign,
        centroids,
        inertia,
        iterations,
        inertia_trace,
    })
}

fn seed_plus_plus<R: Rng>(points: &[f64], dim: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(row(pick));
        for (i, best) in nearest.iter_mut().enumerate() {
            let d = sq_dist(row(i), &centroids[start..start + dim]);
            if d < *best {
                *best = d;
            }
        }
    }
    centroids
}

/// Nearest-centroid assignment, ties to the lowest cluster id. Returns inertia.
fn assign_points(
    points: &[f64],
    dim: usize,
    centroids: &[f64],
    assign: &mut [usize],
    dists: &mut [f64],
) -> f64 {
    let k = centroids.len() / dim;
    let mut inertia = 0.0;
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let mut best = (f64::INFINITY, 0);
        for c in 0..k {
            let d = sq_dist(p, &centroids[c * dim..(c + 1) * dim]);
            if d < best.0 {
                best = (d, c);
            }
        }
        assign[i] = best.1;
        dists[i] = best.0;
        inertia += best.0;
    }
    inertia
}

fn repair_empty(
    points: &[f64],
    dim: usize,
    k: usize,
    centroids: &mut [f64],
    assign: &mut [usize],
    dists: &mut [f64],
) {
    let mut counts = vec![0usize; k];
    for &c in assign.iter() {
        counts[c] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let victim = (0..assign.len())
            .filter(|&i| counts[assign[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        let Some(i) = victim else { return };
        counts[assign[i]] -= 1;
        counts[empty] += 1;
        assign[i] = empty;
        dists[i] = 0.0;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(&points[i * dim..(i + 1) * dim]);
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
