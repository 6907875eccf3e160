//! Base recommenders with a disentangled popularity term.
//!
//! Both model kinds score a pair as `<v_u, v_i> + lambda_p <v', v_i>` during
//! training and drop the popularity half at inference. PMF representations
//! are table rows; LGC representations are the mean of `L` rounds of
//! normalized neighbour aggregation over the training graph.

mod checkpoint;
mod graph;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use graph::NormalizedAdjacency;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream};

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_LAMBDA_P: f64 = 2e-3;
pub const INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pmf,
    Lgc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub dim: usize,
    pub n_layers: usize,
    pub lambda_p: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Pmf,
            dim: DEFAULT_DIM,
            n_layers: DEFAULT_LAYERS,
            lambda_p: DEFAULT_LAMBDA_P,
        }
    }
}

/// Embedding tables. `user_emb` is the shared parameter group; `item_emb`
/// rows and `pop_emb` are item-specific.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub dim: usize,
    pub n_layers: usize,
    pub lambda_p: f64,
    pub n_users: usize,
    pub n_items: usize,
    /// Row-major `n_users x dim`.
    pub user_emb: Vec<f64>,
    /// Row-major `n_items x dim`.
    pub item_emb: Vec<f64>,
    /// The popularity embedding `v'`.
    pub pop_emb: Vec<f64>,
}

/// Entries i.i.d. `N(0, 0.01^2)`, drawn in table order (users, items, `v'`).
pub fn init_params(config: &ModelConfig, n_users: usize, n_items: usize, seed: u64) -> ModelParams {
    assert!(config.dim >= 1, "embedding dimension must be positive");
    let mut rng = stream(seed, Stream::Init);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(&mut rng)).collect() };
    let user_emb = draw(n_users * config.dim);
    let item_emb = draw(n_items * config.dim);
    let pop_emb = draw(config.dim);
    ModelParams {
        kind: config.kind,
        dim: config.dim,
        n_layers: match config.kind {
            ModelKind::Pmf => 0,
            ModelKind::Lgc => config.n_layers,
        },
        lambda_p: config.lambda_p,
        n_users,
        n_items,
        user_emb,
        item_emb,
        pop_emb,
    }
}

impl ModelParams {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.kind,
            dim: self.dim,
            n_layers: self.n_layers,
            lambda_p: self.lambda_p,
        }
    }

    pub fn user_row(&self, u: usize) -> &[f64] {
        &self.user_emb[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_row(&self, i: usize) -> &[f64] {
        &self.item_emb[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.user_emb
            .iter()
            .chain(&self.item_emb)
            .chain(&self.pop_emb)
            .all(|x| x.is_finite())
    }

    /// Final user and item representations for every node.
    pub fn representations(&self, adj: &NormalizedAdjacency) -> Representations {
        let (users, items) = match self.kind {
            ModelKind::Pmf => (self.user_emb.clone(), self.item_emb.clone()),
            ModelKind::Lgc => adj.propagate(self.n_layers, &self.user_emb, &self.item_emb, self.dim),
        };
        Representations {
            dim: self.dim,
            users,
            items,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Representations {
    pub dim: usize,
    pub users: Vec<f64>,
    pub items: Vec<f64>,
}

impl Representations {
    pub fn user(&self, u: usize) -> &[f64] {
        &self.users[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.items[i * self.dim..(i + 1) * self.dim]
    }

    pub fn n_items(&self) -> usize {
        self.items.len() / self.dim
    }

    /// Interest score `<v_u, v_i>`; the only term used at inference.
    pub fn interest(&self, u: usize, i: usize) -> f64 {
        dot(self.user(u), self.item(i))
    }

    /// Training score `<v_u, v_i> + lambda_p <v', v_i>`.
    pub fn training_score(&self, pop_emb: &[f64], lambda_p: f64, u: usize, i: usize) -> f64 {
        let vi = self.item(i);
        dot(self.user(u), vi) + lambda_p * dot(pop_emb, vi)
    }
}

pub fn user_repr(p: &ModelParams, adj: &NormalizedAdjacency, u: usize) -> Vec<f64> {
    p.representations(adj).user(u).to_vec()
}

pub fn item_repr(p: &ModelParams, adj: &NormalizedAdjacency, i: usize) -> Vec<f64> {
    p.representations(adj).item(i).to_vec()
}

pub fn predict_icmt(p: &ModelParams, adj: &NormalizedAdjacency, u: usize, i: usize) -> f64 {
    p.representations(adj)
        .training_score(&p.pop_emb, p.lambda_p, u, i)
}

pub fn predict_inference(p: &ModelParams, adj: &NormalizedAdjacency, u: usize, i: usize) -> f64 {
    p.representations(adj).interest(u, i)
}

/// Closed-form representation Jacobians for one `(u, i)` pair.
///
/// Both are multiples of the `dim x dim` identity: `dv_u/de_i = c * I` where
/// `c` is the propagation weight from item `i` into user `u`, and
/// `dv_i/dv' = 0` since `v'` only enters the score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprJacobians {
    pub dim: usize,
    pub user_wrt_item: f64,
    pub item_wrt_pop: f64,
}

impl ReprJacobians {
    /// `||dv_u/de_i||_F^2 + ||dv_i/dv'||_F^2`.
    pub fn frobenius_sq(&self) -> f64 {
        let d = self.dim as f64;
        d * (self.user_wrt_item * self.user_wrt_item + self.item_wrt_pop * self.item_wrt_pop)
    }

    /// Dense row-major `dim x dim` form of `dv_u/de_i`.
    pub fn user_wrt_item_dense(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim * self.dim];
        for k in 0..self.dim {
            m[k * self.dim + k] = self.user_wrt_item;
        }
        m
    }
}

pub fn repr_jacobians(p: &ModelParams, adj: &NormalizedAdjacency, u: usize, i: usize) -> ReprJacobians {
    let user_wrt_item = match p.kind {
        ModelKind::Pmf => 0.0,
        ModelKind::Lgc => adj.user_item_influence(p.n_layers, u)[i],
    };
    ReprJacobians {
        dim: p.dim,
        user_wrt_item,
        item_wrt_pop: 0.0,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
