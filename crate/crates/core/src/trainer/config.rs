use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelKind, DEFAULT_DIM, DEFAULT_LAMBDA_P, DEFAULT_LAYERS};

/// Values searched for each of `lambda_p`, `lambda_c` and `lambda_1`.
pub const HYPERPARAM_GRID: [f64; 5] = [1e-4, 1e-3, 2e-3, 5e-3, 1e-2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Cluster-wise Pareto-efficient weighting with popularity disentanglement.
    Icmt,
    /// Plain BCE training, every sample weighted 1.
    Normal,
    /// BCE with positives weighted by inverse item popularity.
    Ips,
}

/// Training hyperparameters. Unknown JSON keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub method: Method,
    pub model_kind: ModelKind,
    pub dim: usize,
    pub n_layers: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda_p: f64,
    pub lambda_c: f64,
    pub lambda_1: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub neg_ratio: usize,
    /// Re-run k-means every this many batches.
    pub recluster_every: usize,
    pub eval_every_batches: usize,
    /// Evaluations without a validation NDCG improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub eval_n: usize,
    /// Hide a user's known positives from the candidate ranking.
    pub exclude_seen: bool,
    pub pe_max_iter: usize,
    pub pe_tol: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    /// Keep every PE-solver step for a debug trace.
    pub debug_pe_trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Icmt,
            model_kind: ModelKind::Pmf,
            dim: DEFAULT_DIM,
            n_layers: DEFAULT_LAYERS,
            k: crate::cluster::DEFAULT_K,
            lambda_p: DEFAULT_LAMBDA_P,
            lambda_c: 1e-3,
            lambda_1: 1e-4,
            lr: 1e-3,
            batch_size: 512,
            neg_ratio: 1,
            recluster_every: 1,
            eval_every_batches: 3000,
            patience: 10,
            max_epochs: 100,
            seed: 0,
            eval_n: crate::metrics::DEFAULT_N,
            exclude_seen: true,
            pe_max_iter: crate::pareto::DEFAULT_MAX_ITER,
            pe_tol: crate::pareto::DEFAULT_TOL,
            kmeans_max_iter: crate::cluster::DEFAULT_MAX_ITER,
            kmeans_tol: crate::cluster::DEFAULT_TOL,
            debug_pe_trace: false,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.k == 0 {
            return fail("K must be at least 1");
        }
        for (name, v) in [
            ("lambda_p", self.lambda_p),
            ("lambda_c", self.lambda_c),
            ("lambda_1", self.lambda_1),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if self.batch_size == 0 || self.recluster_every == 0 || self.eval_every_batches == 0 {
            return fail("batch_size, recluster_every and eval_every_batches must be positive");
        }
        if self.eval_n == 0 {
            return fail("eval_n must be positive");
        }
        Ok(())
    }

    /// Model settings actually used: the baselines have no popularity term.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.model_kind,
            dim: self.dim,
            n_layers: self.n_layers,
            lambda_p: match self.method {
                Method::Icmt => self.lambda_p,
                Method::Normal | Method::Ips => 0.0,
            },
        }
    }

    /// Number of loss clusters the method optimises.
    pub fn effective_k(&self) -> usize {
        match self.method {
            Method::Icmt => self.k,
            Method::Normal | Method::Ips => 1,
        }
    }

    /// Every combination of the regularisation grid on top of `self`.
    pub fn grid(&self) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(HYPERPARAM_GRID.len().pow(3));
        for &lambda_p in &HYPERPARAM_GRID {
            for &lambda_c in &HYPERPARAM_GRID {
                for &lambda_1 in &HYPERPARAM_GRID {
                    out.push(TrainConfig {
                        lambda_p,
                        lambda_c,
                        lambda_1,
                        ..self.clone()
                    });
                }
            }
        }
        out
    }
}
