//! Synthetic long-tail interaction logs.
//!
//! Item popularity follows a Zipf law over a seeded random ranking of the
//! catalogue. Users fall into two groups with opposite tastes among tail
//! items, which makes head and tail gradients disagree.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub zipf: f64,
    /// Mean interactions per user; actual counts are uniform on
    /// `[per_user/2, 3*per_user/2]`.
    pub per_user: usize,
    /// Tail items are `1 + a` times as attractive to their group and `1 - a`
    /// to the other group.
    pub affinity: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 300,
            zipf: 1.2,
            per_user: 30,
            affinity: 0.9,
            seed: 0,
        }
    }
}

/// Sorted, duplicate-free `(user, item)` pairs.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<(usize, usize)>> {
    if cfg.n_users == 0 || cfg.n_items == 0 || cfg.per_user == 0 {
        return Err(Error::Precondition("users, items and per-user count must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.affinity) || !cfg.zipf.is_finite() || cfg.zipf < 0.0 {
        return Err(Error::Precondition("affinity must lie in [0, 1) and zipf must be >= 0".into()));
    }
    let mut rng = stream(cfg.seed, Stream::Synth);
    let mut ranking: Vec<usize> = (0..cfg.n_items).collect();
    ranking.shuffle(&mut rng);
    let n_head = (0.2 * cfg.n_items as f64).ceil() as usize;

    // (item, weight for group 0, weight for group 1)
    let catalogue: Vec<(usize, [f64; 2])> = ranking
        .iter()
        .enumerate()
        .map(|(rank, &item)| {
            let base = ((rank + 1) as f64).powf(-cfg.zipf);
            let w = if rank < n_head {
                [base, base]
            } else if rank % 2 == 0 {
                [base * (1.0 + cfg.affinity), base * (1.0 - cfg.affinity)]
            } else {
                [base * (1.0 - cfg.affinity), base * (1.0 + cfg.affinity)]
            };
            (item, w)
        })
        .collect();

    let lo = (cfg.per_user / 2).max(1);
    let hi = (cfg.per_user + cfg.per_user / 2).max(lo);
    let mut pairs = Vec::new();
    for u in 0..cfg.n_users {
        let group = u % 2;
        let count = rng.random_range(lo..=hi).min(cfg.n_items);
        let picked = catalogue
            .choose_multiple_weighted(&mut rng, count, |c| c.1[group])
            .expect("weights are finite and positive");
        pairs.extend(picked.map(|c| (u, c.0)));
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

pub fn write_interactions(path: &Path, cfg: &SynthConfig, pairs: &[(usize, usize)]) -> Result<()> {
    let mut out = String::with_capacity(pairs.len() * 10 + 80);
    writeln!(
        out,
        "# synthetic users={} items={} zipf={} seed={}",
        cfg.n_users, cfg.n_items, cfg.zipf, cfg.seed
    )
    .unwrap();
    for (u, i) in pairs {
        writeln!(out, "{u},{i}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
