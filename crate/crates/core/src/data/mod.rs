//! Interaction logs, train/validation/test splits, head/tail partition and
//! negative sampling.

mod io;
mod load;
mod sampler;
mod split;

pub use io::{read_split, write_split, SplitHeader};
pub use load::{load_interactions, parse_interactions, DEFAULT_MIN_CORE};
pub use sampler::{BatchSampler, TrainBatch};
pub use split::{partition_head_tail, split_dataset, DataSplit, HeadTailPartition, PAPER_RATIOS};

use crate::error::{Error, Result};

/// Implicit-feedback interactions with dense user and item ids.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub n_users: usize,
    pub n_items: usize,
    /// Sorted, duplicate-free `(user, item)` pairs.
    pub positives: Vec<(usize, usize)>,
    /// Number of positives per item.
    pub popularity: Vec<u32>,
}

impl InteractionDataset {
    /// Builds a dataset from raw pairs, dropping duplicates.
    pub fn from_pairs(
        n_users: usize,
        n_items: usize,
        mut pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        let mut popularity = vec![0u32; n_items];
        for &(u, i) in &pairs {
            if u >= n_users || i >= n_items {
                return Err(Error::Precondition(format!(
                    "pair ({u}, {i}) outside {n_users} users x {n_items} items"
                )));
            }
            popularity[i] += 1;
        }
        Ok(Self {
            n_users,
            n_items,
            positives: pairs,
            popularity,
        })
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    /// Items of each user, sorted ascending.
    pub fn user_items(&self) -> Vec<Vec<usize>> {
        user_items(self.n_users, &self.positives)
    }
}

pub(crate) fn user_items(n_users: usize, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_users];
    for &(u, i) in pairs {
        out[u].push(i);
    }
    for items in &mut out {
        items.sort_unstable();
    }
    out
}
