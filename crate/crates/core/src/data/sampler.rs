use rand::seq::SliceRandom;
use rand::Rng;

use super::DataSplit;
use crate::error::{Error, Result};

/// One minibatch of labelled pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
    pub ordinal: usize,
}

/// Shuffles training positives once per epoch and draws uniform negatives
/// for each of them.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    batch_size: usize,
    neg_ratio: usize,
    n_items: usize,
    train: Vec<(usize, usize)>,
    /// All known positives per user (train, validation and test), sorted.
    known: Vec<Vec<usize>>,
}

impl BatchSampler {
    pub fn new(split: &DataSplit, batch_size: usize, neg_ratio: usize) -> Result<Self> {
        if split.train.is_empty() {
            return Err(Error::Precondition("training set is empty".into()));
        }
        if batch_size == 0 {
            return Err(Error::Precondition("batch_size must be positive".into()));
        }
        Ok(Self {
            batch_size,
            neg_ratio,
            n_items: split.n_items,
            train: split.train.clone(),
            known: split.all_items(),
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.train.len().div_ceil(self.batch_size)
    }

    /// All batches of one epoch, in order. `first_ordinal` numbers the first.
    pub fn epoch<R: Rng>(&self, rng: &mut R, first_ordinal: usize) -> Vec<TrainBatch> {
        let mut order = self.train.clone();
        order.shuffle(rng);
        order
            .chunks(self.batch_size)
            .enumerate()
            .map(|(k, chunk)| self.sample_batch(chunk, first_ordinal + k, rng))
            .collect()
    }

    /// Attaches `neg_ratio` negatives to each positive in `chunk`. Users who
    /// already interacted with every item are dropped from the batch.
    pub fn sample_batch<R: Rng>(
        &self,
        chunk: &[(usize, usize)],
        ordinal: usize,
        rng: &mut R,
    ) -> TrainBatch {
        let mut positives = Vec::with_capacity(chunk.len());
        let mut negatives = Vec::with_capacity(chunk.len() * self.neg_ratio);
        for &(u, i) in chunk {
            let seen = &self.known[u];
            if self.neg_ratio > 0 && seen.len() >= self.n_items {
                log::warn!("user {u} interacted with every item; skipping negative sampling");
                continue;
            }
            positives.push((u, i));
            for _ in 0..self.neg_ratio {
                loop {
                    let j = rng.random_range(0..self.n_items);
                    if seen.binary_search(&j).is_err() {
                        negatives.push((u, j));
                        break;
                    }
                }
            }
        }
        TrainBatch {
            positives,
            negatives,
            ordinal,
        }
    }
}
