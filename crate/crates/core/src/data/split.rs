use rand::seq::SliceRandom;

use super::{user_items, InteractionDataset};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Train / validation / test proportions.
pub const PAPER_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

const HEAD_FRACTION: f64 = 0.2;

/// Disjoint train / validation / test sets of positive pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub n_users: usize,
    pub n_items: usize,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<(usize, usize)>,
    pub validation: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
}

impl DataSplit {
    /// Training positives as a dataset; its popularity is the training count.
    pub fn train_dataset(&self) -> InteractionDataset {
        InteractionDataset::from_pairs(self.n_users, self.n_items, self.train.clone())
            .expect("split pairs are in range")
    }

    pub fn train_items(&self) -> Vec<Vec<usize>> {
        user_items(self.n_users, &self.train)
    }

    pub fn validation_items(&self) -> Vec<Vec<usize>> {
        user_items(self.n_users, &self.validation)
    }

    pub fn test_items(&self) -> Vec<Vec<usize>> {
        user_items(self.n_users, &self.test)
    }

    /// Every positive of every user regardless of split, sorted.
    pub fn all_items(&self) -> Vec<Vec<usize>> {
        let mut all = self.train.clone();
        all.extend_from_slice(&self.validation);
        all.extend_from_slice(&self.test);
        user_items(self.n_users, &all)
    }
}

/// Per-user random split. Rounded validation and test counts, train takes the
/// remainder and always keeps at least one positive.
pub fn split_dataset(ds: &InteractionDataset, ratios: [f64; 3], seed: u64) -> Result<DataSplit> {
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 || ratios.iter().any(|r| *r < 0.0) {
        return Err(Error::InvalidRatios(total));
    }
    let mut rng = stream(seed, Stream::Split);
    let mut split = DataSplit {
        n_users: ds.n_users,
        n_items: ds.n_items,
        seed,
        ratios,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (u, mut items) in ds.user_items().into_iter().enumerate() {
        let n = items.len();
        if n == 0 {
            continue;
        }
        items.shuffle(&mut rng);
        let (mut n_val, mut n_test) = if n >= 3 {
            (
                (ratios[1] * n as f64).round() as usize,
                (ratios[2] * n as f64).round() as usize,
            )
        } else {
            (0, 0)
        };
        while n_val + n_test >= n {
            if n_test >= n_val && n_test > 0 {
                n_test -= 1;
            } else {
                n_val -= 1;
            }
        }
        let n_train = n - n_val - n_test;
        split.train.extend(items[..n_train].iter().map(|&i| (u, i)));
        split
            .validation
            .extend(items[n_train..n_train + n_val].iter().map(|&i| (u, i)));
        split
            .test
            .extend(items[n_train + n_val..].iter().map(|&i| (u, i)));
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Head items are the top 20% of the catalogue by popularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadTailPartition {
    pub head: Vec<usize>,
    pub tail: Vec<usize>,
    is_tail: Vec<bool>,
}

impl HeadTailPartition {
    pub fn is_tail(&self, item: usize) -> bool {
        self.is_tail[item]
    }

    pub fn n_items(&self) -> usize {
        self.is_tail.len()
    }

    /// Every item treated as tail.
    pub fn all_tail(n_items: usize) -> Self {
        Self {
            head: Vec::new(),
            tail: (0..n_items).collect(),
            is_tail: vec![true; n_items],
        }
    }
}

/// Sorts items by (popularity desc, id asc); the first `ceil(0.2 n)` are head.
/// Callers pass the training-split dataset.
pub fn partition_head_tail(ds: &InteractionDataset) -> HeadTailPartition {
    let n = ds.n_items;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ds.popularity[b].cmp(&ds.popularity[a]).then(a.cmp(&b)));
    let n_head = (HEAD_FRACTION * n as f64).ceil() as usize;
    let mut is_tail = vec![true; n];
    for &i in &order[..n_head] {
        is_tail[i] = false;
    }
    let mut head = order[..n_head].to_vec();
    let mut tail = order[n_head..].to_vec();
    head.sort_unstable();
    tail.sort_unstable();
    HeadTailPartition {
        head,
        tail,
        is_tail,
    }
}
