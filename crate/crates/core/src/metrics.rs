//! Top-N ranking metrics, overall and restricted to tail items.

use serde::{Deserialize, Serialize};

use crate::data::{DataSplit, HeadTailPartition};
use crate::model::{ModelParams, NormalizedAdjacency, Representations};

pub const DEFAULT_N: usize = 20;

/// Top-`n` items by inference score, skipping `exclude` (sorted ascending).
/// Ties go to the lower item id.
pub fn rank_top_n(scores: &[f64], n: usize, exclude: &[usize]) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..scores.len())
        .filter(|i| exclude.binary_search(i).is_err())
        .collect();
    let by_score = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let n = n.min(candidates.len());
    if n == 0 {
        return Vec::new();
    }
    if n < candidates.len() {
        candidates.select_nth_unstable_by(n - 1, by_score);
        candidates.truncate(n);
    }
    candidates.sort_by(by_score);
    candidates
}

/// Inference scores of user `u` against every item.
pub fn user_scores(reps: &Representations, u: usize) -> Vec<f64> {
    (0..reps.n_items()).map(|i| reps.interest(u, i)).collect()
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

fn idcg(n_truth: usize, n: usize) -> f64 {
    (1..=n_truth.min(n)).map(discount).sum()
}

/// `|list ∩ truth| / |truth|`; `truth` sorted ascending and nonempty.
pub fn recall_at_n(list: &[usize], truth: &[usize]) -> f64 {
    let hits = list.iter().filter(|i| truth.binary_search(i).is_ok()).count();
    hits as f64 / truth.len() as f64
}

pub fn ndcg_at_n(list: &[usize], truth: &[usize]) -> f64 {
    let dcg: f64 = list
        .iter()
        .enumerate()
        .filter(|(_, i)| truth.binary_search(i).is_ok())
        .map(|(r, _)| discount(r + 1))
        .sum();
    dcg / idcg(truth.len(), list.len())
}

/// Recall and NDCG against the tail part of `truth`, with hits taken at their
/// ranks in the full list. `None` when the user has no tail truth.
pub fn tail_metrics(
    list: &[usize],
    truth: &[usize],
    partition: &HeadTailPartition,
) -> Option<(f64, f64)> {
    let tail_truth: Vec<usize> = truth.iter().copied().filter(|&i| partition.is_tail(i)).collect();
    if tail_truth.is_empty() {
        return None;
    }
    Some((recall_at_n(list, &tail_truth), ndcg_at_n(list, &tail_truth)))
}

/// Catalogue coverage of the union of lists, and mean tail share per list.
pub fn coverage_apt<L: AsRef<[usize]>>(
    lists: &[L],
    partition: &HeadTailPartition,
    n_items: usize,
) -> (f64, f64) {
    let mut seen = vec![false; n_items];
    let mut apt = 0.0;
    let mut n_lists = 0usize;
    for list in lists {
        let list = list.as_ref();
        for &i in list {
            seen[i] = true;
        }
        if !list.is_empty() {
            let tail = list.iter().filter(|&&i| partition.is_tail(i)).count();
            apt += tail as f64 / list.len() as f64;
        }
        n_lists += 1;
    }
    let coverage = seen.iter().filter(|&&s| s).count() as f64 / n_items as f64;
    let apt = if n_lists == 0 { 0.0 } else { apt / n_lists as f64 };
    (coverage, apt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub recall_tail: f64,
    pub ndcg_tail: f64,
    pub coverage: f64,
    pub apt: f64,
    pub n_eval_users: usize,
    pub head_size: usize,
    pub tail_size: usize,
}

/// Which positives count as truth and which are hidden from ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTarget {
    /// Truth = validation, exclude train.
    Validation,
    /// Truth = test, exclude train and validation.
    Test,
}

/// Scores every user with test (or validation) truth and aggregates metrics in
/// ascending user order. `exclude_seen = false` ranks over the whole catalogue.
pub fn evaluate(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    split: &DataSplit,
    partition: &HeadTailPartition,
    n: usize,
    target: EvalTarget,
    exclude_seen: bool,
) -> MetricsReport {
    let reps = params.representations(adj);
    evaluate_reps(&reps, split, partition, n, target, exclude_seen)
}

pub fn evaluate_reps(
    reps: &Representations,
    split: &DataSplit,
    partition: &HeadTailPartition,
    n: usize,
    target: EvalTarget,
    exclude_seen: bool,
) -> MetricsReport {
    let train = split.train_items();
    let validation = split.validation_items();
    let truth_sets = match target {
        EvalTarget::Validation => validation.clone(),
        EvalTarget::Test => split.test_items(),
    };

    let (mut recall, mut ndcg, mut r_tail, mut n_tail) = (0.0, 0.0, 0.0, 0.0);
    let (mut users, mut tail_users) = (0usize, 0usize);
    let mut lists = Vec::new();
    for (u, truth) in truth_sets.iter().enumerate() {
        if truth.is_empty() {
            continue;
        }
        let mut exclude = Vec::new();
        if exclude_seen {
            exclude.extend_from_slice(&train[u]);
            if target == EvalTarget::Test {
                exclude.extend_from_slice(&validation[u]);
            }
            exclude.sort_unstable();
        }
        let list = rank_top_n(&user_scores(reps, u), n, &exclude);
        recall += recall_at_n(&list, truth);
        ndcg += ndcg_at_n(&list, truth);
        users += 1;
        if let Some((r, g)) = tail_metrics(&list, truth, partition) {
            r_tail += r;
            n_tail += g;
            tail_users += 1;
        }
        lists.push(list);
    }
    let (coverage, apt) = coverage_apt(&lists, partition, split.n_items);
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    MetricsReport {
        n,
        recall: mean(recall, users),
        ndcg: mean(ndcg, users),
        recall_tail: mean(r_tail, tail_users),
        ndcg_tail: mean(n_tail, tail_users),
        coverage,
        apt,
        n_eval_users: users,
        head_size: partition.head.len(),
        tail_size: partition.tail.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{partition_head_tail, InteractionDataset};

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_top_n(&[0.9, 0.1, 0.5], 2, &[]), vec![0, 2]);
        assert_eq!(rank_top_n(&[0.3; 6], 4, &[]), vec![0, 1, 2, 3]);
        assert_eq!(rank_top_n(&[0.9, 0.1, 0.5], 1, &[0]), vec![2]);
    }

    #[test]
    fn recall_ndcg_examples() {
        assert_eq!(recall_at_n(&[7, 1, 2], &[7]), 1.0);
        assert_eq!(ndcg_at_n(&[7, 1, 2], &[7]), 1.0);
        let mut list: Vec<usize> = (100..120).collect();
        list[2] = 5;
        assert!((ndcg_at_n(&list, &[5]) - 0.5).abs() < 1e-15);
        assert_eq!(recall_at_n(&[1, 2, 9, 10], &[1, 2, 3, 4]), 0.5);
    }

    #[test]
    fn tail_examples() {
        // items 0,1 are head among 10.
        let ds = InteractionDataset::from_pairs(1, 10, vec![(0, 0), (0, 1)]).unwrap();
        let part = partition_head_tail(&ds);
        assert_eq!(tail_metrics(&[0, 1], &[0, 1], &part), None);
        let (r, g) = tail_metrics(&[0, 5, 1], &[0, 5], &part).unwrap();
        assert_eq!(r, 1.0);
        assert!((g - 1.0 / 3f64.log2()).abs() < 1e-15);

        let all = HeadTailPartition::all_tail(10);
        let list = [3, 4, 8];
        let truth = [4, 9];
        assert_eq!(
            tail_metrics(&list, &truth, &all).unwrap(),
            (recall_at_n(&list, &truth), ndcg_at_n(&list, &truth))
        );
    }

    #[test]
    fn coverage_apt_examples() {
        let part = HeadTailPartition::all_tail(10);
        let (cov, _) = coverage_apt(&[vec![1, 2], vec![2, 3]], &part, 10);
        assert!((cov - 0.3).abs() < 1e-15);

        // 25 items: 0..5 are head.
        let ds = InteractionDataset::from_pairs(1, 25, (0..5).map(|i| (0, i)).collect()).unwrap();
        let part = partition_head_tail(&ds);
        let (_, apt) = coverage_apt(&[vec![0, 1, 2, 10, 11], vec![0, 1, 2, 3, 4]], &part, 25);
        assert!((apt - 0.2).abs() < 1e-15);

        let (cov, apt) = coverage_apt(&[vec![0, 1, 2, 3, 4], vec![0, 1, 2, 3, 4]], &part, 25);
        assert_eq!((cov, apt), (0.2, 0.0));
    }
}
