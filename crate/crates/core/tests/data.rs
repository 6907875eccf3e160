mod common;

use std::collections::BTreeSet;

use common::{brute_force_k_core, zipf_log, SplitMix};
use icmt::data::{
    load_interactions, parse_interactions, partition_head_tail, read_split, split_dataset, write_split, BatchSampler,
    InteractionDataset, PAPER_RATIOS,
};
use icmt::rng::{stream, Stream};
use icmt::Error;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn to_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(u, i)| format!("{u},{i}\n")).collect()
}

#[test]
fn three_records_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.txt");
    std::fs::write(&path, "# user,item\na,x\na\ty\nb,x,5.0\n").unwrap();
    let ds = load_interactions(&path, 1).unwrap();
    assert_eq!((ds.n_users, ds.n_items), (2, 2));
    // x is densified first
    assert_eq!(ds.popularity, vec![2, 1]);
}

#[test]
fn singleton_item_pruned_iteratively() {
    // z appears once; dropping it leaves c with one record, which cascades.
    let text = "a,x\na,y\nb,x\nb,y\nc,z\nc,x\n";
    let ds = parse_interactions(text, 2).unwrap();
    assert_eq!((ds.n_users, ds.n_items, ds.len()), (2, 2, 4));
}

#[test]
fn malformed_record_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "a,x\nonlyonetoken\n").unwrap();
    match load_interactions(&path, 1) {
        Err(Error::MalformedRecord { line, path: p, .. }) => {
            assert_eq!(line, 2);
            assert_eq!(p, path);
        }
        other => panic!("expected malformed record, got {other:?}"),
    }
}

#[test]
fn empty_after_filtering() {
    assert!(matches!(parse_interactions("a,x\n", 2), Err(Error::EmptyDataset)));
    assert!(matches!(parse_interactions("", 1), Err(Error::EmptyDataset)));
}

#[test]
fn k_core_matches_reference_on_zipf_log() {
    let mut rng = SplitMix(0x2C0E);
    let log = zipf_log(&mut rng, 10_000, 400, 500, 1.2);
    let ds = parse_interactions(&to_text(&log), 5).unwrap();
    let (users, items, pairs) = brute_force_k_core(&log, 5);
    assert_eq!((ds.n_users, ds.n_items, ds.len()), (users, items, pairs));
    let mut ucount = vec![0; ds.n_users];
    for &(u, _) in &ds.positives {
        ucount[u] += 1;
    }
    assert!(ucount.iter().all(|&c| c >= 5));
    assert!(ds.popularity.iter().all(|&c| c >= 5));
}

proptest! {
    #[test]
    fn k_core_matches_reference_on_random_logs(
        raw in proptest::collection::vec((0u8..12, 0u8..15), 1..150),
        k in 1usize..5,
    ) {
        let log: Vec<(String, String)> = raw.iter().map(|(u, i)| (format!("u{u}"), format!("i{i}"))).collect();
        let (users, items, pairs) = brute_force_k_core(&log, k);
        match parse_interactions(&to_text(&log), k) {
            Ok(ds) => prop_assert_eq!((ds.n_users, ds.n_items, ds.len()), (users, items, pairs)),
            Err(Error::EmptyDataset) => prop_assert_eq!(pairs, 0),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn split_is_a_partition(
        raw in proptest::collection::vec((0usize..15, 0usize..20), 1..200),
        seed in 0u64..1000,
    ) {
        let ds = InteractionDataset::from_pairs(15, 20, raw).unwrap();
        let split = split_dataset(&ds, PAPER_RATIOS, seed).unwrap();
        let t: BTreeSet<_> = split.train.iter().copied().collect();
        let v: BTreeSet<_> = split.validation.iter().copied().collect();
        let s: BTreeSet<_> = split.test.iter().copied().collect();
        prop_assert_eq!(t.len() + v.len() + s.len(), ds.len());
        prop_assert!(t.is_disjoint(&v) && t.is_disjoint(&s) && v.is_disjoint(&s));
        let union: BTreeSet<_> = t.union(&v).chain(s.iter()).copied().collect();
        prop_assert_eq!(union, ds.positives.iter().copied().collect::<BTreeSet<_>>());
        // every user with positives keeps one for training
        for &(u, _) in &ds.positives {
            prop_assert!(split.train.iter().any(|p| p.0 == u));
        }
    }

    #[test]
    fn head_dominates_tail(pops in proptest::collection::vec(0u32..30, 1..60)) {
        let n = pops.len();
        let pairs: Vec<(usize, usize)> = pops
            .iter()
            .enumerate()
            .flat_map(|(i, &p)| (0..p as usize).map(move |u| (u, i)))
            .collect();
        let ds = InteractionDataset::from_pairs(30, n, pairs).unwrap();
        let part = partition_head_tail(&ds);
        prop_assert_eq!(part.head.len(), (0.2 * n as f64).ceil() as usize);
        prop_assert_eq!(part.head.len() + part.tail.len(), n);
        let min_head = part.head.iter().map(|&i| pops[i]).min().unwrap();
        let max_tail = part.tail.iter().map(|&i| pops[i]).max().unwrap_or(0);
        prop_assert!(max_tail <= min_head);
        for i in 0..n {
            prop_assert_eq!(part.is_tail(i), !part.head.contains(&i));
        }
    }
}

#[test]
fn per_user_split_counts() {
    let mut pairs: Vec<(usize, usize)> = (0..10).map(|i| (0, i)).collect();
    pairs.push((1, 3));
    let ds = InteractionDataset::from_pairs(2, 10, pairs).unwrap();
    let split = split_dataset(&ds, PAPER_RATIOS, 7).unwrap();
    let count = |set: &[(usize, usize)], u: usize| set.iter().filter(|p| p.0 == u).count();
    assert_eq!((count(&split.train, 0), count(&split.validation, 0), count(&split.test, 0)), (8, 1, 1));
    assert_eq!((count(&split.train, 1), count(&split.validation, 1), count(&split.test, 1)), (1, 0, 0));
}

#[test]
fn split_seed_contract() {
    let pairs: Vec<(usize, usize)> = (0..30).flat_map(|u| (0..20).map(move |k| (u, (u + 3 * k) % 40))).collect();
    let ds = InteractionDataset::from_pairs(30, 40, pairs).unwrap();
    let a = split_dataset(&ds, PAPER_RATIOS, 1).unwrap();
    assert_eq!(a, split_dataset(&ds, PAPER_RATIOS, 1).unwrap());
    let b = split_dataset(&ds, PAPER_RATIOS, 2).unwrap();
    assert_ne!(a.test, b.test);
    for u in 0..30 {
        let n = |s: &[(usize, usize)]| s.iter().filter(|p| p.0 == u).count();
        assert_eq!((n(&a.train), n(&a.validation), n(&a.test)), (n(&b.train), n(&b.validation), n(&b.test)));
    }
}

#[test]
fn bad_ratios_rejected() {
    let ds = InteractionDataset::from_pairs(1, 2, vec![(0, 0), (0, 1)]).unwrap();
    assert!(matches!(split_dataset(&ds, [0.8, 0.1, 0.2], 0), Err(Error::InvalidRatios(_))));
}

#[test]
fn split_round_trips_through_files() {
    let pairs: Vec<(usize, usize)> = (0..12).flat_map(|u| (0..6).map(move |k| (u, (u + k) % 9))).collect();
    let ds = InteractionDataset::from_pairs(12, 9, pairs).unwrap();
    let split = split_dataset(&ds, PAPER_RATIOS, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), &split).unwrap();
    assert_eq!(read_split(dir.path()).unwrap(), split);
}

#[test]
fn head_tail_examples() {
    let ten = InteractionDataset::from_pairs(1, 10, vec![(0, 4)]).unwrap();
    assert_eq!(partition_head_tail(&ten).head.len(), 2);
    let one = InteractionDataset::from_pairs(1, 1, vec![(0, 0)]).unwrap();
    assert_eq!(partition_head_tail(&one).head, vec![0]);
    let flat = InteractionDataset::from_pairs(1, 10, (0..10).map(|i| (0, i)).collect()).unwrap();
    assert_eq!(partition_head_tail(&flat).head, vec![0, 1]);
}

fn synthetic_split() -> icmt::data::DataSplit {
    let mut rng = SplitMix(0x5A3);
    let log = zipf_log(&mut rng, 6000, 120, 150, 1.0);
    let ds = parse_interactions(&to_text(&log), 2).unwrap();
    split_dataset(&ds, PAPER_RATIOS, 3).unwrap()
}

#[test]
fn batch_shapes() {
    let split = synthetic_split();
    let sampler = BatchSampler::new(&split, 512, 1).unwrap();
    let mut rng = stream(3, Stream::Sampling);
    let batches = sampler.epoch(&mut rng, 0);
    assert_eq!(batches[0].positives.len(), 512);
    assert_eq!(batches[0].negatives.len(), 512);
    assert_eq!(batches.iter().map(|b| b.positives.len()).sum::<usize>(), split.train.len());
    let none = BatchSampler::new(&split, 64, 0).unwrap().epoch(&mut rng, 0);
    assert!(none.iter().all(|b| b.negatives.is_empty()));
}

#[test]
fn negatives_are_pure_and_uniform() {
    let split = synthetic_split();
    let known: BTreeSet<(usize, usize)> = split.train.iter().chain(&split.validation).chain(&split.test).copied().collect();
    let sampler = BatchSampler::new(&split, 1024, 1).unwrap();
    let mut rng = stream(11, Stream::Sampling);

    // purity over whole epochs
    for epoch in 0..3 {
        for b in sampler.epoch(&mut rng, epoch * 100) {
            assert!(b.negatives.iter().all(|p| !known.contains(p)));
        }
    }

    // uniformity for one user's 1e5 draws
    let u = split.train[0].0;
    let eligible: Vec<usize> = (0..split.n_items).filter(|&i| !known.contains(&(u, i))).collect();
    let chunk = vec![split.train[0]; 100_000];
    let batch = sampler.sample_batch(&chunk, 0, &mut rng);
    assert_eq!(batch.negatives.len(), 100_000);
    let mut freq = vec![0f64; split.n_items];
    for &(_, i) in &batch.negatives {
        freq[i] += 1.0;
    }
    let expected = 100_000.0 / eligible.len() as f64;
    let chi2: f64 = eligible.iter().map(|&i| (freq[i] - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new((eligible.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi-square {chi2} over {} cells, p = {p_value}", eligible.len());
    assert!((0..split.n_items).filter(|i| !eligible.contains(i)).all(|i| freq[i] == 0.0));
}

#[test]
fn saturated_user_is_skipped() {
    let ds = InteractionDataset::from_pairs(2, 3, vec![(0, 0), (0, 1), (0, 2), (1, 0)]).unwrap();
    let split = split_dataset(&ds, PAPER_RATIOS, 0).unwrap();
    let sampler = BatchSampler::new(&split, 8, 1).unwrap();
    let mut rng = stream(0, Stream::Sampling);
    let batch = sampler.sample_batch(&[(0, 0), (1, 0)], 0, &mut rng);
    assert_eq!(batch.positives, vec![(1, 0)]);
    assert_eq!(batch.negatives.len(), 1);
}
