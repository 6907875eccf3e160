//! Normal vs ICMT on synthetic logs, averaged over a range of seeds.
//!
//! ```text
//! cargo run --release --example compare -- '<config json>' <first seed> <n seeds> [users items per_user]
//! ```
//!
//! The JSON overrides `TrainConfig` defaults for both methods (the method and
//! seed fields are replaced per run). Per-seed lines go to stderr; the summary
//! line on stdout reports test-split recall, tail recall, APT and coverage at
//! N = 20 and the ICMT tail-cluster weight at the final evaluation.

use icmt::data::{parse_interactions, partition_head_tail, split_dataset, PAPER_RATIOS};
use icmt::metrics::{evaluate, EvalTarget};
use icmt::model::NormalizedAdjacency;
use icmt::synth::{generate, SynthConfig};
use icmt::trainer::{train, Method, TrainConfig};

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: Option<T>) -> T {
    match args.get(i) {
        Some(s) => s.parse().unwrap_or_else(|_| panic!("bad argument {s:?}")),
        None => default.expect("usage: compare '<config json>' <first seed> <n seeds> [users items per_user]"),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let base = TrainConfig::from_json(args.get(1).map_or("{}", String::as_str)).expect("config");
    let first: u64 = arg(&args, 2, Some(0));
    let n_seeds: u64 = arg(&args, 3, Some(5));
    let defaults = SynthConfig::default();
    let n_users: usize = arg(&args, 4, Some(defaults.n_users));
    let n_items: usize = arg(&args, 5, Some(defaults.n_items));
    let per_user: usize = arg(&args, 6, Some(defaults.per_user));

    // [normal, icmt] x [recall, recall_tail, apt, coverage, tail weight]
    let mut mean = [[0.0f64; 5]; 2];
    for seed in first..first + n_seeds {
        let synth = SynthConfig { seed, n_users, n_items, per_user, ..defaults.clone() };
        let text: String = generate(&synth).expect("synth").iter().map(|(u, i)| format!("{u},{i}\n")).collect();
        let ds = parse_interactions(&text, 1).expect("parse");
        let split = split_dataset(&ds, PAPER_RATIOS, seed).expect("split");
        let adj = NormalizedAdjacency::new(split.n_users, split.n_items, &split.train);
        let partition = partition_head_tail(&split.train_dataset());
        let mut line = format!("seed {seed}");
        for (slot, method) in [Method::Normal, Method::Icmt].into_iter().enumerate() {
            let out = train(&TrainConfig { method, seed, ..base.clone() }, &split).expect("train");
            let r = evaluate(&out.params, &adj, &split, &partition, 20, EvalTarget::Test, true);
            let tw = out.history.records.last().map_or(1.0, |rec| rec.mean_tail_weight);
            for (acc, v) in mean[slot].iter_mut().zip([r.recall, r.recall_tail, r.apt, r.coverage, tw]) {
                *acc += v / n_seeds as f64;
            }
            line += &format!(
                " | {method:?} R {:.4} RT {:.4} APT {:.4} Cov {:.4} tw {tw:.3} best {:?}/{}",
                r.recall,
                r.recall_tail,
                r.apt,
                r.coverage,
                out.history.best,
                out.history.records.len()
            );
        }
        eprintln!("{line}");
    }
    for (name, m) in ["normal", "icmt"].iter().zip(&mean) {
        println!("{name}: R {:.4} RT {:.4} APT {:.4} Cov {:.4} tw {:.3}", m[0], m[1], m[2], m[3], m[4]);
    }
}
