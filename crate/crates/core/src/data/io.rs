use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataSplit;
use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.txt";
pub const VALIDATION_FILE: &str = "validation.txt";
pub const TEST_FILE: &str = "test.txt";
pub const HEADER_FILE: &str = "split.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitHeader {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub n_users: usize,
    pub n_items: usize,
}

/// Writes `train.txt`, `validation.txt`, `test.txt` (`user_id,item_id` lines)
/// and the `split.json` header into `dir`.
pub fn write_split(dir: &Path, split: &DataSplit) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, pairs) in [
        (TRAIN_FILE, &split.train),
        (VALIDATION_FILE, &split.validation),
        (TEST_FILE, &split.test),
    ] {
        let mut out = String::with_capacity(pairs.len() * 10);
        for (u, i) in pairs {
            writeln!(out, "{u},{i}").unwrap();
        }
        let path = dir.join(name);
        std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    }
    let header = SplitHeader {
        seed: split.seed,
        ratios: split.ratios,
        n_users: split.n_users,
        n_items: split.n_items,
    };
    let path = dir.join(HEADER_FILE);
    let mut json = serde_json::to_string_pretty(&header)?;
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn read_split(dir: &Path) -> Result<DataSplit> {
    let path = dir.join(HEADER_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let header: SplitHeader = serde_json::from_str(&text)?;
    let read = |name: &str| -> Result<Vec<(usize, usize)>> {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| Error::MalformedRecord {
                path: path.clone(),
                line: n + 1,
                reason,
            };
            let (u, i) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("expected `user_id,item_id`, got {line:?}")))?;
            let u: usize = u.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let i: usize = i.trim().parse().map_err(|e| bad(format!("{e}")))?;
            if u >= header.n_users || i >= header.n_items {
                return Err(bad(format!("id out of range: {u},{i}")));
            }
            pairs.push((u, i));
        }
        pairs.sort_unstable();
        Ok(pairs)
    };
    Ok(DataSplit {
        n_users: header.n_users,
        n_items: header.n_items,
        seed: header.seed,
        ratios: header.ratios,
        train: read(TRAIN_FILE)?,
        validation: read(VALIDATION_FILE)?,
        test: read(TEST_FILE)?,
    })
}
