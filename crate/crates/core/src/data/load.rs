use std::collections::HashMap;
use std::path::Path;

use super::InteractionDataset;
use crate::error::{Error, Result};

/// k-core threshold used for sparse, Last.Fm-sized logs.
pub const DEFAULT_MIN_CORE: usize = 10;

/// Reads a `user,item[,...]` log (comma or tab separated, `#` comments) and
/// applies iterative k-core filtering.
pub fn load_interactions(path: &Path, min_core: usize) -> Result<InteractionDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(&text, min_core).map_err(|e| match e {
        Error::MalformedRecord { line, reason, .. } => Error::MalformedRecord {
            path: path.to_path_buf(),
            line,
            reason,
        },
        other => other,
    })
}

/// Same as [`load_interactions`] on in-memory text.
pub fn parse_interactions(text: &str, min_core: usize) -> Result<InteractionDataset> {
    let mut users: HashMap<&str, usize> = HashMap::new();
    let mut items: HashMap<&str, usize> = HashMap::new();
    let mut pairs = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let sep = if line.contains('\t') { '\t' } else { ',' };
        let mut fields = line.split(sep).map(str::trim);
        let (user, item) = match (fields.next(), fields.next()) {
            (Some(u), Some(i)) if !u.is_empty() && !i.is_empty() => (u, i),
            _ => {
                return Err(Error::MalformedRecord {
                    path: Default::default(),
                    line: lineno + 1,
                    reason: format!("expected `user,item`, got {line:?}"),
                })
            }
        };
        let n = users.len();
        let u = *users.entry(user).or_insert(n);
        let n = items.len();
        let i = *items.entry(item).or_insert(n);
        pairs.push((u, i));
    }
    pairs.sort_unstable();
    pairs.dedup();

    let pairs = k_core(pairs, users.len(), items.len(), min_core);
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Re-densify survivors, keeping first-appearance order of the raw ids.
    let mut user_map = vec![usize::MAX; users.len()];
    let mut item_map = vec![usize::MAX; items.len()];
    for &(u, i) in &pairs {
        user_map[u] = 0;
        item_map[i] = 0;
    }
    let n_users = densify(&mut user_map);
    let n_items = densify(&mut item_map);
    let pairs = pairs
        .into_iter()
        .map(|(u, i)| (user_map[u], item_map[i]))
        .collect();
    InteractionDataset::from_pairs(n_users, n_items, pairs)
}

fn densify(map: &mut [usize]) -> usize {
    let mut next = 0;
    for slot in map.iter_mut() {
        if *slot != usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    next
}

fn k_core(
    mut pairs: Vec<(usize, usize)>,
    n_users: usize,
    n_items: usize,
    min_core: usize,
) -> Vec<(usize, usize)> {
    if min_core <= 1 {
        return pairs;
    }
    loop {
        let mut udeg = vec![0usize; n_users];
        let mut ideg = vec![0usize; n_items];
        for &(u, i) in &pairs {
            udeg[u] += 1;
            ideg[i] += 1;
        }
        let before = pairs.len();
        pairs.retain(|&(u, i)| udeg[u] >= min_core && ideg[i] >= min_core);
        if pairs.len() == before {
            return pairs;
        }
    }
}
