//! Symmetric-normalized user-item graph and linear propagation.

/// Edge weights `1/sqrt(d_u d_i)` of the training bipartite graph, stored from
/// both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub(crate) user_edges: Vec<Vec<(usize, f64)>>,
    pub(crate) item_edges: Vec<Vec<(usize, f64)>>,
}

impl NormalizedAdjacency {
    pub fn new(n_users: usize, n_items: usize, pairs: &[(usize, usize)]) -> Self {
        let mut pairs = pairs.to_vec();
        pairs.sort_unstable();
        pairs.dedup();
        let mut udeg = vec![0usize; n_users];
        let mut ideg = vec![0usize; n_items];
        for &(u, i) in &pairs {
            udeg[u] += 1;
            ideg[i] += 1;
        }
        let mut user_edges = vec![Vec::new(); n_users];
        let mut item_edges = vec![Vec::new(); n_items];
        for &(u, i) in &pairs {
            let c = 1.0 / ((udeg[u] * ideg[i]) as f64).sqrt();
            user_edges[u].push((i, c));
            item_edges[i].push((u, c));
        }
        Self {
            user_edges,
            item_edges,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_edges.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_edges.len()
    }

    pub fn n_edges(&self) -> usize {
        self.user_edges.iter().map(Vec::len).sum()
    }

    /// Coefficient of edge `(u, i)`, zero when absent.
    pub fn coefficient(&self, u: usize, i: usize) -> f64 {
        self.user_edges[u]
            .iter()
            .find(|(j, _)| *j == i)
            .map_or(0.0, |(_, c)| *c)
    }

    /// Applies `P = (1/(L+1)) sum_{l=0..L} A^l` to row-major node features of
    /// width `width`. `P` is symmetric, so the same map backpropagates
    /// gradients.
    pub fn propagate(
        &self,
        n_layers: usize,
        users: &[f64],
        items: &[f64],
        width: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut acc_u = users.to_vec();
        let mut acc_i = items.to_vec();
        let mut cur_u = users.to_vec();
        let mut cur_i = items.to_vec();
        for _ in 0..n_layers {
            let next_u = aggregate(&self.user_edges, &cur_i, width);
            let next_i = aggregate(&self.item_edges, &cur_u, width);
            cur_u = next_u;
            cur_i = next_i;
            for (a, c) in acc_u.iter_mut().zip(&cur_u) {
                *a += c;
            }
            for (a, c) in acc_i.iter_mut().zip(&cur_i) {
                *a += c;
            }
        }
        let scale = 1.0 / (n_layers + 1) as f64;
        acc_u.iter_mut().for_each(|x| *x *= scale);
        acc_i.iter_mut().for_each(|x| *x *= scale);
        (acc_u, acc_i)
    }

    /// Row `u` of the user-to-item block of `P`: the scalar path weight from
    /// each item's layer-0 embedding into user `u`'s final representation.
    pub fn user_item_influence(&self, n_layers: usize, u: usize) -> Vec<f64> {
        let mut onehot = vec![0.0; self.n_users()];
        onehot[u] = 1.0;
        let zeros = vec![0.0; self.n_items()];
        self.propagate(n_layers, &onehot, &zeros, 1).1
    }
}

fn aggregate(edges: &[Vec<(usize, f64)>], src: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; edges.len() * width];
    for (row, nbrs) in out.chunks_exact_mut(width).zip(edges) {
        for &(j, c) in nbrs {
            for (o, s) in row.iter_mut().zip(&src[j * width..(j + 1) * width]) {
                *o += c * s;
            }
        }
    }
    out
}
