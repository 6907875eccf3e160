//! Pareto-efficient cluster weights via the Frank-Wolfe min-norm-point solver.
//!
//! The solver works on the unit simplex from the uniform point and rescales
//! the result so the weights sum to `K`.

use std::io::Write;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_KKT_EPS: f64 = 1e-5;

/// Symmetric `K x K` matrix of gradient inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    k: usize,
    m: Vec<f64>,
}

impl GramMatrix {
    /// Takes a row-major `K x K` matrix. Symmetry is checked, PSD-ness is the
    /// caller's responsibility.
    pub fn from_rows(k: usize, m: Vec<f64>) -> Result<Self> {
        if m.len() != k * k {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {k}x{k} Gram matrix",
                m.len()
            )));
        }
        for i in 0..k {
            for j in 0..i {
                let (a, b) = (m[i * k + j], m[j * k + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Precondition(format!(
                        "Gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { k, m })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.k + j]
    }

    pub fn rows(&self) -> &[f64] {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// `M w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.m
            .chunks_exact(self.k)
            .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `wᵀ M w`.
    pub fn quad(&self, w: &[f64]) -> f64 {
        self.apply(w).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            k: self.k,
            m: self.m.iter().map(|x| x * c).collect(),
        }
    }
}

/// `M_ij = <g_i, g_j>` over flattened shared-parameter gradients.
pub fn gram_matrix<G: AsRef<[f64]>>(grads: &[G]) -> Result<GramMatrix> {
    let k = grads.len();
    if let Some(first) = grads.first() {
        let len = first.as_ref().len();
        if let Some(bad) = grads.iter().position(|g| g.as_ref().len() != len) {
            return Err(Error::DimensionMismatch(format!(
                "gradient {bad} has length {} but gradient 0 has {len}",
                grads[bad].as_ref().len()
            )));
        }
    }
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let d: f64 = grads[i]
                .as_ref()
                .iter()
                .zip(grads[j].as_ref())
                .map(|(a, b)| a * b)
                .sum();
            m[i * k + j] = d;
            m[j * k + i] = d;
        }
    }
    Ok(GramMatrix { k, m })
}

/// Exact line search from `w` toward vertex `t`, clamped to `[0, 1]`.
pub fn line_search_gamma(w: &[f64], t: usize, m: &GramMatrix) -> f64 {
    let mw = m.apply(w);
    let mut d = w.to_vec();
    d[t] -= 1.0;
    let num: f64 = d.iter().zip(&mw).map(|(a, b)| a * b).sum();
    let den = m.quad(&d);
    if den <= 1e-18 {
        return 0.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// One Frank-Wolfe step as recorded in a solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeStep {
    pub iteration: usize,
    /// `wᵀ M w` on the unit simplex after the step.
    pub objective: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveWeights {
    /// Nonnegative, summing to `K`.
    pub w: Vec<f64>,
}

impl ObjectiveWeights {
    pub fn uniform(k: usize) -> Self {
        Self { w: vec![1.0; k] }
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }

    /// The same weights on the unit simplex.
    pub fn simplex(&self) -> Vec<f64> {
        let k = self.k() as f64;
        self.w.iter().map(|x| x / k).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeSolution {
    pub weights: ObjectiveWeights,
    pub iterations: usize,
    /// `false` when the iteration cap was reached before `gamma < tol`.
    pub converged: bool,
    pub trace: Vec<PeStep>,
}

impl PeSolution {
    /// Squared norm of the combined gradient at the simplex weights.
    pub fn simplex_norm_sq(&self, m: &GramMatrix) -> f64 {
        m.quad(&self.weights.simplex())
    }
}

/// Minimum-norm point of the convex hull of the gradients behind `m`, by
/// Frank-Wolfe on the unit simplex from the uniform point.
///
/// Each iteration picks the vertex `t` minimising `Mw` and the support vertex
/// `a` maximising it, and moves mass from `a` to `t` with an exact line
/// search (the pairwise variant; from the uniform point with `K = 2` this is
/// the classic step toward `t`). A corrective step then jumps to the exact
/// minimiser over the current support when that lies strictly inside it.
/// Together these avoid the zig-zagging of the plain method when the optimum
/// sits on a face. Stops once the step drops below `tol`, at which point the
/// largest `(Mw)_k` on the support equals the smallest overall; the weights
/// are returned scaled to sum `K`.
pub fn pe_solve(m: &GramMatrix, max_iter: usize, tol: f64) -> Result<PeSolution> {
    let k = m.k();
    if k == 0 {
        return Err(Error::Precondition("no objectives to weight".into()));
    }
    let mut w = vec![1.0 / k as f64; k];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mw = m.apply(&w);
        let t = argmin(&mw);
        let a = away_vertex(&w, &mw);
        let (gamma, drop) = if a == t {
            (0.0, false)
        } else {
            let gamma = pairwise_gamma(&mw, t, a, m, w[a]);
            let drop = gamma >= w[a];
            w[t] += gamma;
            w[a] = if drop { 0.0 } else { w[a] - gamma };
            (gamma, drop)
        };
        let done = gamma < tol && !drop;
        if !done {
            corrective_step(&mut w, m);
        }
        trace.push(PeStep {
            iteration: iterations,
            objective: m.quad(&w),
            gamma,
        });
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("PE solver hit the iteration cap ({max_iter})");
    }
    Ok(PeSolution {
        weights: ObjectiveWeights {
            w: finalize(&w),
        },
        iterations,
        converged,
        trace,
    })
}

/// Moves `w` to the minimiser of `wᵀMw` over the convex hull of its support.
/// An affinely dependent support is first thinned without changing the
/// combined gradient. When the affine minimiser of the support leaves the
/// simplex, steps toward it until a weight hits zero, drops that vertex and
/// retries.
fn corrective_step(w: &mut [f64], m: &GramMatrix) {
    loop {
        let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        if support.len() < 2 {
            return;
        }
        let x = match affine_minimizer(&support, m) {
            Affine::Minimizer(x) => x,
            Affine::Dependent(z) => {
                // Σ z_s g_s = 0 and Σ z_s = 0: shift along z until a weight
                // reaches zero
                let mut theta = f64::INFINITY;
                let mut blocking = None;
                for (r, &i) in support.iter().enumerate() {
                    if z[r] > 0.0 && w[i] / z[r] < theta {
                        theta = w[i] / z[r];
                        blocking = Some(i);
                    }
                }
                let Some(blocking) = blocking else {
                    return;
                };
                for (r, &i) in support.iter().enumerate() {
                    w[i] = (w[i] - theta * z[r]).max(0.0);
                }
                w[blocking] = 0.0;
                continue;
            }
        };
        let mut target = vec![0.0; w.len()];
        for (r, &i) in support.iter().enumerate() {
            target[i] = x[r];
        }
        if x.iter().all(|&v| v > 0.0) {
            if m.quad(&target) <= m.quad(w) {
                w.copy_from_slice(&target);
            }
            return;
        }
        // largest step along target - w that keeps every weight >= 0
        let mut theta = 1.0;
        let mut blocking = support[0];
        for &i in &support {
            if target[i] <= 0.0 {
                let limit = w[i] / (w[i] - target[i]);
                if limit < theta {
                    theta = limit;
                    blocking = i;
                }
            }
        }
        for i in 0..w.len() {
            w[i] += theta * (target[i] - w[i]);
        }
        w[blocking] = 0.0;
    }
}

enum Affine {
    /// Unique minimiser of `xᵀ M_SS x` subject to `Σ x = 1`.
    Minimizer(Vec<f64>),
    /// Nonzero `z` with `M_SS z = 0` and `Σ z = 0`.
    Dependent(Vec<f64>),
}

/// Solves the bordered system `[M_SS 1; 1ᵀ 0] [x; mu] = [0; 1]`. On a
/// singular system the null vector restricted to `S` is returned instead;
/// since `M` is PSD it satisfies `M_SS z = 0` and `Σ z = 0`.
fn affine_minimizer(support: &[usize], m: &GramMatrix) -> Affine {
    let s = support.len();
    let n = s + 1;
    let cols = n + 1;
    let mut a = vec![0.0; n * cols];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[r * cols + c] = m.get(i, j);
        }
        a[r * cols + s] = 1.0;
        a[s * cols + r] = 1.0;
    }
    a[s * cols + n] = 1.0;
    let scale = support.iter().map(|&i| m.get(i, i).abs()).fold(0.0, f64::max).max(1.0);
    let tiny = 1e-10 * scale;

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * cols + col].abs().total_cmp(&a[y * cols + col].abs()))
            .unwrap_or(col);
        if a[pivot * cols + col].abs() <= tiny {
            // free variable `col`: back-substitute the pivot columns before it
            let mut z = vec![0.0; n];
            z[col] = 1.0;
            for r in (0..col).rev() {
                let tail: f64 = (r + 1..=col).map(|c| a[r * cols + c] * z[c]).sum();
                z[r] = -tail / a[r * cols + r];
            }
            z.truncate(s);
            return Affine::Dependent(z);
        }
        for c in 0..cols {
            a.swap(col * cols + c, pivot * cols + c);
        }
        for r in col + 1..n {
            let f = a[r * cols + col] / a[col * cols + col];
            for c in col..cols {
                a[r * cols + c] -= f * a[col * cols + c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r * cols + c] * x[c]).sum();
        x[r] = (a[r * cols + n] - tail) / a[r * cols + r];
    }
    x.truncate(s);
    Affine::Minimizer(x)
}

/// Exact line search along `e_t − e_a`, clamped to `[0, max_step]`.
fn pairwise_gamma(mw: &[f64], t: usize, a: usize, m: &GramMatrix, max_step: f64) -> f64 {
    let num = mw[a] - mw[t];
    let den = m.get(t, t) + m.get(a, a) - 2.0 * m.get(t, a);
    if den <= 1e-18 {
        return 0.0;
    }
    (num / den).clamp(0.0, max_step)
}

/// Support vertex with the largest `(Mw)_a`; lowest index on ties.
fn away_vertex(w: &[f64], mw: &[f64]) -> usize {
    let mut best: Option<usize> = None;
    for (i, (&wi, &g)) in w.iter().zip(mw).enumerate() {
        if wi > 0.0 && best.is_none_or(|b| g > mw[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or(0)
}

/// Clamps to the simplex and rescales to sum `K`.
fn finalize(w: &[f64]) -> Vec<f64> {
    let k = w.len() as f64;
    let clamped: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return vec![1.0; w.len()];
    }
    clamped.iter().map(|x| x / total * k).collect()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Writes a solver trace as CSV `iteration,objective,gamma`.
pub fn write_trace<W: Write>(out: &mut W, trace: &[PeStep]) -> std::io::Result<()> {
    writeln!(out, "iteration,objective,gamma")?;
    for s in trace {
        writeln!(out, "{},{},{}", s.iteration, s.objective, s.gamma)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub nonnegative: bool,
    pub sums_to_k: bool,
    pub common_descent: bool,
    /// Largest violation of `g_k·d >= d·d` over the objectives.
    pub worst_gap: f64,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.sums_to_k && self.common_descent
    }
}

/// Checks the weight constraints and that `d = Σ (w_k/K) g_k` is a common
/// descent direction, i.e. the min-norm optimality condition.
pub fn kkt_check(weights: &ObjectiveWeights, m: &GramMatrix, eps: f64) -> KktReport {
    let k = weights.k() as f64;
    let nonnegative = weights.w.iter().all(|x| *x >= -eps);
    let sums_to_k = (weights.w.iter().sum::<f64>() - k).abs() <= eps;
    let u = weights.simplex();
    let dd = m.quad(&u);
    let slack = eps * (1.0 + dd.abs());
    let worst_gap = m
        .apply(&u)
        .iter()
        .map(|gd| dd - gd)
        .fold(f64::NEG_INFINITY, f64::max);
    KktReport {
        nonnegative,
        sums_to_k,
        common_descent: weights.k() == m.k() && worst_gap <= slack,
        worst_gap,
    }
}
