//! Dense Adam.

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment buffers for one parameter table.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamMoments {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// One update of `params` at bias-correction step `t` (1-based).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, t: u64) {
        debug_assert_eq!(params.len(), grad.len());
        let bc1 = 1.0 - BETA1.powi(t as i32);
        let bc2 = 1.0 - BETA2.powi(t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}

/// Adam state for the user table, item table and popularity embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub user: AdamMoments,
    pub item: AdamMoments,
    pub pop: AdamMoments,
}

impl AdamState {
    pub fn new(n_user_params: usize, n_item_params: usize, dim: usize) -> Self {
        Self {
            t: 0,
            user: AdamMoments::new(n_user_params),
            item: AdamMoments::new(n_item_params),
            pop: AdamMoments::new(dim),
        }
    }
}
