//! Adam with global-norm gradient clipping, over flat parameter vectors.

use serde::{Deserialize, Serialize};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First/second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimState {
    pub fn new(n_params: usize) -> OptimState {
        OptimState { step: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }
}

/// Scale `grad` in place so its l2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// One Adam update on `params` given an already-clipped gradient.
pub fn optimizer_step(state: &mut OptimState, params: &mut [f64], grad: &[f64], lr: f64) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for i in 0..params.len() {
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * grad[i];
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        // After one step m_hat = g, v_hat = g^2, so the update is
        // lr * g / (|g| + eps) regardless of the gradient's magnitude.
        let mut st = OptimState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.4, -3.0, 1e-3];
        optimizer_step(&mut st, &mut p, &g, 0.001);
        for (i, &gi) in g.iter().enumerate() {
            let expect = [1.0, -2.0, 0.5][i] - 0.001 * gi / (gi.abs() + EPS);
            assert!((p[i] - expect).abs() < 1e-15, "param {i}: {} vs {expect}", p[i]);
        }
        assert_eq!(st.step, 1);
    }

    #[test]
    fn second_step_matches_hand_rolled_recurrence() {
        let mut st = OptimState::new(1);
        let mut p = vec![0.0];
        let (g1, g2, lr) = (2.0, -1.0, 0.01);
        optimizer_step(&mut st, &mut p, &[g1], lr);
        optimizer_step(&mut st, &mut p, &[g2], lr);

        let m1 = (1.0 - BETA1) * g1;
        let v1 = (1.0 - BETA2) * g1 * g1;
        let p1 = -lr * (m1 / (1.0 - BETA1)) / ((v1 / (1.0 - BETA2)).sqrt() + EPS);
        let m2 = BETA1 * m1 + (1.0 - BETA1) * g2;
        let v2 = BETA2 * v1 + (1.0 - BETA2) * g2 * g2;
        let p2 = p1
            - lr * (m2 / (1.0 - BETA1.powi(2))) / ((v2 / (1.0 - BETA2.powi(2))).sqrt() + EPS);
        assert!((p[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut g = vec![3.0, 4.0]; // norm 5
        let norm = clip_global_norm(&mut g, 10.0);
        assert_eq!(norm, 5.0);
        assert_eq!(g, vec![3.0, 4.0]);

        let mut g = vec![30.0, 40.0]; // norm 50
        let norm = clip_global_norm(&mut g, 10.0);
        assert_eq!(norm, 50.0);
        assert!((g[0] - 6.0).abs() < 1e-12 && (g[1] - 8.0).abs() < 1e-12);
        let clipped: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((clipped - 10.0).abs() < 1e-12);
    }
}
