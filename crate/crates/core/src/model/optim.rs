use crate::error::{Error, Result};

use super::TrainConfig;

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::dim(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Ok((loss, grad))
}

/// First and second moment accumulators, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(tensor_lens: impl IntoIterator<Item = usize>) -> Self {
        let lens: Vec<usize> = tensor_lens.into_iter().collect();
        AdamState {
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update over matching lists of parameter and
/// gradient tensors.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dim(format!(
            "adam over {} tensors with {} gradients and {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::dim(format!(
                "adam tensor {i}: {} params, {} grads",
                p.len(),
                g.len()
            )));
        }
    }
    state.t += 1;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

/// Rescales all tensors so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_cases() {
        assert_eq!(
            mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            (0.0, vec![0.0, 0.0])
        );
        assert_eq!(mse_loss(&[2.0], &[0.0]).unwrap(), (4.0, vec![4.0]));
        assert_eq!(
            mse_loss(&[1.0, 3.0], &[0.0, 0.0]).unwrap(),
            (5.0, vec![1.0, 3.0])
        );
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let cfg = TrainConfig::default();
        let mut theta = vec![0.3, -1.2, 4.0];
        let before = theta.clone();
        let mut state = AdamState::new([3]);
        for _ in 0..5 {
            adam_step(&mut [&mut theta], &[&[0.0; 3]], &mut state, &cfg).unwrap();
        }
        assert_eq!(theta, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut theta = vec![1.0];
        let mut state = AdamState::new([1]);
        adam_step(&mut [&mut theta], &[&[2.0]], &mut state, &cfg).unwrap();
        // m_hat = 2, v_hat = 4: step = lr * 2 / (2 + 1e-8)
        assert!((theta[0] - 0.9999).abs() < 1e-7);
        let prev = theta[0];
        adam_step(&mut [&mut theta], &[&[2.0]], &mut state, &cfg).unwrap();
        assert!((prev - theta[0]).abs() <= cfg.learning_rate * (1.0 + 1e-6));
        assert_eq!(state.t, 2);
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let cfg = TrainConfig::default();
        let mut theta = vec![1.0, 2.0];
        let mut state = AdamState::new([2]);
        assert!(adam_step(&mut [&mut theta], &[&[1.0]], &mut state, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn clipped_norm_is_bounded(a in proptest::collection::vec(-100.0f64..100.0, 1..20),
                                   b in proptest::collection::vec(-100.0f64..100.0, 1..20),
                                   max in 0.01f64..10.0) {
            let (mut a, mut b) = (a, b);
            clip_global_norm(&mut [&mut a, &mut b], max);
            let norm = a.iter().chain(&b).map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm <= max + 1e-12);
        }
    }
}
