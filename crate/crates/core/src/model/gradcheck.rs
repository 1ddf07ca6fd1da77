use serde::Serialize;

use crate::cells::{Activation, Mode, Parameters};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

use super::{Layer, LayerTrace, Model};

/// Test hook for negative controls: corrupts the analytic gradients before
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaultInjection {
    #[default]
    None,
    /// Negates the analytic gradient of the first layer with parameters.
    FlipSign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCheck {
    pub index: usize,
    pub kind: String,
    pub params: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub eps: f64,
    pub layers: Vec<LayerCheck>,
    /// Smallest |pre-activation| at any relu site for this sample. Central
    /// differences are only trustworthy when this is well above `eps`.
    pub relu_margin: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.max_rel_error)
            .fold(0.0, f64::max)
    }

    /// True when some relu input sits close enough to zero that a central
    /// difference may straddle the kink, which makes the comparison meaningless.
    pub fn near_kink(&self) -> bool {
        self.relu_margin < 100.0 * self.eps
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.layers.iter().all(|l| l.max_rel_error < tolerance)
    }
}

/// `|a - n| / max(|a|, |n|, 1e-7)`. The floor keeps entries whose true
/// gradient is ~0 from dominating through round-off.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Compares full-model BPTT gradients of `(prediction - target)^2` against
/// central differences on every parameter. Dropout runs in infer mode.
pub fn grad_check(
    model: &Model,
    window: &Matrix,
    target: f64,
    eps: f64,
    fault: FaultInjection,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::config(format!(
            "gradcheck eps {eps} outside [1e-7, 1e-3]"
        )));
    }
    let trace = model.forward(window, Mode::Infer, &mut Rng::new(0))?;
    let mut grads = model.zeros_like();
    model.backward(&trace, 2.0 * (trace.prediction - target), &mut grads)?;

    if fault == FaultInjection::FlipSign {
        if let Some(i) = (0..model.layers.len()).find(|&i| !model.layer_tensors(i).is_empty()) {
            for t in grads.layer_tensors_mut(i) {
                t.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    let mut work = model.clone();
    let mut layers = Vec::new();
    for (i, spec) in model.spec.layers.iter().enumerate() {
        let analytic: Vec<f64> = grads.layer_tensors(i).concat();
        if analytic.is_empty() {
            continue;
        }
        let shapes: Vec<usize> = model.layer_tensors(i).iter().map(|t| t.len()).collect();
        let mut worst = 0.0_f64;
        let mut flat = 0;
        for (ti, &len) in shapes.iter().enumerate() {
            for k in 0..len {
                let orig = work.layer_tensors(i)[ti][k];
                work.layer_tensors_mut(i)[ti][k] = orig + eps;
                let up = work.predict(window)?;
                work.layer_tensors_mut(i)[ti][k] = orig - eps;
                let down = work.predict(window)?;
                work.layer_tensors_mut(i)[ti][k] = orig;
                // (up - t)^2 - (down - t)^2, factored to avoid cancelling two squares.
                let numeric = (up - down) * (up + down - 2.0 * target) / (2.0 * eps);
                worst = worst.max(relative_error(analytic[flat], numeric));
                flat += 1;
            }
        }
        layers.push(LayerCheck {
            index: i,
            kind: spec.to_string(),
            params: analytic.len(),
            max_rel_error: worst,
        });
    }

    Ok(GradCheckReport {
        eps,
        layers,
        relu_margin: relu_margin(model, &trace.layers),
    })
}

fn relu_margin(model: &Model, traces: &[LayerTrace]) -> f64 {
    let mut margin = f64::INFINITY;
    for (layer, trace) in model.layers.iter().zip(traces) {
        match (layer, trace) {
            (
                Layer::Lstm {
                    post: Activation::Relu,
                    ..
                },
                LayerTrace::Lstm { raw, .. },
            ) => {
                for v in raw.iter().flatten() {
                    margin = margin.min(v.abs());
                }
            }
            (Layer::Dense(p), LayerTrace::Dense(cache)) if p.activation == Activation::Relu => {
                for v in &cache.pre {
                    margin = margin.min(v.abs());
                }
            }
            _ => {}
        }
    }
    margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn random_window(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Matrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    fn check(spec: &ModelSpec, seed: u64) -> GradCheckReport {
        let mut rng = Rng::new(seed);
        let model = Model::from_seed(spec, seed).unwrap();
        let w = random_window(spec.window, spec.input_features, &mut rng);
        grad_check(
            &model,
            &w,
            rng.uniform(-1.0, 1.0),
            1e-5,
            FaultInjection::None,
        )
        .unwrap()
    }

    #[test]
    fn tiny_gru_and_lstm_models_pass() {
        for layers in [
            "gru(5)>dense(1,linear)",
            "lstm(5)>dense(1,linear)",
            "rnn(5)>dense(1,linear)",
        ] {
            let spec = ModelSpec::from_name(layers, 3, 4).unwrap();
            let report = check(&spec, 3);
            assert!(report.passes(1e-4), "{layers}: {report:?}");
        }
    }

    #[test]
    fn sign_flip_is_caught() {
        let spec = ModelSpec::from_name("gru(4)>dense(1,linear)", 3, 4).unwrap();
        let model = Model::from_seed(&spec, 1).unwrap();
        let w = random_window(4, 3, &mut Rng::new(2));
        let report = grad_check(&model, &w, 0.7, 1e-5, FaultInjection::FlipSign).unwrap();
        assert!(report.layers[0].max_rel_error > 0.1);
        assert!(!report.passes(1e-4));
    }

    #[test]
    fn eps_range_is_enforced() {
        let spec = ModelSpec::from_name("gru(2)>dense(1,linear)", 1, 2).unwrap();
        let model = Model::from_seed(&spec, 1).unwrap();
        let w = Matrix::zeros(2, 1);
        assert!(grad_check(&model, &w, 0.0, 1e-2, FaultInjection::None).is_err());
        assert!(grad_check(&model, &w, 0.0, 1e-9, FaultInjection::None).is_err());
    }
}
