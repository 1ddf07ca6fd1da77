//! Layer stacks over input windows, loss, optimizer, training and gradient
//! checking.

mod checkpoint;
mod gradcheck;
mod optim;
mod spec;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, FaultInjection, GradCheckReport, LayerCheck};
pub use optim::{adam_step, clip_global_norm, mse_loss, AdamState};
pub use spec::{parse_layers, LayerSpec, ModelSpec};
pub use train::{evaluate, train, EpochStats, TrainConfig, TrainHistory};

use crate::cells::{
    dense_backward_into, dense_forward_unchecked, dropout, gru_backward_into,
    gru_forward_unchecked, lstm_backward_into, lstm_forward_unchecked, rnn_backward_into,
    rnn_forward_unchecked, Activation, DenseCache, DenseParams, GruCache, GruParams, LstmCache,
    LstmParams, Mode, Parameters, RnnCache, RnnParams,
};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Layer {
    Rnn(RnnParams),
    Lstm {
        params: LstmParams,
        post: Activation,
    },
    Gru(GruParams),
    Dropout(f64),
    Dense(DenseParams),
}

impl Layer {
    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            Layer::Rnn(p) => p.tensors(),
            Layer::Lstm { params, .. } => params.tensors(),
            Layer::Gru(p) => p.tensors(),
            Layer::Dropout(_) => Vec::new(),
            Layer::Dense(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Rnn(p) => p.tensors_mut(),
            Layer::Lstm { params, .. } => params.tensors_mut(),
            Layer::Gru(p) => p.tensors_mut(),
            Layer::Dropout(_) => Vec::new(),
            Layer::Dense(p) => p.tensors_mut(),
        }
    }

    /// `(rows, cols)` of each tensor in `tensors()` order; vectors are `(n, 1)`.
    pub fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        fn gate(w: &Matrix, u: &Matrix, b: &[f64]) -> [(usize, usize); 3] {
            [w.shape(), u.shape(), (b.len(), 1)]
        }
        match self {
            Layer::Rnn(p) => gate(&p.w, &p.u, &p.b).to_vec(),
            Layer::Lstm { params: p, .. } => [&p.forget, &p.input, &p.cell, &p.output]
                .into_iter()
                .flat_map(|g| gate(&g.w, &g.u, &g.b))
                .collect(),
            Layer::Gru(p) => vec![
                p.w_reset.shape(),
                p.w_update.shape(),
                p.w_candidate.shape(),
                (p.b_reset.len(), 1),
                (p.b_update.len(), 1),
                (p.b_candidate.len(), 1),
            ],
            Layer::Dropout(_) => Vec::new(),
            Layer::Dense(p) => vec![p.w.shape(), (p.b.len(), 1)],
        }
    }
}

/// A built layer stack. Recurrent initial states are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<Layer>,
    seed: u64,
}

#[derive(Debug, Clone)]
enum LayerTrace {
    Rnn(Vec<RnnCache>),
    Lstm {
        caches: Vec<LstmCache>,
        raw: Vec<Vec<f64>>,
    },
    Gru(Vec<GruCache>),
    Dropout(Vec<Vec<f64>>),
    Dense(DenseCache),
}

/// Everything a forward pass over one window recorded for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    layers: Vec<LayerTrace>,
    pub prediction: f64,
}

/// Glorot-initialized model from `spec`, parameters drawn from `rng` in layer order.
pub fn build_model(spec: &ModelSpec, rng: &mut Rng) -> Result<Model> {
    spec.validate()?;
    let layers = spec
        .layers
        .iter()
        .zip(spec.widths())
        .map(|(l, (input, _))| {
            Ok(match *l {
                LayerSpec::Rnn { hidden } => Layer::Rnn(RnnParams::init(hidden, input, rng)?),
                LayerSpec::Lstm { hidden, post } => Layer::Lstm {
                    params: LstmParams::init(hidden, input, rng)?,
                    post,
                },
                LayerSpec::Gru { hidden } => Layer::Gru(GruParams::init(hidden, input, rng)?),
                LayerSpec::Dropout { rate } => Layer::Dropout(rate),
                LayerSpec::Dense { units, activation } => {
                    Layer::Dense(DenseParams::init(units, input, activation, rng)?)
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Model {
        spec: spec.clone(),
        layers,
        seed: 0,
    })
}

impl Model {
    /// Builds from a seed; the seed is recorded in checkpoints.
    pub fn from_seed(spec: &ModelSpec, seed: u64) -> Result<Model> {
        let mut model = build_model(spec, &mut Rng::new(seed))?;
        model.seed = seed;
        Ok(model)
    }

    /// All parameters zero.
    pub fn zeros(spec: &ModelSpec) -> Result<Model> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .zip(spec.widths())
            .map(|(l, (input, _))| match *l {
                LayerSpec::Rnn { hidden } => Layer::Rnn(RnnParams::zeros(hidden, input)),
                LayerSpec::Lstm { hidden, post } => Layer::Lstm {
                    params: LstmParams::zeros(hidden, input),
                    post,
                },
                LayerSpec::Gru { hidden } => Layer::Gru(GruParams::zeros(hidden, input)),
                LayerSpec::Dropout { rate } => Layer::Dropout(rate),
                LayerSpec::Dense { units, activation } => {
                    Layer::Dense(DenseParams::zeros(units, input, activation))
                }
            })
            .collect();
        Ok(Model {
            spec: spec.clone(),
            layers,
            seed: 0,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    /// Tensors of layer `i` (empty for dropout).
    pub fn layer_tensors(&self, i: usize) -> Vec<&[f64]> {
        self.layers[i].tensors()
    }

    pub fn layer_tensors_mut(&mut self, i: usize) -> Vec<&mut [f64]> {
        self.layers[i].tensors_mut()
    }

    fn check_window(&self, window: &Matrix) -> Result<()> {
        let want = (self.spec.window, self.spec.input_features);
        if window.shape() != want {
            return Err(Error::dim(format!(
                "window is {}x{}, model expects {}x{}",
                window.rows(),
                window.cols(),
                want.0,
                want.1
            )));
        }
        Ok(())
    }

    /// Prediction in infer mode.
    pub fn predict(&self, window: &Matrix) -> Result<f64> {
        // Infer mode never draws from the stream.
        let mut rng = Rng::new(0);
        Ok(self.forward(window, Mode::Infer, &mut rng)?.prediction)
    }

    /// Runs the recurrent stack over the window rows, then the head on the
    /// final step's output.
    pub fn forward(&self, window: &Matrix, mode: Mode, rng: &mut Rng) -> Result<Trace> {
        self.check_window(window)?;
        let steps = window.rows();
        let seq_end = self.spec.sequence_end();
        let mut seq: Vec<Vec<f64>> = (0..steps).map(|t| window.row(t).to_vec()).collect();
        let mut traces = Vec::with_capacity(self.layers.len());

        for layer in &self.layers[..seq_end] {
            match layer {
                Layer::Rnn(p) => {
                    let mut h = vec![0.0; p.hidden()];
                    let mut caches = Vec::with_capacity(steps);
                    for x in seq.iter_mut() {
                        let (h_t, cache) = rnn_forward_unchecked(x, &h, p);
                        h = h_t;
                        caches.push(cache);
                        *x = h.clone();
                    }
                    traces.push(LayerTrace::Rnn(caches));
                }
                Layer::Lstm { params, post } => {
                    let mut h = vec![0.0; params.hidden()];
                    let mut c = vec![0.0; params.hidden()];
                    let mut caches = Vec::with_capacity(steps);
                    let mut raw = Vec::with_capacity(steps);
                    for x in seq.iter_mut() {
                        let (h_t, c_t, cache) = lstm_forward_unchecked(x, &h, &c, params);
                        *x = h_t.iter().map(|&v| post.apply(v)).collect();
                        h = h_t;
                        c = c_t;
                        caches.push(cache);
                        raw.push(h.clone());
                    }
                    traces.push(LayerTrace::Lstm { caches, raw });
                }
                Layer::Gru(p) => {
                    let mut h = vec![0.0; p.hidden()];
                    let mut caches = Vec::with_capacity(steps);
                    for x in seq.iter_mut() {
                        let (h_t, cache) = gru_forward_unchecked(x, &h, p);
                        h = h_t;
                        caches.push(cache);
                        *x = h.clone();
                    }
                    traces.push(LayerTrace::Gru(caches));
                }
                Layer::Dropout(rate) => {
                    let mut masks = Vec::with_capacity(steps);
                    for x in seq.iter_mut() {
                        let (y, mask) = dropout(x, *rate, mode, rng)?;
                        *x = y;
                        masks.push(mask);
                    }
                    traces.push(LayerTrace::Dropout(masks));
                }
                Layer::Dense(_) => {
                    unreachable!("validated spec has no dense layer before a recurrent one")
                }
            }
        }

        let mut v = seq.pop().expect("window has at least one step");
        for layer in &self.layers[seq_end..] {
            match layer {
                Layer::Dropout(rate) => {
                    let (y, mask) = dropout(&v, *rate, mode, rng)?;
                    v = y;
                    traces.push(LayerTrace::Dropout(vec![mask]));
                }
                Layer::Dense(p) => {
                    let (y, cache) = dense_forward_unchecked(&v, p);
                    v = y;
                    traces.push(LayerTrace::Dense(cache));
                }
                _ => unreachable!("no recurrent layer after sequence_end"),
            }
        }
        Ok(Trace {
            layers: traces,
            prediction: v[0],
        })
    }

    /// Backpropagates `d_prediction` through a trace produced by this model,
    /// accumulating into `grads` (a model of identical shape). Returns the
    /// gradient with respect to every row of the input window.
    pub fn backward(
        &self,
        trace: &Trace,
        d_prediction: f64,
        grads: &mut Model,
    ) -> Result<Vec<Vec<f64>>> {
        if trace.layers.len() != self.layers.len() || grads.spec != self.spec {
            return Err(Error::dim("trace or gradient buffer does not match model"));
        }
        let seq_end = self.spec.sequence_end();
        let steps = self.spec.window;

        let mut dv = vec![d_prediction];
        for i in (seq_end..self.layers.len()).rev() {
            match (&self.layers[i], &trace.layers[i], &mut grads.layers[i]) {
                (Layer::Dense(p), LayerTrace::Dense(cache), Layer::Dense(g)) => {
                    let mut dx = vec![0.0; p.w.cols()];
                    dense_backward_into(&dv, cache, p, g, &mut dx);
                    dv = dx;
                }
                (Layer::Dropout(_), LayerTrace::Dropout(masks), _) => {
                    dv.iter_mut().zip(&masks[0]).for_each(|(d, m)| *d *= m);
                }
                _ => return Err(Error::dim(format!("trace mismatch at layer {i}"))),
            }
        }

        let mut dseq: Vec<Vec<f64>> = vec![vec![0.0; dv.len()]; steps];
        dseq[steps - 1] = dv;
        for i in (0..seq_end).rev() {
            match (&self.layers[i], &trace.layers[i], &mut grads.layers[i]) {
                (Layer::Dropout(_), LayerTrace::Dropout(masks), _) => {
                    for (d, m) in dseq.iter_mut().zip(masks) {
                        d.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                    }
                }
                (Layer::Rnn(p), LayerTrace::Rnn(caches), Layer::Rnn(g)) => {
                    let mut dx = vec![vec![0.0; p.input()]; steps];
                    let mut dh_next = vec![0.0; p.hidden()];
                    for t in (0..steps).rev() {
                        let dh: Vec<f64> =
                            dseq[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                        let mut dh_prev = vec![0.0; p.hidden()];
                        rnn_backward_into(&dh, &caches[t], p, g, &mut dh_prev, &mut dx[t]);
                        dh_next = dh_prev;
                    }
                    dseq = dx;
                }
                (
                    Layer::Lstm { params: p, post },
                    LayerTrace::Lstm { caches, raw },
                    Layer::Lstm { params: g, .. },
                ) => {
                    let h = p.hidden();
                    let mut dx = vec![vec![0.0; p.input_size()]; steps];
                    let mut dh_next = vec![0.0; h];
                    let mut dc_next = vec![0.0; h];
                    for t in (0..steps).rev() {
                        let dh: Vec<f64> = (0..h)
                            .map(|k| dseq[t][k] * post.derivative(raw[t][k]) + dh_next[k])
                            .collect();
                        let mut dh_prev = vec![0.0; h];
                        let mut dc_prev = vec![0.0; h];
                        lstm_backward_into(
                            &dh,
                            &dc_next,
                            &caches[t],
                            p,
                            g,
                            &mut dh_prev,
                            &mut dc_prev,
                            &mut dx[t],
                        );
                        dh_next = dh_prev;
                        dc_next = dc_prev;
                    }
                    dseq = dx;
                }
                (Layer::Gru(p), LayerTrace::Gru(caches), Layer::Gru(g)) => {
                    let mut dx = vec![vec![0.0; p.input()]; steps];
                    let mut dh_next = vec![0.0; p.hidden()];
                    for t in (0..steps).rev() {
                        let dh: Vec<f64> =
                            dseq[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                        let mut dh_prev = vec![0.0; p.hidden()];
                        gru_backward_into(&dh, &caches[t], p, g, &mut dh_prev, &mut dx[t]);
                        dh_next = dh_prev;
                    }
                    dseq = dx;
                }
                _ => return Err(Error::dim(format!("trace mismatch at layer {i}"))),
            }
        }
        Ok(dseq)
    }
}

impl Parameters for Model {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::tensors).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(Layer::tensors_mut)
            .collect()
    }

    fn zeros_like(&self) -> Self {
        let mut m = Model::zeros(&self.spec).expect("spec already validated");
        m.seed = self.seed;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Matrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn paper_preset_parameter_count() {
        let spec = ModelSpec::paper(8, 12);
        let model = Model::from_seed(&spec, 1).unwrap();
        let expected = 4 * (256 * (256 + 8) + 256) + (32 * 256 + 32) + (32 + 1);
        assert_eq!(model.num_params(), expected);
        assert_eq!(expected, 279_617);
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = ModelSpec::lstm_gru_scaled(8, 4, 3, 5);
        assert_eq!(
            Model::from_seed(&spec, 9).unwrap(),
            Model::from_seed(&spec, 9).unwrap()
        );
        assert_ne!(
            Model::from_seed(&spec, 9).unwrap(),
            Model::from_seed(&spec, 10).unwrap()
        );
    }

    #[test]
    fn zero_model_predicts_zero() {
        let spec = ModelSpec::lstm_gru_scaled(4, 3, 2, 5);
        let model = Model::zeros(&spec).unwrap();
        let w = window(5, 2, &mut Rng::new(1));
        assert_eq!(model.predict(&w).unwrap(), 0.0);
    }

    #[test]
    fn single_step_gru_reduces_to_cell_plus_head() {
        let spec = ModelSpec::from_name("gru(3)>dense(1,linear)", 2, 1).unwrap();
        let model = Model::from_seed(&spec, 4).unwrap();
        let w = window(1, 2, &mut Rng::new(2));
        let (Layer::Gru(g), Layer::Dense(d)) = (&model.layers[0], &model.layers[1]) else {
            panic!()
        };
        let (h, _) = crate::cells::gru_forward(w.row(0), &[0.0; 3], g).unwrap();
        let (y, _) = crate::cells::dense_forward(&h, d).unwrap();
        assert_eq!(model.predict(&w).unwrap(), y[0]);
    }

    #[test]
    fn infer_prediction_is_bitwise_stable() {
        let spec = ModelSpec::lstm_gru_scaled(6, 4, 3, 4);
        let w = window(4, 3, &mut Rng::new(7));
        let a = Model::from_seed(&spec, 3).unwrap().predict(&w).unwrap();
        let b = Model::from_seed(&spec, 3).unwrap().predict(&w).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn window_shape_is_checked() {
        let spec = ModelSpec::paper_scaled(4, 3, 5);
        let model = Model::from_seed(&spec, 3).unwrap();
        assert!(matches!(
            model.predict(&Matrix::zeros(4, 3)),
            Err(Error::Dimension(_))
        ));
    }
}
