//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string, which keeps the
//! page free of any generated type glue beyond `JSON.parse`.

use rnnquant::backtest::{run_backtest, BacktestConfig, Predictor};
use rnnquant::cells::{gru_forward, Activation, GruParams, Mode, Parameters};
use rnnquant::marketdata::{gen_synthetic_panel, Span, SynthConfig};
use rnnquant::model::{Layer, LayerSpec, Model, ModelSpec, TrainConfig};
use rnnquant::numerics::{Matrix, Rng};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Scalar GRU weights, ordered as `[w_h, w_x]` pairs per gate.
#[derive(Debug, Clone, Copy)]
pub struct ScalarGru {
    pub reset: [f64; 3],
    pub update: [f64; 3],
    pub candidate: [f64; 3],
}

pub fn gru_step_value(h_prev: f64, x: f64, g: ScalarGru) -> Result<Value, String> {
    let m = |v: [f64; 3]| Matrix::new(1, 2, vec![v[0], v[1]]).map_err(|e| e.to_string());
    let p = GruParams {
        w_reset: m(g.reset)?,
        w_update: m(g.update)?,
        w_candidate: m(g.candidate)?,
        b_reset: vec![g.reset[2]],
        b_update: vec![g.update[2]],
        b_candidate: vec![g.candidate[2]],
    };
    let (h, cache) = gru_forward(&[x], &[h_prev], &p).map_err(|e| e.to_string())?;
    Ok(json!({
        "reset": cache.reset[0],
        "update": cache.update[0],
        "candidate": cache.candidate[0],
        "h": h[0],
    }))
}

/// Gradient norm of the final prediction with respect to every input step,
/// for an RNN, an LSTM with forget bias `forget_bias`, and a GRU with update
/// bias `update_bias`, all of width `hidden` on the same random sequence.
pub fn gradient_decay_value(
    length: usize,
    hidden: usize,
    forget_bias: f64,
    update_bias: f64,
    seed: u64,
) -> Result<Value, String> {
    if !(1..=400).contains(&length) || !(1..=64).contains(&hidden) {
        return Err("length must be in 1..=400 and hidden in 1..=64".into());
    }
    const F: usize = 4;
    let head = LayerSpec::Dense {
        units: 1,
        activation: Activation::Linear,
    };
    let specs = [
        ("rnn", LayerSpec::Rnn { hidden }),
        (
            "lstm",
            LayerSpec::Lstm {
                hidden,
                post: Activation::Linear,
            },
        ),
        ("gru", LayerSpec::Gru { hidden }),
    ];
    let mut rng = Rng::new(seed);
    let window = Matrix::new(length, F, (0..length * F).map(|_| rng.normal()).collect())
        .map_err(|e| e.to_string())?;
    let mut out = serde_json::Map::new();
    for (name, cell) in specs {
        let spec = ModelSpec::new(vec![cell, head], F, length).map_err(|e| e.to_string())?;
        let mut model = Model::from_seed(&spec, seed).map_err(|e| e.to_string())?;
        match &mut model.layers_mut()[0] {
            Layer::Lstm { params, .. } => params.forget.b.iter_mut().for_each(|b| *b = forget_bias),
            Layer::Gru(p) => p.b_update.iter_mut().for_each(|b| *b = update_bias),
            _ => {}
        }
        let trace = model
            .forward(&window, Mode::Infer, &mut Rng::new(0))
            .map_err(|e| e.to_string())?;
        let mut grads = model.zeros_like();
        let dx = model
            .backward(&trace, 1.0, &mut grads)
            .map_err(|e| e.to_string())?;
        let norms: Vec<f64> = dx
            .iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        out.insert(name.into(), json!(norms));
    }
    Ok(Value::Object(out))
}

/// Walk-forward backtest on a synthetic panel with a small GRU, or with the
/// realized returns as predictions when `foresight` is set.
pub fn synthetic_backtest_value(
    seed: u64,
    n_symbols: usize,
    n_weeks: usize,
    signal: f64,
    top_k: usize,
    foresight: bool,
) -> Result<Value, String> {
    if n_symbols > 200 || n_weeks > 800 {
        return Err("keep the demo below 200 symbols and 800 weeks".into());
    }
    let panel = gen_synthetic_panel(&SynthConfig {
        seed,
        n_symbols,
        n_weeks,
        signal_strength: signal,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let cfg = BacktestConfig {
        top_k,
        model: "gru(6)>dense(1,linear)".into(),
        window: 8,
        initial_train: Span::Years(2),
        step: Span::Weeks(26),
        train: TrainConfig {
            epochs: 1,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        },
        max_train_samples: Some(800),
        seed,
        parallel: false,
        predictor: if foresight {
            Predictor::PerfectForesight
        } else {
            Predictor::Model
        },
        ..BacktestConfig::default()
    };
    let res = run_backtest(&panel, &cfg).map_err(|e| e.to_string())?;
    let mut dates: Vec<String> = res
        .dates
        .first()
        .map(|d| d.to_string())
        .into_iter()
        .collect();
    dates.extend(res.period_end.iter().map(|d| d.to_string()));
    Ok(json!({
        "dates": dates,
        "strategy": res.strategy_equity,
        "benchmark": res.benchmark_equity,
        "report": res.report,
        "splits": res.splits.len(),
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn gru_step(
    h_prev: f64,
    x: f64,
    reset_h: f64,
    reset_x: f64,
    reset_b: f64,
    update_h: f64,
    update_x: f64,
    update_b: f64,
    cand_h: f64,
    cand_x: f64,
    cand_b: f64,
) -> Result<String, JsError> {
    to_js(gru_step_value(
        h_prev,
        x,
        ScalarGru {
            reset: [reset_h, reset_x, reset_b],
            update: [update_h, update_x, update_b],
            candidate: [cand_h, cand_x, cand_b],
        },
    ))
}

#[wasm_bindgen]
pub fn gradient_decay(
    length: usize,
    hidden: usize,
    forget_bias: f64,
    update_bias: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(gradient_decay_value(
        length,
        hidden,
        forget_bias,
        update_bias,
        u64::from(seed),
    ))
}

#[wasm_bindgen]
pub fn synthetic_backtest(
    seed: u32,
    n_symbols: usize,
    n_weeks: usize,
    signal: f64,
    top_k: usize,
    foresight: bool,
) -> Result<String, JsError> {
    to_js(synthetic_backtest_value(
        u64::from(seed),
        n_symbols,
        n_weeks,
        signal,
        top_k,
        foresight,
    ))
}
