//! Plain-text checkpoints.
//!
//! ```text
//! rnnquant-checkpoint v1 spec=gru(4)>dense(1,linear) features=8 window=12 seed=42
//! layer 0 gru
//! tensor 4 12
//! <4 lines of 12 floats>
//! ...
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` bit pattern.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cells::Parameters;
use crate::error::{Error, Result};

use super::{parse_layers, Model, ModelSpec};

const MAGIC: &str = "rnnquant-checkpoint v1";

pub fn write_checkpoint(model: &Model) -> String {
    let spec = model.spec();
    let mut out = format!(
        "{MAGIC} spec={} features={} window={} seed={}\n",
        spec.layers_string(),
        spec.input_features,
        spec.window,
        model.seed()
    );
    for (i, (layer, ls)) in model.layers().iter().zip(&spec.layers).enumerate() {
        let _ = writeln!(out, "layer {i} {}", ls.kind());
        for ((rows, cols), data) in layer.tensor_shapes().into_iter().zip(layer.tensors()) {
            let _ = writeln!(out, "tensor {rows} {cols}");
            for r in 0..rows {
                let line: Vec<String> = data[r * cols..(r + 1) * cols]
                    .iter()
                    .map(|v| format!("{v:.16e}"))
                    .collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
    }
    out
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(text: &str) -> Result<Model> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let parse_err = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty checkpoint"))?;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| parse_err(1, "missing checkpoint header"))?;
    let mut layers = None;
    let mut features = None;
    let mut window = None;
    let mut seed = None;
    for field in rest.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, "malformed header field"))?;
        match k {
            "spec" => layers = Some(parse_layers(v)?),
            "features" => features = v.parse().ok(),
            "window" => window = v.parse().ok(),
            "seed" => seed = v.parse::<u64>().ok(),
            _ => return Err(parse_err(1, &format!("unknown header field `{k}`"))),
        }
    }
    let (Some(layers), Some(features), Some(window), Some(seed)) = (layers, features, window, seed)
    else {
        return Err(parse_err(1, "incomplete checkpoint header"));
    };
    let spec = ModelSpec::new(layers, features, window)?;
    let mut model = Model::zeros(&spec)?;
    model.set_seed(seed);

    for i in 0..spec.layers.len() {
        let (n, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "truncated checkpoint"))?;
        if line != format!("layer {i} {}", spec.layers[i].kind()) {
            return Err(parse_err(n, &format!("expected block for layer {i}")));
        }
        let shapes = model.layers()[i].tensor_shapes();
        for (ti, (rows, cols)) in shapes.into_iter().enumerate() {
            let (n, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, "truncated checkpoint"))?;
            if line != format!("tensor {rows} {cols}") {
                return Err(parse_err(n, &format!("expected tensor {rows}x{cols}")));
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(0, "truncated checkpoint"))?;
                let row = line
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| parse_err(n, "bad float"))?;
                if row.len() != cols {
                    return Err(parse_err(n, &format!("expected {cols} values")));
                }
                values.extend(row);
            }
            model.layer_tensors_mut(i)[ti].copy_from_slice(&values);
        }
    }
    if let Some((n, extra)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(parse_err(
            n,
            &format!("unexpected trailing content `{extra}`"),
        ));
    }
    debug_assert_eq!(
        model.num_params(),
        model.tensors().iter().map(|t| t.len()).sum::<usize>()
    );
    Ok(model)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_bitwise() {
        let spec = ModelSpec::lstm_gru_scaled(5, 3, 4, 6);
        let model = Model::from_seed(&spec, 77).unwrap();
        let text = write_checkpoint(&model);
        assert!(text.starts_with("rnnquant-checkpoint v1 spec=lstm(5,relu)>dropout(0.2)>gru(3)"));
        let back = read_checkpoint(&text).unwrap();
        assert_eq!(back.seed(), 77);
        for (a, b) in model.tensors().iter().zip(back.tensors()) {
            let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(write_checkpoint(&back), text);
    }

    #[test]
    fn reports_corruption_with_line() {
        let spec = ModelSpec::from_name("gru(2)>dense(1,linear)", 1, 2).unwrap();
        let text = write_checkpoint(&Model::from_seed(&spec, 1).unwrap());
        let broken = text.replacen("tensor 2 3", "tensor 3 3", 1);
        assert!(matches!(
            read_checkpoint(&broken),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(read_checkpoint("nonsense").is_err());
    }
}
