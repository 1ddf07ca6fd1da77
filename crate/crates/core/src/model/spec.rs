use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cells::Activation;
use crate::error::{Error, Result};

/// One entry of a layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Rnn {
        hidden: usize,
    },
    /// `post` is applied elementwise to every emitted `h_t`; the recurrence
    /// itself carries the raw state.
    Lstm {
        hidden: usize,
        post: Activation,
    },
    Gru {
        hidden: usize,
    },
    Dropout {
        rate: f64,
    },
    Dense {
        units: usize,
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn is_recurrent(&self) -> bool {
        matches!(
            self,
            LayerSpec::Rnn { .. } | LayerSpec::Lstm { .. } | LayerSpec::Gru { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Rnn { .. } => "rnn",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Gru { .. } => "gru",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Dense { .. } => "dense",
        }
    }

    fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::Spec(format!("cannot parse layer `{text}`"));
        let open = text.find('(').ok_or_else(bad)?;
        if !text.ends_with(')') {
            return Err(bad());
        }
        let name = text[..open].trim().to_ascii_lowercase();
        let args: Vec<&str> = text[open + 1..text.len() - 1]
            .split(',')
            .map(str::trim)
            .collect();
        let size = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let act = |s: &str| match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            _ => Err(bad()),
        };
        match (name.as_str(), args.as_slice()) {
            ("rnn", [h]) => Ok(LayerSpec::Rnn { hidden: size(h)? }),
            ("gru", [h]) => Ok(LayerSpec::Gru { hidden: size(h)? }),
            ("lstm", [h]) => Ok(LayerSpec::Lstm {
                hidden: size(h)?,
                post: Activation::Linear,
            }),
            ("lstm", [h, a]) => Ok(LayerSpec::Lstm {
                hidden: size(h)?,
                post: act(a)?,
            }),
            ("dropout", [r]) => Ok(LayerSpec::Dropout {
                rate: r.parse().map_err(|_| bad())?,
            }),
            ("dense", [n, a]) => Ok(LayerSpec::Dense {
                units: size(n)?,
                activation: act(a)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Rnn { hidden } => write!(f, "rnn({hidden})"),
            LayerSpec::Lstm { hidden, post } => write!(f, "lstm({hidden},{})", post.name()),
            LayerSpec::Gru { hidden } => write!(f, "gru({hidden})"),
            LayerSpec::Dropout { rate } => write!(f, "dropout({rate})"),
            LayerSpec::Dense { units, activation } => {
                write!(f, "dense({units},{})", activation.name())
            }
        }
    }
}

/// Layer stack plus the input geometry it consumes (`window x input_features`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub input_features: usize,
    pub window: usize,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>, input_features: usize, window: usize) -> Result<Self> {
        let spec = ModelSpec {
            layers,
            input_features,
            window,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// lstm(256, relu) -> dropout(0.2) -> dense(32, relu) -> dense(1, linear)
    pub fn paper(input_features: usize, window: usize) -> Self {
        Self::paper_scaled(256, input_features, window)
    }

    pub fn paper_scaled(lstm: usize, input_features: usize, window: usize) -> Self {
        ModelSpec {
            layers: vec![
                LayerSpec::Lstm {
                    hidden: lstm,
                    post: Activation::Relu,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Dense {
                    units: 32,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    units: 1,
                    activation: Activation::Linear,
                },
            ],
            input_features,
            window,
        }
    }

    /// lstm(256, relu) -> dropout(0.2) -> gru(128) -> dense(32, relu) -> dense(1, linear)
    pub fn lstm_gru(input_features: usize, window: usize) -> Self {
        Self::lstm_gru_scaled(256, 128, input_features, window)
    }

    pub fn lstm_gru_scaled(lstm: usize, gru: usize, input_features: usize, window: usize) -> Self {
        ModelSpec {
            layers: vec![
                LayerSpec::Lstm {
                    hidden: lstm,
                    post: Activation::Relu,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Gru { hidden: gru },
                LayerSpec::Dense {
                    units: 32,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    units: 1,
                    activation: Activation::Linear,
                },
            ],
            input_features,
            window,
        }
    }

    /// Accepts a preset name (`paper`, `lstm-gru`) or a layer string such as
    /// `gru(8)>dense(1,linear)`.
    pub fn from_name(name: &str, input_features: usize, window: usize) -> Result<Self> {
        let spec = match name.trim() {
            "paper" => Self::paper(input_features, window),
            "lstm-gru" => Self::lstm_gru(input_features, window),
            other => ModelSpec {
                layers: parse_layers(other)?,
                input_features,
                window,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn layers_string(&self) -> String {
        self.layers
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(">")
    }

    /// Index one past the last recurrent layer. Layers before it map
    /// sequences to sequences; layers from it on act on the final step.
    pub(crate) fn sequence_end(&self) -> usize {
        self.layers
            .iter()
            .rposition(LayerSpec::is_recurrent)
            .map_or(0, |i| i + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_features == 0 || self.window == 0 {
            return Err(Error::Spec(
                "input_features and window must be at least 1".into(),
            ));
        }
        let Some(first) = self
            .layers
            .iter()
            .position(|l| !matches!(l, LayerSpec::Dropout { .. }))
        else {
            return Err(Error::Spec("model has no layers".into()));
        };
        if !self.layers[first].is_recurrent() {
            return Err(Error::Spec(format!(
                "layer {first} `{}` follows no recurrent layer",
                self.layers[first]
            )));
        }
        let mut seen_dense = false;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Rnn { hidden }
                | LayerSpec::Gru { hidden }
                | LayerSpec::Lstm { hidden, .. } => {
                    if seen_dense {
                        return Err(Error::Spec(format!(
                            "layer {i} `{layer}` is recurrent but follows a dense layer"
                        )));
                    }
                    if hidden == 0 {
                        return Err(Error::Spec(format!("layer {i} `{layer}` has zero width")));
                    }
                }
                LayerSpec::Dense { units, .. } => {
                    seen_dense = true;
                    if units == 0 {
                        return Err(Error::Spec(format!("layer {i} `{layer}` has zero width")));
                    }
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::Spec(format!(
                            "layer {i} `{layer}` rate outside [0, 1)"
                        )));
                    }
                }
            }
        }
        match self.layers.last() {
            Some(LayerSpec::Dense {
                units: 1,
                activation: Activation::Linear,
            }) => Ok(()),
            Some(last) => Err(Error::Spec(format!(
                "layer {} `{last}` must be dense(1,linear)",
                self.layers.len() - 1
            ))),
            None => unreachable!(),
        }
    }

    /// Output width of each layer, given the input feature count.
    pub(crate) fn widths(&self) -> Vec<(usize, usize)> {
        let mut width = self.input_features;
        self.layers
            .iter()
            .map(|l| {
                let input = width;
                width = match *l {
                    LayerSpec::Rnn { hidden }
                    | LayerSpec::Gru { hidden }
                    | LayerSpec::Lstm { hidden, .. } => hidden,
                    LayerSpec::Dense { units, .. } => units,
                    LayerSpec::Dropout { .. } => width,
                };
                (input, width)
            })
            .collect()
    }
}

pub fn parse_layers(text: &str) -> Result<Vec<LayerSpec>> {
    text.split('>')
        .filter(|s| !s.trim().is_empty())
        .map(LayerSpec::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_strings_round_trip() {
        let spec = ModelSpec::lstm_gru(8, 12);
        let text = spec.layers_string();
        assert_eq!(
            text,
            "lstm(256,relu)>dropout(0.2)>gru(128)>dense(32,relu)>dense(1,linear)"
        );
        assert_eq!(parse_layers(&text).unwrap(), spec.layers);
    }

    #[test]
    fn rejects_bad_stacks() {
        let err = ModelSpec::from_name("dense(32,relu)>dense(1,linear)", 8, 12).unwrap_err();
        assert!(
            matches!(err, Error::Spec(ref m) if m.contains("layer 0")),
            "{err}"
        );
        assert!(ModelSpec::from_name("gru(4)>dense(2,linear)", 8, 12).is_err());
        assert!(
            ModelSpec::from_name("gru(4)>dense(3,relu)>gru(2)>dense(1,linear)", 8, 12).is_err()
        );
        assert!(ModelSpec::from_name("gru(4)>dropout(1.5)>dense(1,linear)", 8, 12).is_err());
        assert!(ModelSpec::from_name("conv(3)", 8, 12).is_err());
        assert!(ModelSpec::from_name("gru(4)>dense(1,linear)", 0, 12).is_err());
    }
}
