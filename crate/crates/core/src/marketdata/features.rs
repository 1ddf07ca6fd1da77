use chrono::NaiveDate;

use super::BarPanel;
use crate::error::{Error, Result};

/// Default per-(date, symbol) feature set.
pub const FEATURE_NAMES: [&str; 8] = [
    "ret_1w",
    "ret_4w",
    "ret_12w",
    "vol_4w",
    "vol_12w",
    "close_to_ma12",
    "volume_z_4w",
    "range_ratio",
];

/// Weeks of history (besides the current bar) every feature row needs.
pub const LOOKBACK: usize = 12;

/// Features and next-week labels on the panel's `date x symbol` grid.
///
/// Features at `t` only read bars at or before `t`; the label at `t` is
/// `close[t+1] / close[t] - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel {
    pub(crate) dates: Vec<NaiveDate>,
    pub(crate) symbols: Vec<String>,
    pub(crate) names: Vec<String>,
    /// `[t][s][f]`, flattened.
    pub(crate) values: Vec<f64>,
    /// `[t][s]`
    pub(crate) labels: Vec<f64>,
    pub(crate) feature_ok: Vec<bool>,
    pub(crate) label_ok: Vec<bool>,
}

impl FeaturePanel {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub(crate) fn cell(&self, t: usize, s: usize) -> usize {
        t * self.symbols.len() + s
    }

    pub fn features(&self, t: usize, s: usize) -> Option<&[f64]> {
        let c = self.cell(t, s);
        let f = self.n_features();
        self.feature_ok[c].then(|| &self.values[c * f..(c + 1) * f])
    }

    pub fn label(&self, t: usize, s: usize) -> Option<f64> {
        let c = self.cell(t, s);
        self.label_ok[c].then_some(self.labels[c])
    }

    /// Features and label both available.
    pub fn is_valid(&self, t: usize, s: usize) -> bool {
        let c = self.cell(t, s);
        self.feature_ok[c] && self.label_ok[c]
    }

    pub fn symbol_index(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Keeps only the named features, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FeaturePanel> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::config(format!("unknown feature `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.project(&idx))
    }

    pub(crate) fn project(&self, idx: &[usize]) -> FeaturePanel {
        let f = self.n_features();
        let cells = self.labels.len();
        let mut values = Vec::with_capacity(cells * idx.len());
        for c in 0..cells {
            values.extend(idx.iter().map(|&k| self.values[c * f + k]));
        }
        FeaturePanel {
            names: idx.iter().map(|&k| self.names[k].clone()).collect(),
            values,
            ..self.clone()
        }
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Computes the default feature set and next-week labels.
pub fn build_features(panel: &BarPanel) -> FeaturePanel {
    let (n_t, n_s, n_f) = (panel.n_dates(), panel.n_symbols(), FEATURE_NAMES.len());
    let mut values = vec![0.0; n_t * n_s * n_f];
    let mut labels = vec![0.0; n_t * n_s];
    let mut feature_ok = vec![false; n_t * n_s];
    let mut label_ok = vec![false; n_t * n_s];
    let short = n_t < LOOKBACK + 2;
    if short {
        log::warn!(
            "panel has {n_t} dates; features need at least {} so every row is masked",
            LOOKBACK + 2
        );
    }

    for s in 0..if short { 0 } else { n_s } {
        for t in 0..n_t {
            let c = t * n_s + s;
            if t + 1 < n_t {
                if let (Some(now), Some(next)) = (panel.bar(s, t), panel.bar(s, t + 1)) {
                    labels[c] = next.close / now.close - 1.0;
                    label_ok[c] = true;
                }
            }
            if t < LOOKBACK || (t - LOOKBACK..=t).any(|u| !panel.is_present(s, u)) {
                continue;
            }
            let bar = |u: usize| panel.bar(s, u).expect("presence checked");
            let close = |u: usize| bar(u).close;
            let ret = |u: usize| close(u) / close(u - 1) - 1.0;
            let rets4: Vec<f64> = (t - 3..=t).map(ret).collect();
            let rets12: Vec<f64> = (t - 11..=t).map(ret).collect();
            let ma12 = (t - 11..=t).map(close).sum::<f64>() / 12.0;
            let vols: Vec<f64> = (t - 3..=t).map(|u| bar(u).volume).collect();
            let vol_mean = vols.iter().sum::<f64>() / 4.0;
            let vol_sd = sample_std(&vols);
            let volume_z = if vol_sd > 0.0 {
                (bar(t).volume - vol_mean) / vol_sd
            } else {
                0.0
            };
            let now = bar(t);
            let row = [
                ret(t),
                close(t) / close(t - 4) - 1.0,
                close(t) / close(t - 12) - 1.0,
                sample_std(&rets4),
                sample_std(&rets12),
                close(t) / ma12,
                volume_z,
                (now.high - now.low) / now.close,
            ];
            values[c * n_f..(c + 1) * n_f].copy_from_slice(&row);
            feature_ok[c] = true;
        }
    }

    FeaturePanel {
        dates: panel.dates().to_vec(),
        symbols: panel.symbols().to_vec(),
        names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
        labels,
        feature_ok,
        label_ok,
    }
}
