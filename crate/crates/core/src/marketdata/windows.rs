use chrono::NaiveDate;

use super::FeaturePanel;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Where a supervised sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleInfo {
    pub symbol: usize,
    /// Date index of the last window row; the label is the return from here
    /// to the next date.
    pub anchor: usize,
    pub feature_end: NaiveDate,
    pub label_date: NaiveDate,
}

/// Supervised windows `X[n]` (L x F) with next-period return targets.
#[derive(Debug, Clone, Default)]
pub struct SequenceDataset {
    pub inputs: Vec<Matrix>,
    pub targets: Vec<f64>,
    /// Empty when the dataset was assembled by hand.
    pub samples: Vec<SampleInfo>,
}

impl SequenceDataset {
    pub fn from_parts(inputs: Vec<Matrix>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::dim(format!(
                "{} windows but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(first) = inputs.first() {
            if let Some(bad) = inputs.iter().position(|m| m.shape() != first.shape()) {
                return Err(Error::dim(format!(
                    "window {bad} has shape {:?}, expected {:?}",
                    inputs[bad].shape(),
                    first.shape()
                )));
            }
        }
        Ok(SequenceDataset {
            inputs,
            targets,
            samples: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Keeps the samples at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> SequenceDataset {
        SequenceDataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            samples: if self.samples.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.samples[i]).collect()
            },
        }
    }

    fn push(&mut self, fp: &FeaturePanel, s: usize, t: usize, window: usize) -> bool {
        let lo = t + 1 - window;
        if !fp.label_ok[fp.cell(t, s)] || !(lo..=t).all(|u| fp.feature_ok[fp.cell(u, s)]) {
            return false;
        }
        let f = fp.n_features();
        let mut data = Vec::with_capacity(window * f);
        for u in lo..=t {
            data.extend_from_slice(fp.features(u, s).expect("checked above"));
        }
        self.inputs
            .push(Matrix::new(window, f, data).expect("finite features"));
        self.targets.push(fp.labels[fp.cell(t, s)]);
        self.samples.push(SampleInfo {
            symbol: s,
            anchor: t,
            feature_end: fp.dates[t],
            label_date: fp.dates[t + 1],
        });
        true
    }
}

/// Windows for a single symbol, one per valid anchor date.
pub fn make_supervised(fp: &FeaturePanel, symbol: &str, window: usize) -> Result<SequenceDataset> {
    let s = fp
        .symbol_index(symbol)
        .ok_or_else(|| Error::data(format!("unknown symbol `{symbol}`")))?;
    if window == 0 {
        return Err(Error::config("window length must be at least 1"));
    }
    let mut out = SequenceDataset::default();
    for t in window.saturating_sub(1)..fp.dates.len() {
        out.push(fp, s, t, window);
    }
    if out.is_empty() {
        log::warn!("window length {window} leaves no samples for `{symbol}`");
    }
    Ok(out)
}

/// Pooled windows across all symbols, date-major, for anchors accepted by
/// `keep(anchor_index, anchor_date, label_date)`.
pub fn make_windows(
    fp: &FeaturePanel,
    window: usize,
    keep: impl Fn(usize, NaiveDate, NaiveDate) -> bool,
) -> Result<SequenceDataset> {
    if window == 0 {
        return Err(Error::config("window length must be at least 1"));
    }
    let mut out = SequenceDataset::default();
    let n = fp.dates.len();
    for t in window.saturating_sub(1)..n.saturating_sub(1) {
        if !keep(t, fp.dates[t], fp.dates[t + 1]) {
            continue;
        }
        for s in 0..fp.symbols.len() {
            out.push(fp, s, t, window);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{build_features, gen_synthetic_panel, SynthConfig};

    fn toy(n: usize) -> FeaturePanel {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let mut labels = vec![0.0; n];
        let mut label_ok = vec![true; n];
        label_ok[n - 1] = false;
        for (t, l) in labels.iter_mut().enumerate() {
            *l = t as f64 / 100.0;
        }
        FeaturePanel {
            dates: (0..n)
                .map(|i| start + chrono::Duration::weeks(i as i64))
                .collect(),
            symbols: vec!["X".into()],
            names: vec!["a".into(), "b".into()],
            values: (0..n).flat_map(|t| [t as f64, -(t as f64)]).collect(),
            labels,
            feature_ok: vec![true; n],
            label_ok,
        }
    }

    #[test]
    fn counts_contiguous_windows() {
        // 11 dates, the last without a label: T = 10 valid anchors.
        let fp = toy(11);
        assert_eq!(make_supervised(&fp, "X", 4).unwrap().len(), 7);
        assert_eq!(make_supervised(&fp, "X", 10).unwrap().len(), 1);
        assert!(make_supervised(&fp, "X", 11).unwrap().is_empty());
        assert!(make_supervised(&fp, "X", 0).is_err());
    }

    #[test]
    fn window_rows_and_target_line_up() {
        let fp = toy(11);
        let ds = make_supervised(&fp, "X", 3).unwrap();
        let first = &ds.inputs[0];
        assert_eq!(first.shape(), (3, 2));
        assert_eq!(first.row(2), &[2.0, -2.0]);
        assert_eq!(ds.targets[0], 0.02);
        assert_eq!(ds.samples[0].anchor, 2);
    }

    #[test]
    fn no_feature_date_reaches_the_label_date() {
        let panel = gen_synthetic_panel(&SynthConfig {
            n_symbols: 4,
            n_weeks: 60,
            ..SynthConfig::default()
        })
        .unwrap();
        let fp = build_features(&panel);
        let ds = make_windows(&fp, 6, |_, _, _| true).unwrap();
        assert!(!ds.is_empty());
        for info in &ds.samples {
            assert!(info.feature_end < info.label_date);
            assert_eq!(fp.dates[info.anchor], info.feature_end);
        }
    }

    #[test]
    fn gaps_break_windows() {
        let mut fp = toy(11);
        fp.feature_ok[5] = false;
        let ds = make_supervised(&fp, "X", 3).unwrap();
        let anchors: Vec<usize> = ds.samples.iter().map(|s| s.anchor).collect();
        assert_eq!(anchors, vec![2, 3, 4, 8, 9]);
    }

    #[test]
    fn from_parts_checks_shapes() {
        assert!(SequenceDataset::from_parts(vec![Matrix::zeros(2, 2)], vec![]).is_err());
        assert!(SequenceDataset::from_parts(
            vec![Matrix::zeros(2, 2), Matrix::zeros(3, 2)],
            vec![0.0, 0.0]
        )
        .is_err());
    }
}
