use serde::{Deserialize, Serialize};

use super::{DateRange, FeaturePanel};
use crate::error::{Error, Result};

/// Per-feature z-score parameters estimated on a training slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Indices (into the fitted panel's features) that are kept.
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    /// Population standard deviation of each kept feature; always positive.
    pub std: Vec<f64>,
    /// Names of zero-variance features that were dropped.
    pub dropped: Vec<String>,
}

/// Fits on rows with valid features dated inside `range`.
pub fn fit_normalizer(fp: &FeaturePanel, range: &DateRange) -> Result<Normalizer> {
    let f = fp.n_features();
    let mut sum = vec![0.0; f];
    let mut rows: Vec<&[f64]> = Vec::new();
    for (t, date) in fp.dates.iter().enumerate() {
        if !range.contains(*date) {
            continue;
        }
        for s in 0..fp.symbols.len() {
            if let Some(row) = fp.features(t, s) {
                rows.push(row);
                sum.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::data(format!(
            "no feature rows between {} and {}",
            range.start, range.end
        )));
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut var = vec![0.0; f];
    for row in &rows {
        for k in 0..f {
            var[k] += (row[k] - mean[k]).powi(2);
        }
    }
    let mut out = Normalizer {
        kept: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        dropped: Vec::new(),
    };
    for k in 0..f {
        let sd = (var[k] / n).sqrt();
        if sd > 1e-12 * mean[k].abs().max(1.0) {
            out.kept.push(k);
            out.mean.push(mean[k]);
            out.std.push(sd);
        } else {
            log::warn!("dropping zero-variance feature `{}`", fp.names[k]);
            out.dropped.push(fp.names[k].clone());
        }
    }
    Ok(out)
}

/// Standardizes kept features and removes dropped ones. Labels are untouched.
pub fn apply_normalizer(n: &Normalizer, fp: &FeaturePanel) -> FeaturePanel {
    let mut out = fp.project(&n.kept);
    let f = n.kept.len();
    for (c, ok) in out.feature_ok.iter().enumerate() {
        if !ok {
            continue;
        }
        for k in 0..f {
            let v = &mut out.values[c * f + k];
            *v = (*v - n.mean[k]) / n.std[k];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn column_panel(cols: &[Vec<f64>]) -> FeaturePanel {
        let rows = cols[0].len();
        let start = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
        FeaturePanel {
            dates: (0..rows)
                .map(|i| start + chrono::Duration::weeks(i as i64))
                .collect(),
            symbols: vec!["A".into()],
            names: (0..cols.len()).map(|k| format!("f{k}")).collect(),
            values: (0..rows)
                .flat_map(|r| cols.iter().map(move |c| c[r]))
                .collect(),
            labels: vec![0.0; rows],
            feature_ok: vec![true; rows],
            label_ok: vec![true; rows],
        }
    }

    fn all(fp: &FeaturePanel) -> DateRange {
        DateRange {
            start: fp.dates[0],
            end: *fp.dates.last().unwrap(),
        }
    }

    #[test]
    fn standardizes_hand_column() {
        let fp = column_panel(&[vec![1.0, 2.0, 3.0]]);
        let n = fit_normalizer(&fp, &all(&fp)).unwrap();
        assert_eq!(n.mean, vec![2.0]);
        let out = apply_normalizer(&n, &fp);
        let got: Vec<f64> = (0..3).map(|t| out.features(t, 0).unwrap()[0]).collect();
        for (g, w) in got.iter().zip([-1.2247, 0.0, 1.2247]) {
            assert!((g - w).abs() < 1e-4);
        }
    }

    #[test]
    fn standardized_input_is_unchanged() {
        let col = vec![-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        let fp = column_panel(std::slice::from_ref(&col));
        let out = apply_normalizer(&fit_normalizer(&fp, &all(&fp)).unwrap(), &fp);
        for (t, want) in col.iter().enumerate() {
            assert!((out.features(t, 0).unwrap()[0] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn drops_constant_columns() {
        let fp = column_panel(&[vec![1.0, 2.0, 4.0], vec![0.1, 0.1, 0.1]]);
        let n = fit_normalizer(&fp, &all(&fp)).unwrap();
        assert_eq!(n.dropped, vec!["f1".to_string()]);
        let out = apply_normalizer(&n, &fp);
        assert_eq!(out.n_features(), 1);
    }

    #[test]
    fn fitted_slice_has_zero_mean_unit_std() {
        let fp = column_panel(&[
            vec![3.0, 9.5, -2.0, 4.4, 7.1],
            vec![0.01, 0.02, -0.05, 0.03, 0.0],
        ]);
        let out = apply_normalizer(&fit_normalizer(&fp, &all(&fp)).unwrap(), &fp);
        for k in 0..2 {
            let xs: Vec<f64> = (0..5).map(|t| out.features(t, 0).unwrap()[k]).collect();
            let m = xs.iter().sum::<f64>() / 5.0;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 5.0).sqrt();
            assert!(m.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_range_is_an_error() {
        let fp = column_panel(&[vec![1.0, 2.0]]);
        let d = NaiveDate::from_ymd_opt(1999, 1, 1).unwrap();
        assert!(fit_normalizer(&fp, &DateRange { start: d, end: d }).is_err());
    }
}
