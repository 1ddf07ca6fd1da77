use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{BarPanel, Ohlcv};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Momentum lookback (in weeks) of the planted signal.
const MOMENTUM_WEEKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_symbols: usize,
    pub n_weeks: usize,
    /// Correlation between standardized 4-week momentum and next week's
    /// return shock; 0 gives a pure random walk.
    pub signal_strength: f64,
    pub start: NaiveDate,
    pub weekly_vol: f64,
    pub drift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_symbols: 50,
            n_weeks: 627,
            signal_strength: 0.0,
            start: NaiveDate::from_ymd_opt(2008, 1, 4).expect("valid date"),
            weekly_vol: 0.03,
            drift: 0.001,
        }
    }
}

/// Geometric random walk panel with a cross-sectional momentum signal.
///
/// Each week, `r = drift + vol * (s * z + sqrt(1 - s^2) * e)` where `z` is the
/// symbol's 4-week return as of the previous week, standardized across
/// symbols, and `e` is independent standard normal noise.
pub fn gen_synthetic_panel(cfg: &SynthConfig) -> Result<BarPanel> {
    if cfg.n_symbols < 2 {
        return Err(Error::config("synthetic panel needs at least 2 symbols"));
    }
    if cfg.n_weeks < 30 {
        return Err(Error::config("synthetic panel needs at least 30 weeks"));
    }
    if !(0.0..=1.0).contains(&cfg.signal_strength) {
        return Err(Error::config(format!(
            "signal strength {} outside [0, 1]",
            cfg.signal_strength
        )));
    }
    if !(cfg.weekly_vol.is_finite() && cfg.weekly_vol > 0.0 && cfg.drift.is_finite()) {
        return Err(Error::config(
            "weekly_vol must be positive and drift finite",
        ));
    }
    let (n_s, n_t) = (cfg.n_symbols, cfg.n_weeks);
    let s = cfg.signal_strength;
    let noise = (1.0 - s * s).sqrt();
    let mut rng = Rng::new(cfg.seed);

    let mut closes = vec![vec![0.0; n_t]; n_s];
    for c in closes.iter_mut() {
        c[0] = rng.uniform(10.0, 100.0);
    }
    let mut z = vec![0.0; n_s];
    for t in 1..n_t {
        let have_momentum = t > MOMENTUM_WEEKS;
        if have_momentum {
            let mom: Vec<f64> = closes
                .iter()
                .map(|c| c[t - 1] / c[t - 1 - MOMENTUM_WEEKS] - 1.0)
                .collect();
            let mean = mom.iter().sum::<f64>() / n_s as f64;
            let sd = (mom.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n_s as f64).sqrt();
            for (zi, m) in z.iter_mut().zip(&mom) {
                *zi = if sd > 0.0 { (m - mean) / sd } else { 0.0 };
            }
        }
        for (i, c) in closes.iter_mut().enumerate() {
            let e = rng.normal();
            let shock = if have_momentum {
                s * z[i] + noise * e
            } else {
                e
            };
            let r = (cfg.drift + cfg.weekly_vol * shock).max(-0.9);
            c[t] = c[t - 1] * (1.0 + r);
        }
    }

    let dates: Vec<NaiveDate> = (0..n_t)
        .map(|t| cfg.start + chrono::Duration::weeks(t as i64))
        .collect();
    let width = n_s.to_string().len().max(3);
    let symbols: Vec<String> = (0..n_s).map(|i| format!("S{i:0width$}")).collect();
    let mut bars = Vec::with_capacity(n_s);
    for c in &closes {
        let mut row = Vec::with_capacity(n_t);
        for t in 0..n_t {
            let close = c[t];
            let open = if t == 0 {
                close * (1.0 + 0.005 * rng.normal()).max(0.5)
            } else {
                c[t - 1]
            };
            let top = open.max(close);
            let bottom = open.min(close);
            let high = top * (1.0 + 0.5 * cfg.weekly_vol * rng.normal().abs());
            let low = bottom * (-0.5 * cfg.weekly_vol * rng.normal().abs()).exp();
            let volume = (1e6 * (0.3 * rng.normal()).exp()).round();
            row.push(Some(Ohlcv {
                open,
                high,
                low,
                close,
                volume,
            }));
        }
        bars.push(row);
    }
    Ok(BarPanel::from_grid(dates, symbols, bars))
}
