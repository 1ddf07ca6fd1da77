//! Forecast-error metrics and the portfolio indicator report.
//!
//! Standard deviations are sample (n - 1) estimates throughout. Weekly data
//! annualizes with 52 periods per year.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEEKS_PER_YEAR: f64 = 52.0;

fn check_pair(actual: &[f64], pred: &[f64]) -> Result<()> {
    if actual.is_empty() || actual.len() != pred.len() {
        return Err(Error::dim(format!(
            "metric over {} actual and {} predicted values",
            actual.len(),
            pred.len()
        )));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(actual, pred)?;
    if let Some(i) = actual.iter().position(|&a| a == 0.0) {
        return Err(Error::UndefinedMetric(format!("mape: actual[{i}] is zero")));
    }
    let sum: f64 = actual
        .iter()
        .zip(pred)
        .map(|(a, p)| ((a - p) / a).abs())
        .sum();
    Ok(100.0 * sum / actual.len() as f64)
}

pub fn mae(actual: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(actual, pred)?;
    Ok(actual
        .iter()
        .zip(pred)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / actual.len() as f64)
}

pub fn rmse(actual: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(actual, pred)?;
    Ok((actual
        .iter()
        .zip(pred)
        .map(|(a, p)| (a - p).powi(2))
        .sum::<f64>()
        / actual.len() as f64)
        .sqrt())
}

/// Fraction of positions where the signs agree; zero only matches zero.
pub fn directional_accuracy(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(actual, pred)?;
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let hits = pred
        .iter()
        .zip(actual)
        .filter(|(p, a)| sign(**p) == sign(**a))
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

fn check_equity(equity: &[f64]) -> Result<()> {
    if equity.is_empty() {
        return Err(Error::data("empty equity series"));
    }
    if let Some(i) = equity.iter().position(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::data(format!(
            "equity[{i}] = {} is not positive",
            equity[i]
        )));
    }
    Ok(())
}

/// Largest peak-to-trough decline as a fraction of the peak.
pub fn max_drawdown(equity: &[f64]) -> Result<f64> {
    check_equity(equity)?;
    let mut peak = equity[0];
    let mut worst = 0.0_f64;
    for &e in equity {
        peak = peak.max(e);
        worst = worst.max((peak - e) / peak);
    }
    Ok(worst)
}

pub fn sharpe(returns: &[f64], rf_per_period: f64, periods_per_year: f64) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::UndefinedMetric(
            "sharpe needs at least two returns".into(),
        ));
    }
    let excess: Vec<f64> = returns.iter().map(|r| r - rf_per_period).collect();
    let sd = sample_std(&excess);
    if !(sd > 0.0) {
        return Err(Error::UndefinedMetric(
            "sharpe: excess returns have zero variance".into(),
        ));
    }
    Ok(mean(&excess) / sd * periods_per_year.sqrt())
}

/// OLS of strategy excess returns on benchmark excess returns. Returns the
/// annualized intercept and the slope.
pub fn alpha_beta(
    strategy: &[f64],
    benchmark: &[f64],
    rf_per_period: f64,
    periods_per_year: f64,
) -> Result<(f64, f64)> {
    if strategy.len() != benchmark.len() || strategy.len() < 2 {
        return Err(Error::dim(format!(
            "alpha/beta over {} strategy and {} benchmark returns",
            strategy.len(),
            benchmark.len()
        )));
    }
    let s: Vec<f64> = strategy.iter().map(|r| r - rf_per_period).collect();
    let b: Vec<f64> = benchmark.iter().map(|r| r - rf_per_period).collect();
    let (ms, mb) = (mean(&s), mean(&b));
    let var = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    if !(var > 0.0) {
        return Err(Error::UndefinedMetric(
            "beta: benchmark returns have zero variance".into(),
        ));
    }
    let cov = s
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - ms) * (y - mb))
        .sum::<f64>();
    let beta = cov / var;
    Ok(((ms - beta * mb) * periods_per_year, beta))
}

/// `(e_end / e_start)^(periods_per_year / n_periods) - 1`
pub fn annualized_return(equity: &[f64], periods_per_year: f64) -> Result<f64> {
    check_equity(equity)?;
    if equity.len() < 2 {
        return Err(Error::data("annualized return needs at least one period"));
    }
    let n = (equity.len() - 1) as f64;
    Ok((equity[equity.len() - 1] / equity[0]).powf(periods_per_year / n) - 1.0)
}

/// Annualized sample standard deviation of period returns.
pub fn volatility(returns: &[f64], periods_per_year: f64) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::data("volatility needs at least two returns"));
    }
    Ok(sample_std(returns) * periods_per_year.sqrt())
}

pub fn total_return(equity: &[f64]) -> Result<f64> {
    check_equity(equity)?;
    Ok(equity[equity.len() - 1] / equity[0] - 1.0)
}

pub fn period_returns(equity: &[f64]) -> Vec<f64> {
    equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

/// Portfolio indicators of a strategy against its benchmark. Ratios that are
/// undefined for the given series (zero variance) serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub strategy_return: f64,
    pub annualized_return: f64,
    pub benchmark_return: f64,
    pub excess_return: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
    pub strategy_volatility: f64,
    pub benchmark_volatility: f64,
}

impl IndicatorReport {
    pub fn from_equity(
        strategy: &[f64],
        benchmark: &[f64],
        rf_per_period: f64,
        periods_per_year: f64,
    ) -> Result<Self> {
        if strategy.len() != benchmark.len() {
            return Err(Error::dim("strategy and benchmark equity differ in length"));
        }
        let sr = period_returns(strategy);
        let br = period_returns(benchmark);
        let undefined_ok = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedMetric(_)) => Ok(None),
            Err(e) => Err(e),
        };
        let (alpha, beta) = match alpha_beta(&sr, &br, rf_per_period, periods_per_year) {
            Ok((a, b)) => (Some(a), Some(b)),
            Err(Error::UndefinedMetric(_)) => (None, None),
            Err(e) => return Err(e),
        };
        let strategy_return = total_return(strategy)?;
        let benchmark_return = total_return(benchmark)?;
        Ok(IndicatorReport {
            strategy_return,
            annualized_return: annualized_return(strategy, periods_per_year)?,
            benchmark_return,
            excess_return: strategy_return - benchmark_return,
            alpha,
            beta,
            sharpe: undefined_ok(sharpe(&sr, rf_per_period, periods_per_year))?,
            max_drawdown: max_drawdown(strategy)?,
            strategy_volatility: volatility(&sr, periods_per_year)?,
            benchmark_volatility: volatility(&br, periods_per_year)?,
        })
    }

    /// Fixed-width table for console output.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.6}"));
        [
            ("strategy_return", format!("{:.6}", self.strategy_return)),
            (
                "annualized_return",
                format!("{:.6}", self.annualized_return),
            ),
            ("benchmark_return", format!("{:.6}", self.benchmark_return)),
            ("excess_return", format!("{:.6}", self.excess_return)),
            ("alpha", opt(self.alpha)),
            ("beta", opt(self.beta)),
            ("sharpe", opt(self.sharpe)),
            ("max_drawdown", format!("{:.6}", self.max_drawdown)),
            (
                "strategy_volatility",
                format!("{:.6}", self.strategy_volatility),
            ),
            (
                "benchmark_volatility",
                format!("{:.6}", self.benchmark_volatility),
            ),
        ]
        .iter()
        .map(|(k, v)| format!("{k:<22}{v:>14}\n"))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mape_cases() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mape(&[100.0, 200.0], &[90.0, 220.0]).unwrap() - 10.0).abs() < 1e-12);
        assert!(
            matches!(mape(&[1.0, 0.0], &[1.0, 1.0]), Err(Error::UndefinedMetric(m)) if m.contains("[1]"))
        );
    }

    #[test]
    fn mae_rmse_cases() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let (a, p) = ([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]);
        assert!((mae(&a, &p).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((rmse(&a, &p).unwrap() - 0.816_496_580_927_726).abs() < 1e-12);
        assert_eq!(mae(&[3.0], &[1.5]).unwrap(), rmse(&[3.0], &[1.5]).unwrap());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn drawdown_cases() {
        assert_eq!(max_drawdown(&[1.0, 1.0, 1.5, 2.0]).unwrap(), 0.0);
        assert!((max_drawdown(&[1.0, 1.2, 0.9, 1.1]).unwrap() - 0.25).abs() < 1e-12);
        assert!((max_drawdown(&[1.0, 0.6]).unwrap() - 0.4).abs() < 1e-12);
        assert!(max_drawdown(&[]).is_err());
        assert!(max_drawdown(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn sharpe_cases() {
        assert_eq!(sharpe(&[0.01, -0.01], 0.0, 52.0).unwrap(), 0.0);
        assert!(matches!(
            sharpe(&[0.01; 5], 0.0, 52.0),
            Err(Error::UndefinedMetric(_))
        ));
        assert!((sharpe(&[0.02, 0.0, 0.04], 0.0, 52.0).unwrap() - 7.2111).abs() < 1e-3);
    }

    #[test]
    fn alpha_beta_cases() {
        let b = [0.01, -0.02, 0.03, 0.005];
        let (alpha, beta) = alpha_beta(&b, &b, 0.0, 52.0).unwrap();
        assert!(alpha.abs() < 1e-15 && (beta - 1.0).abs() < 1e-12);
        let s: Vec<f64> = b.iter().map(|x| 2.0 * x).collect();
        let (alpha, beta) = alpha_beta(&s, &b, 0.0, 52.0).unwrap();
        assert!(alpha.abs() < 1e-12 && (beta - 2.0).abs() < 1e-12);
        let s: Vec<f64> = b.iter().map(|x| x + 0.001).collect();
        let (alpha, beta) = alpha_beta(&s, &b, 0.0, 52.0).unwrap();
        assert!((alpha - 0.052).abs() < 1e-12 && (beta - 1.0).abs() < 1e-12);
        assert!(matches!(
            alpha_beta(&b, &[0.01; 4], 0.0, 52.0),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn annualization_cases() {
        let mut eq = vec![1.0; 53];
        eq[52] = 1.1;
        assert!((annualized_return(&eq, 52.0).unwrap() - 0.10).abs() < 1e-12);
        let flat = vec![1.0; 10];
        assert_eq!(annualized_return(&flat, 52.0).unwrap(), 0.0);
        assert_eq!(volatility(&period_returns(&flat), 52.0).unwrap(), 0.0);
        // returns with sample std exactly 0.02
        let r = [0.02, 0.0, 0.04];
        assert!((volatility(&r, 52.0).unwrap() - 0.02 * 52f64.sqrt()).abs() < 1e-12);
        assert!((volatility(&r, 52.0).unwrap() - 0.1442).abs() < 1e-4);
    }

    #[test]
    fn directional_accuracy_cases() {
        let a = [0.1, -0.2, 0.0];
        assert_eq!(directional_accuracy(&a, &a).unwrap(), 1.0);
        let neg: Vec<f64> = [0.1, -0.2, 0.3].iter().map(|v| -v).collect();
        assert_eq!(directional_accuracy(&neg, &[0.1, -0.2, 0.3]).unwrap(), 0.0);
        let acc = directional_accuracy(&[0.1, -0.2, 0.3], &[0.05, 0.1, 0.2]).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn report_serializes_undefined_as_null() {
        let flat = vec![1.0; 5];
        let report = IndicatorReport::from_equity(&flat, &flat, 0.0, 52.0).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["sharpe"].is_null() && json["beta"].is_null());
        assert_eq!(json["max_drawdown"], 0.0);
        assert_eq!(json.as_object().unwrap().len(), 10);
    }
}
