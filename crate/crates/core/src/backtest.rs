//! Walk-forward retrain, predict, rank and rebalance.
//!
//! Every rolling split trains a fresh pooled model on its training range and
//! scores each symbol on every test week. The top `k` predictions are held
//! equal-weighted for one week. The equal-weight universe (or a supplied
//! benchmark series) is the reference.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{
    apply_normalizer, build_features, fit_normalizer, make_windows, rolling_splits, BarPanel,
    FeaturePanel, RollingSplit, SequenceDataset, Span, WindowMode, DATE_FORMAT,
};
use crate::metrics::{IndicatorReport, WEEKS_PER_YEAR};
use crate::model::{evaluate, train, Model, ModelSpec, TrainConfig, TrainHistory};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predictor {
    /// Train a model per split.
    Model,
    /// Use the realized next-week return as the prediction. Test hook.
    PerfectForesight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub top_k: usize,
    /// Cost per unit of turnover, in basis points.
    pub cost_bps: f64,
    pub initial_train: Span,
    pub step: Span,
    pub window_mode: WindowMode,
    /// Preset name or layer string, see [`ModelSpec::from_name`].
    pub model: String,
    pub window: usize,
    /// Feature subset by name; empty keeps the full default set.
    pub features: Vec<String>,
    pub train: TrainConfig,
    pub seed: u64,
    /// Random subsample of each split's training windows, if set.
    pub max_train_samples: Option<usize>,
    /// Run splits on the rayon pool. Results do not depend on this.
    pub parallel: bool,
    pub rf_per_period: f64,
    pub periods_per_year: f64,
    pub predictor: Predictor,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            top_k: 30,
            cost_bps: 0.0,
            initial_train: Span::Years(3),
            step: Span::Weeks(13),
            window_mode: WindowMode::Expanding,
            model: "lstm-gru".into(),
            window: 12,
            features: Vec::new(),
            train: TrainConfig::default(),
            seed: 0,
            max_train_samples: None,
            parallel: true,
            rf_per_period: 0.0,
            periods_per_year: WEEKS_PER_YEAR,
            predictor: Predictor::Model,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::config("top_k must be at least 1"));
        }
        if !(self.cost_bps >= 0.0 && self.cost_bps.is_finite()) {
            return Err(Error::config("cost_bps must be a nonnegative number"));
        }
        if self.window == 0 {
            return Err(Error::config("window length must be at least 1"));
        }
        if self.max_train_samples == Some(0) {
            return Err(Error::config("max_train_samples must be positive when set"));
        }
        if !(self.periods_per_year > 0.0) {
            return Err(Error::config("periods_per_year must be positive"));
        }
        if self.predictor == Predictor::Model {
            self.train.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub date: NaiveDate,
    pub weights: BTreeMap<String, f64>,
}

/// External benchmark level series keyed by date.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Benchmark {
    pub closes: BTreeMap<NaiveDate, f64>,
}

impl Benchmark {
    /// CSV with header `date,close`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                msg: e.to_string(),
            })?
            .clone();
        if header.iter().collect::<Vec<_>>() != ["date", "close"] {
            return Err(Error::Parse {
                line: 1,
                msg: "benchmark header must be `date,close`".into(),
            });
        }
        let mut closes = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            let bad = |msg: String| Error::Parse { line, msg };
            let date = NaiveDate::parse_from_str(&rec[0], DATE_FORMAT)
                .map_err(|e| bad(format!("date: {e}")))?;
            let close: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|e| bad(format!("close: {e}")))?;
            if !(close > 0.0 && close.is_finite()) {
                return Err(bad(format!("close must be positive, got {close}")));
            }
            if closes.insert(date, close).is_some() {
                return Err(bad(format!("duplicate date {date}")));
            }
        }
        if closes.is_empty() {
            return Err(Error::EmptyPanel);
        }
        Ok(Benchmark { closes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(File::open(path).map_err(|e| Error::io(path, e))?)
    }

    fn period_return(&self, from: NaiveDate, to: NaiveDate) -> Result<f64> {
        match (self.closes.get(&from), self.closes.get(&to)) {
            (Some(a), Some(b)) => Ok(b / a - 1.0),
            _ => Err(Error::data(format!(
                "benchmark has no close for {from} or {to}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: RollingSplit,
    pub train_samples: usize,
    pub test_samples: usize,
    /// `None` for the perfect-foresight predictor.
    pub history: Option<TrainHistory>,
    /// Out-of-sample MSE of the split's model on its test windows.
    pub test_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    /// Decision dates, one per test week.
    pub dates: Vec<NaiveDate>,
    /// Date each week's return is realized.
    pub period_end: Vec<NaiveDate>,
    pub strategy_returns: Vec<f64>,
    pub benchmark_returns: Vec<f64>,
    /// Starts at 1; one entry longer than the return series.
    pub strategy_equity: Vec<f64>,
    pub benchmark_equity: Vec<f64>,
    pub portfolios: Vec<PortfolioState>,
    pub turnover: Vec<f64>,
    pub report: IndicatorReport,
    pub splits: Vec<SplitSummary>,
}

impl BacktestResult {
    /// `date,strategy,benchmark`; the first row is the starting point.
    pub fn write_equity_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("equity.csv", e);
        writeln!(w, "date,strategy,benchmark").map_err(io)?;
        let dates = self.dates.first().into_iter().chain(&self.period_end);
        for ((d, s), b) in dates.zip(&self.strategy_equity).zip(&self.benchmark_equity) {
            writeln!(w, "{},{s},{b}", d.format(DATE_FORMAT)).map_err(io)?;
        }
        Ok(())
    }

    /// `date,symbol,weight` for every held position.
    pub fn write_weights_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("weights.csv", e);
        writeln!(w, "date,symbol,weight").map_err(io)?;
        for p in &self.portfolios {
            for (sym, wt) in &p.weights {
                writeln!(w, "{},{sym},{wt}", p.date.format(DATE_FORMAT)).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        for (name, which) in [("equity.csv", 0), ("weights.csv", 1)] {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut out = BufWriter::new(file);
            if which == 0 {
                self.write_equity_csv(&mut out)?;
            } else {
                self.write_weights_csv(&mut out)?;
            }
            out.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// `e_0 = 1`, `e_t = e_{t-1} (1 + r_t)`.
pub fn equity_curve(returns: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    out.push(1.0);
    for (t, r) in returns.iter().enumerate() {
        if !(*r > -1.0) {
            return Err(Error::data(format!(
                "period {t} return {r} wipes out the portfolio"
            )));
        }
        out.push(out[t] * (1.0 + r));
    }
    Ok(out)
}

/// Top `k` by prediction, equal weight; ties go to the smaller key.
pub fn select_portfolio(predictions: &BTreeMap<String, f64>, k: usize) -> BTreeMap<String, f64> {
    if predictions.is_empty() {
        log::warn!("no predictions; holding a flat portfolio");
        return BTreeMap::new();
    }
    let ranked: Vec<(&String, f64)> = predictions.iter().map(|(s, p)| (s, *p)).collect();
    let picked = top_k(&ranked, k);
    let w = 1.0 / picked.len() as f64;
    picked.into_iter().map(|(s, _)| (s.clone(), w)).collect()
}

fn top_k<K: Ord + Copy>(preds: &[(K, f64)], k: usize) -> Vec<(K, f64)> {
    let mut v = preds.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

/// One week of a weights path: target weights per symbol and the returns
/// realized over the holding week.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub weights: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Portfolio return and turnover per period. Turnover is measured against
/// the previous weights after drifting with their realized returns, and
/// `cost_bps / 1e4 * turnover` is deducted from the period return.
pub fn simulate(periods: &[Period], cost_bps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rets = Vec::with_capacity(periods.len());
    let mut turnover = Vec::with_capacity(periods.len());
    let mut drifted: Vec<f64> = Vec::new();
    for (t, p) in periods.iter().enumerate() {
        if p.weights.len() != p.returns.len() {
            return Err(Error::dim(format!(
                "period {t}: weights and returns differ in length"
            )));
        }
        if drifted.len() != p.weights.len() {
            drifted = vec![0.0; p.weights.len()];
        }
        let tv = 0.5
            * p.weights
                .iter()
                .zip(&drifted)
                .map(|(n, o)| (n - o).abs())
                .sum::<f64>();
        let gross: f64 = p.weights.iter().zip(&p.returns).map(|(w, r)| w * r).sum();
        rets.push(gross - cost_bps / 1e4 * tv);
        turnover.push(tv);

        let grown: Vec<f64> = p
            .weights
            .iter()
            .zip(&p.returns)
            .map(|(w, r)| w * (1.0 + r))
            .collect();
        let total: f64 = grown.iter().sum();
        drifted = if total > 0.0 {
            grown.iter().map(|g| g / total).collect()
        } else {
            vec![0.0; grown.len()]
        };
    }
    Ok((rets, turnover))
}

pub(crate) fn select_features(fp: FeaturePanel, names: &[String]) -> Result<FeaturePanel> {
    if names.is_empty() {
        return Ok(fp);
    }
    fp.select(&names.iter().map(String::as_str).collect::<Vec<_>>())
}

/// Anchor-date predictions for one split: `(date index, [(symbol, prediction)])`.
type WeekPredictions = Vec<(usize, Vec<(usize, f64)>)>;

fn test_anchors(fp: &FeaturePanel, split: &RollingSplit) -> Vec<usize> {
    let dates = fp.dates();
    (0..dates.len().saturating_sub(1))
        .filter(|&t| split.test.contains(dates[t]))
        .collect()
}

fn group_by_anchor(ds: &SequenceDataset, preds: &[f64]) -> BTreeMap<usize, Vec<(usize, f64)>> {
    let mut out: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (info, p) in ds.samples.iter().zip(preds) {
        out.entry(info.anchor).or_default().push((info.symbol, *p));
    }
    out
}

fn run_split(
    fp: &FeaturePanel,
    split: &RollingSplit,
    cfg: &BacktestConfig,
) -> Result<(SplitSummary, WeekPredictions)> {
    let anchors = test_anchors(fp, split);
    let collect = |by_anchor: BTreeMap<usize, Vec<(usize, f64)>>| -> WeekPredictions {
        anchors
            .iter()
            .map(|t| (*t, by_anchor.get(t).cloned().unwrap_or_default()))
            .collect()
    };

    if cfg.predictor == Predictor::PerfectForesight {
        let test = make_windows(fp, cfg.window, |_, d, _| split.test.contains(d))?;
        let summary = SplitSummary {
            split: *split,
            train_samples: 0,
            test_samples: test.len(),
            history: None,
            test_mse: None,
        };
        return Ok((summary, collect(group_by_anchor(&test, &test.targets))));
    }

    let normalizer = fit_normalizer(fp, &split.train)?;
    let nfp = apply_normalizer(&normalizer, fp);
    let train_end = split.train.end;
    let train_start = split.train.start;
    let mut train_set = make_windows(&nfp, cfg.window, |_, d, label| {
        d >= train_start && label <= train_end
    })?;
    if train_set.is_empty() {
        return Err(Error::data(format!(
            "split {} has no complete training windows before {train_end}",
            split.index
        )));
    }
    let split_seed = cfg.seed ^ split.index as u64;
    let mut seeds = Rng::new(split_seed);
    let (init_seed, train_seed, sample_seed) =
        (seeds.next_u64(), seeds.next_u64(), seeds.next_u64());
    if let Some(cap) = cfg.max_train_samples {
        if train_set.len() > cap {
            let mut idx: Vec<usize> = (0..train_set.len()).collect();
            Rng::new(sample_seed).shuffle(&mut idx);
            idx.truncate(cap);
            idx.sort_unstable();
            train_set = train_set.subset(&idx);
        }
    }
    let spec = ModelSpec::from_name(&cfg.model, nfp.n_features(), cfg.window)?;
    let mut model = Model::from_seed(&spec, init_seed)?;
    let train_cfg = TrainConfig {
        seed: train_seed,
        ..cfg.train.clone()
    };
    let history = train(&mut model, &train_set, None, &train_cfg)?;

    let test = make_windows(&nfp, cfg.window, |_, d, _| split.test.contains(d))?;
    let (test_mse, preds) = if test.is_empty() {
        (None, Vec::new())
    } else {
        let (mse, preds) = evaluate(&model, &test)?;
        (Some(mse), preds)
    };
    log::info!(
        "split {}: trained on {} windows up to {train_end}, final loss {:.3e}, test mse {:?}",
        split.index,
        train_set.len(),
        history.final_loss().unwrap_or(f64::NAN),
        test_mse
    );
    let summary = SplitSummary {
        split: *split,
        train_samples: train_set.len(),
        test_samples: test.len(),
        history: Some(history),
        test_mse,
    };
    Ok((summary, collect(group_by_anchor(&test, &preds))))
}

fn run_splits(
    fp: &FeaturePanel,
    splits: &[RollingSplit],
    cfg: &BacktestConfig,
) -> Result<Vec<(SplitSummary, WeekPredictions)>> {
    #[cfg(feature = "parallel")]
    if cfg.parallel {
        use rayon::prelude::*;
        return splits.par_iter().map(|s| run_split(fp, s, cfg)).collect();
    }
    splits.iter().map(|s| run_split(fp, s, cfg)).collect()
}

pub fn run_backtest(panel: &BarPanel, cfg: &BacktestConfig) -> Result<BacktestResult> {
    run_backtest_with(panel, cfg, None)
}

/// Like [`run_backtest`], with an optional external benchmark replacing the
/// equal-weight universe.
pub fn run_backtest_with(
    panel: &BarPanel,
    cfg: &BacktestConfig,
    benchmark: Option<&Benchmark>,
) -> Result<BacktestResult> {
    cfg.validate()?;
    let fp = select_features(build_features(panel), &cfg.features)?;
    let splits = rolling_splits(fp.dates(), cfg.initial_train, cfg.step, cfg.window_mode)?;
    if splits.is_empty() {
        return Err(Error::config(format!(
            "data spans {} to {}; need more than initial_train ({}) plus at least one test week",
            fp.dates()[0],
            fp.dates()[fp.dates().len() - 1],
            cfg.initial_train
        )));
    }
    let per_split = run_splits(&fp, &splits, cfg)?;

    let dates = fp.dates();
    let symbols = fp.symbols();
    let n_s = symbols.len();
    let mut result_dates = Vec::new();
    let mut period_end = Vec::new();
    let mut periods = Vec::new();
    let mut portfolios = Vec::new();
    let mut benchmark_returns = Vec::new();
    let mut summaries = Vec::with_capacity(per_split.len());
    for (summary, weeks) in per_split {
        summaries.push(summary);
        for (t, preds) in weeks {
            let mut weights = vec![0.0; n_s];
            if preds.is_empty() {
                log::info!("{}: no valid symbols, holding flat", dates[t]);
            } else {
                let picked = top_k(&preds, cfg.top_k);
                let w = 1.0 / picked.len() as f64;
                for (s, _) in picked {
                    weights[s] = w;
                }
            }
            let returns: Vec<f64> = (0..n_s).map(|s| fp.label(t, s).unwrap_or(0.0)).collect();
            if let Some(s) = (0..n_s).find(|&s| weights[s] > 0.0 && fp.label(t, s).is_none()) {
                return Err(Error::data(format!(
                    "{} held without a realized return on {}",
                    symbols[s], dates[t]
                )));
            }
            let bench = match benchmark {
                Some(b) => b.period_return(dates[t], dates[t + 1])?,
                None => {
                    let valid: Vec<f64> = (0..n_s).filter_map(|s| fp.label(t, s)).collect();
                    if valid.is_empty() {
                        0.0
                    } else {
                        valid.iter().sum::<f64>() / valid.len() as f64
                    }
                }
            };
            portfolios.push(PortfolioState {
                date: dates[t],
                weights: (0..n_s)
                    .filter(|&s| weights[s] > 0.0)
                    .map(|s| (symbols[s].clone(), weights[s]))
                    .collect(),
            });
            periods.push(Period { weights, returns });
            benchmark_returns.push(bench);
            result_dates.push(dates[t]);
            period_end.push(dates[t + 1]);
        }
    }
    let (strategy_returns, turnover) = simulate(&periods, cfg.cost_bps)?;
    let strategy_equity = equity_curve(&strategy_returns)?;
    let benchmark_equity = equity_curve(&benchmark_returns)?;
    let report = IndicatorReport::from_equity(
        &strategy_equity,
        &benchmark_equity,
        cfg.rf_per_period,
        cfg.periods_per_year,
    )?;
    Ok(BacktestResult {
        dates: result_dates,
        period_end,
        strategy_returns,
        benchmark_returns,
        strategy_equity,
        benchmark_equity,
        portfolios,
        turnover,
        report,
        splits: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{gen_synthetic_panel, SynthConfig};
    use proptest::prelude::*;

    fn preds(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
        items.iter().map(|(s, p)| (s.to_string(), *p)).collect()
    }

    #[test]
    fn picks_top_two() {
        let w = select_portfolio(&preds(&[("A", 0.02), ("B", -0.01), ("C", 0.05)]), 2);
        assert_eq!(w, preds(&[("C", 0.5), ("A", 0.5)]));
    }

    #[test]
    fn k_beyond_universe_takes_everyone() {
        let w = select_portfolio(&preds(&[("A", 0.02), ("B", -0.01), ("C", 0.05)]), 10);
        assert_eq!(w.len(), 3);
        assert!(w.values().all(|x| (*x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn ties_prefer_smaller_symbol() {
        let w = select_portfolio(
            &preds(&[("A", 0.3), ("D", 0.1), ("B", 0.1), ("C", -0.2)]),
            2,
        );
        assert_eq!(w.keys().collect::<Vec<_>>(), vec!["A", "B"]);
        assert!(select_portfolio(&BTreeMap::new(), 3).is_empty());
    }

    #[test]
    fn compounding() {
        assert_eq!(equity_curve(&[0.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);
        let e = equity_curve(&[0.1, -0.1]).unwrap();
        assert!((e[1] - 1.1).abs() < 1e-15 && (e[2] - 0.99).abs() < 1e-15);
        assert_eq!(equity_curve(&[0.25]).unwrap(), vec![1.0, 1.25]);
        assert!(equity_curve(&[0.1, -1.0]).is_err());
    }

    #[test]
    fn turnover_counts_drift() {
        let periods = vec![
            Period {
                weights: vec![0.5, 0.5],
                returns: vec![1.0, 0.0],
            },
            Period {
                weights: vec![0.5, 0.5],
                returns: vec![0.0, 0.0],
            },
        ];
        let (r, tv) = simulate(&periods, 0.0).unwrap();
        assert_eq!(tv[0], 0.5);
        // Drifted to 2/3, 1/3; rebalancing back moves 1/6.
        assert!((tv[1] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r, vec![0.5, 0.0]);
    }

    fn half_rotation(weeks: usize) -> Vec<Period> {
        // Four names; every week one of the two holdings is swapped out.
        let sets = [[0, 1], [1, 2], [2, 3], [3, 0]];
        (0..weeks)
            .map(|t| {
                let mut weights = vec![0.0; 4];
                for s in sets[t % 4] {
                    weights[s] = 0.5;
                }
                Period {
                    weights,
                    returns: vec![0.01, 0.0, 0.02, -0.005],
                }
            })
            .collect()
    }

    #[test]
    fn extreme_costs_collapse_equity() {
        let path = half_rotation(30);
        let (free, tv) = simulate(&path, 0.0).unwrap();
        assert!(tv[1..].iter().all(|x| (*x - 0.5).abs() < 0.02));
        let (costly, _) = simulate(&path, 10_000.0).unwrap();
        let e_free = equity_curve(&free).unwrap();
        let e_costly = equity_curve(&costly).unwrap();
        assert!(*e_free.last().unwrap() > 1.0);
        assert!(*e_costly.last().unwrap() < 1e-6);
    }

    proptest! {
        #[test]
        fn costs_never_help(
            raw in proptest::collection::vec(proptest::collection::vec((0.0f64..1.0, -0.3f64..0.3), 5), 1..20),
            lo in 0.0f64..500.0,
            extra in 0.0f64..500.0,
        ) {
            let periods: Vec<Period> = raw
                .iter()
                .map(|week| {
                    let total: f64 = week.iter().map(|(w, _)| w).sum();
                    Period {
                        weights: week.iter().map(|(w, _)| if total > 0.0 { w / total } else { 0.0 }).collect(),
                        returns: week.iter().map(|(_, r)| *r).collect(),
                    }
                })
                .collect();
            let a = equity_curve(&simulate(&periods, lo).unwrap().0).unwrap();
            let b = equity_curve(&simulate(&periods, lo + extra).unwrap().0).unwrap();
            prop_assert!(b.last().unwrap() <= a.last().unwrap());
        }
    }

    fn small_panel(signal: f64) -> BarPanel {
        gen_synthetic_panel(&SynthConfig {
            seed: 5,
            n_symbols: 12,
            n_weeks: 200,
            signal_strength: signal,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn perfect_foresight_matches_top_k_compounding() {
        let panel = small_panel(0.0);
        let cfg = BacktestConfig {
            top_k: 3,
            predictor: Predictor::PerfectForesight,
            ..BacktestConfig::default()
        };
        let res = run_backtest(&panel, &cfg).unwrap();
        let fp = build_features(&panel);
        let mut e = 1.0;
        for (i, d) in res.dates.iter().enumerate() {
            let t = fp.dates().iter().position(|x| x == d).unwrap();
            let mut realized: Vec<f64> = (0..12).filter_map(|s| fp.label(t, s)).collect();
            realized.sort_by(|a, b| b.total_cmp(a));
            e *= 1.0 + realized[..3].iter().sum::<f64>() / 3.0;
            assert!((res.strategy_equity[i + 1] / e - 1.0).abs() < 1e-9);
        }
        assert!(res.report.excess_return > 0.0);
        assert_eq!(res.strategy_equity.len(), res.benchmark_equity.len());
        assert!(res.dates.first().unwrap() > &NaiveDate::from_ymd_opt(2011, 1, 1).unwrap());
    }

    #[test]
    fn small_model_backtest_runs_and_is_deterministic() {
        let panel = small_panel(0.8);
        let cfg = BacktestConfig {
            top_k: 4,
            model: "gru(4)>dense(1,linear)".into(),
            window: 4,
            step: Span::Weeks(26),
            train: TrainConfig {
                epochs: 1,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
            max_train_samples: Some(200),
            seed: 3,
            ..BacktestConfig::default()
        };
        let a = run_backtest(&panel, &cfg).unwrap();
        let b = run_backtest(
            &panel,
            &BacktestConfig {
                parallel: false,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(a, b);
        for p in &a.portfolios {
            let total: f64 = p.weights.values().sum();
            assert!((total - 1.0).abs() < 1e-12 || total == 0.0);
        }
        assert!((0.0..=1.0).contains(&a.report.max_drawdown));
        let mut buf = Vec::new();
        a.write_equity_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), a.dates.len() + 2);
    }

    #[test]
    fn external_benchmark_and_short_data() {
        let panel = small_panel(0.0);
        let mut bench = Benchmark::default();
        for (i, d) in panel.dates().iter().enumerate() {
            bench.closes.insert(*d, 100.0 * 1.001f64.powi(i as i32));
        }
        let cfg = BacktestConfig {
            top_k: 2,
            predictor: Predictor::PerfectForesight,
            ..BacktestConfig::default()
        };
        let res = run_backtest_with(&panel, &cfg, Some(&bench)).unwrap();
        assert!(res
            .benchmark_returns
            .iter()
            .all(|r| (r - 0.001).abs() < 1e-12));

        let long_init = BacktestConfig {
            initial_train: Span::Years(10),
            ..cfg
        };
        assert!(matches!(
            run_backtest(&panel, &long_init),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn benchmark_csv_parsing() {
        let b =
            Benchmark::read_csv("date,close\n2020-01-03,10\n2020-01-10,11\n".as_bytes()).unwrap();
        assert_eq!(b.closes.len(), 2);
        assert!(Benchmark::read_csv("day,close\n".as_bytes()).is_err());
        assert!(matches!(
            Benchmark::read_csv("date,close\n2020-01-03,-1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
