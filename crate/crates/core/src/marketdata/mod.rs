//! Weekly bar panels, feature/label construction, leakage-safe
//! normalization and windowing, rolling splits, and a synthetic panel
//! generator.

mod features;
mod normalize;
mod splits;
mod synth;
mod windows;

pub use features::{build_features, FeaturePanel, FEATURE_NAMES, LOOKBACK};
pub use normalize::{apply_normalizer, fit_normalizer, Normalizer};
pub use splits::{rolling_splits, DateRange, RollingSplit, Span, WindowMode};
pub use synth::{gen_synthetic_panel, SynthConfig};
pub use windows::{make_supervised, make_windows, SampleInfo, SequenceDataset};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["date", "symbol", "open", "high", "low", "close", "volume"];
pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ohlcv {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub symbol: String,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    pub fn values(&self) -> Ohlcv {
        Ohlcv {
            open: self.open,
            high: self.high,
            low: self.low,
            close: self.close,
            volume: self.volume,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        let prices = [v.open, v.high, v.low, v.close];
        let fail = |what: &str| {
            Err(Error::data(format!(
                "{} {}: {what}",
                self.date, self.symbol
            )))
        };
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return fail("prices must be positive and finite");
        }
        if !v.volume.is_finite() || v.volume < 0.0 {
            return fail("volume must be nonnegative");
        }
        if v.low > v.open.min(v.close) {
            return fail("low above open/close");
        }
        if v.high < v.open.max(v.close) {
            return fail("high below open/close");
        }
        Ok(())
    }
}

/// Date-aligned bars. `bars[s][t]` is `None` where symbol `s` has no bar on
/// `dates[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarPanel {
    dates: Vec<NaiveDate>,
    symbols: Vec<String>,
    bars: Vec<Vec<Option<Ohlcv>>>,
}

impl BarPanel {
    /// Validates every bar, rejects duplicate `(date, symbol)` pairs and
    /// aligns the result on the sorted union of dates.
    pub fn from_bars(bars: Vec<Bar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let mut by_key: BTreeMap<(String, NaiveDate), Ohlcv> = BTreeMap::new();
        for bar in &bars {
            bar.validate()?;
            if by_key
                .insert((bar.symbol.clone(), bar.date), bar.values())
                .is_some()
            {
                return Err(Error::data(format!(
                    "duplicate bar for {} {}",
                    bar.date, bar.symbol
                )));
            }
        }
        let dates: Vec<NaiveDate> = bars
            .iter()
            .map(|b| b.date)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let symbols: Vec<String> = bars
            .iter()
            .map(|b| b.symbol.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let date_idx: BTreeMap<NaiveDate, usize> =
            dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let mut grid = vec![vec![None; dates.len()]; symbols.len()];
        let mut s = 0;
        for ((sym, date), v) in by_key {
            while symbols[s] != sym {
                s += 1;
            }
            grid[s][date_idx[&date]] = Some(v);
        }
        Ok(BarPanel {
            dates,
            symbols,
            bars: grid,
        })
    }

    /// Caller guarantees sorted unique dates and symbols and valid bars.
    pub(crate) fn from_grid(
        dates: Vec<NaiveDate>,
        symbols: Vec<String>,
        bars: Vec<Vec<Option<Ohlcv>>>,
    ) -> Self {
        debug_assert!(dates.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(bars.len() == symbols.len() && bars.iter().all(|r| r.len() == dates.len()));
        BarPanel {
            dates,
            symbols,
            bars,
        }
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn bar(&self, symbol: usize, date: usize) -> Option<&Ohlcv> {
        self.bars[symbol][date].as_ref()
    }

    pub fn is_present(&self, symbol: usize, date: usize) -> bool {
        self.bars[symbol][date].is_some()
    }

    pub fn is_full(&self) -> bool {
        self.bars.iter().flatten().all(Option::is_some)
    }

    /// Bars in date-major, symbol-minor order.
    pub fn to_bars(&self) -> Vec<Bar> {
        let mut out = Vec::new();
        for (t, date) in self.dates.iter().enumerate() {
            for (s, sym) in self.symbols.iter().enumerate() {
                if let Some(v) = self.bars[s][t] {
                    out.push(Bar {
                        date: *date,
                        symbol: sym.clone(),
                        open: v.open,
                        high: v.high,
                        low: v.low,
                        close: v.close,
                        volume: v.volume,
                    });
                }
            }
        }
        out
    }

    /// True when consecutive dates are at least five days apart.
    pub fn is_weekly(&self) -> bool {
        self.dates.windows(2).all(|w| (w[1] - w[0]).num_days() >= 5)
    }

    /// Collapses bars into ISO weeks: first open, max high, min low, last
    /// close, summed volume. Each week is stamped with its latest date.
    pub fn resample_weekly(&self) -> Result<BarPanel> {
        let week_of = |d: &NaiveDate| {
            let w = d.iso_week();
            (w.year(), w.week())
        };
        let mut out = Vec::new();
        for (s, sym) in self.symbols.iter().enumerate() {
            let mut current: Option<((i32, u32), Bar)> = None;
            for (t, date) in self.dates.iter().enumerate() {
                let Some(v) = self.bars[s][t] else { continue };
                let key = week_of(date);
                match current.as_mut() {
                    Some((k, bar)) if *k == key => {
                        bar.high = bar.high.max(v.high);
                        bar.low = bar.low.min(v.low);
                        bar.close = v.close;
                        bar.volume += v.volume;
                        bar.date = *date;
                    }
                    _ => {
                        if let Some((_, bar)) = current.take() {
                            out.push(bar);
                        }
                        current = Some((
                            key,
                            Bar {
                                date: *date,
                                symbol: sym.clone(),
                                open: v.open,
                                high: v.high,
                                low: v.low,
                                close: v.close,
                                volume: v.volume,
                            },
                        ));
                    }
                }
            }
            if let Some((_, bar)) = current {
                out.push(bar);
            }
        }
        // Align every symbol on the latest date seen in each week.
        let mut week_end: BTreeMap<(i32, u32), NaiveDate> = BTreeMap::new();
        for bar in &out {
            let e = week_end.entry(week_of(&bar.date)).or_insert(bar.date);
            *e = (*e).max(bar.date);
        }
        for bar in &mut out {
            bar.date = week_end[&week_of(&bar.date)];
        }
        BarPanel::from_bars(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::data(format!("csv write: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for bar in self.to_bars() {
            w.write_record([
                bar.date.format(DATE_FORMAT).to_string(),
                bar.symbol,
                bar.open.to_string(),
                bar.high.to_string(),
                bar.low.to_string(),
                bar.close.to_string(),
                bar.volume.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::data(format!("csv write: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses the bars CSV schema: `date,symbol,open,high,low,close,volume`.
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
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header must be `{}`", CSV_HEADER.join(",")),
            });
        }
        let mut bars = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let perr = |msg: String| Error::Parse { line, msg };
            let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT)
                .map_err(|e| perr(format!("bad date `{}`: {e}", &record[0])))?;
            let num = |i: usize| {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| perr(format!("bad {} `{}`", CSV_HEADER[i], &record[i])))
            };
            let bar = Bar {
                date,
                symbol: record[1].to_string(),
                open: num(2)?,
                high: num(3)?,
                low: num(4)?,
                close: num(5)?,
                volume: num(6)?,
            };
            if let Err(Error::Data(msg)) = bar.validate() {
                return Err(Error::data(format!("line {line}: {msg}")));
            }
            bars.push(bar);
        }
        BarPanel::from_bars(bars)
    }
}

pub fn load_bars(path: &Path) -> Result<BarPanel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BarPanel::read_csv(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "date,symbol,open,high,low,close,volume
2020-01-03,AAA,10,11,9,10.5,1000
2020-01-03,BBB,20,21,19,20.5,500
2020-01-10,AAA,10.5,12,10,11,1100
2020-01-10,BBB,20.5,21,20,20,400
2020-01-17,BBB,20,20.5,19.5,20.2,450
2020-01-17,AAA,11,11.5,10.5,11.2,900
";

    #[test]
    fn loads_well_formed_file() {
        let panel = BarPanel::read_csv(GOOD.as_bytes()).unwrap();
        assert_eq!(panel.n_dates(), 3);
        assert_eq!(panel.symbols(), &["AAA".to_string(), "BBB".to_string()]);
        assert!(panel.is_full());
        assert_eq!(panel.bar(0, 2).unwrap().close, 11.2);
        assert!(panel.is_weekly());
    }

    #[test]
    fn rejects_invariant_violation_with_row() {
        let text = "date,symbol,open,high,low,close,volume\n2020-01-03,AAA,10,11,9,10.5,1\n2020-01-10,AAA,10,9,11,10,1\n";
        match BarPanel::read_csv(text.as_bytes()) {
            Err(Error::Data(msg)) => {
                assert!(msg.contains("line 3"), "{msg}");
                assert!(msg.contains("2020-01-10 AAA"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty_panel() {
        let text = "date,symbol,open,high,low,close,volume\n";
        assert!(matches!(
            BarPanel::read_csv(text.as_bytes()),
            Err(Error::EmptyPanel)
        ));
    }

    #[test]
    fn malformed_rows_and_headers() {
        let text = "date,symbol,open,high,low,close,volume\n2020-01-03,AAA,ten,11,9,10.5,1\n";
        assert!(matches!(
            BarPanel::read_csv(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = "date,ticker,open,high,low,close,volume\n";
        assert!(matches!(
            BarPanel::read_csv(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let dup = format!("{GOOD}2020-01-17,AAA,11,11.5,10.5,11.2,900\n");
        assert!(
            matches!(BarPanel::read_csv(dup.as_bytes()), Err(Error::Data(m)) if m.contains("duplicate"))
        );
    }

    #[test]
    fn csv_round_trip() {
        let panel = gen_synthetic_panel(&SynthConfig {
            n_symbols: 3,
            n_weeks: 40,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        assert_eq!(BarPanel::read_csv(buf.as_slice()).unwrap(), panel);
    }

    #[test]
    fn resamples_daily_bars() {
        let text = "date,symbol,open,high,low,close,volume
2020-01-06,AAA,10,11,9,10,100
2020-01-07,AAA,10,12,9.5,11,100
2020-01-10,AAA,11,11.5,8,9,50
2020-01-13,AAA,9,10,8.5,9.5,10
2020-01-09,BBB,5,5,5,5,1
";
        let daily = BarPanel::read_csv(text.as_bytes()).unwrap();
        assert!(!daily.is_weekly());
        let weekly = daily.resample_weekly().unwrap();
        assert_eq!(weekly.n_dates(), 2);
        assert_eq!(
            weekly.dates()[0],
            NaiveDate::from_ymd_opt(2020, 1, 10).unwrap()
        );
        let w0 = weekly.bar(0, 0).unwrap();
        assert_eq!(
            (w0.open, w0.high, w0.low, w0.close, w0.volume),
            (10.0, 12.0, 8.0, 9.0, 250.0)
        );
        assert!(weekly.is_present(1, 0) && !weekly.is_present(1, 1));
    }
}
