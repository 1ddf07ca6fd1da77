use std::fmt;
use std::str::FromStr;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar duration. Month and year spans follow the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Span {
    Days(u32),
    Weeks(u32),
    Months(u32),
    Years(u32),
}

impl Span {
    /// `date + times * self`
    pub fn add_to(self, date: NaiveDate, times: u32) -> Option<NaiveDate> {
        match self {
            Span::Days(n) => {
                date.checked_add_days(chrono::Days::new(u64::from(n) * u64::from(times)))
            }
            Span::Weeks(n) => {
                date.checked_add_days(chrono::Days::new(7 * u64::from(n) * u64::from(times)))
            }
            Span::Months(n) => date.checked_add_months(Months::new(n * times)),
            Span::Years(n) => date.checked_add_months(Months::new(12 * n * times)),
        }
    }

    pub fn sub_from(self, date: NaiveDate) -> Option<NaiveDate> {
        match self {
            Span::Days(n) => date.checked_sub_days(chrono::Days::new(u64::from(n))),
            Span::Weeks(n) => date.checked_sub_days(chrono::Days::new(7 * u64::from(n))),
            Span::Months(n) => date.checked_sub_months(Months::new(n)),
            Span::Years(n) => date.checked_sub_months(Months::new(12 * n)),
        }
    }

    fn is_zero(self) -> bool {
        matches!(
            self,
            Span::Days(0) | Span::Weeks(0) | Span::Months(0) | Span::Years(0)
        )
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Span::Days(n) => write!(f, "{n}d"),
            Span::Weeks(n) => write!(f, "{n}w"),
            Span::Months(n) => write!(f, "{n}m"),
            Span::Years(n) => write!(f, "{n}y"),
        }
    }
}

impl FromStr for Span {
    type Err = Error;

    /// `30d`, `13w`, `6m`, `3y`
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("bad duration `{s}` (expected e.g. 13w, 3y)"));
        let (num, unit) = s.split_at(s.len().checked_sub(1).ok_or_else(bad)?);
        let n: u32 = num.parse().map_err(|_| bad())?;
        match unit {
            "d" => Ok(Span::Days(n)),
            "w" => Ok(Span::Weeks(n)),
            "m" => Ok(Span::Months(n)),
            "y" => Ok(Span::Years(n)),
            _ => Err(bad()),
        }
    }
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowMode {
    /// Train on everything from the first date (anchored).
    Expanding,
    /// Train on the most recent `initial_train` span only.
    Sliding,
}

impl FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "expanding" => Ok(WindowMode::Expanding),
            "sliding" => Ok(WindowMode::Sliding),
            other => Err(Error::config(format!("unknown window mode `{other}`"))),
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowMode::Expanding => "expanding",
            WindowMode::Sliding => "sliding",
        })
    }
}

/// One walk-forward step. Both ranges are snapped to dates on the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingSplit {
    pub index: usize,
    pub train: DateRange,
    pub test: DateRange,
}

/// Walk-forward splits over a sorted date axis.
///
/// The closed learning period covers dates up to `axis[0] + initial`. Test
/// windows are the half-open spans `(b_k, b_k + step]` with
/// `b_k = axis[0] + initial + k * step`, continuing until the axis ends, so
/// they tile the remaining dates without gaps or overlap.
pub fn rolling_splits(
    axis: &[NaiveDate],
    initial: Span,
    step: Span,
    mode: WindowMode,
) -> Result<Vec<RollingSplit>> {
    if axis.is_empty() {
        return Err(Error::config("empty date axis"));
    }
    if step.is_zero() || initial.is_zero() {
        return Err(Error::config("initial_train and step must be positive"));
    }
    let first = axis[0];
    let last = axis[axis.len() - 1];
    let overflow = || Error::config("split boundary out of calendar range");
    let b0 = initial.add_to(first, 1).ok_or_else(overflow)?;
    if last < b0 {
        return Err(Error::config(format!(
            "date axis {first}..{last} is shorter than the initial training span {initial}"
        )));
    }
    let mut splits = Vec::new();
    let mut k = 0;
    loop {
        let lo = step.add_to(b0, k).ok_or_else(overflow)?;
        if lo >= last {
            break;
        }
        let hi = step.add_to(b0, k + 1).ok_or_else(overflow)?;
        let test: Vec<NaiveDate> = axis
            .iter()
            .copied()
            .filter(|d| *d > lo && *d <= hi)
            .collect();
        let train_from = match mode {
            WindowMode::Expanding => first,
            WindowMode::Sliding => initial.sub_from(lo).ok_or_else(overflow)?,
        };
        let train: Vec<NaiveDate> = axis
            .iter()
            .copied()
            .filter(|d| *d >= train_from && *d <= lo)
            .collect();
        if let (Some(ts), Some(te), Some(rs), Some(re)) =
            (test.first(), test.last(), train.first(), train.last())
        {
            splits.push(RollingSplit {
                index: splits.len(),
                train: DateRange {
                    start: *rs,
                    end: *re,
                },
                test: DateRange {
                    start: *ts,
                    end: *te,
                },
            });
        }
        k += 1;
    }
    if splits.is_empty() {
        log::warn!("date axis leaves no test period after the initial training span");
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn weekly(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
        let mut out = vec![from];
        while *out.last().unwrap() + chrono::Duration::weeks(1) <= to {
            out.push(*out.last().unwrap() + chrono::Duration::weeks(1));
        }
        out
    }

    #[test]
    fn first_test_window_starts_early_january_2011() {
        let axis = weekly(ymd(2008, 1, 4), ymd(2020, 1, 3));
        let splits = rolling_splits(
            &axis,
            Span::Years(3),
            Span::Weeks(13),
            WindowMode::Expanding,
        )
        .unwrap();
        let first = splits[0].test.start;
        assert!(
            first >= ymd(2011, 1, 1) && first <= ymd(2011, 1, 14),
            "{first}"
        );
        assert_eq!(splits[0].train.start, ymd(2008, 1, 4));
        assert!(splits[0].train.end < ymd(2011, 1, 5));
    }

    #[test]
    fn axis_equal_to_initial_gives_no_splits() {
        let axis = weekly(ymd(2008, 1, 4), ymd(2010, 12, 31));
        assert!(rolling_splits(
            &axis,
            Span::Weeks(156),
            Span::Weeks(13),
            WindowMode::Expanding
        )
        .unwrap()
        .is_empty());
        assert!(rolling_splits(
            &axis,
            Span::Weeks(157),
            Span::Weeks(13),
            WindowMode::Expanding
        )
        .is_err());
    }

    #[test]
    fn five_year_axis_one_year_step() {
        let axis = weekly(ymd(2008, 1, 4), ymd(2012, 12, 28));
        let splits =
            rolling_splits(&axis, Span::Years(3), Span::Years(1), WindowMode::Expanding).unwrap();
        assert_eq!(splits.len(), 2);
        assert_eq!(splits[0].test.start, ymd(2011, 1, 7));
        assert_eq!(splits[0].test.end, ymd(2011, 12, 30));
        assert_eq!(splits[1].test.start, ymd(2012, 1, 6));
        assert_eq!(splits[1].test.end, ymd(2012, 12, 28));
        assert_eq!(splits[1].train.end, ymd(2011, 12, 30));
    }

    #[test]
    fn tiles_test_period_and_slides() {
        let axis = weekly(ymd(2008, 1, 4), ymd(2016, 6, 3));
        for mode in [WindowMode::Expanding, WindowMode::Sliding] {
            let splits = rolling_splits(&axis, Span::Years(3), Span::Weeks(13), mode).unwrap();
            let tested: Vec<NaiveDate> = axis
                .iter()
                .copied()
                .filter(|d| splits.iter().any(|s| s.test.contains(*d)))
                .collect();
            let expected: Vec<NaiveDate> = axis
                .iter()
                .copied()
                .filter(|d| *d > ymd(2011, 1, 4))
                .collect();
            assert_eq!(tested, expected);
            for w in splits.windows(2) {
                assert!(w[0].test.end < w[1].test.start);
            }
            for s in &splits {
                assert!(s.train.end < s.test.start);
                if mode == WindowMode::Sliding {
                    assert!((s.train.end - s.train.start).num_days() <= 3 * 366);
                }
            }
        }
    }

    #[test]
    fn parses_spans() {
        assert_eq!("13w".parse::<Span>().unwrap(), Span::Weeks(13));
        assert_eq!("3y".parse::<Span>().unwrap(), Span::Years(3));
        assert!("3q".parse::<Span>().is_err());
        assert!("".parse::<Span>().is_err());
    }
}
