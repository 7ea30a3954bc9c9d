//! Historical rebounds: days whose price is the minimum of a centered window.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{day_number, PriceSeries};

/// Unit in which the rebound half-width is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanUnit {
    /// Count of observations (trading days) on either side.
    TradingDays,
    CalendarDays,
}

/// What to do with a day whose centered window runs past a series end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    /// The day cannot be a rebound.
    Exclude,
    /// The window is truncated at the series end.
    Clip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ReboundRule {
    pub half_width: i64,
    pub unit: SpanUnit,
    pub leading_edge: EdgePolicy,
    pub trailing_edge: EdgePolicy,
}

impl Default for ReboundRule {
    fn default() -> Self {
        Self {
            half_width: 200,
            unit: SpanUnit::TradingDays,
            leading_edge: EdgePolicy::Exclude,
            trailing_edge: EdgePolicy::Clip,
        }
    }
}

impl ReboundRule {
    pub fn with_half_width(half_width: i64) -> Self {
        Self { half_width, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReboundSet {
    pub dates: Vec<NaiveDate>,
    pub rule: ReboundRule,
}

impl ReboundSet {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Rebounds with `from <= date <= to`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> ReboundSet {
        ReboundSet {
            dates: self.dates.iter().copied().filter(|d| *d >= from && *d <= to).collect(),
            rule: self.rule,
        }
    }

    /// Rebounds strictly before `cutoff`.
    pub fn before(&self, cutoff: NaiveDate) -> ReboundSet {
        ReboundSet {
            dates: self.dates.iter().copied().filter(|d| *d < cutoff).collect(),
            rule: self.rule,
        }
    }

    pub fn day_numbers(&self) -> Vec<i64> {
        self.dates.iter().map(|&d| day_number(d)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# half_width={} unit={:?} leading={:?} trailing={:?}",
            self.rule.half_width, self.rule.unit, self.rule.leading_edge, self.rule.trailing_edge
        )?;
        writeln!(w, "date")?;
        for d in &self.dates {
            writeln!(w, "{d}")?;
        }
        Ok(())
    }
}

/// Range-minimum table over a slice.
struct MinTable {
    levels: Vec<Vec<f64>>,
}

impl MinTable {
    fn new(v: &[f64]) -> Self {
        let mut levels = vec![v.to_vec()];
        let mut width = 1;
        while 2 * width <= v.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=v.len() - 2 * width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    /// Minimum over `lo..=hi`, or +inf for an empty range.
    fn min(&self, lo: usize, hi: usize) -> f64 {
        if lo > hi {
            return f64::INFINITY;
        }
        let len = hi - lo + 1;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        self.levels[k][lo].min(self.levels[k][hi + 1 - (1 << k)])
    }
}

/// Rebounds under the default rule (trading-day half-width, full window
/// required before the day, window clipped at the series end).
pub fn detect_rebounds(series: &PriceSeries, half_width: i64) -> ReboundSet {
    detect_rebounds_with(series, &ReboundRule::with_half_width(half_width))
}

/// A day is a rebound when its price is below every earlier price and not
/// above any later price in its window, so ties keep the earliest day.
pub fn detect_rebounds_with(series: &PriceSeries, rule: &ReboundRule) -> ReboundSet {
    let empty = ReboundSet { dates: Vec::new(), rule: *rule };
    let n = series.len();
    let hw = rule.half_width;
    if n == 0 || hw < 1 {
        return empty;
    }
    let days: Vec<i64> = series.dates().iter().map(|&d| day_number(d)).collect();
    let span = match rule.unit {
        SpanUnit::TradingDays => n as i64 - 1,
        SpanUnit::CalendarDays => days[n - 1] - days[0],
    };
    if span <= 2 * hw {
        return empty;
    }
    let p = series.values();
    let table = MinTable::new(p);

    let mut out = Vec::new();
    let mut lo_ptr = 0usize;
    let mut hi_ptr = 0usize;
    for i in 0..n {
        // window index range [lo, hi] and whether it is cut by either end
        let (lo, hi, cut_lead, cut_trail) = match rule.unit {
            SpanUnit::TradingDays => {
                let hw = hw as usize;
                (i.saturating_sub(hw), (i + hw).min(n - 1), i < hw, i + hw > n - 1)
            }
            SpanUnit::CalendarDays => {
                while days[lo_ptr] < days[i] - hw {
                    lo_ptr += 1;
                }
                if hi_ptr < i {
                    hi_ptr = i;
                }
                while hi_ptr + 1 < n && days[hi_ptr + 1] <= days[i] + hw {
                    hi_ptr += 1;
                }
                (lo_ptr, hi_ptr, days[i] - hw < days[0], days[i] + hw > days[n - 1])
            }
        };
        if (cut_lead && rule.leading_edge == EdgePolicy::Exclude)
            || (cut_trail && rule.trailing_edge == EdgePolicy::Exclude)
        {
            continue;
        }
        let before = if i > lo { table.min(lo, i - 1) } else { f64::INFINITY };
        let after = table.min(i + 1, hi);
        if p[i] < before && p[i] <= after {
            out.push(series.dates()[i]);
        }
    }
    ReboundSet { dates: out, rule: *rule }
}

/// Rebound sets as they would be detected on every prefix of a series.
#[derive(Debug, Clone)]
pub struct ReboundTimeline {
    dates: Vec<NaiveDate>,
    rule: ReboundRule,
    /// `(index, first prefix end, first prefix end where it fails)`.
    spans: Vec<(usize, usize, Option<usize>)>,
    min_prefix_end: usize,
    fallback: Option<PriceSeries>,
}

impl ReboundTimeline {
    pub fn new(series: &PriceSeries, rule: &ReboundRule) -> Self {
        let n = series.len();
        let hw = rule.half_width.max(1) as usize;
        if rule.unit == SpanUnit::CalendarDays || rule.half_width < 1 {
            return Self {
                dates: series.dates().to_vec(),
                rule: *rule,
                spans: Vec::new(),
                min_prefix_end: 0,
                fallback: Some(series.clone()),
            };
        }
        let p = series.values();
        let table = MinTable::new(p);
        let mut spans = Vec::new();
        for i in 0..n {
            if i < hw && rule.leading_edge == EdgePolicy::Exclude {
                continue;
            }
            let lo = i.saturating_sub(hw);
            if i > lo && table.min(lo, i - 1) <= p[i] {
                continue;
            }
            let fail = (i + 1..=(i + hw).min(n - 1)).find(|&j| p[j] < p[i]);
            match rule.trailing_edge {
                EdgePolicy::Clip => spans.push((i, i, fail)),
                EdgePolicy::Exclude => {
                    if fail.is_none() && i + hw < n {
                        spans.push((i, i + hw, None));
                    }
                }
            }
        }
        Self { dates: series.dates().to_vec(), rule: *rule, spans, min_prefix_end: 2 * hw + 1, fallback: None }
    }

    /// Rebounds detected on the observations dated on or before `date`.
    pub fn as_of(&self, date: NaiveDate) -> ReboundSet {
        let count = self.dates.partition_point(|d| *d <= date);
        if let Some(series) = &self.fallback {
            let cut = series.between(self.dates.first().copied().unwrap_or(date), date);
            return detect_rebounds_with(&cut, &self.rule);
        }
        if count == 0 || count - 1 < self.min_prefix_end {
            return ReboundSet { dates: Vec::new(), rule: self.rule };
        }
        let k = count - 1;
        let dates = self
            .spans
            .iter()
            .filter(|&&(_, from, until)| from <= k && until.is_none_or(|u| k < u))
            .map(|&(i, _, _)| self.dates[i])
            .collect();
        ReboundSet { dates, rule: self.rule }
    }
}

/// True iff some rebound lies within `d` calendar days of `tc`.
pub fn is_near(tc: f64, rebounds: &ReboundSet, d: f64) -> bool {
    rebounds
        .dates
        .iter()
        .any(|&r| (tc - day_number(r) as f64).abs() <= d)
}
