//! Threshold trading on the alarm index, trade scoring, and significance
//! against random strategies with matched constraints.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{date_from_day, day_number, PriceSeries};
use crate::error::{DataError, TradingError};
use crate::pattern::AlarmSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub threshold: f64,
    pub offset: i64,
    pub holding: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TradeInterval {
    pub entry: NaiveDate,
    pub exit: NaiveDate,
}

impl TradeInterval {
    pub fn duration_days(&self) -> i64 {
        (self.exit - self.entry).num_days()
    }
}

/// Entry `offset` days after the index rises above the threshold; exit once
/// the index has stayed at or below it for `holding` consecutive days. A
/// position still open at the end of the series is closed on its last day.
pub fn generate_trades(alarms: &AlarmSeries, params: &StrategyParams) -> Vec<TradeInterval> {
    let v = &alarms.values;
    let n = v.len() as i64;
    let above = |i: i64| v[i as usize] > params.threshold;
    let mut trades = Vec::new();
    let mut t = 0i64;
    while t < n {
        if !above(t) {
            t += 1;
            continue;
        }
        let entry = t + params.offset;
        let mut last_above = t;
        let mut exit = n - 1;
        for i in t + 1..n {
            if above(i) {
                last_above = i;
            } else if i - last_above >= params.holding.max(1) {
                exit = (last_above + 1 + params.holding).min(n - 1);
                break;
            }
        }
        if exit > entry {
            trades.push(TradeInterval { entry: alarms.date(entry as usize), exit: alarms.date(exit as usize) });
        }
        t = exit.max(t + 1);
    }
    trades
}

/// Annualized risk-free rate in percent.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskFree {
    Constant(f64),
    /// Sorted `(date, percent)` pairs, used as-of.
    Series(Vec<(NaiveDate, f64)>),
}

impl RiskFree {
    pub fn rate_percent(&self, date: NaiveDate) -> Option<f64> {
        match self {
            RiskFree::Constant(r) => Some(*r),
            RiskFree::Series(s) => {
                let i = s.partition_point(|(d, _)| *d <= date);
                (i > 0).then(|| s[i - 1].1)
            }
        }
    }
}

/// Parses `date,annual_rate_percent` rows; a non-date first row is a header
/// and `.` or empty values are skipped.
pub fn parse_risk_free_csv<R: Read>(reader: R) -> Result<RiskFree, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| DataError::Parse { line, message: e.to_string() })?;
        if rec.len() < 2 {
            continue;
        }
        let date = match NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) if line == 1 => continue,
            Err(e) => return Err(DataError::Parse { line, message: format!("bad date {:?}: {e}", &rec[0]) }),
        };
        if rec[1].is_empty() || &rec[1] == "." {
            continue;
        }
        let rate: f64 = rec[1]
            .parse()
            .map_err(|e| DataError::Parse { line, message: format!("bad rate {:?}: {e}", &rec[1]) })?;
        rows.push((date, rate));
    }
    rows.sort_by_key(|r| r.0);
    Ok(RiskFree::Series(rows))
}

pub fn load_risk_free_csv(path: impl AsRef<Path>) -> Result<RiskFree, DataError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    parse_risk_free_csv(f)
}

/// Daily as-of prices and risk-free rates over a calendar span.
#[derive(Debug, Clone)]
pub struct Market {
    first_day: i64,
    price: Vec<f64>,
    /// Annual rate as a decimal, per calendar day.
    rate: Vec<f64>,
    pub cost_bps: f64,
}

impl Market {
    /// Covers `[max(from, first price), min(to, last price)]`.
    pub fn new(prices: &PriceSeries, rf: &RiskFree, from: NaiveDate, to: NaiveDate) -> Result<Self, TradingError> {
        let first = prices.first_date().ok_or(TradingError::OutsideCoverage(from))?;
        let last = prices.last_date().ok_or(TradingError::OutsideCoverage(to))?;
        let s = day_number(from.max(first));
        let e = day_number(to.min(last));
        let mut price = Vec::with_capacity((e - s + 1).max(0) as usize);
        let mut rate = Vec::with_capacity(price.capacity());
        for d in s..=e {
            let date = date_from_day(d);
            price.push(prices.value_as_of(date).ok_or(TradingError::OutsideCoverage(date))?);
            rate.push(rf.rate_percent(date).ok_or(TradingError::OutsideCoverage(date))? / 100.0);
        }
        Ok(Self { first_day: s, price, rate, cost_bps: 0.0 })
    }

    pub fn first_date(&self) -> NaiveDate {
        date_from_day(self.first_day)
    }

    pub fn last_date(&self) -> NaiveDate {
        date_from_day(self.first_day + self.price.len() as i64 - 1)
    }

    /// Calendar days in the covered span.
    pub fn period_days(&self) -> i64 {
        self.price.len() as i64
    }

    fn idx(&self, d: NaiveDate) -> Result<usize, TradingError> {
        let i = day_number(d) - self.first_day;
        if i < 0 || i as usize >= self.price.len() {
            return Err(TradingError::OutsideCoverage(d));
        }
        Ok(i as usize)
    }

    pub fn score(&self, t: &TradeInterval) -> Result<Trade, TradingError> {
        if t.exit <= t.entry {
            return Err(TradingError::EmptyTrade { entry: t.entry, exit: t.exit });
        }
        let (a, b) = (self.idx(t.entry)?, self.idx(t.exit)?);
        Ok(self.score_idx(a, b, t.entry, t.exit))
    }

    fn score_idx(&self, a: usize, b: usize, entry: NaiveDate, exit: NaiveDate) -> Trade {
        let dur = (b - a) as f64;
        let mut log_return = (self.price[b] / self.price[a]).ln();
        if self.cost_bps != 0.0 {
            log_return -= 2.0 * self.cost_bps * 1e-4;
        }
        let rates = &self.rate[a..b];
        let mean_rate = if rates.iter().all(|&r| r == rates[0]) {
            rates[0]
        } else {
            rates.iter().sum::<f64>() / dur
        };
        Trade {
            entry,
            exit,
            log_return,
            excess_log_return: log_return - mean_rate * dur / 365.0,
            duration_days: b as i64 - a as i64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub entry: NaiveDate,
    pub exit: NaiveDate,
    pub log_return: f64,
    pub excess_log_return: f64,
    pub duration_days: i64,
}

pub fn score_trades(intervals: &[TradeInterval], market: &Market) -> Result<Vec<Trade>, TradingError> {
    intervals.iter().map(|t| market.score(t)).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Mean excess return over the sample standard deviation of raw returns.
pub fn sharpe_per_trade(trades: &[Trade]) -> Result<f64, TradingError> {
    let raw: Vec<f64> = trades.iter().map(|t| t.log_return).collect();
    let excess: Vec<f64> = trades.iter().map(|t| t.excess_log_return).collect();
    sharpe_from(&raw, &excess)
}

fn sharpe_from(raw: &[f64], excess: &[f64]) -> Result<f64, TradingError> {
    if raw.len() < 2 {
        return Err(TradingError::TooFewTrades);
    }
    let sd = sample_sd(raw);
    if sd == 0.0 || !sd.is_finite() {
        return Err(TradingError::UndefinedSharpe);
    }
    Ok(mean(excess) / sd)
}

/// Count of excess returns in `[0, σ]` over one plus the count in `[−σ, 0)`,
/// with σ the sample standard deviation of the excess returns.
pub fn bias_ratio(excess: &[f64]) -> f64 {
    let sd = sample_sd(excess);
    let up = excess.iter().filter(|&&r| (0.0..=sd).contains(&r)).count();
    let down = excess.iter().filter(|&&r| r >= -sd && r < 0.0).count();
    up as f64 / (1 + down) as f64
}

/// Table-2 shaped summary of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub threshold: f64,
    pub offset: i64,
    pub holding_period: i64,
    pub number_of_trades: usize,
    pub success_rate: f64,
    pub total_holding_days: i64,
    pub period_days: i64,
    pub invested_fraction: f64,
    pub cumulative_log_return: f64,
    pub cumulative_excess_log_return: f64,
    pub average_return_per_trade: f64,
    pub average_trade_duration: f64,
    pub p_value_cumulative_excess_return: Option<f64>,
    pub sharpe_per_trade: Option<f64>,
    pub random_trades_sharpe: Option<f64>,
    pub p_value_sharpe: Option<f64>,
    pub bias_ratio: f64,
    pub random_trades_bias_ratio: Option<f64>,
    pub p_value_bias_ratio: Option<f64>,
    pub trades: Vec<Trade>,
}

pub fn summarize(params: &StrategyParams, trades: Vec<Trade>, period_days: i64) -> StrategyReport {
    let n = trades.len();
    let raw: Vec<f64> = trades.iter().map(|t| t.log_return).collect();
    let excess: Vec<f64> = trades.iter().map(|t| t.excess_log_return).collect();
    let holding: i64 = trades.iter().map(|t| t.duration_days).sum();
    let per = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    StrategyReport {
        threshold: params.threshold,
        offset: params.offset,
        holding_period: params.holding,
        number_of_trades: n,
        success_rate: per(raw.iter().filter(|&&r| r > 0.0).count() as f64),
        total_holding_days: holding,
        period_days,
        invested_fraction: if period_days > 0 { holding as f64 / period_days as f64 } else { 0.0 },
        cumulative_log_return: raw.iter().fold(0.0, |a, b| a + b),
        cumulative_excess_log_return: excess.iter().fold(0.0, |a, b| a + b),
        average_return_per_trade: per(raw.iter().sum()),
        average_trade_duration: per(holding as f64),
        p_value_cumulative_excess_return: None,
        sharpe_per_trade: sharpe_from(&raw, &excess).ok(),
        random_trades_sharpe: None,
        p_value_sharpe: None,
        bias_ratio: if n == 0 { 0.0 } else { bias_ratio(&excess) },
        random_trades_bias_ratio: None,
        p_value_bias_ratio: None,
        trades,
    }
}

/// `count` non-overlapping intervals with durations summing to `holding`
/// inside `[0, period]`: durations are a uniform composition of `holding`
/// into positive parts and the idle days a uniform weak composition into
/// `count + 1` gaps.
pub fn random_intervals(rng: &mut ChaCha8Rng, count: usize, holding: i64, period: i64) -> Result<Vec<(i64, i64)>, TradingError> {
    if count == 0 || holding < count as i64 || holding > period {
        return Err(TradingError::Infeasible { holding, count, period });
    }
    let durations = composition(rng, holding as usize, count, 1);
    let gaps = composition(rng, (period - holding) as usize, count + 1, 0);
    let mut out = Vec::with_capacity(count);
    let mut pos = 0i64;
    for k in 0..count {
        pos += gaps[k] as i64;
        let end = pos + durations[k] as i64;
        out.push((pos, end));
        pos = end;
    }
    Ok(out)
}

/// Uniform composition of `total` into `parts` parts, each at least `min`.
fn composition(rng: &mut ChaCha8Rng, total: usize, parts: usize, min: usize) -> Vec<usize> {
    let free = total - parts * min;
    // stars and bars: choose `parts - 1` bar slots among `free + parts - 1`
    let slots = free + parts - 1;
    let mut bars: Vec<usize> = sample(rng, slots, parts - 1).into_vec();
    bars.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0usize;
    for (k, &b) in bars.iter().enumerate() {
        out.push(b - prev - if k == 0 { 0 } else { 1 } + min);
        prev = b;
    }
    let last = if parts == 1 { slots } else { slots - prev - 1 };
    out.push(last + min);
    out
}

/// Random generator for draw `index` of a Monte-Carlo run.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Statistics of one random strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawStats {
    pub trades: usize,
    pub holding_days: i64,
    pub cumulative_excess: f64,
    pub sharpe: Option<f64>,
    pub bias: f64,
}

pub fn random_strategy_draw(market: &Market, count: usize, holding: i64, seed: u64, index: u64) -> Result<DrawStats, TradingError> {
    let mut rng = draw_rng(seed, index);
    let iv = random_intervals(&mut rng, count, holding, market.period_days() - 1)?;
    let trades: Vec<Trade> = iv
        .iter()
        .map(|&(a, b)| market.score_idx(a as usize, b as usize, date_from_day(market.first_day + a), date_from_day(market.first_day + b)))
        .collect();
    let raw: Vec<f64> = trades.iter().map(|t| t.log_return).collect();
    let excess: Vec<f64> = trades.iter().map(|t| t.excess_log_return).collect();
    Ok(DrawStats {
        trades: trades.len(),
        holding_days: trades.iter().map(|t| t.duration_days).sum(),
        cumulative_excess: excess.iter().sum(),
        sharpe: sharpe_from(&raw, &excess).ok(),
        bias: bias_ratio(&excess),
    })
}

/// All draws of a run, in index order regardless of thread count.
pub fn random_strategy_draws(market: &Market, count: usize, holding: i64, draws: usize, seed: u64) -> Result<Vec<DrawStats>, TradingError> {
    (0..draws as u64)
        .into_par_iter()
        .map(|i| random_strategy_draw(market, count, holding, seed, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub cumulative_excess: f64,
    pub sharpe: Option<f64>,
    pub bias: f64,
}

/// Fraction of draws at least as good as the strategy. Draws with an
/// undefined Sharpe ratio never count as better.
pub fn p_values(report: &StrategyReport, draws: &[DrawStats]) -> PValues {
    let n = draws.len() as f64;
    let frac = |k: usize| k as f64 / n;
    PValues {
        cumulative_excess: frac(draws.iter().filter(|d| d.cumulative_excess >= report.cumulative_excess_log_return).count()),
        sharpe: report
            .sharpe_per_trade
            .map(|s| frac(draws.iter().filter(|d| d.sharpe.is_some_and(|x| x >= s)).count())),
        bias: frac(draws.iter().filter(|d| d.bias >= report.bias_ratio).count()),
    }
}

pub fn random_strategy_pvalue(report: &StrategyReport, market: &Market, draws: usize, seed: u64) -> Result<PValues, TradingError> {
    let holding = report.total_holding_days;
    let stats = random_strategy_draws(market, report.number_of_trades, holding, draws, seed)?;
    Ok(p_values(report, &stats))
}

/// Sharpe and bias ratio over every trade of `duration` days in the market span.
pub fn random_trade_baseline(market: &Market, duration: i64) -> (Option<f64>, f64) {
    let n = market.period_days();
    if duration < 1 || duration >= n {
        return (None, 0.0);
    }
    let trades: Vec<Trade> = (0..n - duration)
        .map(|a| {
            let b = a + duration;
            market.score_idx(a as usize, b as usize, date_from_day(market.first_day + a), date_from_day(market.first_day + b))
        })
        .collect();
    let raw: Vec<f64> = trades.iter().map(|t| t.log_return).collect();
    let excess: Vec<f64> = trades.iter().map(|t| t.excess_log_return).collect();
    (sharpe_from(&raw, &excess).ok(), bias_ratio(&excess))
}

/// Fills the Monte-Carlo fields of `report`.
pub fn add_significance(report: &mut StrategyReport, market: &Market, draws: usize, seed: u64) -> Result<(), TradingError> {
    if report.number_of_trades == 0 {
        return Ok(());
    }
    let p = random_strategy_pvalue(report, market, draws, seed)?;
    report.p_value_cumulative_excess_return = Some(p.cumulative_excess);
    report.p_value_sharpe = p.sharpe;
    report.p_value_bias_ratio = Some(p.bias);
    let (s, b) = random_trade_baseline(market, report.average_trade_duration.round() as i64);
    report.random_trades_sharpe = s;
    report.random_trades_bias_ratio = Some(b);
    Ok(())
}

/// CSV `entry,exit,log_return,excess`.
pub fn write_trades_csv<W: Write>(trades: &[Trade], mut w: W) -> std::io::Result<()> {
    writeln!(w, "entry,exit,log_return,excess")?;
    for t in trades {
        writeln!(w, "{},{},{},{}", t.entry, t.exit, t.log_return, t.excess_log_return)?;
    }
    Ok(())
}
