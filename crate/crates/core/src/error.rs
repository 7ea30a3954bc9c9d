use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

use crate::data::WindowSpec;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-positive price {price} on {date}")]
    NonPositivePrice { date: NaiveDate, price: f64 },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("invalid window rules: {0}")]
    InvalidRules(String),
    #[error("window {}..{} contains no trading days", .0.t1, .0.t2)]
    EmptyWindow(WindowSpec),
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("time {t} is not before the critical time {tc}")]
    Domain { t: f64, tc: f64 },
    #[error("degenerate regressor basis (condition number {0:.3e})")]
    DegenerateBasis(f64),
    #[error("window has no observations")]
    EmptyWindow,
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} observations, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite objective during refinement")]
    NumericFailure { last_good: [f64; 4] },
    #[error("every candidate failed for window {}..{}", .0.t1, .0.t2)]
    AllCandidatesFailed(WindowSpec),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("window length {0} days is outside [100, 1500]")]
    LengthOutOfRange(i64),
    #[error("need at least 2 samples for a density estimate, found {0}")]
    InsufficientSamples(usize),
    #[error("no class I fits: no rebounds in the learning period")]
    NoClassI,
    #[error("malformed record: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no alarm history reaches Lv = {0}")]
    UndefinedPosterior(f64),
    #[error("empty alarm history")]
    EmptyHistory,
}

#[derive(Debug, Error, PartialEq)]
pub enum TradingError {
    #[error("need at least 2 trades for a Sharpe ratio")]
    TooFewTrades,
    #[error("Sharpe ratio undefined: zero dispersion of trade returns")]
    UndefinedSharpe,
    #[error("no price data for {0}")]
    OutsideCoverage(NaiveDate),
    #[error("holding {holding} days in {count} trades does not fit a {period}-day period")]
    Infeasible { holding: i64, count: usize, period: i64 },
    #[error("trade exit {exit} is not after entry {entry}")]
    EmptyTrade { entry: NaiveDate, exit: NaiveDate },
}
