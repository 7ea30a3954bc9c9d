//! Daily price series, sliding-window generation and window slicing.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Epoch used to express calendar days as fitting time.
pub const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => panic!("invalid epoch"),
};

/// Calendar day number relative to 1970-01-01.
pub fn day_number(date: NaiveDate) -> i64 {
    (date - EPOCH).num_days()
}

/// Inverse of [`day_number`].
pub fn date_from_day(day: i64) -> NaiveDate {
    EPOCH + chrono::Duration::days(day)
}

/// Fractional day (e.g. a critical time) to the calendar day containing it.
pub fn date_from_time(t: f64) -> NaiveDate {
    date_from_day(t.floor() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    Log,
}

/// A dated sequence of observations with strictly increasing dates.
///
/// Linear-scale series hold prices and require every value to be positive.
/// Log-scale series come from [`log_prices`] and may hold any finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    scale: Scale,
}

impl PriceSeries {
    /// Builds a linear price series, sorting by date and validating invariants.
    pub fn new(mut entries: Vec<(NaiveDate, f64)>) -> Result<Self, DataError> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DataError::DuplicateDate(w[0].0));
            }
        }
        for &(date, price) in &entries {
            if !(price > 0.0) || !price.is_finite() {
                return Err(DataError::NonPositivePrice { date, price });
            }
        }
        let (dates, values) = entries.into_iter().unzip();
        Ok(Self {
            dates,
            values,
            scale: Scale::Linear,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates.iter().copied().zip(self.values.iter().copied())
    }

    /// Observation times as fractional days since 1970-01-01.
    pub fn times(&self) -> Vec<f64> {
        self.dates.iter().map(|&d| day_number(d) as f64).collect()
    }

    /// Value on `date`, or on the closest earlier date.
    pub fn value_as_of(&self, date: NaiveDate) -> Option<f64> {
        match self.dates.binary_search(&date) {
            Ok(i) => Some(self.values[i]),
            Err(0) => None,
            Err(i) => Some(self.values[i - 1]),
        }
    }

    /// Entries with `from <= date <= to`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> PriceSeries {
        let lo = self.dates.partition_point(|&d| d < from);
        let hi = self.dates.partition_point(|&d| d <= to);
        let hi = hi.max(lo);
        PriceSeries {
            dates: self.dates[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
            scale: self.scale,
        }
    }

    /// Element-wise exponential of a log-scale series.
    pub fn exp(&self) -> PriceSeries {
        PriceSeries {
            dates: self.dates.clone(),
            values: self.values.iter().map(|v| v.exp()).collect(),
            scale: Scale::Linear,
        }
    }
}

/// Parses `date,price` rows. A first row whose date does not parse is taken as a header.
pub fn parse_price_csv<R: Read>(reader: R) -> Result<PriceSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut entries = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| DataError::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(DataError::Parse {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let date = match NaiveDate::parse_from_str(&record[0], "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) if line == 1 => continue,
            Err(e) => {
                return Err(DataError::Parse {
                    line,
                    message: format!("bad date {:?}: {e}", &record[0]),
                })
            }
        };
        let price: f64 = record[1].parse().map_err(|e| DataError::Parse {
            line,
            message: format!("bad price {:?}: {e}", &record[1]),
        })?;
        entries.push((date, price));
    }
    PriceSeries::new(entries)
}

pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_price_csv(std::io::BufReader::new(file))
}

/// Natural log of every price; dates unchanged.
pub fn log_prices(series: &PriceSeries) -> PriceSeries {
    match series.scale {
        Scale::Log => series.clone(),
        Scale::Linear => PriceSeries {
            dates: series.dates.clone(),
            values: series.values.iter().map(|p| p.ln()).collect(),
            scale: Scale::Log,
        },
    }
}

/// Calendar-day rules for the sliding fitting windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowRules {
    pub dt1_step: i64,
    pub dt2_step: i64,
    pub dt_min: i64,
    pub dt_max: i64,
}

impl Default for WindowRules {
    fn default() -> Self {
        Self {
            dt1_step: 50,
            dt2_step: 50,
            dt_min: 110,
            dt_max: 1500,
        }
    }
}

impl WindowRules {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.dt1_step <= 0 || self.dt2_step <= 0 || self.dt_min <= 0 || self.dt_max <= 0 {
            return Err(DataError::InvalidRules("all steps and bounds must be positive".into()));
        }
        if self.dt_min >= self.dt_max {
            return Err(DataError::InvalidRules("dt_min must be below dt_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSpec {
    pub t1: NaiveDate,
    pub t2: NaiveDate,
}

impl WindowSpec {
    pub fn length_days(&self) -> i64 {
        (self.t2 - self.t1).num_days()
    }
}

/// Windows over the span of `series`; see [`generate_windows_between`].
pub fn generate_windows(series: &PriceSeries, rules: &WindowRules) -> Vec<WindowSpec> {
    match (series.first_date(), series.last_date()) {
        (Some(start), Some(end)) => generate_windows_between(start, end, rules),
        _ => Vec::new(),
    }
}

/// Every `(t1, t2)` with `t1` on the forward grid from `start`, `t2` on the
/// backward grid from `end`, and `dt_min <= t2 - t1 <= dt_max`.
/// Ordered by ascending `t1`, then ascending `t2`.
pub fn generate_windows_between(
    start: NaiveDate,
    end: NaiveDate,
    rules: &WindowRules,
) -> Vec<WindowSpec> {
    let span = (end - start).num_days();
    if rules.validate().is_err() || span < rules.dt_min {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i * rules.dt1_step <= span - rules.dt_min {
        let off1 = i * rules.dt1_step;
        // t2 offsets from the end: j * dt2_step, length = span - off1 - off2.
        let rem = span - off1;
        // smallest j with length <= dt_max, largest j with length >= dt_min
        let j_lo = if rem > rules.dt_max {
            (rem - rules.dt_max + rules.dt2_step - 1) / rules.dt2_step
        } else {
            0
        };
        let j_hi = (rem - rules.dt_min) / rules.dt2_step;
        let t1 = start + chrono::Duration::days(off1);
        for j in (j_lo..=j_hi).rev() {
            let t2 = end - chrono::Duration::days(j * rules.dt2_step);
            out.push(WindowSpec { t1, t2 });
        }
        i += 1;
    }
    out
}

/// Entries of `series` inside the window, inclusive at both ends.
pub fn slice_window(series: &PriceSeries, w: &WindowSpec) -> Result<PriceSeries, DataError> {
    let s = series.between(w.t1, w.t2);
    if s.is_empty() {
        return Err(DataError::EmptyWindow(*w));
    }
    Ok(s)
}

pub fn write_windows_csv<W: std::io::Write>(
    windows: &[WindowSpec],
    writer: W,
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["t1", "t2"])?;
    for w in windows {
        wtr.write_record([w.t1.to_string(), w.t2.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
