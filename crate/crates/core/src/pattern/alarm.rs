//! Daily alarm-index series in learning and prediction mode.

use std::io::{BufRead, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::features::FeatureSet;
use super::informative::{FitSummary, InformativeParam};
use super::questionnaire::ScanIndex;
use crate::data::{date_from_day, day_number};
use crate::error::PatternError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmMode {
    Learning,
    Prediction,
}

/// Alarm index on consecutive calendar days starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmSeries {
    pub mode: AlarmMode,
    pub start: NaiveDate,
    pub values: Vec<f64>,
}

impl AlarmSeries {
    pub fn new(mode: AlarmMode, start: NaiveDate, values: Vec<f64>) -> Self {
        Self { mode, start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_day(&self) -> i64 {
        day_number(self.start)
    }

    pub fn end(&self) -> Option<NaiveDate> {
        (!self.values.is_empty()).then(|| date_from_day(self.start_day() + self.values.len() as i64 - 1))
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        date_from_day(self.start_day() + i as i64)
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        let i = day_number(date) - self.start_day();
        (i >= 0).then(|| self.values.get(i as usize).copied()).flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.date(i), v))
    }

    /// Days with `from <= date <= to`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> AlarmSeries {
        let s = (day_number(from) - self.start_day()).max(0) as usize;
        let e = ((day_number(to) - self.start_day() + 1).max(0) as usize).min(self.values.len());
        let s = s.min(e);
        AlarmSeries { mode: self.mode, start: self.date(s), values: self.values[s..e].to_vec() }
    }

    /// CSV `date,RI`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,RI")?;
        for (d, v) in self.iter() {
            writeln!(w, "{d},{v}")?;
        }
        Ok(())
    }

    /// Reads `date,RI` rows; dates must be consecutive.
    pub fn read_csv<R: BufRead>(mode: AlarmMode, r: R) -> Result<Self, PatternError> {
        let mut start = None;
        let mut values = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| PatternError::Malformed(e.to_string()))?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let (d, v) = line
                .split_once(',')
                .ok_or_else(|| PatternError::Malformed(format!("line {}: {line}", n + 1)))?;
            let d: NaiveDate = d.parse().map_err(|_| PatternError::Malformed(format!("line {}: bad date", n + 1)))?;
            let v: f64 = v.trim().parse().map_err(|_| PatternError::Malformed(format!("line {}: bad value", n + 1)))?;
            let s = *start.get_or_insert(d);
            if day_number(d) - day_number(s) != values.len() as i64 {
                return Err(PatternError::Malformed(format!("line {}: dates not consecutive", n + 1)));
            }
            values.push(v);
        }
        let start = start.ok_or_else(|| PatternError::Malformed("empty alarm series".into()))?;
        Ok(Self { mode, start, values })
    }
}

/// Learning-mode index for every day in `[first_day, last_day]`.
pub fn learning_series(
    index: &ScanIndex,
    ips: &[InformativeParam],
    features: &FeatureSet,
    near_days: f64,
    first_day: i64,
    last_day: i64,
) -> AlarmSeries {
    let lookup = features.lookup();
    let values = (first_day..=last_day)
        .map(|t| lookup.index(&index.questionnaire(t, ips, near_days, None).answers))
        .collect();
    AlarmSeries::new(AlarmMode::Learning, date_from_day(first_day), values)
}

/// Evidence that no prediction used a window ending after its block start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub blocks: usize,
    pub fits_used: usize,
    pub violations: usize,
    pub features_before_start: bool,
}

impl LeakageAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.features_before_start
    }
}

/// Prediction-mode index: grid days `g = start + k·step`; the value built at
/// `g` from windows with `t2 <= g` holds on `[g, g + step)`.
#[allow(clippy::too_many_arguments)]
pub fn predict_series(
    fits: &[FitSummary],
    ips: &[InformativeParam],
    features: &FeatureSet,
    feature_cutoff: NaiveDate,
    near_days: f64,
    start: NaiveDate,
    end: NaiveDate,
    step: i64,
) -> (AlarmSeries, LeakageAudit) {
    let lookup = features.lookup();
    let index = ScanIndex::new(fits.to_vec());
    let (s, e) = (day_number(start), day_number(end));
    let mut values = Vec::with_capacity((e - s + 1).max(0) as usize);
    let mut audit = LeakageAudit {
        blocks: 0,
        fits_used: 0,
        violations: 0,
        features_before_start: feature_cutoff <= start,
    };
    let mut g = s;
    while g <= e {
        let used: Vec<FitSummary> = index.near(g as f64, near_days).iter().filter(|f| f.t2 <= g).copied().collect();
        audit.blocks += 1;
        audit.fits_used += used.len();
        audit.violations += used.iter().filter(|f| f.t2 > g).count();
        let answers: Vec<i8> = ips.iter().map(|ip| super::questionnaire::answer(ip, &used)).collect();
        let ri = lookup.index(&answers);
        let block_end = (g + step - 1).min(e);
        values.extend(std::iter::repeat_n(ri, (block_end - g + 1) as usize));
        g += step;
    }
    (AlarmSeries::new(AlarmMode::Prediction, start, values), audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::features::{extract_features, Qualification, TraitCounts};
    use crate::pattern::informative::ParamKind;
    use crate::pattern::traits::TraitSpace;
    use crate::pattern::ClassLabel;

    fn ip() -> InformativeParam {
        InformativeParam { id: 7, group: 1, param: ParamKind::M, ks_distance: 0.3, good_region: vec![(0.0, 0.5)] }
    }

    fn features() -> FeatureSet {
        let mut c = TraitCounts::new(TraitSpace::new(1));
        for _ in 0..20 {
            c.add(&[1], ClassLabel::ClassI);
        }
        for _ in 0..300 {
            c.add(&[-1], ClassLabel::ClassII);
        }
        extract_features(&c, Qualification { alpha: 10, beta: 200 })
    }

    fn fit(tc: f64, t2: i64, m: f64) -> FitSummary {
        FitSummary { tc, t2, group: 1, values: [m, 8.0, 1.0, 0.1, -0.2, 0.01] }
    }

    #[test]
    fn constant_within_blocks_and_no_leakage() {
        let start = NaiveDate::from_ymd_opt(1975, 1, 1).unwrap();
        let s = day_number(start);
        let fits: Vec<FitSummary> = (0..40)
            .map(|k| fit((s + 25 * k) as f64, s + 25 * k - 5 + (k % 3) * 10, if k % 2 == 0 { 0.2 } else { 0.8 }))
            .collect();
        let (series, audit) = predict_series(&fits, &[ip()], &features(), start, 10.0, start, start + chrono::Duration::days(499), 50);
        assert_eq!(series.len(), 500);
        assert!(audit.passed());
        assert_eq!(audit.blocks, 10);
        for block in series.values.chunks(50) {
            assert!(block.iter().all(|&v| v == block[0]));
        }
        assert!(series.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn block_value_ignores_windows_ending_later() {
        let start = NaiveDate::from_ymd_opt(1980, 1, 1).unwrap();
        let s = day_number(start);
        let early = vec![fit(s as f64, s - 10, 0.2)];
        let mut with_late = early.clone();
        with_late.push(fit(s as f64 + 1.0, s + 1, 0.8));
        with_late.push(fit(s as f64 + 2.0, s + 3, 0.9));
        let end = start + chrono::Duration::days(49);
        let a = predict_series(&early, &[ip()], &features(), start, 10.0, start, end, 50).0;
        let b = predict_series(&with_late, &[ip()], &features(), start, 10.0, start, end, 50).0;
        assert_eq!(a, b);
        assert_eq!(a.values[0], 1.0);
    }

    #[test]
    fn empty_features_give_zeros() {
        let start = NaiveDate::from_ymd_opt(1980, 1, 1).unwrap();
        let s = day_number(start);
        let fits = vec![fit(s as f64, s - 10, 0.2)];
        let empty = FeatureSet::empty(TraitSpace::new(1), Qualification { alpha: 10, beta: 200 });
        let (series, _) = predict_series(&fits, &[ip()], &empty, start, 10.0, start, start + chrono::Duration::days(120), 50);
        assert!(series.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn csv_roundtrip() {
        let a = AlarmSeries::new(AlarmMode::Prediction, NaiveDate::from_ymd_opt(2000, 2, 27).unwrap(), vec![0.0, 0.25, 1.0, 0.1]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("date,RI\n2000-02-27,0\n"));
        assert_eq!(AlarmSeries::read_csv(AlarmMode::Prediction, buf.as_slice()).unwrap(), a);
        let sub = a.between(NaiveDate::from_ymd_opt(2000, 2, 28).unwrap(), NaiveDate::from_ymd_opt(2000, 3, 10).unwrap());
        assert_eq!(sub.values, vec![0.25, 1.0, 0.1]);
    }
}
