//! Error diagrams and Bayesian rebound probabilities for an alarm series.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::day_number;
use crate::error::EvalError;
use crate::pattern::AlarmSeries;
use crate::rebound::{ReboundSet, ReboundTimeline};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDiagramPoint {
    pub threshold: f64,
    pub alarm_fraction: f64,
    pub miss_fraction: f64,
}

impl ErrorDiagramPoint {
    /// Perpendicular distance to the random-guess line `y = 1 − x`
    /// (positive below it).
    pub fn skill_distance(&self) -> f64 {
        (1.0 - self.alarm_fraction - self.miss_fraction) / std::f64::consts::SQRT_2
    }

    /// Vertical distance below `y = 1 − x`.
    pub fn vertical_gap(&self) -> f64 {
        1.0 - self.alarm_fraction - self.miss_fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagramConfig {
    pub alarm_duration: i64,
    /// Shift of the alarm window centre relative to the trigger day.
    pub offset: i64,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        Self { alarm_duration: 41, offset: 0 }
    }
}

/// Sweeps the threshold down through the distinct index values. Every day
/// whose index reaches the threshold opens an alarm window around it; a point
/// is emitted whenever the number of rebounds inside alarmed days grows.
pub fn error_diagram(alarms: &AlarmSeries, rebounds: &ReboundSet, cfg: &DiagramConfig) -> Vec<ErrorDiagramPoint> {
    let n = alarms.len();
    let start = alarms.start_day();
    let targets: Vec<usize> = rebounds
        .dates
        .iter()
        .map(|&d| day_number(d) - start)
        .filter(|&i| i >= 0 && (i as usize) < n)
        .map(|i| i as usize)
        .collect();
    if targets.is_empty() || n == 0 {
        return Vec::new();
    }
    let before = (cfg.alarm_duration - 1) / 2 - cfg.offset;
    let after = cfg.alarm_duration - 1 - (cfg.alarm_duration - 1) / 2 + cfg.offset;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| alarms.values[b].total_cmp(&alarms.values[a]).then(a.cmp(&b)));
    let mut is_target = vec![false; n];
    for &t in &targets {
        is_target[t] = true;
    }
    let mut covered = vec![false; n];
    let mut covered_count = 0usize;
    let mut hit = 0usize;
    let mut reported = 0usize;
    let mut points = Vec::new();
    let mut k = 0;
    while k < n {
        let th = alarms.values[order[k]];
        while k < n && alarms.values[order[k]] == th {
            let i = order[k] as i64;
            let lo = (i - before).max(0) as usize;
            let hi = (i + after).min(n as i64 - 1);
            if hi >= lo as i64 {
                for day in lo..=hi as usize {
                    if !covered[day] {
                        covered[day] = true;
                        covered_count += 1;
                        hit += is_target[day] as usize;
                    }
                }
            }
            k += 1;
        }
        if hit > reported {
            reported = hit;
            points.push(ErrorDiagramPoint {
                threshold: th,
                alarm_fraction: covered_count as f64 / n as f64,
                miss_fraction: (targets.len() - hit) as f64 / targets.len() as f64,
            });
        }
    }
    points
}

/// CSV `threshold,alarm_fraction,miss_fraction`.
pub fn write_diagram_csv<W: Write>(points: &[ErrorDiagramPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "threshold,alarm_fraction,miss_fraction")?;
    for p in points {
        writeln!(w, "{},{},{}", p.threshold, p.alarm_fraction, p.miss_fraction)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesConfig {
    /// Days counted as "near" a rebound for the prior.
    pub rebound_width: i64,
    /// Half-width of the neighbourhood scanned for the likelihood.
    pub neighborhood: i64,
    /// `Lv` is the highest index on the `lookback` days ending at the evaluation day.
    pub lookback: i64,
    pub history_start: NaiveDate,
    pub first_evaluation: NaiveDate,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            rebound_width: 21,
            neighborhood: 20,
            lookback: 50,
            history_start: NaiveDate::from_ymd_opt(1975, 1, 1).unwrap(),
            first_evaluation: NaiveDate::from_ymd_opt(1985, 1, 1).unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesEstimate {
    pub date: NaiveDate,
    pub lv: f64,
    pub d_total: usize,
    pub d_lv: usize,
    pub n_rebound: usize,
    pub n0: usize,
    pub p_ri: f64,
    pub prior: f64,
    pub likelihood: f64,
    pub posterior: f64,
}

/// Probability that `d` is near a rebound given the recent index level,
/// from the alarm history `[history_start, d]` and the rebounds in it.
pub fn bayes_posterior(
    alarms: &AlarmSeries,
    rebounds: &ReboundSet,
    d: NaiveDate,
    cfg: &BayesConfig,
) -> Result<BayesEstimate, EvalError> {
    let history = alarms.between(cfg.history_start, d);
    if history.is_empty() {
        return Err(EvalError::EmptyHistory);
    }
    let h0 = history.start_day();
    let dn = day_number(d);
    let recent_from = ((dn - cfg.lookback + 1) - h0).max(0) as usize;
    let lv = history.values[recent_from.min(history.len())..]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !lv.is_finite() {
        return Err(EvalError::EmptyHistory);
    }
    let d_total = history.len();
    let d_lv = history.values.iter().filter(|&&v| v >= lv).count();
    if d_lv == 0 {
        return Err(EvalError::UndefinedPosterior(lv));
    }
    let inside: Vec<i64> = rebounds
        .dates
        .iter()
        .map(|&r| day_number(r) - h0)
        .filter(|&i| i >= 0 && i < d_total as i64)
        .collect();
    let n_rebound = inside.len();
    let n0 = inside
        .iter()
        .filter(|&&r| {
            let lo = (r - cfg.neighborhood).max(0) as usize;
            let hi = (r + cfg.neighborhood).min(d_total as i64 - 1) as usize;
            history.values[lo..=hi].iter().any(|&v| v >= lv)
        })
        .count();
    let p_ri = d_lv as f64 / d_total as f64;
    let prior = (cfg.rebound_width as usize * n_rebound) as f64 / d_total as f64;
    let likelihood = if n_rebound == 0 { 0.0 } else { n0 as f64 / n_rebound as f64 };
    Ok(BayesEstimate {
        date: d,
        lv,
        d_total,
        d_lv,
        n_rebound,
        n0,
        p_ri,
        prior,
        likelihood,
        posterior: prior * likelihood / p_ri,
    })
}

/// Estimates for every price date from `first_evaluation` on, using only
/// prices and alarms up to that date.
pub fn bayes_report(
    alarms: &AlarmSeries,
    timeline: &ReboundTimeline,
    dates: &[NaiveDate],
    cfg: &BayesConfig,
) -> Vec<BayesEstimate> {
    let last = alarms.end();
    dates
        .iter()
        .filter(|&&d| d >= cfg.first_evaluation && last.is_some_and(|l| d <= l))
        .filter_map(|&d| bayes_posterior(alarms, &timeline.as_of(d), d, cfg).ok())
        .collect()
}

/// CSV `date,Lv,prior,likelihood,evidence,posterior`.
pub fn write_bayes_csv<W: Write>(rows: &[BayesEstimate], mut w: W) -> std::io::Result<()> {
    writeln!(w, "date,Lv,prior,likelihood,evidence,posterior")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.date, r.lv, r.prior, r.likelihood, r.p_ri, r.posterior)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::date_from_day;
    use crate::pattern::AlarmMode;
    use crate::rebound::ReboundRule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn set(dates: Vec<NaiveDate>) -> ReboundSet {
        ReboundSet { dates, rule: ReboundRule::default() }
    }

    #[test]
    fn perfect_index() {
        let start = day("1990-01-01");
        let mut v = vec![0.0; 2000];
        let rebound_idx = [300usize, 900, 1500];
        for &i in &rebound_idx {
            v[i] = 1.0;
        }
        let a = AlarmSeries::new(AlarmMode::Prediction, start, v);
        let r = set(rebound_idx.iter().map(|&i| a.date(i)).collect());
        let pts = error_diagram(&a, &r, &DiagramConfig::default());
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].miss_fraction, 0.0);
        assert!((pts[0].alarm_fraction - 41.0 * 3.0 / 2000.0).abs() < 1e-12);
    }

    #[test]
    fn constant_index() {
        let a = AlarmSeries::new(AlarmMode::Prediction, day("1990-01-01"), vec![0.3; 500]);
        let r = set(vec![day("1990-03-01"), day("1990-09-01")]);
        let pts = error_diagram(&a, &r, &DiagramConfig::default());
        assert_eq!(pts, vec![ErrorDiagramPoint { threshold: 0.3, alarm_fraction: 1.0, miss_fraction: 0.0 }]);
        assert!(error_diagram(&a, &set(vec![]), &DiagramConfig::default()).is_empty());
    }

    #[test]
    fn offset_moves_the_window() {
        let start = day("1990-01-01");
        let mut v = vec![0.0; 400];
        v[100] = 1.0;
        let a = AlarmSeries::new(AlarmMode::Prediction, start, v);
        let r = set(vec![a.date(125)]);
        assert!(error_diagram(&a, &r, &DiagramConfig::default())[0].threshold == 0.0);
        let shifted = DiagramConfig { offset: 10, ..Default::default() };
        assert_eq!(error_diagram(&a, &r, &shifted)[0].threshold, 1.0);
    }

    #[test]
    fn sweep_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = AlarmSeries::new(AlarmMode::Prediction, day("1980-01-01"), (0..3000).map(|_| rng.gen::<f64>()).collect());
        let r = set((0..8).map(|k| a.date(200 + 350 * k)).collect());
        let pts = error_diagram(&a, &r, &DiagramConfig::default());
        assert_eq!(pts.len(), 8);
        for w in pts.windows(2) {
            assert!(w[1].threshold < w[0].threshold);
            assert!(w[1].alarm_fraction >= w[0].alarm_fraction);
            assert!(w[1].miss_fraction < w[0].miss_fraction);
        }
        assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.alarm_fraction) && (0.0..=1.0).contains(&p.miss_fraction)));
    }

    #[test]
    fn zero_history_gives_prior() {
        let cfg = BayesConfig { history_start: day("1975-01-01"), ..Default::default() };
        let a = AlarmSeries::new(AlarmMode::Prediction, day("1975-01-01"), vec![0.0; 4000]);
        let r = set(vec![day("1978-03-06"), day("1980-03-27")]);
        let d = day("1985-06-01");
        let e = bayes_posterior(&a, &r, d, &cfg).unwrap();
        assert_eq!(e.lv, 0.0);
        assert_eq!(e.p_ri, 1.0);
        assert_eq!(e.likelihood, 1.0);
        assert_eq!(e.posterior, e.prior);
        assert_eq!(e.d_total as i64, day_number(d) - day_number(day("1975-01-01")) + 1);
    }

    /// Counting every alarmed day near a rebound directly: with all alarmed
    /// days inside rebound neighbourhoods, the posterior is the rebound width
    /// times the number of alarmed neighbourhoods over the alarmed days.
    #[test]
    fn posterior_matches_direct_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = 3000;
            let start = day("1975-01-01");
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.3)).collect();
            let rebound_idx: Vec<usize> = (0..6).map(|k| 100 + 450 * k + rng.gen_range(0..50)).collect();
            for &r in &rebound_idx {
                if rng.gen_bool(0.7) {
                    for _ in 0..rng.gen_range(1..8) {
                        let j = r + rng.gen_range(0..41) - 20;
                        v[j] = rng.gen_range(0.6..1.0);
                    }
                }
            }
            let d_idx = n - 1;
            v[d_idx - 10] = 0.95;
            let a = AlarmSeries::new(AlarmMode::Prediction, start, v.clone());
            let reb = set(rebound_idx.iter().map(|&i| a.date(i)).collect());
            let cfg = BayesConfig { history_start: start, ..Default::default() };
            let e = bayes_posterior(&a, &reb, a.date(d_idx), &cfg).unwrap();

            let lv = v[d_idx - 49..=d_idx].iter().cloned().fold(0.0, f64::max);
            let alarmed: Vec<usize> = (0..n).filter(|&i| v[i] >= lv).collect();
            let mut neighbourhoods = std::collections::BTreeSet::new();
            for &i in &alarmed {
                for (k, &r) in rebound_idx.iter().enumerate() {
                    if (i as i64 - r as i64).abs() <= 20 {
                        neighbourhoods.insert(k);
                    }
                }
            }
            let direct = 21.0 * neighbourhoods.len() as f64 / alarmed.len() as f64;
            assert_eq!(e.d_lv, alarmed.len());
            assert_eq!(e.n0, neighbourhoods.len());
            assert!((e.posterior - direct).abs() <= 1e-12 * direct.max(1.0), "{} vs {direct}", e.posterior);
            assert!((e.posterior - e.prior * e.likelihood / e.p_ri).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_history_is_an_error() {
        let a = AlarmSeries::new(AlarmMode::Prediction, day("1990-01-01"), vec![0.5; 10]);
        let cfg = BayesConfig { history_start: day("1995-01-01"), ..Default::default() };
        assert_eq!(bayes_posterior(&a, &set(vec![]), day("1996-01-01"), &cfg), Err(EvalError::EmptyHistory));
        assert_eq!(date_from_day(day_number(day("1990-01-01"))), day("1990-01-01"));
    }
}
