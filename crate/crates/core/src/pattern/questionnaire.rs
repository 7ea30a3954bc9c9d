//! Questionnaires: per-day answers, one per informative parameter.

use serde::{Deserialize, Serialize};

use super::informative::{FitSummary, InformativeParam};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    /// Scan day, in days since 1970-01-01.
    pub t_scan: i64,
    pub answers: Vec<i8>,
}

/// Answer of one informative parameter over the fits near the scan day.
pub fn answer<'a>(ip: &InformativeParam, near: impl IntoIterator<Item = &'a FitSummary>) -> i8 {
    let (mut inside, mut outside) = (0usize, 0usize);
    for f in near.into_iter().filter(|f| f.group == ip.group) {
        if ip.in_good_region(f.value(ip.param)) {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    match inside.cmp(&outside) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    }
}

/// Direct construction from an unordered fit list.
pub fn build_questionnaire(t_scan: i64, fits: &[FitSummary], ips: &[InformativeParam], near_days: f64) -> Questionnaire {
    let t = t_scan as f64;
    let near: Vec<&FitSummary> = fits.iter().filter(|f| (f.tc - t).abs() <= near_days).collect();
    Questionnaire { t_scan, answers: ips.iter().map(|ip| answer(ip, near.iter().copied())).collect() }
}

/// Fits sorted by critical time for fast daily scans.
#[derive(Debug, Clone)]
pub struct ScanIndex {
    fits: Vec<FitSummary>,
}

impl ScanIndex {
    pub fn new(mut fits: Vec<FitSummary>) -> Self {
        fits.sort_by(|a, b| a.tc.total_cmp(&b.tc).then(a.t2.cmp(&b.t2)));
        Self { fits }
    }

    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }

    pub fn min_tc(&self) -> Option<f64> {
        self.fits.first().map(|f| f.tc)
    }

    pub fn max_tc(&self) -> Option<f64> {
        self.fits.last().map(|f| f.tc)
    }

    /// Fits with `|tc − t| ≤ near_days`.
    pub fn near(&self, t: f64, near_days: f64) -> &[FitSummary] {
        let lo = self.fits.partition_point(|f| f.tc < t - near_days);
        let hi = self.fits.partition_point(|f| f.tc <= t + near_days);
        &self.fits[lo..hi]
    }

    /// Questionnaire from fits near `t_scan`, optionally restricted to
    /// windows ending on or before `max_t2`.
    pub fn questionnaire(
        &self,
        t_scan: i64,
        ips: &[InformativeParam],
        near_days: f64,
        max_t2: Option<i64>,
    ) -> Questionnaire {
        let near = self.near(t_scan as f64, near_days);
        let keep = |f: &&FitSummary| max_t2.is_none_or(|m| f.t2 <= m);
        Questionnaire {
            t_scan,
            answers: ips.iter().map(|ip| answer(ip, near.iter().filter(keep))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::informative::ParamKind;
    use proptest::prelude::*;

    fn fit(tc: f64, group: u8, m: f64) -> FitSummary {
        FitSummary { tc, t2: tc as i64 - 30, group, values: [m, 8.0, 1.0, 0.1, -0.2, 0.01] }
    }

    fn ip19() -> InformativeParam {
        InformativeParam { id: 19, group: 3, param: ParamKind::M, ks_distance: 0.2, good_region: vec![(0.3, 0.6)] }
    }

    #[test]
    fn two_member_example() {
        let ips = [ip19()];
        let both_in = [fit(100.0, 3, 0.4), fit(101.0, 3, 0.5)];
        assert_eq!(build_questionnaire(100, &both_in, &ips, 10.0).answers, vec![1]);
        let split = [fit(100.0, 3, 0.4), fit(101.0, 3, 0.9)];
        assert_eq!(build_questionnaire(100, &split, &ips, 10.0).answers, vec![0]);
        let both_out = [fit(100.0, 3, 0.1), fit(101.0, 3, 0.9)];
        assert_eq!(build_questionnaire(100, &both_out, &ips, 10.0).answers, vec![-1]);
        let other_group = [fit(100.0, 4, 0.4)];
        assert_eq!(build_questionnaire(100, &other_group, &ips, 10.0).answers, vec![0]);
        let far = [fit(111.0, 3, 0.4)];
        assert_eq!(build_questionnaire(100, &far, &ips, 10.0).answers, vec![0]);
    }

    proptest! {
        #[test]
        fn index_matches_direct(
            raw in proptest::collection::vec((0.0f64..200.0, 1u8..=4, 0.0f64..1.0), 0..60),
            t in 0i64..200,
        ) {
            let fits: Vec<FitSummary> = raw.iter().map(|&(tc, g, m)| fit(tc, g, m)).collect();
            let ips: Vec<InformativeParam> = (1..=4u8)
                .map(|g| InformativeParam { id: 6 * g as u32 + 1, group: g, param: ParamKind::M, ks_distance: 0.1, good_region: vec![(0.2, 0.5)] })
                .collect();
            let direct = build_questionnaire(t, &fits, &ips, 10.0);
            let indexed = ScanIndex::new(fits).questionnaire(t, &ips, 10.0, None);
            prop_assert!(direct.answers.iter().all(|a| (-1..=1).contains(a)));
            prop_assert_eq!(direct, indexed);
        }
    }
}
