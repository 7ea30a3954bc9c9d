//! Class labels (proximity of t_c to a rebound) and window-length groups.

use serde::{Deserialize, Serialize};

use crate::error::PatternError;
use crate::lppl::LpplFit;
use crate::rebound::{is_near, ReboundSet};

/// Number of window-length groups.
pub const GROUP_COUNT: u8 = 14;

/// Default proximity, in days, between t_c and a rebound.
pub const NEAR_DAYS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    ClassI,
    ClassII,
}

pub fn assign_class(fit: &LpplFit, rebounds: &ReboundSet, d: f64) -> ClassLabel {
    if is_near(fit.params.tc, rebounds, d) {
        ClassLabel::ClassI
    } else {
        ClassLabel::ClassII
    }
}

/// Group index in `1..=14` for a window length in days. A length on a
/// multiple of 100 belongs to the lower bin.
pub fn group_for_length(length: i64) -> Result<u8, PatternError> {
    if !(100..=1500).contains(&length) {
        return Err(PatternError::LengthOutOfRange(length));
    }
    let i = (length - 1) / 100;
    Ok(i.clamp(1, GROUP_COUNT as i64) as u8)
}

pub fn assign_group(fit: &LpplFit) -> Result<u8, PatternError> {
    group_for_length(fit.length_days())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{date_from_day, day_number, WindowSpec};
    use crate::lppl::LpplParams;
    use crate::rebound::ReboundRule;
    use chrono::NaiveDate;

    fn fit_with(tc: f64, len: i64) -> LpplFit {
        let t2 = NaiveDate::from_ymd_opt(1970, 6, 1).unwrap();
        let w = WindowSpec { t1: t2 - chrono::Duration::days(len), t2 };
        let p = LpplParams { a: 0.0, b: 1.0, c: 0.1, m: 0.5, omega: 6.0, phi: 1.0, tc };
        LpplFit::new(w, p, 0.01)
    }

    #[test]
    fn groups() {
        assert_eq!(group_for_length(100), Ok(1));
        assert_eq!(group_for_length(110), Ok(1));
        assert_eq!(group_for_length(200), Ok(1));
        assert_eq!(group_for_length(201), Ok(2));
        assert_eq!(group_for_length(1400), Ok(13));
        assert_eq!(group_for_length(1401), Ok(14));
        assert_eq!(group_for_length(1500), Ok(14));
        assert_eq!(group_for_length(99), Err(PatternError::LengthOutOfRange(99)));
        assert_eq!(group_for_length(1501), Err(PatternError::LengthOutOfRange(1501)));
        assert_eq!(assign_group(&fit_with(0.0, 1250)), Ok(12));
    }

    #[test]
    fn every_length_has_exactly_one_group() {
        for len in 100..=1500 {
            let g = group_for_length(len).unwrap() as i64;
            let holders = (1..=14i64)
                .filter(|&i| {
                    let lo = if i == 1 { 100 } else { 100 * i + 1 };
                    (lo..=100 * i + 100).contains(&len)
                })
                .count();
            assert_eq!(holders, 1);
            assert!(len >= 100 * g && len <= 100 * g + 100);
        }
    }

    #[test]
    fn classes() {
        let r = NaiveDate::from_ymd_opt(1970, 5, 26).unwrap();
        let set = ReboundSet { dates: vec![r], rule: ReboundRule::default() };
        let t = day_number(r) as f64;
        assert_eq!(assign_class(&fit_with(t, 300), &set, NEAR_DAYS), ClassLabel::ClassI);
        assert_eq!(assign_class(&fit_with(t + 30.0, 300), &set, NEAR_DAYS), ClassLabel::ClassII);
        assert_eq!(date_from_day(day_number(r)), r);
    }
}
