//! Pattern recognition over calibrated windows: classes, groups,
//! informative parameters, questionnaires, traits, features and the alarm
//! index.

pub mod alarm;
pub mod classes;
pub mod features;
pub mod informative;
pub mod kde;
pub mod questionnaire;
pub mod traits;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use alarm::{learning_series, predict_series, AlarmMode, AlarmSeries, LeakageAudit};
pub use classes::{assign_class, assign_group, group_for_length, ClassLabel, NEAR_DAYS};
pub use features::{alarm_index, extract_features, FeatureSet, Qualification, TraitCounts};
pub use informative::{find_informative_params, FitSummary, InformativeParam, ParamKind, KS_THRESHOLD};
pub use questionnaire::{build_questionnaire, Questionnaire, ScanIndex};
pub use traits::{enumerate_traits, Trait, TraitSpace};

use crate::data::day_number;
use crate::error::PatternError;
use crate::lppl::LpplFit;
use crate::rebound::{is_near, ReboundSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub cutoff: NaiveDate,
    pub near_days: f64,
    pub ks_threshold: f64,
    pub qualifications: Vec<Qualification>,
    /// Drop fits with ω above this value before learning.
    pub omega_max: Option<f64>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            cutoff: NaiveDate::from_ymd_opt(1975, 1, 1).unwrap(),
            near_days: NEAR_DAYS,
            ks_threshold: KS_THRESHOLD,
            qualifications: vec![Qualification { alpha: 10, beta: 200 }],
            omega_max: None,
        }
    }
}

/// Fits whose window end and critical time both precede `cutoff`.
pub fn learning_subset(fits: &[LpplFit], cfg: &LearnConfig) -> Vec<LpplFit> {
    let c = day_number(cfg.cutoff);
    fits.iter()
        .filter(|f| f.params.tc < c as f64 && day_number(f.window.t2) < c)
        .filter(|f| cfg.omega_max.is_none_or(|w| !f.exceeds_omega(w)))
        .copied()
        .collect()
}

/// Everything the prediction stage needs from the learning period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub cutoff: NaiveDate,
    pub near_days: f64,
    pub learning_fits: usize,
    pub class_i_fits: usize,
    pub first_scan_day: i64,
    pub informative: Vec<InformativeParam>,
    pub feature_sets: Vec<FeatureSet>,
}

impl LearnedModel {
    pub fn space(&self) -> TraitSpace {
        TraitSpace::new(self.informative.len())
    }
}

/// Trait counts from every day in `[first_day, last_day]`, split by
/// proximity of the day to a rebound.
pub fn count_traits(
    index: &ScanIndex,
    ips: &[InformativeParam],
    rebounds: &ReboundSet,
    near_days: f64,
    first_day: i64,
    last_day: i64,
) -> TraitCounts {
    let space = TraitSpace::new(ips.len());
    let days: Vec<i64> = (first_day..=last_day).collect();
    let chunk = days.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
    days.par_chunks(chunk)
        .map(|chunk| {
            let mut c = TraitCounts::new(space);
            for &t in chunk {
                let q = index.questionnaire(t, ips, near_days, None);
                let class = if is_near(t as f64, rebounds, near_days) { ClassLabel::ClassI } else { ClassLabel::ClassII };
                c.add(&q.answers, class);
            }
            c
        })
        .reduce(
            || TraitCounts::new(space),
            |mut a, b| {
                a.merge(&b);
                a
            },
        )
}

/// Learns informative parameters and one feature set per qualification from
/// fits and rebounds that precede the cutoff.
pub fn learn(fits: &[LpplFit], rebounds: &ReboundSet, cfg: &LearnConfig) -> Result<LearnedModel, PatternError> {
    let learning = learning_subset(fits, cfg);
    let rebounds = rebounds.before(cfg.cutoff);
    let class_i_fits = learning
        .iter()
        .filter(|f| assign_class(f, &rebounds, cfg.near_days) == ClassLabel::ClassI)
        .count();
    if class_i_fits == 0 {
        return Err(PatternError::NoClassI);
    }
    let informative = find_informative_params(&learning, &rebounds, cfg.near_days, cfg.ks_threshold)?;
    let summaries = learning.iter().map(FitSummary::from_fit).collect::<Result<Vec<_>, _>>()?;
    let index = ScanIndex::new(summaries);
    let first_scan_day = index.min_tc().map_or(day_number(cfg.cutoff), |t| t.floor() as i64);
    let counts = count_traits(&index, &informative, &rebounds, cfg.near_days, first_scan_day, day_number(cfg.cutoff) - 1);
    let feature_sets = cfg.qualifications.iter().map(|&q| extract_features(&counts, q)).collect();
    Ok(LearnedModel {
        cutoff: cfg.cutoff,
        near_days: cfg.near_days,
        learning_fits: learning.len(),
        class_i_fits,
        first_scan_day,
        informative,
        feature_sets,
    })
}
