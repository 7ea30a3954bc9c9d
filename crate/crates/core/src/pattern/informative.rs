//! Informative parameters: (group, parameter) pairs whose class-conditional
//! distributions differ, together with their Class I "good region".

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classes::{assign_class, assign_group, ClassLabel, GROUP_COUNT};
use super::kde::{common_grid, ks_distance, AdaptiveKde};
use crate::error::PatternError;
use crate::lppl::LpplFit;
use crate::optimizer::SearchBounds;
use crate::rebound::ReboundSet;

/// Default sup-norm CDF distance above which a parameter is informative.
pub const KS_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamKind {
    M,
    Omega,
    Phi,
    B,
    HazardB,
    Q,
}

impl ParamKind {
    pub const ALL: [ParamKind; 6] =
        [ParamKind::M, ParamKind::Omega, ParamKind::Phi, ParamKind::B, ParamKind::HazardB, ParamKind::Q];

    /// Index `j` in `1..=6`.
    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::M => "m",
            ParamKind::Omega => "omega",
            ParamKind::Phi => "phi",
            ParamKind::B => "B",
            ParamKind::HazardB => "b",
            ParamKind::Q => "q",
        }
    }

    pub fn value(self, fit: &LpplFit) -> f64 {
        match self {
            ParamKind::M => fit.params.m,
            ParamKind::Omega => fit.params.omega,
            ParamKind::Phi => fit.params.phi,
            ParamKind::B => fit.params.b,
            ParamKind::HazardB => fit.b,
            ParamKind::Q => fit.residual_q,
        }
    }

    /// A-priori range, if the parameter has one.
    pub fn bounds(self) -> Option<(f64, f64)> {
        let b = SearchBounds::for_window(0.0, 1.0);
        match self {
            ParamKind::M => Some(b.m),
            ParamKind::Omega => Some(b.omega),
            ParamKind::Phi => Some(b.phi),
            _ => None,
        }
    }
}

/// What the questionnaire needs to know about one fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub tc: f64,
    pub t2: i64,
    pub group: u8,
    pub values: [f64; 6],
}

impl FitSummary {
    pub fn from_fit(fit: &LpplFit) -> Result<Self, PatternError> {
        Ok(Self {
            tc: fit.params.tc,
            t2: crate::data::day_number(fit.window.t2),
            group: assign_group(fit)?,
            values: ParamKind::ALL.map(|k| k.value(fit)),
        })
    }

    pub fn value(&self, kind: ParamKind) -> f64 {
        self.values[kind.index() as usize - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativeParam {
    /// `6·group + j`.
    pub id: u32,
    pub group: u8,
    pub param: ParamKind,
    pub ks_distance: f64,
    /// Disjoint closed intervals, ascending.
    pub good_region: Vec<(f64, f64)>,
}

impl InformativeParam {
    pub fn in_good_region(&self, x: f64) -> bool {
        self.good_region.iter().any(|&(lo, hi)| x >= lo && x <= hi)
    }
}

/// Grid runs where `pdf_i > pdf_ii`, widened by half a grid step and
/// clipped to `allowed`.
pub fn good_region(kde_i: &AdaptiveKde, kde_ii: &AdaptiveKde, grid: &[f64], allowed: (f64, f64)) -> Vec<(f64, f64)> {
    let half = if grid.len() > 1 { 0.5 * (grid[1] - grid[0]) } else { 0.0 };
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = 0.0;
    for &x in grid {
        if kde_i.pdf(x) > kde_ii.pdf(x) {
            start.get_or_insert(x);
            last = x;
        } else if let Some(s) = start.take() {
            out.push((s - half, last + half));
        }
    }
    if let Some(s) = start {
        out.push((s - half, last + half));
    }
    out.into_iter()
        .map(|(lo, hi)| (lo.max(allowed.0), hi.min(allowed.1)))
        .filter(|(lo, hi)| lo <= hi)
        .collect()
}

/// Compares one parameter's class-conditional samples; `None` when either
/// class has fewer than two samples or the distance is within `threshold`.
pub fn compare_samples(
    class_i: &[f64],
    class_ii: &[f64],
    allowed: (f64, f64),
    threshold: f64,
) -> Option<(f64, Vec<(f64, f64)>)> {
    let a = AdaptiveKde::fit(class_i).ok()?;
    let b = AdaptiveKde::fit(class_ii).ok()?;
    let grid = common_grid(&a, &b);
    let ks = ks_distance(&a, &b, &grid);
    if ks > threshold {
        Some((ks, good_region(&a, &b, &grid, allowed)))
    } else {
        None
    }
}

/// Scans every (group, parameter) pair of the learning fits.
pub fn find_informative_params(
    learning_fits: &[LpplFit],
    rebounds: &ReboundSet,
    near_days: f64,
    threshold: f64,
) -> Result<Vec<InformativeParam>, PatternError> {
    let mut by_cell: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; GROUP_COUNT as usize * 6];
    let mut any_class_i = false;
    for fit in learning_fits {
        let group = assign_group(fit)?;
        let class = assign_class(fit, rebounds, near_days);
        any_class_i |= class == ClassLabel::ClassI;
        for kind in ParamKind::ALL {
            let cell = (group as usize - 1) * 6 + kind.index() as usize - 1;
            by_cell[cell][(class == ClassLabel::ClassII) as usize].push(kind.value(fit));
        }
    }
    if !any_class_i {
        return Err(PatternError::NoClassI);
    }
    let found: Vec<Option<InformativeParam>> = by_cell
        .par_iter()
        .enumerate()
        .map(|(cell, [si, sii])| {
            let group = (cell / 6 + 1) as u8;
            let param = ParamKind::ALL[cell % 6];
            let allowed = param.bounds().unwrap_or_else(|| {
                let lo = si.iter().chain(sii).cloned().fold(f64::INFINITY, f64::min);
                let hi = si.iter().chain(sii).cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            });
            compare_samples(si, sii, allowed, threshold).map(|(ks, region)| InformativeParam {
                id: 6 * group as u32 + param.index() as u32,
                group,
                param,
                ks_distance: ks,
                good_region: region,
            })
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// CSV `id,group,param,ks_distance,good_region` with intervals as `lo:hi`
/// joined by `|`.
pub fn write_informative_csv<W: Write>(ips: &[InformativeParam], mut w: W) -> std::io::Result<()> {
    writeln!(w, "id,group,param,ks_distance,good_region")?;
    for ip in ips {
        let region: Vec<String> = ip.good_region.iter().map(|(lo, hi)| format!("{lo:.6e}:{hi:.6e}")).collect();
        writeln!(w, "{},{},{},{:.6},{}", ip.id, ip.group, ip.param.name(), ip.ks_distance, region.join("|"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_samples_are_not_informative() {
        let s: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        assert!(compare_samples(&s, &s, (-1.0, 1.0), KS_THRESHOLD).is_none());
    }

    #[test]
    fn disjoint_uniforms_are_informative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..0.5)).collect();
        let b: Vec<f64> = (0..500).map(|_| rng.gen_range(0.5..1.0)).collect();
        let (ks, region) = compare_samples(&a, &b, (0.0, 1.0), KS_THRESHOLD).unwrap();
        assert!(ks > 0.9);
        assert_eq!(region.len(), 1);
        let (lo, hi) = region[0];
        assert_eq!(lo, 0.0);
        assert!((hi - 0.5).abs() < 0.01, "{hi}");
    }

    #[test]
    fn ids_follow_group_and_index() {
        assert_eq!(ParamKind::M.index(), 1);
        assert_eq!(ParamKind::Q.index(), 6);
        let ip = InformativeParam { id: 6 * 3 + 1, group: 3, param: ParamKind::M, ks_distance: 0.1, good_region: vec![(0.2, 0.4)] };
        assert_eq!(ip.id, 19);
        assert!(ip.in_good_region(0.2) && ip.in_good_region(0.4) && !ip.in_good_region(0.41));
    }
}
