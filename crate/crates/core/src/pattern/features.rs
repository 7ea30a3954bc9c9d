//! Trait frequency bags, feature extraction and the rebound alarm index.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::classes::ClassLabel;
use super::questionnaire::Questionnaire;
use super::traits::TraitSpace;

/// Per-trait occurrence counts over learning days, densely indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitCounts {
    pub space: TraitSpace,
    pub count_i: Vec<u32>,
    pub count_ii: Vec<u32>,
}

impl TraitCounts {
    pub fn new(space: TraitSpace) -> Self {
        Self { space, count_i: vec![0; space.size()], count_ii: vec![0; space.size()] }
    }

    /// Adds every trait of one questionnaire once.
    pub fn add(&mut self, answers: &[i8], class: ClassLabel) {
        let bag = match class {
            ClassLabel::ClassI => &mut self.count_i,
            ClassLabel::ClassII => &mut self.count_ii,
        };
        for idx in self.space.indices(answers) {
            bag[idx] += 1;
        }
    }

    pub fn merge(&mut self, other: &TraitCounts) {
        for (a, b) in self.count_i.iter_mut().zip(&other.count_i) {
            *a += b;
        }
        for (a, b) in self.count_ii.iter_mut().zip(&other.count_ii) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Qualification {
    pub alpha: u32,
    pub beta: u32,
}

/// One feature with the counts that qualified it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub index: usize,
    pub count_i: u32,
    pub count_ii: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub space: TraitSpace,
    pub qualification: Qualification,
    /// Sorted by trait index.
    pub class_i: Vec<Feature>,
    pub class_ii: Vec<Feature>,
}

/// Class I: seen more than `alpha` times in class I and fewer than `beta`
/// times in class II. Class II: at most `alpha` times in class I and at
/// least `beta` times in class II. Traits matching neither stay unlabeled.
pub fn extract_features(counts: &TraitCounts, q: Qualification) -> FeatureSet {
    let mut class_i = Vec::new();
    let mut class_ii = Vec::new();
    for (index, (&ci, &cii)) in counts.count_i.iter().zip(&counts.count_ii).enumerate() {
        let f = Feature { index, count_i: ci, count_ii: cii };
        if ci > q.alpha && cii < q.beta {
            class_i.push(f);
        } else if ci <= q.alpha && cii >= q.beta {
            class_ii.push(f);
        }
    }
    FeatureSet { space: counts.space, qualification: q, class_i, class_ii }
}

impl FeatureSet {
    pub fn empty(space: TraitSpace, qualification: Qualification) -> Self {
        Self { space, qualification, class_i: Vec::new(), class_ii: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.class_i.is_empty() && self.class_ii.is_empty()
    }

    pub fn lookup(&self) -> FeatureLookup {
        let mut label = vec![0i8; self.space.size()];
        for f in &self.class_i {
            label[f.index] = 1;
        }
        for f in &self.class_ii {
            label[f.index] = -1;
        }
        FeatureLookup { space: self.space, label }
    }

    /// CSV `class,p,q,r,values,count_i,count_ii`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "class,p,q,r,values,count_i,count_ii")?;
        for (name, set) in [("I", &self.class_i), ("II", &self.class_ii)] {
            for f in set {
                let t = self.space.trait_at(f.index);
                writeln!(w, "{name},{},{},{},\"{}\",{},{}", t.p, t.q, t.r, t.values_string(), f.count_i, f.count_ii)?;
            }
        }
        Ok(())
    }
}

/// Dense trait-to-class table for fast scoring.
#[derive(Debug, Clone)]
pub struct FeatureLookup {
    space: TraitSpace,
    label: Vec<i8>,
}

impl FeatureLookup {
    /// `(ν_I, ν_II)` for one questionnaire.
    pub fn matches(&self, answers: &[i8]) -> (usize, usize) {
        let (mut ni, mut nii) = (0, 0);
        for idx in self.space.indices(answers) {
            match self.label[idx] {
                1 => ni += 1,
                -1 => nii += 1,
                _ => {}
            }
        }
        (ni, nii)
    }

    pub fn index(&self, answers: &[i8]) -> f64 {
        let (ni, nii) = self.matches(answers);
        ratio(ni, nii)
    }
}

/// `ν_I / (ν_I + ν_II)`, and 0 when neither class matches.
pub fn ratio(nu_i: usize, nu_ii: usize) -> f64 {
    if nu_i + nu_ii == 0 {
        0.0
    } else {
        nu_i as f64 / (nu_i + nu_ii) as f64
    }
}

pub fn alarm_index(features: &FeatureSet, q: &Questionnaire) -> f64 {
    let find = |set: &[Feature], idx: usize| set.binary_search_by_key(&idx, |f| f.index).is_ok();
    let (mut ni, mut nii) = (0, 0);
    for idx in features.space.indices(&q.answers) {
        if find(&features.class_i, idx) {
            ni += 1;
        } else if find(&features.class_ii, idx) {
            nii += 1;
        }
    }
    ratio(ni, nii)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts_with(ci: u32, cii: u32) -> TraitCounts {
        let mut c = TraitCounts::new(TraitSpace::new(1));
        c.count_i[2] = ci;
        c.count_ii[2] = cii;
        c
    }

    #[test]
    fn qualification_boundaries() {
        let q = Qualification { alpha: 10, beta: 200 };
        let f = extract_features(&counts_with(11, 199), q);
        assert_eq!(f.class_i.len(), 1);
        assert!(f.class_ii.iter().all(|x| x.index != 2));
        let f = extract_features(&counts_with(10, 200), q);
        assert!(f.class_i.is_empty());
        assert_eq!(f.class_ii.iter().filter(|x| x.index == 2).count(), 1);
        let f = extract_features(&counts_with(0, 0), q);
        assert!(f.is_empty());
    }

    #[test]
    fn ratio_cases() {
        assert_eq!(ratio(0, 0), 0.0);
        assert_eq!(ratio(3, 1), 0.75);
        assert_eq!(ratio(5, 0), 1.0);
    }

    #[test]
    fn all_traits_in_class_i() {
        let space = TraitSpace::new(3);
        let answers = vec![1, 0, -1];
        let mut c = TraitCounts::new(space);
        for _ in 0..20 {
            c.add(&answers, ClassLabel::ClassI);
        }
        let f = extract_features(&c, Qualification { alpha: 10, beta: 200 });
        let q = Questionnaire { t_scan: 0, answers };
        assert_eq!(alarm_index(&f, &q), 1.0);
        assert_eq!(f.lookup().index(&q.answers), 1.0);
        let empty = FeatureSet::empty(space, f.qualification);
        assert_eq!(alarm_index(&empty, &q), 0.0);
    }

    proptest! {
        #[test]
        fn classes_are_disjoint_and_index_bounded(
            ci in proptest::collection::vec(0u32..30, 12),
            cii in proptest::collection::vec(0u32..300, 12),
            alpha in 0u32..30,
            beta in 0u32..300,
            answers in proptest::collection::vec(-1i8..=1, 2),
        ) {
            let space = TraitSpace::new(2);
            prop_assume!(space.size() == 15);
            let mut c = TraitCounts::new(space);
            c.count_i[..12].copy_from_slice(&ci);
            c.count_ii[..12].copy_from_slice(&cii);
            let f = extract_features(&c, Qualification { alpha, beta });
            for a in &f.class_i {
                prop_assert!(f.class_ii.iter().all(|b| b.index != a.index));
            }
            let q = Questionnaire { t_scan: 0, answers };
            let ri = alarm_index(&f, &q);
            prop_assert!((0.0..=1.0).contains(&ri));
            prop_assert_eq!(ri, f.lookup().index(&q.answers));
        }
    }
}
