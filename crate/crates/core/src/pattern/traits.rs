//! Traits: one-, two- and three-position excerpts of a questionnaire.

use serde::{Deserialize, Serialize};

/// Positions are 1-based; `values` holds one answer per distinct position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trait {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub values: Vec<i8>,
}

impl Trait {
    pub fn single(p: usize, a: i8) -> Self {
        Self { p, q: p, r: p, values: vec![a] }
    }

    pub fn pair(p: usize, q: usize, a: i8, b: i8) -> Self {
        Self { p, q, r: q, values: vec![a, b] }
    }

    pub fn triple(p: usize, q: usize, r: usize, a: i8, b: i8, c: i8) -> Self {
        Self { p, q, r, values: vec![a, b, c] }
    }

    /// `P,Q,R` rendering used in reports, e.g. `0,1,-1`.
    pub fn values_string(&self) -> String {
        self.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// All traits of `answers`, ordered by `(p, q, r)`.
pub fn enumerate_traits(answers: &[i8]) -> Vec<Trait> {
    let l = answers.len();
    let mut out = Vec::with_capacity(l + choose2(l) + choose3(l));
    for p in 0..l {
        out.push(Trait::single(p + 1, answers[p]));
        for q in p + 1..l {
            out.push(Trait::pair(p + 1, q + 1, answers[p], answers[q]));
            for r in q + 1..l {
                out.push(Trait::triple(p + 1, q + 1, r + 1, answers[p], answers[q], answers[r]));
            }
        }
    }
    out
}

pub fn choose2(l: usize) -> usize {
    if l < 2 {
        0
    } else {
        l * (l - 1) / 2
    }
}

pub fn choose3(l: usize) -> usize {
    if l < 3 {
        0
    } else {
        l * (l - 1) * (l - 2) / 6
    }
}

fn code(a: i8) -> usize {
    (a + 1) as usize
}

fn decode(c: usize) -> i8 {
    c as i8 - 1
}

/// Dense indexing of every possible trait for questionnaires of length `l`.
///
/// Singles come first, then pairs, then triples; position sets are ranked in
/// the combinatorial number system and answer values in base 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitSpace {
    pub l: usize,
}

impl TraitSpace {
    pub fn new(l: usize) -> Self {
        Self { l }
    }

    /// `3L + 9·C(L,2) + 27·C(L,3)`.
    pub fn size(&self) -> usize {
        3 * self.l + 9 * choose2(self.l) + 27 * choose3(self.l)
    }

    /// Traits generated by one questionnaire.
    pub fn traits_per_questionnaire(&self) -> usize {
        self.l + choose2(self.l) + choose3(self.l)
    }

    fn pair_base(&self) -> usize {
        3 * self.l
    }

    fn triple_base(&self) -> usize {
        3 * self.l + 9 * choose2(self.l)
    }

    pub fn index(&self, t: &Trait) -> usize {
        let (p, q, r) = (t.p - 1, t.q - 1, t.r - 1);
        match t.values.len() {
            1 => 3 * p + code(t.values[0]),
            2 => {
                let rank = choose2(q) + p;
                self.pair_base() + 9 * rank + 3 * code(t.values[0]) + code(t.values[1])
            }
            _ => {
                let rank = choose3(r) + choose2(q) + p;
                self.triple_base()
                    + 27 * rank
                    + 9 * code(t.values[0])
                    + 3 * code(t.values[1])
                    + code(t.values[2])
            }
        }
    }

    pub fn trait_at(&self, idx: usize) -> Trait {
        if idx < self.pair_base() {
            return Trait::single(idx / 3 + 1, decode(idx % 3));
        }
        if idx < self.triple_base() {
            let k = idx - self.pair_base();
            let (rank, v) = (k / 9, k % 9);
            let mut q = 1;
            while choose2(q + 1) <= rank {
                q += 1;
            }
            let p = rank - choose2(q);
            return Trait::pair(p + 1, q + 1, decode(v / 3), decode(v % 3));
        }
        let k = idx - self.triple_base();
        let (rank, v) = (k / 27, k % 27);
        let mut r = 2;
        while choose3(r + 1) <= rank {
            r += 1;
        }
        let rest = rank - choose3(r);
        let mut q = 1;
        while choose2(q + 1) <= rest {
            q += 1;
        }
        let p = rest - choose2(q);
        Trait::triple(p + 1, q + 1, r + 1, decode(v / 9), decode(v / 3 % 3), decode(v % 3))
    }

    /// Dense indices of every trait of `answers`, in `(p, q, r)` order.
    pub fn indices(&self, answers: &[i8]) -> Vec<usize> {
        debug_assert_eq!(answers.len(), self.l);
        let l = self.l;
        let mut out = Vec::with_capacity(self.traits_per_questionnaire());
        for p in 0..l {
            let cp = code(answers[p]);
            out.push(3 * p + cp);
            for q in p + 1..l {
                let cq = code(answers[q]);
                out.push(self.pair_base() + 9 * (choose2(q) + p) + 3 * cp + cq);
                for r in q + 1..l {
                    let rank = choose3(r) + choose2(q) + p;
                    out.push(self.triple_base() + 27 * rank + 9 * cp + 3 * cq + code(answers[r]));
                }
            }
        }
        out
    }
}
