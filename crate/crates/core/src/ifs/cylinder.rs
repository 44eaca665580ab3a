//! Cylinder records and depth-n enumeration.
//!
//! A cylinder of order n is the image of [0,1] under the composition
//! `phi_w = phi_{w_1} o ... o phi_{w_n}`. The representative point of a
//! cylinder is the fixed point of `phi_w` (the periodic point of the word),
//! which lies in the closure of the cylinder and is exactly computable for
//! affine and digit branches.

use super::map::{ComposedMap, Mat2};
use super::word::Word;
use super::{BranchSpec, IfsSystem};
use crate::error::{Error, Result};
use serde::Serialize;

/// Everything the rest of the crate wants to know about one cylinder.
#[derive(Clone, Debug, Serialize)]
pub struct CylinderRecord {
    pub word: Word,
    /// Left endpoint of the cylinder interval.
    pub lo: f64,
    /// Right endpoint of the cylinder interval.
    pub hi: f64,
    pub diameter: f64,
    /// Derivative magnitude `D_w = |phi_w'(x*)|` at the representative.
    pub deriv: f64,
    /// `ln D_w`, kept separately because deep cylinders underflow slowly.
    pub log_deriv: f64,
    /// Representative point: the fixed point of `phi_w`.
    pub rep: f64,
}

/// Composition state plus the word that produced it.
#[derive(Clone, Copy)]
pub(crate) struct LeafCtx<'a> {
    pub word: &'a [u32],
    pub map: &'a ComposedMap,
}

impl LeafCtx<'_> {
    pub fn interval(&self, sys: &IfsSystem) -> (f64, f64) {
        match self.map {
            ComposedMap::Affine { a, c } => {
                let (e0, e1) = (*c, a + c);
                if e0 <= e1 {
                    (e0, e1)
                } else {
                    (e1, e0)
                }
            }
            ComposedMap::Moebius(m) => {
                let (e0, e1) = (m.apply(0.0), m.apply(1.0));
                if e0 <= e1 {
                    (e0, e1)
                } else {
                    (e1, e0)
                }
            }
            ComposedMap::General => {
                let e0 = sys.apply_word(self.word, 0.0);
                let e1 = sys.apply_word(self.word, 1.0);
                if e0 <= e1 {
                    (e0, e1)
                } else {
                    (e1, e0)
                }
            }
        }
    }

    pub fn diameter(&self, sys: &IfsSystem) -> f64 {
        match self.map {
            ComposedMap::Affine { a, .. } => a.abs(),
            ComposedMap::Moebius(m) => m.image_diameter(),
            ComposedMap::General => {
                let (lo, hi) = self.interval(sys);
                hi - lo
            }
        }
    }

    pub fn fixed_point(&self, sys: &IfsSystem) -> f64 {
        match self.map {
            ComposedMap::Affine { a, c } => c / (1.0 - a),
            ComposedMap::Moebius(m) => m.fixed_point(),
            ComposedMap::General => {
                let mut x = 0.5;
                for _ in 0..2000 {
                    let next = sys.apply_word(self.word, x);
                    if (next - x).abs() < 1e-16 {
                        return next;
                    }
                    x = next;
                }
                x
            }
        }
    }

    /// `ln |phi_w'(x*)|` — the log contraction of the word at its
    /// representative.
    pub fn log_deriv(&self, sys: &IfsSystem, xstar: f64) -> f64 {
        match self.map {
            ComposedMap::Affine { a, .. } => a.abs().ln(),
            ComposedMap::Moebius(m) => m.log_deriv_abs(xstar),
            ComposedMap::General => {
                let (_, d) = sys.apply_word_with_deriv(self.word, xstar);
                d.ln()
            }
        }
    }

    pub fn record(&self, sys: &IfsSystem) -> CylinderRecord {
        let (lo, hi) = self.interval(sys);
        let rep = self.fixed_point(sys);
        let log_deriv = self.log_deriv(sys, rep);
        CylinderRecord {
            word: Word::from(self.word),
            lo,
            hi,
            diameter: self.diameter(sys),
            deriv: log_deriv.exp(),
            log_deriv,
            rep,
        }
    }
}

pub(crate) fn extend_map(sys: &IfsSystem, map: &ComposedMap, symbol: u32) -> Result<ComposedMap> {
    match (map, sys.branch(symbol)) {
        (ComposedMap::Affine { a, c }, BranchSpec::Affine { slope, offset }) => {
            Ok(ComposedMap::Affine {
                a: a * slope,
                c: a * offset + c,
            })
        }
        (ComposedMap::Moebius(m), BranchSpec::Moebius { digit }) => {
            Ok(ComposedMap::Moebius(m.mul(&Mat2::digit(*digit))?))
        }
        (ComposedMap::General, _) => Ok(ComposedMap::General),
        _ => Err(Error::Invariant(
            "composition state does not match branch family".into(),
        )),
    }
}

pub(crate) fn map_of_word(sys: &IfsSystem, word: &[u32]) -> Result<ComposedMap> {
    let mut map = sys.identity_map();
    for &s in word {
        if s >= sys.alphabet_len() {
            return Err(Error::InvalidArgument(format!(
                "symbol {s} outside alphabet of size {}",
                sys.alphabet_len()
            )));
        }
        map = extend_map(sys, &map, s)?;
    }
    Ok(map)
}

/// Full record of the cylinder of a nonempty word.
pub fn cylinder_record(sys: &IfsSystem, word: &Word) -> Result<CylinderRecord> {
    if word.is_empty() {
        return Err(Error::InvalidArgument(
            "cylinder_record requires a nonempty word".into(),
        ));
    }
    let map = map_of_word(sys, word.symbols())?;
    let ctx = LeafCtx {
        word: word.symbols(),
        map: &map,
    };
    Ok(ctx.record(sys))
}

fn leaf_count(alphabet: u32, depth: u32, budget: u64) -> Result<u64> {
    let count = (alphabet as u128)
        .checked_pow(depth)
        .ok_or(Error::BudgetExceeded {
            needed: u128::MAX,
            budget,
        })?;
    if count > budget as u128 {
        return Err(Error::BudgetExceeded {
            needed: count,
            budget,
        });
    }
    Ok(count as u64)
}

/// Visits every depth-`depth` extension of `prefix` in lexicographic order.
///
/// The callback receives a borrowed word and composition state; nothing is
/// allocated per leaf, which keeps partition-sum passes cheap.
pub(crate) fn visit_leaves(
    sys: &IfsSystem,
    prefix: &[u32],
    depth: u32,
    budget: u64,
    f: &mut impl FnMut(LeafCtx<'_>),
) -> Result<()> {
    leaf_count(sys.alphabet_len(), depth, budget)?;
    let map = map_of_word(sys, prefix)?;
    let mut word = prefix.to_vec();
    descend(sys, &map, &mut word, depth, f)?;
    Ok(())
}

fn descend(
    sys: &IfsSystem,
    map: &ComposedMap,
    word: &mut Vec<u32>,
    remaining: u32,
    f: &mut impl FnMut(LeafCtx<'_>),
) -> Result<()> {
    if remaining == 0 {
        f(LeafCtx { word, map });
        return Ok(());
    }
    for s in 0..sys.alphabet_len() {
        let child = extend_map(sys, map, s)?;
        word.push(s);
        descend(sys, &child, word, remaining - 1, f)?;
        word.pop();
    }
    Ok(())
}

/// Lexicographic stream of all `|alphabet|^n` cylinders at depth `n`.
///
/// Fails up front (not mid-stream) when the leaf count exceeds `budget`.
pub fn enumerate_cylinders<'a>(
    sys: &'a IfsSystem,
    n: u32,
    budget: u64,
) -> Result<impl Iterator<Item = CylinderRecord> + 'a> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "enumeration depth must be at least 1".into(),
        ));
    }
    leaf_count(sys.alphabet_len(), n, budget)?;
    Ok(CylinderIter {
        sys,
        n,
        path: Vec::with_capacity(n as usize),
        done: false,
    })
}

struct CylinderIter<'a> {
    sys: &'a IfsSystem,
    n: u32,
    /// `(symbol, composed map of the whole prefix up to this level)`
    path: Vec<(u32, ComposedMap)>,
    done: bool,
}

impl CylinderIter<'_> {
    fn parent_map(&self) -> ComposedMap {
        match self.path.last() {
            Some((_, m)) => m.clone(),
            None => self.sys.identity_map(),
        }
    }

    fn advance(&mut self) {
        while let Some((s, _)) = self.path.pop() {
            if s + 1 < self.sys.alphabet_len() {
                let parent = self.parent_map();
                let map = extend_map(self.sys, &parent, s + 1).expect("validated symbol");
                self.path.push((s + 1, map));
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for CylinderIter<'_> {
    type Item = CylinderRecord;

    fn next(&mut self) -> Option<CylinderRecord> {
        if self.done {
            return None;
        }
        while self.path.len() < self.n as usize {
            let parent = self.parent_map();
            let map = extend_map(self.sys, &parent, 0).expect("validated symbol");
            self.path.push((0, map));
        }
        let word: Vec<u32> = self.path.iter().map(|(s, _)| *s).collect();
        let map = self.parent_map();
        let ctx = LeafCtx {
            word: &word,
            map: &map,
        };
        let rec = ctx.record(self.sys);
        self.advance();
        Some(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::build_system;

    #[test]
    fn badic_record_matches_hand_computation() {
        let sys = build_system("badic:b=2").unwrap();
        // phi_1 o phi_0 ([0,1]) = phi_1([0, 1/2]) = [1/2, 3/4]
        let rec = cylinder_record(&sys, &Word::from([1, 0])).unwrap();
        assert_eq!((rec.lo, rec.hi), (0.5, 0.75));
        assert_eq!(rec.diameter, 0.25);
        assert!((rec.rep - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rec.deriv, 0.25);
    }

    #[test]
    fn cantor_record() {
        let sys = build_system("cantor:b=3,digits=0|2").unwrap();
        let rec = cylinder_record(&sys, &Word::from([0, 1])).unwrap();
        assert!((rec.lo - 2.0 / 9.0).abs() < 1e-15);
        assert!((rec.hi - 3.0 / 9.0).abs() < 1e-15);
        assert!((rec.diameter - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn cf_single_digit_record() {
        let sys = build_system("cf:amax=2").unwrap();
        // digit 1 is symbol 0
        let rec = cylinder_record(&sys, &Word::from([0])).unwrap();
        assert_eq!((rec.lo, rec.hi), (0.5, 1.0));
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        assert!((rec.rep - golden).abs() < 1e-15);
        assert!((rec.deriv - (3.0 - 5.0f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let sys = build_system("badic:b=2").unwrap();
        let recs: Vec<_> = enumerate_cylinders(&sys, 3, 1000).unwrap().collect();
        assert_eq!(recs.len(), 8);
        for rec in &recs {
            assert_eq!(rec.diameter, 0.125);
        }
        let words: Vec<_> = recs.iter().map(|r| r.word.clone()).collect();
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(words, sorted);
        assert_eq!(words[0], Word::from([0, 0, 0]));
        assert_eq!(words[7], Word::from([1, 1, 1]));
    }

    #[test]
    fn cf_depth_two_intervals_compose_endpoints() {
        let sys = build_system("cf:amax=2").unwrap();
        let recs: Vec<_> = enumerate_cylinders(&sys, 2, 100).unwrap().collect();
        assert_eq!(recs.len(), 4);
        // word (2,2) in digits = symbols (1,1): [2/5, 3/7]
        let r22 = recs.iter().find(|r| r.word == Word::from([1, 1])).unwrap();
        assert!((r22.lo - 0.4).abs() < 1e-15);
        assert!((r22.hi - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn depth_zero_and_budget_are_rejected() {
        let sys = build_system("badic:b=2").unwrap();
        assert!(enumerate_cylinders(&sys, 0, 1000).is_err());
        match enumerate_cylinders(&sys, 20, 1000) {
            Err(Error::BudgetExceeded { needed, budget }) => {
                assert_eq!(needed, 1 << 20);
                assert_eq!(budget, 1000);
            }
            _ => panic!("expected budget refusal"),
        };
    }

    #[test]
    fn empty_word_record_rejected() {
        let sys = build_system("badic:b=2").unwrap();
        assert!(cylinder_record(&sys, &Word::empty()).is_err());
    }
}
