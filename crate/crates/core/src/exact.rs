//! Exact rational arithmetic for affine and digit-branch systems.
//!
//! Deep witness words make f64 endpoint arithmetic useless: the inverse
//! branch composition `T^n` cancels catastrophically near the cylinder.
//! Every strict inequality check (recurrence inequalities, return-depth
//! ties, separation gaps) therefore runs on `BigRational`. Branch
//! parameters are f64 values, which are themselves exact rationals, so
//! the checks are exact for the system as actually constructed.

use crate::error::{Error, Result};
use crate::ifs::{BranchSpec, IfsSystem, SystemKind, Word};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x} has no exact form")))
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    use num::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact composition of a word: either affine `a x + c` or an integer
/// fractional-linear map.
#[derive(Clone, Debug)]
pub enum ExactMap {
    Affine { a: BigRational, c: BigRational },
    Moebius { m: [BigInt; 4] },
}

impl ExactMap {
    pub fn apply(&self, x: &BigRational) -> BigRational {
        match self {
            ExactMap::Affine { a, c } => a * x + c,
            ExactMap::Moebius { m } => {
                let num = BigRational::from(m[0].clone()) * x + BigRational::from(m[1].clone());
                let den = BigRational::from(m[2].clone()) * x + BigRational::from(m[3].clone());
                num / den
            }
        }
    }

    /// Inverse map (the expanding `T^n` on this cylinder).
    pub fn apply_inverse(&self, y: &BigRational) -> BigRational {
        match self {
            ExactMap::Affine { a, c } => (y - c) / a,
            ExactMap::Moebius { m } => {
                // y = (p x + p')/(q x + q')  =>  x = (q' y - p')/(p - q y)
                let num = BigRational::from(m[3].clone()) * y - BigRational::from(m[1].clone());
                let den = BigRational::from(m[0].clone()) - BigRational::from(m[2].clone()) * y;
                num / den
            }
        }
    }

    /// Image of [0,1] as an ordered pair of rationals.
    pub fn endpoints(&self) -> (BigRational, BigRational) {
        let e0 = self.apply(&BigRational::zero());
        let e1 = self.apply(&BigRational::one());
        if e0 <= e1 {
            (e0, e1)
        } else {
            (e1, e0)
        }
    }

    pub fn diameter(&self) -> BigRational {
        let (lo, hi) = self.endpoints();
        hi - lo
    }

    /// Product of |slopes| for affine maps (equals the diameter).
    pub fn affine_slope_abs(&self) -> Option<BigRational> {
        match self {
            ExactMap::Affine { a, .. } => Some(a.abs()),
            ExactMap::Moebius { .. } => None,
        }
    }
}

fn exact_branch(branch: &BranchSpec) -> Result<ExactMap> {
    match branch {
        BranchSpec::Affine { slope, offset } => Ok(ExactMap::Affine {
            a: rational_from_f64(*slope)?,
            c: rational_from_f64(*offset)?,
        }),
        BranchSpec::Moebius { digit } => Ok(ExactMap::Moebius {
            m: [
                BigInt::zero(),
                BigInt::one(),
                BigInt::one(),
                BigInt::from(*digit),
            ],
        }),
        BranchSpec::Callback { .. } => Err(Error::InvalidArgument(
            "callback branches have no exact form".into(),
        )),
    }
}

/// Exact composition of `word`, left to right.
pub fn exact_map(sys: &IfsSystem, word: &[u32]) -> Result<ExactMap> {
    if sys.kind() == SystemKind::General {
        return Err(Error::InvalidArgument(
            "exact arithmetic unavailable for callback systems".into(),
        ));
    }
    let mut acc: Option<ExactMap> = None;
    for &s in word {
        let b = exact_branch(sys.branch(s))?;
        acc = Some(match acc {
            None => b,
            Some(m) => compose(m, b),
        });
    }
    acc.ok_or_else(|| Error::InvalidArgument("exact map of the empty word".into()))
}

fn compose(outer: ExactMap, inner: ExactMap) -> ExactMap {
    match (outer, inner) {
        (ExactMap::Affine { a: a1, c: c1 }, ExactMap::Affine { a: a2, c: c2 }) => {
            ExactMap::Affine {
                a: &a1 * a2,
                c: a1 * c2 + c1,
            }
        }
        (ExactMap::Moebius { m: x }, ExactMap::Moebius { m: y }) => ExactMap::Moebius {
            m: [
                &x[0] * &y[0] + &x[1] * &y[2],
                &x[0] * &y[1] + &x[1] * &y[3],
                &x[2] * &y[0] + &x[3] * &y[2],
                &x[2] * &y[1] + &x[3] * &y[3],
            ],
        },
        _ => unreachable!("mixed exact branch families are rejected at construction"),
    }
}

/// Exact diameter of the cylinder of `word` (image of [0,1]).
pub fn exact_diameter(sys: &IfsSystem, word: &Word) -> Result<BigRational> {
    Ok(exact_map(sys, word.symbols())?.diameter())
}

/// Distance between two closed intervals; zero when they touch or overlap.
pub fn interval_gap(a: &(BigRational, BigRational), b: &(BigRational, BigRational)) -> BigRational {
    if a.1 < b.0 {
        &b.0 - &a.1
    } else if b.1 < a.0 {
        &a.0 - &b.1
    } else {
        BigRational::zero()
    }
}
