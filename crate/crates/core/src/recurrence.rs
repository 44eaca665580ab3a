//! Recurrence targets J_n(w) = { x in I_n(w) : |T^n x - x| < r } with
//! r = exp(-S_n f([w])), their guaranteed witness sub-cylinders, and the
//! covering series that drives the upper dimension bound.
//!
//! The witness construction: extend `w` by the first `t` symbols of its
//! own periodic continuation, where `t` is minimal with
//! `|I_t(w^inf)| < r`. Every point of the extended cylinder returns
//! within `r` of itself after `n` steps, and the extended cylinder keeps
//! a definite fraction of the mass scale: its diameter is at least
//! `K^{-1} eta r |I_n(w)|`.

use crate::error::{Error, Result};
use crate::exact::{exact_map, rational_from_f64, rational_to_f64, ExactMap};
use crate::ifs::{cylinder_record, CylinderRecord, IfsSystem, SystemKind, Word};
use crate::numeric::bisect_decreasing;
use crate::potential::{birkhoff_sum, Potential};
use crate::thermo::{PartitionSum, ThermoOptions};
use num::rational::BigRational;
use num::Signed;
use serde::Serialize;

/// Safety cap on return depths; hitting it means the radius underflowed.
const MAX_RETURN_DEPTH: u32 = 100_000;

/// Minimal `t >= 1` with `|I_t(w^inf)| < r <= |I_{t-1}(w^inf)|`.
///
/// The comparison is exact for affine and digit systems, so a radius
/// that ties a cylinder diameter exactly resolves to the larger `t`
/// (the strict inequality side).
pub fn return_depth(sys: &IfsSystem, word: &Word, r: f64) -> Result<u32> {
    if word.is_empty() {
        return Err(Error::InvalidArgument(
            "return_depth requires a nonempty word".into(),
        ));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must satisfy 0 < r <= 1, got {r}"
        )));
    }
    match sys.kind() {
        SystemKind::General => {
            let mut t = 1u32;
            loop {
                let prefix = word.periodic_prefix(t as usize);
                let rec = cylinder_record(sys, &prefix)?;
                if rec.diameter < r {
                    return Ok(t);
                }
                t += 1;
                if t > MAX_RETURN_DEPTH {
                    return Err(Error::InvalidArgument(format!(
                        "no return depth below {MAX_RETURN_DEPTH}; radius {r} too small"
                    )));
                }
            }
        }
        _ => {
            let r_exact = rational_from_f64(r)?;
            let symbols = word.symbols();
            let mut map: Option<ExactMap> = None;
            let mut t = 0u32;
            loop {
                let s = symbols[t as usize % symbols.len()];
                let step = exact_map(sys, &[s])?;
                map = Some(match map {
                    None => step,
                    Some(m) => compose_exact(m, step),
                });
                t += 1;
                if map.as_ref().unwrap().diameter() < r_exact {
                    return Ok(t);
                }
                if t > MAX_RETURN_DEPTH {
                    return Err(Error::InvalidArgument(format!(
                        "no return depth below {MAX_RETURN_DEPTH}; radius {r} too small"
                    )));
                }
            }
        }
    }
}

fn compose_exact(outer: ExactMap, inner: ExactMap) -> ExactMap {
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
        _ => unreachable!("mixed exact families"),
    }
}

/// A verified recurrence witness: the cylinder `I_{n+t}(w w*)` sits
/// inside `J_n(w)`.
#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceWitness {
    pub word: Word,
    /// Recurrence radius `exp(-S_n f([w]))`.
    pub radius: f64,
    pub return_depth: u32,
    /// First `return_depth` symbols of `w^inf`.
    pub suffix: Word,
    pub base: CylinderRecord,
    pub witness: CylinderRecord,
    /// Guaranteed diameter floor `K^{-1} eta r |I_n(w)|`.
    pub diameter_floor: f64,
}

/// Builds the witness cylinder for `word` under `pot` and verifies the
/// recurrence inequality at the witness interval's endpoints and
/// midpoint. Verification failure is an internal error: the construction
/// guarantees the inequality, so a failure means a bug.
pub fn witness_cylinder(
    sys: &IfsSystem,
    pot: &Potential,
    word: &Word,
) -> Result<RecurrenceWitness> {
    if word.is_empty() {
        return Err(Error::InvalidArgument(
            "witness_cylinder requires a nonempty word".into(),
        ));
    }
    let n = word.len();
    let radius = (-birkhoff_sum(sys, pot, word)?).exp();
    let t = return_depth(sys, word, radius)?;
    let suffix = word.periodic_prefix(t as usize);
    let witness_word = word.concat(&suffix);
    let base = cylinder_record(sys, word)?;
    let witness = cylinder_record(sys, &witness_word)?;
    let diameter_floor = radius * base.diameter * sys.eta() / sys.distortion();

    verify_recurrence(sys, word, &witness, radius)?;
    if witness.diameter < diameter_floor * (1.0 - 1e-9) {
        return Err(Error::Invariant(format!(
            "witness diameter {} below floor {} for word {} (length {n})",
            witness.diameter, diameter_floor, word
        )));
    }
    Ok(RecurrenceWitness {
        word: word.clone(),
        radius,
        return_depth: t,
        suffix,
        base,
        witness,
        diameter_floor,
    })
}

/// Checks `|T^n x - x| < r` at the endpoints and midpoint of the witness
/// interval; exact rational arithmetic where the system supports it.
fn verify_recurrence(
    sys: &IfsSystem,
    word: &Word,
    witness: &CylinderRecord,
    radius: f64,
) -> Result<()> {
    match sys.kind() {
        SystemKind::General => {
            let tn = |x: f64| {
                let mut y = x;
                for &s in word.symbols() {
                    y = sys.branch(s).invert(y);
                }
                y
            };
            for x in [witness.lo, 0.5 * (witness.lo + witness.hi), witness.hi] {
                let gap = (tn(x) - x).abs();
                if gap >= radius + 1e-9 {
                    return Err(Error::Invariant(format!(
                        "recurrence inequality failed at {x}: |T^n x - x| = {gap} >= {radius}"
                    )));
                }
            }
            Ok(())
        }
        _ => {
            let base_map = exact_map(sys, word.symbols())?;
            let wit_map = exact_map(sys, witness.word.symbols())?;
            let (lo, hi) = wit_map.endpoints();
            let mid = (&lo + &hi) / BigRational::from_integer(2.into());
            let r_exact = rational_from_f64(radius)?;
            for x in [lo, mid, hi] {
                let image = base_map.apply_inverse(&x);
                let gap = (image - &x).abs();
                if gap >= r_exact {
                    return Err(Error::Invariant(format!(
                        "recurrence inequality failed exactly at {} (gap {})",
                        rational_to_f64(&x),
                        rational_to_f64(&gap)
                    )));
                }
            }
            Ok(())
        }
    }
}

/// The target `J_n(w)` solved in closed form for affine systems:
/// `T^n` on `I_n(w)` is affine, so the inequality is linear. Returns the
/// interval clipped to the cylinder, or `None` when it is empty.
pub fn jn_exact_interval(
    sys: &IfsSystem,
    pot: &Potential,
    word: &Word,
) -> Result<Option<(f64, f64)>> {
    if sys.kind() != SystemKind::Affine {
        return Err(Error::InvalidArgument(
            "exact recurrence targets need an all-affine system".into(),
        ));
    }
    if word.is_empty() {
        return Err(Error::InvalidArgument("empty word".into()));
    }
    let rec = cylinder_record(sys, word)?;
    let radius = (-birkhoff_sum(sys, pot, word)?).exp();
    if radius <= 0.0 {
        return Ok(None);
    }
    // phi_w(x) = A x + C with |A| < 1; T^n y - y = ((1-A) y - C)/A, so the
    // target is |y - x*| < r |A| / (1 - A), centered at the fixed point.
    let a = rec.deriv * slope_sign(sys, word);
    let delta = radius * a.abs() / (1.0 - a);
    let lo = (rec.rep - delta).max(rec.lo);
    let hi = (rec.rep + delta).min(rec.hi);
    if hi <= lo {
        return Ok(None);
    }
    Ok(Some((lo, hi)))
}

fn slope_sign(sys: &IfsSystem, word: &Word) -> f64 {
    let mut sign = 1.0f64;
    for &s in word.symbols() {
        if !sys.branch(s).is_increasing() {
            sign = -sign;
        }
    }
    sign
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Trend {
    Decaying,
    Growing,
    Critical,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrendFlag {
    pub s: f64,
    pub trend: Trend,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoverRow {
    pub n: u32,
    pub word_count: u128,
    pub s: f64,
    /// ln of `sum_w (4K |phi_w'| e^{-S_n f})^s` at this depth.
    pub log_contribution: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringReport {
    pub system: String,
    pub potential: String,
    pub depth_min: u32,
    pub depth_max: u32,
    /// Per-word diameter bound constant valid at all depths with
    /// expansion at least 2: `4K`.
    pub constant_used: f64,
    /// The asymptotic constant `2K` for comparison.
    pub constant_asymptotic: f64,
    pub rows: Vec<CoverRow>,
    /// Partial sums over n in [depth_min, depth_max] per grid exponent.
    pub partial_sums: Vec<(f64, f64)>,
    pub trends: Vec<TrendFlag>,
    /// Zero crossing (in s) of the per-depth log-contribution increment
    /// between the two deepest levels; the bound constant cancels there.
    pub critical_exponent: Option<f64>,
}

impl CoveringReport {
    /// CSV rows `n,word_count,s,log_contribution`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,word_count,s,log_contribution\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.n, row.word_count, row.s, row.log_contribution
            ));
        }
        out
    }
}

/// Partial sums of the covering series `sum_n sum_w (bound |J_n(w)|)^s`
/// over `n` in `[depth_min, depth_max]` for each `s` in the grid, with
/// decay flags and the critical-exponent estimate.
pub fn covering_report(
    sys: &IfsSystem,
    pot: &Potential,
    depth_min: u32,
    depth_max: u32,
    s_grid: &[f64],
    opts: &ThermoOptions,
) -> Result<CoveringReport> {
    if depth_min == 0 || depth_min > depth_max {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= depth_min <= depth_max, got [{depth_min}, {depth_max}]"
        )));
    }
    if s_grid.is_empty() || s_grid.iter().any(|s| *s < 0.0) {
        return Err(Error::InvalidArgument(
            "the exponent grid must be nonempty and nonnegative".into(),
        ));
    }
    let k4 = 4.0 * sys.distortion();
    let log_k4 = k4.ln();

    let mut sums: Vec<PartitionSum<'_>> = Vec::new();
    for n in depth_min..=depth_max {
        sums.push(PartitionSum::new(sys, pot, n, opts)?);
    }
    let sum_at = |n: u32| -> &PartitionSum<'_> { &sums[(n - depth_min) as usize] };

    let mut rows = Vec::new();
    let mut partial_sums = Vec::new();
    for &s in s_grid {
        let mut series = 0.0;
        for n in depth_min..=depth_max {
            let lc = s * log_k4 + sum_at(n).log_partition(s);
            rows.push(CoverRow {
                n,
                word_count: sum_at(n).word_count(),
                s,
                log_contribution: lc,
            });
            series += lc.exp();
        }
        partial_sums.push((s, series));
    }

    // Increment of the log-contribution between the two deepest levels;
    // the covering constant cancels, leaving the growth rate of the series.
    let (deep, prev) = if depth_max > depth_min {
        (depth_max, depth_max - 1)
    } else {
        (depth_max, depth_max)
    };
    let increment = |s: f64| -> f64 {
        if deep == prev {
            // single-depth report: use the normalized contribution
            sum_at(deep).log_partition(s) / deep as f64
        } else {
            sum_at(deep).log_partition(s) - sum_at(prev).log_partition(s)
        }
    };

    let trends: Vec<TrendFlag> = s_grid
        .iter()
        .map(|&s| {
            let d = increment(s);
            let trend = if d.abs() <= 1e-9 {
                Trend::Critical
            } else if d < 0.0 {
                Trend::Decaying
            } else {
                Trend::Growing
            };
            TrendFlag { s, trend }
        })
        .collect();

    let mut critical_exponent = None;
    for w in s_grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (da, db) = (increment(a), increment(b));
        if da == 0.0 {
            critical_exponent = Some(a);
            break;
        }
        if da > 0.0 && db <= 0.0 {
            let root = bisect_decreasing(increment, a, b, 1e-12, 200)
                .or_else(|_| -> Result<f64> { Ok(a + (b - a) * da / (da - db) ) })?;
            critical_exponent = Some(root);
            break;
        }
    }

    Ok(CoveringReport {
        system: sys.descriptor().to_string(),
        potential: pot.describe(),
        depth_min,
        depth_max,
        constant_used: k4,
        constant_asymptotic: 2.0 * sys.distortion(),
        rows,
        partial_sums,
        trends,
        critical_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::build_system;

    #[test]
    fn return_depth_powers_of_two() {
        let sys = build_system("badic:b=2").unwrap();
        // 2^-4 = 0.0625 < 0.1 <= 0.125 = 2^-3
        assert_eq!(return_depth(&sys, &Word::from([0, 1]), 0.1).unwrap(), 4);
        // boundary: r = 1 gives t = 1
        assert_eq!(return_depth(&sys, &Word::from([1, 0]), 1.0).unwrap(), 1);
        // exact tie r = 2^-3 resolves strictly: need |I_t| < r, so t = 4
        assert_eq!(return_depth(&sys, &Word::from([0, 1]), 0.125).unwrap(), 4);
    }

    #[test]
    fn return_depth_cf_exact_endpoints() {
        let sys = build_system("cf:amax=2").unwrap();
        // digit word (2) = symbol 1; diameters along 2,22,222,...:
        // |I_1| = 1/6, |I_2| = 1/35 < 0.05 <= 1/6, so t = 2
        assert_eq!(return_depth(&sys, &Word::from([1]), 0.05).unwrap(), 2);
        // and with r below 1/35 the depth moves to 3 (|I_3| = 1/204)
        assert_eq!(return_depth(&sys, &Word::from([1]), 0.02).unwrap(), 3);
    }

    #[test]
    fn return_depth_rejects_bad_radius() {
        let sys = build_system("badic:b=2").unwrap();
        assert!(return_depth(&sys, &Word::from([0]), 0.0).is_err());
        assert!(return_depth(&sys, &Word::from([0]), 1.5).is_err());
        assert!(return_depth(&sys, &Word::empty(), 0.5).is_err());
    }

    #[test]
    fn witness_dyadic_example() {
        // w = (0,1), f = ln|T'|: r = 2^-2, t = 3 (strict: 2^-2 is not < 2^-2),
        // suffix (0,1,0), witness I_5(01010) = [10/32, 11/32]
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        let w = witness_cylinder(&sys, &pot, &Word::from([0, 1])).unwrap();
        assert_eq!(w.radius, 0.25);
        assert_eq!(w.return_depth, 3);
        assert_eq!(w.suffix, Word::from([0, 1, 0]));
        assert_eq!((w.witness.lo, w.witness.hi), (10.0 / 32.0, 11.0 / 32.0));
        // the diameter floor is attained with equality here:
        // 2^-5 = 1 * (1/2) * (1/4) * (1/4)
        assert!((w.witness.diameter - w.diameter_floor).abs() < 1e-15);
    }

    #[test]
    fn periodic_point_always_recurs() {
        let sys = build_system("cf:amax=3").unwrap();
        let pot = Potential::parse("logderiv:t=2").unwrap();
        for word in [Word::from([0]), Word::from([2, 1]), Word::from([1, 0, 2])] {
            let w = witness_cylinder(&sys, &pot, &word).unwrap();
            // x* is a fixed point of phi_w, so T^n x* = x* exactly
            let xstar = w.base.rep;
            assert!(xstar >= w.base.lo - 1e-12 && xstar <= w.base.hi + 1e-12);
        }
    }

    #[test]
    fn jn_exact_spec_examples() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        // w = (0,1): (1/4, 5/12), length 1/6
        let j = jn_exact_interval(&sys, &pot, &Word::from([0, 1]))
            .unwrap()
            .unwrap();
        assert!((j.0 - 0.25).abs() < 1e-14);
        assert!((j.1 - 5.0 / 12.0).abs() < 1e-14);
        // w = (0,0): [0, 1/12), length 1/12
        let j = jn_exact_interval(&sys, &pot, &Word::from([0, 0]))
            .unwrap()
            .unwrap();
        assert!(j.0.abs() < 1e-15);
        assert!((j.1 - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn jn_rejects_non_affine() {
        let sys = build_system("cf:amax=2").unwrap();
        let pot = Potential::parse("const:c=0").unwrap();
        assert!(jn_exact_interval(&sys, &pot, &Word::from([0])).is_err());
    }

    #[test]
    fn witness_sits_inside_exact_target() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        for rec in crate::ifs::enumerate_cylinders(&sys, 4, 1000).unwrap() {
            let wit = witness_cylinder(&sys, &pot, &rec.word).unwrap();
            let j = jn_exact_interval(&sys, &pot, &rec.word).unwrap().unwrap();
            assert!(wit.witness.lo >= j.0 - 1e-14, "word {}", rec.word);
            assert!(wit.witness.hi <= j.1 + 1e-14, "word {}", rec.word);
            // and the target sits inside the cylinder
            assert!(j.0 >= rec.lo - 1e-14 && j.1 <= rec.hi + 1e-14);
        }
    }

    #[test]
    fn covering_trends_and_critical_exponent() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        let grid = [0.4, 0.5, 0.6];
        let rep = covering_report(&sys, &pot, 2, 8, &grid, &ThermoOptions::default()).unwrap();
        assert_eq!(rep.trends[0].trend, Trend::Growing);
        assert_eq!(rep.trends[1].trend, Trend::Critical);
        assert_eq!(rep.trends[2].trend, Trend::Decaying);
        let crit = rep.critical_exponent.unwrap();
        assert!((crit - 0.5).abs() < 1e-9, "critical {crit}");
        assert_eq!(rep.constant_used, 4.0);
        assert_eq!(rep.constant_asymptotic, 2.0);
    }

    #[test]
    fn covering_rows_match_closed_form() {
        // full dyadic system, f = t ln|T'|: contribution at depth n is
        // s ln(4K) + n ln 2 (1 - s(1+t))
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        let rep =
            covering_report(&sys, &pot, 3, 5, &[0.6], &ThermoOptions::default()).unwrap();
        for row in &rep.rows {
            let expected = 0.6 * 4.0f64.ln() + row.n as f64 * 2.0f64.ln() * (1.0 - 1.2);
            assert!((row.log_contribution - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn return_depth_brackets_exactly() {
        // the returned t must satisfy |I_t| < r <= |I_{t-1}| with both
        // comparisons taken in exact rational arithmetic
        let sys = build_system("cantor:b=3,digits=0|2").unwrap();
        let w = Word::from([0, 1]);
        for r in [0.9, 1.0 / 9.0, 0.11111111111111112, 0.037, 1e-6] {
            let t = return_depth(&sys, &w, r).unwrap();
            let r_exact = rational_from_f64(r).unwrap();
            let dt = crate::exact::exact_diameter(&sys, &w.periodic_prefix(t as usize)).unwrap();
            assert!(dt < r_exact, "r={r}: |I_{t}| not below radius");
            if t > 1 {
                let dp = crate::exact::exact_diameter(&sys, &w.periodic_prefix(t as usize - 1))
                    .unwrap();
                assert!(r_exact <= dp, "r={r}: radius above |I_{}|", t - 1);
            }
        }
    }
}
