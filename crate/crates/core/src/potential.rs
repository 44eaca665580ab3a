//! Nonnegative potentials, Birkhoff sums along words, and certified
//! variation bounds.
//!
//! Potential descriptor grammar:
//!
//! ```text
//! const:c=<real>                        f = c
//! logderiv:t=<real>                     f = t ln|T'|
//! digitind:t=<real>,digit=<int>[,b=<int>]  f = t ln(b) on the digit's 1-cylinder
//! ```
//!
//! For `digitind` the base weight defaults to the alphabet size.

use crate::error::{Error, Result};
use crate::exact::exact_map;
use crate::ifs::{BranchSpec, IfsSystem, SystemKind, Word};
use crate::ifs::{cylinder_record, enumerate_cylinders};
use serde::Serialize;
use std::sync::Arc;

pub type PotentialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Potential {
    Const { c: f64 },
    LogDeriv { t: f64 },
    DigitIndicator { t: f64, digit: u32, base: Option<u32> },
    Callback { f: PotentialFn },
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.describe())
    }
}

/// Certified (or flagged best-effort) bound on the oscillation of a
/// potential over depth-`n` cylinders.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VariationBound {
    pub n: u32,
    pub bound: f64,
    /// False when the bound came from sampling a callback evaluator.
    pub certified: bool,
}

impl Potential {
    pub fn parse(descriptor: &str) -> Result<Potential> {
        let desc = descriptor.trim();
        let (head, rest) = desc
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("missing ':' in potential '{desc}'")))?;
        let fields = parse_fields(rest)?;
        let get = |name: &str| -> Result<f64> {
            fields
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse(format!("potential '{head}' needs '{name}='")))
        };
        let pot = match head {
            "const" => Potential::Const { c: get("c")? },
            "logderiv" => Potential::LogDeriv { t: get("t")? },
            "digitind" => {
                let digit = get("digit")? as u32;
                let base = fields
                    .iter()
                    .find(|(k, _)| k == "b")
                    .map(|(_, v)| *v as u32);
                Potential::DigitIndicator {
                    t: get("t")?,
                    digit,
                    base,
                }
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown potential '{other}' (expected const | logderiv | digitind)"
                )))
            }
        };
        pot.check_nonnegative()?;
        Ok(pot)
    }

    pub fn describe(&self) -> String {
        match self {
            Potential::Const { c } => format!("const:c={c}"),
            Potential::LogDeriv { t } => format!("logderiv:t={t}"),
            Potential::DigitIndicator { t, digit, base } => match base {
                Some(b) => format!("digitind:t={t},digit={digit},b={b}"),
                None => format!("digitind:t={t},digit={digit}"),
            },
            Potential::Callback { .. } => "callback".into(),
        }
    }

    fn check_nonnegative(&self) -> Result<()> {
        let bad = match self {
            Potential::Const { c } => *c < 0.0,
            Potential::LogDeriv { t } => *t < 0.0,
            Potential::DigitIndicator { t, .. } => *t < 0.0,
            Potential::Callback { .. } => false,
        };
        if bad {
            return Err(Error::InvalidArgument(
                "potentials must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Checks the potential against a concrete system (digit range,
    /// callback nonnegativity on a sample grid).
    pub fn validate(&self, sys: &IfsSystem) -> Result<()> {
        self.check_nonnegative()?;
        match self {
            Potential::DigitIndicator { digit, .. } if *digit >= sys.alphabet_len() => {
                Err(Error::InvalidArgument(format!(
                    "indicator digit {digit} outside alphabet of size {}",
                    sys.alphabet_len()
                )))
            }
            Potential::Callback { f } => {
                for k in 0..=64 {
                    let x = k as f64 / 64.0;
                    if f(x) < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "callback potential negative at {x}"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn digit_weight(&self, sys: &IfsSystem) -> f64 {
        match self {
            Potential::DigitIndicator { base, .. } => {
                (base.unwrap_or(sys.alphabet_len()) as f64).ln()
            }
            _ => 0.0,
        }
    }

    /// Value of `f` at a point `x` whose coding starts with `symbol`.
    pub fn eval(&self, sys: &IfsSystem, x: f64, symbol: u32) -> f64 {
        match self {
            Potential::Const { c } => *c,
            Potential::LogDeriv { t } => {
                let branch = sys.branch(symbol);
                match branch {
                    BranchSpec::Affine { slope, .. } => t * (1.0 / slope.abs()).ln(),
                    // Every digit branch inverts to T x = 1/x - d, so
                    // |T'(x)| = x^{-2} independently of the digit.
                    BranchSpec::Moebius { .. } => -2.0 * t * x.ln(),
                    BranchSpec::Callback { .. } => {
                        let tx = branch.invert(x);
                        t * (1.0 / branch.deriv_abs(tx)).ln()
                    }
                }
            }
            Potential::DigitIndicator { t, digit, .. } => {
                if symbol == *digit {
                    t * self.digit_weight(sys)
                } else {
                    0.0
                }
            }
            Potential::Callback { f } => f(x),
        }
    }

    /// `S_n f` at the representative of `word`, using the exact shortcuts
    /// available for each kind. `log_deriv` is `ln|phi_w'(x*)|`.
    pub(crate) fn birkhoff_given(
        &self,
        sys: &IfsSystem,
        word: &[u32],
        xstar: f64,
        log_deriv: f64,
    ) -> f64 {
        match self {
            Potential::Const { c } => word.len() as f64 * c,
            // S_n(t ln|T'|) at a periodic point telescopes to -t ln|phi_w'|.
            Potential::LogDeriv { t } => -t * log_deriv,
            Potential::DigitIndicator { t, digit, .. } => {
                let count = word.iter().filter(|&&s| s == *digit).count();
                t * self.digit_weight(sys) * count as f64
            }
            Potential::Callback { f } => {
                let orbit = sys.periodic_orbit(word, xstar);
                orbit.iter().map(|&z| f(z)).sum()
            }
        }
    }

    pub fn sup_norm(&self, sys: &IfsSystem) -> f64 {
        match self {
            Potential::Const { c } => *c,
            Potential::LogDeriv { t } => t * (1.0 / sys.eta()).ln(),
            Potential::DigitIndicator { t, .. } => t * self.digit_weight(sys),
            Potential::Callback { f } => {
                let mut hi = 0.0f64;
                for k in 0..=4096 {
                    let x = k as f64 / 4096.0;
                    hi = hi.max(f(x).abs());
                }
                hi
            }
        }
    }

    pub fn inf_value(&self, sys: &IfsSystem) -> f64 {
        match self {
            Potential::Const { c } => *c,
            Potential::LogDeriv { t } => t * (1.0 / sys.single_step_sup()).ln(),
            Potential::DigitIndicator { .. } => 0.0,
            Potential::Callback { f } => {
                let mut lo = f64::INFINITY;
                for k in 0..=4096 {
                    let x = k as f64 / 4096.0;
                    lo = lo.min(f(x));
                }
                lo
            }
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Potential::Const { c } => *c == 0.0,
            Potential::LogDeriv { t } => *t == 0.0,
            Potential::DigitIndicator { t, .. } => *t == 0.0,
            Potential::Callback { .. } => false,
        }
    }
}

fn parse_fields(s: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected 'key=value', got '{part}'")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad number '{v}'")))?;
        out.push((k.trim().to_string(), value));
    }
    Ok(out)
}

/// Birkhoff sum `S_n f` at the representative (periodic) point of `word`.
pub fn birkhoff_sum(sys: &IfsSystem, pot: &Potential, word: &Word) -> Result<f64> {
    if word.is_empty() {
        return Err(Error::InvalidArgument(
            "birkhoff_sum requires a nonempty word".into(),
        ));
    }
    pot.validate(sys)?;
    let rec = cylinder_record(sys, word)?;
    Ok(pot.birkhoff_given(sys, word.symbols(), rec.rep, rec.log_deriv))
}

/// Upper bound on the oscillation of `f` over depth-`n` cylinders.
pub fn variation_bound(
    sys: &IfsSystem,
    pot: &Potential,
    n: u32,
    budget: u64,
) -> Result<VariationBound> {
    if n == 0 {
        return Err(Error::InvalidArgument("variation depth must be >= 1".into()));
    }
    pot.validate(sys)?;
    let (bound, certified) = match pot {
        Potential::Const { .. } => (0.0, true),
        // locally constant on 1-cylinders, hence on every finer cylinder
        Potential::DigitIndicator { .. } => (0.0, true),
        Potential::LogDeriv { t } => match sys.kind() {
            // |T'| is constant on each 1-cylinder for affine branches
            SystemKind::Affine => (0.0, true),
            SystemKind::Moebius => {
                // f(x) = -2t ln x on every digit cylinder; the oscillation
                // over [lo, hi] is 2t ln(hi/lo), exact from the integer
                // endpoint arithmetic.
                let mut worst = 0.0f64;
                for rec in enumerate_cylinders(sys, n, budget)? {
                    let m = exact_map(sys, rec.word.symbols())?;
                    let (lo, hi) = m.endpoints();
                    let ratio = crate::exact::rational_to_f64(&(hi / lo));
                    worst = worst.max(2.0 * t * ratio.ln());
                }
                (worst, true)
            }
            SystemKind::General => (sampled_oscillation(sys, pot, n, budget)?, false),
        },
        Potential::Callback { .. } => (sampled_oscillation(sys, pot, n, budget)?, false),
    };
    Ok(VariationBound { n, bound, certified })
}

fn sampled_oscillation(sys: &IfsSystem, pot: &Potential, n: u32, budget: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for rec in enumerate_cylinders(sys, n, budget)? {
        let first = rec.word.symbols()[0];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=8 {
            let x = rec.lo + (rec.hi - rec.lo) * k as f64 / 8.0;
            let v = pot.eval(sys, x, first);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}

/// Certified bound on `|S_n f(x) - S_n f(y)|` for `x, y` in one
/// depth-`n` cylinder: the telescoped sum of variation bounds at depths
/// 1..n.
pub fn birkhoff_oscillation_bound(
    sys: &IfsSystem,
    pot: &Potential,
    n: u32,
    budget: u64,
) -> Result<VariationBound> {
    let mut total = 0.0;
    let mut certified = true;
    for k in 1..=n {
        let vb = variation_bound(sys, pot, k, budget)?;
        total += vb.bound;
        certified &= vb.certified;
    }
    Ok(VariationBound {
        n,
        bound: total,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::build_system;

    #[test]
    fn digit_count_birkhoff() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("digitind:t=1,digit=0").unwrap();
        let s = birkhoff_sum(&sys, &pot, &Word::from([0, 0, 1])).unwrap();
        assert!((s - 2.0 * 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn logderiv_on_badic_is_n_log_b() {
        let sys = build_system("badic:b=3").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        for word in [Word::from([0, 1, 2]), Word::from([2, 2, 2, 1, 0])] {
            let s = birkhoff_sum(&sys, &pot, &word).unwrap();
            assert!((s - word.len() as f64 * 3.0f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn const_birkhoff() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("const:c=0.7").unwrap();
        let s = birkhoff_sum(&sys, &pot, &Word::from([0, 1, 1, 0, 1])).unwrap();
        assert!((s - 3.5).abs() < 1e-14);
    }

    #[test]
    fn logderiv_shortcut_matches_orbit_walk() {
        // the telescoping identity S_n(t ln|T'|)(x*) = -t ln|phi_w'(x*)|
        // must agree with an explicit orbit sum
        let sys = build_system("cf:amax=3").unwrap();
        let t = 1.7;
        let pot = Potential::LogDeriv { t };
        for word in [Word::from([0, 2, 1]), Word::from([2, 2, 0, 1, 1])] {
            let rec = cylinder_record(&sys, &word).unwrap();
            let shortcut = birkhoff_sum(&sys, &pot, &word).unwrap();
            let orbit = sys.periodic_orbit(word.symbols(), rec.rep);
            let walked: f64 = orbit
                .iter()
                .enumerate()
                .map(|(j, &z)| pot.eval(&sys, z, word.symbols()[j]))
                .sum();
            assert!(
                (shortcut - walked).abs() < 1e-11,
                "word {word}: {shortcut} vs {walked}"
            );
        }
    }

    #[test]
    fn variations_of_locally_constant_potentials_vanish() {
        let sys = build_system("badic:b=2").unwrap();
        for desc in ["const:c=2.5", "digitind:t=1,digit=0", "logderiv:t=2"] {
            let pot = Potential::parse(desc).unwrap();
            let vb = variation_bound(&sys, &pot, 1, 1000).unwrap();
            assert_eq!(vb.bound, 0.0, "{desc}");
            assert!(vb.certified);
        }
    }

    #[test]
    fn cf_logderiv_variation_matches_endpoint_sweep() {
        let sys = build_system("cf:amax=2").unwrap();
        let t = 2.0;
        let pot = Potential::LogDeriv { t };
        let vb = variation_bound(&sys, &pot, 5, 1000).unwrap();
        assert!(vb.certified);
        // independent sweep: distortion of |T'| = x^{-2} over each cylinder
        let mut worst = 0.0f64;
        for rec in enumerate_cylinders(&sys, 5, 1000).unwrap() {
            worst = worst.max(t * (rec.hi / rec.lo).powi(2).ln());
        }
        assert!((vb.bound - worst).abs() < 1e-12);
        // bounds shrink with depth
        let vb6 = variation_bound(&sys, &pot, 6, 1000).unwrap();
        assert!(vb6.bound <= vb.bound);
    }

    #[test]
    fn negative_potentials_rejected() {
        assert!(Potential::parse("const:c=-1").is_err());
        assert!(Potential::parse("logderiv:t=-0.5").is_err());
    }

    #[test]
    fn digit_out_of_range_rejected() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("digitind:t=1,digit=5").unwrap();
        assert!(birkhoff_sum(&sys, &pot, &Word::from([0])).is_err());
    }

    #[test]
    fn sup_norm_and_inf() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        assert!((pot.sup_norm(&sys) - 2.0f64.ln()).abs() < 1e-14);
        assert!((pot.inf_value(&sys) - 2.0f64.ln()).abs() < 1e-14);

        let cf = build_system("cf:amax=2").unwrap();
        assert!((pot.sup_norm(&cf) - 9.0f64.ln()).abs() < 1e-14);
        assert_eq!(pot.inf_value(&cf), 0.0);
    }
}
