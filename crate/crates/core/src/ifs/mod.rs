//! Finite conformal iterated function systems on [0,1]: branch families,
//! validated system construction, and the distortion/contraction constants
//! that every downstream computation relies on.

mod cylinder;
mod descriptor;
mod map;
mod word;

pub use cylinder::{cylinder_record, enumerate_cylinders, CylinderRecord};
pub(crate) use cylinder::{visit_leaves, LeafCtx};
pub use descriptor::build_system;
pub use map::{ComposedMap, Mat2};
pub use word::Word;

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Number of grid points used for sampled bounds on callback branches.
const CALLBACK_GRID: usize = 2049;

/// Cap on the number of words inspected when sampling the distortion
/// constant of a non-affine system.
const DISTORTION_SAMPLE_CAP: u64 = 200_000;

/// Maximum word depth inspected when sampling the distortion constant.
const DISTORTION_SAMPLE_DEPTH: u32 = 8;

pub type BranchFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One inverse branch of the system.
#[derive(Clone)]
pub enum BranchSpec {
    /// `x |-> slope * x + offset` with `0 < |slope| < 1`.
    Affine { slope: f64, offset: f64 },
    /// `x |-> 1 / (digit + x)` with `digit >= 1`.
    Moebius { digit: u32 },
    /// Arbitrary monotone contraction given by value/derivative evaluators.
    /// Bounds derived for callback branches are sampled, not certified.
    Callback {
        value: BranchFn,
        deriv: BranchFn,
        increasing: bool,
    },
}

impl fmt::Debug for BranchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchSpec::Affine { slope, offset } => {
                write!(f, "Affine({slope} x + {offset})")
            }
            BranchSpec::Moebius { digit } => write!(f, "Moebius(1/({digit}+x))"),
            BranchSpec::Callback { increasing, .. } => {
                write!(f, "Callback(increasing: {increasing})")
            }
        }
    }
}

impl BranchSpec {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            BranchSpec::Affine { slope, offset } => slope * x + offset,
            BranchSpec::Moebius { digit } => 1.0 / (*digit as f64 + x),
            BranchSpec::Callback { value, .. } => value(x),
        }
    }

    #[inline]
    pub fn deriv_abs(&self, x: f64) -> f64 {
        match self {
            BranchSpec::Affine { slope, .. } => slope.abs(),
            BranchSpec::Moebius { digit } => {
                let d = *digit as f64 + x;
                1.0 / (d * d)
            }
            BranchSpec::Callback { deriv, .. } => deriv(x).abs(),
        }
    }

    /// Inverse of the branch on its image; this is the expanding map `T`
    /// restricted to the branch's cylinder.
    pub fn invert(&self, y: f64) -> f64 {
        match self {
            BranchSpec::Affine { slope, offset } => (y - offset) / slope,
            BranchSpec::Moebius { digit } => 1.0 / y - *digit as f64,
            BranchSpec::Callback { value, .. } => {
                // monotone bisection on value(x) = y
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let v = value(mid);
                    let below = if self.is_increasing() { v < y } else { v > y };
                    if below {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-16 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn is_increasing(&self) -> bool {
        match self {
            BranchSpec::Affine { slope, .. } => *slope > 0.0,
            BranchSpec::Moebius { .. } => false,
            BranchSpec::Callback { increasing, .. } => *increasing,
        }
    }

    /// Image of [0,1], returned as an ordered interval.
    pub fn image(&self) -> (f64, f64) {
        let (a, b) = (self.apply(0.0), self.apply(1.0));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn sup_deriv(&self) -> f64 {
        match self {
            BranchSpec::Affine { slope, .. } => slope.abs(),
            BranchSpec::Moebius { digit } => 1.0 / ((*digit as f64) * (*digit as f64)),
            BranchSpec::Callback { .. } => self.sampled_deriv_bounds().1,
        }
    }

    fn inf_deriv(&self) -> f64 {
        match self {
            BranchSpec::Affine { slope, .. } => slope.abs(),
            BranchSpec::Moebius { digit } => {
                let d = *digit as f64 + 1.0;
                1.0 / (d * d)
            }
            BranchSpec::Callback { .. } => self.sampled_deriv_bounds().0,
        }
    }

    fn sampled_deriv_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..CALLBACK_GRID {
            let x = k as f64 / (CALLBACK_GRID - 1) as f64;
            let d = self.deriv_abs(x);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }
}

/// Branch family of a system, fixed at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    /// All branches affine: compositions, diameters and the distortion
    /// constant are exact.
    Affine,
    /// All branches are digit maps `1/(d+x)`: compositions are integer
    /// fractional-linear maps; contraction is certified at depth 2.
    Moebius,
    /// At least one callback branch: bounds are sampled.
    General,
}

/// How the distortion constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum DistortionMethod {
    /// K = 1 exactly (all-affine systems).
    Exact,
    /// Max derivative ratio over all words up to depth 8, doubled.
    SampledDoubled,
    /// Grid-sampled on callback branches, doubled; not certified.
    SampledUncertified,
}

/// A validated finite conformal IFS on [0,1].
///
/// Immutable after construction and safe to share across threads.
#[derive(Clone, Debug)]
pub struct IfsSystem {
    branches: Vec<BranchSpec>,
    descriptor: String,
    kind: SystemKind,
    rho: f64,
    rho_depth: u32,
    eta: f64,
    single_step_sup: f64,
    distortion: f64,
    distortion_method: DistortionMethod,
}

impl IfsSystem {
    /// Validates branches and computes the system constants.
    pub fn new(branches: Vec<BranchSpec>, descriptor: String) -> Result<Self> {
        if branches.len() < 2 {
            return Err(Error::InvalidSystem(format!(
                "alphabet must have at least two branches, got {}",
                branches.len()
            )));
        }
        let kind = if branches.iter().all(|b| matches!(b, BranchSpec::Affine { .. })) {
            SystemKind::Affine
        } else if branches.iter().all(|b| matches!(b, BranchSpec::Moebius { .. })) {
            SystemKind::Moebius
        } else {
            SystemKind::General
        };

        for (i, b) in branches.iter().enumerate() {
            let (lo, hi) = b.image();
            if !(lo >= -1e-12 && hi <= 1.0 + 1e-12) {
                return Err(Error::InvalidSystem(format!(
                    "branch {i} image [{lo}, {hi}] leaves [0,1]"
                )));
            }
            if let BranchSpec::Affine { slope, .. } = b {
                if !(slope.abs() > 0.0 && slope.abs() < 1.0) {
                    return Err(Error::InvalidSystem(format!(
                        "branch {i} slope {slope} is not a contraction"
                    )));
                }
            }
            if let BranchSpec::Moebius { digit } = b {
                if *digit == 0 {
                    return Err(Error::InvalidSystem("digit branches need digit >= 1".into()));
                }
            }
        }

        check_interior_disjoint(&branches)?;

        let eta = branches.iter().map(|b| b.inf_deriv()).fold(f64::INFINITY, f64::min);
        if !(eta > 0.0) {
            return Err(Error::InvalidSystem(
                "a branch derivative vanishes on [0,1]".into(),
            ));
        }
        let single_step_sup = branches.iter().map(|b| b.sup_deriv()).fold(0.0, f64::max);

        let (rho, rho_depth) = match kind {
            SystemKind::Affine => (single_step_sup, 1),
            SystemKind::Moebius => {
                // Digit branches can have |phi'| = 1 at an endpoint, so the
                // contraction factor is certified on two-step compositions.
                let mut worst: f64 = 0.0;
                for bi in &branches {
                    for bj in &branches {
                        let (di, dj) = match (bi, bj) {
                            (BranchSpec::Moebius { digit: di }, BranchSpec::Moebius { digit: dj }) => {
                                (*di, *dj)
                            }
                            _ => unreachable!(),
                        };
                        let m = Mat2::digit(di).mul(&Mat2::digit(dj))?;
                        // sup over [0,1] of |det| / (q x + q')^2 is at x = 0
                        let qp = m.m[3] as f64;
                        worst = worst.max(1.0 / (qp * qp));
                    }
                }
                if !(worst < 1.0) {
                    return Err(Error::InvalidSystem(format!(
                        "two-step compositions do not contract (sup {worst})"
                    )));
                }
                (worst, 2)
            }
            SystemKind::General => {
                if !(single_step_sup < 1.0) {
                    return Err(Error::InvalidSystem(format!(
                        "sampled derivative sup {single_step_sup} is not < 1"
                    )));
                }
                (single_step_sup, 1)
            }
        };

        let mut sys = IfsSystem {
            branches,
            descriptor,
            kind,
            rho,
            rho_depth,
            eta,
            single_step_sup,
            distortion: 1.0,
            distortion_method: DistortionMethod::Exact,
        };
        let (k, method) = sys.estimate_distortion()?;
        sys.distortion = k;
        sys.distortion_method = method;
        Ok(sys)
    }

    pub fn alphabet_len(&self) -> u32 {
        self.branches.len() as u32
    }

    pub fn branch(&self, symbol: u32) -> &BranchSpec {
        &self.branches[symbol as usize]
    }

    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    /// Contraction factor. For digit systems this is the two-step factor;
    /// see [`IfsSystem::rho_depth`].
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Number of composition steps the contraction factor refers to (1 for
    /// affine and callback systems, 2 for digit systems).
    pub fn rho_depth(&self) -> u32 {
        self.rho_depth
    }

    /// min over branches of inf |phi'| on [0,1].
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// max over branches of sup |phi'| on [0,1]. Can equal 1 for digit
    /// systems; strictly below 1 otherwise.
    pub fn single_step_sup(&self) -> f64 {
        self.single_step_sup
    }

    /// Bounded-distortion constant K >= 1.
    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn distortion_method(&self) -> DistortionMethod {
        self.distortion_method
    }

    /// ln(contraction per single composition step): `ln rho` for affine,
    /// `ln(rho)/2` for digit systems whose rho is a two-step factor.
    pub fn log_contraction_per_step(&self) -> f64 {
        self.rho.ln() / self.rho_depth as f64
    }

    /// Upper bound for the diameter of any depth-`n` cylinder:
    /// `rho^n` (affine/callback) or `rho^(n/2)` (digit systems).
    pub fn diameter_decay_bound(&self, n: u32) -> f64 {
        self.rho.powi((n / self.rho_depth) as i32)
    }

    /// Minimum cylinder diameter at depth `m` (the separation scale of the
    /// selection machinery). Exact for affine systems; enumerated otherwise.
    pub fn min_cylinder_diameter(&self, m: u32, budget: u64) -> Result<f64> {
        if m == 0 {
            return Ok(1.0);
        }
        match self.kind {
            SystemKind::Affine => {
                let min_slope = self
                    .branches
                    .iter()
                    .map(|b| b.deriv_abs(0.0))
                    .fold(f64::INFINITY, f64::min);
                Ok(min_slope.powi(m as i32))
            }
            _ => {
                let mut min = f64::INFINITY;
                visit_leaves(self, &[], m, budget, &mut |ctx: LeafCtx<'_>| {
                    let d = ctx.diameter(self);
                    if d < min {
                        min = d;
                    }
                })?;
                Ok(min)
            }
        }
    }

    pub(crate) fn identity_map(&self) -> ComposedMap {
        match self.kind {
            SystemKind::Affine => ComposedMap::identity_affine(),
            SystemKind::Moebius => ComposedMap::identity_moebius(),
            SystemKind::General => ComposedMap::General,
        }
    }

    /// Composition value `phi_w(x)` by folding the word right-to-left.
    pub fn apply_word(&self, word: &[u32], x: f64) -> f64 {
        let mut y = x;
        for &s in word.iter().rev() {
            y = self.branch(s).apply(y);
        }
        y
    }

    /// `(phi_w(x), |phi_w'(x)|)` via the chain rule along the fold.
    pub fn apply_word_with_deriv(&self, word: &[u32], x: f64) -> (f64, f64) {
        let mut y = x;
        let mut d = 1.0;
        for &s in word.iter().rev() {
            d *= self.branch(s).deriv_abs(y);
            y = self.branch(s).apply(y);
        }
        (y, d)
    }

    /// Orbit `z_j = T^j x*` of the periodic point of `word`,
    /// for j = 0..len-1 (z_0 = x*).
    pub fn periodic_orbit(&self, word: &[u32], xstar: f64) -> Vec<f64> {
        let n = word.len();
        let mut orbit = vec![0.0; n];
        let mut u = xstar;
        for j in (0..n).rev() {
            // u enters as z_{j+1} (with z_n = x*), leaves as z_j
            u = self.branch(word[j]).apply(u);
            orbit[j] = u;
        }
        debug_assert!((orbit[0] - xstar).abs() < 1e-9);
        orbit[0] = xstar;
        orbit
    }

    fn estimate_distortion(&self) -> Result<(f64, DistortionMethod)> {
        match self.kind {
            SystemKind::Affine => Ok((1.0, DistortionMethod::Exact)),
            SystemKind::Moebius => {
                // max over words (up to depth 8, capped) of sup/inf |phi_w'|,
                // which for integer matrices is ((q + q') / q')^2; doubled.
                let mut worst: f64 = 1.0;
                let mut count: u64 = 0;
                let mut stack: Vec<(Mat2, u32)> = vec![(Mat2::IDENTITY, 0)];
                while let Some((m, depth)) = stack.pop() {
                    if depth > 0 {
                        let q = m.m[2] as f64;
                        let qp = m.m[3] as f64;
                        let ratio = ((q + qp) / qp).powi(2);
                        worst = worst.max(ratio);
                        count += 1;
                        if count > DISTORTION_SAMPLE_CAP {
                            break;
                        }
                    }
                    if depth < DISTORTION_SAMPLE_DEPTH {
                        for b in &self.branches {
                            if let BranchSpec::Moebius { digit } = b {
                                stack.push((m.mul(&Mat2::digit(*digit))?, depth + 1));
                            }
                        }
                    }
                }
                Ok((2.0 * worst, DistortionMethod::SampledDoubled))
            }
            SystemKind::General => {
                let mut worst: f64 = 1.0;
                let mut count: u64 = 0;
                let mut stack: Vec<(Vec<u32>, u32)> = vec![(Vec::new(), 0)];
                while let Some((word, depth)) = stack.pop() {
                    if depth > 0 {
                        let mut lo = f64::INFINITY;
                        let mut hi = 0.0f64;
                        for k in 0..65 {
                            let x = k as f64 / 64.0;
                            let (_, d) = self.apply_word_with_deriv(&word, x);
                            lo = lo.min(d);
                            hi = hi.max(d);
                        }
                        worst = worst.max(hi / lo);
                        count += 1;
                        if count > 2_000 {
                            break;
                        }
                    }
                    if depth < 5 {
                        for s in 0..self.alphabet_len() {
                            let mut w = word.clone();
                            w.push(s);
                            stack.push((w, depth + 1));
                        }
                    }
                }
                Ok((2.0 * worst, DistortionMethod::SampledUncertified))
            }
        }
    }
}

fn check_interior_disjoint(branches: &[BranchSpec]) -> Result<()> {
    let mut images: Vec<(f64, f64, usize)> = branches
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (lo, hi) = b.image();
            (lo, hi, i)
        })
        .collect();
    images.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for pair in images.windows(2) {
        let (_, hi_a, ia) = pair[0];
        let (lo_b, _, ib) = pair[1];
        if lo_b < hi_a - 1e-12 {
            return Err(Error::InvalidSystem(format!(
                "branch images {ia} and {ib} overlap on an interval"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn badic_constants() {
        let sys = build_system("badic:b=2").unwrap();
        assert_eq!(sys.alphabet_len(), 2);
        assert_eq!(sys.kind(), SystemKind::Affine);
        assert_eq!(sys.rho(), 0.5);
        assert_eq!(sys.eta(), 0.5);
        assert_eq!(sys.distortion(), 1.0);
        assert_eq!(sys.distortion_method(), DistortionMethod::Exact);
    }

    #[test]
    fn cantor_constants() {
        let sys = build_system("cantor:b=3,digits=0|2").unwrap();
        assert_eq!(sys.alphabet_len(), 2);
        assert!((sys.rho() - 1.0 / 3.0).abs() < 1e-16);
        assert!((sys.eta() - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(sys.distortion(), 1.0);
    }

    #[test]
    fn cf_uses_two_step_contraction() {
        let sys = build_system("cf:amax=2").unwrap();
        assert_eq!(sys.kind(), SystemKind::Moebius);
        // single-step sup is 1 (digit 1 at x = 0), so rho comes from pairs:
        // the worst pair is (1,1) with sup 1/4
        assert_eq!(sys.single_step_sup(), 1.0);
        assert_eq!(sys.rho_depth(), 2);
        assert!((sys.rho() - 0.25).abs() < 1e-15);
        assert!((sys.eta() - 1.0 / 9.0).abs() < 1e-15);
        // max derivative ratio over words is (1 + q/q')^2 <= 4, attained at
        // the single digit-1 word; doubled by the safety factor
        assert!((sys.distortion() - 8.0).abs() < 1e-12);
        assert_eq!(sys.distortion_method(), DistortionMethod::SampledDoubled);
    }

    #[test]
    fn one_branch_alphabet_rejected() {
        assert!(build_system("cf:amax=1").is_err());
        assert!(IfsSystem::new(
            vec![BranchSpec::Affine {
                slope: 0.5,
                offset: 0.0
            }],
            "single".into()
        )
        .is_err());
    }

    #[test]
    fn overlapping_images_rejected() {
        let r = IfsSystem::new(
            vec![
                BranchSpec::Affine {
                    slope: 0.6,
                    offset: 0.0,
                },
                BranchSpec::Affine {
                    slope: 0.6,
                    offset: 0.4,
                },
            ],
            "overlap".into(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn non_contracting_affine_rejected() {
        let r = IfsSystem::new(
            vec![
                BranchSpec::Affine {
                    slope: 1.0,
                    offset: 0.0,
                },
                BranchSpec::Affine {
                    slope: 0.5,
                    offset: 0.5,
                },
            ],
            "slope1".into(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn min_cylinder_diameter_affine_vs_enumerated() {
        let sys = build_system("badic:b=2").unwrap();
        assert!((sys.min_cylinder_diameter(3, 1000).unwrap() - 0.125).abs() < 1e-16);
        let cf = build_system("cf:amax=2").unwrap();
        // depth-2 minimum over {11,12,21,22}: diam(22) = 1/35
        let d = cf.min_cylinder_diameter(2, 1000).unwrap();
        assert!((d - 1.0 / 35.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_orbit_cycles() {
        let sys = build_system("badic:b=2").unwrap();
        // word (0,1): phi(x) = (x+1)/4, fixed point 1/3
        let orbit = sys.periodic_orbit(&[0, 1], 1.0 / 3.0);
        assert!((orbit[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((orbit[1] - 2.0 / 3.0).abs() < 1e-12);
    }
}
