//! Depth-n partition sums, pressure approximants, Bowen roots s_n, and
//! Richardson extrapolation of the root sequence.
//!
//! The weight of a word `w` at depth n is
//! `g_w = ln|phi_w'(x*)| - S_n f(x*)`, evaluated at the representative
//! (periodic) point, and the partition sum is `sum_w exp(s g_w)`. The
//! pressure approximant is its log divided by n; the depth-n Bowen root
//! is the unique `s` where the sum crosses 1.
//!
//! Three interchangeable evaluations of the sum are used:
//!
//! * factored: for affine systems with branch-locally-constant potentials
//!   the weight is a sum of per-symbol contributions, so the depth-n sum
//!   is exactly the n-th power of the one-step sum;
//! * cached: one enumeration pass stores the weight multiset, bisection
//!   then reuses it;
//! * streamed: each evaluation re-enumerates in fixed prefix chunks.
//!
//! All reductions are chunked in a shape that depends only on the system
//! and depth, never on the worker count, so parallel and serial runs
//! produce identical bits.

use crate::error::{Error, Result};
use crate::ifs::{visit_leaves, ComposedMap, IfsSystem, LeafCtx, SystemKind};
use crate::numeric::{bisect_decreasing, KahanSum, LogSumExp};
use crate::potential::Potential;
use crate::DEFAULT_BUDGET;
use rayon::prelude::*;
use serde::Serialize;

/// Weight multisets above this size are never cached; bisection streams.
const CACHE_LIMIT: u64 = 1 << 24;

/// Target number of prefix chunks for parallel passes.
const CHUNK_TARGET: u64 = 256;

/// Block size for deterministic cached reductions.
const SUM_BLOCK: usize = 8192;

#[derive(Clone, Debug)]
pub struct ThermoOptions {
    pub budget: u64,
    /// Tolerance on the partition-sum residual |sum - 1| at the root.
    pub tol: f64,
    /// Disable the factored fast path; every word is enumerated.
    pub force_enumerated: bool,
    /// Use cylinder-sup weights instead of representative-point weights.
    /// Only supported where the two provably coincide (affine systems
    /// with branch-locally-constant potentials); exists for the
    /// sub-multiplicativity check.
    pub use_sup_weights: bool,
}

impl Default for ThermoOptions {
    fn default() -> Self {
        ThermoOptions {
            budget: DEFAULT_BUDGET,
            tol: 1e-12,
            force_enumerated: false,
            use_sup_weights: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureSample {
    pub s: f64,
    pub n: u32,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BowenSample {
    pub n: u32,
    pub s_n: f64,
    /// Partition-sum residual |sum - 1| at the returned root.
    pub residual: f64,
}

enum Repr {
    Factored(Vec<f64>),
    Cached { logs: Vec<f64>, max_log: f64 },
    Streamed,
}

/// A depth-n partition sum, evaluable at any exponent `s >= 0`.
pub struct PartitionSum<'a> {
    sys: &'a IfsSystem,
    pot: &'a Potential,
    n: u32,
    count: u128,
    repr: Repr,
}

impl<'a> PartitionSum<'a> {
    pub fn new(
        sys: &'a IfsSystem,
        pot: &'a Potential,
        n: u32,
        opts: &ThermoOptions,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        pot.validate(sys)?;
        if opts.use_sup_weights {
            check_sup_weights_supported(sys, pot)?;
        }
        let count = checked_count(sys, n, opts.budget)?;

        let repr = if !opts.force_enumerated {
            per_symbol_weights(sys, pot).map(Repr::Factored)
        } else {
            None
        };
        let repr = match repr {
            Some(r) => r,
            None if count <= CACHE_LIMIT as u128 => {
                let logs = collect_weights(sys, pot, n)?;
                let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Repr::Cached { logs, max_log }
            }
            None => Repr::Streamed,
        };
        Ok(PartitionSum {
            sys,
            pot,
            n,
            count,
            repr,
        })
    }

    pub fn depth(&self) -> u32 {
        self.n
    }

    pub fn word_count(&self) -> u128 {
        self.count
    }

    /// `ln sum_w exp(s g_w)`.
    pub fn log_partition(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Factored(gamma) => {
                let one_step = kahan_exp_sum(gamma, s, 0.0);
                self.n as f64 * one_step.ln()
            }
            Repr::Cached { logs, max_log } => {
                let shift = s * max_log;
                let blocks: Vec<f64> = logs
                    .par_chunks(SUM_BLOCK)
                    .map(|b| kahan_exp_sum(b, s, shift))
                    .collect();
                let mut total = KahanSum::new();
                for b in blocks {
                    total.add(b);
                }
                shift + total.value().ln()
            }
            Repr::Streamed => stream_log_partition(self.sys, self.pot, self.n, s)
                .expect("budget was checked at construction"),
        }
    }

    /// Partition-sum residual `sum - 1`, strictly decreasing in `s`.
    pub fn residual(&self, s: f64) -> f64 {
        self.log_partition(s).exp_m1()
    }
}

fn checked_count(sys: &IfsSystem, n: u32, budget: u64) -> Result<u128> {
    let count = (sys.alphabet_len() as u128)
        .checked_pow(n)
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
    Ok(count)
}

/// `sum_i exp(s * g_i - shift)` with compensated accumulation.
fn kahan_exp_sum(logs: &[f64], s: f64, shift: f64) -> f64 {
    let mut acc = KahanSum::new();
    for &g in logs {
        acc.add((s * g - shift).exp());
    }
    acc.value()
}

/// Per-symbol weight contributions when they exist: affine branches with
/// a potential that is constant on each 1-cylinder make `g_w` an exact
/// sum over symbols, independent of position and context.
fn per_symbol_weights(sys: &IfsSystem, pot: &Potential) -> Option<Vec<f64>> {
    if sys.kind() != SystemKind::Affine {
        return None;
    }
    let slopes: Vec<f64> = sys.branches().iter().map(|b| b.deriv_abs(0.0)).collect();
    match pot {
        Potential::Const { c } => Some(slopes.iter().map(|a| a.ln() - c).collect()),
        Potential::LogDeriv { t } => Some(slopes.iter().map(|a| (1.0 + t) * a.ln()).collect()),
        Potential::DigitIndicator { t, digit, base } => {
            let w = t * (base.unwrap_or(sys.alphabet_len()) as f64).ln();
            Some(
                slopes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a.ln() - if i as u32 == *digit { w } else { 0.0 })
                    .collect(),
            )
        }
        Potential::Callback { .. } => None,
    }
}

fn check_sup_weights_supported(sys: &IfsSystem, pot: &Potential) -> Result<()> {
    // For affine branches |phi_w'| is constant on the cylinder and the
    // supported potentials are determined by the word alone, so the
    // representative value equals the cylinder supremum exactly.
    let ok = sys.kind() == SystemKind::Affine && !matches!(pot, Potential::Callback { .. });
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "sup weights are only supported on affine systems with \
             branch-locally-constant potentials"
                .into(),
        ))
    }
}

/// `g_w` for the word at `ctx`, evaluated at its representative point.
pub(crate) fn leaf_log_weight(sys: &IfsSystem, pot: &Potential, ctx: &LeafCtx<'_>) -> f64 {
    let needs_rep = !matches!(ctx.map, ComposedMap::Affine { .. })
        || matches!(pot, Potential::Callback { .. });
    let (rep, log_deriv) = if needs_rep {
        let x = ctx.fixed_point(sys);
        (x, ctx.log_deriv(sys, x))
    } else {
        (f64::NAN, ctx.log_deriv(sys, f64::NAN))
    };
    log_deriv - pot.birkhoff_given(sys, ctx.word, rep, log_deriv)
}

/// Prefix chunks that give deterministic parallel grain: the chunk layout
/// depends only on the alphabet and depth.
fn chunk_prefixes(sys: &IfsSystem, n: u32) -> (u32, Vec<Vec<u32>>) {
    let b = sys.alphabet_len() as u64;
    let mut p = 0u32;
    let mut count = 1u64;
    while p < n && count < CHUNK_TARGET {
        p += 1;
        count = count.saturating_mul(b);
    }
    let mut prefixes = Vec::with_capacity(count as usize);
    let mut cur = vec![0u32; p as usize];
    loop {
        prefixes.push(cur.clone());
        let mut i = p as usize;
        loop {
            if i == 0 {
                return (p, prefixes);
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < sys.alphabet_len() {
                break;
            }
            cur[i] = 0;
        }
    }
}

fn stream_log_partition(sys: &IfsSystem, pot: &Potential, n: u32, s: f64) -> Result<f64> {
    let (p, prefixes) = chunk_prefixes(sys, n);
    let parts: Result<Vec<LogSumExp>> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut lse = LogSumExp::new();
            visit_leaves(sys, prefix, n - p, u64::MAX, &mut |ctx| {
                lse.push(s * leaf_log_weight(sys, pot, &ctx));
            })?;
            Ok(lse)
        })
        .collect();
    let parts = parts?;
    let mut total = LogSumExp::new();
    for part in &parts {
        total.merge(part);
    }
    Ok(total.value())
}

fn collect_weights(sys: &IfsSystem, pot: &Potential, n: u32) -> Result<Vec<f64>> {
    let (p, prefixes) = chunk_prefixes(sys, n);
    let per_chunk = (sys.alphabet_len() as u64).pow(n - p) as usize;
    let total = per_chunk
        .checked_mul(prefixes.len())
        .ok_or_else(|| Error::Overflow("weight cache size".into()))?;
    let mut logs = vec![0.0f64; total];
    let results: Result<Vec<()>> = logs
        .par_chunks_mut(per_chunk)
        .zip(prefixes.par_iter())
        .map(|(slice, prefix)| {
            let mut i = 0;
            visit_leaves(sys, prefix, n - p, u64::MAX, &mut |ctx| {
                slice[i] = leaf_log_weight(sys, pot, &ctx);
                i += 1;
            })?;
            debug_assert_eq!(i, slice.len());
            Ok(())
        })
        .collect();
    results?;
    Ok(logs)
}

/// Pressure approximant `P_n(s) = (1/n) ln sum_w exp(s g_w)`, evaluated
/// by a max-shifted log-domain pass over the cylinder stream.
pub fn pressure_approx(
    sys: &IfsSystem,
    pot: &Potential,
    s: f64,
    n: u32,
    opts: &ThermoOptions,
) -> Result<PressureSample> {
    if s < 0.0 {
        return Err(Error::InvalidArgument("exponent s must be >= 0".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    pot.validate(sys)?;
    if opts.use_sup_weights {
        check_sup_weights_supported(sys, pot)?;
    }
    checked_count(sys, n, opts.budget)?;
    let lp = stream_log_partition(sys, pot, n, s)?;
    Ok(PressureSample {
        s,
        n,
        value: lp / n as f64,
    })
}

/// A-priori cap for the Bowen root bracket, expanded on demand.
fn initial_s_max(sys: &IfsSystem, pot: &Potential) -> f64 {
    let log_exp = -sys.log_contraction_per_step(); // ln(1/rho) per step
    let inf_f = pot.inf_value(sys).max(0.0);
    (1.0 + 1.0 / (1.0 + inf_f / log_exp)).min(4.0)
}

/// Depth-n Bowen root: the unique `s` with the partition sum within
/// `opts.tol` of 1. Bisection is valid because every weight `g_w` is
/// strictly negative, making the sum strictly decreasing in `s`.
pub fn bowen_root(
    sys: &IfsSystem,
    pot: &Potential,
    n: u32,
    opts: &ThermoOptions,
) -> Result<BowenSample> {
    let sum = PartitionSum::new(sys, pot, n, opts)?;
    let mut s_max = initial_s_max(sys, pot);
    let mut expansions = 0;
    while sum.log_partition(s_max) > 0.0 {
        s_max *= 2.0;
        expansions += 1;
        if expansions > 16 {
            return Err(Error::BracketFailure(format!(
                "partition sum still above 1 at s = {s_max}; \
                 some word fails to contract"
            )));
        }
    }
    let root = bisect_decreasing(|s| sum.residual(s), 0.0, s_max, opts.tol, 256)?;
    Ok(BowenSample {
        n,
        s_n: root,
        residual: sum.residual(root).abs(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RichardsonStep {
    pub n: u32,
    pub n2: u32,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Extrapolation {
    /// `2 s_{2n} - s_n` for the largest doubling pair.
    pub estimate: f64,
    pub steps: Vec<RichardsonStep>,
}

/// Richardson extrapolation under the model `s_n = s + c/n + o(1/n)`.
/// Needs at least three samples including one `(n, 2n)` pair.
pub fn bowen_extrapolate(samples: &[(u32, f64)]) -> Result<Extrapolation> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 3 root samples, got {}",
            samples.len()
        )));
    }
    let mut steps = Vec::new();
    for &(n, s_n) in samples {
        if let Some(&(n2, s_2n)) = samples.iter().find(|(m, _)| *m == 2 * n) {
            steps.push(RichardsonStep {
                n,
                n2,
                value: 2.0 * s_2n - s_n,
            });
        }
    }
    if steps.is_empty() {
        return Err(Error::InsufficientSamples(
            "no (n, 2n) doubling pair in the depth schedule".into(),
        ));
    }
    steps.sort_by_key(|st| st.n);
    let estimate = steps.last().unwrap().value;
    Ok(Extrapolation { estimate, steps })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportOptions {
    pub depths: Vec<u32>,
    pub tol: f64,
    pub budget: u64,
    pub force_enumerated: bool,
    /// Half-width of the pressure sign bracket around the extrapolated root.
    pub delta: f64,
    /// Numerical slack allowed on the bracket signs.
    pub bracket_slack: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            depths: vec![4, 6, 8, 10, 12],
            tol: 1e-12,
            budget: DEFAULT_BUDGET,
            force_enumerated: false,
            delta: 1e-3,
            bracket_slack: 1e-9,
        }
    }
}

impl ReportOptions {
    pub fn thermo(&self) -> ThermoOptions {
        ThermoOptions {
            budget: self.budget,
            tol: self.tol,
            force_enumerated: self.force_enumerated,
            use_sup_weights: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DoublingGap {
    pub n: u32,
    pub n2: u32,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureBracket {
    pub s_minus: f64,
    pub p_minus: f64,
    pub s_plus: f64,
    pub p_plus: f64,
    pub brackets_zero: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodInfo {
    pub residual_tol: f64,
    pub depth_schedule: Vec<u32>,
    pub extrapolation: String,
    pub distortion: f64,
    pub distortion_method: crate::ifs::DistortionMethod,
}

#[derive(Clone, Debug, Serialize)]
pub struct BowenReport {
    pub system: String,
    pub potential: String,
    pub samples: Vec<BowenSample>,
    pub extrapolated: f64,
    pub richardson_steps: Vec<RichardsonStep>,
    /// |s_n - s_2n| for every doubling pair in the schedule.
    pub gaps: Vec<DoublingGap>,
    pub method: MethodInfo,
    pub pressure_bracket: PressureBracket,
}

/// Runs the Bowen root over the depth schedule, extrapolates, and
/// cross-checks that the pressure changes sign across the extrapolated
/// root.
pub fn dimension_report(
    sys: &IfsSystem,
    pot: &Potential,
    opts: &ReportOptions,
) -> Result<BowenReport> {
    if opts.depths.is_empty() {
        return Err(Error::InvalidArgument("empty depth schedule".into()));
    }
    let topts = opts.thermo();
    let mut samples = Vec::with_capacity(opts.depths.len());
    for &n in &opts.depths {
        samples.push(bowen_root(sys, pot, n, &topts)?);
    }
    let pairs: Vec<(u32, f64)> = samples.iter().map(|s| (s.n, s.s_n)).collect();
    let extrapolation = bowen_extrapolate(&pairs)?;
    let gaps: Vec<DoublingGap> = extrapolation
        .steps
        .iter()
        .map(|st| {
            let s_n = pairs.iter().find(|(n, _)| *n == st.n).unwrap().1;
            let s_2n = pairs.iter().find(|(n, _)| *n == st.n2).unwrap().1;
            DoublingGap {
                n: st.n,
                n2: st.n2,
                gap: (s_n - s_2n).abs(),
            }
        })
        .collect();

    let n_max = *opts.depths.iter().max().unwrap();
    let s_bar = extrapolation.estimate;
    let s_minus = (s_bar - opts.delta).max(0.0);
    let s_plus = s_bar + opts.delta;
    let p_minus = pressure_approx(sys, pot, s_minus, n_max, &topts)?.value;
    let p_plus = pressure_approx(sys, pot, s_plus, n_max, &topts)?.value;
    let brackets_zero = p_minus >= -opts.bracket_slack && p_plus <= opts.bracket_slack;

    Ok(BowenReport {
        system: sys.descriptor().to_string(),
        potential: pot.describe(),
        samples,
        extrapolated: s_bar,
        richardson_steps: extrapolation.steps,
        gaps,
        method: MethodInfo {
            residual_tol: opts.tol,
            depth_schedule: opts.depths.clone(),
            extrapolation: "richardson-1/n".into(),
            distortion: sys.distortion(),
            distortion_method: sys.distortion_method(),
        },
        pressure_bracket: PressureBracket {
            s_minus,
            p_minus,
            s_plus,
            p_plus,
            brackets_zero,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::build_system;

    fn opts() -> ThermoOptions {
        ThermoOptions::default()
    }

    #[test]
    fn pressure_closed_form_badic_logderiv() {
        // P_n(s) = ln b (1 - s (1 + t)) for the full base-b system with
        // f = t ln|T'|; zero exactly at s = 1/(1+t)
        let sys = build_system("badic:b=3").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        for n in [1, 3, 5] {
            let p = pressure_approx(&sys, &pot, 0.5, n, &opts()).unwrap();
            assert!(p.value.abs() < 1e-12, "n={n}: {}", p.value);
        }
        let p = pressure_approx(&sys, &pot, 0.25, 4, &opts()).unwrap();
        assert!((p.value - 3.0f64.ln() * 0.5).abs() < 1e-12);
    }

    #[test]
    fn pressure_zero_potential_unit_sum() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("const:c=0").unwrap();
        let p = pressure_approx(&sys, &pot, 1.0, 5, &opts()).unwrap();
        assert!(p.value.abs() < 1e-13);
    }

    #[test]
    fn pressure_digit_indicator_closed_form() {
        // P(s) = ln(2^{-s(t+1)} (1 + 2^{ts})) for the dyadic system with the
        // zero-digit indicator, at every depth
        let sys = build_system("badic:b=2").unwrap();
        let t = 1.0;
        let pot = Potential::parse("digitind:t=1,digit=0").unwrap();
        for s in [0.3, 0.6942419136306174, 1.0] {
            let expected = (2.0f64.powf(-s * (t + 1.0)) * (1.0 + 2.0f64.powf(t * s))).ln();
            for n in [1, 4, 7] {
                let p = pressure_approx(&sys, &pot, s, n, &opts()).unwrap();
                assert!(
                    (p.value - expected).abs() < 1e-12,
                    "s={s} n={n}: {} vs {expected}",
                    p.value
                );
            }
        }
    }

    #[test]
    fn pressure_monotone_in_s() {
        let sys = build_system("cf:amax=2").unwrap();
        let pot = Potential::parse("const:c=0.2").unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let s = k as f64 * 0.2;
            let p = pressure_approx(&sys, &pot, s, 6, &opts()).unwrap();
            assert!(p.value <= prev + 1e-12);
            prev = p.value;
        }
    }

    #[test]
    fn bowen_root_badic_constant_rate() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        for n in [2, 5, 9] {
            let r = bowen_root(&sys, &pot, n, &opts()).unwrap();
            assert!((r.s_n - 0.5).abs() < 1e-11, "n={n}: {}", r.s_n);
            assert!(r.residual <= 1e-12);
        }
    }

    #[test]
    fn bowen_root_triadic_cantor() {
        let sys = build_system("cantor:b=3,digits=0|2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        let r = bowen_root(&sys, &pot, 6, &opts()).unwrap();
        let expected = 2.0f64.ln() / (2.0 * 3.0f64.ln());
        assert!((r.s_n - expected).abs() < 1e-11);
    }

    #[test]
    fn bowen_root_digit_frequency_golden_ratio() {
        // root of 1 + 2^{ts} = 2^{s(t+1)} at t = 1 is log2 of the golden ratio
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("digitind:t=1,digit=0").unwrap();
        let expected = ((1.0 + 5.0f64.sqrt()) / 2.0).log2();
        for force in [false, true] {
            let o = ThermoOptions {
                force_enumerated: force,
                ..opts()
            };
            let r = bowen_root(&sys, &pot, 6, &o).unwrap();
            assert!((r.s_n - expected).abs() < 1e-11, "force={force}");
        }
    }

    #[test]
    fn factored_and_enumerated_roots_agree() {
        let sys = build_system("badic:b=3").unwrap();
        let pot = Potential::parse("logderiv:t=0.5").unwrap();
        let fast = bowen_root(&sys, &pot, 7, &opts()).unwrap();
        let slow = bowen_root(
            &sys,
            &pot,
            7,
            &ThermoOptions {
                force_enumerated: true,
                ..opts()
            },
        )
        .unwrap();
        assert!((fast.s_n - slow.s_n).abs() < 1e-11);
    }

    #[test]
    fn roots_are_depth_independent_for_locally_constant_weights() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("digitind:t=2,digit=1").unwrap();
        let o = ThermoOptions {
            force_enumerated: true,
            ..opts()
        };
        let roots: Vec<f64> = (1..=8)
            .map(|n| bowen_root(&sys, &pot, n, &o).unwrap().s_n)
            .collect();
        for w in roots.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn cf_truncation_monotonicity() {
        // enlarging the digit alphabet can only increase the depth-n root
        let pot = Potential::parse("const:c=0").unwrap();
        let s2 = bowen_root(&build_system("cf:amax=2").unwrap(), &pot, 4, &opts())
            .unwrap()
            .s_n;
        let s3 = bowen_root(&build_system("cf:amax=3").unwrap(), &pot, 4, &opts())
            .unwrap()
            .s_n;
        let s4 = bowen_root(&build_system("cf:amax=4").unwrap(), &pot, 4, &opts())
            .unwrap()
            .s_n;
        assert!(s2 < s3 && s3 < s4);
    }

    #[test]
    fn extrapolation_model_sequences() {
        // s_n = 1 + 1/n at n = 2, 3, 4: the (2,4) step gives exactly 1
        let ext = bowen_extrapolate(&[(2, 1.5), (3, 1.0 + 1.0 / 3.0), (4, 1.25)]).unwrap();
        assert!((ext.estimate - 1.0).abs() < 1e-15);
        // constant sequences are fixed points
        let ext = bowen_extrapolate(&[(2, 0.5), (3, 0.5), (4, 0.5)]).unwrap();
        assert_eq!(ext.estimate, 0.5);
    }

    #[test]
    fn extrapolation_requires_samples_and_pairs() {
        assert!(bowen_extrapolate(&[(2, 0.5), (4, 0.5)]).is_err());
        assert!(bowen_extrapolate(&[(2, 0.5), (3, 0.5), (5, 0.5)]).is_err());
    }

    #[test]
    fn report_badic_t3() {
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("logderiv:t=3").unwrap();
        let rep = dimension_report(&sys, &pot, &ReportOptions::default()).unwrap();
        for s in &rep.samples {
            assert!((s.s_n - 0.25).abs() < 1e-11);
        }
        assert!((rep.extrapolated - 0.25).abs() < 1e-10);
        assert!(rep.pressure_bracket.brackets_zero);
    }

    #[test]
    fn report_cantor_t0() {
        let sys = build_system("cantor:b=3,digits=0|2").unwrap();
        let pot = Potential::parse("logderiv:t=0").unwrap();
        let rep = dimension_report(&sys, &pot, &ReportOptions::default()).unwrap();
        let h = 2.0f64.ln() / 3.0f64.ln();
        assert!((rep.extrapolated - h).abs() < 1e-10);
    }

    #[test]
    fn parallel_and_serial_pressure_agree_exactly() {
        let sys = build_system("cf:amax=2").unwrap();
        let pot = Potential::parse("logderiv:t=1").unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| pressure_approx(&sys, &pot, 0.4, 8, &opts()).unwrap().value);
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| pressure_approx(&sys, &pot, 0.4, 8, &opts()).unwrap().value);
        assert_eq!(serial.to_bits(), parallel.to_bits());
    }

    #[test]
    fn sup_weight_submultiplicativity_on_affine() {
        // n P_n formed with cylinder-sup weights is subadditive in n
        let sys = build_system("badic:b=2").unwrap();
        let pot = Potential::parse("digitind:t=1,digit=0").unwrap();
        let o = ThermoOptions {
            use_sup_weights: true,
            ..opts()
        };
        let np = |n: u32| n as f64 * pressure_approx(&sys, &pot, 0.6, n, &o).unwrap().value;
        for (n, m) in [(1u32, 1u32), (2, 3), (4, 2)] {
            assert!(np(n + m) <= np(n) + np(m) + 1e-10);
        }
        // and it is rejected away from the exact cases
        let cf = build_system("cf:amax=2").unwrap();
        assert!(pressure_approx(&cf, &pot, 0.6, 2, &o).is_err());
    }

    #[test]
    fn bowen_root_skewed_affine_pair() {
        let sys = build_system("affine:[(0.9,0),(0.05,0.95)]").unwrap();
        let pot = Potential::parse("const:c=0").unwrap();
        let r = bowen_root(&sys, &pot, 1, &opts()).unwrap();
        let check = 0.9f64.powf(r.s_n) + 0.05f64.powf(r.s_n);
        assert!((check - 1.0).abs() < 1e-11);
        // depth-3 root of the same system must agree: the sum factors
        let r3 = bowen_root(&sys, &pot, 3, &opts()).unwrap();
        assert!((r.s_n - r3.s_n).abs() < 1e-10);
    }
}
