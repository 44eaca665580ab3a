//! Small numerical building blocks: compensated summation, streaming
//! log-sum-exp with a deterministic merge order, and a bisection driver
//! for strictly decreasing functions.

use crate::error::{Error, Result};

/// Kahan-compensated sum. Relative error stays near machine epsilon
/// even for millions of terms of equal sign.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Streaming log-sum-exp accumulator with running max-shift.
///
/// `merge` is associative up to rounding; callers that need bit-for-bit
/// reproducibility must merge partial accumulators in a fixed order,
/// which is what the chunked enumeration in `thermo` does.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    acc: KahanSum,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            acc: KahanSum::new(),
        }
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            if self.max > f64::NEG_INFINITY {
                let scale = (self.max - x).exp();
                let rescaled = self.acc.value() * scale;
                self.acc = KahanSum::new();
                self.acc.add(rescaled);
            }
            self.max = x;
            self.acc.add(1.0);
        } else {
            self.acc.add((x - self.max).exp());
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
            return;
        }
        if other.max > self.max {
            let scale = (self.max - other.max).exp();
            let rescaled = self.acc.value() * scale;
            self.acc = KahanSum::new();
            self.acc.add(rescaled);
            self.acc.add(other.acc.value());
            self.max = other.max;
        } else {
            self.acc.add(other.acc.value() * (other.max - self.max).exp());
        }
    }

    /// log of the accumulated sum of exponentials.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.value().ln()
        }
    }
}

/// Bisection for a strictly decreasing function `g` with `g(lo) >= 0 >= g(hi)`.
///
/// Terminates when `|g(mid)| <= residual_tol`; the stopping rule is on the
/// residual, not on the interval width, so the returned point genuinely
/// satisfies the target equation to the requested tolerance.
pub fn bisect_decreasing(
    mut g: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    residual_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    debug_assert!(residual_tol > 0.0);
    let glo = g(lo);
    if glo.abs() <= residual_tol {
        return Ok(lo);
    }
    let ghi = g(hi);
    if ghi.abs() <= residual_tol {
        return Ok(hi);
    }
    if glo < 0.0 || ghi > 0.0 {
        return Err(Error::BracketFailure(format!(
            "no sign change on [{lo}, {hi}]: g(lo)={glo}, g(hi)={ghi}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= residual_tol {
            return Ok(mid);
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            // Interval exhausted at f64 resolution; accept the midpoint if
            // the residual is within a small multiple of the tolerance.
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm.abs() <= residual_tol * 16.0 {
                return Ok(mid);
            }
            return Err(Error::BracketFailure(format!(
                "interval collapsed at {mid} with residual {gm} above tolerance {residual_tol}"
            )));
        }
    }
    Err(Error::BracketFailure(format!(
        "no convergence to residual {residual_tol} within {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_many_small_terms() {
        let n = 1_000_000;
        let x = 0.1f64;
        let s = kahan_sum(std::iter::repeat(x).take(n));
        assert!((s - 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn lse_matches_direct_small_case() {
        let xs = [0.5, 2.0, -1.0, 1.3];
        let mut lse = LogSumExp::new();
        for &x in &xs {
            lse.push(x);
        }
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((lse.value() - direct).abs() < 1e-14);
    }

    #[test]
    fn lse_handles_large_shifts() {
        let mut lse = LogSumExp::new();
        lse.push(1234.0);
        lse.push(1232.0);
        // log(e^1234 + e^1232) = 1234 + log1p(e^-2); naive exp() would overflow
        let expected = 1234.0 + (-2.0f64).exp().ln_1p();
        assert!((lse.value() - expected).abs() < 1e-12);
    }

    #[test]
    fn lse_merge_matches_single_stream() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64) * 0.37 - 20.0).collect();
        let mut whole = LogSumExp::new();
        for &x in &xs {
            whole.push(x);
        }
        let mut a = LogSumExp::new();
        let mut b = LogSumExp::new();
        for &x in &xs[..40] {
            a.push(x);
        }
        for &x in &xs[40..] {
            b.push(x);
        }
        a.merge(&b);
        assert!((whole.value() - a.value()).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_root_of_decreasing_function() {
        // g(s) = 2 * 4^{-s} - 1, root at s = 1/2
        let root = bisect_decreasing(|s| 2.0 * (-s * 4.0f64.ln()).exp() - 1.0, 0.0, 2.0, 1e-13, 200)
            .unwrap();
        assert!((root - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        let err = bisect_decreasing(|s| s + 1.0, 0.0, 1.0, 1e-12, 100);
        assert!(err.is_err());
    }
}
