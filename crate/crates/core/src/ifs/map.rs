//! Composed branch maps carried along cylinder enumeration.
//!
//! Affine compositions stay affine and are tracked as `(a, c)` with
//! `x |-> a x + c`. Compositions of digit branches `x |-> 1/(d + x)` are
//! tracked as integer 2x2 matrices acting as fractional linear maps; the
//! integer entries make cylinder endpoints and diameters exact.

use crate::error::{Error, Result};

/// Integer fractional-linear map `x |-> (m00 x + m01) / (m10 x + m11)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mat2 {
    pub m: [i128; 4],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { m: [1, 0, 0, 1] };

    /// Matrix of the branch `x |-> 1/(d + x)`.
    pub fn digit(d: u32) -> Mat2 {
        Mat2 {
            m: [0, 1, 1, d as i128],
        }
    }

    pub fn mul(&self, rhs: &Mat2) -> Result<Mat2> {
        let a = &self.m;
        let b = &rhs.m;
        let e = |x: Option<i128>| x.ok_or_else(|| Error::Overflow("map composition".into()));
        Ok(Mat2 {
            m: [
                e(a[0].checked_mul(b[0]).and_then(|p| p.checked_add(a[1].checked_mul(b[2])?)))?,
                e(a[0].checked_mul(b[1]).and_then(|p| p.checked_add(a[1].checked_mul(b[3])?)))?,
                e(a[2].checked_mul(b[0]).and_then(|p| p.checked_add(a[3].checked_mul(b[2])?)))?,
                e(a[2].checked_mul(b[1]).and_then(|p| p.checked_add(a[3].checked_mul(b[3])?)))?,
            ],
        })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let [p, pp, q, qp] = self.m;
        (p as f64 * x + pp as f64) / (q as f64 * x + qp as f64)
    }

    /// |derivative| at `x`; the determinant of digit-branch products is +-1.
    #[inline]
    pub fn deriv_abs(&self, x: f64) -> f64 {
        let [p, pp, q, qp] = self.m;
        let det = (p * qp - pp * q) as f64;
        let den = q as f64 * x + qp as f64;
        det.abs() / (den * den)
    }

    #[inline]
    pub fn log_deriv_abs(&self, x: f64) -> f64 {
        let [p, pp, q, qp] = self.m;
        let det = (p * qp - pp * q) as f64;
        let den = q as f64 * x + qp as f64;
        det.abs().ln() - 2.0 * den.abs().ln()
    }

    /// Exact diameter of the image of [0,1], as |det| / (m11 (m10 + m11)),
    /// converted to f64 at the end.
    pub fn image_diameter(&self) -> f64 {
        let [p, pp, q, qp] = self.m;
        let det = (p * qp - pp * q).unsigned_abs() as f64;
        det / (qp as f64 * (q + qp) as f64)
    }

    /// Fixed point in [0,1] of the map, i.e. the positive root of
    /// `m10 x^2 + (m11 - m00) x - m01 = 0`.
    pub fn fixed_point(&self) -> f64 {
        let [p, pp, q, qp] = self.m;
        let a = q as f64;
        let b = (qp - p) as f64;
        let c = -(pp as f64);
        if a == 0.0 {
            // affine degenerate case (identity never reaches here for words >= 1)
            return -c / b;
        }
        let disc = (b * b - 4.0 * a * c).sqrt();
        (-b + disc) / (2.0 * a)
    }
}

/// Running composition state for a word, specialized by branch family.
#[derive(Clone, Debug)]
pub enum ComposedMap {
    Affine { a: f64, c: f64 },
    Moebius(Mat2),
    /// Fallback for systems with callback branches: compositions are
    /// evaluated by folding the word right-to-left on demand.
    General,
}

impl ComposedMap {
    pub fn identity_affine() -> Self {
        ComposedMap::Affine { a: 1.0, c: 0.0 }
    }

    pub fn identity_moebius() -> Self {
        ComposedMap::Moebius(Mat2::IDENTITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_matrices_compose_to_convergents() {
        // [2,3] -> (x + 3) / (2x + 7), so phi(0) = 3/7
        let m = Mat2::digit(2).mul(&Mat2::digit(3)).unwrap();
        assert_eq!(m.m, [1, 3, 2, 7]);
        assert!((m.apply(0.0) - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn golden_ratio_fixed_point() {
        let m = Mat2::digit(1);
        let x = m.fixed_point();
        assert!((x - (5.0f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        // |phi_1'(x*)| = 1/(1+x*)^2 = (3 - sqrt 5)/2
        let d = m.deriv_abs(x);
        assert!((d - (3.0 - 5.0f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn image_diameter_is_exact_rational_value() {
        // word (2,2): image [2/5, 3/7], diameter 1/35
        let m = Mat2::digit(2).mul(&Mat2::digit(2)).unwrap();
        assert!((m.image_diameter() - 1.0 / 35.0).abs() < 1e-16);
    }
}
