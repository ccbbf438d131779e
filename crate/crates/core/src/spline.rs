//! Piecewise matrix-cubic splines on a uniform partition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("x = {x} lies outside the spline interval [{a}, {b}]")]
    OutOfRange { x: f64, a: f64, b: f64 },
    #[error("derivative order {0} not supported (expected 0, 1 or 2)")]
    BadOrder(usize),
    #[error("invalid spline: {0}")]
    Invalid(String),
}

/// One cubic piece `c0 + c1 t + c2 t² + c3 t³`, `t = x - x_left`, on
/// `[x_left, x_left + h]`.
///
/// In Taylor form `c1 = S'`, `c2 = S''/2` and `c3 = A/6` at the left knot,
/// where `A` is the segment's free cubic parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSegment {
    pub x_left: f64,
    pub h: f64,
    pub c0: Matrix,
    pub c1: Matrix,
    pub c2: Matrix,
    pub c3: Matrix,
}

impl SplineSegment {
    /// Builds a segment from Taylor data at the left knot and the cubic
    /// parameter `a_k` (the third derivative).
    pub fn from_taylor(x_left: f64, h: f64, value: &Matrix, slope: &Matrix, curvature: &Matrix, a_k: &Matrix) -> Self {
        SplineSegment {
            x_left,
            h,
            c0: value.clone(),
            c1: slope.clone(),
            c2: curvature.scale(0.5),
            c3: a_k.scale(1.0 / 6.0),
        }
    }

    pub fn x_right(&self) -> f64 {
        self.x_left + self.h
    }

    /// Evaluates the segment (or its first/second derivative) at local
    /// offset `t = x - x_left`.
    pub fn eval_local(&self, t: f64, order: usize) -> Result<Matrix, SplineError> {
        let (c0, c1, c2, c3) = (&self.c0, &self.c1, &self.c2, &self.c3);
        // Horner in t
        Ok(match order {
            0 => c0.add_scaled(&c1.add_scaled(&c2.add_scaled(c3, t), t), t),
            1 => c1.add_scaled(&c2.scale(2.0).add_scaled(&c3.scale(3.0), t), t),
            2 => c2.scale(2.0).add_scaled(c3, 6.0 * t),
            k => return Err(SplineError::BadOrder(k)),
        })
    }

    /// The free cubic parameter `A_k = 6 c3`.
    pub fn cubic_parameter(&self) -> Matrix {
        self.c3.scale(6.0)
    }

    /// Coefficients in powers of `x` (not `x - x_left`), as printed in
    /// tables of global-basis polynomials.
    pub fn global_coefficients(&self) -> [Matrix; 4] {
        let s = self.x_left;
        let (c0, c1, c2, c3) = (&self.c0, &self.c1, &self.c2, &self.c3);
        // expand c0 + c1 (x-s) + c2 (x-s)^2 + c3 (x-s)^3
        let g0 = c0.add_scaled(c1, -s).add_scaled(c2, s * s).add_scaled(c3, -s * s * s);
        let g1 = c1.add_scaled(c2, -2.0 * s).add_scaled(c3, 3.0 * s * s);
        let g2 = c2.add_scaled(c3, -3.0 * s);
        [g0, g1, g2, c3.clone()]
    }

    pub fn max_coefficient_norm(&self) -> f64 {
        [&self.c0, &self.c1, &self.c2, &self.c3]
            .iter()
            .map(|c| c.frobenius_norm())
            .fold(0.0, f64::max)
    }
}

/// Maximum jump across interior knots in value, first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotMismatch {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl KnotMismatch {
    pub fn max(&self) -> f64 {
        self.value.max(self.first).max(self.second)
    }
}

/// Matrix-cubic spline over the uniform partition `a + k h`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpline")]
pub struct MatrixSpline {
    a: f64,
    b: f64,
    n: usize,
    segments: Vec<SplineSegment>,
}

#[derive(Deserialize)]
struct RawSpline {
    a: f64,
    b: f64,
    n: usize,
    segments: Vec<SplineSegment>,
}

impl TryFrom<RawSpline> for MatrixSpline {
    type Error = SplineError;

    fn try_from(raw: RawSpline) -> Result<Self, Self::Error> {
        let spline = MatrixSpline::new(raw.a, raw.b, raw.segments)?;
        if spline.n != raw.n {
            return Err(SplineError::Invalid(format!(
                "n = {} but {} segments present",
                raw.n, spline.n
            )));
        }
        Ok(spline)
    }
}

impl MatrixSpline {
    /// Assembles a spline, checking that segments tile `[a, b]` uniformly
    /// and share dimensions.
    pub fn new(a: f64, b: f64, segments: Vec<SplineSegment>) -> Result<Self, SplineError> {
        if !(a < b) {
            return Err(SplineError::Invalid(format!("interval [{a}, {b}] is empty")));
        }
        let n = segments.len();
        if n == 0 {
            return Err(SplineError::Invalid("no segments".into()));
        }
        let h = (b - a) / n as f64;
        let dims = segments[0].c0.dims();
        for (k, seg) in segments.iter().enumerate() {
            let knot = a + k as f64 * h;
            let scale = (b - a).abs().max(1.0);
            if (seg.x_left - knot).abs() > 1e-9 * scale || (seg.h - h).abs() > 1e-9 * scale {
                return Err(SplineError::Invalid(format!(
                    "segment {k} covers [{}, {}], expected [{knot}, {}]",
                    seg.x_left,
                    seg.x_right(),
                    knot + h
                )));
            }
            if [&seg.c0, &seg.c1, &seg.c2, &seg.c3].iter().any(|c| c.dims() != dims) {
                return Err(SplineError::Invalid(format!(
                    "segment {k} coefficient dimensions differ"
                )));
            }
        }
        Ok(MatrixSpline { a, b, n, segments })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn dims(&self) -> (usize, usize) {
        self.segments[0].c0.dims()
    }

    pub fn segments(&self) -> &[SplineSegment] {
        &self.segments
    }

    pub fn knot(&self, k: usize) -> f64 {
        if k == self.n {
            self.b
        } else {
            self.a + k as f64 * self.h()
        }
    }

    /// Index of the segment owning `x`: half-open `[x_k, x_{k+1})`, with the
    /// last one closed at `b`.
    pub fn segment_index(&self, x: f64) -> Result<usize, SplineError> {
        if !(self.a..=self.b).contains(&x) {
            return Err(SplineError::OutOfRange {
                x,
                a: self.a,
                b: self.b,
            });
        }
        let k = ((x - self.a) / self.h()).floor();
        Ok((k.max(0.0) as usize).min(self.n - 1))
    }

    /// `S(x)`, `S'(x)` or `S''(x)` for `order` 0, 1, 2.
    pub fn eval(&self, x: f64, order: usize) -> Result<Matrix, SplineError> {
        if order > 2 {
            return Err(SplineError::BadOrder(order));
        }
        let seg = &self.segments[self.segment_index(x)?];
        seg.eval_local(x - seg.x_left, order)
    }

    /// Largest Frobenius-norm jump in `S`, `S'`, `S''` over interior knots.
    pub fn knot_mismatch(&self) -> KnotMismatch {
        let mut out = KnotMismatch {
            value: 0.0,
            first: 0.0,
            second: 0.0,
        };
        for pair in self.segments.windows(2) {
            let (left, right) = (&pair[0], &pair[1]);
            let jump = |order| {
                let l = left.eval_local(left.h, order).expect("order <= 2");
                let r = right.eval_local(0.0, order).expect("order <= 2");
                (&l - &r).frobenius_norm()
            };
            out.value = out.value.max(jump(0));
            out.first = out.first.max(jump(1));
            out.second = out.second.max(jump(2));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(x_left: f64, h: f64, c: [f64; 4]) -> SplineSegment {
        let m = |v: f64| Matrix::from_rows(&[[v]]);
        SplineSegment {
            x_left,
            h,
            c0: m(c[0]),
            c1: m(c[1]),
            c2: m(c[2]),
            c3: m(c[3]),
        }
    }

    #[test]
    fn eval_at_left_knot_is_c0() {
        let s = MatrixSpline::new(0.0, 1.0, vec![segment(0.0, 1.0, [3.0, 1.0, 2.0, 5.0])]).unwrap();
        assert_eq!(s.eval(0.0, 0).unwrap()[(0, 0)], 3.0);
        assert_eq!(s.eval(0.0, 1).unwrap()[(0, 0)], 1.0);
        assert_eq!(s.eval(0.0, 2).unwrap()[(0, 0)], 4.0);
        // 3 + 0.5 + 0.5 + 0.625
        assert_eq!(s.eval(0.5, 0).unwrap()[(0, 0)], 4.625);
        assert!(matches!(s.eval(0.5, 3), Err(SplineError::BadOrder(3))));
    }

    #[test]
    fn table_one_first_segment_value() {
        // first component of the guzman segment on [0, 0.1]
        let seg = segment(0.0, 0.1, [2.0, 1.0, 0.0, 0.177917]);
        let s = MatrixSpline::new(0.0, 0.1, vec![seg]).unwrap();
        let v = s.eval(0.1, 0).unwrap()[(0, 0)];
        assert!((v - 2.10018).abs() < 5e-6);
    }

    #[test]
    fn out_of_range_rejected() {
        let s = MatrixSpline::new(0.0, 1.0, vec![segment(0.0, 1.0, [0.0; 4])]).unwrap();
        assert!(matches!(s.eval(-1e-9, 0), Err(SplineError::OutOfRange { .. })));
        assert!(matches!(s.eval(1.0 + 1e-9, 0), Err(SplineError::OutOfRange { .. })));
        assert!(s.eval(1.0, 0).is_ok());
    }

    #[test]
    fn segment_lookup_is_half_open() {
        let s = MatrixSpline::new(
            0.0,
            1.0,
            vec![segment(0.0, 0.5, [1.0, 0.0, 0.0, 0.0]), segment(0.5, 0.5, [2.0, 0.0, 0.0, 0.0])],
        )
        .unwrap();
        assert_eq!(s.segment_index(0.5).unwrap(), 1);
        assert_eq!(s.segment_index(1.0).unwrap(), 1);
        assert_eq!(s.eval(0.4999, 0).unwrap()[(0, 0)], 1.0);
        assert_eq!(s.eval(0.5, 0).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn knot_mismatch_detects_value_offset() {
        let s = MatrixSpline::new(
            0.0,
            2.0,
            vec![segment(0.0, 1.0, [0.0, 1.0, 0.0, 0.0]), segment(1.0, 1.0, [2.0, 1.0, 0.0, 0.0])],
        )
        .unwrap();
        let m = s.knot_mismatch();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.first, 0.0);
        assert_eq!(m.second, 0.0);
    }

    #[test]
    fn global_coefficients_expand_shift() {
        let seg = segment(0.5, 0.5, [1.0, -2.0, 3.0, 4.0]);
        let g = seg.global_coefficients();
        for x in [0.5f64, 0.7, 1.0] {
            let t = x - 0.5;
            let local = 1.0 - 2.0 * t + 3.0 * t * t + 4.0 * t * t * t;
            let global: f64 = (0..4).map(|p| g[p][(0, 0)] * x.powi(p as i32)).sum();
            assert!((local - global).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_uniform_partition() {
        let err = MatrixSpline::new(
            0.0,
            1.0,
            vec![segment(0.0, 0.4, [0.0; 4]), segment(0.4, 0.6, [0.0; 4])],
        );
        assert!(err.is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = MatrixSpline::new(
            0.0,
            1.0,
            vec![segment(0.0, 0.5, [1.0, 0.1, 0.2, 0.3]), segment(0.5, 0.5, [2.0, 1.0 / 3.0, 0.0, 1e-17])],
        )
        .unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: MatrixSpline = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
