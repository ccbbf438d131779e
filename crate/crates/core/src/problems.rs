//! Built-in problems with exact solutions, plus constructors for
//! user-defined Sylvester and Riccati problems.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::bounds::{riccati_bounds, BoundsError, BoundsOptions, RiccatiProblem};
use crate::integrator::{AffineStructure, CoefficientFn, IntegratorError, ProblemSpec};
use crate::matrix::Matrix;

pub const NAMES: [&str; 5] = ["guzman", "sylvester", "riccati", "zero", "scalar-exp"];

pub fn builtin(name: &str) -> Option<ProblemSpec> {
    match name {
        "guzman" => Some(guzman()),
        "sylvester" => Some(sylvester()),
        "riccati" => Some(riccati()),
        "zero" => Some(zero()),
        "scalar-exp" | "scalar_exp" => Some(scalar_exp()),
        _ => None,
    }
}

fn guzman_denominator(x: f64) -> f64 {
    5.0 + (2.0 * x).exp() + 2.0 * x.exp() * x.cos() - x.sin().powi(2)
}

/// Nonlinear two-component system on `[0, 1]` with solution
/// `(eˣ + cos x, π/2)ᵀ`, treated as a `2 x 1` matrix problem.
pub fn guzman() -> ProblemSpec {
    let f = |x: f64, y: &Matrix| {
        let (y1, y2) = (y[(0, 0)], y[(1, 0)]);
        Matrix::column(&[
            -1.0 + x.exp() - x.sin() + y2.sin(),
            1.0 / (4.0 + y1 * y1) - 1.0 / guzman_denominator(x),
        ])
    };
    ProblemSpec::new("guzman", (0.0, 1.0), Matrix::column(&[2.0, FRAC_PI_2]), f, 1.0)
        .expect("guzman problem is well formed")
        .with_df_dx(|x, _| {
            let num = 2.0 * (2.0 * x).exp() + 2.0 * x.exp() * x.cos()
                - 2.0 * x.exp() * x.sin()
                - 2.0 * x.cos() * x.sin();
            Matrix::column(&[x.exp() - x.cos(), num / guzman_denominator(x).powi(2)])
        })
        .with_df_dvec(|_, y| {
            let (y1, y2) = (y[(0, 0)], y[(1, 0)]);
            Matrix::column(&[0.0, -2.0 * y1 / (4.0 + y1 * y1).powi(2), y2.cos(), 0.0])
        })
        .with_exact(|x| Matrix::column(&[x.exp() + x.cos(), FRAC_PI_2]))
        .with_default_n(10)
}

fn sylvester_a(x: f64) -> Matrix {
    Matrix::from_rows(&[[0.0, x * (-x).exp()], [x, 0.0]])
}

fn sylvester_b(x: f64) -> Matrix {
    Matrix::from_rows(&[[0.0, x], [0.0, 0.0]])
}

fn sylvester_c(x: f64) -> Matrix {
    let e = (-x).exp();
    Matrix::from_rows(&[[-e * (1.0 + x * x), -2.0 * e * x], [1.0 - e * x, -x * x]])
}

fn sylvester_da(x: f64) -> Matrix {
    Matrix::from_rows(&[[0.0, (-x).exp() * (1.0 - x)], [1.0, 0.0]])
}

fn sylvester_db(_x: f64) -> Matrix {
    Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]])
}

fn sylvester_dc(x: f64) -> Matrix {
    let e = (-x).exp();
    Matrix::from_rows(&[
        [e * (1.0 - x).powi(2), 2.0 * e * (x - 1.0)],
        [e * (x - 1.0), -2.0 * x],
    ])
}

/// `∂(P Y + Y Q)/∂ vec Y` in stacked-block layout: block `(i, j)` is
/// `P E_ij + E_ij Q`.
pub fn affine_df_dvec(p: &Matrix, q: &Matrix, rows: usize, cols: usize) -> Matrix {
    let mut data = Vec::with_capacity(rows * cols * rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            let e = Matrix::from_fn(rows, cols, |r, c| if (r, c) == (i, j) { 1.0 } else { 0.0 });
            let block = p * &e + &e * q;
            data.extend_from_slice(block.as_slice());
        }
    }
    Matrix::new(rows * cols * rows, cols, data).expect("stacked blocks")
}

/// `Y'' = (A' + A²) Y + Y (B² + B') + 2 A Y B + A C + C B + C'`, the closed
/// form for the built-in Sylvester problem.
pub fn sylvester_second_derivative(x: f64, y: &Matrix) -> Matrix {
    let (a, b, c) = (sylvester_a(x), sylvester_b(x), sylvester_c(x));
    let left = &sylvester_da(x) + &(&a * &a);
    let right = &(&b * &b) + &sylvester_db(x);
    &left * y + y * &right + (&(&a * y) * &b).scale(2.0) + &a * &c + &c * &b + sylvester_dc(x)
}

/// `max |A(x) + B(x)|_F` over `[0, 1]` on a uniform grid, the quantity
/// behind the choice `L = 2`.
pub fn sylvester_coefficient_bound(grid_points: usize) -> f64 {
    let n = grid_points.max(2);
    (0..n)
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            (sylvester_a(x) + sylvester_b(x)).frobenius_norm()
        })
        .fold(0.0, f64::max)
}

/// `Y' = A Y + Y B + C` on `[0, 1]`, `Y(0) = I`, solution
/// `[[e⁻ˣ, 0], [x, 1]]`.
pub fn sylvester() -> ProblemSpec {
    let f = |x: f64, y: &Matrix| &sylvester_a(x) * y + y * &sylvester_b(x) + sylvester_c(x);
    ProblemSpec::new("sylvester", (0.0, 1.0), Matrix::identity(2), f, 2.0)
        .expect("sylvester problem is well formed")
        .with_df_dx(|x, y| &sylvester_da(x) * y + y * &sylvester_db(x) + sylvester_dc(x))
        .with_df_dvec(|x, _| affine_df_dvec(&sylvester_a(x), &sylvester_b(x), 2, 2))
        .with_exact(|x| Matrix::from_rows(&[[(-x).exp(), 0.0], [x, 1.0]]))
        .with_affine(AffineStructure {
            p: Arc::new(sylvester_a),
            q: Arc::new(sylvester_b),
            r: Arc::new(sylvester_c),
        })
        .with_default_n(10)
}

/// Affine problem `Y' = A Y + Y B + C` from coefficient functions.
///
/// `∂f/∂vec Y` is exact; `∂f/∂x` is left to the finite-difference fallback.
pub fn sylvester_from(
    name: &str,
    a: CoefficientFn,
    b: CoefficientFn,
    c: CoefficientFn,
    initial: Matrix,
    interval: (f64, f64),
    lipschitz: f64,
) -> Result<ProblemSpec, IntegratorError> {
    let (r, q) = initial.dims();
    let checks = [
        ("A", a(interval.0).dims(), (r, r)),
        ("B", b(interval.0).dims(), (q, q)),
        ("C", c(interval.0).dims(), (r, q)),
    ];
    for (operand, got, want) in checks {
        if got != want {
            return Err(IntegratorError::Contract {
                operand: operand.into(),
                detail: format!("expected {}x{}, got {}x{}", want.0, want.1, got.0, got.1),
            });
        }
    }
    let (fa, fb, fc) = (a.clone(), b.clone(), c.clone());
    let f = move |x: f64, y: &Matrix| &fa(x) * y + y * &fb(x) + fc(x);
    let (da, db) = (a.clone(), b.clone());
    Ok(ProblemSpec::new(name, interval, initial, f, lipschitz)?
        .with_df_dvec(move |x, _| affine_df_dvec(&da(x), &db(x), r, q))
        .with_affine(AffineStructure { p: a, q: b, r: c }))
}

fn riccati_a(x: f64) -> Matrix {
    Matrix::from_rows(&[[-x, 0.0], [-x, x]])
}

fn riccati_b(x: f64) -> Matrix {
    Matrix::from_rows(&[[-x * x, -2.0], [0.0, 1.0]])
}

fn riccati_c(x: f64) -> Matrix {
    let e = x.exp();
    Matrix::from_rows(&[
        [x * (-e + e * x - x.powi(3)), x * (2.0 * e - x * x)],
        [
            (1.0 - x) * x * (2.0 + x + 2.0 * x * x),
            1.0 + (3.0 - 2.0 * x) * x * x + e * (x - x.powi(4)),
        ],
    ])
}

fn riccati_d(x: f64) -> Matrix {
    Matrix::from_rows(&[[-1.0, -x * x], [x, x]])
}

/// Coefficients of the built-in Riccati problem, with the block constants
/// taken over `[0, 1]`.
pub fn riccati_coefficients() -> RiccatiProblem {
    RiccatiProblem::new(
        Arc::new(riccati_a),
        Arc::new(riccati_b),
        Arc::new(riccati_c),
        Arc::new(riccati_d),
        Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]),
        1.0,
    )
    .expect("riccati coefficients are well formed")
}

/// Interval end of the built-in Riccati integration.
pub const RICCATI_END: f64 = 0.1;

/// `Y' = C - D Y - Y A - Y B Y` on `[0, 0.1]`, solution `[[0, eˣ], [x², x]]`.
/// `L` comes from the Riccati bounds pipeline.
pub fn riccati() -> ProblemSpec {
    let coeffs = riccati_coefficients();
    let opts = BoundsOptions {
        solve_end: Some(RICCATI_END),
        ..Default::default()
    };
    let bounds = riccati_bounds(&coeffs, &opts).expect("riccati bounds are admissible");
    riccati_from("riccati", &coeffs, (0.0, RICCATI_END), bounds.lipschitz)
        .expect("riccati problem is well formed")
        .with_exact(|x| Matrix::from_rows(&[[0.0, x.exp()], [x * x, x]]))
        .with_default_n(10)
}

/// Riccati problem from coefficients; both partial derivatives use the
/// finite-difference fallback.
pub fn riccati_from(
    name: &str,
    coeffs: &RiccatiProblem,
    interval: (f64, f64),
    lipschitz: f64,
) -> Result<ProblemSpec, IntegratorError> {
    let this = coeffs.clone();
    ProblemSpec::new(name, interval, coeffs.y0.clone(), move |x, y| this.rhs(x, y), lipschitz)
}

/// L for a Riccati problem from the bounds pipeline, as a convenience for
/// callers that want the certified constant.
pub fn riccati_lipschitz(coeffs: &RiccatiProblem, solve_end: f64) -> Result<f64, BoundsError> {
    let opts = BoundsOptions {
        solve_end: Some(solve_end),
        ..Default::default()
    };
    Ok(riccati_bounds(coeffs, &opts)?.lipschitz)
}

pub fn zero() -> ProblemSpec {
    let initial = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
    let y = initial.clone();
    ProblemSpec::new("zero", (0.0, 1.0), initial, |_, _| Matrix::zeros(2, 2), 1.0)
        .expect("zero problem is well formed")
        .with_df_dx(|_, _| Matrix::zeros(2, 2))
        .with_df_dvec(|_, _| Matrix::zeros(8, 2))
        .with_exact(move |_| y.clone())
        .with_default_n(5)
}

/// `y' = y`, `y(0) = 1` on `[0, 1]`.
pub fn scalar_exp() -> ProblemSpec {
    ProblemSpec::new("scalar-exp", (0.0, 1.0), Matrix::identity(1), |_, y| y.clone(), 1.0)
        .expect("scalar problem is well formed")
        .with_df_dx(|_, _| Matrix::zeros(1, 1))
        .with_df_dvec(|_, _| Matrix::identity(1))
        .with_exact(|x| Matrix::from_rows(&[[x.exp()]]))
        .with_default_n(10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::second_derivative;

    #[test]
    fn registry_names_resolve() {
        for name in NAMES {
            let p = builtin(name).unwrap();
            assert_eq!(p.name, name);
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn guzman_initial_data() {
        let p = guzman();
        let f0 = p.rhs(0.0, &p.initial);
        assert!((&f0 - &Matrix::column(&[1.0, 0.0])).max_abs() < 1e-15);
        assert_eq!(p.exact_at(0.0).unwrap(), Matrix::column(&[2.0, FRAC_PI_2]));
        let ypp = second_derivative(&p, 0.0, &p.initial).unwrap();
        assert!(ypp.max_abs() < 1e-15);
    }

    #[test]
    fn sylvester_initial_data() {
        let p = sylvester();
        let f0 = p.rhs(0.0, &p.initial);
        assert_eq!(f0, Matrix::from_rows(&[[-1.0, 0.0], [1.0, 0.0]]));
        let ypp = second_derivative(&p, 0.0, &p.initial).unwrap();
        assert!((&ypp - &Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]])).max_abs() < 1e-15);
        let e1 = p.exact_at(1.0).unwrap();
        assert_eq!(e1, Matrix::from_rows(&[[(-1f64).exp(), 0.0], [1.0, 1.0]]));
        assert!((sylvester_coefficient_bound(1001) - 1.69443).abs() < 5e-6);
    }

    #[test]
    fn riccati_initial_slope_matches_exact_derivative() {
        let p = riccati();
        assert_eq!(p.exact_at(0.0).unwrap(), p.initial);
        let f0 = p.rhs(0.0, &p.initial);
        assert!((&f0 - &Matrix::from_rows(&[[0.0, 1.0], [0.0, 1.0]])).max_abs() < 1e-15);
        assert!((p.lipschitz - 55.2443).abs() < 1e-3);
        assert!((3.0 / p.lipschitz - 0.0543042).abs() < 5e-6);
        assert!(0.01 * p.lipschitz / 3.0 < 1.0);
    }

    #[test]
    fn zero_and_scalar() {
        let z = zero();
        assert_eq!(z.rhs(0.3, &z.initial), Matrix::zeros(2, 2));
        let s = scalar_exp();
        assert_eq!(s.exact_at(1.0).unwrap()[(0, 0)], 1f64.exp());
    }

    #[test]
    fn inline_sylvester_shape_checks() {
        let two: CoefficientFn = Arc::new(|_| Matrix::zeros(2, 2));
        let three: CoefficientFn = Arc::new(|_| Matrix::zeros(3, 3));
        let err = sylvester_from("bad", three, two.clone(), two, Matrix::identity(2), (0.0, 1.0), 1.0);
        assert!(err.is_err());
    }
}
