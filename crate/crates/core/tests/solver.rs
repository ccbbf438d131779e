mod common;

use common::{rk4, run_default};
use matspline::integrator::{error_report, integrate, second_derivative, IntegratorError, Mode, SolverConfig};
use matspline::matrix::Matrix;
use matspline::problems;

fn derivative_fd(f: impl Fn(f64) -> Matrix, x: f64) -> Matrix {
    let h = 1e-6;
    (&f(x + h) - &f(x - h)).scale(0.5 / h)
}

#[test]
fn exact_solutions_satisfy_their_equations() {
    for name in problems::NAMES {
        let p = problems::builtin(name).unwrap();
        let exact = p.exact.clone().unwrap();
        for j in 0..10 {
            let x = p.a + (p.b - p.a) * (j as f64 + 0.5) / 10.0;
            let lhs = derivative_fd(|t| exact(t), x);
            let rhs = p.rhs(x, &exact(x));
            let gap = (&lhs - &rhs).frobenius_norm();
            assert!(gap < 1e-7 * (1.0 + rhs.frobenius_norm()), "{name} at {x}: {gap:e}");
        }
        assert!((&exact(p.a) - &p.initial).max_abs() < 1e-14, "{name}: initial value");
    }
}

#[test]
fn guzman_jacobian_matches_finite_differences() {
    let p = problems::guzman();
    let dfdv = p.df_dvec.clone().unwrap();
    let y = Matrix::from_rows(&[vec![2.3], vec![1.4]]);
    let x = 0.37;
    let jac = dfdv(x, &y);
    let (r, q) = y.dims();
    let eps = 1e-6;
    for i in 0..r * q {
        let mut up = y.vec();
        let mut down = y.vec();
        up[(i, 0)] += eps;
        down[(i, 0)] -= eps;
        let col = (&p.rhs(x, &Matrix::unvec(&up, r, q).unwrap()) - &p.rhs(x, &Matrix::unvec(&down, r, q).unwrap()))
            .scale(0.5 / eps);
        // column i of ∂vec f/∂vec Y, laid out as the i-th r×q block
        let block = Matrix::from_fn(r, q, |a, b| jac[(i * r + a, b)]);
        assert!((&block - &col).max_abs() < 1e-7, "column {i}");
    }
}

#[test]
fn sylvester_closed_form_second_derivative() {
    let p = problems::sylvester();
    let exact = p.exact.clone().unwrap();
    for j in 0..10 {
        let x = 0.05 + 0.1 * j as f64;
        let y = exact(x);
        let generic = second_derivative(&p, x, &y).unwrap();
        let closed = problems::sylvester_second_derivative(x, &y);
        assert!((&generic - &closed).max_abs() < 1e-6, "x = {x}");
    }
}

#[test]
fn modes_agree_and_direct_is_default_for_affine() {
    let p = problems::sylvester();
    let auto = integrate(&p, &SolverConfig::with_h(0.1)).unwrap();
    assert_eq!(auto.mode, Mode::DirectAffine);
    let fp = integrate(&p, &SolverConfig::with_h(0.1).mode(Mode::FixedPoint)).unwrap();
    for (a, b) in auto.spline.segments().iter().zip(fp.spline.segments()) {
        assert!((&a.c3 - &b.c3).max_abs() < 1e-11);
    }
    assert!(fp.iterations.iter().all(|&n| n > 0));
    assert!(auto.iterations.iter().all(|&n| n == 0));
}

#[test]
fn direct_affine_rejected_for_nonlinear_problem() {
    let err = integrate(&problems::guzman(), &SolverConfig::with_h(0.1).mode(Mode::DirectAffine)).unwrap_err();
    assert!(matches!(err, IntegratorError::NotAffine), "{err}");
}

#[test]
fn step_condition_is_strict() {
    let p = problems::riccati();
    let err = integrate(&p, &SolverConfig::with_n(1)).unwrap_err();
    assert!(matches!(err, IntegratorError::StepCondition { .. }));
    assert!(err.to_string().contains("exceeds 3/L"));
    let cfg = SolverConfig {
        override_step_condition: true,
        ..SolverConfig::with_n(1)
    };
    assert!(integrate(&p, &cfg).is_ok());
}

#[test]
fn endpoint_matches_rk4_oracle() {
    for name in problems::NAMES {
        let p = problems::builtin(name).unwrap();
        let run = run_default(&p);
        let exact = p.exact.clone().unwrap();
        let max_err = error_report(&run.spline, |x| exact(x), 101)
            .iter()
            .map(|e| e.max_error)
            .fold(0.0, f64::max);
        let end = run.spline.eval(p.b, 0).unwrap();
        let oracle = rk4(&p, 100 * run.spline.n());
        assert!((&end - &oracle).frobenius_norm() <= 10.0 * max_err, "{name}");
    }
}

#[test]
fn zero_problem_is_exact() {
    let p = problems::zero();
    let run = run_default(&p);
    for seg in run.spline.segments() {
        assert_eq!(seg.c0, p.initial);
        assert_eq!(seg.c3.max_abs(), 0.0);
    }
}

#[test]
fn error_shrinks_sixteenfold_per_halving() {
    let p = problems::guzman();
    let exact = p.exact.clone().unwrap();
    let err = |h: f64| {
        let run = integrate(&p, &SolverConfig::with_h(h)).unwrap();
        error_report(&run.spline, |x| exact(x), 101).iter().map(|e| e.max_error).fold(0.0, f64::max)
    };
    let ratio = err(0.05) / err(0.025);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}
