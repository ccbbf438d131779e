#![allow(dead_code)]

use matspline::integrator::{integrate, Integration, ProblemSpec, SolverConfig, TaylorState};
use matspline::spline::SplineSegment;
use matspline::Matrix;

/// Classical fourth-order Runge-Kutta with `steps` uniform steps.
pub fn rk4(p: &ProblemSpec, steps: usize) -> Matrix {
    let h = (p.b - p.a) / steps as f64;
    let mut y = p.initial.clone();
    for k in 0..steps {
        let x = p.a + k as f64 * h;
        let k1 = p.rhs(x, &y);
        let k2 = p.rhs(x + h / 2.0, &(&y + &k1.scale(h / 2.0)));
        let k3 = p.rhs(x + h / 2.0, &(&y + &k2.scale(h / 2.0)));
        let k4 = p.rhs(x + h, &(&y + &k3.scale(h)));
        let incr = (&(&k1 + &k2.scale(2.0)) + &(&k3.scale(2.0) + &k4)).scale(h / 6.0);
        y = &y + &incr;
    }
    y
}

pub fn run_default(p: &ProblemSpec) -> Integration {
    integrate(p, &SolverConfig::default()).expect("integration succeeds")
}

pub fn taylor_state(seg: &SplineSegment) -> TaylorState {
    TaylorState {
        x: seg.x_left,
        value: seg.c0.clone(),
        slope: seg.c1.clone(),
        curvature: seg.c2.scale(2.0),
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

/// Rounds to `digits` significant figures.
pub fn round_sig(v: f64, digits: i32) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(digits - 1 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}
