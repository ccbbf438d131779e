//! Matrix-cubic spline integration of `Y'(x) = f(x, Y(x))`, `Y(a) = Y_a`.
//!
//! On every segment `[x_k, x_k + h]` the spline is the degree-two Taylor
//! polynomial of the previous segment at `x_k`, plus a free cubic term
//! `A_k (x - x_k)³ / 6`. `A_k` is fixed by collocating the ODE at the right
//! knot, which is the fixed-point equation `A_k = g(A_k)` with
//!
//! ```text
//! g(T) = (2/h²) [ f(x_k + h, S_k + S'_k h + S''_k h²/2 + T h³/6) - S'_k - S''_k h ]
//! ```
//!
//! For a Lipschitz constant `L`, `g` contracts with factor `hL/3`, so the
//! step must satisfy `h < 3/L`. The first segment starts from
//! `(Y_a, f(a, Y_a), Y''(a))`, with `Y''(a)` from the matrix chain rule
//! (see [`second_derivative`]).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::matrix::{solve_sylvester, Matrix, MatrixError};
use crate::spline::{MatrixSpline, SplineError, SplineSegment};

pub type MatrixFn = Arc<dyn Fn(f64, &Matrix) -> Matrix + Send + Sync>;
pub type CoefficientFn = Arc<dyn Fn(f64) -> Matrix + Send + Sync>;

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("contract violation in {operand}: {detail}")]
    Contract { operand: String, detail: String },
    #[error("h exceeds 3/L: h = {h}, 3/L = {limit} (L = {lipschitz}); use a smaller step or the override flag")]
    StepCondition { h: f64, lipschitz: f64, limit: f64 },
    #[error("invalid step: {0}")]
    BadStep(String),
    #[error("fixed-point iteration did not converge{} after {iterations} iterations (last residual {residual:e}); h may be too large relative to 3/L", segment_suffix(*.segment))]
    NotConverged {
        segment: Option<usize>,
        iterations: usize,
        residual: f64,
    },
    #[error("singular Sylvester system{} ({source}); try a smaller h", segment_suffix(*.segment))]
    Singular {
        segment: Option<usize>,
        #[source]
        source: MatrixError,
    },
    #[error("direct-affine mode requires a problem with registered affine structure")]
    NotAffine,
    #[error("problem lacks analytic derivatives and the finite-difference fallback is disabled")]
    MissingDerivatives,
    #[error("problem has no exact solution")]
    MissingExact,
    #[error(transparent)]
    Spline(#[from] SplineError),
}

fn segment_suffix(segment: Option<usize>) -> String {
    segment.map(|k| format!(" on segment {k}")).unwrap_or_default()
}

/// `f(x, Y) = P(x) Y + Y Q(x) + R(x)`.
#[derive(Clone)]
pub struct AffineStructure {
    pub p: CoefficientFn,
    pub q: CoefficientFn,
    pub r: CoefficientFn,
}

/// An initial value problem together with the data the method needs.
///
/// `df_dvec` uses the stacked layout: `r·q` blocks of size `r x q`, block `m`
/// holding `∂f/∂(vec Y)_m`, giving an `(r·r·q) x q` matrix.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub initial: Matrix,
    pub f: MatrixFn,
    pub df_dx: Option<MatrixFn>,
    pub df_dvec: Option<MatrixFn>,
    pub lipschitz: f64,
    pub exact: Option<CoefficientFn>,
    pub affine: Option<AffineStructure>,
    /// Segment count used when a caller gives neither `n` nor `h`.
    pub default_n: usize,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("interval", &(self.a, self.b))
            .field("initial", &self.initial)
            .field("lipschitz", &self.lipschitz)
            .field("analytic_derivatives", &self.has_analytic_derivatives())
            .field("exact", &self.exact.is_some())
            .field("affine", &self.affine.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        (a, b): (f64, f64),
        initial: Matrix,
        f: impl Fn(f64, &Matrix) -> Matrix + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Result<Self, IntegratorError> {
        let name = name.into();
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(IntegratorError::Contract {
                operand: "interval".into(),
                detail: format!("need finite a < b, got [{a}, {b}]"),
            });
        }
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(IntegratorError::Contract {
                operand: "L".into(),
                detail: format!("Lipschitz constant must be positive, got {lipschitz}"),
            });
        }
        let f: MatrixFn = Arc::new(f);
        let probe = f(a, &initial);
        check_dims("f(a, Y_a)", &probe, initial.dims())?;
        Ok(ProblemSpec {
            name,
            a,
            b,
            initial,
            f,
            df_dx: None,
            df_dvec: None,
            lipschitz,
            exact: None,
            affine: None,
            default_n: 10,
        })
    }

    pub fn with_df_dx(mut self, g: impl Fn(f64, &Matrix) -> Matrix + Send + Sync + 'static) -> Self {
        self.df_dx = Some(Arc::new(g));
        self
    }

    pub fn with_df_dvec(mut self, g: impl Fn(f64, &Matrix) -> Matrix + Send + Sync + 'static) -> Self {
        self.df_dvec = Some(Arc::new(g));
        self
    }

    pub fn with_exact(mut self, y: impl Fn(f64) -> Matrix + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(y));
        self
    }

    pub fn with_affine(mut self, affine: AffineStructure) -> Self {
        self.affine = Some(affine);
        self
    }

    pub fn with_default_n(mut self, n: usize) -> Self {
        self.default_n = n.max(1);
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        self.initial.dims()
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.df_dx.is_some() && self.df_dvec.is_some()
    }

    pub fn rhs(&self, x: f64, y: &Matrix) -> Matrix {
        (self.f)(x, y)
    }

    pub fn exact_at(&self, x: f64) -> Result<Matrix, IntegratorError> {
        self.exact
            .as_ref()
            .map(|y| y(x))
            .ok_or(IntegratorError::MissingExact)
    }
}

fn check_dims(operand: &str, m: &Matrix, expected: (usize, usize)) -> Result<(), IntegratorError> {
    if m.dims() != expected {
        return Err(IntegratorError::Contract {
            operand: operand.into(),
            detail: format!(
                "expected {}x{}, got {}x{}",
                expected.0,
                expected.1,
                m.rows(),
                m.cols()
            ),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Segments(usize),
    Width(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FixedPoint,
    DirectAffine,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::FixedPoint => "fixed-point",
            Mode::DirectAffine => "direct-affine",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed-point" => Ok(Mode::FixedPoint),
            "direct-affine" => Ok(Mode::DirectAffine),
            other => Err(format!("unknown mode `{other}` (expected fixed-point or direct-affine)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// `None` uses the problem's default segment count.
    pub step: Option<Step>,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// `None` picks direct-affine for affine problems, fixed-point otherwise.
    pub mode: Option<Mode>,
    pub samples_per_interval: usize,
    /// Skip the `h L / 3 < 1` check.
    pub override_step_condition: bool,
    pub finite_difference_fallback: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: None,
            fp_tol: 1e-13,
            fp_max_iter: 200,
            mode: None,
            samples_per_interval: 101,
            override_step_condition: false,
            finite_difference_fallback: true,
        }
    }
}

impl SolverConfig {
    pub fn with_n(n: usize) -> Self {
        SolverConfig {
            step: Some(Step::Segments(n)),
            ..Default::default()
        }
    }

    pub fn with_h(h: f64) -> Self {
        SolverConfig {
            step: Some(Step::Width(h)),
            ..Default::default()
        }
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = Some(mode);
        self
    }

    /// Number of segments for `[a, b]`; a width must divide the interval.
    pub fn segments_for(&self, p: &ProblemSpec) -> Result<usize, IntegratorError> {
        match self.step.unwrap_or(Step::Segments(p.default_n)) {
            Step::Segments(0) => Err(IntegratorError::BadStep("n must be positive".into())),
            Step::Segments(n) => Ok(n),
            Step::Width(h) => {
                if !(h > 0.0) || !h.is_finite() {
                    return Err(IntegratorError::BadStep(format!("h must be positive, got {h}")));
                }
                let len = p.b - p.a;
                let n = (len / h).round();
                if n < 1.0 || (n * h - len).abs() > 1e-9 * len {
                    return Err(IntegratorError::BadStep(format!(
                        "h = {h} does not divide [{}, {}] into whole segments",
                        p.a, p.b
                    )));
                }
                Ok(n as usize)
            }
        }
    }
}

/// Taylor data of the spline at a left knot.
#[derive(Debug, Clone)]
pub struct TaylorState {
    pub x: f64,
    pub value: Matrix,
    pub slope: Matrix,
    pub curvature: Matrix,
}

/// `Y''(x) = ∂f/∂x + ([vec f(x, Y)]ᵀ ⊗ I_r) ∂f/∂vec Y`.
///
/// Missing partial derivatives are replaced by centred finite differences.
pub fn second_derivative(p: &ProblemSpec, x: f64, y: &Matrix) -> Result<Matrix, IntegratorError> {
    let (r, q) = p.dims();
    check_dims("Y", y, (r, q))?;
    let fxy = p.rhs(x, y);
    check_dims("f(x, Y)", &fxy, (r, q))?;

    let dfdx = match &p.df_dx {
        Some(d) => d(x, y),
        None => fd_df_dx(p, x, y),
    };
    check_dims("df_dx", &dfdx, (r, q))?;

    let dfdvec = match &p.df_dvec {
        Some(d) => d(x, y),
        None => fd_df_dvec(p, x, y),
    };
    check_dims("df_dvecY", &dfdvec, (r * r * q, q))?;

    let coupling = fxy.vec().transpose().kron(&Matrix::identity(r));
    Ok(&dfdx + &coupling.matmul(&dfdvec))
}

fn fd_step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

fn fd_df_dx(p: &ProblemSpec, x: f64, y: &Matrix) -> Matrix {
    let s = fd_step(x);
    (p.rhs(x + s, y) - p.rhs(x - s, y)).scale(0.5 / s)
}

fn fd_df_dvec(p: &ProblemSpec, x: f64, y: &Matrix) -> Matrix {
    let (r, q) = y.dims();
    let mut blocks: Vec<f64> = Vec::with_capacity(r * q * r * q);
    // block order follows vec: column-major over the entries of Y
    for j in 0..q {
        for i in 0..r {
            let s = fd_step(y[(i, j)]);
            let mut plus = y.clone();
            plus[(i, j)] += s;
            let mut minus = y.clone();
            minus[(i, j)] -= s;
            let block = (p.rhs(x, &plus) - p.rhs(x, &minus)).scale(0.5 / s);
            blocks.extend_from_slice(block.as_slice());
        }
    }
    Matrix::new(r * q * r, q, blocks).expect("stacked blocks")
}

/// The collocation map `g` of the segment starting at `state` with width `h`.
pub fn segment_map<'p>(p: &'p ProblemSpec, state: &TaylorState, h: f64) -> impl Fn(&Matrix) -> Matrix + 'p {
    let x_next = state.x + h;
    let base = state
        .value
        .add_scaled(&state.slope, h)
        .add_scaled(&state.curvature, 0.5 * h * h);
    let subtract = state.slope.add_scaled(&state.curvature, h);
    let cube = h * h * h / 6.0;
    let factor = 2.0 / (h * h);
    move |t: &Matrix| (p.rhs(x_next, &base.add_scaled(t, cube)) - &subtract).scale(factor)
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub value: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates `T <- g(T)` from `t0` until `|T - g(T)|_F <= tol`.
pub fn fixed_point_solve(
    g: impl Fn(&Matrix) -> Matrix,
    t0: Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint, IntegratorError> {
    if !(tol > 0.0) {
        return Err(IntegratorError::Contract {
            operand: "fp_tol".into(),
            detail: format!("tolerance must be positive, got {tol}"),
        });
    }
    let mut t = t0;
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let next = g(&t);
        if !next.is_finite() {
            return Err(IntegratorError::NotConverged {
                segment: None,
                iterations: iteration,
                residual: f64::INFINITY,
            });
        }
        residual = (&next - &t).frobenius_norm();
        if residual <= tol {
            return Ok(FixedPoint {
                value: t,
                iterations: iteration,
                residual,
            });
        }
        t = next;
    }
    Err(IntegratorError::NotConverged {
        segment: None,
        iterations: max_iter,
        residual,
    })
}

/// Solves the affine collocation equation
/// `A - (h/3)(P A + A Q) = g(0)` directly, with `P`, `Q` at the right knot.
pub fn solve_segment_direct_affine(
    p: &ProblemSpec,
    state: &TaylorState,
    h: f64,
) -> Result<Matrix, IntegratorError> {
    let affine = p.affine.as_ref().ok_or(IntegratorError::NotAffine)?;
    let (r, q) = p.dims();
    let x_next = state.x + h;
    let g0 = segment_map(p, state, h)(&Matrix::zeros(r, q));
    let pk = (affine.p)(x_next);
    let qk = (affine.q)(x_next);
    check_dims("affine P", &pk, (r, r))?;
    check_dims("affine Q", &qk, (q, q))?;
    let lhs_left = Matrix::identity(r).add_scaled(&pk, -h / 3.0);
    let lhs_right = qk.scale(-h / 3.0);
    solve_sylvester(&lhs_left, &lhs_right, &g0).map_err(|source| IntegratorError::Singular {
        segment: None,
        source,
    })
}

/// A finished integration with per-segment solver diagnostics.
#[derive(Debug, Clone)]
pub struct Integration {
    pub spline: MatrixSpline,
    /// Map evaluations per segment (0 in direct-affine mode).
    pub iterations: Vec<usize>,
    /// `|A_k - g(A_k)|_F` per segment.
    pub residuals: Vec<f64>,
    pub mode: Mode,
    /// `Y''(a)` came from finite differences.
    pub used_finite_differences: bool,
}

pub fn integrate(p: &ProblemSpec, cfg: &SolverConfig) -> Result<Integration, IntegratorError> {
    let n = cfg.segments_for(p)?;
    let h = (p.b - p.a) / n as f64;
    if !cfg.override_step_condition && h * p.lipschitz / 3.0 >= 1.0 {
        return Err(IntegratorError::StepCondition {
            h,
            lipschitz: p.lipschitz,
            limit: 3.0 / p.lipschitz,
        });
    }
    let mode = cfg.mode.unwrap_or(if p.affine.is_some() {
        Mode::DirectAffine
    } else {
        Mode::FixedPoint
    });
    if mode == Mode::DirectAffine && p.affine.is_none() {
        return Err(IntegratorError::NotAffine);
    }
    let used_fd = !p.has_analytic_derivatives();
    if used_fd && !cfg.finite_difference_fallback {
        return Err(IntegratorError::MissingDerivatives);
    }

    let (r, q) = p.dims();
    let mut state = TaylorState {
        x: p.a,
        value: p.initial.clone(),
        slope: p.rhs(p.a, &p.initial),
        curvature: second_derivative(p, p.a, &p.initial)?,
    };
    let mut warm = Matrix::zeros(r, q);
    let mut segments = Vec::with_capacity(n);
    let mut iterations = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);

    for k in 0..n {
        let g = segment_map(p, &state, h);
        let (a_k, iters) = match mode {
            Mode::FixedPoint => {
                let fp = fixed_point_solve(&g, warm.clone(), cfg.fp_tol, cfg.fp_max_iter).map_err(
                    |e| match e {
                        IntegratorError::NotConverged {
                            iterations,
                            residual,
                            ..
                        } => IntegratorError::NotConverged {
                            segment: Some(k),
                            iterations,
                            residual,
                        },
                        other => other,
                    },
                )?;
                (fp.value, fp.iterations)
            }
            Mode::DirectAffine => {
                let a_k = solve_segment_direct_affine(p, &state, h).map_err(|e| match e {
                    IntegratorError::Singular { source, .. } => {
                        IntegratorError::Singular {
                            segment: Some(k),
                            source,
                        }
                    }
                    other => other,
                })?;
                (a_k, 0)
            }
        };
        let residual = (&g(&a_k) - &a_k).frobenius_norm();
        if !a_k.is_finite() || !residual.is_finite() {
            return Err(IntegratorError::NotConverged {
                segment: Some(k),
                iterations: iters,
                residual: f64::INFINITY,
            });
        }
        let x_left = p.a + k as f64 * h;
        let seg = SplineSegment::from_taylor(x_left, h, &state.value, &state.slope, &state.curvature, &a_k);
        state = TaylorState {
            x: p.a + (k + 1) as f64 * h,
            value: seg.eval_local(h, 0)?,
            slope: seg.eval_local(h, 1)?,
            curvature: seg.eval_local(h, 2)?,
        };
        segments.push(seg);
        iterations.push(iters);
        residuals.push(residual);
        warm = a_k;
    }

    Ok(Integration {
        spline: MatrixSpline::new(p.a, p.b, segments)?,
        iterations,
        residuals,
        mode,
        used_finite_differences: used_fd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalError {
    pub left: f64,
    pub right: f64,
    pub max_error: f64,
}

/// Per segment, the largest `|S(x) - Y(x)|_F` over `samples` uniformly spaced
/// points including both endpoints. Each segment is evaluated with its own
/// polynomial on the closed interval.
pub fn error_report(
    spline: &MatrixSpline,
    exact: impl Fn(f64) -> Matrix,
    samples: usize,
) -> Vec<IntervalError> {
    let samples = samples.max(2);
    spline
        .segments()
        .iter()
        .map(|seg| {
            let max_error = (0..samples)
                .map(|j| {
                    let t = if j + 1 == samples {
                        seg.h
                    } else {
                        seg.h * j as f64 / (samples - 1) as f64
                    };
                    let approx = seg.eval_local(t, 0).expect("order 0");
                    (&approx - &exact(seg.x_left + t)).frobenius_norm()
                })
                .fold(0.0, f64::max);
            IntervalError {
                left: seg.x_left,
                right: seg.x_right(),
                max_error,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub h: f64,
    pub n: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `log error` against `log h`; `None` when the
    /// errors sit at round-off level and no slope is meaningful.
    pub order: Option<f64>,
}

impl ConvergenceStudy {
    /// Error ratios between consecutive step sizes.
    pub fn ratios(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| w[0].max_error / w[1].max_error)
            .collect()
    }
}

/// Errors below this are treated as exact and make the fit degenerate.
pub const DEGENERATE_ERROR: f64 = 1e-15;

/// Global max error for each step size, then a log-log order fit.
///
/// Step sizes are integrated on separate threads.
pub fn convergence_study(
    p: &ProblemSpec,
    h_list: &[f64],
    cfg: &SolverConfig,
) -> Result<ConvergenceStudy, IntegratorError> {
    let exact = p.exact.clone().ok_or(IntegratorError::MissingExact)?;
    let results: Vec<Result<ConvergencePoint, IntegratorError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = h_list
            .iter()
            .map(|&h| {
                let exact = exact.clone();
                scope.spawn(move || {
                    let run_cfg = SolverConfig {
                        step: Some(Step::Width(h)),
                        ..cfg.clone()
                    };
                    let run = integrate(p, &run_cfg)?;
                    let max_error = error_report(&run.spline, |x| exact(x), cfg.samples_per_interval)
                        .iter()
                        .map(|e| e.max_error)
                        .fold(0.0, f64::max);
                    Ok(ConvergencePoint {
                        h: run.spline.h(),
                        n: run.spline.n(),
                        max_error,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|handle| handle.join().expect("integration thread panicked"))
            .collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let order = fit_order(&points);
    Ok(ConvergenceStudy { points, order })
}

fn fit_order(points: &[ConvergencePoint]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|p| !(p.max_error >= DEGENERATE_ERROR)) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.h.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.max_error.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
