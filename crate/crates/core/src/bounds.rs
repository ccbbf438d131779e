//! Existence and Lipschitz bounds for rectangular Riccati equations
//!
//! ```text
//! Y' = C(x) - D(x) Y - Y A(x) - Y B(x) Y,   Y(0) = Y0,   Y ∈ R^{p x q}
//! ```
//!
//! The pipeline computes the block constants `k0, q0, w0`, the admissible
//! interval length `δ`, the solution bound `M` on `[0, δ]`, the coefficient
//! sups `a, b, c, d` on `[0, δ]` and the local Lipschitz constant
//! `L = a + d + 2 b M` that drives the step condition `h < 3/L`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::integrator::{CoefficientFn, MatrixFn};
use crate::matrix::{Matrix, MatrixError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("delta = {delta} is inadmissible: 1 - δ q0 exp(δ k0) w0 = {denominator} is not positive")]
    InadmissibleDelta { delta: f64, denominator: f64 },
    #[error("coefficient dimensions incompatible: {0}")]
    Dimensions(String),
    #[error("need at least 2 grid points, got {0}")]
    Grid(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Frobenius,
    Two,
}

impl NormKind {
    pub fn apply(self, m: &Matrix) -> Result<f64, MatrixError> {
        match self {
            NormKind::Frobenius => Ok(m.frobenius_norm()),
            NormKind::Two => m.two_norm(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Frobenius => "frobenius",
            NormKind::Two => "2-norm",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frobenius" | "fro" | "f" => Ok(NormKind::Frobenius),
            "two" | "2" | "spectral" => Ok(NormKind::Two),
            other => Err(format!("unknown norm `{other}` (expected frobenius or two)")),
        }
    }
}

/// Which norm produces each constant. The defaults are Frobenius everywhere
/// except the 2-norm for `w0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormChoices {
    pub k0: NormKind,
    pub q0: NormKind,
    pub w0: NormKind,
    pub coefficients: NormKind,
}

impl Default for NormChoices {
    fn default() -> Self {
        NormChoices {
            k0: NormKind::Frobenius,
            q0: NormKind::Frobenius,
            w0: NormKind::Two,
            coefficients: NormKind::Frobenius,
        }
    }
}

/// Coefficients of a Riccati problem on `[0, interval_end]`.
///
/// `interval_end` is the range over which `k0` and `q0` are maximised; the
/// coefficient sups use `[0, δ]`.
#[derive(Clone)]
pub struct RiccatiProblem {
    pub a: CoefficientFn,
    pub b: CoefficientFn,
    pub c: CoefficientFn,
    pub d: CoefficientFn,
    pub y0: Matrix,
    pub interval_end: f64,
}

impl fmt::Debug for RiccatiProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiccatiProblem")
            .field("y0", &self.y0)
            .field("interval_end", &self.interval_end)
            .finish_non_exhaustive()
    }
}

impl RiccatiProblem {
    /// Checks the shapes `A: q x q`, `B: q x p`, `C: p x q`, `D: p x p`
    /// against `Y0: p x q` at `x = 0`.
    pub fn new(
        a: CoefficientFn,
        b: CoefficientFn,
        c: CoefficientFn,
        d: CoefficientFn,
        y0: Matrix,
        interval_end: f64,
    ) -> Result<Self, BoundsError> {
        let (p, q) = y0.dims();
        let checks = [
            ("A", a(0.0).dims(), (q, q)),
            ("B", b(0.0).dims(), (q, p)),
            ("C", c(0.0).dims(), (p, q)),
            ("D", d(0.0).dims(), (p, p)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(BoundsError::Dimensions(format!(
                    "{name} is {}x{}, expected {}x{} for Y0 {p}x{q}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        if !(interval_end > 0.0) {
            return Err(BoundsError::Dimensions(format!(
                "interval end must be positive, got {interval_end}"
            )));
        }
        Ok(RiccatiProblem {
            a,
            b,
            c,
            d,
            y0,
            interval_end,
        })
    }

    /// `F(x, Y) = C - D Y - Y A - Y B Y`.
    pub fn rhs(&self, x: f64, y: &Matrix) -> Matrix {
        let ya = y * &(self.a)(x);
        let yby = &(y * &(self.b)(x)) * y;
        (self.c)(x) - &(self.d)(x) * y - ya - yby
    }

    /// The block matrix `[[A, B], [C, -D]]`.
    pub fn block(&self, x: f64) -> Result<Matrix, MatrixError> {
        let top = (self.a)(x).hstack(&(self.b)(x))?;
        let bottom = (self.c)(x).hstack(&-(self.d)(x))?;
        top.vstack(&bottom)
    }

    /// Wraps the coefficients as shared closures for reuse.
    pub fn rhs_fn(&self) -> MatrixFn {
        let this = self.clone();
        Arc::new(move |x, y| this.rhs(x, y))
    }
}

fn grid(end: f64, points: usize) -> Result<impl Iterator<Item = f64>, BoundsError> {
    if points < 2 {
        return Err(BoundsError::Grid(points));
    }
    Ok((0..points).map(move |i| {
        if i + 1 == points {
            end
        } else {
            end * i as f64 / (points - 1) as f64
        }
    }))
}

fn grid_max(
    end: f64,
    points: usize,
    mut value: impl FnMut(f64) -> Result<f64, BoundsError>,
) -> Result<f64, BoundsError> {
    let mut best = 0.0f64;
    for x in grid(end, points)? {
        best = best.max(value(x)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockConstants {
    pub k0: f64,
    pub q0: f64,
    pub w0: f64,
}

/// `k0 = max |[[A, B], [C, -D]]|`, `q0 = max |[A B]|` over a uniform grid on
/// `[0, interval_end]`, and `w0 = |[I_q; Y0]|`.
pub fn block_constants(
    p: &RiccatiProblem,
    grid_points: usize,
    norms: &NormChoices,
) -> Result<BlockConstants, BoundsError> {
    let k0 = grid_max(p.interval_end, grid_points, |x| Ok(norms.k0.apply(&p.block(x)?)?))?;
    let q0 = grid_max(p.interval_end, grid_points, |x| {
        Ok(norms.q0.apply(&(p.a)(x).hstack(&(p.b)(x))?)?)
    })?;
    let q = p.y0.cols();
    let w0 = norms.w0.apply(&Matrix::identity(q).vstack(&p.y0)?)?;
    Ok(BlockConstants { k0, q0, w0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRoot {
    /// Supremum of admissible `δ`.
    Root(f64),
    /// `q0 w0 = 0`: every `δ > 0` is admissible.
    Unbounded,
}

/// Root of `δ k0 + log δ = -log(q0 w0)`.
///
/// The left side is strictly increasing, so the root is the supremum of the
/// `δ` satisfying the strict inequality. The returned value lies on the
/// admissible side, within `1e-9` of the root.
pub fn find_delta(k0: f64, q0: f64, w0: f64) -> DeltaRoot {
    let qw = q0 * w0;
    if !(qw > 0.0) {
        return DeltaRoot::Unbounded;
    }
    let target = -qw.ln();
    let phi = |d: f64| d * k0 + d.ln();
    let mut lo = 1.0;
    while phi(lo) >= target {
        lo *= 0.5;
    }
    let mut hi = lo * 2.0;
    while phi(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1e-300) && hi - lo > 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    DeltaRoot::Root(lo)
}

/// `M = w0 exp(δ k0) / (1 - δ q0 exp(δ k0) w0)`.
pub fn bound_m(delta: f64, k0: f64, q0: f64, w0: f64) -> Result<f64, BoundsError> {
    let growth = (delta * k0).exp();
    let denominator = 1.0 - delta * q0 * growth * w0;
    if !(denominator > 0.0) {
        return Err(BoundsError::InadmissibleDelta { delta, denominator });
    }
    Ok(w0 * growth / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSups {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Sups of `|A|, |B|, |C|, |D|` over a uniform grid on `[0, δ]`.
pub fn coefficient_sups(
    p: &RiccatiProblem,
    delta: f64,
    grid_points: usize,
    norm: NormKind,
) -> Result<CoefficientSups, BoundsError> {
    let sup = |f: &CoefficientFn| grid_max(delta, grid_points, |x| Ok(norm.apply(&f(x))?));
    Ok(CoefficientSups {
        a: sup(&p.a)?,
        b: sup(&p.b)?,
        c: sup(&p.c)?,
        d: sup(&p.d)?,
    })
}

/// Local Lipschitz constant of `F` on the ball `|Y| <= M`.
pub fn lipschitz_l(sup_a: f64, sup_d: f64, sup_b: f64, m: f64) -> f64 {
    sup_a + sup_d + 2.0 * sup_b * m
}

/// Bound on `|F(x, Y)|` for `|Y| <= N`.
pub fn f_sup_bound(sups: &CoefficientSups, n: f64) -> f64 {
    sups.c + n * (sups.a + sups.d + sups.b * n)
}

/// Norms of the Taylor data `(S_k, S'_k, S''_k)` at a left knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorNorms {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundChain {
    pub n2: f64,
    pub n3: f64,
    pub n4: f64,
    /// Radius of the ball the collocation map sends into itself.
    pub n: f64,
}

/// The radius chain for one segment of width `h` with `|T| <= n1`.
pub fn segment_bound_chain(
    taylor: &TaylorNorms,
    h: f64,
    n1: f64,
    sups: &CoefficientSups,
    m: f64,
) -> BoundChain {
    let n2 = taylor.value + h * taylor.slope + 0.5 * h * h * taylor.curvature + h * h * h / 6.0 * n1;
    let n3 = f_sup_bound(sups, n2);
    let n4 = 2.0 / (h * h) * (n3 + taylor.slope + h * taylor.curvature);
    let n = n1.max(n2).max(n3).max(n4).max(m);
    BoundChain { n2, n3, n4, n }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsOptions {
    pub grid_points: usize,
    pub norms: NormChoices,
    /// Use this `δ` instead of the automatic choice.
    pub delta: Option<f64>,
    /// Integration interval end; the automatic `δ` is this value when it is
    /// admissible.
    pub solve_end: Option<f64>,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            grid_points: 1001,
            norms: NormChoices::default(),
            delta: None,
            solve_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiBounds {
    pub k0: f64,
    pub q0: f64,
    pub w0: f64,
    /// Supremum of admissible `δ` (`None` if every `δ` works).
    pub delta_root: Option<f64>,
    /// The `δ` actually used for `M` and the sups.
    pub delta: f64,
    pub m: f64,
    pub sups: CoefficientSups,
    pub lipschitz: f64,
    pub norms: NormChoices,
}

impl RiccatiBounds {
    /// Largest admissible step, `3/L` (infinite when `L = 0`).
    pub fn step_limit(&self) -> f64 {
        if self.lipschitz > 0.0 {
            3.0 / self.lipschitz
        } else {
            f64::INFINITY
        }
    }
}

/// Runs block constants, δ, M, sups and L in sequence.
///
/// Without an explicit `δ`, the pipeline uses `solve_end` (or the problem's
/// interval end) when that lies strictly inside the admissible range, and
/// otherwise the largest admissible `δ` clamped to it, which is rejected by
/// [`bound_m`] at the root itself.
pub fn riccati_bounds(p: &RiccatiProblem, opts: &BoundsOptions) -> Result<RiccatiBounds, BoundsError> {
    let BlockConstants { k0, q0, w0 } = block_constants(p, opts.grid_points, &opts.norms)?;
    let root = find_delta(k0, q0, w0);
    let end = opts.solve_end.unwrap_or(p.interval_end);
    let delta = match (opts.delta, root) {
        (Some(d), _) => d,
        (None, DeltaRoot::Unbounded) => end,
        (None, DeltaRoot::Root(r)) => end.min(r),
    };
    let m = bound_m(delta, k0, q0, w0)?;
    let sups = coefficient_sups(p, delta, opts.grid_points, opts.norms.coefficients)?;
    let lipschitz = lipschitz_l(sups.a, sups.d, sups.b, m);
    Ok(RiccatiBounds {
        k0,
        q0,
        w0,
        delta_root: match root {
            DeltaRoot::Root(r) => Some(r),
            DeltaRoot::Unbounded => None,
        },
        delta,
        m,
        sups,
        lipschitz,
        norms: opts.norms,
    })
}
