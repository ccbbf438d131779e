//! Command-line front end.
//!
//! Data goes to stdout, diagnostics to stderr. Exit codes: 0 success, 2 bad
//! input (flags, config, step condition, evaluation range), 3 solver failure
//! (fixed-point non-convergence, singular segment system, inadmissible δ).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    riccati_bounds, segment_bound_chain, BoundsError, BoundsOptions, NormChoices, NormKind,
    RiccatiBounds, RiccatiProblem, TaylorNorms,
};
use crate::expr::Expr;
use crate::integrator::{
    convergence_study, error_report, integrate, second_derivative, CoefficientFn, IntegratorError,
    Mode, ProblemSpec, SolverConfig, Step,
};
use crate::matrix::Matrix;
use crate::problems::{self, riccati_coefficients, RICCATI_END};
use crate::spline::MatrixSpline;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<IntegratorError> for CliError {
    fn from(e: IntegratorError) -> Self {
        match e {
            IntegratorError::NotConverged { .. } | IntegratorError::Singular { .. } => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::InadmissibleDelta { .. } => CliError::Solver(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "matspline", version, about = "Matrix-cubic spline integration of matrix ODEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a problem and print per-interval errors.
    Run(RunArgs),
    /// Sweep step sizes and fit the convergence order.
    Convergence(ConvergenceArgs),
    /// Riccati existence bounds and the derived Lipschitz constant.
    Bounds(BoundsArgs),
    /// Evaluate a saved spline and its derivatives.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    FixedPoint,
    DirectAffine,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FixedPoint => Mode::FixedPoint,
            ModeArg::DirectAffine => Mode::DirectAffine,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Built-in problem: guzman, sylvester, riccati, zero, scalar-exp.
    #[arg(long)]
    pub problem: Option<String>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Step size(s); `convergence` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub h: Vec<f64>,
    /// Number of segments.
    #[arg(long, conflicts_with = "h")]
    pub n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Sample points per interval for the error tables.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Allow h >= 3/L.
    #[arg(long = "override")]
    pub override_step: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long = "save-spline")]
    pub save_spline: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Norm override, e.g. `w0=frobenius` (constants: k0, q0, w0, coef).
    #[arg(long, value_delimiter = ',')]
    pub norm: Vec<String>,
    /// Use this δ instead of the automatic choice.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1001)]
    pub grid: usize,
    /// Step used for the first-segment ball certificate.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Spline JSON written by `run --save-spline`.
    pub spline: PathBuf,
    /// Evaluation points.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub x: Vec<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Run configuration document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemRef,
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub fp_tol: Option<f64>,
    pub fp_max_iter: Option<usize>,
    pub mode: Option<String>,
    pub samples_per_interval: Option<usize>,
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Builtin(String),
    Inline(InlineProblem),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InlineKind {
    Sylvester,
    Riccati,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub kind: InlineKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<String>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<String>>,
    #[serde(rename = "D", default)]
    pub d: Option<Vec<Vec<String>>>,
    #[serde(rename = "Y0")]
    pub y0: Vec<Vec<f64>>,
    pub interval: [f64; 2],
    #[serde(rename = "L", default)]
    pub lipschitz: Option<f64>,
    /// Riccati only: range of the block-constant maxima (defaults to the
    /// interval end).
    #[serde(default)]
    pub bounds_interval_end: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Input(format!("config line {} column {}: {e}", e.line(), e.column()))
        })?;
        if cfg.n.is_some() && cfg.h.is_some() {
            return Err(CliError::Input("config: give exactly one of `n` or `h`".into()));
        }
        Ok(cfg)
    }
}

/// A matrix whose entries are expressions in `x`.
#[derive(Debug, Clone)]
struct ExprMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    fn parse(label: &str, rows: &[Vec<String>]) -> Result<Self, CliError> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(CliError::Input(format!(
                "matrix {label}: rows must be non-empty and of equal length"
            )));
        }
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, src) in row.iter().enumerate() {
                let e = Expr::parse(src).map_err(|e| {
                    CliError::Input(format!("matrix {label}[{i}][{j}] `{src}`: {e}"))
                })?;
                entries.push(e);
            }
        }
        Ok(ExprMatrix {
            rows: rows.len(),
            cols,
            entries,
        })
    }

    fn eval(&self, x: f64) -> Result<Matrix, crate::expr::EvalError> {
        let data = self
            .entries
            .iter()
            .map(|e| e.eval(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::new(self.rows, self.cols, data).expect("shape checked at parse"))
    }

    /// Checks every entry evaluates on a grid over `[a, b]`, then returns a
    /// coefficient function. Later evaluation failures yield NaN entries,
    /// which the integrator reports as divergence.
    fn into_fn(self, label: &str, a: f64, b: f64) -> Result<CoefficientFn, CliError> {
        const CHECK_POINTS: usize = 201;
        for k in 0..CHECK_POINTS {
            let x = a + (b - a) * k as f64 / (CHECK_POINTS - 1) as f64;
            self.eval(x)
                .map_err(|e| CliError::Input(format!("matrix {label} at x = {x}: {e}")))?;
        }
        Ok(Arc::new(move |x| {
            self.eval(x)
                .unwrap_or_else(|_| Matrix::from_fn(self.rows, self.cols, |_, _| f64::NAN))
        }))
    }
}

fn numeric_matrix(label: &str, rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input(format!(
            "matrix {label}: rows must be non-empty and of equal length"
        )));
    }
    Ok(Matrix::new(rows.len(), cols, rows.concat()).expect("shape checked"))
}

impl InlineProblem {
    fn interval(&self) -> Result<(f64, f64), CliError> {
        let [a, b] = self.interval;
        if !(a < b) {
            return Err(CliError::Input(format!("interval [{a}, {b}] is empty")));
        }
        Ok((a, b))
    }

    fn riccati(&self) -> Result<RiccatiProblem, CliError> {
        let (a, b) = self.interval()?;
        if a != 0.0 {
            return Err(CliError::Input("riccati problems start at x = 0".into()));
        }
        let d = self
            .d
            .as_ref()
            .ok_or_else(|| CliError::Input("riccati problem needs matrix D".into()))?;
        let end = self.bounds_interval_end.unwrap_or(b).max(b);
        let coeff = |label: &str, rows: &[Vec<String>]| {
            ExprMatrix::parse(label, rows)?.into_fn(label, 0.0, end)
        };
        Ok(RiccatiProblem::new(
            coeff("A", &self.a)?,
            coeff("B", &self.b)?,
            coeff("C", &self.c)?,
            coeff("D", d)?,
            numeric_matrix("Y0", &self.y0)?,
            end,
        )?)
    }

    fn problem(&self) -> Result<ProblemSpec, CliError> {
        let (a, b) = self.interval()?;
        let lipschitz = self
            .lipschitz
            .ok_or_else(|| CliError::Input("inline problems require an explicit `L`".into()))?;
        let name = self.name.clone().unwrap_or_else(|| match self.kind {
            InlineKind::Sylvester => "inline-sylvester".into(),
            InlineKind::Riccati => "inline-riccati".into(),
        });
        match self.kind {
            InlineKind::Sylvester => {
                if self.d.is_some() {
                    return Err(CliError::Input("sylvester problems take no matrix D".into()));
                }
                let coeff = |label: &str, rows: &[Vec<String>]| {
                    ExprMatrix::parse(label, rows)?.into_fn(label, a, b)
                };
                Ok(problems::sylvester_from(
                    &name,
                    coeff("A", &self.a)?,
                    coeff("B", &self.b)?,
                    coeff("C", &self.c)?,
                    numeric_matrix("Y0", &self.y0)?,
                    (a, b),
                    lipschitz,
                )?)
            }
            InlineKind::Riccati => Ok(problems::riccati_from(&name, &self.riccati()?, (a, b), lipschitz)?),
        }
    }
}

struct Resolved {
    problem: ProblemSpec,
    config: Option<RunConfig>,
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    RunConfig::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn builtin(name: &str) -> Result<ProblemSpec, CliError> {
    problems::builtin(name).ok_or_else(|| {
        CliError::Input(format!(
            "unknown problem `{name}` (available: {})",
            problems::NAMES.join(", ")
        ))
    })
}

fn resolve_problem(args: &ProblemArgs) -> Result<Resolved, CliError> {
    match (&args.problem, &args.config) {
        (Some(_), Some(_)) => Err(CliError::Input("give either --problem or --config, not both".into())),
        (None, None) => Err(CliError::Input("one of --problem or --config is required".into())),
        (Some(name), None) => Ok(Resolved {
            problem: builtin(name)?,
            config: None,
        }),
        (None, Some(path)) => {
            let cfg = load_config(path)?;
            let problem = match &cfg.problem {
                ProblemRef::Builtin(name) => builtin(name)?,
                ProblemRef::Inline(inline) => inline.problem()?,
            };
            Ok(Resolved {
                problem,
                config: Some(cfg),
            })
        }
    }
}

fn solver_config(args: &SolverArgs, cfg: Option<&RunConfig>) -> Result<SolverConfig, CliError> {
    let mut out = SolverConfig::default();
    if let Some(c) = cfg {
        if let Some(n) = c.n {
            out.step = Some(Step::Segments(n));
        }
        if let Some(h) = c.h {
            out.step = Some(Step::Width(h));
        }
        if let Some(t) = c.fp_tol {
            out.fp_tol = t;
        }
        if let Some(m) = c.fp_max_iter {
            out.fp_max_iter = m;
        }
        if let Some(mode) = &c.mode {
            out.mode = Some(mode.parse().map_err(CliError::Input)?);
        }
        if let Some(s) = c.samples_per_interval {
            out.samples_per_interval = s;
        }
    }
    if let Some(n) = args.n {
        out.step = Some(Step::Segments(n));
    }
    if let [h] = args.h[..] {
        out.step = Some(Step::Width(h));
    }
    if let Some(t) = args.tol {
        if !(t > 0.0) {
            return Err(CliError::Input(format!("--tol must be positive, got {t}")));
        }
        out.fp_tol = t;
    }
    if let Some(m) = args.max_iter {
        out.fp_max_iter = m;
    }
    if let Some(mode) = args.mode {
        out.mode = Some(mode.into());
    }
    if let Some(s) = args.samples {
        if s < 2 {
            return Err(CliError::Input("--samples must be at least 2".into()));
        }
        out.samples_per_interval = s;
    }
    out.override_step_condition = args.override_step;
    Ok(out)
}

/// Six significant figures in scientific notation.
pub fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

/// Six significant figures, fixed notation for moderate magnitudes.
pub fn g6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        sig6(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRow {
    pub interval_left: f64,
    pub interval_right: f64,
    pub max_frobenius_error: Option<f64>,
    pub fp_iterations: usize,
}

#[derive(Serialize)]
struct RunJson<'a> {
    problem: &'a str,
    n: usize,
    h: f64,
    mode: &'a str,
    finite_difference_second_derivative: bool,
    intervals: &'a [RunRow],
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Input(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let resolved = resolve_problem(&args.problem)?;
    let p = &resolved.problem;
    if args.solver.h.len() > 1 {
        return Err(CliError::Input("run takes a single --h".into()));
    }
    let cfg = solver_config(&args.solver, resolved.config.as_ref())?;
    let run = integrate(p, &cfg)?;
    if run.used_finite_differences {
        let _ = writeln!(err, "note: Y''(a) computed with finite differences");
    }

    let errors = p
        .exact
        .as_ref()
        .map(|y| error_report(&run.spline, |x| y(x), cfg.samples_per_interval));
    let rows: Vec<RunRow> = run
        .spline
        .segments()
        .iter()
        .enumerate()
        .map(|(k, seg)| RunRow {
            interval_left: seg.x_left,
            interval_right: seg.x_right(),
            max_frobenius_error: errors.as_ref().map(|e| e[k].max_error),
            fp_iterations: run.iterations[k],
        })
        .collect();

    if let Some(path) = &args.save_spline {
        let json = serde_json::to_string_pretty(&run.spline).expect("spline serialises");
        fs::write(path, json).map_err(|e| io_error(path, e))?;
    }

    let config_output = resolved.config.as_ref().and_then(|c| c.output.clone());
    let (path, default_format) = match (&args.output, &config_output) {
        (Some(p), _) => (Some(p.clone()), Format::Csv),
        (None, Some(o)) => (Some(o.path.clone()), o.format.unwrap_or(Format::Csv)),
        (None, None) => (None, Format::Table),
    };
    let format = args.format.unwrap_or(default_format);
    let text = match format {
        Format::Table => run_table(p, &run.spline, run.mode, &rows),
        Format::Csv => to_csv(&rows)?,
        Format::Json => {
            let doc = RunJson {
                problem: &p.name,
                n: run.spline.n(),
                h: run.spline.h(),
                mode: run.mode.name(),
                finite_difference_second_derivative: run.used_finite_differences,
                intervals: &rows,
            };
            serde_json::to_string_pretty(&doc).expect("json") + "\n"
        }
    };
    write_output(path.as_deref(), &text, out)?;
    if path.is_some() {
        write_output(None, &run_table(p, &run.spline, run.mode, &rows), out)?;
    }
    Ok(())
}

fn run_table(p: &ProblemSpec, spline: &MatrixSpline, mode: Mode, rows: &[RunRow]) -> String {
    let mut s = format!(
        "# problem {}, n = {}, h = {}, mode {}\n",
        p.name,
        spline.n(),
        g6(spline.h()),
        mode.name()
    );
    s += &format!("{:<28} {:>20} {:>14}\n", "interval", "max_frobenius_error", "fp_iterations");
    for r in rows {
        let interval = format!("[{}, {}]", trim(r.interval_left), trim(r.interval_right));
        let e = r.max_frobenius_error.map(sig6).unwrap_or_else(|| "-".into());
        s += &format!("{interval:<28} {e:>20} {:>14}\n", r.fp_iterations);
    }
    s
}

/// Knot coordinates rounded for display; `0.30000000000000004` prints as `0.3`.
fn trim(v: f64) -> String {
    let r = format!("{v:.10}");
    let r = r.trim_end_matches('0').trim_end_matches('.');
    if r == "-0" {
        "0".into()
    } else {
        r.to_string()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub n: usize,
    pub max_frobenius_error: f64,
}

fn cmd_convergence(args: &ConvergenceArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let resolved = resolve_problem(&args.problem)?;
    let p = &resolved.problem;
    if p.exact.is_none() {
        return Err(CliError::Input(format!("problem `{}` has no exact solution", p.name)));
    }
    let cfg = solver_config(&args.solver, resolved.config.as_ref())?;
    let h_list: Vec<f64> = if !args.solver.h.is_empty() {
        args.solver.h.clone()
    } else {
        let base = match cfg.step {
            Some(Step::Width(h)) => h,
            Some(Step::Segments(n)) => (p.b - p.a) / n as f64,
            None => (p.b - p.a) / p.default_n as f64,
        };
        (0..4).map(|k| base / f64::from(1u32 << k)).collect()
    };
    let study = convergence_study(p, &h_list, &cfg)?;
    let rows: Vec<ConvergenceRow> = study
        .points
        .iter()
        .map(|pt| ConvergenceRow {
            h: pt.h,
            n: pt.n,
            max_frobenius_error: pt.max_error,
        })
        .collect();
    if study.order.is_none() {
        let _ = writeln!(err, "warning: degenerate fit, errors are at round-off level; no order reported");
    }

    let format = args.format.unwrap_or(if args.output.is_some() { Format::Csv } else { Format::Table });
    let text = match format {
        Format::Table => {
            let mut s = format!("# convergence study, problem {}\n", p.name);
            s += &format!("{:>12} {:>8} {:>20} {:>10}\n", "h", "n", "max_frobenius_error", "ratio");
            let ratios = study.ratios();
            for (k, r) in rows.iter().enumerate() {
                let ratio = match k.checked_sub(1).map(|i| ratios[i]) {
                    Some(q) if q.is_finite() => format!("{q:.3}"),
                    _ => "-".to_string(),
                };
                s += &format!("{:>12} {:>8} {:>20} {:>10}\n", g6(r.h), r.n, sig6(r.max_frobenius_error), ratio);
            }
            match study.order {
                Some(o) => s += &format!("fitted order: {o:.4}\n"),
                None => s += "fitted order: n/a (degenerate)\n",
            }
            s
        }
        Format::Csv => to_csv(&rows)?,
        Format::Json => {
            let doc = serde_json::json!({
                "problem": p.name,
                "points": rows,
                "fitted_order": study.order,
            });
            serde_json::to_string_pretty(&doc).expect("json") + "\n"
        }
    };
    write_output(args.output.as_deref(), &text, out)
}

fn parse_norms(specs: &[String]) -> Result<NormChoices, CliError> {
    let mut norms = NormChoices::default();
    for spec in specs {
        let (name, kind) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--norm expects CONST=KIND, got `{spec}`")))?;
        let kind: NormKind = kind.parse().map_err(CliError::Input)?;
        match name {
            "k0" => norms.k0 = kind,
            "q0" => norms.q0 = kind,
            "w0" => norms.w0 = kind,
            "coef" | "a" | "b" | "c" | "d" | "abcd" => norms.coefficients = kind,
            "all" => {
                norms = NormChoices {
                    k0: kind,
                    q0: kind,
                    w0: kind,
                    coefficients: kind,
                }
            }
            other => return Err(CliError::Input(format!("--norm: unknown constant `{other}`"))),
        }
    }
    Ok(norms)
}

fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let (coeffs, solve_end, default_h) = match (&args.problem.problem, &args.problem.config) {
        (Some(_), Some(_)) => {
            return Err(CliError::Input("give either --problem or --config, not both".into()))
        }
        (None, None) => return Err(CliError::Input("one of --problem or --config is required".into())),
        (Some(name), None) if name == "riccati" => (riccati_coefficients(), RICCATI_END, Some(0.01)),
        (Some(name), None) => {
            return Err(CliError::Input(format!("bounds needs a Riccati problem, `{name}` is not one")))
        }
        (None, Some(path)) => {
            let cfg = load_config(path)?;
            match &cfg.problem {
                ProblemRef::Builtin(name) if name == "riccati" => {
                    (riccati_coefficients(), RICCATI_END, Some(0.01))
                }
                ProblemRef::Inline(inline) if inline.kind == InlineKind::Riccati => {
                    let h = cfg.h.or(cfg.n.map(|n| (inline.interval[1] - inline.interval[0]) / n as f64));
                    (inline.riccati()?, inline.interval[1], h)
                }
                _ => return Err(CliError::Input("bounds needs a Riccati problem".into())),
            }
        }
    };
    let opts = BoundsOptions {
        grid_points: args.grid,
        norms: parse_norms(&args.norm)?,
        delta: args.delta,
        solve_end: Some(solve_end),
    };
    let bounds = riccati_bounds(&coeffs, &opts)?;
    if bounds.delta < solve_end {
        let _ = writeln!(
            err,
            "warning: δ = {} is shorter than the integration interval end {solve_end}",
            bounds.delta
        );
    }
    let h = args.h.or(default_h);
    let certificate = match h {
        Some(h) => Some(first_segment_certificate(&coeffs, &bounds, h)?),
        None => None,
    };

    let text = match args.format.unwrap_or(Format::Table) {
        Format::Json => {
            let doc = serde_json::json!({
                "k0": bounds.k0, "q0": bounds.q0, "w0": bounds.w0,
                "delta_root": bounds.delta_root, "delta": bounds.delta, "M": bounds.m,
                "a": bounds.sups.a, "b": bounds.sups.b, "c": bounds.sups.c, "d": bounds.sups.d,
                "L": bounds.lipschitz,
                "step_limit": if bounds.step_limit().is_finite() { Some(bounds.step_limit()) } else { None },
                "norms": {
                    "k0": bounds.norms.k0.name(), "q0": bounds.norms.q0.name(),
                    "w0": bounds.norms.w0.name(), "coefficients": bounds.norms.coefficients.name(),
                },
                "first_segment_radius": certificate,
            });
            serde_json::to_string_pretty(&doc).expect("json") + "\n"
        }
        Format::Csv => {
            let mut s = String::from("constant,value,norm\n");
            for (name, value, norm) in bounds_lines(&bounds) {
                s += &format!("{name},{value},{norm}\n");
            }
            s
        }
        Format::Table => bounds_table(&coeffs, &bounds, h, certificate),
    };
    write_output(None, &text, out)
}

fn bounds_lines(b: &RiccatiBounds) -> Vec<(&'static str, f64, &'static str)> {
    let coef = b.norms.coefficients.name();
    vec![
        ("k0", b.k0, b.norms.k0.name()),
        ("q0", b.q0, b.norms.q0.name()),
        ("w0", b.w0, b.norms.w0.name()),
        ("delta", b.delta, ""),
        ("M", b.m, ""),
        ("a", b.sups.a, coef),
        ("b", b.sups.b, coef),
        ("c", b.sups.c, coef),
        ("d", b.sups.d, coef),
        ("L", b.lipschitz, ""),
    ]
}

fn bounds_table(p: &RiccatiProblem, b: &RiccatiBounds, h: Option<f64>, certificate: Option<f64>) -> String {
    let end = trim(p.interval_end);
    let delta = trim(b.delta);
    let mut s = String::new();
    let mut line = |name: &str, value: f64, note: String| {
        s += &format!("{name:<8} = {:<12} {note}\n", g6(value));
    };
    line("k0", b.k0, format!("{}, max over [0, {end}] of |[[A, B], [C, -D]]|", b.norms.k0.name()));
    line("q0", b.q0, format!("{}, max over [0, {end}] of |[A B]|", b.norms.q0.name()));
    line("w0", b.w0, format!("{} of [I; Y0]", b.norms.w0.name()));
    match b.delta_root {
        Some(r) => line("delta*", r, "supremum of admissible delta".into()),
        None => line("delta*", f64::INFINITY, "every delta is admissible (q0 w0 = 0)".into()),
    }
    line("delta", b.delta, "used for M and the coefficient sups".into());
    line("M", b.m, "bound on |Y| over [0, delta]".into());
    let coef = b.norms.coefficients.name();
    line("a", b.sups.a, format!("{coef}, sup over [0, {delta}] of |A|"));
    line("b", b.sups.b, format!("{coef}, sup over [0, {delta}] of |B|"));
    line("c", b.sups.c, format!("{coef}, sup over [0, {delta}] of |C|"));
    line("d", b.sups.d, format!("{coef}, sup over [0, {delta}] of |D|"));
    line("L", b.lipschitz, "a + d + 2 b M".into());
    if b.lipschitz > 0.0 {
        s += &format!("admissible step: h < 3/L = {}\n", g6(b.step_limit()));
    } else {
        s += "admissible step: any h (L = 0)\n";
    }
    if let (Some(h), Some(n)) = (h, certificate) {
        s += &format!("first segment with h = {}: invariant ball radius N = {}\n", trim(h), g6(n));
    }
    s
}

/// Ball radius for the first collocation map, with `|T| <= M`.
fn first_segment_certificate(p: &RiccatiProblem, b: &RiccatiBounds, h: f64) -> Result<f64, CliError> {
    if !(h > 0.0) {
        return Err(CliError::Input(format!("h must be positive, got {h}")));
    }
    let spec = problems::riccati_from("certificate", p, (0.0, p.interval_end), b.lipschitz.max(1e-300))?;
    let slope = spec.rhs(0.0, &p.y0);
    let curvature = second_derivative(&spec, 0.0, &p.y0)?;
    let taylor = TaylorNorms {
        value: p.y0.frobenius_norm(),
        slope: slope.frobenius_norm(),
        curvature: curvature.frobenius_norm(),
    };
    Ok(segment_bound_chain(&taylor, h, b.m, &b.sups, b.m).n)
}

#[derive(Serialize)]
struct EvalJson {
    x: f64,
    value: Vec<Vec<f64>>,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spline).map_err(|e| io_error(&args.spline, e))?;
    let spline: MatrixSpline =
        serde_json::from_str(&text).map_err(|e| io_error(&args.spline, e))?;
    let mut points = Vec::with_capacity(args.x.len());
    for &x in &args.x {
        let eval = |order| spline.eval(x, order).map_err(|e| CliError::Input(e.to_string()));
        points.push((x, eval(0)?, eval(1)?, eval(2)?));
    }
    let text = match args.format.unwrap_or(Format::Table) {
        Format::Json => {
            let docs: Vec<EvalJson> = points
                .iter()
                .map(|(x, v, d1, d2)| EvalJson {
                    x: *x,
                    value: v.to_rows(),
                    first: d1.to_rows(),
                    second: d2.to_rows(),
                })
                .collect();
            serde_json::to_string_pretty(&docs).expect("json") + "\n"
        }
        Format::Csv => {
            let mut s = String::from("x,order,row,col,value\n");
            for (x, v, d1, d2) in &points {
                for (order, m) in [v, d1, d2].into_iter().enumerate() {
                    for i in 0..m.rows() {
                        for j in 0..m.cols() {
                            s += &format!("{x},{order},{i},{j},{}\n", m[(i, j)]);
                        }
                    }
                }
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for (x, v, d1, d2) in &points {
                s += &format!("x = {x}\n");
                for (label, m) in [("S", v), ("S'", d1), ("S''", d2)] {
                    s += &format!("{label}:\n");
                    for row in m.to_rows() {
                        let cells: Vec<String> = row.iter().map(|&c| g6(c)).collect();
                        s += &format!("  [{}]\n", cells.join(", "));
                    }
                }
            }
            s
        }
    };
    write_output(None, &text, out)
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Convergence(a) => cmd_convergence(a, out, err),
        Command::Bounds(a) => cmd_bounds(a, out, err),
        Command::Eval(a) => cmd_eval(a, out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
