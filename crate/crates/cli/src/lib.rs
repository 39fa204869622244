//! Batch front end for `supersol`: reads an INI run configuration, runs one
//! mode and writes `report.txt` plus CSV field data to an output directory.
//!
//! Exit codes: 0 pass, 1 numerical or I/O failure, 2 a certificate, check or
//! bound failed, 3 the problem violates its hypotheses, 4 bad configuration.

pub mod config;
mod output;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use supersol::construct::{build_certificate, SupersolutionCertificate};
use supersol::domain::Grid;
use supersol::eigen::eigenbench_row;
use supersol::problem::{validate_problem, ProblemSpec, ScalarField, ValidationReport};
use supersol::solve::{mms_solve, monotone_bracket};
use thiserror::Error;

pub use config::{ConfigError, Mode, RunConfig};
use output::{real, write_field, write_table, Report};

/// Relative gap between the two monotone limits accepted by solve mode.
pub const SOLVE_GAP_TOL: f64 = 1e-6;

/// Accepted deviation of an observed MMS order from 2.
pub const MMS_ORDER_SLACK: f64 = 0.2;

/// Default output directory, relative to the working directory.
pub const DEFAULT_OUT: &str = "supersol-out";

/// Command-line values that take precedence over the configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub h: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Setup(supersol::Error),

    #[error("validation failed: {}", .0.failures().join("; "))]
    Validation(Box<ValidationReport>),

    #[error("{0}")]
    Hypothesis(supersol::Error),

    #[error("{0}")]
    Numerical(supersol::Error),

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<supersol::Error> for CliError {
    fn from(e: supersol::Error) -> Self {
        use supersol::Error as E;
        match e {
            E::ValidationFailed(r) => CliError::Validation(r),
            E::InvalidDomain(_)
            | E::InvalidSpacing(_)
            | E::GridTooCoarse { .. }
            | E::Parse(_)
            | E::ForbiddenVariable { .. }
            | E::UnsupportedDimension(_) => CliError::Setup(e),
            E::KSearchDiverged { .. } | E::DegenerateInterior { .. } | E::NotNondegenerate { .. } => {
                CliError::Hypothesis(e)
            }
            e => CliError::Numerical(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Setup(_) => 4,
            CliError::Validation(_) | CliError::Hypothesis(_) => 3,
            CliError::Numerical(_) | CliError::Write { .. } => 1,
        }
    }
}

/// Result of a completed run: the verdict line and its exit code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
    pub line: String,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAILED"
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    h: Option<f64>,
}

impl Context {
    fn problem(&self) -> Result<&ProblemSpec, CliError> {
        self.cfg.problem.as_ref().ok_or(CliError::Config(ConfigError::MissingKey {
            section: "problem",
            key: "domain",
        }))
    }

    fn h(&self) -> Result<f64, CliError> {
        self.h.ok_or(CliError::Config(ConfigError::MissingKey { section: "grid", key: "h" }))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self, report: &Report) -> Result<(), CliError> {
        report.write(&self.path("report.txt"))
    }
}

/// Loads `config_path` and runs `mode`, or the configured mode when `mode`
/// is `None`.
pub fn run(mode: Option<Mode>, config_path: &Path, overrides: &Overrides) -> Result<Outcome, CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    if let (Some(lambda), Some(p)) = (overrides.lambda, cfg.problem.as_mut()) {
        *p = p.with_lambda(lambda);
    }
    let mode = mode.or(cfg.mode).ok_or(ConfigError::MissingKey { section: "run", key: "mode" })?;
    let out = overrides
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).map_err(|source| CliError::Write {
        path: out.clone(),
        source,
    })?;
    let h = overrides.h.or(cfg.h);
    let ctx = Context { cfg, out, h };
    let passed = match mode {
        Mode::Validate => validate(&ctx)?,
        Mode::Certify => certify(&ctx)?,
        Mode::Solve => solve(&ctx)?,
        Mode::Mms => mms(&ctx)?,
        Mode::Eigenbench => eigenbench(&ctx)?,
    };
    Ok(Outcome {
        passed,
        line: format!("{mode}: {}", verdict(passed)),
    })
}

fn header(ctx: &Context, mode: Mode, p: &ProblemSpec, h: f64) -> Report {
    let mut r = Report::default();
    r.push("mode", mode);
    r.push("domain", &p.domain);
    r.real("lambda", p.lambda);
    r.push("m", &p.m);
    r.push("a", &p.a);
    r.push("f", &p.f);
    r.push("g", &p.g);
    r.real("h", h);
    if mode == Mode::Certify || mode == Mode::Solve {
        r.push("certify_with", ctx.cfg.certify_with);
    }
    r
}

fn push_validation(r: &mut Report, v: &ValidationReport) {
    r.push("validation_seed", v.seed);
    r.push("validation_samples", v.samples);
    for c in &v.checks {
        r.push(
            &format!("hypothesis.{:?}", c.hypothesis),
            format!("{} | {} | {}", verdict(c.passed), c.hypothesis.name(), c.detail),
        );
    }
}

/// Runs validation, recording the outcome in `r`; a failure is written out
/// before being returned.
fn checked(ctx: &Context, r: &mut Report, p: &ProblemSpec, grid: &Arc<Grid>) -> Result<(), CliError> {
    match validate_problem(p, grid, ctx.cfg.samples) {
        Ok(v) => {
            push_validation(r, &v);
            Ok(())
        }
        Err(supersol::Error::ValidationFailed(v)) => {
            push_validation(r, &v);
            r.push("verdict", "INVALID");
            ctx.finish(r)?;
            Err(CliError::Validation(v))
        }
        Err(e) => Err(e.into()),
    }
}

fn validate(ctx: &Context) -> Result<bool, CliError> {
    let (p, h) = (ctx.problem()?, ctx.h()?);
    let grid = Grid::build(&p.domain, h)?;
    let mut r = header(ctx, Mode::Validate, p, h);
    checked(ctx, &mut r, p, &grid)?;
    r.push("verdict", verdict(true));
    ctx.finish(&r)?;
    Ok(true)
}

fn push_certificate(r: &mut Report, c: &SupersolutionCertificate) {
    let col = &c.collar;
    r.real("epsilon", col.eps);
    r.real("sigma_eps", col.sigma_eps);
    r.real("fk_bound", col.fk_bound);
    r.real("max_growth", col.max_growth);
    r.push("collar_components", col.components.len());
    r.real("K", c.k);
    r.real("K_boundary", c.k_boundary);
    r.real("K_interior", c.k_interior);
    r.real("tau", c.tau);
    r.real("min_interior_margin", c.min_interior_margin());
    r.real("boundary_margin", c.boundary_margin);
    r.real("check_interior_margin", c.check.interior.margin);
    r.real("check_boundary_margin", c.check.boundary.margin);
    r.real("check_tolerance", -c.check.interior_threshold.bound);
    r.push("check_nodes", c.check.checked_nodes);
    r.push("certificate", c.status);
}

fn certificate(ctx: &Context, r: &mut Report) -> Result<SupersolutionCertificate, CliError> {
    let (p, h) = (ctx.problem()?, ctx.h()?);
    let grid = Grid::build(&p.domain, h)?;
    checked(ctx, r, p, &grid)?;
    let c = build_certificate(p, &grid, ctx.cfg.certify_with)?;
    push_certificate(r, &c);
    let closure = c.supersolution.grid().closure_mask();
    write_field(&ctx.path("phi.csv"), &c.phi, &closure)?;
    write_field(&ctx.path("supersolution.csv"), &c.supersolution, &closure)?;
    write_field(&ctx.path("margin.csv"), &c.interior_margin, c.interior_margin.mask())?;
    Ok(c)
}

fn certify(ctx: &Context) -> Result<bool, CliError> {
    let p = ctx.problem()?;
    let mut r = header(ctx, Mode::Certify, p, ctx.h()?);
    let c = certificate(ctx, &mut r)?;
    r.push("verdict", verdict(c.passed()));
    ctx.finish(&r)?;
    Ok(c.passed())
}

fn solve(ctx: &Context) -> Result<bool, CliError> {
    let p = ctx.problem()?;
    let mut r = header(ctx, Mode::Solve, p, ctx.h()?);
    let c = certificate(ctx, &mut r)?;
    if !c.passed() {
        r.push("verdict", verdict(false));
        ctx.finish(&r)?;
        return Ok(false);
    }
    let closure = c.supersolution.grid().closure_mask();
    let zero = ScalarField::zeros(&closure);
    let tol = ctx.cfg.tol;
    let b = monotone_bracket(p, &zero, &c.supersolution, tol)?;
    let norm = b.above.u.max_abs().max(b.below.u.max_abs());
    let violations = b.above.monotone_violations + b.below.monotone_violations;
    let residual_bound = 10.0 * tol * (1.0 + b.above.shift.max(b.below.shift));
    let passed = violations == 0
        && b.gap <= SOLVE_GAP_TOL * norm.max(f64::MIN_POSITIVE)
        && b.above.residual <= residual_bound
        && b.below.residual <= residual_bound;
    r.real("tol", tol);
    r.push("iterations", b.above.iterations);
    r.push("iterations_below", b.below.iterations);
    r.real("residual", b.above.residual);
    r.real("residual_below", b.below.residual);
    r.real("residual_bound", residual_bound);
    r.real("gap", b.gap);
    r.real("solution_max", norm);
    r.real("shift", b.above.shift);
    r.push("monotone_violations", violations);
    r.push("verdict", verdict(passed));
    write_field(&ctx.path("solution.csv"), &b.above.u, &closure)?;
    write_field(&ctx.path("solution_below.csv"), &b.below.u, &closure)?;
    ctx.finish(&r)?;
    Ok(passed)
}

fn mms(ctx: &Context) -> Result<bool, CliError> {
    let (p, h) = (ctx.problem()?, ctx.h()?);
    let u_star = ctx.cfg.mms_solution.as_ref().ok_or(CliError::Config(ConfigError::MissingKey {
        section: "run",
        key: "mms_solution",
    }))?;
    let mut r = header(ctx, Mode::Mms, p, h);
    r.push("mms_solution", u_star);
    r.real("tol", ctx.cfg.tol);
    let mut rows = Vec::new();
    let mut passed = true;
    let mut prev: Option<f64> = None;
    let mut finest = None;
    for level in 0..=ctx.cfg.mms_halvings {
        let hl = h / 2f64.powi(level as i32);
        let grid = Grid::build(&p.domain, hl)?;
        let res = mms_solve(p, &grid, u_star, ctx.cfg.tol)?;
        let order = prev.map(|e| (e / res.error).log2());
        if let Some(o) = order {
            passed &= (o - 2.0).abs() <= MMS_ORDER_SLACK;
        }
        r.real(&format!("level_{level}.h"), hl);
        r.real(&format!("level_{level}.error"), res.error);
        r.push(&format!("level_{level}.iterations"), res.solve.iterations);
        r.real(&format!("level_{level}.residual"), res.solve.residual);
        if let Some(o) = order {
            r.real(&format!("level_{level}.order"), o);
        }
        rows.push(vec![real(hl), real(res.error), order.map(real).unwrap_or_default()]);
        prev = Some(res.error);
        finest = Some(res);
    }
    r.push("verdict", verdict(passed));
    write_table(&ctx.path("mms.csv"), &["h", "error", "order"], &rows)?;
    if let Some(res) = finest {
        let closure = res.solve.u.grid().closure_mask();
        write_field(&ctx.path("solution.csv"), &res.solve.u, &closure)?;
    }
    ctx.finish(&r)?;
    Ok(passed)
}

fn eigenbench(ctx: &Context) -> Result<bool, CliError> {
    if ctx.cfg.rows.is_empty() {
        return Err(ConfigError::MissingKey {
            section: "eigenbench",
            key: "row",
        }
        .into());
    }
    let mut r = Report::default();
    r.push("mode", Mode::Eigenbench);
    r.real("eigen_tol", ctx.cfg.eigen_tol);
    let mut rows = Vec::new();
    let mut violations = 0;
    for (k, row) in ctx.cfg.rows.iter().enumerate() {
        let h = ctx.h.unwrap_or(row.h);
        let b = eigenbench_row(&row.domain, row.eps, h, ctx.cfg.eigen_tol)?;
        let holds = b.bound_holds();
        violations += usize::from(!holds);
        let eps = b.eps.map(real).unwrap_or_else(|| "-".into());
        r.push(
            &format!("row_{k}"),
            format!(
                "{} | eps {eps} | h {} | measure {} | fk_bound {} | sigma {} | ratio {} | {}",
                b.domain,
                real(h),
                real(b.measure),
                real(b.fk_bound),
                real(b.sigma),
                real(b.ratio),
                verdict(holds)
            ),
        );
        rows.push(vec![
            b.domain.to_string(),
            eps,
            real(h),
            real(b.measure),
            real(b.fk_bound),
            real(b.sigma),
            real(b.ratio),
            holds.to_string(),
        ]);
    }
    r.push("rows", rows.len());
    r.push("violations", violations);
    r.push("verdict", verdict(violations == 0));
    write_table(
        &ctx.path("eigenbench.csv"),
        &["domain", "eps", "h", "measure", "fk_bound", "sigma_computed", "ratio", "bound_holds"],
        &rows,
    )?;
    ctx.finish(&r)?;
    Ok(violations == 0)
}
