//! Problem data and hypothesis checks.
//!
//! A [`ProblemSpec`] holds the data of the boundary value problem
//!
//! ```text
//! -Δu = λ m(x) u - a(x) f(x, u)   in Ω
//!   u = g(x)                      on ∂Ω
//! ```
//!
//! with the absorption weight `a` vanishing on ∂Ω. The standing hypotheses on
//! `a`, `g` and `f` are checked by sampling in [`validate_problem`]; the
//! superlinearity of `f` is a limit statement, so that check can only falsify,
//! never prove.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{DomainSpec, Grid, NodeClass, Point, RegionMask};
use crate::error::{Error, Result};
use crate::expr::{self, Bindings, EvalError, Expr, Var};

/// Nodal values on the nodes of a mask. Values are finite; nodes outside the
/// mask read as zero.
#[derive(Clone, Debug)]
pub struct ScalarField {
    mask: RegionMask,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(mask: &RegionMask, mut value: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::try_from_fn(mask, |i| Ok(value(i)))
    }

    pub fn try_from_fn(mask: &RegionMask, mut value: impl FnMut(usize) -> Result<f64>) -> Result<Self> {
        let grid = mask.grid();
        let mut values = vec![0.0; grid.len()];
        for i in mask.indices() {
            let v = value(i)?;
            if !v.is_finite() {
                return Err(Error::EvalAt {
                    source: EvalError::Domain { op: "non-finite value", arg: v },
                    at: grid.coords(i),
                });
            }
            values[i] = v;
        }
        Ok(Self {
            mask: mask.clone(),
            values,
        })
    }

    pub fn constant(mask: &RegionMask, c: f64) -> Result<Self> {
        Self::from_fn(mask, |_| c)
    }

    pub fn zeros(mask: &RegionMask) -> Self {
        Self {
            mask: mask.clone(),
            values: vec![0.0; mask.grid().len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.mask.grid()
    }

    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }

    /// Value at a node, `None` outside the mask.
    pub fn get(&self, idx: usize) -> Option<f64> {
        self.mask.contains(idx).then(|| self.values[idx])
    }

    /// Value at a node, zero outside the mask.
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// All node values (grid length, zero outside the mask).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self, k: f64) -> Result<ScalarField> {
        ScalarField::from_fn(&self.mask, |i| k * self.values[i])
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a * b)
    }

    fn zip(&self, other: &ScalarField, op: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !self.grid().same_layout(other.grid()) || self.mask.members_differ(&other.mask) {
            return Err(Error::GridMismatch);
        }
        ScalarField::from_fn(&self.mask, |i| op(self.values[i], other.values[i]))
    }

    pub fn max_abs(&self) -> f64 {
        self.mask.indices().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    /// Minimum over the nodes of `over` (which must lie in the field's mask).
    pub fn min_on(&self, over: &RegionMask) -> f64 {
        over.indices().map(|i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_on(&self, over: &RegionMask) -> f64 {
        over.indices().map(|i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl RegionMask {
    fn members_differ(&self, other: &RegionMask) -> bool {
        !(self.is_subset_of(other) && other.is_subset_of(self))
    }
}

/// Data of the boundary value problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub lambda: f64,
    /// Growth weight m(x, y, d); may change sign.
    pub m: Expr,
    /// Absorption weight a(x, y, d) ≥ 0, vanishing on ∂Ω.
    pub a: Expr,
    /// Dirichlet data g(x, y, d), evaluated at boundary points.
    pub g: Expr,
    /// Nonlinearity f(x, y, d, u).
    pub f: Expr,
}

impl ProblemSpec {
    pub fn new(domain: DomainSpec, lambda: f64, m: Expr, a: Expr, g: Expr, f: Expr) -> Result<Self> {
        for e in [&m, &a, &g] {
            if e.uses(Var::U) {
                return Err(Error::ForbiddenVariable {
                    expr: e.to_string(),
                    var: 'u',
                });
            }
        }
        Ok(Self {
            domain,
            lambda,
            m,
            a,
            g,
            f,
        })
    }

    /// Builds a problem from expression sources.
    pub fn parse(domain: DomainSpec, lambda: f64, m: &str, a: &str, g: &str, f: &str) -> Result<Self> {
        Self::new(domain, lambda, expr::parse(m)?, expr::parse(a)?, expr::parse(g)?, expr::parse(f)?)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }
}

/// Position bindings for the coefficients at a grid node. A boundary node
/// stands for its nearest boundary point, so it takes the foot's bindings.
pub fn node_bindings(grid: &Grid, idx: usize) -> Bindings {
    if grid.class(idx) == NodeClass::Boundary {
        return foot_bindings(grid, idx);
    }
    let p = grid.coords(idx);
    Bindings::at(p[0], p[1], grid.distance(idx))
}

/// Position bindings of the boundary point nearest to a node (`d = 0`).
pub fn foot_bindings(grid: &Grid, idx: usize) -> Bindings {
    let p = grid.boundary_foot(idx);
    Bindings::at(p[0], p[1], 0.0)
}

fn eval_at(e: &Expr, env: &Bindings, at: Point) -> Result<f64> {
    e.eval(env).map_err(|source| Error::EvalAt { source, at })
}

/// Nodal samples of a position-only expression, with `d = |signed distance|`.
pub fn sample_field(e: &Expr, mask: &RegionMask) -> Result<ScalarField> {
    if e.uses(Var::U) {
        return Err(Error::ForbiddenVariable {
            expr: e.to_string(),
            var: 'u',
        });
    }
    let grid = mask.grid();
    ScalarField::try_from_fn(mask, |i| eval_at(e, &node_bindings(grid, i), grid.coords(i)))
}

/// Dirichlet data on the boundary nodes, taken at the nearest point of ∂Ω.
pub fn boundary_data(p: &ProblemSpec, grid: &Arc<Grid>) -> Result<ScalarField> {
    let mask = grid.boundary_mask();
    ScalarField::try_from_fn(&mask, |i| eval_at(&p.g, &foot_bindings(grid, i), grid.boundary_foot(i)))
}

/// Seed of the sampling in [`validate_problem`].
pub const VALIDATION_SEED: u64 = 0x5eed_0f_1061;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    CoefficientsFinite,
    ANonnegative,
    AVanishesOnBoundary,
    APositiveInside,
    GNonnegative,
    GNontrivial,
    FZeroAtZero,
    FIncreasing,
    FSuperlinear,
}

impl Hypothesis {
    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::CoefficientsFinite => "coefficients evaluate to finite values",
            Hypothesis::ANonnegative => "a >= 0 on the closed domain",
            Hypothesis::AVanishesOnBoundary => "a = 0 on the boundary",
            Hypothesis::APositiveInside => "a > 0 inside the domain",
            Hypothesis::GNonnegative => "g >= 0 on the boundary",
            Hypothesis::GNontrivial => "g is not identically zero",
            Hypothesis::FZeroAtZero => "f(x, 0) = 0",
            Hypothesis::FIncreasing => "f is increasing in u",
            Hypothesis::FSuperlinear => "superlinearity: f(x, k u)/k grows without bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    /// The most adverse value seen (meaning depends on the hypothesis).
    pub worst: f64,
    pub witness: Option<Point>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, h: Hypothesis) -> &HypothesisCheck {
        self.checks.iter().find(|c| c.hypothesis == h).expect("every hypothesis is checked")
    }

    /// Names and details of the failed checks.
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.hypothesis.name(), c.detail))
            .collect()
    }
}

/// Tracks the worst value of one hypothesis over many evaluations.
struct Tracker {
    hypothesis: Hypothesis,
    passed: bool,
    worst: f64,
    witness: Option<Point>,
    detail: String,
    minimize: bool,
}

impl Tracker {
    fn new(hypothesis: Hypothesis, minimize: bool) -> Self {
        Self {
            hypothesis,
            passed: true,
            worst: if minimize { f64::INFINITY } else { f64::NEG_INFINITY },
            witness: None,
            detail: String::new(),
            minimize,
        }
    }

    fn observe(&mut self, value: f64, at: Point, ok: bool) {
        let worse = if self.minimize { value < self.worst } else { value > self.worst };
        if worse || self.witness.is_none() {
            self.worst = value;
            self.witness = Some(at);
        }
        if !ok && self.passed {
            self.passed = false;
            self.detail = format!("violated at ({}, {}) with value {value}", at[0], at[1]);
        }
    }

    fn fail(&mut self, at: Point, why: impl std::fmt::Display) {
        if self.passed {
            self.passed = false;
            self.witness = Some(at);
            self.detail = format!("at ({}, {}): {why}", at[0], at[1]);
        }
    }

    fn finish(self) -> HypothesisCheck {
        let detail = if self.passed {
            match self.witness {
                Some(w) => format!("worst {} at ({}, {})", self.worst, w[0], w[1]),
                None => "no samples".to_string(),
            }
        } else {
            self.detail
        };
        HypothesisCheck {
            hypothesis: self.hypothesis,
            passed: self.passed,
            worst: self.worst,
            witness: self.witness,
            detail,
        }
    }
}

/// Checks the standing hypotheses on a, g and f by sampling on `grid`.
///
/// Returns the report when every hypothesis passes and
/// [`Error::ValidationFailed`] carrying it otherwise. The sampled (x, u) pairs
/// come from a fixed seed, so the verdict is reproducible.
pub fn validate_problem(p: &ProblemSpec, grid: &Arc<Grid>, samples: usize) -> Result<ValidationReport> {
    let closure: Vec<usize> = grid.closure_mask().indices().collect();

    let mut finite = Tracker::new(Hypothesis::CoefficientsFinite, false);
    let mut a_nonneg = Tracker::new(Hypothesis::ANonnegative, true);
    let mut a_zero = Tracker::new(Hypothesis::AVanishesOnBoundary, false);
    let mut a_pos = Tracker::new(Hypothesis::APositiveInside, true);
    let mut g_nonneg = Tracker::new(Hypothesis::GNonnegative, true);
    let mut g_nonzero = Tracker::new(Hypothesis::GNontrivial, false);

    let mut a_scale = 1.0f64;
    let mut a_nodes = Vec::with_capacity(closure.len());
    for &i in &closure {
        let at = grid.coords(i);
        let env = node_bindings(grid, i);
        match (p.a.eval(&env), p.m.eval(&env)) {
            (Ok(a), Ok(m)) if a.is_finite() && m.is_finite() => {
                a_scale = a_scale.max(a.abs());
                a_nodes.push((i, a));
            }
            (Err(e), _) | (_, Err(e)) => finite.fail(at, e),
            _ => finite.fail(at, "infinite coefficient"),
        }
    }
    for &(i, a) in &a_nodes {
        // Boundary nodes may sit just outside Ω; their a is checked at the foot.
        if grid.class(i) == NodeClass::Interior {
            let at = grid.coords(i);
            a_nonneg.observe(a, at, a >= 0.0);
            a_pos.observe(a, at, a > 0.0);
        }
    }
    let tol = 1e-12 * a_scale;
    for i in grid.boundary_mask().indices() {
        let foot = grid.boundary_foot(i);
        let env = foot_bindings(grid, i);
        match p.a.eval(&env) {
            Ok(a) => {
                a_nonneg.observe(a, foot, a >= -tol);
                a_zero.observe(a.abs(), foot, a.abs() <= tol);
            }
            Err(e) => finite.fail(foot, e),
        }
        match p.g.eval(&env) {
            Ok(g) if g.is_finite() => {
                g_nonneg.observe(g, foot, g >= 0.0);
                g_nonzero.observe(g, foot, true);
            }
            Ok(_) => finite.fail(foot, "infinite boundary value"),
            Err(e) => finite.fail(foot, e),
        }
    }
    if g_nonzero.worst <= 0.0 {
        let at = g_nonzero.witness.unwrap_or([0.0, 0.0]);
        g_nonzero.fail(at, "g vanishes at every boundary node");
    }

    let mut f_zero = Tracker::new(Hypothesis::FZeroAtZero, false);
    let mut f_inc = Tracker::new(Hypothesis::FIncreasing, true);
    let mut f_sup = Tracker::new(Hypothesis::FSuperlinear, true);
    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
    for _ in 0..samples {
        let i = closure[rng.random_range(0..closure.len())];
        let u = 10f64.powf(rng.random_range(-2.0..1.0));
        let at = grid.coords(i);
        let env = node_bindings(grid, i);
        let f_at = |u: f64| p.f.eval(&env.with(Var::U, u));

        match (f_at(0.0), f_at(1.0)) {
            (Ok(f0), Ok(f1)) => f_zero.observe(f0.abs(), at, f0.abs() <= 1e-12 * f1.abs().max(1.0)),
            (Err(e), _) | (_, Err(e)) => f_zero.fail(at, e),
        }
        match p.f.partial_u(&env.with(Var::U, u)) {
            Ok(df) => f_inc.observe(df, at, df > 0.0),
            Err(e) => f_inc.fail(at, e),
        }
        match superlinear_growth(&p.f, &env, u) {
            Ok((growth, ok)) => f_sup.observe(growth, at, ok),
            Err(e) => f_sup.fail(at, e),
        }
    }

    let report = ValidationReport {
        seed: VALIDATION_SEED,
        samples,
        checks: vec![
            finite.finish(),
            a_nonneg.finish(),
            a_zero.finish(),
            a_pos.finish(),
            g_nonneg.finish(),
            g_nonzero.finish(),
            f_zero.finish(),
            f_inc.finish(),
            f_sup.finish(),
        ],
    };
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::ValidationFailed(Box::new(report)))
    }
}

/// Ratios `f(x, 2^j u) / 2^j` for `j = 0..=20` must increase strictly (an
/// overflow to +inf counts as unbounded growth). Returns the overall growth
/// factor and the verdict.
fn superlinear_growth(f: &Expr, env: &Bindings, u: f64) -> Result<(f64, bool), EvalError> {
    let first = f.eval(&env.with(Var::U, u))?;
    let mut prev = first;
    let mut ok = true;
    for j in 1..=20 {
        let k = (1u64 << j) as f64;
        let r = f.eval(&env.with(Var::U, k * u))? / k;
        if !(r > prev || prev == f64::INFINITY) {
            ok = false;
        }
        prev = r;
    }
    Ok((prev / first.abs().max(f64::MIN_POSITIVE), ok))
}
