use std::fmt;
use std::sync::Arc;

use crate::domain::{Grid, Point};
use crate::eigen::{assemble_laplacian, LaplacianOperator};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::problem::{boundary_data, node_bindings, ProblemSpec, ScalarField};
use crate::solve::spd::EnvelopeCholesky;

/// Derivative samples per node when bounding the shift.
pub const SHIFT_SAMPLES: usize = 64;
/// Headroom factor on the sampled derivative bound.
pub const SHIFT_HEADROOM: f64 = 1.1;
/// Factor applied to the shift after an ordering breach.
const SHIFT_RETRY: f64 = 4.0;
pub const MAX_MONOTONE_ITERS: usize = 10_000;
/// Relaxation of the manufactured-solution iteration.
const MMS_DAMPING: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    FromAbove,
    FromBelow,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::FromAbove => "from_above",
            Branch::FromBelow => "from_below",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Solution on the interior and boundary nodes.
    pub u: ScalarField,
    pub iterations: usize,
    /// [`residual`] of the returned field.
    pub residual: f64,
    /// Ordering breaches detected (each triggers a retry with a larger shift).
    pub monotone_violations: usize,
    /// `None` for the manufactured-solution iteration.
    pub branch: Option<Branch>,
    /// Largest nodal shift in use at the end.
    pub shift: f64,
}

/// Both monotone sequences, run in lockstep.
#[derive(Clone, Debug)]
pub struct Bracket {
    pub above: SolveResult,
    pub below: SolveResult,
    /// `‖u_above − u_below‖_∞`.
    pub gap: f64,
}

/// Interior unknowns of a problem on a grid, with the coefficients sampled.
struct System<'a> {
    p: &'a ProblemSpec,
    grid: Arc<Grid>,
    l: LaplacianOperator,
    env: Vec<Bindings>,
    lm: Vec<f64>,
    a: Vec<f64>,
    /// `g` on boundary nodes, zero elsewhere.
    g: ScalarField,
    /// Boundary contribution `Σ g_j / h²` to each unknown's equation.
    bc: Vec<f64>,
}

impl<'a> System<'a> {
    fn new(p: &'a ProblemSpec, grid: &Arc<Grid>, g: ScalarField) -> Result<Self> {
        let l = assemble_laplacian(&grid.interior_mask())?;
        let mut env = Vec::with_capacity(l.len());
        let mut lm = Vec::with_capacity(l.len());
        let mut a = Vec::with_capacity(l.len());
        for &n in l.nodes() {
            let b = node_bindings(grid, n);
            let at = grid.coords(n);
            lm.push(p.lambda * eval(&p.m, &b, at)?);
            a.push(eval(&p.a, &b, at)?);
            env.push(b);
        }
        let bc = l.apply_nodal(g.values()).into_iter().map(|v| -v).collect();
        Ok(Self {
            p,
            grid: grid.clone(),
            l,
            env,
            lm,
            a,
            g,
            bc,
        })
    }

    fn at(&self, k: usize) -> Point {
        self.grid.coords(self.l.nodes()[k])
    }

    fn f(&self, k: usize, u: f64) -> Result<f64> {
        eval(&self.p.f, &self.env[k].with(Var::U, u), self.at(k))
    }

    /// `SHIFT_HEADROOM · max |λm − a ∂_u f|` over samples of `[lo, hi]`.
    fn shift_bound(&self, k: usize, lo: f64, hi: f64) -> Result<f64> {
        if self.a[k] == 0.0 {
            return Ok(SHIFT_HEADROOM * self.lm[k].abs());
        }
        let mut worst = 0.0f64;
        for s in 0..SHIFT_SAMPLES {
            let u = lo + (hi - lo) * s as f64 / (SHIFT_SAMPLES - 1) as f64;
            let df = self.p.f.partial_u(&self.env[k].with(Var::U, u)).map_err(|source| Error::EvalAt {
                source,
                at: self.at(k),
            })?;
            worst = worst.max((self.lm[k] - self.a[k] * df).abs());
        }
        Ok(SHIFT_HEADROOM * worst)
    }

    /// Right-hand side `(M + λm)u − a f(u) + forcing + boundary terms`.
    fn image(&self, shift: &[f64], u: &[f64], forcing: Option<&[f64]>) -> Result<Vec<f64>> {
        (0..u.len())
            .map(|k| {
                let fu = if self.a[k] == 0.0 { 0.0 } else { self.a[k] * self.f(k, u[k])? };
                let s = forcing.map_or(0.0, |s| s[k]);
                Ok((shift[k] + self.lm[k]) * u[k] - fu + s + self.bc[k])
            })
            .collect()
    }

    /// Interior values from `x`, boundary values from `g`.
    fn field(&self, x: &[f64]) -> Result<ScalarField> {
        let mut values = self.g.values().to_vec();
        for (&n, &v) in self.l.nodes().iter().zip(x) {
            values[n] = v;
        }
        ScalarField::from_fn(&self.grid.closure_mask(), |i| values[i])
    }
}

fn eval(e: &Expr, env: &Bindings, at: Point) -> Result<f64> {
    e.eval(env).map_err(|source| Error::EvalAt { source, at })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max_interior |−Δ_h u − λmu + a f(x,u)| + max_boundary |u − g|`.
pub fn residual(p: &ProblemSpec, u: &ScalarField) -> Result<f64> {
    let grid = u.grid();
    let g = boundary_data(p, grid)?;
    let boundary = g.mask().indices().map(|i| (u.value(i) - g.value(i)).abs()).fold(0.0, f64::max);
    let l = assemble_laplacian(&grid.interior_mask())?;
    let lu = l.apply_nodal(u.values());
    let mut interior = 0.0f64;
    for (k, &n) in l.nodes().iter().enumerate() {
        let env = node_bindings(grid, n);
        let at = grid.coords(n);
        let un = u.value(n);
        let r = lu[k] - p.lambda * eval(&p.m, &env, at)? * un + eval(&p.a, &env, at)? * eval(&p.f, &env.with(Var::U, un), at)?;
        interior = interior.max(r.abs());
    }
    Ok(interior + boundary)
}

enum Stop {
    Branch(Branch),
    Both,
}

/// Runs both monotone sequences from `upper` and `lower` in lockstep until
/// the stopping rule holds.
///
/// The shift at each node bounds `|λm − a ∂_u f|` over the current bracket
/// `[lo_k, hi_k]` rather than over `[0, max upper]`: the bracket only
/// shrinks, so the shift relaxes as the iteration converges and the linear
/// system is refactored when its largest entry has halved.
fn lockstep(p: &ProblemSpec, lower: &ScalarField, upper: &ScalarField, tol: f64, stop: Stop) -> Result<Bracket> {
    let grid = upper.grid().clone();
    if !lower.grid().same_layout(&grid) {
        return Err(Error::GridMismatch);
    }
    let closure = grid.closure_mask();
    let g = boundary_data(p, &grid)?;
    let slack = 1e-10 * upper.max_on(&closure).abs().max(lower.max_on(&closure).abs());
    for i in closure.indices() {
        let (lo, hi) = (lower.value(i), upper.value(i));
        if lo > hi + slack {
            return Err(Error::InvalidPair(format!("lower exceeds upper at {:?}", grid.coords(i))));
        }
    }
    for i in g.mask().indices() {
        if upper.value(i) < g.value(i) - slack {
            return Err(Error::InvalidPair(format!("upper below g at {:?}", grid.coords(i))));
        }
        if lower.value(i) > g.value(i) + slack {
            return Err(Error::InvalidPair(format!("lower above g at {:?}", grid.coords(i))));
        }
    }

    let sys = System::new(p, &grid, g)?;
    let n = sys.l.len();
    let mut hi = sys.l.gather(upper);
    let mut lo = sys.l.gather(lower);
    let mut shift = vec![0.0; n];
    let mut factor: Option<EnvelopeCholesky> = None;
    let mut boost = 1.0;
    let mut violations = 0;
    let mut iterations = 0;

    loop {
        if iterations == MAX_MONOTONE_ITERS {
            return Err(Error::NoConvergence {
                max_iters: MAX_MONOTONE_ITERS,
            });
        }
        let need = (0..n)
            .map(|k| Ok(boost * sys.shift_bound(k, lo[k], hi[k])?))
            .collect::<Result<Vec<f64>>>()?;
        let top = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let stale = need.iter().zip(&shift).any(|(n, s)| n > s) || top(&need) < 0.5 * top(&shift);
        if factor.is_none() || stale {
            shift = need;
            factor = Some(EnvelopeCholesky::factor_diag(&sys.l, |k| shift[k])?);
        }
        let chol = factor.as_ref().expect("factored above");
        let mut hi_next = sys.image(&shift, &hi, None)?;
        let mut lo_next = sys.image(&shift, &lo, None)?;
        chol.solve_in_place(&mut hi_next);
        chol.solve_in_place(&mut lo_next);

        let breach = (0..n)
            .map(|k| (hi_next[k] - hi[k]).max(lo[k] - lo_next[k]).max(lo_next[k] - hi_next[k]))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |w, (k, e)| if e > w.1 { (k, e) } else { w });
        if breach.1 > slack {
            violations += 1;
            if boost > 1.0 {
                return Err(Error::MonotonicityBroken {
                    excess: breach.1,
                    node: sys.l.nodes()[breach.0],
                    shift: shift[breach.0],
                });
            }
            boost = SHIFT_RETRY;
            factor = None;
            continue;
        }

        iterations += 1;
        let step_hi = max_diff(&hi_next, &hi);
        let step_lo = max_diff(&lo_next, &lo);
        hi = hi_next;
        lo = lo_next;
        let done = match stop {
            Stop::Branch(Branch::FromAbove) => step_hi <= tol,
            Stop::Branch(Branch::FromBelow) => step_lo <= tol,
            Stop::Both => step_hi <= tol && step_lo <= tol,
        };
        if done {
            break;
        }
    }

    let shift_max = shift.iter().copied().fold(0.0, f64::max);
    let result = |x: &[f64], branch| -> Result<SolveResult> {
        let u = sys.field(x)?;
        Ok(SolveResult {
            residual: residual(p, &u)?,
            u,
            iterations,
            monotone_violations: violations,
            branch: Some(branch),
            shift: shift_max,
        })
    };
    Ok(Bracket {
        gap: max_diff(&hi, &lo),
        above: result(&hi, Branch::FromAbove)?,
        below: result(&lo, Branch::FromBelow)?,
    })
}

/// Monotone iteration `(−Δ_h + M) u_{k+1} = (M + λm) u_k − a f(x, u_k)` with
/// Dirichlet data `g`, started from `upper` (nonincreasing) or `lower`
/// (nondecreasing), until `‖u_{k+1} − u_k‖_∞ ≤ tol`.
///
/// `lower` and `upper` must be an ordered sub/supersolution pair on the same
/// grid; the sequence from the other end is advanced alongside to keep the
/// shift adapted to the current bracket. A breach of the ordering retries the
/// step once with four times the shift.
pub fn monotone_iterate(
    p: &ProblemSpec,
    lower: &ScalarField,
    upper: &ScalarField,
    branch: Branch,
    tol: f64,
) -> Result<SolveResult> {
    let b = lockstep(p, lower, upper, tol, Stop::Branch(branch))?;
    Ok(match branch {
        Branch::FromAbove => b.above,
        Branch::FromBelow => b.below,
    })
}

/// Both monotone sequences, iterated until each step is below `tol`.
pub fn monotone_bracket(p: &ProblemSpec, lower: &ScalarField, upper: &ScalarField, tol: f64) -> Result<Bracket> {
    lockstep(p, lower, upper, tol, Stop::Both)
}

#[derive(Clone, Debug)]
pub struct MmsResult {
    pub solve: SolveResult,
    /// `max |u − u*|` over interior and boundary nodes.
    pub error: f64,
}

/// Solves the problem with a forcing term chosen so that `u_star` is the
/// exact solution of the continuous problem, and reports the nodal error.
///
/// The forcing `−Δu* − λm u* + a f(x, u*)` uses centered differences of the
/// expression with step `h/4`; the boundary data is `u*` at the boundary
/// nodes. The iteration is the shifted fixed point of [`monotone_iterate`],
/// relaxed by one half.
pub fn mms_solve(p: &ProblemSpec, grid: &Arc<Grid>, u_star: &Expr, tol: f64) -> Result<MmsResult> {
    for var in [Var::U, Var::D] {
        if u_star.uses(var) {
            return Err(Error::ForbiddenVariable {
                expr: u_star.to_string(),
                var: var.name(),
            });
        }
    }
    let exact = |pt: Point| eval(u_star, &Bindings::at(pt[0], pt[1], 0.0), pt);
    let closure = grid.closure_mask();
    let ustar = ScalarField::try_from_fn(&closure, |i| exact(grid.coords(i)))?;
    let g = ScalarField::try_from_fn(&grid.boundary_mask(), |i| Ok(ustar.value(i)))?;
    let sys = System::new(p, grid, g)?;
    let n = sys.l.len();

    let step = grid.spacing() / 4.0;
    let dims = grid.dimension();
    let mut forcing = Vec::with_capacity(n);
    for k in 0..n {
        let pt = sys.at(k);
        let centre = exact(pt)?;
        let mut lap = 0.0;
        for axis in 0..dims {
            let (mut fwd, mut bwd) = (pt, pt);
            fwd[axis] += step;
            bwd[axis] -= step;
            lap += (exact(fwd)? - 2.0 * centre + exact(bwd)?) / (step * step);
        }
        let fu = if sys.a[k] == 0.0 { 0.0 } else { sys.a[k] * sys.f(k, centre)? };
        forcing.push(-lap - sys.lm[k] * centre + fu);
    }

    let lo = ustar.min_on(&closure).min(0.0);
    let hi = ustar.max_on(&closure).max(0.0);
    let shift = (0..n).map(|k| sys.shift_bound(k, lo, hi)).collect::<Result<Vec<f64>>>()?;
    let chol = EnvelopeCholesky::factor_diag(&sys.l, |k| shift[k])?;
    let mut u = vec![0.0; n];
    let mut iterations = 0;
    loop {
        if iterations == MAX_MONOTONE_ITERS {
            return Err(Error::NoConvergence {
                max_iters: MAX_MONOTONE_ITERS,
            });
        }
        let mut next = sys.image(&shift, &u, Some(&forcing))?;
        chol.solve_in_place(&mut next);
        for (x, u) in next.iter_mut().zip(&u) {
            *x = u + MMS_DAMPING * (*x - u);
        }
        iterations += 1;
        let change = max_diff(&next, &u);
        u = next;
        if change <= tol {
            break;
        }
    }

    let field = sys.field(&u)?;
    let mut res = 0.0f64;
    let lu = sys.l.apply_nodal(field.values());
    for k in 0..n {
        let fu = if sys.a[k] == 0.0 { 0.0 } else { sys.a[k] * sys.f(k, u[k])? };
        res = res.max((lu[k] - sys.lm[k] * u[k] + fu - forcing[k]).abs());
    }
    let error = closure.indices().map(|i| (field.value(i) - ustar.value(i)).abs()).fold(0.0, f64::max);
    Ok(MmsResult {
        solve: SolveResult {
            u: field,
            iterations,
            residual: res,
            monotone_violations: 0,
            branch: None,
            shift: shift.iter().copied().fold(0.0, f64::max),
        },
        error,
    })
}
