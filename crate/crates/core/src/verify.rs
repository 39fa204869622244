//! Pointwise checks of the sub- and supersolution inequalities and of the
//! ordering of two fields.
//!
//! The checker recomputes `m`, `a` and `f` from the problem's expressions and
//! shares only the Laplacian stencil with the rest of the crate.
//!
//! The differential inequality is checked at every interior node and also at
//! each boundary node whose whole stencil lies in the field's mask, that is
//! wherever the field extends past Ω̄. A field known only on Ω̄ is checked on
//! the interior nodes alone.

use std::fmt;

use crate::domain::{NodeClass, Point, RegionMask};
use crate::eigen::assemble_laplacian;
use crate::error::{Error, Result};
use crate::expr::Var;
use crate::problem::{foot_bindings, node_bindings, ProblemSpec, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Supersolution,
    Subsolution,
    Ordering,
}

/// Smallest slack over a node set; positive slack means the inequality
/// holds with room to spare. `node` is `None` for an empty set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorstNode {
    pub margin: f64,
    pub node: Option<usize>,
    pub at: Option<Point>,
}

impl WorstNode {
    fn empty() -> Self {
        Self {
            margin: f64::INFINITY,
            node: None,
            at: None,
        }
    }

    /// Keeps the smaller margin; ties go to the lower node index.
    fn offer(&mut self, margin: f64, node: usize, at: Point) {
        if margin < self.margin || self.node.is_none() {
            *self = Self {
                margin,
                node: Some(node),
                at: Some(at),
            };
        }
    }
}

/// Acceptance rule for a margin: `margin ≥ bound`, or `> bound` if strict.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub bound: f64,
    pub strict: bool,
}

impl Threshold {
    pub fn admits(&self, margin: f64) -> bool {
        if self.strict {
            margin > self.bound
        } else {
            margin >= self.bound
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub kind: CheckKind,
    pub interior: WorstNode,
    pub boundary: WorstNode,
    pub interior_threshold: Threshold,
    pub boundary_threshold: Threshold,
    /// Nodes where the differential inequality was evaluated.
    pub checked_nodes: usize,
}

impl CheckReport {
    pub fn verdict(&self) -> Verdict {
        if self.interior_threshold.admits(self.interior.margin) && self.boundary_threshold.admits(self.boundary.margin)
        {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    /// Both margins strictly positive.
    pub fn strict(&self) -> bool {
        self.interior.margin > 0.0 && self.boundary.margin > 0.0
    }
}

/// `10·h²·max(1, ‖u‖_∞(|λ|·‖m‖_∞ + 1))`.
pub fn default_tolerance(p: &ProblemSpec, u: &ScalarField) -> Result<f64> {
    let grid = u.grid();
    let mut m_max = 0.0f64;
    for i in grid.closure_mask().indices() {
        let at = grid.coords(i);
        let m = p.m.eval(&node_bindings(grid, i)).map_err(|source| Error::EvalAt { source, at })?;
        m_max = m_max.max(m.abs());
    }
    let scale = (u.max_abs() * (p.lambda.abs() * m_max + 1.0)).max(1.0);
    let h = grid.spacing();
    Ok(10.0 * h * h * scale)
}

/// Nodes where the differential inequality is evaluated for `u`.
pub fn checked_nodes(u: &ScalarField) -> RegionMask {
    let grid = u.grid();
    let mask = u.mask();
    RegionMask::from_fn(grid, |g, i| match g.class(i) {
        NodeClass::Interior => true,
        NodeClass::Boundary => mask.contains(i) && g.stencil(i)[..g.stencil_len()].iter().all(|n| n.is_some_and(|n| mask.contains(n))),
        NodeClass::Exterior => false,
    })
}

/// `(−Δ_h u)_i − λ m_i u_i + a_i f(x_i, u_i)` at the checked nodes.
pub fn operator_margins(p: &ProblemSpec, u: &ScalarField) -> Result<ScalarField> {
    let grid = u.grid();
    let nodes = checked_nodes(u);
    let l = assemble_laplacian(&nodes)?;
    let lu = l.apply_nodal(u.values());
    let mut values = vec![0.0; grid.len()];
    for (&i, lu) in l.nodes().iter().zip(lu) {
        let at = grid.coords(i);
        let env = node_bindings(grid, i);
        let ui = u.value(i);
        let wrap = |source| Error::EvalAt { source, at };
        let m = p.m.eval(&env).map_err(wrap)?;
        let a = p.a.eval(&env).map_err(wrap)?;
        let f = p.f.eval(&env.with(Var::U, ui)).map_err(wrap)?;
        values[i] = lu - p.lambda * m * ui + a * f;
    }
    ScalarField::from_fn(&nodes, |i| values[i])
}

/// `u − g` at each boundary node, `g` taken at the nearest boundary point.
fn boundary_gaps(p: &ProblemSpec, u: &ScalarField) -> Result<Vec<(usize, f64)>> {
    let grid = u.grid();
    grid.boundary_mask()
        .indices()
        .map(|i| {
            let at = grid.boundary_foot(i);
            let g = p.g.eval(&foot_bindings(grid, i)).map_err(|source| Error::EvalAt { source, at })?;
            Ok((i, u.value(i) - g))
        })
        .collect()
}

fn check(p: &ProblemSpec, u: &ScalarField, tol: f64, sign: f64, kind: CheckKind) -> Result<CheckReport> {
    let grid = u.grid();
    let mut interior = WorstNode::empty();
    let values = operator_margins(p, u)?;
    for i in values.mask().indices() {
        interior.offer(sign * values.value(i), i, grid.coords(i));
    }
    let mut boundary = WorstNode::empty();
    for (i, gap) in boundary_gaps(p, u)? {
        boundary.offer(sign * gap, i, grid.coords(i));
    }
    Ok(CheckReport {
        kind,
        interior,
        boundary,
        interior_threshold: Threshold {
            bound: -tol,
            strict: false,
        },
        boundary_threshold: Threshold {
            bound: 0.0,
            strict: false,
        },
        checked_nodes: values.mask().count(),
    })
}

/// Supersolution test: `(−Δ_h u) − λmu + a f(x,u) ≥ −tol` at the checked
/// nodes and `u ≥ g` on the boundary nodes.
pub fn check_supersolution(p: &ProblemSpec, u: &ScalarField, tol: f64) -> Result<CheckReport> {
    check(p, u, tol, 1.0, CheckKind::Supersolution)
}

/// Subsolution test: `(−Δ_h u) − λmu + a f(x,u) ≤ tol` at the checked nodes
/// and `u ≤ g` on the boundary nodes. Margins are reported with the sign
/// flipped, so positive still means satisfied.
pub fn check_subsolution(p: &ProblemSpec, u: &ScalarField, tol: f64) -> Result<CheckReport> {
    check(p, u, tol, -1.0, CheckKind::Subsolution)
}

/// `lower < upper` at every interior and boundary node; margins are the
/// smallest gaps `upper − lower`.
pub fn check_ordering(lower: &ScalarField, upper: &ScalarField) -> Result<CheckReport> {
    let grid = upper.grid();
    if !lower.grid().same_layout(grid) {
        return Err(Error::GridMismatch);
    }
    let mut interior = WorstNode::empty();
    let mut boundary = WorstNode::empty();
    let mut count = 0;
    for i in grid.closure_mask().indices() {
        let gap = upper.value(i) - lower.value(i);
        match grid.class(i) {
            NodeClass::Interior => {
                interior.offer(gap, i, grid.coords(i));
                count += 1;
            }
            _ => boundary.offer(gap, i, grid.coords(i)),
        }
    }
    let strict = Threshold {
        bound: 0.0,
        strict: true,
    };
    Ok(CheckReport {
        kind: CheckKind::Ordering,
        interior,
        boundary,
        interior_threshold: strict,
        boundary_threshold: strict,
        checked_nodes: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DomainSpec, Grid};

    fn interval(h: f64) -> std::sync::Arc<Grid> {
        Grid::build(&DomainSpec::interval(0.0, 1.0).unwrap(), h).unwrap()
    }

    #[test]
    fn quadratic_bump_is_supersolution_with_unit_margin() {
        let grid = interval(1.0 / 16.0);
        let p = ProblemSpec::parse(grid.domain().clone(), 0.0, "1", "0", "1", "u^2").unwrap();
        let u = ScalarField::from_fn(&grid.closure_mask(), |i| {
            let x = grid.coords(i)[0];
            1.0 + x * (1.0 - x) / 2.0
        })
        .unwrap();
        let r = check_supersolution(&p, &u, 0.0).unwrap();
        assert!(r.passed());
        assert!((r.interior.margin - 1.0).abs() < 1e-9);
        assert!(r.boundary.margin.abs() < 1e-15);
    }

    #[test]
    fn zero_fails_as_supersolution_and_passes_as_subsolution() {
        let grid = interval(1.0 / 8.0);
        let p = ProblemSpec::parse(grid.domain().clone(), 10.0, "1", "d", "1", "u^2").unwrap();
        let zero = ScalarField::zeros(&grid.closure_mask());
        let sup = check_supersolution(&p, &zero, 0.0).unwrap();
        assert_eq!(sup.verdict(), Verdict::Fail);
        assert_eq!(sup.boundary.margin, -1.0);
        assert_eq!(sup.boundary.node, Some(grid.boundary_mask().indices().next().unwrap()));
        assert!(check_subsolution(&p, &zero, 0.0).unwrap().passed());
    }

    #[test]
    fn ordering_examples() {
        let grid = interval(0.25);
        let zero = ScalarField::zeros(&grid.closure_mask());
        let one = ScalarField::constant(&grid.closure_mask(), 1.0).unwrap();
        let r = check_ordering(&zero, &one).unwrap();
        assert!(r.passed());
        assert_eq!(r.interior.margin, 1.0);
        assert!(!check_ordering(&one, &one).unwrap().passed());
        let dip = ScalarField::from_fn(&grid.closure_mask(), |i| if i == 3 { 0.0 } else { 1.0 }).unwrap();
        let r = check_ordering(&zero, &dip).unwrap();
        assert!(!r.passed());
        assert_eq!(r.interior.node, Some(3));
        let other = interval(0.125);
        assert!(matches!(
            check_ordering(&ScalarField::zeros(&other.closure_mask()), &one),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn boundary_nodes_checked_when_field_extends_outside() {
        let grid = Grid::build_padded(&DomainSpec::interval(0.0, 1.0).unwrap(), 1.0 / 8.0, 3).unwrap();
        let p = ProblemSpec::parse(grid.domain().clone(), 10.0, "1", "d", "1", "u^2").unwrap();
        let inside = ScalarField::constant(&grid.closure_mask(), 1e6).unwrap();
        let everywhere = ScalarField::constant(&grid.full_mask(), 1e6).unwrap();
        let a = check_supersolution(&p, &inside, 0.0).unwrap();
        let b = check_supersolution(&p, &everywhere, 0.0).unwrap();
        assert!(a.passed());
        assert_eq!(b.checked_nodes, a.checked_nodes + 2);
        assert!(!b.passed());
        assert_eq!(grid.class(b.interior.node.unwrap()), NodeClass::Boundary);
    }
}
