//! Positive strict supersolutions for a weight that vanishes on the boundary.
//!
//! Near ∂Ω the absorption term cannot help, so the supersolution there is a
//! multiple of the principal eigenfunction of the tube `O_ε` of points within
//! `ε` of ∂Ω; `ε` is small enough that `σ_ε > max λm`. Deeper inside, where
//! `a > 0`, the eigenfunction is blended into a positive constant and the
//! superlinear absorption dominates once the multiple `K` is large.
//!
//! Node sets, by distance `d` to ∂Ω:
//!
//! ```text
//! collar  Ω̄ ∩ {d < ε/2}          Φ = φ
//! band    Ω ∩ {ε/2 ≤ d ≤ 3ε/4}   Φ = χ(s)φ + (1 − χ(s))c,  s = (d − ε/2)/(ε/4)
//! core    Ω ∩ {d > 3ε/4}         Φ = c
//! ```
//!
//! with `χ(s) = 1 − (10s³ − 15s⁴ + 6s⁵)` and `c` the minimum of `φ` on the band.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::domain::{tubular_mask, Grid, NodeClass, Point, RegionMask, TubeSide};
use crate::eigen::{
    assemble_laplacian, collar_padding, component_eigenpairs, faber_krahn_bound, EigenPair, DEFAULT_EIGEN_TOL,
};
use crate::error::{Error, Result};
use crate::expr::Var;
use crate::problem::{foot_bindings, node_bindings, sample_field, ProblemSpec, ScalarField};
use crate::verify::{check_supersolution, default_tolerance, CheckReport};

/// Required relative excess of `σ_ε` over `max λm`, and of `K` over its
/// lower bounds.
pub const SAFETY_FACTOR: f64 = 1.05;
pub const MAX_DOUBLINGS: usize = 60;
const BISECTION_STEPS: usize = 200;

/// How the eigenvalue condition on `ε` is certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertifyWith {
    /// The computed principal eigenvalue of the tube.
    Computed,
    /// The Faber–Krahn lower bound from the tube's measure.
    FaberKrahn,
}

impl fmt::Display for CertifyWith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertifyWith::Computed => "computed",
            CertifyWith::FaberKrahn => "faber_krahn",
        })
    }
}

impl FromStr for CertifyWith {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "computed" => Ok(CertifyWith::Computed),
            "faber_krahn" => Ok(CertifyWith::FaberKrahn),
            other => Err(format!("unknown certify_with `{other}` (expected computed or faber_krahn)")),
        }
    }
}

/// The tube `O_ε` with its eigenpairs and the induced partition of Ω̄.
#[derive(Clone, Debug)]
pub struct Collar {
    pub eps: f64,
    /// Principal eigenvalue of `O_ε`: the minimum over its components.
    pub sigma_eps: f64,
    /// Faber–Krahn bound for `|O_ε|`.
    pub fk_bound: f64,
    pub certified_with: CertifyWith,
    /// `max λm` over Ω̄.
    pub max_growth: f64,
    /// Grid padded to cover the outer half of the tube.
    pub grid: Arc<Grid>,
    pub tube: RegionMask,
    pub collar: RegionMask,
    pub band: RegionMask,
    pub core: RegionMask,
    /// Connected components of the tube with their own eigenpairs.
    pub components: Vec<(RegionMask, EigenPair)>,
}

impl Collar {
    /// Eigenvalue used for acceptance: computed, or the lower bound.
    pub fn certified_sigma(&self) -> f64 {
        match self.certified_with {
            CertifyWith::Computed => self.sigma_eps,
            CertifyWith::FaberKrahn => self.fk_bound,
        }
    }

    /// Componentwise eigenfunction on the tube, each piece with maximum 1.
    pub fn eigenfunction(&self) -> Result<ScalarField> {
        let mut values = vec![0.0; self.grid.len()];
        for (mask, pair) in &self.components {
            for i in mask.indices() {
                values[i] = pair.phi.value(i);
            }
        }
        ScalarField::from_fn(&self.tube, |i| values[i])
    }
}

fn growth_threshold(max_growth: f64) -> f64 {
    if max_growth > 0.0 {
        SAFETY_FACTOR * max_growth
    } else {
        max_growth
    }
}

/// `max λm` over the closure nodes of a grid.
fn max_growth(p: &ProblemSpec, grid: &Arc<Grid>) -> Result<f64> {
    let m = sample_field(&p.m, &grid.closure_mask())?;
    Ok(m.mask().indices().map(|i| p.lambda * m.value(i)).fold(f64::NEG_INFINITY, f64::max))
}

/// First `ε = ε₀·2^{−j}` (`ε₀` a quarter of the inradius) whose tube
/// eigenvalue, or its Faber–Krahn bound, exceeds `max λm` by the safety
/// factor.
///
/// Only the spacing of `grid` is used; the collar lives on a grid padded to
/// contain the whole tube, with nodes at the same positions on Ω̄.
pub fn select_epsilon(p: &ProblemSpec, grid: &Grid, certify_with: CertifyWith) -> Result<Collar> {
    let h = grid.spacing();
    let base = Grid::build(&p.domain, h)?;
    let top = max_growth(p, &base)?;
    let need = growth_threshold(top);
    let mut eps = p.domain.inradius() / 4.0;
    loop {
        if eps < 4.0 * h {
            return Err(Error::EpsilonNotFound { eps, min: 4.0 * h });
        }
        let padded = Grid::build_padded(&p.domain, h, collar_padding(eps, h))?;
        let tube = tubular_mask(&padded, eps, TubeSide::Both);
        let fk_bound = faber_krahn_bound(padded.dimension(), tube.measure()?)?.bound;
        if certify_with == CertifyWith::FaberKrahn && fk_bound <= need {
            eps /= 2.0;
            continue;
        }
        let components = component_eigenpairs(&tube, DEFAULT_EIGEN_TOL)?;
        let sigma_eps = components.iter().map(|(_, e)| e.sigma).fold(f64::INFINITY, f64::min);
        let accepted = match certify_with {
            CertifyWith::Computed => sigma_eps > need,
            CertifyWith::FaberKrahn => true,
        };
        if !accepted {
            eps /= 2.0;
            continue;
        }
        let collar = RegionMask::from_fn(&padded, |g, i| g.class(i) != NodeClass::Exterior && g.distance(i) < eps / 2.0);
        let band = RegionMask::from_fn(&padded, |g, i| {
            g.class(i) == NodeClass::Interior && (eps / 2.0..=0.75 * eps).contains(&g.distance(i))
        });
        let core = RegionMask::from_fn(&padded, |g, i| g.class(i) == NodeClass::Interior && g.distance(i) > 0.75 * eps);
        return Ok(Collar {
            eps,
            sigma_eps,
            fk_bound,
            certified_with: certify_with,
            max_growth: top,
            collar,
            band,
            core,
            tube,
            grid: padded,
            components,
        });
    }
}

/// Quintic cutoff, 1 at `s = 0` and 0 at `s = 1` with two vanishing
/// derivatives at both ends.
pub fn cutoff(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// The blended field Φ on Ω̄ ∪ `O_ε`, and its interior floor τ.
pub fn blend_phi(collar: &Collar) -> Result<(ScalarField, f64)> {
    if collar.band.is_empty() {
        return Err(Error::DegenerateBand { eps: collar.eps });
    }
    let phi = collar.eigenfunction()?;
    let c = phi.min_on(&collar.band);
    let grid = &collar.grid;
    let support = grid.closure_mask().union(&collar.tube)?;
    let eps = collar.eps;
    let field = ScalarField::from_fn(&support, |i| {
        if collar.band.contains(i) {
            let chi = cutoff((grid.distance(i) - eps / 2.0) / (eps / 4.0));
            chi * phi.value(i) + (1.0 - chi) * c
        } else if collar.core.contains(i) {
            c
        } else {
            phi.value(i)
        }
    })?;
    let tau = c.min(field.min_on(&collar.band));
    Ok((field, tau))
}

/// The multiple `K` and the two bounds it dominates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KChoice {
    pub k: f64,
    /// `max g/Φ` over boundary nodes.
    pub k_boundary: f64,
    /// Smallest `K` found for the pointwise interior condition.
    pub k_interior: f64,
}

/// Smallest `K > 0` with `holds(K)`, by doubling from 1 then bisection,
/// assuming `holds` is monotone in `K`. Returns 0 if `holds` is vacuous.
fn smallest_k(holds: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    let mut hi = 1.0;
    let mut doublings = 0;
    while !holds(hi)? {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::KSearchDiverged { doublings });
        }
        hi *= 2.0;
        doublings += 1;
    }
    let mut lo = if doublings == 0 { 0.0 } else { hi / 2.0 };
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn wrap(at: Point) -> impl Fn(crate::expr::EvalError) -> Error {
    move |source| Error::EvalAt { source, at }
}

/// Chooses `K` so that `KΦ ≥ g` on the boundary nodes and, at every band and
/// core node, `f(x, KΦ)/K ≥ (Δ_hΦ + λmΦ)/a`.
///
/// The interior condition is imposed node by node; collar nodes need no
/// constraint because `σ_ε > λm` there.
pub fn select_k(p: &ProblemSpec, collar: &Collar, phi: &ScalarField, tau: f64) -> Result<KChoice> {
    debug_assert!(tau > 0.0);
    let grid = &collar.grid;
    let mut k_boundary = 0.0f64;
    for i in grid.boundary_mask().indices() {
        let g = p.g.eval(&foot_bindings(grid, i)).map_err(wrap(grid.boundary_foot(i)))?;
        k_boundary = k_boundary.max(g / phi.value(i));
    }

    let deep = collar.band.union(&collar.core)?;
    let l = assemble_laplacian(&deep)?;
    let lphi = l.apply_nodal(phi.values());
    // (node bindings, Φ, required f(x, KΦ)/K) where the requirement is positive.
    let mut needs = Vec::new();
    for (k, &i) in l.nodes().iter().enumerate() {
        let env = node_bindings(grid, i);
        let at = grid.coords(i);
        let m = p.m.eval(&env).map_err(wrap(at))?;
        let a = p.a.eval(&env).map_err(wrap(at))?;
        if !(a > 0.0) {
            return Err(Error::DegenerateInterior { a, at });
        }
        let rhs = (-lphi[k] + p.lambda * m * phi.value(i)) / a;
        if rhs > 0.0 {
            needs.push((env, at, phi.value(i), rhs));
        }
    }
    let k_interior = if needs.is_empty() {
        0.0
    } else {
        smallest_k(|kk| {
            for (env, at, phi, rhs) in &needs {
                let f = p.f.eval(&env.with(Var::U, kk * phi)).map_err(wrap(*at))?;
                if !(f / kk >= *rhs) {
                    return Ok(false);
                }
            }
            Ok(true)
        })?
    };
    Ok(KChoice {
        k: SAFETY_FACTOR * k_boundary.max(k_interior).max(1.0),
        k_boundary,
        k_interior,
    })
}

/// Constant supersolution for a weight bounded below by `gamma > 0` on Ω̄:
/// `1.05·max(1, max g, K₀)` with `K₀` the smallest constant satisfying
/// `a f(x, K₀) ≥ λ m K₀` at every closure node of `grid`.
pub fn constant_supersolution_nondegenerate(p: &ProblemSpec, grid: &Arc<Grid>, gamma: f64) -> Result<f64> {
    let closure = grid.closure_mask();
    let a = sample_field(&p.a, &closure)?;
    let min_a = a.min_on(&closure);
    if !(gamma > 0.0) || min_a < gamma {
        return Err(Error::NotNondegenerate { gamma, min_a });
    }
    let m = sample_field(&p.m, &closure)?;
    let mut max_g = 0.0f64;
    for i in grid.boundary_mask().indices() {
        max_g = max_g.max(p.g.eval(&foot_bindings(grid, i)).map_err(wrap(grid.boundary_foot(i)))?);
    }
    let needs: Vec<usize> = closure.indices().filter(|&i| p.lambda * m.value(i) > 0.0).collect();
    let k0 = if needs.is_empty() {
        0.0
    } else {
        smallest_k(|k| {
            for &i in &needs {
                let f = p.f.eval(&node_bindings(grid, i).with(Var::U, k)).map_err(wrap(grid.coords(i)))?;
                if !(a.value(i) * f >= p.lambda * m.value(i) * k) {
                    return Ok(false);
                }
            }
            Ok(true)
        })?
    };
    Ok(SAFETY_FACTOR * k0.max(max_g).max(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateStatus {
    Pass,
    Failed,
}

impl fmt::Display for CertificateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateStatus::Pass => "PASS",
            CertificateStatus::Failed => "FAILED",
        })
    }
}

/// A supersolution `KΦ` with its margins and the independent check.
#[derive(Clone, Debug)]
pub struct SupersolutionCertificate {
    pub phi: ScalarField,
    pub tau: f64,
    pub k: f64,
    pub k_boundary: f64,
    pub k_interior: f64,
    /// `KΦ`.
    pub supersolution: ScalarField,
    /// `(−Δ_h KΦ) − λmKΦ + a f(x, KΦ)` on the interior and boundary nodes.
    pub interior_margin: ScalarField,
    /// `min (KΦ − g)` over the boundary nodes.
    pub boundary_margin: f64,
    pub collar: Collar,
    /// Verdict of the independent checker on `KΦ`.
    pub check: CheckReport,
    pub status: CertificateStatus,
}

impl SupersolutionCertificate {
    pub fn min_interior_margin(&self) -> f64 {
        self.interior_margin.min_on(self.interior_margin.mask())
    }

    pub fn passed(&self) -> bool {
        self.status == CertificateStatus::Pass
    }
}

/// Runs the construction on a grid of the spacing of `grid` and checks the
/// result. A negative margin marks the certificate `Failed`; it is never
/// returned as passing.
pub fn build_certificate(p: &ProblemSpec, grid: &Grid, certify_with: CertifyWith) -> Result<SupersolutionCertificate> {
    let collar = select_epsilon(p, grid, certify_with)?;
    let (phi, tau) = blend_phi(&collar)?;
    let choice = select_k(p, &collar, &phi, tau)?;
    let grid = collar.grid.clone();
    let upper = phi.scale(choice.k)?;

    let closure = grid.closure_mask();
    let l = assemble_laplacian(&closure)?;
    let lu = l.apply_nodal(upper.values());
    let mut margin = vec![0.0; grid.len()];
    for (k, &i) in l.nodes().iter().enumerate() {
        let env = node_bindings(&grid, i);
        let at = grid.coords(i);
        let u = upper.value(i);
        let m = p.m.eval(&env).map_err(wrap(at))?;
        let a = p.a.eval(&env).map_err(wrap(at))?;
        let f = p.f.eval(&env.with(Var::U, u)).map_err(wrap(at))?;
        margin[i] = lu[k] - p.lambda * m * u + a * f;
    }
    let interior_margin = ScalarField::from_fn(&closure, |i| margin[i])?;
    let mut boundary_margin = f64::INFINITY;
    for i in grid.boundary_mask().indices() {
        let g = p.g.eval(&foot_bindings(&grid, i)).map_err(wrap(grid.boundary_foot(i)))?;
        boundary_margin = boundary_margin.min(upper.value(i) - g);
    }

    let tol = default_tolerance(p, &upper)?;
    let check = check_supersolution(p, &upper, tol)?;
    let ok = interior_margin.min_on(&closure) >= 0.0 && boundary_margin > 0.0 && check.passed();
    Ok(SupersolutionCertificate {
        phi,
        tau,
        k: choice.k,
        k_boundary: choice.k_boundary,
        k_interior: choice.k_interior,
        supersolution: upper,
        interior_margin,
        boundary_margin,
        collar,
        check,
        status: if ok {
            CertificateStatus::Pass
        } else {
            CertificateStatus::Failed
        },
    })
}
