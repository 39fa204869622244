//! Discrete Dirichlet Laplacian, principal eigenpairs and the Faber–Krahn
//! lower bound.
//!
//! The operator acts on the nodes of a mask with the standard (2N+1)-point
//! stencil `(2N·u_i − Σ u_j)/h²`; neighbours outside the mask are Dirichlet
//! nodes (zero for eigenproblems, boundary data for solves).

use std::f64::consts::PI;
use std::sync::Arc;

use crate::domain::{tubular_mask, DomainSpec, Grid, RegionMask, TubeSide};
use crate::error::{Error, Result};
use crate::problem::ScalarField;
use crate::solve::spd::{EnvelopeCholesky, SpdOperator};

const NONE: u32 = u32::MAX;

/// `-Δ_h` restricted to the nodes of a mask.
#[derive(Clone, Debug)]
pub struct LaplacianOperator {
    mask: RegionMask,
    nodes: Vec<usize>,
    /// Stencil neighbours as unknown indices (`NONE` for Dirichlet nodes).
    inner: Vec<[u32; 4]>,
    /// Stencil neighbours as node indices (`NONE` off the grid).
    outer: Vec<[u32; 4]>,
    stencil: usize,
    inv_h2: f64,
}

pub fn assemble_laplacian(mask: &RegionMask) -> Result<LaplacianOperator> {
    let grid = mask.grid();
    let nodes: Vec<usize> = mask.indices().collect();
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut index = vec![NONE; grid.len()];
    for (k, &n) in nodes.iter().enumerate() {
        index[n] = k as u32;
    }
    let stencil = grid.stencil_len();
    let mut inner = Vec::with_capacity(nodes.len());
    let mut outer = Vec::with_capacity(nodes.len());
    for &n in &nodes {
        let mut inn = [NONE; 4];
        let mut out = [NONE; 4];
        for (s, nb) in grid.stencil(n)[..stencil].iter().enumerate() {
            if let Some(nb) = *nb {
                out[s] = nb as u32;
                inn[s] = index[nb];
            }
        }
        inner.push(inn);
        outer.push(out);
    }
    let h = grid.spacing();
    Ok(LaplacianOperator {
        mask: mask.clone(),
        nodes,
        inner,
        outer,
        stencil,
        inv_h2: 1.0 / (h * h),
    })
}

impl LaplacianOperator {
    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.mask.grid()
    }

    /// Node index of every unknown, in increasing order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn diagonal(&self) -> f64 {
        self.stencil as f64 * self.inv_h2
    }

    pub fn off_diagonal(&self) -> f64 {
        -self.inv_h2
    }

    /// Lower-triangular neighbours of unknown `k` (unknown indices below `k`).
    pub(crate) fn lower_neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.inner[k][..self.stencil]
            .iter()
            .filter(move |&&j| j != NONE && (j as usize) < k)
            .map(|&j| j as usize)
    }

    /// `y = (L + shift) x` on unknown vectors, zero Dirichlet data.
    pub fn apply_shifted(&self, x: &[f64], shift: f64, y: &mut [f64]) {
        let diag = self.diagonal() + shift;
        for (k, nb) in self.inner.iter().enumerate() {
            let mut s = 0.0;
            for &j in &nb[..self.stencil] {
                if j != NONE {
                    s += x[j as usize];
                }
            }
            y[k] = diag * x[k] - self.inv_h2 * s;
        }
    }

    /// `y = L x` on unknown vectors, zero Dirichlet data.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_shifted(x, 0.0, y);
    }

    /// `(L u)_k` at every unknown, reading neighbour values (including
    /// Dirichlet nodes) from the full node array `values`.
    pub fn apply_nodal(&self, values: &[f64]) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.outer)
            .map(|(&n, nb)| {
                let mut s = 0.0;
                for &j in &nb[..self.stencil] {
                    if j != NONE {
                        s += values[j as usize];
                    }
                }
                self.inv_h2 * (self.stencil as f64 * values[n] - s)
            })
            .collect()
    }

    /// `L u` as a field on the operator's mask; values of `u` at neighbours
    /// outside `u`'s mask read as zero.
    pub fn apply_field(&self, u: &ScalarField) -> Result<ScalarField> {
        if !u.grid().same_layout(self.grid()) {
            return Err(Error::GridMismatch);
        }
        let lu = self.apply_nodal(u.values());
        self.to_field(&lu)
    }

    /// Unknown vector of a field's values on this operator's nodes.
    pub fn gather(&self, u: &ScalarField) -> Vec<f64> {
        self.nodes.iter().map(|&n| u.value(n)).collect()
    }

    pub fn to_field(&self, x: &[f64]) -> Result<ScalarField> {
        let mut values = vec![0.0; self.grid().len()];
        for (&n, &v) in self.nodes.iter().zip(x) {
            values[n] = v;
        }
        ScalarField::from_fn(&self.mask, |i| values[i])
    }
}

impl SpdOperator for LaplacianOperator {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_shifted(x, 0.0, y);
    }
}

/// Principal Dirichlet eigenpair of a mask.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub sigma: f64,
    /// Eigenfunction, sign-fixed and normalized to maximum 1.
    pub phi: ScalarField,
    /// `‖Lφ − σφ‖_∞`.
    pub residual: f64,
    pub iterations: usize,
}

pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
pub const MAX_EIGEN_ITERS: usize = 10_000;

/// Smallest eigenvalue of `L` and its eigenvector by inverse power iteration.
///
/// Every step is an SPD solve with a Cholesky factor of `L` computed once.
/// The eigenvalue is the Rayleigh quotient; iteration stops when successive
/// eigenvalues agree to `tol·σ` and `‖Lφ − σφ‖_∞ ≤ tol·σ` for the
/// max-normalized iterate.
pub fn principal_eigenpair(l: &LaplacianOperator, tol: f64) -> Result<EigenPair> {
    principal_eigenpair_with(l, tol, MAX_EIGEN_ITERS)
}

pub fn principal_eigenpair_with(l: &LaplacianOperator, tol: f64, max_iters: usize) -> Result<EigenPair> {
    let n = l.len();
    let factor = EnvelopeCholesky::factor(l, 0.0)?;
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut lx = vec![0.0; n];
    let mut sigma_prev = f64::INFINITY;
    for it in 1..=max_iters {
        factor.solve_in_place(&mut x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        l.apply(&x, &mut lx);
        let sigma: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = x
            .iter()
            .zip(&lx)
            .map(|(a, b)| (b - sigma * a).abs())
            .fold(0.0, f64::max)
            / peak;
        let settled = (sigma - sigma_prev).abs() <= tol * sigma;
        sigma_prev = sigma;
        if settled && residual <= tol * sigma {
            let sign = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            let top = x.iter().map(|v| sign * v).fold(f64::NEG_INFINITY, f64::max);
            let phi: Vec<f64> = x.iter().map(|v| sign * v / top).collect();
            return Ok(EigenPair {
                sigma,
                phi: l.to_field(&phi)?,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence { max_iters })
}

/// Principal eigenpair of each connected component of `mask`, in component
/// order. The principal eigenvalue of the union is the minimum.
pub fn component_eigenpairs(mask: &RegionMask, tol: f64) -> Result<Vec<(RegionMask, EigenPair)>> {
    mask.components()
        .into_iter()
        .map(|c| {
            let l = assemble_laplacian(&c)?;
            let pair = principal_eigenpair(&l, tol)?;
            Ok((c, pair))
        })
        .collect()
}

/// First positive zero of the Bessel function J₀.
///
/// Newton's method on the integral representation
/// `J₀(x) = (1/π)∫₀^π cos(x sin θ) dθ`, with `J₀' = −J₁`,
/// `J₁(x) = (1/π)∫₀^π sin θ · sin(x sin θ) dθ`. Both integrands are
/// π-periodic and smooth, so the trapezoidal rule converges geometrically.
pub fn bessel_j0_first_zero() -> f64 {
    const PANELS: usize = 64;
    let integrate = |g: &dyn Fn(f64) -> f64| {
        (0..PANELS).map(|k| g(PI * k as f64 / PANELS as f64)).sum::<f64>() / PANELS as f64
    };
    let mut x = 2.4;
    for _ in 0..50 {
        let j0 = integrate(&|t: f64| (x * t.sin()).cos());
        let j1 = integrate(&|t: f64| t.sin() * (x * t.sin()).sin());
        let step = j0 / j1;
        x += step;
        if step.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// Principal Dirichlet eigenvalue of `-Δ` on the unit ball of ℝᴺ.
pub fn ball_eigenvalue(n: usize) -> Result<f64> {
    match n {
        1 => Ok(PI * PI / 4.0),
        2 => Ok(bessel_j0_first_zero().powi(2)),
        3 => Ok(PI * PI),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Lebesgue measure of the unit ball of ℝᴺ.
pub fn unit_ball_measure(n: usize) -> Result<f64> {
    match n {
        1 => Ok(2.0),
        2 => Ok(PI),
        3 => Ok(4.0 * PI / 3.0),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Lower bound for the principal eigenvalue of a region of given measure:
/// the ball of the same measure has the smallest one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaberKrahnEstimate {
    pub dimension: usize,
    pub ball_eigenvalue: f64,
    pub ball_measure: f64,
    pub region_measure: f64,
    pub bound: f64,
}

pub fn faber_krahn_bound(n: usize, region_measure: f64) -> Result<FaberKrahnEstimate> {
    let ball_eigenvalue = ball_eigenvalue(n)?;
    let ball_measure = unit_ball_measure(n)?;
    if !(region_measure > 0.0) {
        return Err(Error::EmptyRegion);
    }
    let exponent = 2.0 / n as f64;
    let bound = ball_eigenvalue * ball_measure.powf(exponent) / region_measure.powf(exponent);
    Ok(FaberKrahnEstimate {
        dimension: n,
        ball_eigenvalue,
        ball_measure,
        region_measure,
        bound,
    })
}

/// One row of the eigenvalue-versus-bound table.
#[derive(Clone, Debug)]
pub struct EigenbenchRow {
    pub domain: DomainSpec,
    /// Collar width, or `None` for the domain itself.
    pub eps: Option<f64>,
    pub h: f64,
    pub measure: f64,
    pub fk_bound: f64,
    pub sigma: f64,
    pub ratio: f64,
}

impl EigenbenchRow {
    /// `σ ≥ bound·(1 − 5h)`: the bound with discretization slack.
    pub fn bound_holds(&self) -> bool {
        self.sigma >= self.fk_bound * (1.0 - 5.0 * self.h)
    }
}

/// Computed principal eigenvalue and Faber–Krahn bound for Ω (`eps = None`)
/// or for its collar `O_ε`.
pub fn eigenbench_row(domain: &DomainSpec, eps: Option<f64>, h: f64, tol: f64) -> Result<EigenbenchRow> {
    let (mask, measure_mask) = match eps {
        None => {
            let grid = Grid::build(domain, h)?;
            (grid.interior_mask(), grid.closure_mask())
        }
        Some(eps) => {
            let grid = Grid::build_padded(domain, h, collar_padding(eps, h))?;
            let tube = tubular_mask(&grid, eps, TubeSide::Both);
            (tube.clone(), tube)
        }
    };
    let measure = measure_mask.measure()?;
    let sigma = component_eigenpairs(&mask, tol)?
        .iter()
        .map(|(_, p)| p.sigma)
        .fold(f64::INFINITY, f64::min);
    let fk = faber_krahn_bound(domain.dimension(), measure)?;
    Ok(EigenbenchRow {
        domain: domain.clone(),
        eps,
        h,
        measure,
        fk_bound: fk.bound,
        sigma,
        ratio: sigma / fk.bound,
    })
}

/// Padding (in cells) that makes a grid cover the outer half of `O_ε`.
pub fn collar_padding(eps: f64, h: f64) -> usize {
    (eps / h).ceil() as usize + 2
}
