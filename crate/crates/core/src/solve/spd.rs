//! Symmetric positive definite solves for `-Δ_h + shift`.

use crate::eigen::LaplacianOperator;
use crate::error::{Error, Result};
use crate::problem::ScalarField;

/// A symmetric positive definite linear operator on `ℝⁿ`.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// `L + shift·I`.
#[derive(Clone, Copy, Debug)]
pub struct Shifted<'a> {
    pub op: &'a LaplacianOperator,
    pub shift: f64,
}

impl SpdOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.op.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_shifted(x, self.shift, y);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of a conjugate-gradient run.
#[derive(Clone, Debug, Default)]
pub struct CgStats {
    pub iterations: usize,
    /// `‖b − Ax‖₂ / ‖b‖₂` of the returned iterate (recursive residual).
    pub relative_residual: f64,
    /// Energy `½xᵀAx − bᵀx` after each iteration, when tracing.
    pub energies: Vec<f64>,
}

/// Conjugate gradients from the initial guess in `x`, stopping at
/// `‖r‖₂ ≤ tol·‖b‖₂`.
pub fn conjugate_gradient(
    op: &impl SpdOperator,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
    trace: bool,
) -> Result<CgStats> {
    let n = op.dim();
    let bnorm = dot(b, b).sqrt();
    let mut stats = CgStats::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(stats);
    }
    let mut ap = vec![0.0; n];
    op.apply(x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    while rr.sqrt() > tol * bnorm {
        if stats.iterations == max_iters {
            return Err(Error::NoConvergence { max_iters });
        }
        op.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        stats.iterations += 1;
        if trace {
            let mut ax = vec![0.0; n];
            op.apply(x, &mut ax);
            stats.energies.push(0.5 * dot(x, &ax) - dot(b, x));
        }
    }
    stats.relative_residual = rr.sqrt() / bnorm;
    Ok(stats)
}

/// Solves `(L + shift) u = rhs` on the operator's nodes with zero Dirichlet
/// data by conjugate gradients, to relative residual `tol`.
pub fn spd_solve(l: &LaplacianOperator, shift: f64, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    if !rhs.grid().same_layout(l.grid()) {
        return Err(Error::GridMismatch);
    }
    let b = l.gather(rhs);
    let mut x = vec![0.0; b.len()];
    conjugate_gradient(&Shifted { op: l, shift }, &b, &mut x, tol, 20 * b.len() + 100, false)?;
    l.to_field(&x)
}

/// Cholesky factor of `L + diag(shift)` in envelope (profile) storage.
///
/// Row `i` stores the entries from its first nonzero column up to the
/// diagonal; the fill stays inside that envelope.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factor of `L + shift·I`.
    pub fn factor(l: &LaplacianOperator, shift: f64) -> Result<Self> {
        Self::factor_diag(l, |_| shift)
    }

    /// Factor of `L + diag(shift(k))`.
    pub fn factor_diag(l: &LaplacianOperator, shift: impl Fn(usize) -> f64) -> Result<Self> {
        let n = l.len();
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for k in 0..n {
            let f = l.lower_neighbours(k).min().unwrap_or(k);
            first.push(f);
            start.push(start[k] + (k - f) + 1);
        }
        let mut data = vec![0.0; start[n]];
        let off = l.off_diagonal();
        let diag = l.diagonal();
        for k in 0..n {
            for j in l.lower_neighbours(k) {
                data[start[k] + j - first[k]] = off;
            }
            data[start[k + 1] - 1] = diag + shift(k);
        }
        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (head, tail) = data.split_at_mut(row_i);
                let ri = &mut tail[..i - fi + 1];
                let s: f64 = if j < i {
                    let rj = &head[start[j]..start[j + 1]];
                    ri[lo - fi..j - fi]
                        .iter()
                        .zip(&rj[lo - fj..j - fj])
                        .map(|(a, b)| a * b)
                        .sum()
                } else {
                    ri[..j - fi].iter().map(|a| a * a).sum()
                };
                let v = ri[j - fi] - s;
                if j < i {
                    let pivot = head[start[j + 1] - 1];
                    ri[j - fi] = v / pivot;
                } else {
                    if !(v > 0.0) {
                        return Err(Error::NotPositiveDefinite { pivot: v, row: i });
                    }
                    ri[j - fi] = v.sqrt();
                }
            }
        }
        Ok(Self { first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.start[i]..self.start[i + 1]]
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.row(i);
            let fi = self.first[i];
            let s: f64 = row[..i - fi].iter().zip(&b[fi..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let row = self.row(i);
            let fi = self.first[i];
            b[i] /= row[i - fi];
            let xi = b[i];
            for (bk, a) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *bk -= a * xi;
            }
        }
    }
}
