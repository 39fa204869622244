//! Acceptance criteria. Prints one line per criterion and exits non-zero if
//! any of them fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use supersol::construct::{build_certificate, constant_supersolution_nondegenerate, select_epsilon, CertifyWith};
use supersol::domain::{tubular_mask, DomainSpec, Grid, TubeSide};
use supersol::eigen::{
    assemble_laplacian, collar_padding, component_eigenpairs, eigenbench_row, principal_eigenpair, DEFAULT_EIGEN_TOL,
};
use supersol::expr::Expr;
use supersol::problem::{ProblemSpec, ScalarField};
use supersol::solve::{mms_solve, monotone_bracket};
use supersol::verify::{check_supersolution, default_tolerance};
use supersol::Error;

use common::*;

type Outcome = Result<(bool, String), Error>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn eigenvalue(domain: &DomainSpec, h: f64) -> Result<f64, Error> {
    let g = Grid::build(domain, h)?;
    Ok(principal_eigenpair(&assemble_laplacian(&g.interior_mask())?, DEFAULT_EIGEN_TOL)?.sigma)
}

fn ac1() -> Outcome {
    let j2 = j01_bisection().powi(2);
    let iv = eigenvalue(&DomainSpec::interval(0.0, 1.0)?, 1.0 / 256.0)?;
    let sq = eigenvalue(&DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0)?, 1.0 / 128.0)?;
    let disk = eigenvalue(&DomainSpec::disk([0.0, 0.0], 1.0)?, 1.0 / 128.0)?;
    let e = [
        rel(iv, interval_eigenvalue(1.0)),
        rel(sq, rectangle_eigenvalue(1.0, 1.0)),
        rel(disk, j2),
    ];
    Ok((
        e[0] <= 1e-3 && e[1] <= 1e-2 && e[2] <= 2e-2,
        format!(
            "interval {iv:.6} (rel {:.2e} <= 1e-3), square {sq:.5} (rel {:.2e} <= 1e-2), disk {disk:.5} vs {j2:.9} (rel {:.2e} <= 2e-2)",
            e[0], e[1], e[2]
        ),
    ))
}

fn ac2() -> Outcome {
    let j2 = j01_bisection().powi(2);
    let disk = DomainSpec::disk([0.0, 0.0], 1.0)?;
    let square = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0)?;
    let interval = DomainSpec::interval(0.0, 1.0)?;
    let rows = [
        eigenbench_row(&disk, None, 1.0 / 128.0, DEFAULT_EIGEN_TOL)?,
        eigenbench_row(&square, None, 1.0 / 128.0, DEFAULT_EIGEN_TOL)?,
        eigenbench_row(&interval, None, 1.0 / 256.0, DEFAULT_EIGEN_TOL)?,
        eigenbench_row(&DomainSpec::rectangle(0.0, 2.0, 0.0, 1.0)?, None, 1.0 / 64.0, DEFAULT_EIGEN_TOL)?,
        eigenbench_row(&DomainSpec::annulus([0.0, 0.0], 0.5, 1.0)?, None, 1.0 / 128.0, DEFAULT_EIGEN_TOL)?,
        eigenbench_row(&interval, Some(0.1), 1.0 / 640.0, DEFAULT_EIGEN_TOL)?,
        eigenbench_row(&square, Some(0.125), 1.0 / 128.0, DEFAULT_EIGEN_TOL)?,
        eigenbench_row(&disk, Some(0.25), 1.0 / 64.0, DEFAULT_EIGEN_TOL)?,
    ];
    let all_hold = rows.iter().all(|r| r.sigma >= r.fk_bound * (1.0 - 5.0 * r.h));
    let disk_ratio = rows[0].ratio;
    let interval_ratio = rows[2].ratio;
    let square_ratio = rows[1].ratio;
    let square_oracle = rectangle_eigenvalue(1.0, 1.0) / (j2 * PI);
    let ok = all_hold
        && (disk_ratio - 1.0).abs() <= 0.02
        && (interval_ratio - 1.0).abs() <= 0.02
        && rel(square_ratio, square_oracle) <= 0.02;
    let worst = rows.iter().map(|r| r.sigma / (r.fk_bound * (1.0 - 5.0 * r.h))).fold(f64::INFINITY, f64::min);
    Ok((
        ok,
        format!(
            "{} rows, min sigma/(bound*(1-5h)) = {worst:.4} >= 1; ball ratios disk {disk_ratio:.4}, interval {interval_ratio:.4} (|r-1| <= 0.02); square {square_ratio:.4} vs {square_oracle:.4} (rel <= 0.02)",
            rows.len()
        ),
    ))
}

const NONLINEARITIES: [&str; 3] = ["u^2", "u^3", "u^2*exp(u)"];
const LAMBDAS: [f64; 3] = [-5.0, 0.0, 10.0];

fn suite_problem(lambda: f64, f: &str) -> Result<ProblemSpec, Error> {
    ProblemSpec::parse(DomainSpec::interval(0.0, 1.0)?, lambda, "1", "d", "1", f)
}

fn ac3() -> Outcome {
    let mut failed = Vec::new();
    let mut worst_interior = f64::INFINITY;
    let mut worst_boundary = f64::INFINITY;
    for lambda in LAMBDAS {
        for f in NONLINEARITIES {
            let p = suite_problem(lambda, f)?;
            let grid = Grid::build(&p.domain, 1.0 / 256.0)?;
            let c = build_certificate(&p, &grid, CertifyWith::Computed)?;
            let tol = default_tolerance(&p, &c.supersolution)?;
            let independent = check_supersolution(&p, &c.supersolution, tol)?;
            worst_interior = worst_interior.min(c.min_interior_margin());
            worst_boundary = worst_boundary.min(c.boundary_margin);
            if !(c.passed() && c.min_interior_margin() >= 0.0 && c.boundary_margin > 0.0 && independent.passed()) {
                failed.push(format!("lambda={lambda} f={f}"));
            }
        }
    }
    Ok((
        failed.is_empty(),
        format!(
            "9 certificates, min interior margin {worst_interior:.3e} >= 0, min boundary margin {worst_boundary:.3e} > 0, verifier PASS on all{}",
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    ))
}

fn ac4() -> Outcome {
    let p = ProblemSpec::parse(DomainSpec::disk([0.0, 0.0], 1.0)?, 5.0, "1", "d", "1", "u^2")?;
    let grid = Grid::build(&p.domain, 1.0 / 128.0)?;
    let c = build_certificate(&p, &grid, CertifyWith::Computed)?;
    Ok((
        c.passed(),
        format!(
            "status {}, eps {}, sigma_eps {:.3}, K {:.4}, min interior margin {:.3e}, boundary margin {:.3e}",
            c.status,
            c.collar.eps,
            c.collar.sigma_eps,
            c.k,
            c.min_interior_margin(),
            c.boundary_margin
        ),
    ))
}

fn ac5() -> Outcome {
    let tol = 1e-10;
    let mut ok = true;
    let mut worst_gap = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut violations = 0;
    for lambda in LAMBDAS {
        for f in NONLINEARITIES {
            let p = suite_problem(lambda, f)?;
            let grid = Grid::build(&p.domain, 1.0 / 256.0)?;
            let c = build_certificate(&p, &grid, CertifyWith::Computed)?;
            let lower = ScalarField::zeros(&c.supersolution.grid().closure_mask());
            let b = monotone_bracket(&p, &lower, &c.supersolution, tol)?;
            let gap = b.gap / b.above.u.max_abs();
            violations += b.above.monotone_violations;
            worst_gap = worst_gap.max(gap);
            for r in [&b.above, &b.below] {
                let bound = 1e-8 * (1.0 + r.shift);
                worst_res = worst_res.max(r.residual / bound);
                ok &= r.residual <= bound;
            }
            ok &= gap <= 1e-6 && b.above.monotone_violations == 0;
        }
    }
    Ok((
        ok,
        format!(
            "9 brackets, violations {violations}, max relative gap {worst_gap:.2e} <= 1e-6, max residual/(1e-8(1+M)) {worst_res:.3} <= 1"
        ),
    ))
}

fn mms_orders(p: &ProblemSpec, u_star: &str, hs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let u: Expr = u_star.parse()?;
    let errors = hs
        .iter()
        .map(|&h| Ok(mms_solve(p, &Grid::build(&p.domain, h)?, &u, 1e-13)?.error))
        .collect::<Result<Vec<f64>, Error>>()?;
    let orders = observed_orders(&errors);
    Ok((errors, orders))
}

fn ac6() -> Outcome {
    let p1 = ProblemSpec::parse(DomainSpec::interval(0.0, 1.0)?, 2.0, "1", "d", "1", "u^2")?;
    let p2 = ProblemSpec::parse(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0)?, 2.0, "1", "d", "1", "u^2")?;
    let (e1, o1) = mms_orders(&p1, "sin(3*x)", &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0])?;
    let (e2, o2) = mms_orders(&p2, "sin(2*x)*sin(y)", &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0])?;
    let ok = o1.iter().chain(&o2).all(|o| (1.8..=2.2).contains(o));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    Ok((
        ok,
        format!(
            "1-D sin(3x) orders [{}] (finest error {:.2e}); 2-D sin(2x)sin(y) orders [{}] (finest error {:.2e}); all in [1.8, 2.2]",
            fmt(&o1),
            e1[e1.len() - 1],
            fmt(&o2),
            e2[e2.len() - 1]
        ),
    ))
}

fn ac7() -> Outcome {
    let p = ProblemSpec::parse(DomainSpec::interval(0.0, 1.0)?, 10.0, "1", "d", "1", "u^2")?;
    let h = 1.0 / 256.0;
    let grid = Grid::build(&p.domain, h)?;
    let refused = matches!(
        constant_supersolution_nondegenerate(&p, &grid, 1e-3),
        Err(Error::NotNondegenerate { .. })
    );
    let padded: Arc<Grid> = Grid::build_padded(&p.domain, h, 4)?;
    let constant = ScalarField::constant(&padded.full_mask(), 1e6)?;
    let tol = default_tolerance(&p, &constant)?;
    let report = check_supersolution(&p, &constant, tol)?;
    let at = report.interior.at.map(|a| a[0]).unwrap_or(f64::NAN);
    Ok((
        refused && !report.passed(),
        format!(
            "constant recipe refused: {refused}; K = 1e6 check {} with worst margin {:.3e} at x = {at} (tol {tol:.2e})",
            report.verdict(),
            report.interior.margin
        ),
    ))
}

fn ac8() -> Outcome {
    let interval = DomainSpec::interval(0.0, 1.0)?;
    let h = 1.0 / 1280.0;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let grid = Grid::build_padded(&interval, h, collar_padding(eps, h))?;
        let tube = tubular_mask(&grid, eps, TubeSide::Both);
        let sigma = component_eigenpairs(&tube, DEFAULT_EIGEN_TOL)?
            .iter()
            .map(|(_, e)| e.sigma)
            .fold(f64::INFINITY, f64::min);
        let e = rel(sigma, interval_tube_eigenvalue(eps));
        worst = worst.max(e);
        parts.push(format!("eps {eps}: {sigma:.3} (rel {e:.1e})"));
    }
    let p = ProblemSpec::parse(interval.clone(), 100.0, "1", "d", "1", "u^2")?;
    let threshold = PI / 20.0;
    let base = Grid::build(&interval, 1.0 / 256.0)?;
    let accepted = select_epsilon(&p, &base, CertifyWith::Computed)?.eps;
    let bracketed = accepted < threshold && threshold <= 2.0 * accepted;
    Ok((
        worst <= 0.01 && bracketed,
        format!(
            "{} (all rel <= 1e-2); lambda=100 accepted eps {accepted} with eps < pi/20 = {threshold:.4} <= 2 eps: {bracketed}",
            parts.join(", ")
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 8] = [
        ("AC-1", "eigenvalue oracles", ac1),
        ("AC-2", "Faber-Krahn bound", ac2),
        ("AC-3", "certificate suite", ac3),
        ("AC-4", "2-D certificate", ac4),
        ("AC-5", "monotone iteration", ac5),
        ("AC-6", "order of accuracy", ac6),
        ("AC-7", "degeneracy necessity", ac7),
        ("AC-8", "scaling law", ac8),
    ];
    let mut failures = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{id} {name}: {} ({:.1}s) | {detail}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/8 criteria passed", 8 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
