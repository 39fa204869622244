mod common;

use proptest::prelude::*;

use supersol::construct::{blend_phi, build_certificate, select_epsilon, CertifyWith};
use supersol::domain::{tubular_mask, DomainSpec, Grid, RegionMask, TubeSide};
use supersol::eigen::{
    assemble_laplacian, collar_padding, component_eigenpairs, eigenbench_row, principal_eigenpair, DEFAULT_EIGEN_TOL,
};
use supersol::problem::{ProblemSpec, ScalarField};
use supersol::solve::{monotone_bracket, residual};
use supersol::verify::{check_subsolution, check_supersolution};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn domain() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        (0.3f64..2.0).prop_map(|l| DomainSpec::interval(0.0, l).unwrap()),
        (0.5f64..1.5, 0.5f64..1.5).prop_map(|(w, h)| DomainSpec::rectangle(0.0, w, 0.0, h).unwrap()),
        (0.5f64..1.2).prop_map(|r| DomainSpec::disk([0.1, -0.2], r).unwrap()),
        (0.2f64..0.5).prop_map(|ri| DomainSpec::annulus([0.0, 0.0], ri, 1.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn laplacian_is_symmetric_positive(d in domain(), seed in any::<u64>()) {
        let g = Grid::build(&d, 1.0 / 24.0).unwrap();
        let l = assemble_laplacian(&g.interior_mask()).unwrap();
        let n = l.len();
        let mut s = seed | 1;
        let mut next = || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s % 2001) as f64 / 1000.0 - 1.0 };
        let u: Vec<f64> = (0..n).map(|_| next()).collect();
        let v: Vec<f64> = (0..n).map(|_| next()).collect();
        let (mut lu, mut lv) = (vec![0.0; n], vec![0.0; n]);
        l.apply(&u, &mut lu);
        l.apply(&v, &mut lv);
        let (a, b) = (dot(&lu, &v), dot(&u, &lv));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        prop_assert!(dot(&lu, &u) > 0.0);
    }

    #[test]
    fn faber_krahn_bound_holds(d in domain()) {
        let h = 1.0 / 48.0;
        let row = eigenbench_row(&d, None, h, DEFAULT_EIGEN_TOL).unwrap();
        prop_assert!(row.sigma >= row.fk_bound * (1.0 - 5.0 * h), "{row:?}");
    }

    #[test]
    fn eigenfunction_positive_and_monotone_in_domain(w in 0.4f64..1.0, cut in 0.3f64..0.9) {
        let d = DomainSpec::rectangle(0.0, w, 0.0, 1.0).unwrap();
        let g = Grid::build(&d, 1.0 / 32.0).unwrap();
        let big = g.interior_mask();
        let small = RegionMask::from_fn(&g, |g, i| big.contains(i) && g.coords(i)[1] < cut);
        prop_assume!(!small.is_empty());
        let pb = principal_eigenpair(&assemble_laplacian(&big).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        let ps = principal_eigenpair(&assemble_laplacian(&small).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        prop_assert!(ps.sigma >= pb.sigma);
        prop_assert!(pb.phi.min_on(&big) > 0.0);
        prop_assert!((pb.phi.max_on(&big) - 1.0).abs() < 1e-15);
        prop_assert!(pb.residual <= DEFAULT_EIGEN_TOL * pb.sigma);
    }

    #[test]
    fn halving_collar_quadruples_eigenvalue(k in 2u32..5) {
        let d = DomainSpec::interval(0.0, 1.0).unwrap();
        let eps = 0.4 / 2f64.powi(k as i32);
        let h = eps / 64.0;
        let sigma = |eps: f64| {
            let g = Grid::build_padded(&d, h, collar_padding(eps, h)).unwrap();
            component_eigenpairs(&tubular_mask(&g, eps, TubeSide::Both), DEFAULT_EIGEN_TOL)
                .unwrap()
                .iter()
                .map(|(_, e)| e.sigma)
                .fold(f64::INFINITY, f64::min)
        };
        let ratio = sigma(eps / 2.0) / sigma(eps);
        prop_assert!((ratio / 4.0 - 1.0).abs() <= 0.02, "{ratio}");
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn collar_contract_and_blend(lambda in -20.0f64..300.0, cells in prop::sample::select(vec![64usize, 128, 256])) {
        let p = ProblemSpec::parse(DomainSpec::interval(0.0, 1.0).unwrap(), lambda, "1", "d", "1", "u^2").unwrap();
        let grid = Grid::build(&p.domain, 1.0 / cells as f64).unwrap();
        let collar = match select_epsilon(&p, &grid, CertifyWith::Computed) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        prop_assert!(collar.max_growth < collar.sigma_eps);
        let (phi, tau) = blend_phi(&collar).unwrap();
        let eig = collar.eigenfunction().unwrap();
        let closure = collar.grid.closure_mask();
        prop_assert!(tau > 0.0);
        prop_assert!(phi.min_on(&closure) >= tau.min(eig.min_on(&collar.collar)));
        for i in collar.collar.indices() {
            prop_assert_eq!(phi.value(i).to_bits(), eig.value(i).to_bits());
        }
    }

    #[test]
    fn larger_multiples_stay_supersolutions(lambda in -5.0f64..30.0, power in 1.5f64..4.0, stretch in 1.0f64..50.0) {
        let f = format!("u^{power:?}");
        let p = ProblemSpec::parse(DomainSpec::interval(0.0, 1.0).unwrap(), lambda, "1", "d", "1", &f).unwrap();
        let grid = Grid::build(&p.domain, 1.0 / 64.0).unwrap();
        let c = build_certificate(&p, &grid, CertifyWith::Computed).unwrap();
        prop_assert!(c.passed());
        let bigger = c.supersolution.scale(stretch).unwrap();
        prop_assert!(check_supersolution(&p, &bigger, 0.0).unwrap().passed());
    }

    #[test]
    fn monotone_limits_sandwiched(lambda in -5.0f64..15.0, power in prop::sample::select(vec![2.0f64, 3.0])) {
        let f = format!("u^{power:?}");
        let p = ProblemSpec::parse(DomainSpec::interval(0.0, 1.0).unwrap(), lambda, "1", "d", "1", &f).unwrap();
        let grid = Grid::build(&p.domain, 1.0 / 64.0).unwrap();
        let c = build_certificate(&p, &grid, CertifyWith::Computed).unwrap();
        let zero = ScalarField::zeros(&c.supersolution.grid().closure_mask());
        let tol = 1e-10;
        let b = monotone_bracket(&p, &zero, &c.supersolution, tol).unwrap();
        let slack = 1e-10 * c.supersolution.max_abs();
        for i in zero.mask().indices() {
            let (lo, hi) = (b.below.u.value(i), b.above.u.value(i));
            prop_assert!(lo <= hi + slack);
            prop_assert!(lo >= -slack && hi <= c.supersolution.value(i) + slack);
        }
        prop_assert_eq!(b.above.monotone_violations, 0);
        let res = residual(&p, &b.above.u).unwrap();
        prop_assert!(res <= 10.0 * tol * (1.0 + b.above.shift), "{res}");
    }

    #[test]
    fn verify_self_consistent(seed in any::<u64>(), scale in 0.0f64..1e-3, frac in 0.0f64..2.0) {
        let p = ProblemSpec::parse(DomainSpec::interval(0.0, 1.0).unwrap(), 3.0, "1", "d", "1", "u^2").unwrap();
        let grid = Grid::build(&p.domain, 1.0 / 32.0).unwrap();
        let closure = grid.closure_mask();
        let mut s = seed | 1;
        let u = ScalarField::from_fn(&closure, |i| {
            if grid.boundary_mask().contains(i) {
                1.0
            } else {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                1.0 + scale * ((s % 1000) as f64 / 1000.0)
            }
        }).unwrap();
        let r = residual(&p, &u).unwrap();
        let tol = frac * r;
        prop_assume!((tol - r).abs() > 1e-9 * r);
        let both = check_supersolution(&p, &u, tol).unwrap().passed() && check_subsolution(&p, &u, tol).unwrap().passed();
        prop_assert_eq!(both, r <= tol);
    }
}
