use proptest::prelude::*;
use splineprob_core::convergence::per_grid_seed;
use splineprob_core::{
    estimate_rate, estimate_rate_with, make_quasi_uniform_grid, quasi_uniformity_constant, Error, GridSpec,
    OdeProblem, SolverConfig,
};

#[test]
fn grid_examples() {
    assert_eq!(make_quasi_uniform_grid(4, 1.0, 1.0, 12345).unwrap().points(), &[0.25, 0.5, 0.75, 1.0]);
    let g = make_quasi_uniform_grid(100, 1.0, 2.0, 7).unwrap();
    assert_eq!(g, make_quasi_uniform_grid(100, 1.0, 2.0, 7).unwrap());
    let incs: Vec<f64> = std::iter::once(0.0).chain(g.points().iter().copied()).collect::<Vec<_>>().windows(2).map(|w| w[1] - w[0]).collect();
    let h = incs.iter().copied().fold(0.0, f64::max);
    assert_eq!(h, g.max_increment());
    assert!(h <= 2.0 * (1.0 / 100.0) * 2f64.sqrt());
    assert_eq!(*g.points().last().unwrap(), 1.0);
    let c = quasi_uniformity_constant(make_quasi_uniform_grid(50, 1.0, 3.0, 1).unwrap().points()).unwrap();
    assert!((1.0..=3.0).contains(&c));
    assert!((quasi_uniformity_constant(&[0.1, 0.3]).unwrap() - 2.0).abs() < 1e-12);
    assert!(matches!(make_quasi_uniform_grid(10, 1.0, 0.5, 0), Err(Error::InvalidBound(_))));
    assert!(matches!(GridSpec::new(vec![0.5, 1.0], 0.5), Err(Error::InvalidBound(_))));
    assert!(matches!(quasi_uniformity_constant(&[0.2, 0.2]), Err(Error::DegenerateGrid { .. })));
    assert_eq!(per_grid_seed(6, 3), 5);
}

#[test]
fn synthetic_power_laws() {
    for (c, p) in [(1.0, 1.0), (3.0, 2.0), (0.7, 0.5), (2.5, 1.0)] {
        let r = estimate_rate_with(&[10, 20, 40, 80, 160], |n| {
            Ok((GridSpec::uniform(n, 1.0)?, c * (n as f64).powf(-p)))
        })
        .unwrap();
        assert!((r.slope + p).abs() <= 1e-10, "p={p} slope={}", r.slope);
        assert!((r.intercept - f64::ln(c)).abs() <= 1e-10);
        assert!(r.residual <= 1e-10);
        assert_eq!(r.ns(), vec![10, 20, 40, 80, 160]);
    }
}

#[test]
fn rate_errors() {
    let ok = |n: usize| Ok((GridSpec::uniform(n, 1.0)?, 1.0 / n as f64));
    assert!(matches!(estimate_rate_with(&[10, 20], ok), Err(Error::TooFewPoints(2))));
    assert!(estimate_rate_with(&[10, 40, 20], ok).is_err());
    let exact = |n: usize| Ok((GridSpec::uniform(n, 1.0)?, if n == 20 { 0.0 } else { 1.0 }));
    assert!(matches!(estimate_rate_with(&[10, 20, 40], exact), Err(Error::RateUndefined { n: 20, .. })));
}

#[test]
fn decay_errors_shrink_on_nested_grids() {
    let p = OdeProblem::new(|_t: f64, u: &[f64], th: &[f64]| vec![-th[0] * u[0]], vec![1.0], vec![1.0], 2.0).unwrap();
    let mut base = SolverConfig::new(GridSpec::uniform(10, 2.0).unwrap());
    base.nugget = 1e-10;
    let r = estimate_rate(&p, |t| vec![(-t).exp()], &[10, 20, 40, 80], &base).unwrap();
    let e = r.errors();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert!(r.rows.iter().all(|row| (row.c_actual - 1.0).abs() < 1e-9));
    assert!(r.slope < -0.8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prop_grid_respects_bound(n in 2usize..400, c in 1.0f64..6.0, seed in any::<u64>(), l in 0.1f64..10.0) {
        let g = make_quasi_uniform_grid(n, l, c, seed).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert!(g.points().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(quasi_uniformity_constant(g.points()).unwrap() <= c * (1.0 + 1e-9));
        // The largest of n increments is at least the mean. At most it is one
        // factor of √C against n−1 factors of 1/√C, which gives nC/(C+n−1).
        let scaled = g.max_increment() * n as f64 / l;
        let nf = n as f64;
        prop_assert!(scaled >= 1.0 - 1e-12);
        prop_assert!(scaled <= nf * c / (c + nf - 1.0) * (1.0 + 1e-12));
    }
}
