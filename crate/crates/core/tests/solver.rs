mod common;

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use splineprob_core::solver::streams;
use splineprob_core::{
    derive_seed, grid_posterior, init_prior, marginal_likelihood, solve, step, Error, GridSpec, KnotVector,
    ObservationModel, OdeProblem, PriorStructure, SolveMode, SolverConfig,
};

type Field = fn(f64, &[f64], &[f64]) -> Vec<f64>;

fn zero(_: f64, u: &[f64], _: &[f64]) -> Vec<f64> {
    vec![0.0; u.len()]
}

fn one(_: f64, u: &[f64], _: &[f64]) -> Vec<f64> {
    vec![1.0; u.len()]
}

fn two_t(t: f64, u: &[f64], _: &[f64]) -> Vec<f64> {
    vec![2.0 * t; u.len()]
}

fn decay(_: f64, u: &[f64], th: &[f64]) -> Vec<f64> {
    u.iter().map(|v| -th[0] * v).collect()
}

fn problem(f: Field, theta: Vec<f64>, u0: Vec<f64>, l: f64) -> OdeProblem<Field> {
    OdeProblem::new(f, theta, u0, l).unwrap()
}

fn mean_config(n: usize, l: f64) -> SolverConfig {
    let mut c = SolverConfig::new(GridSpec::uniform(n, l).unwrap());
    c.mode = SolveMode::Mean;
    c
}

fn max_grid_error(p: &OdeProblem<Field>, c: &SolverConfig, exact: impl Fn(f64) -> f64) -> f64 {
    let sol = solve(p, c).unwrap();
    c.grid.points().iter().map(|&t| (sol.mean_at(t).unwrap()[0] - exact(t)).abs()).fold(0.0, f64::max)
}

/// Random-walk prior covariance written out entrywise:
/// `Σ_ij = σ² (1 + ∑_{k < min(i,j)} s_k²)`, `s_k = (τ_{k+q} − τ_{k+1}) / (q − 1)`.
fn random_walk_cov(kv: &KnotVector, sigma2: f64) -> Vec<Vec<f64>> {
    let q = kv.order();
    let t = kv.knots();
    let j = kv.basis_count();
    let s: Vec<f64> = (0..j - 1).map(|k| (t[k + q] - t[k + 1]) / (q - 1) as f64).collect();
    (0..j)
        .map(|a| (0..j).map(|b| sigma2 * (1.0 + s[..a.min(b)].iter().map(|x| x * x).sum::<f64>())).collect())
        .collect()
}

#[test]
fn init_prior_matches_dense_joint_conditioning() {
    for structure in [PriorStructure::Integrated, PriorStructure::Independent] {
        let mut c = mean_config(10, 1.0);
        c.basis_count = Some(8);
        c.prior_scale = 1.0;
        c.prior_structure = structure;
        let p = problem(zero, vec![], vec![1.0], 1.0);
        let state = init_prior(&p, &c).unwrap();
        let kv = KnotVector::clamped_uniform(1.0, 8, 4).unwrap();
        assert_eq!(state.knots, kv);

        let sigma = match structure {
            PriorStructure::Integrated => random_walk_cov(&kv, 1.0),
            PriorStructure::Independent => {
                (0..8).map(|a| (0..8).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect()
            }
        };
        // Joint of (ϑ, u(0)): Cov(ϑ, u0) = Σ b0, Var(u0) = b0ᵀ Σ b0. Condition on u0 = 1.
        let b0 = common::naive_row(kv.knots(), 4, 0.0);
        let sb0: Vec<f64> = sigma.iter().map(|r| common::dot(r, &b0)).collect();
        let v0 = common::dot(&b0, &sb0);
        let post: Vec<Vec<f64>> =
            (0..8).map(|a| (0..8).map(|b| sigma[a][b] - sb0[a] * sb0[b] / v0).collect()).collect();
        let b = common::naive_row(kv.knots(), 4, 0.9);
        let pb: Vec<f64> = post.iter().map(|r| common::dot(r, &b)).collect();
        let oracle_var = common::dot(&b, &pb);
        let oracle_mean = common::dot(&b, &sb0) / v0;

        let (m, v) = state.marginal(0.9).unwrap();
        assert_abs_diff_eq!(v[0], oracle_var, epsilon = 1e-12);
        assert_abs_diff_eq!(m[0], oracle_mean, epsilon = 1e-12);
        let (m0, v0) = state.marginal(0.0).unwrap();
        assert_abs_diff_eq!(m0[0], 1.0, epsilon = 1e-10);
        assert!(v0[0] <= 1e-10);
    }
}

#[test]
fn init_prior_zero_and_five() {
    let c = mean_config(10, 1.0);
    let s = init_prior(&problem(zero, vec![], vec![0.0], 1.0), &c).unwrap();
    assert!(s.coeffs[0].mean.iter().all(|m| *m == 0.0));
    assert!(s.marginal(0.0).unwrap().1[0] <= 1e-10);
    let s = init_prior(&problem(zero, vec![], vec![5.0], 1.0), &c).unwrap();
    assert_abs_diff_eq!(s.marginal(0.0).unwrap().0[0], 5.0, epsilon = 1e-10);
}

#[test]
fn zero_field_steps_freeze_the_solution() {
    let mut c = mean_config(12, 1.0);
    c.basis_count = Some(6);
    c.nugget = 0.0;
    let p = problem(zero, vec![], vec![2.5], 1.0);
    let mut state = init_prior(&p, &c).unwrap();
    for (i, &t) in c.grid.points().iter().enumerate() {
        state = step(&state, t, &p, &c, i as u64).unwrap();
    }
    for &t in c.grid.points() {
        assert_abs_diff_eq!(state.marginal(t).unwrap().0[0], 2.5, epsilon = 1e-8);
    }
    // Least-squares view: the 12 derivative rows span the 5-dim derivative space.
    let dc = state.derivative.apply(&state.coeffs[0].mean).unwrap();
    assert!(dc.iter().all(|v| v.abs() <= 1e-8));
}

#[test]
fn huge_nugget_is_uninformative() {
    let mut c = mean_config(12, 1.0);
    c.nugget = 1e12 * c.prior_scale;
    let p = problem(one, vec![], vec![1.0], 1.0);
    let before = init_prior(&p, &c).unwrap();
    let after = step(&before, 0.5, &p, &c, 0).unwrap();
    let (g0, g1) = (&before.coeffs[0], &after.coeffs[0]);
    let scale = g0.cov.max_abs().max(1.0);
    assert!(g0.cov.max_abs_diff(&g1.cov) <= 1e-6 * scale);
    for (a, b) in g0.mean.iter().zip(&g1.mean) {
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
    }
}

#[test]
fn sample_mode_is_deterministic() {
    let mut c = SolverConfig::new(GridSpec::uniform(30, 2.0).unwrap());
    c.seed = 42;
    c.draws = 3;
    let p = problem(decay, vec![1.0], vec![1.0], 2.0);
    let a = solve(&p, &c).unwrap();
    let b = solve(&p, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.draws.len(), 3);
    assert_eq!((a.draws[0].rows(), a.draws[0].cols()), (30, 1));
    let s = init_prior(&p, &c).unwrap();
    assert_eq!(step(&s, 0.3, &p, &c, 7).unwrap(), step(&s, 0.3, &p, &c, 7).unwrap());
    c.seed = 43;
    assert_ne!(solve(&p, &c).unwrap().coeff_posterior, a.coeff_posterior);
    assert_eq!(a.seed_used, 42);
    assert_eq!(a.mode_used, SolveMode::Sample);
}

#[test]
fn constant_solution() {
    let mut c = mean_config(20, 3.0);
    c.nugget = 0.0;
    // u(0), u_t(0) and 20 grid slopes: 22 exact constraints, so no redundancy.
    c.basis_count = Some(22);
    let p = problem(zero, vec![], vec![2.0], 3.0);
    assert!(max_grid_error(&p, &c, |_| 2.0) <= 1e-8);
}

#[test]
fn polynomial_solutions_are_exact() {
    for (f, exact) in [(one as Field, (|t: f64| t) as fn(f64) -> f64), (two_t as Field, |t: f64| t * t)] {
        for n in [10, 25] {
            let mut c = mean_config(n, 1.5);
            c.nugget = 1e-10;
            c.basis_count = Some(n + 1);
            let p = problem(f, vec![], vec![0.0], 1.5);
            let e = max_grid_error(&p, &c, exact);
            assert!(e <= 1e-6, "n={n} err={e}");
        }
    }
}

#[test]
fn forced_example_with_defaults() {
    let c = mean_config(40, 1.0);
    let p = problem(one, vec![], vec![0.0], 1.0);
    assert!(max_grid_error(&p, &c, |t| t) <= 1e-3);
}

#[test]
fn decay_converges() {
    let p = problem(decay, vec![1.0], vec![1.0], 2.0);
    let err = |n| {
        let mut c = mean_config(n, 2.0);
        c.prior_scale = 10.0;
        c.nugget = 1e-10;
        max_grid_error(&p, &c, |t| (-t).exp())
    };
    let e80 = err(80);
    assert!(e80 <= 5e-2, "{e80}");
    let mut last = err(10);
    for n in [20, 40, 80, 160] {
        let e = if n == 80 { e80 } else { err(n) };
        assert!(e < last, "error did not shrink at N={n}");
        last = e;
    }
}

#[test]
fn information_reduces_total_variance() {
    let p = problem(decay, vec![1.0], vec![1.0], 2.0);
    let trace = |n| {
        let mut c = mean_config(n, 2.0);
        c.basis_count = Some(15);
        solve(&p, &c).unwrap().total_variance()
    };
    let (t10, t20, t40) = (trace(10), trace(20), trace(40));
    assert!(t20 <= t10 && t40 <= t20, "{t10} {t20} {t40}");
}

#[test]
fn decoupled_system_matches_scalar_solves() {
    let p2 = problem(decay, vec![1.0], vec![1.0, -0.5], 2.0);
    let pa = problem(decay, vec![1.0], vec![1.0], 2.0);
    let pb = problem(decay, vec![1.0], vec![-0.5], 2.0);
    let c = mean_config(24, 2.0);
    let s2 = solve(&p2, &c).unwrap();
    let (sa, sb) = (solve(&pa, &c).unwrap(), solve(&pb, &c).unwrap());
    for (joint, single) in s2.coeff_posterior.iter().zip([&sa.coeff_posterior[0], &sb.coeff_posterior[0]]) {
        assert!(joint.cov.max_abs_diff(&single.cov) <= 1e-9);
        for (x, y) in joint.mean.iter().zip(&single.mean) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
    // In sample mode the first component shares its draws with the scalar solve.
    let mut c = SolverConfig::new(GridSpec::uniform(24, 2.0).unwrap());
    c.seed = 5;
    let s2 = solve(&p2, &c).unwrap();
    let sa = solve(&pa, &c).unwrap();
    assert!(s2.coeff_posterior[0].cov.max_abs_diff(&sa.coeff_posterior[0].cov) <= 1e-9);
    for (x, y) in s2.coeff_posterior[0].mean.iter().zip(&sa.coeff_posterior[0].mean) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn marginal_likelihood_examples() {
    let p = problem(decay, vec![1.0], vec![1.0], 2.0);
    let sol = solve(&p, &mean_config(20, 2.0)).unwrap();
    let obs = ObservationModel::direct(vec![0.0], 1, 1.0).unwrap();
    let at_mean = marginal_likelihood(&sol, &obs, &[1.0]).unwrap();
    let v = 1.0 + sol.sd_at(0.0).unwrap()[0].powi(2);
    assert_abs_diff_eq!(at_mean, -0.5 * (2.0 * std::f64::consts::PI * v).ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(at_mean, -0.9189385332046727, epsilon = 1e-9);
    assert!(marginal_likelihood(&sol, &obs, &[11.0]).unwrap() < at_mean);

    let noisy = ObservationModel::direct(vec![0.5, 1.5], 1, 1e12).unwrap();
    let a = marginal_likelihood(&sol, &noisy, &[0.1, 0.2]).unwrap();
    let b = marginal_likelihood(&sol, &noisy, &[0.3, -0.2]).unwrap();
    assert!((a - b).abs() < 1e-6);
    assert_abs_diff_eq!(a, -(2.0 * std::f64::consts::PI * 1e12).ln(), epsilon = 1e-6);

    assert!(matches!(marginal_likelihood(&sol, &obs, &[1.0, 2.0]), Err(Error::Dimension { .. })));
    assert!(ObservationModel::direct(vec![0.5], 1, 0.0).is_err());
}

fn decay_family(theta: &[f64]) -> splineprob_core::Result<OdeProblem<Field>> {
    OdeProblem::new(decay as Field, theta.to_vec(), vec![1.0], 2.0)
}

fn grid() -> Vec<Vec<f64>> {
    [0.5, 0.75, 1.0, 1.25, 1.5].iter().map(|t| vec![*t]).collect()
}

#[test]
fn grid_posterior_without_data_is_uniform() {
    let obs = ObservationModel::direct(vec![], 1, 1.0).unwrap();
    let w = grid_posterior(decay_family, &grid(), &obs, &[], &mean_config(20, 2.0)).unwrap();
    assert!(w.iter().all(|(_, p)| *p == 0.2));
}

#[test]
fn grid_posterior_preserves_ties() {
    // θ and −θ give the same field.
    fn sq(_: f64, u: &[f64], th: &[f64]) -> Vec<f64> {
        u.iter().map(|v| -th[0] * th[0] * v).collect()
    }
    let family = |th: &[f64]| OdeProblem::new(sq as Field, th.to_vec(), vec![1.0], 2.0);
    let obs = ObservationModel::direct(vec![0.5, 1.0, 1.5], 1, 1e-4).unwrap();
    let thetas = vec![vec![-1.0], vec![0.5], vec![1.0]];
    let w = grid_posterior(family, &thetas, &obs, &[0.6, 0.37, 0.22], &mean_config(20, 2.0)).unwrap();
    assert!((w[0].1 - w[2].1).abs() <= 1e-12);
    let total: f64 = w.iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert!(w.iter().all(|(_, p)| (0.0..=1.0).contains(p)));
}

#[test]
fn grid_posterior_recovers_decay_rate() {
    let times: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(2024, streams::SIMULATION, 0));
    let y: Vec<f64> = times
        .iter()
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (-t).exp() + 1e-3 * z
        })
        .collect();
    // Residual oracle on the analytic family e^{−θt}.
    let sse = |th: f64| times.iter().zip(&y).map(|(t, v)| ((-th * t).exp() - v).powi(2)).sum::<f64>();
    let best = grid().into_iter().min_by(|a, b| sse(a[0]).total_cmp(&sse(b[0]))).unwrap();
    assert_eq!(best, vec![1.0]);

    let obs = ObservationModel::direct(times, 1, 1e-6).unwrap();
    let mut c = SolverConfig::new(GridSpec::uniform(40, 2.0).unwrap());
    c.mode = SolveMode::Mean;
    let w = grid_posterior(decay_family, &grid(), &obs, &y, &c).unwrap();
    let argmax = w.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(argmax.0, vec![1.0]);
    assert!((w.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() <= 1e-12);
    assert!(grid_posterior(decay_family, &[], &obs, &y, &c).is_err());
}
