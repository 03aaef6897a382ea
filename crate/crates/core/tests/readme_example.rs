use splineprob_core::{solve, GridSpec, OdeProblem, SolveMode, SolverConfig};

#[test]
fn readme_example_runs() -> splineprob_core::Result<()> {
    let problem = OdeProblem::new(|_t, u: &[f64], th: &[f64]| vec![-th[0] * u[0]], vec![1.0], vec![1.0], 2.0)?;
    let mut config = SolverConfig::new(GridSpec::uniform(40, 2.0)?);
    config.mode = SolveMode::Mean;
    let posterior = solve(&problem, &config)?;
    let (mean, sd) = (posterior.mean_at(1.0)?, posterior.sd_at(1.0)?);
    assert!((mean[0] - (-1.0f64).exp()).abs() < 1e-2);
    assert!(sd[0] >= 0.0);
    Ok(())
}
