//! Command dispatch. Each command turns a resolved config into output files;
//! nothing touches the filesystem until every computation has succeeded.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;

use splineprob_core::convergence::per_grid_seed;
use splineprob_core::solver::streams;
use splineprob_core::{
    derive_seed, estimate_rate, grid_posterior, init_prior, make_quasi_uniform_grid, mixed_partial_operator,
    sample_many, solve, tensor_eval, CoefficientPrior, GridSpec, KnotVector, Matrix, ObservationModel, OdeProblem,
    SolveMode, SolverConfig, TensorBasis, TensorCoefficients,
};

use crate::config::{self, Command, ExperimentConfig, Format, Manifest, Mode, PriorStructure};
use crate::error::{CliError, NumericContext};
use crate::output::{self, fmt_f64, json_file, OutputFile, Table};
use crate::problems::{Field, ProblemName};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.dir` from the config.
    pub output_dir: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

/// Everything a command produces before it is written out.
struct Products {
    csv: Vec<OutputFile>,
    json: Vec<OutputFile>,
    seeds: serde_json::Value,
}

/// Parses `text` (config or manifest), runs it and writes the results.
pub fn run_text(text: &str, opts: &RunOptions) -> Result<RunReport, CliError> {
    let input = config::parse_input(text)?;
    let (resolved, log) = config::resolve(&input.config)?;
    let defaulted = input.recorded_defaults.unwrap_or(log);
    let dir = opts
        .output_dir
        .clone()
        .or_else(|| input.config.output.as_ref().and_then(|o| o.dir.as_ref()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUTPUT_DIR));
    run_resolved(&resolved, defaulted, &dir, opts.quiet)
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    run_text(&text, opts)
}

fn progress(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("splineprob: {}", msg.as_ref());
    }
}

fn run_resolved(c: &ExperimentConfig, defaulted: Vec<String>, dir: &Path, quiet: bool) -> Result<RunReport, CliError> {
    let started = Instant::now();
    progress(quiet, format!("running `{}`", c.command.name()));
    let products = match c.command {
        Command::Solve => run_solve(c, quiet)?,
        Command::PriorSample => run_prior_sample(c)?,
        Command::PdePriorSample => run_pde_prior_sample(c)?,
        Command::Converge => run_converge(c, quiet)?,
        Command::Infer => run_infer(c, quiet)?,
    };
    let formats = c.output.as_ref().and_then(|o| o.formats.clone()).unwrap_or_default();
    let mut files = Vec::new();
    if formats.contains(&Format::Csv) {
        files.extend(products.csv);
    }
    if formats.contains(&Format::Json) {
        files.extend(products.json);
    }
    let names: Vec<String> = files.iter().map(|f| f.name.clone()).collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: c.clone(),
        defaulted,
        seeds: products.seeds,
        outputs: names.clone(),
    };
    files.push(json_file("manifest.json", &manifest));
    output::write_all(dir, &files)?;
    progress(quiet, format!("wrote {} file(s) to {} in {:.3} s", files.len(), dir.display(), started.elapsed().as_secs_f64()));
    let mut all = names;
    all.push("manifest.json".into());
    Ok(RunReport { dir: dir.to_path_buf(), files: all })
}

/// Problem data pulled out of a resolved config.
struct ProblemData {
    name: ProblemName,
    theta: Vec<f64>,
    u0: Vec<f64>,
    l: f64,
}

impl ProblemData {
    fn from_config(c: &ExperimentConfig) -> Self {
        let p = c.problem.as_ref().expect("resolved");
        Self { name: p.name, theta: p.theta.clone().expect("resolved"), u0: p.u0.clone(), l: p.domain_length }
    }

    fn with_theta(&self, theta: &[f64]) -> splineprob_core::Result<OdeProblem<Field>> {
        OdeProblem::new(self.name.field(), theta.to_vec(), self.u0.clone(), self.l)
    }

    fn problem(&self) -> Result<OdeProblem<Field>, CliError> {
        self.with_theta(&self.theta).during("problem setup")
    }
}

fn seed_of(c: &ExperimentConfig) -> u64 {
    c.seed.expect("resolved")
}

/// Grid of size `n` for this config: seed `seed XOR n`, as in rate studies.
fn grid_for(c: &ExperimentConfig, n: usize, l: f64) -> Result<GridSpec, CliError> {
    let gc = c.grid.as_ref().and_then(|g| g.c).expect("resolved");
    make_quasi_uniform_grid(n, l, gc, per_grid_seed(seed_of(c), n)).during("grid generation")
}

fn solver_config(c: &ExperimentConfig, grid: GridSpec) -> SolverConfig {
    let s = c.solver.as_ref().expect("resolved");
    let mut sc = SolverConfig::new(grid);
    sc.basis_count = s.basis_count;
    sc.order = s.order.expect("resolved");
    sc.prior_scale = s.prior_scale.expect("resolved");
    sc.prior_structure = match s.prior_structure.expect("resolved") {
        PriorStructure::Integrated => splineprob_core::PriorStructure::Integrated,
        PriorStructure::Independent => splineprob_core::PriorStructure::Independent,
    };
    sc.nugget = s.nugget.expect("resolved");
    sc.mode = match s.mode.expect("resolved") {
        Mode::Sample => SolveMode::Sample,
        Mode::Mean => SolveMode::Mean,
    };
    sc.draws = s.draws.expect("resolved");
    sc.seed = seed_of(c);
    sc
}

fn component_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("{prefix}_{k}")).collect()
}

fn draw_names(draws: usize, d: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(draws * d);
    for s in 1..=draws {
        if d == 1 {
            names.push(format!("draw_{s}"));
        } else {
            names.extend((1..=d).map(|k| format!("draw_{s}_{k}")));
        }
    }
    names
}

fn solver_seeds(c: &ExperimentConfig, n: usize) -> serde_json::Value {
    let seed = seed_of(c);
    json!({
        "base": seed,
        "grid": per_grid_seed(seed, n),
        "grid_rule": "base XOR N",
        "step_rule": "derive_seed(base, 1, i) for grid index i",
        "draw_rule": "derive_seed(base, 2, k) for component k",
    })
}

#[derive(Serialize)]
struct SolveSummary {
    command: &'static str,
    n: usize,
    basis_count: usize,
    length_scale: f64,
    total_variance: f64,
    final_time: f64,
    final_mean: Vec<f64>,
    final_sd: Vec<f64>,
    max_abs_error: f64,
}

fn run_solve(c: &ExperimentConfig, quiet: bool) -> Result<Products, CliError> {
    let pd = ProblemData::from_config(c);
    let problem = pd.problem()?;
    let n = c.grid.as_ref().and_then(|g| g.n).expect("resolved");
    let grid = grid_for(c, n, pd.l)?;
    let sc = solver_config(c, grid);
    progress(quiet, format!("solve: N = {n}, J = {}, d = {}", sc.resolved_basis_count(), problem.dim()));
    let sol = solve(&problem, &sc).during("solve")?;
    let d = problem.dim();

    let mut header = vec!["t".to_string()];
    header.extend(component_names("mean", d));
    header.extend(component_names("sd", d));
    header.extend(draw_names(sol.draws.len(), d));
    let mut table = Table::new(header);
    let mut max_err = 0.0_f64;
    for (i, &t) in sol.grid.points().iter().enumerate() {
        let mean = sol.mean_at(t).during("posterior evaluation")?;
        let sd = sol.sd_at(t).during("posterior evaluation")?;
        for (m, e) in mean.iter().zip(pd.name.analytic(&pd.theta, &pd.u0, t)) {
            max_err = max_err.max((m - e).abs());
        }
        let mut row = vec![t];
        row.extend(&mean);
        row.extend(&sd);
        for draw in &sol.draws {
            row.extend((0..d).map(|k| draw[(i, k)]));
        }
        table.push_floats(row);
    }
    let l = pd.l;
    let summary = SolveSummary {
        command: "solve",
        n,
        basis_count: sc.resolved_basis_count(),
        length_scale: sc.length_scale(),
        total_variance: sol.total_variance(),
        final_time: l,
        final_mean: sol.mean_at(l).during("posterior evaluation")?,
        final_sd: sol.sd_at(l).during("posterior evaluation")?,
        max_abs_error: max_err,
    };
    Ok(Products {
        csv: vec![table.to_csv("trajectory.csv")?],
        json: vec![json_file("summary.json", &summary)],
        seeds: solver_seeds(c, n),
    })
}

fn run_prior_sample(c: &ExperimentConfig) -> Result<Products, CliError> {
    let pd = ProblemData::from_config(c);
    let problem = pd.problem()?;
    let n = c.grid.as_ref().and_then(|g| g.n).expect("resolved");
    let grid = grid_for(c, n, pd.l)?;
    let sc = solver_config(c, grid);
    let state = init_prior(&problem, &sc).during("prior construction")?;
    let d = problem.dim();
    let seed = seed_of(c);
    let draws = state
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, g)| sample_many(g, derive_seed(seed, streams::DRAWS, k as u64), sc.draws))
        .collect::<splineprob_core::Result<Vec<_>>>()
        .during("prior sampling")?;

    let mut header = vec!["t".to_string()];
    header.extend(component_names("mean", d));
    header.extend(component_names("sd", d));
    header.extend(draw_names(sc.draws, d));
    let mut table = Table::new(header);
    let times = std::iter::once(0.0).chain(sc.grid.points().iter().copied());
    for t in times {
        let (mean, var) = state.marginal(t).during("prior evaluation")?;
        let b = state.knots.eval_basis(t).during("prior evaluation")?;
        let mut row = vec![t];
        row.extend(&mean);
        row.extend(var.iter().map(|v| v.sqrt()));
        for s in 0..sc.draws {
            row.extend(draws.iter().map(|comp| splineprob_core::linalg::dot(&b, &comp[s])));
        }
        table.push_floats(row);
    }
    let summary = json!({
        "command": "prior-sample",
        "basis_count": state.knots.basis_count(),
        "length_scale": state.knots.length_scale(),
        "draws": sc.draws,
    });
    Ok(Products {
        csv: vec![table.to_csv("prior.csv")?],
        json: vec![json_file("summary.json", &summary)],
        seeds: solver_seeds(c, n),
    })
}

fn axis_points(n: usize, l: f64) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { l } else { l * i as f64 / (n - 1) as f64 }).collect()
}

fn run_pde_prior_sample(c: &ExperimentConfig) -> Result<Products, CliError> {
    let p = c.pde.as_ref().expect("resolved");
    let (qx, qt) = (p.qx.expect("resolved"), p.qt.expect("resolved"));
    let [rx, rt] = p.orders.expect("resolved");
    let scale = p.prior_scale.expect("resolved");
    let draws = p.draws.expect("resolved");
    let seed = seed_of(c);
    let kx = KnotVector::clamped_uniform(p.lx, p.jx, qx).during("space basis")?;
    let kt = KnotVector::clamped_uniform(p.lt, p.jt, qt).during("time basis")?;
    let tb = TensorBasis::new(kx, kt);
    let op = mixed_partial_operator(&tb, rx, rt).during("mixed partial operator")?;
    let prior = CoefficientPrior::new(scale).during("coefficient prior")?.gaussian(p.jx * p.jt);
    let samples = sample_many(&prior, derive_seed(seed, streams::DRAWS, 0), draws).during("prior sampling")?;
    let fields = samples
        .into_iter()
        .map(|v| {
            let coeffs = TensorCoefficients::new(Matrix::from_row_major(p.jx, p.jt, v)?);
            op.apply(&coeffs)
        })
        .collect::<splineprob_core::Result<Vec<_>>>()
        .during("mixed partial operator")?;

    let mut header = vec!["x".to_string(), "t".to_string(), "sd".to_string()];
    header.extend(draw_names(draws, 1));
    let mut table = Table::new(header);
    for &x in &axis_points(p.nx, p.lx) {
        for &t in &axis_points(p.nt, p.lt) {
            let row = tb.design_row(x, t, rx, rt).during("design row")?;
            let sd = (scale * row.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let mut cells = vec![x, t, sd];
            for f in &fields {
                cells.push(tensor_eval(&op.basis, f, x, t).during("tensor evaluation")?);
            }
            table.push_floats(cells);
        }
    }
    let summary = json!({
        "command": "pde-prior-sample",
        "shape": [p.jx, p.jt],
        "orders": [rx, rt],
        "draws": draws,
    });
    Ok(Products {
        csv: vec![table.to_csv("pde_prior.csv")?],
        json: vec![json_file("summary.json", &summary)],
        seeds: json!({ "base": seed, "draw_rule": "derive_seed(base, 2, 0) for all coefficient draws" }),
    })
}

fn run_converge(c: &ExperimentConfig, quiet: bool) -> Result<Products, CliError> {
    let pd = ProblemData::from_config(c);
    let problem = pd.problem()?;
    let ns = c.converge.as_ref().expect("resolved").ns.clone();
    let base = solver_config(c, grid_for(c, ns[0], pd.l)?);
    progress(quiet, format!("converge: Ns = {ns:?}"));
    let (name, theta, u0) = (pd.name, pd.theta.clone(), pd.u0.clone());
    let report = estimate_rate(&problem, |t| name.analytic(&theta, &u0, t), &ns, &base).during("rate estimation")?;
    let mut table = Table::new(["N", "h", "C_actual", "max_error"]);
    for r in &report.rows {
        table.push(vec![r.n.to_string(), fmt_f64(r.h), fmt_f64(r.c_actual), fmt_f64(r.max_error)]);
    }
    let summary = json!({ "slope": report.slope, "intercept": report.intercept, "residual": report.residual });
    progress(quiet, format!("converge: slope = {}", report.slope));
    let seed = seed_of(c);
    let grids: Vec<_> = ns.iter().map(|&n| json!({ "N": n, "seed": per_grid_seed(seed, n) })).collect();
    Ok(Products {
        csv: vec![table.to_csv("rate.csv")?],
        json: vec![json_file("rate.json", &summary)],
        seeds: json!({ "base": seed, "grid_rule": "base XOR N", "grids": grids }),
    })
}

/// Observation times and stacked (time-major) values from a CSV file with
/// columns `t, y_1, …, y_d`.
fn read_observations(path: &str, d: usize, l: f64) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = |msg: String| CliError::config(format!("data file {path}: {msg}"));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let mut expected = vec!["t".to_string()];
    expected.extend(component_names("y", d));
    if header.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(bad(format!("header must be {}", expected.join(","))));
    }
    let (mut times, mut ys) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        if !(0.0..=l).contains(&vals[0]) || vals.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("row {}: time must lie in [0, {l}] and values must be finite", line + 2)));
        }
        times.push(vals[0]);
        ys.extend(&vals[1..]);
    }
    if times.is_empty() {
        return Err(bad("no observations".into()));
    }
    Ok((times, ys))
}

fn run_infer(c: &ExperimentConfig, quiet: bool) -> Result<Products, CliError> {
    let pd = ProblemData::from_config(c);
    let inf = c.inference.as_ref().expect("resolved");
    let n = c.grid.as_ref().and_then(|g| g.n).expect("resolved");
    let sc = solver_config(c, grid_for(c, n, pd.l)?);
    let d = pd.u0.len();
    let seed = seed_of(c);
    let sim_seed = derive_seed(seed, streams::SIMULATION, 0);

    let (times, y) = if inf.simulate == Some(true) {
        let times = inf.obs_times.clone().expect("resolved");
        let sd = inf.noise_var.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(sim_seed);
        let mut y = Vec::with_capacity(times.len() * d);
        for &t in &times {
            for v in pd.name.analytic(&pd.theta, &pd.u0, t) {
                let z: f64 = StandardNormal.sample(&mut rng);
                y.push(v + sd * z);
            }
        }
        (times, y)
    } else {
        read_observations(inf.data_path.as_deref().expect("resolved"), d, pd.l)?
    };
    let mut obs_table = Table::new(std::iter::once("t".to_string()).chain(component_names("y", d)));
    for (i, &t) in times.iter().enumerate() {
        obs_table.push_floats(std::iter::once(t).chain(y[i * d..(i + 1) * d].iter().copied()));
    }

    progress(quiet, format!("infer: {} candidates, {} observation times", inf.theta_grid.len(), times.len()));
    let obs = ObservationModel::direct(times, d, inf.noise_var).during("observation model")?;
    let weights =
        grid_posterior(|th: &[f64]| pd.with_theta(th), &inf.theta_grid, &obs, &y, &sc).during("grid posterior")?;

    let p = pd.name.theta_len();
    let mut table = Table::new(component_names("theta", p).into_iter().chain(std::iter::once("weight".to_string())));
    for (theta, w) in &weights {
        table.push_floats(theta.iter().copied().chain(std::iter::once(*w)));
    }
    let best = weights.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty grid");
    let summary = json!({
        "command": "infer",
        "argmax_theta": best.0,
        "argmax_weight": best.1,
        "weight_sum": weights.iter().map(|(_, w)| w).sum::<f64>(),
    });
    let mut seeds = solver_seeds(c, n);
    seeds["simulation"] = json!(if inf.simulate == Some(true) { Some(sim_seed) } else { None });
    Ok(Products {
        csv: vec![table.to_csv("posterior.csv")?, obs_table.to_csv("observations.csv")?],
        json: vec![json_file("summary.json", &summary)],
        seeds,
    })
}
