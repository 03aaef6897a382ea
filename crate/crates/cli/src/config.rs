//! Experiment configuration: strict JSON parsing, per-command validation and
//! defaulting.
//!
//! Every struct rejects unknown keys. [`resolve`] fills in defaults and
//! reports which fields it filled, so the manifest can echo a config that
//! re-parses to the same experiment.

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::problems::ProblemName;

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_PRIOR_SCALE: f64 = 10.0;
pub const DEFAULT_RELATIVE_NUGGET: f64 = 1e-8;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SAMPLE_DRAWS: usize = 5;
pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    PriorSample,
    PdePriorSample,
    Converge,
    Infer,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::PriorSample => "prior-sample",
            Command::PdePriorSample => "pde-prior-sample",
            Command::Converge => "converge",
            Command::Infer => "infer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sample,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorStructure {
    Integrated,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: ProblemName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub u0: Vec<f64>,
    #[serde(rename = "L")]
    pub domain_length: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Basis count; absent means `N + q − 1`, resolved per grid.
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub basis_count: Option<usize>,
    #[serde(rename = "q", default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_structure: Option<PriorStructure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nugget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(rename = "Ns")]
    pub ns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSection {
    pub theta_grid: Vec<Vec<f64>>,
    pub noise_var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    #[serde(rename = "Jx")]
    pub jx: usize,
    #[serde(rename = "Jt")]
    pub jt: usize,
    #[serde(rename = "q_x", default, skip_serializing_if = "Option::is_none")]
    pub qx: Option<usize>,
    #[serde(rename = "q_t", default, skip_serializing_if = "Option::is_none")]
    pub qt: Option<usize>,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Lt")]
    pub lt: f64,
    pub nx: usize,
    pub nt: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_scale: Option<f64>,
    /// Mixed-partial orders `[rx, rt]` of the sampled field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Where results go. Overridden by `--output-dir`; never echoed.
    #[serde(default, skip_serializing)]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

/// A saved manifest; accepted in place of a config to re-run an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub defaulted: Vec<String>,
    pub seeds: serde_json::Value,
    pub outputs: Vec<String>,
}

/// Input document after parsing: the config and, when it came from a
/// manifest, the defaulted-field list recorded there.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInput {
    pub config: ExperimentConfig,
    pub recorded_defaults: Option<Vec<String>>,
}

fn json_error(e: serde_json::Error) -> CliError {
    CliError::config(e.to_string())
}

/// Strict parse of a config document. Messages carry line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(json_error)
}

/// Parses either a config or a manifest (recognized by its top-level
/// `config` key).
pub fn parse_input(text: &str) -> Result<ParsedInput, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
    if value.get("config").is_some() {
        let m: Manifest = serde_json::from_value(value).map_err(|e| CliError::config(format!("manifest: {e}")))?;
        return Ok(ParsedInput { config: m.config, recorded_defaults: Some(m.defaulted) });
    }
    Ok(ParsedInput { config: parse_config(text)?, recorded_defaults: None })
}

pub fn serialize_config(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

fn missing(field: &str, command: Command) -> CliError {
    CliError::config(format!("missing field `{field}` required by command `{}`", command.name()))
}

fn invalid(field: &str, why: impl std::fmt::Display) -> CliError {
    CliError::config(format!("invalid `{field}`: {why}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be positive and finite")))
    }
}

/// Records `name` in `log` when `slot` was empty, then fills it.
fn default_into<T: Clone>(slot: &mut Option<T>, value: T, name: &str, log: &mut Vec<String>) -> T {
    if slot.is_none() {
        *slot = Some(value);
        log.push(name.to_string());
    }
    slot.clone().expect("just filled")
}

/// Validates `raw` for its command and fills every default. Returns the
/// resolved config and the dotted names of defaulted fields.
///
/// Sections the command does not use are rejected, so a config cannot
/// silently carry settings that have no effect.
pub fn resolve(raw: &ExperimentConfig) -> Result<(ExperimentConfig, Vec<String>), CliError> {
    let mut c = raw.clone();
    let mut log = Vec::new();
    let cmd = c.command;
    let uses = |section: &str| -> bool {
        match section {
            "problem" | "grid" => cmd != Command::PdePriorSample,
            "solver" => !matches!(cmd, Command::PdePriorSample),
            "converge" => cmd == Command::Converge,
            "inference" => cmd == Command::Infer,
            "pde" => cmd == Command::PdePriorSample,
            _ => true,
        }
    };
    for (name, present) in [
        ("problem", c.problem.is_some()),
        ("solver", c.solver.is_some()),
        ("grid", c.grid.is_some()),
        ("converge", c.converge.is_some()),
        ("inference", c.inference.is_some()),
        ("pde", c.pde.is_some()),
    ] {
        if present && !uses(name) {
            return Err(CliError::config(format!("section `{name}` is not used by command `{}`", cmd.name())));
        }
    }

    default_into(&mut c.seed, DEFAULT_SEED, "seed", &mut log);
    let output = c.output.get_or_insert_with(Default::default);
    let formats = default_into(&mut output.formats, vec![Format::Csv, Format::Json], "output.formats", &mut log);
    if formats.is_empty() {
        return Err(invalid("output.formats", "must list at least one of \"csv\", \"json\""));
    }

    if cmd == Command::PdePriorSample {
        let pde = c.pde.as_mut().ok_or_else(|| missing("pde", cmd))?;
        let qx = default_into(&mut pde.qx, DEFAULT_ORDER, "pde.q_x", &mut log);
        let qt = default_into(&mut pde.qt, DEFAULT_ORDER, "pde.q_t", &mut log);
        let scale = default_into(&mut pde.prior_scale, DEFAULT_PRIOR_SCALE, "pde.prior_scale", &mut log);
        let [rx, rt] = default_into(&mut pde.orders, [0, 0], "pde.orders", &mut log);
        let draws = default_into(&mut pde.draws, DEFAULT_SAMPLE_DRAWS, "pde.draws", &mut log);
        if qx < 1 || pde.jx < qx {
            return Err(invalid("pde.Jx", format!("need Jx >= q_x >= 1, got Jx = {}, q_x = {qx}", pde.jx)));
        }
        if qt < 1 || pde.jt < qt {
            return Err(invalid("pde.Jt", format!("need Jt >= q_t >= 1, got Jt = {}, q_t = {qt}", pde.jt)));
        }
        positive("pde.Lx", pde.lx)?;
        positive("pde.Lt", pde.lt)?;
        positive("pde.prior_scale", scale)?;
        if pde.nx < 2 || pde.nt < 2 {
            return Err(invalid("pde.nx/pde.nt", "each axis needs at least 2 points"));
        }
        if rx >= qx || rt >= qt {
            return Err(invalid("pde.orders", format!("derivative orders [{rx}, {rt}] must be below the axis orders [{qx}, {qt}]")));
        }
        if draws == 0 {
            return Err(invalid("pde.draws", "must be at least 1"));
        }
        return Ok((c, log));
    }

    let problem = c.problem.as_mut().ok_or_else(|| missing("problem", cmd))?;
    let name = problem.name;
    let theta = default_into(&mut problem.theta, Vec::new(), "problem.theta", &mut log);
    if theta.len() != name.theta_len() {
        return Err(invalid(
            "problem.theta",
            format!("problem `{}` takes {} parameter(s), got {}", name.as_str(), name.theta_len(), theta.len()),
        ));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(invalid("problem.theta", "values must be finite"));
    }
    if problem.u0.is_empty() || problem.u0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("problem.u0", "needs at least one finite value"));
    }
    positive("problem.L", problem.domain_length)?;

    let grid = c.grid.get_or_insert_with(|| {
        log.push("grid".into());
        GridSection::default()
    });
    let grid_c = default_into(&mut grid.c, DEFAULT_C, "grid.C", &mut log);
    if !(grid_c >= 1.0) || !grid_c.is_finite() {
        return Err(CliError::config(format!("invalid bound: grid.C = {grid_c} must be >= 1")));
    }
    let n = match cmd {
        Command::Converge => {
            if grid.n.is_some() {
                return Err(invalid("grid.N", "command `converge` takes its grid sizes from `converge.Ns`"));
            }
            None
        }
        _ => {
            let n = grid.n.ok_or_else(|| missing("grid.N", cmd))?;
            if n < 2 {
                return Err(invalid("grid.N", format!("{n} must be at least 2")));
            }
            Some(n)
        }
    };

    let solver = c.solver.get_or_insert_with(|| {
        log.push("solver".into());
        SolverSection::default()
    });
    let q = default_into(&mut solver.order, DEFAULT_ORDER, "solver.q", &mut log);
    if q < 2 {
        return Err(invalid("solver.q", format!("{q} must be at least 2")));
    }
    if let Some(n) = n {
        let j = default_into(&mut solver.basis_count, n + q - 1, "solver.J", &mut log);
        if j < q {
            return Err(invalid("solver.J", format!("need J >= q, got J = {j}, q = {q}")));
        }
    } else if solver.basis_count.is_some() {
        return Err(invalid("solver.J", "command `converge` uses J = N + q - 1 for every N"));
    } else {
        log.push("solver.J".into());
    }
    let scale = default_into(&mut solver.prior_scale, DEFAULT_PRIOR_SCALE, "solver.prior_scale", &mut log);
    positive("solver.prior_scale", scale)?;
    default_into(&mut solver.prior_structure, PriorStructure::Integrated, "solver.prior_structure", &mut log);
    let nugget = default_into(&mut solver.nugget, DEFAULT_RELATIVE_NUGGET * scale, "solver.nugget", &mut log);
    if !(nugget >= 0.0) || !nugget.is_finite() {
        return Err(invalid("solver.nugget", format!("{nugget} must be finite and non-negative")));
    }
    let default_mode = if cmd == Command::Converge { Mode::Mean } else { Mode::Sample };
    let mode = default_into(&mut solver.mode, default_mode, "solver.mode", &mut log);
    if cmd == Command::Converge && mode != Mode::Mean {
        return Err(invalid("solver.mode", "command `converge` runs in mean mode"));
    }
    let default_draws = if cmd == Command::PriorSample { DEFAULT_SAMPLE_DRAWS } else { 0 };
    let draws = default_into(&mut solver.draws, default_draws, "solver.draws", &mut log);
    if cmd == Command::PriorSample && draws == 0 {
        return Err(invalid("solver.draws", "command `prior-sample` needs at least 1 draw"));
    }

    let l = c.problem.as_ref().expect("checked").domain_length;
    match cmd {
        Command::Converge => {
            let conv = c.converge.as_ref().ok_or_else(|| missing("converge", cmd))?;
            if conv.ns.len() < 3 || conv.ns.windows(2).any(|w| w[1] <= w[0]) || conv.ns[0] < 2 {
                return Err(invalid("converge.Ns", "need at least 3 strictly increasing grid sizes, each >= 2"));
            }
        }
        Command::Infer => {
            let inf = c.inference.as_mut().ok_or_else(|| missing("inference", cmd))?;
            if inf.theta_grid.is_empty() {
                return Err(invalid("inference.theta_grid", "must be non-empty"));
            }
            if inf.theta_grid.iter().any(|t| t.len() != name.theta_len() || t.iter().any(|v| !v.is_finite())) {
                return Err(invalid(
                    "inference.theta_grid",
                    format!("every entry needs {} finite parameter(s) for problem `{}`", name.theta_len(), name.as_str()),
                ));
            }
            positive("inference.noise_var", inf.noise_var)?;
            let simulate = default_into(&mut inf.simulate, false, "inference.simulate", &mut log);
            match (simulate, &inf.data_path, &inf.obs_times) {
                (true, Some(_), _) => {
                    return Err(invalid("inference.data_path", "cannot be combined with `simulate: true`"));
                }
                (true, None, None) => return Err(missing("inference.obs_times", cmd)),
                (true, None, Some(times)) => {
                    if times.is_empty() || times.iter().any(|t| !(0.0..=l).contains(t)) {
                        return Err(invalid("inference.obs_times", format!("need at least one time, all within [0, {l}]")));
                    }
                }
                (false, None, _) => return Err(missing("inference.data_path", cmd)),
                (false, Some(_), Some(_)) => {
                    return Err(invalid("inference.obs_times", "observation times come from the data file"));
                }
                (false, Some(_), None) => {}
            }
        }
        _ => {}
    }
    Ok((c, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = r#"{"command":"solve","problem":{"name":"linear-decay","theta":[1.0],"u0":[1.0],"L":2.0},"grid":{"N":40}}"#;

    #[test]
    fn defaults_applied_and_recorded() {
        let (c, log) = resolve(&parse_config(SOLVE).unwrap()).unwrap();
        let s = c.solver.as_ref().unwrap();
        assert_eq!(s.order, Some(4));
        assert_eq!(s.mode, Some(Mode::Sample));
        assert_eq!(s.basis_count, Some(43));
        assert_eq!(s.prior_scale, Some(10.0));
        assert_eq!(s.nugget, Some(1e-7));
        assert_eq!(c.grid.as_ref().unwrap().c, Some(1.0));
        for f in ["seed", "solver.q", "solver.mode", "solver.nugget", "grid.C", "solver.J"] {
            assert!(log.iter().any(|l| l == f), "{f} not recorded in {log:?}");
        }
        let (again, log2) = resolve(&c).unwrap();
        assert_eq!(again, c);
        assert!(log2.is_empty());
    }

    #[test]
    fn round_trip() {
        let raw = parse_config(SOLVE).unwrap();
        assert_eq!(parse_config(&serialize_config(&raw)).unwrap(), raw);
        let (resolved, _) = resolve(&raw).unwrap();
        assert_eq!(parse_config(&serialize_config(&resolved)).unwrap(), resolved);
    }

    #[test]
    fn missing_problem_named() {
        let err = resolve(&parse_config(r#"{"command":"solve"}"#).unwrap()).unwrap_err().to_string();
        assert!(err.contains("`problem`") && err.contains("solve"), "{err}");
    }

    #[test]
    fn unknown_key_named() {
        let err = parse_config(r#"{"command":"solve","grid":{"N":4,"bogus":1}}"#).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = parse_config(r#"{"command":"solve","extra":true}"#).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn malformed_json_has_position() {
        let err = parse_config("{\n  \"command\": \"solve\",,\n}").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("column"), "{err}");
    }

    #[test]
    fn bound_below_one_rejected() {
        let text = SOLVE.replace(r#""N":40"#, r#""N":40,"C":0.5"#);
        let err = resolve(&parse_config(&text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("invalid bound"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unused_section_rejected() {
        let text = SOLVE.replace(r#""grid""#, r#""converge":{"Ns":[1,2,3]},"grid""#);
        assert!(resolve(&parse_config(&text).unwrap()).is_err());
    }

    #[test]
    fn manifest_detected() {
        let (c, log) = resolve(&parse_config(SOLVE).unwrap()).unwrap();
        let m = Manifest { version: "x".into(), config: c.clone(), defaulted: log.clone(), seeds: serde_json::json!({}), outputs: vec![] };
        let parsed = parse_input(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(parsed.config, c);
        assert_eq!(parsed.recorded_defaults, Some(log));
    }
}
