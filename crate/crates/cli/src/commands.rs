use std::fs;
use std::path::Path;

use fsbp_core::config::Config;
use fsbp_core::fixtures::{self, PublishedTable};
use fsbp_core::fsbp::{build_operator, verify_sbp, FsbpOperator, SbpTolerances, SbpVerdict};
use fsbp_core::gauss::{ingest_rule, QuadratureRule};
use fsbp_core::ibvp::{convergence_study, solve as run_solve, MultiElementGrid, OperatorSource};
use fsbp_core::integrate::Weight;
use fsbp_core::pipeline::{operator_for_spec, rule_for_spec, spaces_for, BasisRoute, NodeMode, Stage, StageError};
use fsbp_core::{Error, SpaceSpec};
use serde::{Deserialize, Serialize};

use crate::output::{num, Run, Seeds};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io,
    Validation,
    Solver,
    Verification,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Io => 1,
            Kind::Validation => 2,
            Kind::Solver => 3,
            Kind::Verification => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

fn fail(kind: Kind, message: impl Into<String>) -> Failure {
    Failure { kind, message: message.into() }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        fail(Kind::Io, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::UnsupportedFamily(_)
            | Error::DegenerateInterval { .. }
            | Error::FeatureDisabled(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidNodes(_)
            | Error::InvalidParameter(_)
            | Error::Json(_) => Kind::Validation,
            Error::InconsistentRule(_) => Kind::Verification,
            Error::Io(_) => Kind::Io,
            _ => Kind::Solver,
        };
        fail(kind, e.to_string())
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        let kind = match e.stage {
            Stage::Family | Stage::ProductDerivative => Kind::Validation,
            Stage::Certify => Kind::Verification,
            _ => Kind::Solver,
        };
        fail(kind, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

pub fn parse_mode(s: &str) -> Result<NodeMode, Failure> {
    match s {
        "open" | "ggq" => Ok(NodeMode::Ggq),
        "closed" | "gglq" => Ok(NodeMode::Gglq),
        "equispaced" => Ok(NodeMode::Equispaced),
        "classical-gll" => Ok(NodeMode::ClassicalGll),
        other => Err(fail(Kind::Validation, format!("unknown mode `{other}` (expected open, closed, ggq, gglq, equispaced or classical-gll)"))),
    }
}

/// Reads the config, applies command-line overrides and opens the run.
fn start(common: &Common, command: &str) -> Result<(Config, Run), Failure> {
    let mut run = Run::new(&common.out, command)?;
    let mut cfg = match &common.config {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| fail(Kind::Io, format!("cannot read {}: {e}", path.display())))?;
            run.input(path, &bytes);
            let text = String::from_utf8(bytes).map_err(|e| fail(Kind::Validation, format!("{}: {e}", path.display())))?;
            toml::from_str::<Config>(&text).map_err(|e| fail(Kind::Validation, format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    if let Some(m) = &common.mode {
        cfg.rule.mode = parse_mode(m)?;
    }
    if common.force_tchebyshev {
        cfg.solver.force_tchebyshev = true;
    }
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok((cfg, run))
}

fn finish(run: Run, cfg: &Config) -> Outcome {
    let value = serde_json::to_value(cfg.resolved()).map_err(|e| fail(Kind::Io, e.to_string()))?;
    run.finish(value, Seeds { solver: cfg.solver.seed, sbp: cfg.sbp.seed })?;
    Ok(())
}

/// A rule with what it was computed for.
#[derive(Debug, Serialize, Deserialize)]
pub struct RuleFile {
    pub space: SpaceSpec,
    pub mode: NodeMode,
    pub route: BasisRoute,
    pub f_dim: usize,
    pub g_dim: usize,
    pub target_dim: usize,
    pub target_fingerprint: String,
    pub rule: QuadratureRule,
}

fn rule_csv(run: &mut Run, rule: &QuadratureRule) -> std::io::Result<()> {
    run.csv("rule.csv", &["node", "weight"], rule.nodes.iter().zip(&rule.weights).map(|(x, w)| vec![num(*x), num(*w)]))?;
    Ok(())
}

pub fn rule(common: &Common) -> Outcome {
    let (cfg, mut run) = start(common, "rule")?;
    let spec = cfg.space()?.clone();
    let out = rule_for_spec(&spec, cfg.rule.route, cfg.rule.mode, cfg.rule.nodes, &cfg.solver)?;
    let file = RuleFile {
        space: spec,
        mode: cfg.rule.mode,
        route: cfg.rule.route,
        f_dim: out.f.dim(),
        g_dim: out.g.dim(),
        target_dim: out.target.dim(),
        target_fingerprint: out.target.fingerprint(),
        rule: out.rule,
    };
    run.json("rule.json", &file)?;
    rule_csv(&mut run, &file.rule)?;
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OperatorFile {
    pub space: SpaceSpec,
    pub operator: FsbpOperator,
    pub verdict: SbpVerdict,
    pub tolerances: SbpTolerances,
}

fn matrix_csv(run: &mut Run, name: &str, op: &FsbpOperator) -> std::io::Result<()> {
    let n = op.len();
    let header: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.csv(name, &header, (0..n).map(|i| (0..n).map(|j| num(op.d[(i, j)])).collect()))?;
    Ok(())
}

fn operator_outputs(run: &mut Run, space: &SpaceSpec, op: FsbpOperator, verdict: SbpVerdict, tol: SbpTolerances) -> Result<bool, Failure> {
    matrix_csv(run, "d.csv", &op)?;
    run.csv("norm.csv", &["node", "weight"], op.nodes.iter().zip(&op.p).map(|(x, w)| vec![num(*x), num(*w)]))?;
    let pass = verdict.pass;
    run.json("operator.json", &OperatorFile { space: space.clone(), operator: op, verdict, tolerances: tol })?;
    Ok(pass)
}

fn verdict_failure(v: &SbpVerdict) -> Failure {
    fail(
        Kind::Verification,
        format!(
            "operator fails verification: exactness {:e}, Q+Q^T-B {:e}, min weight {:e}, IBP {:e}",
            v.max_exactness_error, v.max_skew_defect, v.min_weight, v.max_ibp_defect
        ),
    )
}

pub fn operator(common: &Common, rule_path: Option<&Path>) -> Outcome {
    let (cfg, mut run) = start(common, "operator")?;
    let (spec, op, verdict) = match rule_path {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| fail(Kind::Io, format!("cannot read {}: {e}", path.display())))?;
            run.input(path, &bytes);
            let file: RuleFile = serde_json::from_slice(&bytes).map_err(|e| fail(Kind::Validation, format!("{}: {e}", path.display())))?;
            let (f, g, target) = spaces_for(&file.space, file.route)?;
            let g = target.unwrap_or(g);
            let rule = ingest_rule(&g, &Weight::Unit, file.rule.nodes, file.rule.weights, &cfg.solver)?;
            let op = build_operator(&f, &rule)?;
            let verdict = verify_sbp(&op, &f, &cfg.sbp);
            (file.space, op, verdict)
        }
        None => {
            let spec = cfg.space()?.clone();
            let (_, op, verdict) = operator_for_spec(&spec, cfg.rule.route, cfg.rule.mode, cfg.rule.nodes, &cfg.solver, &cfg.sbp)?;
            (spec, op, verdict)
        }
    };
    let failure = (!verdict.pass).then(|| verdict_failure(&verdict));
    operator_outputs(&mut run, &spec, op, verdict, cfg.sbp)?;
    finish(run, &cfg)?;
    failure.map_or(Ok(()), Err)
}

pub fn verify(common: &Common, operator_path: Option<&Path>, fixture: Option<&str>) -> Outcome {
    let (mut cfg, mut run) = start(common, "verify")?;
    let (op, spec) = match (operator_path, fixture) {
        (Some(path), _) => {
            let bytes = fs::read(path).map_err(|e| fail(Kind::Io, format!("cannot read {}: {e}", path.display())))?;
            run.input(path, &bytes);
            let file: OperatorFile = serde_json::from_slice(&bytes).map_err(|e| fail(Kind::Validation, format!("{}: {e}", path.display())))?;
            (file.operator, cfg.space.clone().unwrap_or(file.space))
        }
        (None, Some(name)) => {
            let table = find_fixture(name)?;
            let op = table.operator().ok_or_else(|| fail(Kind::Validation, format!("published table `{name}` has no differentiation matrix")))??;
            if common.config.is_none() {
                // Printed digits bound how well the identities can hold.
                cfg.sbp = SbpTolerances::ingested();
                run.note("tolerances for printed tables (no config given)");
            }
            (op, cfg.space.clone().unwrap_or(table.space))
        }
        (None, None) => return Err(fail(Kind::Validation, "verify needs --operator or --fixture")),
    };
    let (f, _, _) = spaces_for(&spec, cfg.rule.route)?;
    let verdict = verify_sbp(&op, &f, &cfg.sbp);
    let failure = (!verdict.pass).then(|| verdict_failure(&verdict));
    run.json("verdict.json", &verdict)?;
    finish(run, &cfg)?;
    failure.map_or(Ok(()), Err)
}

fn find_fixture(name: &str) -> Result<PublishedTable, Failure> {
    fixtures::all().into_iter().find(|t| t.name == name).ok_or_else(|| {
        let names: Vec<String> = fixtures::all().into_iter().map(|t| t.name).collect();
        fail(Kind::Validation, format!("unknown fixture `{name}` (known: {})", names.join(", ")))
    })
}

#[derive(Serialize)]
struct SolveSummary {
    elements: usize,
    nodes_per_element: usize,
    n_total: usize,
    steps: usize,
    dt: f64,
    error_sq: Option<f64>,
    error: Option<f64>,
    initial_energy: f64,
    final_energy: f64,
    max_relative_energy_increase: f64,
}

pub fn solve(common: &Common) -> Outcome {
    let (cfg, mut run) = start(common, "solve")?;
    let pc = cfg.problem()?;
    let problem = pc.problem()?;
    let source: &OperatorSource = pc.operator.as_ref().ok_or_else(|| fail(Kind::Validation, "[problem.operator] is required for solve"))?;
    let elements = pc.elements.ok_or_else(|| fail(Kind::Validation, "problem.elements is required for solve"))?;
    if elements == 0 {
        return Err(fail(Kind::Validation, "problem.elements must be positive"));
    }
    let (a, b) = pc.domain;
    let h = (b - a) / elements as f64;
    let reference = source.element_operator(a, a + h, &cfg.solver, &cfg.sbp)?;
    let grid = MultiElementGrid::uniform(&reference, elements, pc.domain)?;
    let out = run_solve(&grid, &problem, &pc.time)?;
    let t = pc.final_time;
    let exact = (!problem.case.zero_data).then(|| grid.sample(|x| (problem.case.exact)(x, t)));
    let err = out.error_history.last().map(|e| e.1);
    run.csv(
        "energy.csv",
        &["t", "energy", "dissipation"],
        out.trace.times.iter().zip(&out.trace.energy).zip(&out.trace.dissipation).map(|((t, e), d)| vec![num(*t), num(*e), num(*d)]),
    )?;
    let nodes = grid.global_nodes();
    run.csv(
        "solution.csv",
        &["x", "u", "exact"],
        nodes.iter().enumerate().map(|(i, x)| vec![num(*x), num(out.state[i]), exact.as_ref().map_or(String::new(), |v| num(v[i]))]),
    )?;
    if !out.error_history.is_empty() {
        run.csv("error.csv", &["t", "error_sq"], out.error_history.iter().map(|(t, e)| vec![num(*t), num(*e)]))?;
    }
    let summary = SolveSummary {
        elements,
        nodes_per_element: reference.len(),
        n_total: grid.total_nodes(),
        steps: out.steps,
        dt: out.dt,
        error_sq: err,
        error: err.map(f64::sqrt),
        initial_energy: out.trace.energy[0],
        final_energy: *out.trace.energy.last().unwrap(),
        max_relative_energy_increase: out.trace.max_relative_increase(),
    };
    run.json("summary.json", &summary)?;
    finish(run, &cfg)
}

pub fn converge(common: &Common) -> Outcome {
    let (cfg, mut run) = start(common, "converge")?;
    let problem = cfg.problem()?.problem()?;
    let (opts, sources) = cfg.study_options()?;
    if sources.iter().any(|s| s.mode == NodeMode::ClassicalGll) {
        run.note("polynomial baselines use element-wise Gauss-Lobatto-Legendre operators, not classical finite-difference SBP operators");
    }
    let rows = convergence_study(&problem, &sources, &opts)?;
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        run.note(format!("{failed} of {} runs failed; see the status column", rows.len()));
    }
    run.csv(
        "convergence.csv",
        &["label", "elements", "nodes_per_element", "n_total", "error_sq", "error", "order", "steps", "status"],
        rows.iter().map(|r| {
            vec![
                r.label.clone(),
                r.elements.to_string(),
                r.nodes_per_element.to_string(),
                r.n_total.to_string(),
                num(r.error_sq),
                num(r.error),
                r.order.map_or(String::new(), num),
                r.steps.to_string(),
                r.status.clone(),
            ]
        }),
    )?;
    run.json("convergence.json", &rows)?;
    finish(run, &cfg)
}

#[derive(Serialize)]
struct Comparison {
    table: String,
    status: String,
    max_node_diff: Option<f64>,
    max_weight_diff: Option<f64>,
    max_d_diff: Option<f64>,
    /// Against `−J D J` (`J` the exchange matrix), the operator of the
    /// mirrored grid.
    max_d_diff_mirrored: Option<f64>,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn compare(table: &PublishedTable, cfg: &Config) -> Comparison {
    let mut c =
        Comparison { table: table.name.clone(), status: "ok".into(), max_node_diff: None, max_weight_diff: None, max_d_diff: None, max_d_diff_mirrored: None };
    let (mode, nodes) = match table.name.as_str() {
        "exp-gglq-4" | "bessel-gglq-25" => (NodeMode::Gglq, None),
        "exp-equispaced-5" => (NodeMode::Equispaced, Some(table.nodes.len())),
        _ => {
            c.status = "no computed counterpart".into();
            return c;
        }
    };
    match operator_for_spec(&table.space, BasisRoute::Sampled, mode, nodes, &cfg.solver, &cfg.sbp) {
        Ok((out, op, _)) if out.rule.nodes.len() == table.nodes.len() => {
            c.max_node_diff = Some(max_diff(&out.rule.nodes, &table.nodes));
            c.max_weight_diff = Some(max_diff(&out.rule.weights, &table.weights));
            if let Some(d) = &table.d {
                let n = d.len();
                let direct = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (op.d[(i, j)] - d[i][j]).abs()).fold(0.0, f64::max);
                let mirrored =
                    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (-op.d[(n - 1 - i, n - 1 - j)] - d[i][j]).abs()).fold(0.0, f64::max);
                c.max_d_diff = Some(direct);
                c.max_d_diff_mirrored = Some(mirrored);
            }
        }
        Ok((out, _, _)) => c.status = format!("computed rule has {} nodes, table has {}", out.rule.nodes.len(), table.nodes.len()),
        Err(e) => c.status = e.to_string(),
    }
    c
}

pub fn fixtures(common: &Common) -> Outcome {
    let (cfg, mut run) = start(common, "fixtures")?;
    let mut comparisons = Vec::new();
    for table in fixtures::all() {
        run.json(&format!("{}.json", table.name), &table)?;
        comparisons.push(compare(&table, &cfg));
    }
    let opt = |x: Option<f64>| x.map_or(String::new(), num);
    run.csv(
        "comparison.csv",
        &["table", "status", "max_node_diff", "max_weight_diff", "max_d_diff", "max_d_diff_mirrored"],
        comparisons
            .iter()
            .map(|c| vec![c.table.clone(), c.status.clone(), opt(c.max_node_diff), opt(c.max_weight_diff), opt(c.max_d_diff), opt(c.max_d_diff_mirrored)]),
    )?;
    finish(run, &cfg)
}
