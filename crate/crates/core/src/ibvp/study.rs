use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{final_error, solve, Problem};
use super::time::TimeOptions;
use super::MultiElementGrid;
use crate::error::{Error, Result};
use crate::fsbp::{scale_to_element, FsbpOperator, SbpTolerances};
use crate::funcspace::SpaceSpec;
use crate::gauss::SolveOptions;
use crate::pipeline::{operator_for_spec, spaces_for, BasisRoute, NodeMode};

/// Where the element operator's space lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinates {
    /// Built on `[0, h]` in the physical variable and translated, so each
    /// element carries the family itself (`sin(πx)` stays `sin(πx)`).
    #[default]
    Physical,
    /// Built once on the requested interval and mapped affinely, which
    /// rescales frequencies and rates with the element length.
    Reference,
}

/// One curve of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSource {
    pub label: String,
    pub spec: SpaceSpec,
    pub mode: NodeMode,
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default = "closed_form")]
    pub route: BasisRoute,
    #[serde(default)]
    pub coordinates: Coordinates,
}

fn closed_form() -> BasisRoute {
    BasisRoute::ClosedForm
}

impl OperatorSource {
    pub fn new(label: impl Into<String>, spec: SpaceSpec, mode: NodeMode) -> Self {
        Self { label: label.into(), spec, mode, nodes: None, route: BasisRoute::ClosedForm, coordinates: Coordinates::Physical }
    }

    /// Nodes per element, read off the space dimensions.
    pub fn nodes_per_element(&self) -> Result<usize> {
        let (f, g, target) = spaces_for(&self.spec, self.route).map_err(|e| e.source)?;
        let even = target.map(|t| t.dim()).unwrap_or(g.dim() + g.dim() % 2);
        Ok(match self.mode {
            NodeMode::Equispaced => self.nodes.unwrap_or(g.dim()),
            NodeMode::ClassicalGll => self.nodes.unwrap_or(f.dim()),
            NodeMode::Ggq => even / 2,
            NodeMode::Gglq => even / 2 + 1,
        })
    }

    /// The operator for element `[lo, hi]`, checked against `sbp`.
    pub fn element_operator(&self, lo: f64, hi: f64, solve: &SolveOptions, sbp: &SbpTolerances) -> Result<FsbpOperator> {
        let build = |spec: &SpaceSpec| {
            let (_, op, verdict) =
                operator_for_spec(spec, self.route, self.mode, self.nodes, solve, sbp).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            if !verdict.pass {
                return Err(Error::InvalidParameter(format!(
                    "operator fails verification (exactness {:e}, skew {:e}, min weight {:e}, IBP {:e})",
                    verdict.max_exactness_error, verdict.max_skew_defect, verdict.min_weight, verdict.max_ibp_defect
                )));
            }
            Ok(op)
        };
        match self.coordinates {
            Coordinates::Physical => {
                let local = SpaceSpec { interval: [0.0, hi - lo], ..self.spec.clone() };
                scale_to_element(&build(&local)?, lo, hi)
            }
            Coordinates::Reference => scale_to_element(&build(&self.spec)?, lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    /// Total node counts (interface nodes counted twice) to compare at.
    pub n_totals: Vec<usize>,
    #[serde(default)]
    pub time: TimeOptions,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub sbp: SbpTolerances,
    #[serde(default = "unit_domain")]
    pub domain: (f64, f64),
}

fn unit_domain() -> (f64, f64) {
    (0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub label: String,
    pub elements: usize,
    pub nodes_per_element: usize,
    pub n_total: usize,
    pub error_sq: f64,
    pub error: f64,
    /// Observed order against the previous successful row of the same label.
    pub order: Option<f64>,
    pub steps: usize,
    /// `"ok"` or the reason the run failed.
    pub status: String,
}

impl ConvergenceRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

fn run_one(problem: &Problem, source: &OperatorSource, npe: usize, n_total: usize, opts: &StudyOptions) -> ConvergenceRow {
    let mut row = ConvergenceRow {
        label: source.label.clone(),
        elements: 0,
        nodes_per_element: npe,
        n_total,
        error_sq: f64::NAN,
        error: f64::NAN,
        order: None,
        steps: 0,
        status: "ok".into(),
    };
    if npe == 0 || !n_total.is_multiple_of(npe) {
        row.status = format!("{n_total} nodes is not a multiple of {npe} per element");
        return row;
    }
    row.elements = n_total / npe;
    let attempt = || -> Result<(f64, f64, usize)> {
        let (a, b) = opts.domain;
        let h = (b - a) / row.elements as f64;
        let reference = source.element_operator(a, a + h, &opts.solve, &opts.sbp)?;
        let grid = MultiElementGrid::uniform(&reference, row.elements, opts.domain)?;
        let run = solve(&grid, problem, &opts.time)?;
        let (sq, root) = final_error(&grid, problem, &run)?;
        Ok((sq, root, run.steps))
    };
    match attempt() {
        Ok((sq, root, steps)) => {
            row.error_sq = sq;
            row.error = root;
            row.steps = steps;
        }
        Err(e) => row.status = e.to_string(),
    }
    row
}

/// Solves `problem` for every source at every total node count, in
/// parallel. Rows come back grouped by source in input order; failed runs
/// are reported in their row.
pub fn convergence_study(problem: &Problem, sources: &[OperatorSource], opts: &StudyOptions) -> Result<Vec<ConvergenceRow>> {
    problem.validate()?;
    let per_element = sources.iter().map(|s| s.nodes_per_element()).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..sources.len()).flat_map(|s| opts.n_totals.iter().map(move |&n| (s, n))).collect();
    let mut rows: Vec<ConvergenceRow> = jobs.par_iter().map(|&(s, n)| run_one(problem, &sources[s], per_element[s], n, opts)).collect();
    observed_orders(&mut rows);
    Ok(rows)
}

/// Fills `order = −log(e₂/e₁)/log(N₂/N₁)` between consecutive successful
/// rows of each label.
pub fn observed_orders(rows: &mut [ConvergenceRow]) {
    let mut last: Vec<(String, usize, f64)> = Vec::new();
    for row in rows.iter_mut() {
        row.order = None;
        if !row.ok() {
            continue;
        }
        match last.iter_mut().find(|(l, _, _)| *l == row.label) {
            Some(prev) => {
                if prev.1 != row.n_total && prev.2 > 0.0 && row.error > 0.0 {
                    row.order = Some(-(row.error / prev.2).ln() / (row.n_total as f64 / prev.1 as f64).ln());
                }
                *prev = (row.label.clone(), row.n_total, row.error);
            }
            None => last.push((row.label.clone(), row.n_total, row.error)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::FamilySpec;
    use crate::ibvp::{AdvectionSats, MmsCase, PdeParams, Scheme};

    fn row(label: &str, n: usize, e: f64) -> ConvergenceRow {
        ConvergenceRow {
            label: label.into(),
            elements: n,
            nodes_per_element: 1,
            n_total: n,
            error_sq: e * e,
            error: e,
            order: None,
            steps: 1,
            status: "ok".into(),
        }
    }

    #[test]
    fn orders_from_halving() {
        let mut rows = vec![row("a", 10, 1.0), row("a", 20, 1.0 / 16.0), row("b", 10, 1.0), row("a", 40, 1.0 / 256.0)];
        rows[2].status = "failed".into();
        observed_orders(&mut rows);
        assert_eq!(rows[0].order, None);
        assert!((rows[1].order.unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(rows[2].order, None);
        assert!((rows[3].order.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn node_counts_follow_dimensions() {
        let trig = SpaceSpec::new(FamilySpec::Trigonometric { harmonics: 2, frequency: std::f64::consts::PI }, 0.0, 1.0);
        assert_eq!(OperatorSource::new("t", trig.clone(), NodeMode::Gglq).nodes_per_element().unwrap(), 5);
        assert_eq!(OperatorSource::new("t", trig, NodeMode::Equispaced).nodes_per_element().unwrap(), 8);
        let poly = SpaceSpec::new(FamilySpec::Monomial { degree: 3 }, 0.0, 1.0);
        assert_eq!(OperatorSource::new("p", poly.clone(), NodeMode::ClassicalGll).nodes_per_element().unwrap(), 4);
        assert_eq!(OperatorSource::new("p", poly, NodeMode::Ggq).nodes_per_element().unwrap(), 3);
    }

    #[test]
    fn gll_order_near_design() {
        let a = 1.0;
        let problem = Problem {
            params: PdeParams { a, eps: 0.0, final_time: 0.25 },
            scheme: Scheme::Advection(AdvectionSats::standard(a)),
            case: MmsCase::advection_wave(a),
        };
        let poly = SpaceSpec::new(FamilySpec::Monomial { degree: 3 }, 0.0, 1.0);
        let sources = [OperatorSource::new("poly", poly, NodeMode::ClassicalGll)];
        let opts = StudyOptions {
            n_totals: vec![32, 64, 128],
            time: TimeOptions::default(),
            solve: SolveOptions::default(),
            sbp: SbpTolerances::default(),
            domain: (0.0, 1.0),
        };
        let rows = convergence_study(&problem, &sources, &opts).unwrap();
        assert!(rows.iter().all(|r| r.ok()), "{rows:?}");
        let order = rows[2].order.unwrap();
        assert!((order - 4.0).abs() <= 0.5, "{rows:?}");
    }

    #[test]
    fn bad_node_count_is_recorded() {
        let a = 1.0;
        let problem = Problem {
            params: PdeParams { a, eps: 0.0, final_time: 0.1 },
            scheme: Scheme::Advection(AdvectionSats::standard(a)),
            case: MmsCase::advection_wave(a),
        };
        let poly = SpaceSpec::new(FamilySpec::Monomial { degree: 3 }, 0.0, 1.0);
        let opts = StudyOptions {
            n_totals: vec![10],
            time: TimeOptions::default(),
            solve: SolveOptions::default(),
            sbp: SbpTolerances::default(),
            domain: (0.0, 1.0),
        };
        let rows = convergence_study(&problem, &[OperatorSource::new("poly", poly, NodeMode::ClassicalGll)], &opts).unwrap();
        assert!(!rows[0].ok());
    }
}
