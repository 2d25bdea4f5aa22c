//! End-to-end construction: family → `(FF)'` → rule → operator, with every
//! failure attributed to the stage that raised it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fsbp::{build_operator, verify_sbp, FsbpOperator, SbpTolerances, SbpVerdict};
use crate::funcspace::{augment_to_even, closed_form_spaces, make_family, product_derivative_space, FunctionSpace, SpaceSpec, TchebyshevReport};
use crate::gauss::{classical_gll, rule_on_nodes, screen, solve_prepared, Prepared, QuadratureRule, SolveOptions};
use crate::integrate::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeMode {
    /// Equally spaced nodes including both endpoints, weights from the moment equations.
    Equispaced,
    /// Generalised Gauss (open).
    Ggq,
    /// Generalised Gauss–Lobatto (closed).
    Gglq,
    /// Classical Gauss–Lobatto–Legendre nodes.
    ClassicalGll,
}

impl fmt::Display for NodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeMode::Equispaced => "equispaced",
            NodeMode::Ggq => "ggq",
            NodeMode::Gglq => "gglq",
            NodeMode::ClassicalGll => "classical-gll",
        };
        f.write_str(s)
    }
}

/// How `F` and `(FF)'` are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisRoute {
    /// The family's own basis; `(FF)'` from sampled product derivatives.
    #[default]
    Sampled,
    /// Divided-difference bases with `(FF)'` in closed form, falling back to
    /// the sampled route for families without one. Needed on short elements.
    ClosedForm,
}

impl fmt::Display for BasisRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisRoute::Sampled => "sampled",
            BasisRoute::ClosedForm => "closed-form",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Family,
    ProductDerivative,
    Augment,
    Orthonormalize,
    Screen,
    Solve,
    Certify,
    Operator,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Family => "family",
            Stage::ProductDerivative => "product-derivative",
            Stage::Augment => "augment",
            Stage::Orthonormalize => "orthonormalize",
            Stage::Screen => "tchebyshev-screen",
            Stage::Solve => "solve",
            Stage::Certify => "certify",
            Stage::Operator => "operator",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

fn at(stage: Stage) -> impl FnOnce(Error) -> StageError {
    move |source| StageError { stage, source }
}

/// Everything produced on the way to a rule.
#[derive(Debug, Clone)]
pub struct RuleOutput {
    pub f: FunctionSpace,
    /// `(FF)'` before augmentation.
    pub g: FunctionSpace,
    /// The space the rule is certified against.
    pub target: FunctionSpace,
    pub rule: QuadratureRule,
    pub screen: Option<TchebyshevReport>,
}

pub fn build_family(spec: &SpaceSpec) -> Result<FunctionSpace, StageError> {
    make_family(spec).map_err(at(Stage::Family))
}

/// `F`, `(FF)'` and, on the closed-form route, the already augmented target.
type Spaces = (FunctionSpace, FunctionSpace, Option<FunctionSpace>);

/// Spaces for a family spec along the requested route.
pub fn spaces_for(spec: &SpaceSpec, route: BasisRoute) -> Result<Spaces, StageError> {
    if route == BasisRoute::ClosedForm {
        if let Some(c) = closed_form_spaces(spec).map_err(at(Stage::Family))? {
            return Ok((c.f, c.g, Some(c.target)));
        }
    }
    let f = build_family(spec)?;
    let g = product_derivative_space(&f).map_err(at(Stage::ProductDerivative))?;
    Ok((f, g, None))
}

/// Rule for `F` in the requested node mode. `nodes` overrides the node count
/// for the equispaced and classical modes (defaults: `dim (FF)'` and `dim F`).
pub fn rule_for(f: &FunctionSpace, mode: NodeMode, nodes: Option<usize>, opts: &SolveOptions) -> Result<RuleOutput, StageError> {
    let g = product_derivative_space(f).map_err(at(Stage::ProductDerivative))?;
    rule_with(f, g, None, mode, nodes, opts)
}

/// As [`rule_for`], starting from a family spec.
pub fn rule_for_spec(spec: &SpaceSpec, route: BasisRoute, mode: NodeMode, nodes: Option<usize>, opts: &SolveOptions) -> Result<RuleOutput, StageError> {
    let (f, g, target) = spaces_for(spec, route)?;
    rule_with(&f, g, target, mode, nodes, opts)
}

fn rule_with(
    f: &FunctionSpace,
    g: FunctionSpace,
    target: Option<FunctionSpace>,
    mode: NodeMode,
    nodes: Option<usize>,
    opts: &SolveOptions,
) -> Result<RuleOutput, StageError> {
    let weight = Weight::Unit;
    let (a, b) = f.interval();
    match mode {
        NodeMode::Ggq | NodeMode::Gglq => {
            let target = match target {
                Some(t) => t,
                None => augment_to_even(&g).map_err(at(Stage::Augment))?,
            };
            let prepared = Prepared::new(&target, &weight, &opts.integration).map_err(at(Stage::Orthonormalize))?;
            let report = screen(&prepared, opts).map_err(at(Stage::Screen))?;
            let rule = solve_prepared(&prepared, &weight, mode == NodeMode::Gglq, opts, report.clone()).map_err(|e| match e {
                Error::InconsistentRule(_) => StageError { stage: Stage::Certify, source: e },
                e => StageError { stage: Stage::Solve, source: e },
            })?;
            Ok(RuleOutput { f: f.clone(), g, target, rule, screen: report })
        }
        NodeMode::Equispaced => {
            let m = nodes.unwrap_or(g.dim());
            if m < 2 {
                return Err(StageError { stage: Stage::Solve, source: Error::InvalidParameter("equispaced rules need at least two nodes".into()) });
            }
            let x: Vec<f64> = (0..m).map(|i| if i == m - 1 { b } else { a + (b - a) * i as f64 / (m - 1) as f64 }).collect();
            let rule = rule_on_nodes(&g, &weight, &x, opts).map_err(at(Stage::Solve))?;
            Ok(RuleOutput { f: f.clone(), target: g.clone(), g, rule, screen: None })
        }
        NodeMode::ClassicalGll => {
            let m = nodes.unwrap_or(f.dim());
            if m < 2 {
                return Err(StageError { stage: Stage::Solve, source: Error::InvalidParameter("Lobatto rules need at least two nodes".into()) });
            }
            let rule = classical_gll(&g, m - 1, &weight, opts).map_err(at(Stage::Solve))?;
            if !rule.certificate.is_valid() {
                return Err(StageError { stage: Stage::Certify, source: Error::InconsistentRule(rule.certificate.max_abs_error) });
            }
            Ok(RuleOutput { f: f.clone(), target: g.clone(), g, rule, screen: None })
        }
    }
}

/// Rule, operator and verdict for `F`.
pub fn operator_for(
    f: &FunctionSpace,
    mode: NodeMode,
    nodes: Option<usize>,
    opts: &SolveOptions,
    sbp: &SbpTolerances,
) -> Result<(RuleOutput, FsbpOperator, SbpVerdict), StageError> {
    finish_operator(rule_for(f, mode, nodes, opts)?, sbp)
}

/// As [`operator_for`], starting from a family spec.
pub fn operator_for_spec(
    spec: &SpaceSpec,
    route: BasisRoute,
    mode: NodeMode,
    nodes: Option<usize>,
    opts: &SolveOptions,
    sbp: &SbpTolerances,
) -> Result<(RuleOutput, FsbpOperator, SbpVerdict), StageError> {
    finish_operator(rule_for_spec(spec, route, mode, nodes, opts)?, sbp)
}

fn finish_operator(out: RuleOutput, sbp: &SbpTolerances) -> Result<(RuleOutput, FsbpOperator, SbpVerdict), StageError> {
    let op = build_operator(&out.f, &out.rule).map_err(at(Stage::Operator))?;
    let verdict = verify_sbp(&op, &out.f, sbp);
    Ok((out, op, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::FamilySpec;

    #[test]
    fn quadratic_gll_operator() {
        let f = build_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 2 }, -1.0, 1.0)).unwrap();
        let (out, op, v) = operator_for(&f, NodeMode::Gglq, None, &SolveOptions::default(), &SbpTolerances::default()).unwrap();
        assert_eq!(out.rule.nodes.len(), 3);
        assert!(v.pass, "{v:?}");
        assert!((op.p[1] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stage_attribution() {
        let f = build_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 0 }, -1.0, 1.0)).unwrap();
        let err = rule_for(&f, NodeMode::Gglq, None, &SolveOptions::default()).unwrap_err();
        assert_eq!(err.stage, Stage::ProductDerivative);
    }
}
