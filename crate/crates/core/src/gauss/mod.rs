//! Generalised Gauss and Gauss–Lobatto rules.
//!
//! All iterations run on an orthonormal basis of the target space mapped to
//! `[-1, 1]`; nodes and weights are mapped back to the user interval at the end.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{orthonormalize, tchebyshev_screen, FunctionSpace, TchebyshevReport, Verdict};
use crate::integrate::{integrate, moments, Tolerances, Weight};
use crate::legendre::gauss_legendre;

mod continuation;
mod elimination;
mod hermite;
mod newton;

pub use continuation::{ContinuationOptions, ContinuationState, StageTrace};
pub use hermite::{hermite_lagrange, hermite_vandermonde, HermiteLagrangeBasis};
pub use newton::NewtonOptions;

use continuation::{closed_by_continuation, open_by_continuation};
use elimination::eliminate;
use newton::newton_iterate;

/// Certificate scale: `tol = certificate_tol * max(1, max |moment|)`.
pub const DEFAULT_CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactnessCertificate {
    pub target_dim: usize,
    pub max_abs_error: f64,
    pub per_function_errors: Vec<f64>,
    pub tol: f64,
}

impl ExactnessCertificate {
    pub fn is_valid(&self) -> bool {
        self.max_abs_error <= self.tol
    }
}

/// How a rule was obtained, for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub route: String,
    pub stages: Vec<StageTrace>,
    pub final_iterations: usize,
    pub final_residual: f64,
    /// Residual tolerance actually used: the requested one, raised to the
    /// rounding floor of the orthonormal basis when that is larger.
    #[serde(default)]
    pub residual_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tchebyshev: Option<TchebyshevReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub closed: bool,
    pub interval: (f64, f64),
    pub certificate: ExactnessCertificate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<SolveTrace>,
}

impl QuadratureRule {
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub newton: NewtonOptions,
    pub continuation: ContinuationOptions,
    pub integration: Tolerances,
    pub certificate_tol: f64,
    pub force_tchebyshev: bool,
    pub screen_trials: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            continuation: ContinuationOptions::default(),
            integration: Tolerances::default(),
            certificate_tol: DEFAULT_CERTIFICATE_TOL,
            force_tchebyshev: false,
            screen_trials: 200,
            seed: 0,
        }
    }
}

/// A target space prepared for iteration: orthonormal basis on [-1, 1] with
/// its moments against the mapped weight.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub user: FunctionSpace,
    pub reference: FunctionSpace,
    pub moments: Vec<f64>,
    pub total_mass: f64,
    /// Rounding error expected when evaluating the orthonormal basis:
    /// `eps * max_i max_x Σ_j |c_ij g_j(x)|`.
    pub noise: f64,
    mid: f64,
    half: f64,
}

impl Prepared {
    pub fn new(g: &FunctionSpace, weight: &Weight, tol: &Tolerances) -> Result<Self> {
        let (a, b) = g.interval();
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let reference = orthonormalize(&g.to_reference()?)?;
        if reference.dim() != g.dim() {
            return Err(Error::RankDeficient(format!("target space has numerical dimension {} but {} basis functions", reference.dim(), g.dim())));
        }
        let ref_weight = weight.mapped(mid, half);
        // Moments of the mapped basis are well scaled; the orthonormal
        // moments follow exactly from the combination coefficients.
        let mapped = g.to_reference()?;
        let raw = moments(&mapped, &ref_weight, tol)?;
        let coeffs = reference.combination_coeffs().expect("orthonormal spaces are combinations");
        let mu = (coeffs * nalgebra::DVector::from_vec(raw)).data.as_vec().clone();
        let total = integrate(|s| ref_weight.at(s), -1.0, 1.0, tol)?;
        if !total.converged {
            return Err(Error::IntegrationFailed { error_estimate: total.error_estimate, subdivisions: total.subdivisions });
        }
        let noise = cancellation_noise(&mapped, coeffs);
        Ok(Self { user: g.clone(), reference, moments: mu, total_mass: total.value, noise, mid, half })
    }

    /// Newton options with the residual tolerance raised to the noise floor.
    pub fn newton_options(&self, opts: &NewtonOptions) -> NewtonOptions {
        NewtonOptions { residual_tol: opts.residual_tol.max(NOISE_FACTOR * self.noise), ..opts.clone() }
    }

    pub fn to_reference(&self, x: f64) -> f64 {
        (x - self.mid) / self.half
    }

    pub fn to_user(&self, s: f64) -> f64 {
        if s == -1.0 {
            self.user.interval().0
        } else if s == 1.0 {
            self.user.interval().1
        } else {
            self.mid + self.half * s
        }
    }

    fn finish(&self, nodes: &[f64], weights: &[f64], closed: bool, weight: &Weight, opts: &SolveOptions, trace: SolveTrace) -> Result<QuadratureRule> {
        for (x, w) in nodes.iter().zip(weights) {
            if !(*w > 0.0) {
                return Err(Error::NonPositiveWeight { node: self.to_user(*x), weight: *w * self.half });
            }
        }
        let mut rule = QuadratureRule {
            nodes: nodes.iter().map(|s| self.to_user(*s)).collect(),
            weights: weights.iter().map(|w| w * self.half).collect(),
            closed,
            interval: self.user.interval(),
            certificate: ExactnessCertificate { target_dim: 0, max_abs_error: 0.0, per_function_errors: vec![], tol: 0.0 },
            trace: Some(trace),
        };
        rule.certificate = verify_exactness(&rule, &self.user, weight, &opts.integration, opts.certificate_tol)?;
        if !rule.certificate.is_valid() {
            return Err(Error::InconsistentRule(rule.certificate.max_abs_error));
        }
        Ok(rule)
    }
}

/// Multiple of the basis rounding noise accepted as a converged residual.
const NOISE_FACTOR: f64 = 100.0;

fn cancellation_noise(mapped: &FunctionSpace, coeffs: &DMatrix<f64>) -> f64 {
    let points = (4 * mapped.dim()).max(64);
    let (x, _) = gauss_legendre(points);
    let mut vals = vec![0.0; mapped.dim()];
    let mut worst: f64 = 0.0;
    for xk in x {
        mapped.values_into(xk, &mut vals);
        for i in 0..coeffs.nrows() {
            let sum: f64 = (0..coeffs.ncols()).map(|j| (coeffs[(i, j)] * vals[j]).abs()).sum();
            worst = worst.max(sum);
        }
    }
    f64::EPSILON * worst
}

fn check_even(g: &FunctionSpace) -> Result<()> {
    if !g.dim().is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!("target space must have even dimension, got {}", g.dim())));
    }
    Ok(())
}

/// Newton iteration from a caller-supplied initial guess (user coordinates).
pub fn newton_solve(g: &FunctionSpace, weight: &Weight, x0: &[f64], closed: bool, opts: &SolveOptions) -> Result<QuadratureRule> {
    check_even(g)?;
    let p = Prepared::new(g, weight, &opts.integration)?;
    let s0: Vec<f64> = x0.iter().map(|x| p.to_reference(*x)).collect();
    let mut s0 = s0;
    if closed && !s0.is_empty() {
        // Endpoints are fixed exactly.
        s0[0] = -1.0;
        let last = s0.len() - 1;
        s0[last] = 1.0;
    }
    let newton = p.newton_options(&opts.newton);
    let out = newton_iterate(&p.reference, &p.moments, &s0, closed, &newton)?;
    let trace = SolveTrace {
        route: "newton".into(),
        stages: vec![],
        final_iterations: out.iterations,
        final_residual: out.residual,
        residual_tol: newton.residual_tol,
        tchebyshev: None,
    };
    p.finish(&out.nodes, &out.weights, closed, weight, opts, trace)
}

/// Tchebyshev screen on the prepared (orthonormal, reference) target space.
pub fn screen(p: &Prepared, opts: &SolveOptions) -> Result<Option<TchebyshevReport>> {
    if opts.screen_trials == 0 {
        return Ok(None);
    }
    let report = tchebyshev_screen(&p.reference, opts.screen_trials, opts.seed);
    if report.verdict == Verdict::Fail && !opts.force_tchebyshev {
        return Err(Error::TchebyshevFail(report.min_abs_det));
    }
    Ok(Some(report))
}

/// Generalised Gauss (open) or Gauss–Lobatto (closed) rule for an
/// even-dimensional target space, found by measure continuation.
pub fn continuation_solve(g: &FunctionSpace, weight: &Weight, closed: bool, opts: &SolveOptions) -> Result<QuadratureRule> {
    check_even(g)?;
    let p = Prepared::new(g, weight, &opts.integration)?;
    let report = screen(&p, opts)?;
    solve_prepared(&p, weight, closed, opts, report)
}

/// Tries measure continuation first. When it stalls or ends on an unusable
/// rule, node elimination is tried; it does not need every leading subspace
/// to behave like a Tchebyshev system. If both fail the continuation error is
/// returned.
pub fn solve_prepared(p: &Prepared, weight: &Weight, closed: bool, opts: &SolveOptions, report: Option<TchebyshevReport>) -> Result<QuadratureRule> {
    let newton = p.newton_options(&opts.newton);
    let mut stages = Vec::new();
    let first = match by_continuation(p, closed, &newton, &opts.continuation, &mut stages) {
        Ok((out, route)) => {
            let trace = SolveTrace {
                route: route.into(),
                stages: stages.clone(),
                final_iterations: out.iterations,
                final_residual: out.residual,
                residual_tol: newton.residual_tol,
                tchebyshev: report.clone(),
            };
            match p.finish(&out.nodes, &out.weights, closed, weight, opts, trace) {
                Ok(rule) => return Ok(rule),
                Err(e) => e,
            }
        }
        Err(e) => e,
    };
    let el = eliminate(p, weight, closed, newton.residual_tol).map_err(|_| first)?;
    // Polish on the Hermite formulation; keep the elimination rule if that
    // wanders off.
    let (nodes, weights, iterations, residual) = match newton_iterate(&p.reference, &p.moments, &el.nodes, closed, &newton) {
        Ok(out) if out.weights.iter().all(|w| *w > 0.0) => (out.nodes, out.weights, el.iterations + out.iterations, out.residual),
        _ => (el.nodes, el.weights, el.iterations, el.residual),
    };
    let trace = SolveTrace {
        route: format!("node-elimination ({} removals)", el.removals),
        stages,
        final_iterations: iterations,
        final_residual: residual,
        residual_tol: newton.residual_tol,
        tchebyshev: report,
    };
    p.finish(&nodes, &weights, closed, weight, opts, trace)
}

fn by_continuation(
    p: &Prepared,
    closed: bool,
    newton: &NewtonOptions,
    opts: &ContinuationOptions,
    stages: &mut Vec<StageTrace>,
) -> Result<(newton::NewtonOutcome, &'static str)> {
    let open = open_by_continuation(p, newton, opts, stages)?;
    if !closed {
        return Ok((newton_iterate(&p.reference, &p.moments, &open, false, newton)?, "open-continuation"));
    }

    // Lobatto interior nodes interlace the Gauss nodes: start from the
    // midpoints between consecutive open nodes.
    let mut x0 = vec![-1.0];
    x0.extend(open.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    x0.push(1.0);
    let direct = newton_iterate(&p.reference, &p.moments, &x0, true, newton).and_then(|out| {
        if out.weights.iter().all(|w| *w > 0.0) {
            Ok(out)
        } else {
            Err(Error::NonPositiveWeight { node: f64::NAN, weight: out.weights.iter().cloned().fold(f64::INFINITY, f64::min) })
        }
    });
    match direct {
        Ok(out) => Ok((out, "open-continuation+closed-newton")),
        Err(_) => {
            let nodes = closed_by_continuation(p, newton, opts, stages)?;
            Ok((newton_iterate(&p.reference, &p.moments, &nodes, true, newton)?, "open-continuation+closed-continuation"))
        }
    }
}

/// Point-mass part of a blended measure `t ω + (1 - t) Σ_j mass δ(x - c_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blend {
    pub t: f64,
    pub anchors: Vec<f64>,
    pub mass: f64,
}

/// `(∫σ_i ω, ∫η_i ω)` for a Hermite–Lagrange basis of `g`; point masses of a
/// blended measure are evaluated exactly.
pub fn residuals_and_weights(
    basis: &HermiteLagrangeBasis,
    g: &FunctionSpace,
    weight: &Weight,
    blend: Option<&Blend>,
    tol: &Tolerances,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mu = moments(g, weight, tol)?;
    let mu = match blend {
        Some(bl) => continuation::blended_moments(g, &mu, bl.t, &bl.anchors, bl.mass),
        None => mu,
    };
    Ok(basis.integrals(&mu))
}

/// Per-function errors `|∫gω - Σ w_k g(x_k)|` over the basis of `g`.
pub fn verify_exactness(rule: &QuadratureRule, g: &FunctionSpace, weight: &Weight, tol: &Tolerances, certificate_tol: f64) -> Result<ExactnessCertificate> {
    let (a, b) = g.interval();
    let slack = 1e-12 * (b - a);
    if rule.nodes.iter().any(|x| *x < a - slack || *x > b + slack) {
        return Err(Error::InvalidNodes("rule nodes outside the space's interval".into()));
    }
    let mu = moments(g, weight, tol)?;
    let mut sums = vec![0.0; g.dim()];
    let mut vals = vec![0.0; g.dim()];
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        g.values_into(*x, &mut vals);
        for (s, v) in sums.iter_mut().zip(&vals) {
            *s += w * v;
        }
    }
    let errors: Vec<f64> = mu.iter().zip(&sums).map(|(m, s)| (m - s).abs()).collect();
    let scale = mu.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(ExactnessCertificate {
        target_dim: g.dim(),
        max_abs_error: errors.iter().cloned().fold(0.0, f64::max),
        per_function_errors: errors,
        tol: certificate_tol * scale,
    })
}

/// Weights on prescribed nodes: the minimum-norm solution of the moment
/// equations `Σ_k w_k g_j(x_k) = ∫g_j ω`. Fails if a weight is not positive or
/// the equations cannot be met.
pub fn rule_on_nodes(g: &FunctionSpace, weight: &Weight, nodes: &[f64], opts: &SolveOptions) -> Result<QuadratureRule> {
    let (a, b) = g.interval();
    if nodes.len() < 2 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidNodes("prescribed nodes must be strictly increasing".into()));
    }
    let p = Prepared::new(g, weight, &opts.integration)?;
    let s: Vec<f64> = nodes.iter().map(|x| p.to_reference(*x)).collect();
    let (vals, _) = p.reference.collocation(&s);
    let vt: DMatrix<f64> = vals.transpose();
    let w = vt.clone().svd(true, true).solve(&DVector::from_column_slice(&p.moments), 1e-13).map_err(|e| Error::RankDeficient(e.into()))?;
    let closed = (nodes[0] - a).abs() <= 1e-14 * (b - a) && (nodes[nodes.len() - 1] - b).abs() <= 1e-14 * (b - a);
    let residual = (&vt * &w - DVector::from_column_slice(&p.moments)).amax();
    let trace =
        SolveTrace { route: "prescribed-nodes".into(), stages: vec![], final_iterations: 0, final_residual: residual, residual_tol: 0.0, tchebyshev: None };
    let mut rule = p.finish(&s, w.as_slice(), closed, weight, opts, trace)?;
    // Keep the caller's node values bit-for-bit.
    rule.nodes = nodes.to_vec();
    Ok(rule)
}

/// Rule from published nodes and weights, certified against `g`.
pub fn ingest_rule(g: &FunctionSpace, weight: &Weight, nodes: Vec<f64>, weights: Vec<f64>, opts: &SolveOptions) -> Result<QuadratureRule> {
    if nodes.len() != weights.len() || nodes.is_empty() {
        return Err(Error::DimensionMismatch("nodes and weights differ in length".into()));
    }
    let (a, b) = g.interval();
    let closed = nodes[0] == a && nodes[nodes.len() - 1] == b;
    let mut rule = QuadratureRule {
        nodes,
        weights,
        closed,
        interval: (a, b),
        certificate: ExactnessCertificate { target_dim: 0, max_abs_error: 0.0, per_function_errors: vec![], tol: 0.0 },
        trace: None,
    };
    rule.certificate = verify_exactness(&rule, g, weight, &opts.integration, opts.certificate_tol)?;
    Ok(rule)
}

/// Classical Gauss–Lobatto–Legendre rule with `degree + 1` nodes on `[a, b]`.
pub fn classical_gll(g: &FunctionSpace, degree: usize, weight: &Weight, opts: &SolveOptions) -> Result<QuadratureRule> {
    let (a, b) = g.interval();
    let (s, w) = crate::legendre::gauss_lobatto(degree);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut nodes: Vec<f64> = s.iter().map(|s| mid + half * s).collect();
    nodes[0] = a;
    nodes[degree] = b;
    ingest_rule(g, weight, nodes, w.iter().map(|w| w * half).collect(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{make_family, FamilySpec, SpaceSpec};

    fn monomials(d: usize, a: f64, b: f64) -> FunctionSpace {
        make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: d }, a, b)).unwrap()
    }

    #[test]
    fn trapezoid_certificate() {
        let g = monomials(2, 0.0, 1.0);
        let opts = SolveOptions::default();
        let rule = ingest_rule(&g, &Weight::Unit, vec![0.0, 1.0], vec![0.5, 0.5], &opts).unwrap();
        let c = &rule.certificate;
        assert!(c.per_function_errors[0] < 1e-15 && c.per_function_errors[1] < 1e-15);
        assert!((c.per_function_errors[2] - 1.0 / 6.0).abs() < 1e-12);
        assert!(!c.is_valid());
    }

    #[test]
    fn newton_solve_midpoint() {
        let g = monomials(1, 2.0, 5.0);
        let rule = newton_solve(&g, &Weight::Unit, &[2.2], false, &SolveOptions::default()).unwrap();
        assert!((rule.nodes[0] - 3.5).abs() < 1e-13 && (rule.weights[0] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn lobatto_by_continuation() {
        let g = monomials(5, -1.0, 1.0);
        let rule = continuation_solve(&g, &Weight::Unit, true, &SolveOptions::default()).unwrap();
        let c = 1.0 / 5f64.sqrt();
        let want = [-1.0, -c, c, 1.0];
        for (x, y) in rule.nodes.iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
        for (w, y) in rule.weights.iter().zip([1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0]) {
            assert!((w - y).abs() < 1e-12);
        }
    }

    #[test]
    fn blended_measure_at_zero_is_point_masses() {
        let g = monomials(1, 0.0, 1.0);
        let hl = hermite_lagrange(&g, &[0.25], false, 1e14).unwrap();
        let blend = Blend { t: 0.0, anchors: vec![0.25], mass: 1.0 };
        let (s, e) = residuals_and_weights(&hl, &g, &Weight::Unit, Some(&blend), &Tolerances::default()).unwrap();
        assert!(s[0].abs() < 1e-15 && (e[0] - 1.0).abs() < 1e-15);
        let (s, _) = residuals_and_weights(&hl, &g, &Weight::Unit, None, &Tolerances::default()).unwrap();
        assert!((s[0] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn odd_space_rejected() {
        let g = monomials(2, -1.0, 1.0);
        assert!(matches!(continuation_solve(&g, &Weight::Unit, false, &SolveOptions::default()), Err(Error::DimensionMismatch(_))));
    }
}
