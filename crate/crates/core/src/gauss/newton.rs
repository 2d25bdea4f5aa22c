use serde::{Deserialize, Serialize};

use super::hermite::{derivative_nodes, solve_system};
use crate::error::{Error, Result};
use crate::funcspace::FunctionSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    pub residual_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    pub max_condition: f64,
    pub max_halvings: u32,
    /// A damped step must keep every gap above this fraction of its old size.
    pub ordering_margin: f64,
    /// Full steps taken once the residual is below tolerance before accepting
    /// a roundoff-limited step size.
    pub polish_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-11, step_tol: 1e-13, max_iterations: 100, max_condition: 1e14, max_halvings: 10, ordering_margin: 1e-3, polish_iterations: 3 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gaps of the node list, bracketed by the interval ends for open rules.
fn gaps(nodes: &[f64], closed: bool, (a, b): (f64, f64)) -> Vec<f64> {
    if closed {
        nodes.windows(2).map(|w| w[1] - w[0]).collect()
    } else {
        let mut pts = Vec::with_capacity(nodes.len() + 2);
        pts.push(a);
        pts.extend_from_slice(nodes);
        pts.push(b);
        pts.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Damped quasi-Newton iteration `x_k ← x_k + λ ∫σ_k ω / ∫η_k ω` for a target
/// space whose moments (against the current measure) are `moments`.
pub(crate) fn newton_iterate(g: &FunctionSpace, moments: &[f64], x0: &[f64], closed: bool, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    let interval = g.interval();
    let free = derivative_nodes(x0.len(), closed);
    let mut x = x0.to_vec();
    let mut sys = solve_system(g, &x, closed, moments, opts.max_condition)?;
    let mut res = max_abs(&sys.sigma);
    let mut polish = 0;

    for iter in 1..=opts.max_iterations {
        let step: Vec<f64> = free.clone().zip(&sys.sigma).map(|(k, s)| s / sys.weights[k]).collect();
        let step_size = max_abs(&step);
        let converged = res <= opts.residual_tol;
        if converged && step_size <= opts.step_tol {
            return Ok(NewtonOutcome { nodes: x, weights: sys.weights, iterations: iter - 1, residual: res });
        }
        if converged {
            polish += 1;
            if polish > opts.polish_iterations {
                return Ok(NewtonOutcome { nodes: x, weights: sys.weights, iterations: iter - 1, residual: res });
            }
        }
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(step_size));
        }

        let old_gaps = gaps(&x, closed, interval);
        let mut lambda = 1.0;
        let mut ordered_once = false;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = x.clone();
            for (k, s) in free.clone().zip(&step) {
                trial[k] += lambda * s;
            }
            let new_gaps = gaps(&trial, closed, interval);
            let ordered = new_gaps.iter().zip(&old_gaps).all(|(n, o)| *n > opts.ordering_margin * o);
            if ordered {
                ordered_once = true;
                if let Ok(s) = solve_system(g, &trial, closed, moments, opts.max_condition) {
                    let r = max_abs(&s.sigma);
                    if r <= res || converged {
                        accepted = Some((trial, s, r));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, s, r)) => {
                x = trial;
                sys = s;
                res = r;
            }
            None if converged => {
                return Ok(NewtonOutcome { nodes: x, weights: sys.weights, iterations: iter - 1, residual: res });
            }
            None if !ordered_once => return Err(Error::OrderingViolated),
            None => return Err(Error::MaxIterations { iterations: iter, residual: res }),
        }
    }
    if res <= opts.residual_tol {
        return Ok(NewtonOutcome { nodes: x, weights: sys.weights, iterations: opts.max_iterations, residual: res });
    }
    Err(Error::MaxIterations { iterations: opts.max_iterations, residual: res })
}
