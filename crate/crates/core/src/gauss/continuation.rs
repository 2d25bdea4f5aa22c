use serde::{Deserialize, Serialize};

use super::newton::{newton_iterate, NewtonOptions, NewtonOutcome};
use super::Prepared;
use crate::error::{Error, Result};
use crate::funcspace::FunctionSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub growth: f64,
    /// A Newton solve using at most this many iterations counts as fast.
    pub fast_iterations: usize,
    /// Residual tolerance for intermediate measures (`t < 1`).
    pub intermediate_tol: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { initial_step: 0.1, min_step: 1e-6, growth: 1.5, fast_iterations: 3, intermediate_tol: 1e-8 }
    }
}

/// Homotopy state for the blended measure `t ω + (1 - t) Σ_j m δ(x - c_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationState {
    pub t: f64,
    pub anchors: Vec<f64>,
    pub current_nodes: Vec<f64>,
    pub step: f64,
    pub history: Vec<(f64, Vec<f64>)>,
}

/// Record of one continuation run (one rule size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub size: usize,
    pub closed: bool,
    pub t_schedule: Vec<f64>,
    pub iterations: Vec<usize>,
    pub rejected_steps: usize,
}

/// Moments of the blended measure.
pub(crate) fn blended_moments(g: &FunctionSpace, moments: &[f64], t: f64, anchors: &[f64], mass: f64) -> Vec<f64> {
    let mut out: Vec<f64> = moments.iter().map(|m| t * m).collect();
    let mut vals = vec![0.0; g.dim()];
    for &c in anchors {
        g.values_into(c, &mut vals);
        for (o, v) in out.iter_mut().zip(&vals) {
            *o += (1.0 - t) * mass * v;
        }
    }
    out
}

/// Midpoints of the cells cut out of `[a, b]` by `interior`.
pub(crate) fn interlaced(a: f64, b: f64, interior: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(interior.len() + 2);
    pts.push(a);
    pts.extend_from_slice(interior);
    pts.push(b);
    pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Carries the rule for the anchor measure (`t = 0`) to the target measure.
pub(crate) fn homotopy(
    g: &FunctionSpace,
    moments: &[f64],
    total_mass: f64,
    anchors: Vec<f64>,
    closed: bool,
    newton: &NewtonOptions,
    opts: &ContinuationOptions,
) -> Result<(ContinuationState, StageTrace)> {
    let (a, b) = g.interval();
    let nodes = if closed {
        let mut v = vec![a];
        v.extend_from_slice(&anchors);
        v.push(b);
        v
    } else {
        anchors.clone()
    };
    let mass = if anchors.is_empty() { 0.0 } else { total_mass / anchors.len() as f64 };
    let mut state = ContinuationState { t: 0.0, anchors, current_nodes: nodes.clone(), step: opts.initial_step, history: vec![(0.0, nodes)] };
    let mut trace = StageTrace { size: state.current_nodes.len(), closed, t_schedule: vec![], iterations: vec![], rejected_steps: 0 };
    let intermediate = NewtonOptions { residual_tol: newton.residual_tol.max(opts.intermediate_tol), ..newton.clone() };
    let mut fast_streak = 0;
    while state.t < 1.0 {
        let t_try = (state.t + state.step).min(1.0);
        let mu = blended_moments(g, moments, t_try, &state.anchors, mass);
        let nopts = if t_try < 1.0 { &intermediate } else { newton };
        match newton_iterate(g, &mu, &state.current_nodes, closed, nopts) {
            Ok(NewtonOutcome { nodes, iterations, .. }) => {
                state.t = t_try;
                state.current_nodes = nodes.clone();
                state.history.push((t_try, nodes));
                trace.t_schedule.push(t_try);
                trace.iterations.push(iterations);
                if iterations <= opts.fast_iterations {
                    fast_streak += 1;
                    if fast_streak >= 2 {
                        state.step *= opts.growth;
                        fast_streak = 0;
                    }
                } else {
                    fast_streak = 0;
                }
            }
            Err(_) => {
                trace.rejected_steps += 1;
                fast_streak = 0;
                state.step *= 0.5;
                if state.step < opts.min_step {
                    return Err(Error::HomotopyStall { t: state.t, step: state.step });
                }
            }
        }
    }
    Ok((state, trace))
}

/// Open rule by continuation over sizes `k = 1..=n`, each size using the first
/// `2k` functions of the (orthonormal, reference) target space.
pub(crate) fn open_by_continuation(p: &Prepared, newton: &NewtonOptions, opts: &ContinuationOptions, stages: &mut Vec<StageTrace>) -> Result<Vec<f64>> {
    let n = p.reference.dim() / 2;
    let (a, b) = p.reference.interval();
    let mut prev: Vec<f64> = Vec::new();
    for k in 1..=n {
        let sub = p.reference.leading(2 * k)?;
        let anchors = interlaced(a, b, &prev);
        let (state, trace) = homotopy(&sub, &p.moments[..2 * k], p.total_mass, anchors, false, newton, opts)?;
        stages.push(trace);
        prev = state.current_nodes;
    }
    Ok(prev)
}

/// Closed rule by continuation over sizes `k = 1..=n` with the endpoints held
/// fixed and only interior nodes driven by the homotopy.
pub(crate) fn closed_by_continuation(p: &Prepared, newton: &NewtonOptions, opts: &ContinuationOptions, stages: &mut Vec<StageTrace>) -> Result<Vec<f64>> {
    let n = p.reference.dim() / 2;
    let (a, b) = p.reference.interval();
    let mut interior: Vec<f64> = Vec::new();
    for k in 1..=n {
        let sub = p.reference.leading(2 * k)?;
        let anchors = if k == 1 { vec![] } else { interlaced(a, b, &interior) };
        if anchors.is_empty() {
            // Two endpoint nodes, nothing to move.
            stages.push(StageTrace { size: 2, closed: true, t_schedule: vec![1.0], iterations: vec![0], rejected_steps: 0 });
            continue;
        }
        let (state, trace) = homotopy(&sub, &p.moments[..2 * k], p.total_mass, anchors, true, newton, opts)?;
        stages.push(trace);
        let nodes = state.current_nodes;
        interior = nodes[1..nodes.len() - 1].to_vec();
    }
    let mut nodes = vec![a];
    nodes.extend(interior);
    nodes.push(b);
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interlacing_midpoints() {
        assert_eq!(interlaced(-1.0, 1.0, &[]), vec![0.0]);
        assert_eq!(interlaced(-1.0, 1.0, &[0.0]), vec![-0.5, 0.5]);
    }
}
