use serde::{Deserialize, Serialize};

use super::time::{cfl_dt, time_integrate, DtControl, Integration, TimeOptions};
use super::{advdiff_rhs, advection_rhs, solution_error, AdvDiffSats, AdvectionSats, MmsCase, MultiElementGrid, PdeParams};
use crate::error::Result;

/// The scheme and its penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pde", rename_all = "kebab-case")]
pub enum Scheme {
    Advection(AdvectionSats),
    AdvectionDiffusion(AdvDiffSats),
}

impl Scheme {
    pub fn diffusive(&self) -> bool {
        matches!(self, Scheme::AdvectionDiffusion(_))
    }
}

/// Everything but the grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: PdeParams,
    pub scheme: Scheme,
    pub case: MmsCase,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.params.validate(self.scheme.diffusive())?;
        match &self.scheme {
            Scheme::Advection(s) => s.validate(self.params.a),
            Scheme::AdvectionDiffusion(s) => s.validate(self.params.a, self.params.eps),
        }
    }

    /// Writes `du/dt` and returns the dissipation rate `2ε φᵀPφ`.
    pub fn rhs(&self, grid: &MultiElementGrid, t: f64, u: &[f64], out: &mut [f64]) -> Result<f64> {
        let p = &self.params;
        match &self.scheme {
            Scheme::Advection(s) => {
                advection_rhs(u, grid, p.a, s, &self.case, t, out)?;
                Ok(0.0)
            }
            Scheme::AdvectionDiffusion(s) => {
                let phi = advdiff_rhs(u, grid, p.a, p.eps, s, &self.case, t, out)?;
                Ok(2.0 * p.eps * grid.energy(&phi))
            }
        }
    }

    pub fn dt(&self, grid: &MultiElementGrid, control: DtControl) -> f64 {
        let eps = if self.scheme.diffusive() { self.params.eps } else { 0.0 };
        match control {
            DtControl::Fixed(dt) => dt,
            DtControl::Cfl(cfl) => cfl_dt(cfl, grid.h_min(), self.params.a, eps),
        }
    }
}

/// Runs the problem to its final time. The error against the exact
/// solution is recorded at the final time and every `error_every` steps
/// (skipped for zero-data runs, which have no exact solution).
pub fn solve(grid: &MultiElementGrid, problem: &Problem, opts: &TimeOptions) -> Result<Integration> {
    problem.validate()?;
    let dt = problem.dt(grid, opts.dt);
    let u0 = grid.sample(|x| (problem.case.initial)(x));
    let track = !problem.case.zero_data;
    let mut history = Vec::new();
    let exact = &problem.case.exact;
    let every = opts.error_every;
    let mut out = time_integrate(
        |t, u, du| problem.rhs(grid, t, u, du),
        |u| grid.energy(u),
        |step, t, u| {
            if track && every > 0 && step % every == 0 {
                if let Ok((sq, _)) = solution_error(u, grid, |x| exact(x, t)) {
                    history.push((t, sq));
                }
            }
        },
        u0,
        (0.0, problem.params.final_time),
        dt,
        opts,
        problem.case.zero_data,
    )?;
    if track {
        let t = problem.params.final_time;
        let (sq, _) = solution_error(&out.state, grid, |x| exact(x, t))?;
        if history.last().map(|h: &(f64, f64)| h.0) != Some(t) {
            history.push((t, sq));
        }
    }
    out.error_history = history;
    Ok(out)
}

/// Final-time `(‖u − v‖²_P, ‖u − v‖_P)`.
pub fn final_error(grid: &MultiElementGrid, problem: &Problem, run: &Integration) -> Result<(f64, f64)> {
    let t = problem.params.final_time;
    solution_error(&run.state, grid, |x| (problem.case.exact)(x, t))
}
