use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtControl {
    Fixed(f64),
    /// `dt = cfl · h_min / (a + ε/h_min)`.
    Cfl(f64),
}

impl Default for DtControl {
    fn default() -> Self {
        DtControl::Cfl(0.1)
    }
}

pub fn cfl_dt(cfl: f64, h_min: f64, a: f64, eps: f64) -> f64 {
    cfl * h_min / (a + eps / h_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeOptions {
    #[serde(default)]
    pub dt: DtControl,
    /// Abort when the energy exceeds this multiple of its initial value.
    /// Only meaningful for runs whose data and forcing vanish.
    #[serde(default = "default_blow_up")]
    pub blow_up_factor: f64,
    /// Record the solution error every this many steps (0 = final time only).
    #[serde(default)]
    pub error_every: usize,
}

fn default_blow_up() -> f64 {
    10.0
}

impl Default for TimeOptions {
    fn default() -> Self {
        Self { dt: DtControl::default(), blow_up_factor: default_blow_up(), error_every: 0 }
    }
}

/// Energy at every accepted step. `dissipation` is the `2ε φᵀPφ` rate at the
/// same states (zero without diffusion).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
}

impl EnergyTrace {
    /// Largest single-step growth relative to the initial energy.
    pub fn max_relative_increase(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        let scale = if e0 > 0.0 { e0 } else { 1.0 };
        self.energy.windows(2).map(|w| (w[1] - w[0]) / scale).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest energy relative to the initial one.
    pub fn max_relative_energy(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        let top = self.energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if e0 > 0.0 {
            top / e0
        } else {
            top
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Integration {
    pub state: Vec<f64>,
    pub trace: EnergyTrace,
    pub steps: usize,
    pub dt: f64,
    /// `(t, ‖u − v‖²_P)` where an exact solution was available.
    pub error_history: Vec<(f64, f64)>,
}

/// Classical four-stage Runge–Kutta step in place. `rhs` writes `du/dt` and
/// returns the dissipation rate of its input state; the rate of the stage
/// at `t` is returned.
pub fn rk4_step<F>(rhs: &mut F, t: f64, u: &mut [f64], dt: f64, work: &mut [Vec<f64>; 5]) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<f64>,
{
    let n = u.len();
    let [k1, k2, k3, k4, tmp] = work;
    for v in [&mut *k1, &mut *k2, &mut *k3, &mut *k4, &mut *tmp] {
        v.resize(n, 0.0);
    }
    let rate = rhs(t, u, k1)?;
    for i in 0..n {
        tmp[i] = u[i] + 0.5 * dt * k1[i];
    }
    rhs(t + 0.5 * dt, tmp, k2)?;
    for i in 0..n {
        tmp[i] = u[i] + 0.5 * dt * k2[i];
    }
    rhs(t + 0.5 * dt, tmp, k3)?;
    for i in 0..n {
        tmp[i] = u[i] + dt * k3[i];
    }
    rhs(t + dt, tmp, k4)?;
    for i in 0..n {
        u[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    Ok(rate)
}

/// Integrates from `t_span.0` to `t_span.1` in `ceil(T/dt)` equal steps no
/// longer than `dt`. `observe` sees every accepted state (step 0 included).
/// With `guard_energy`, growth beyond `blow_up_factor` times the initial
/// energy aborts; non-finite energy always does.
#[allow(clippy::too_many_arguments)]
pub fn time_integrate<F, E, O>(
    mut rhs: F,
    energy: E,
    mut observe: O,
    initial: Vec<f64>,
    t_span: (f64, f64),
    dt: f64,
    opts: &TimeOptions,
    guard_energy: bool,
) -> Result<Integration>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<f64>,
    E: Fn(&[f64]) -> f64,
    O: FnMut(usize, f64, &[f64]),
{
    let (t0, t1) = t_span;
    let span = t1 - t0;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if !(span >= 0.0) || !span.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid time span [{t0}, {t1}]")));
    }
    let steps = (span / dt - 1e-12).ceil().max(0.0) as usize;
    let dt = if steps == 0 { dt } else { span / steps as f64 };
    let mut u = initial;
    let mut work: [Vec<f64>; 5] = Default::default();
    let mut trace = EnergyTrace::default();
    let e0 = energy(&u);
    trace.times.push(t0);
    trace.energy.push(e0);
    observe(0, t0, &u);
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        let rate = rk4_step(&mut rhs, t, &mut u, dt, &mut work)?;
        trace.dissipation.push(rate);
        let t_next = if s + 1 == steps { t1 } else { t0 + (s + 1) as f64 * dt };
        let e = energy(&u);
        trace.times.push(t_next);
        trace.energy.push(e);
        if !e.is_finite() || (guard_energy && e > opts.blow_up_factor * e0) {
            return Err(Error::BlowUp { t: t_next, energy: e });
        }
        observe(s + 1, t_next, &u);
    }
    // Rate at the final state, so every recorded state has one.
    let mut scratch = vec![0.0; u.len()];
    trace.dissipation.push(rhs(t1, &u, &mut scratch)?);
    Ok(Integration { state: u, trace, steps, dt, error_history: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_observer(_: usize, _: f64, _: &[f64]) {}

    #[test]
    fn zero_rhs_leaves_state_alone() {
        let out = time_integrate(
            |_, _, du: &mut [f64]| {
                du.fill(0.0);
                Ok(0.0)
            },
            |u: &[f64]| u.iter().map(|v| v * v).sum(),
            no_observer,
            vec![1.0, -2.0, 3.5],
            (0.0, 1.0),
            0.1,
            &TimeOptions::default(),
            true,
        )
        .unwrap();
        assert_eq!(out.state, vec![1.0, -2.0, 3.5]);
        assert_eq!(out.steps, 10);
        assert!(out.trace.energy.iter().all(|e| *e == 17.25));
        assert_eq!(out.trace.times.len(), 11);
        assert_eq!(*out.trace.times.last().unwrap(), 1.0);
    }

    #[test]
    fn exponential_decay_is_fourth_order() {
        let run = |dt: f64| {
            let out = time_integrate(
                |_, u: &[f64], du: &mut [f64]| {
                    du[0] = -u[0];
                    Ok(0.0)
                },
                |u: &[f64]| u[0] * u[0],
                no_observer,
                vec![1.0],
                (0.0, 1.0),
                dt,
                &TimeOptions::default(),
                true,
            )
            .unwrap();
            (out.state[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        // One RK4 step of −u is the degree-4 Taylor polynomial of e^{−dt}.
        let step: f64 = 1.0 - 0.1 + 0.01 / 2.0 - 0.001 / 6.0 + 0.0001 / 24.0;
        assert!((e1 - (step.powi(10) - (-1.0f64).exp()).abs()).abs() < 1e-14);
        assert!(e1 < 4e-6);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn growth_triggers_blow_up() {
        let err = time_integrate(
            |_, u: &[f64], du: &mut [f64]| {
                du[0] = 5.0 * u[0];
                Ok(0.0)
            },
            |u: &[f64]| u[0] * u[0],
            no_observer,
            vec![1.0],
            (0.0, 2.0),
            0.01,
            &TimeOptions::default(),
            true,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn cfl_formula() {
        assert_eq!(cfl_dt(0.1, 0.5, 1.0, 0.0), 0.05);
        assert!((cfl_dt(0.1, 0.1, 1.0, 0.1) - 0.005).abs() < 1e-16);
    }
}
