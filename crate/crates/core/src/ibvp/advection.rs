use serde::{Deserialize, Serialize};

use super::{MmsCase, MultiElementGrid};
use crate::error::{Error, Result};

/// Penalties for `u_t + a u_x = 0`. At every interface the left element is
/// penalised with `sigma_l` and the right one with `sigma_r`; the inflow
/// boundary with `tau_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvectionSats {
    pub sigma_l: f64,
    pub sigma_r: f64,
    pub tau_l: f64,
}

impl AdvectionSats {
    /// `tau_l = −a`, `sigma_r = sigma_l − a`.
    pub fn new(a: f64, sigma_l: f64) -> Self {
        Self { sigma_l, sigma_r: sigma_l - a, tau_l: -a }
    }

    /// `sigma_l = 0`.
    pub fn standard(a: f64) -> Self {
        Self::new(a, 0.0)
    }

    pub fn validate(&self, a: f64) -> Result<()> {
        let tol = 1e-12 * a.abs().max(1.0);
        if (self.tau_l + a).abs() > tol {
            return Err(Error::InvalidParameter(format!("tau_l must equal -a = {}, got {}", -a, self.tau_l)));
        }
        if (self.sigma_r - (self.sigma_l - a)).abs() > tol {
            return Err(Error::InvalidParameter("sigma_r must equal sigma_l - a".into()));
        }
        if self.sigma_l > 0.5 * a + tol {
            return Err(Error::InvalidParameter(format!("sigma_l = {} exceeds a/2; the interface would add energy", self.sigma_l)));
        }
        Ok(())
    }
}

/// `du/dt` for all elements: `−a D u` plus interface, inflow and forcing terms.
pub fn advection_rhs(u: &[f64], grid: &MultiElementGrid, a: f64, sats: &AdvectionSats, case: &MmsCase, t: f64, out: &mut [f64]) -> Result<()> {
    grid.check_state(u)?;
    if out.len() != u.len() {
        return Err(Error::DimensionMismatch("output length differs from state".into()));
    }
    let last = grid.len() - 1;
    for (e, el) in grid.elements().iter().enumerate() {
        let r = grid.range(e);
        let n = el.len();
        let (ue, oe) = (&u[r.clone()], &mut out[r.clone()]);
        el.apply_d(ue, -a, oe);
        for (k, o) in oe.iter_mut().enumerate() {
            *o += (case.forcing)(el.op.nodes[k], t);
        }
        if e == 0 {
            oe[0] += sats.tau_l * el.p_inv[0] * (ue[0] - (case.left)(t));
        } else {
            let neighbour = u[r.start - 1];
            oe[0] += sats.sigma_r * el.p_inv[0] * (ue[0] - neighbour);
        }
        if e < last {
            let neighbour = u[r.end];
            oe[n - 1] += sats.sigma_l * el.p_inv[n - 1] * (ue[n - 1] - neighbour);
        }
    }
    Ok(())
}

/// `(2 Σ uᵀP du/dt, analytic rate)` for homogeneous forcing, where the
/// analytic rate is `a g² − a(u₀ − g)² − a u_end² + Σ (2σ_L − a) [u]²` over interfaces.
pub fn advection_energy_rate(u: &[f64], grid: &MultiElementGrid, a: f64, sats: &AdvectionSats, case: &MmsCase, t: f64) -> Result<(f64, f64)> {
    let mut du = vec![0.0; u.len()];
    advection_rhs(u, grid, a, sats, case, t, &mut du)?;
    let mut discrete = 0.0;
    for (e, el) in grid.elements().iter().enumerate() {
        let r = grid.range(e);
        discrete += 2.0 * el.op.p.iter().zip(&u[r.clone()]).zip(&du[r]).map(|((w, x), y)| w * x * y).sum::<f64>();
    }
    let g = (case.left)(t);
    let u0 = u[0];
    let uend = u[u.len() - 1];
    let mut analytic = a * g * g - a * (u0 - g).powi(2) - a * uend * uend;
    for e in 0..grid.len() - 1 {
        let jump = u[grid.range(e).end - 1] - u[grid.range(e + 1).start];
        analytic += (2.0 * sats.sigma_l - a) * jump * jump;
    }
    Ok((discrete, analytic))
}
