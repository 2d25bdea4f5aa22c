use serde::{Deserialize, Serialize};

use super::{MmsCase, MultiElementGrid};
use crate::error::{Error, Result};

/// Penalties for the LDG form `u_t + a u_x − ε φ_x = 0`, `ε φ = ε u_x`.
/// `sigma1`/`sigma2` act on the `u` equation (jumps in `u` and `φ`),
/// `sigma3`/`sigma4` on the auxiliary equation; `_l` is the left element of
/// an interface and `_r` the right one. `tau_l` weights the Robin condition
/// at `x = 0`, `tau_r` the Neumann condition at the right end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvDiffSats {
    pub sigma1_l: f64,
    pub sigma2_l: f64,
    pub sigma3_l: f64,
    pub sigma4_l: f64,
    pub sigma1_r: f64,
    pub sigma2_r: f64,
    pub sigma3_r: f64,
    pub sigma4_r: f64,
    pub tau_l: f64,
    pub tau_r: f64,
}

impl AdvDiffSats {
    /// Completes the free choices `sigma1_l`, `sigma3_l`, `sigma4_l` with
    /// `σ1R = σ1L − a`, `σ2L = −ε − σ3L`, `σ2R = ε + σ2L`, `σ3R = ε + σ3L`,
    /// `σ4R = σ4L` and `τL = τR = −1`.
    pub fn new(a: f64, eps: f64, sigma1_l: f64, sigma3_l: f64, sigma4_l: f64) -> Self {
        let sigma2_l = -eps - sigma3_l;
        Self {
            sigma1_l,
            sigma2_l,
            sigma3_l,
            sigma4_l,
            sigma1_r: sigma1_l - a,
            sigma2_r: eps + sigma2_l,
            sigma3_r: eps + sigma3_l,
            sigma4_r: sigma4_l,
            tau_l: -1.0,
            tau_r: -1.0,
        }
    }

    /// `σ1L = 0`, `σ4L = −ε/2`, and `σ3L = −ε/2` so that `σ2L = σ4L`.
    pub fn standard(a: f64, eps: f64) -> Self {
        Self::new(a, eps, 0.0, -0.5 * eps, -0.5 * eps)
    }

    pub fn validate(&self, a: f64, eps: f64) -> Result<()> {
        let tol = 1e-12 * a.abs().max(eps.abs()).max(1.0);
        let checks = [
            ("sigma1_r = sigma1_l - a", self.sigma1_r - (self.sigma1_l - a)),
            ("sigma2_r = eps + sigma2_l", self.sigma2_r - (eps + self.sigma2_l)),
            ("sigma2_l = -eps - sigma3_l", self.sigma2_l - (-eps - self.sigma3_l)),
            ("sigma3_r = eps + sigma3_l", self.sigma3_r - (eps + self.sigma3_l)),
            ("sigma4_r = sigma4_l", self.sigma4_r - self.sigma4_l),
            ("tau_l = -1", self.tau_l + 1.0),
            ("tau_r = -1", self.tau_r + 1.0),
        ];
        for (name, defect) in checks {
            if defect.abs() > tol {
                return Err(Error::InvalidParameter(format!("penalty relation {name} violated by {defect:e}")));
            }
        }
        Ok(())
    }
}

/// Pivot below which an interface's auxiliary system counts as singular.
const SINGULAR_PIVOT: f64 = 1e-14;

/// The auxiliary variable `φ` from `ε φ = ε D u + SATs`.
///
/// `P` is diagonal, so the penalties only touch face nodes: away from faces
/// `φ = D u`, and each interface couples just its two face values through a
/// 2×2 system.
pub fn auxiliary(u: &[f64], grid: &MultiElementGrid, eps: f64, sats: &AdvDiffSats) -> Result<Vec<f64>> {
    grid.check_state(u)?;
    let mut phi = vec![0.0; u.len()];
    for (e, el) in grid.elements().iter().enumerate() {
        let r = grid.range(e);
        el.apply_d(&u[r.clone()], 1.0, &mut phi[r]);
    }
    for e in 0..grid.len() - 1 {
        let (left, right) = (&grid.elements()[e], &grid.elements()[e + 1]);
        let iu = grid.range(e).end - 1;
        let iv = grid.range(e + 1).start;
        let pl = left.p_inv[left.len() - 1] / eps;
        let pr = right.p_inv[0] / eps;
        let jump = u[iu] - u[iv];
        let c1 = phi[iu] + sats.sigma3_l * pl * jump;
        let c2 = phi[iv] - sats.sigma3_r * pr * jump;
        let alpha = sats.sigma4_l * pl;
        let beta = sats.sigma4_r * pr;
        let det = 1.0 - alpha - beta;
        if det.abs() < SINGULAR_PIVOT * (1.0 + alpha.abs() + beta.abs()) {
            return Err(Error::SingularAuxiliary(format!("auxiliary system singular at interface {e}")));
        }
        phi[iu] = ((1.0 - beta) * c1 - alpha * c2) / det;
        phi[iv] = ((1.0 - alpha) * c2 - beta * c1) / det;
    }
    Ok(phi)
}

/// `du/dt` for the LDG scheme; returns `φ` for energy bookkeeping.
#[allow(clippy::too_many_arguments)]
pub fn advdiff_rhs(u: &[f64], grid: &MultiElementGrid, a: f64, eps: f64, sats: &AdvDiffSats, case: &MmsCase, t: f64, out: &mut [f64]) -> Result<Vec<f64>> {
    let phi = auxiliary(u, grid, eps, sats)?;
    if out.len() != u.len() {
        return Err(Error::DimensionMismatch("output length differs from state".into()));
    }
    let last = grid.len() - 1;
    let mut flux = Vec::new();
    for (e, el) in grid.elements().iter().enumerate() {
        let r = grid.range(e);
        let n = el.len();
        // −a u + ε φ is differentiated as one flux.
        flux.clear();
        flux.extend(u[r.clone()].iter().zip(&phi[r.clone()]).map(|(v, p)| -a * v + eps * p));
        let oe = &mut out[r.clone()];
        el.apply_d(&flux, 1.0, oe);
        for (k, o) in oe.iter_mut().enumerate() {
            *o += (case.forcing)(el.op.nodes[k], t);
        }
        let (u0, un) = (u[r.start], u[r.end - 1]);
        let (phi0, phin) = (phi[r.start], phi[r.end - 1]);
        if e == 0 {
            oe[0] += sats.tau_l * el.p_inv[0] * (a * u0 - eps * phi0 - (case.left)(t));
        } else {
            let (vn, etan) = (u[r.start - 1], phi[r.start - 1]);
            oe[0] += el.p_inv[0] * (sats.sigma1_r * (u0 - vn) + sats.sigma2_r * (phi0 - etan));
        }
        if e == last {
            oe[n - 1] += sats.tau_r * el.p_inv[n - 1] * (eps * phin - (case.right)(t));
        } else {
            let (v0, eta0) = (u[r.end], phi[r.end]);
            oe[n - 1] += el.p_inv[n - 1] * (sats.sigma1_l * (un - v0) + sats.sigma2_l * (phin - eta0));
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ibvp::tests::gll_grid;
    use std::sync::Arc;

    #[test]
    fn standard_penalties() {
        let s = AdvDiffSats::standard(1.0, 0.1);
        s.validate(1.0, 0.1).unwrap();
        assert_eq!(s.sigma1_l, 0.0);
        assert_eq!(s.sigma1_r, -1.0);
        assert!((s.sigma2_l + 0.05).abs() < 1e-15 && (s.sigma4_r + 0.05).abs() < 1e-15);
        assert!((s.sigma3_r - 0.05).abs() < 1e-15 && (s.sigma2_r - 0.05).abs() < 1e-15);
        let mut bad = s;
        bad.sigma4_r = 0.0;
        assert!(bad.validate(1.0, 0.1).is_err());
    }

    #[test]
    fn constant_state_feels_only_forcing() {
        let (a, eps, c) = (1.0, 0.1, 0.8);
        let grid = gll_grid(3, 4);
        let mut case = MmsCase::zero_data(Arc::new(move |_| c));
        case.left = Arc::new(move |_| a * c);
        case.forcing = Arc::new(|x, _| x);
        let u = vec![c; grid.total_nodes()];
        let mut du = vec![0.0; u.len()];
        let phi = advdiff_rhs(&u, &grid, a, eps, &AdvDiffSats::standard(a, eps), &case, 0.0, &mut du).unwrap();
        assert!(phi.iter().all(|p| p.abs() < 1e-12));
        for (x, d) in grid.global_nodes().iter().zip(&du) {
            assert!((d - x).abs() < 1e-11);
        }
    }

    #[test]
    fn auxiliary_is_exact_derivative_for_continuous_data() {
        let grid = gll_grid(3, 3);
        let u = grid.sample(|x| x * x * x - x);
        let phi = auxiliary(&u, &grid, 0.1, &AdvDiffSats::standard(1.0, 0.1)).unwrap();
        for (x, p) in grid.global_nodes().iter().zip(&phi) {
            assert!((p - (3.0 * x * x - 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn interface_system_couples_both_faces() {
        let (a, eps) = (1.0, 0.1);
        let sats = AdvDiffSats::standard(a, eps);
        let grid = gll_grid(2, 2);
        let mut u = vec![0.0; grid.total_nodes()];
        let iu = grid.range(0).end - 1;
        u[iu] = 1.0;
        let phi = auxiliary(&u, &grid, eps, &sats).unwrap();
        // Check both face equations directly.
        let iv = iu + 1;
        let (l, r) = (&grid.elements()[0], &grid.elements()[1]);
        let du_l: f64 = (0..l.len()).map(|k| l.op.d[(l.len() - 1, k)] * u[k]).sum();
        let du_r: f64 = (0..r.len()).map(|k| r.op.d[(0, k)] * u[iv + k]).sum();
        let pl = l.op.p[l.len() - 1];
        let pr = r.op.p[0];
        let jump_u = u[iu] - u[iv];
        let res_l = eps * phi[iu] - eps * du_l - (sats.sigma3_l * jump_u + sats.sigma4_l * (phi[iu] - phi[iv])) / pl;
        let res_r = eps * phi[iv] - eps * du_r - (sats.sigma3_r * (-jump_u) + sats.sigma4_r * (phi[iv] - phi[iu])) / pr;
        assert!(res_l.abs() < 1e-12 && res_r.abs() < 1e-12, "{res_l} {res_r}");
    }
}
