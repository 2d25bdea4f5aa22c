use std::f64::consts::PI;

use super::BasisFunction;

/// Trapezoid points on the period; the integrand is entire and periodic, so
/// the error decays faster than geometrically once the count exceeds `x + ν`.
const POINTS: usize = 96;

/// `J_ν(x) = (1/2π) ∫₀^{2π} cos(ντ − x sin τ) dτ`, differentiated under the integral.
pub(super) fn bessel_j(nu: usize) -> BasisFunction {
    let nu_f = nu as f64;
    BasisFunction::new(format!("J_{nu}"), 3, move |x| {
        let mut jet = [0.0; 4];
        for k in 0..POINTS {
            let tau = 2.0 * PI * k as f64 / POINTS as f64;
            let (st, _) = tau.sin_cos();
            let theta = nu_f * tau - x * st;
            let (s, c) = theta.sin_cos();
            jet[0] += c;
            jet[1] += st * s;
            jet[2] -= st * st * c;
            jet[3] -= st * st * st * s;
        }
        jet.map(|v| v / POINTS as f64)
    })
}
