//! Adaptive Gauss–Kronrod (7/15) integration with global bisection.
//!
//! The integrand may be vector valued; subdivision is driven by the largest
//! per-component error. Integrands must be callable concurrently (`Sync`).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::FunctionSpace;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Multiple of machine epsilon times the absolute-value quadrature below which
/// a panel's error estimate is treated as pure rounding.
const ROUNDOFF_FACTOR: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-12, max_subdivisions: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIntegral {
    pub values: Vec<f64>,
    pub error_estimates: Vec<f64>,
    pub subdivisions: usize,
    pub converged: bool,
}

impl VectorIntegral {
    /// Fails with [`Error::IntegrationFailed`] unless every component converged.
    pub fn require_converged(self) -> Result<Vec<f64>> {
        if self.converged {
            Ok(self.values)
        } else {
            Err(Error::IntegrationFailed { error_estimate: self.error_estimates.iter().cloned().fold(0.0, f64::max), subdivisions: self.subdivisions })
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    key: f64,
    seq: usize,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by creation order for determinism.
        self.key.total_cmp(&other.key).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn kronrod_panel<F>(f: &F, dim: usize, a: f64, b: f64, buf: &mut [f64]) -> Result<(Vec<f64>, Vec<f64>, bool)>
where
    F: Fn(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut abs_sum = vec![0.0; dim];
    let eval = |x: f64, buf: &mut [f64]| -> Result<()> {
        buf.iter_mut().for_each(|v| *v = 0.0);
        f(x, buf);
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(x));
        }
        Ok(())
    };
    eval(center, buf)?;
    for c in 0..dim {
        kron[c] += WGK[7] * buf[c];
        gauss[c] += WG[3] * buf[c];
        abs_sum[c] += WGK[7] * buf[c].abs();
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        for x in [center - dx, center + dx] {
            eval(x, buf)?;
            for c in 0..dim {
                kron[c] += WGK[j] * buf[c];
                abs_sum[c] += WGK[j] * buf[c].abs();
                if j % 2 == 1 {
                    gauss[c] += WG[j / 2] * buf[c];
                }
            }
        }
    }
    let values: Vec<f64> = kron.iter().map(|k| k * half).collect();
    let errors: Vec<f64> = kron.iter().zip(&gauss).map(|(k, g)| ((k - g) * half).abs()).collect();
    // The embedded difference cannot resolve anything below the rounding
    // error of the sums themselves; such panels are not worth splitting.
    let at_roundoff = errors.iter().zip(&abs_sum).all(|(e, s)| *e <= ROUNDOFF_FACTOR * f64::EPSILON * s * half);
    Ok((values, errors, at_roundoff))
}

/// Integrates a vector-valued `f` over [a, b]. `f(x, out)` writes `dim`
/// components into `out` (pre-zeroed).
pub fn integrate_vec<F>(f: F, dim: usize, a: f64, b: f64, tol: &Tolerances) -> Result<VectorIntegral>
where
    F: Fn(f64, &mut [f64]),
{
    if !(a < b) {
        return Err(Error::DegenerateInterval { a, b });
    }
    if !(tol.abs_tol > 0.0 && tol.rel_tol > 0.0) {
        return Err(Error::InvalidParameter("integration tolerances must be positive".into()));
    }
    let mut buf = vec![0.0; dim];
    let mut seq = 0;
    let mut totals = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    let mut heap = BinaryHeap::new();

    let mut done: Vec<Panel> = Vec::new();

    let push = |heap: &mut BinaryHeap<Panel>, done: &mut Vec<Panel>, a: f64, b: f64, panel: (Vec<f64>, Vec<f64>, bool), seq: &mut usize| {
        let (values, errors, at_roundoff) = panel;
        let key = errors.iter().cloned().fold(0.0, f64::max);
        let p = Panel { a, b, values, errors, key, seq: *seq };
        if at_roundoff {
            done.push(p);
        } else {
            heap.push(p);
        }
        *seq += 1;
    };

    let first = kronrod_panel(&f, dim, a, b, &mut buf)?;
    for c in 0..dim {
        totals[c] += first.0[c];
        total_err[c] += first.1[c];
    }
    push(&mut heap, &mut done, a, b, first, &mut seq);

    let satisfied = |totals: &[f64], errs: &[f64]| totals.iter().zip(errs).all(|(v, e)| *e <= tol.abs_tol.max(tol.rel_tol * v.abs()));

    let mut subdivisions = 0;
    while !satisfied(&totals, &total_err) {
        if heap.len() + done.len() >= tol.max_subdivisions {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let left = kronrod_panel(&f, dim, worst.a, mid, &mut buf)?;
        let right = kronrod_panel(&f, dim, mid, worst.b, &mut buf)?;
        for c in 0..dim {
            totals[c] += left.0[c] + right.0[c] - worst.values[c];
            total_err[c] += left.1[c] + right.1[c] - worst.errors[c];
        }
        push(&mut heap, &mut done, worst.a, mid, left, &mut seq);
        push(&mut heap, &mut done, mid, worst.b, right, &mut seq);
        subdivisions += 1;
    }

    // Re-sum from the panels to shed accumulated update roundoff.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.append(&mut done);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for p in &panels {
        for c in 0..dim {
            values[c] += p.values[c];
            errors[c] += p.errors[c];
        }
    }
    let converged = satisfied(&values, &errors);
    Ok(VectorIntegral { values, error_estimates: errors, subdivisions, converged })
}

/// Integrates a scalar function over [a, b].
///
/// Hitting the subdivision cap yields `converged == false`; a non-finite
/// evaluation is an error.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: &Tolerances) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
{
    let r = integrate_vec(|x, out: &mut [f64]| out[0] = f(x), 1, a, b, tol)?;
    Ok(IntegralResult { value: r.values[0], error_estimate: r.error_estimates[0], subdivisions: r.subdivisions, converged: r.converged })
}

/// Weight function for moments. `Unit` is ω ≡ 1.
#[derive(Clone, Default)]
pub enum Weight {
    #[default]
    Unit,
    Function(std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Weight {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            Weight::Unit => 1.0,
            Weight::Function(w) => w(x),
        }
    }

    /// The weight composed with `x = mid + half * s`.
    pub fn mapped(&self, mid: f64, half: f64) -> Weight {
        match self {
            Weight::Unit => Weight::Unit,
            Weight::Function(w) => {
                let w = std::sync::Arc::clone(w);
                Weight::Function(std::sync::Arc::new(move |s| w(mid + half * s)))
            }
        }
    }
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Weight::Unit => write!(f, "Unit"),
            Weight::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// `∫_a^b g_j ω dx` for every basis function of `space`, all converged.
pub fn moments(space: &FunctionSpace, weight: &Weight, tol: &Tolerances) -> Result<Vec<f64>> {
    let (a, b) = space.interval();
    let dim = space.dim();
    let r = integrate_vec(
        |x, out: &mut [f64]| {
            let w = weight.at(x);
            space.values_into(x, out);
            out.iter_mut().for_each(|v| *v *= w);
        },
        dim,
        a,
        b,
        tol,
    )?;
    r.require_converged()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential() {
        let r = integrate(f64::exp, 0.0, 1.0, &Tolerances::default()).unwrap();
        assert!(r.converged);
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn odd_cubic_vanishes_without_subdivision() {
        let r = integrate(|x| x * x * x, -1.0, 1.0, &Tolerances::default()).unwrap();
        assert_eq!(r.subdivisions, 0);
        assert!(r.value.abs() < 1e-16);
    }

    #[test]
    fn polynomials_up_to_degree_13_need_no_subdivision() {
        for d in 0..=13 {
            let r = integrate(|x| x.powi(d), 0.0, 1.0, &Tolerances::default()).unwrap();
            assert_eq!(r.subdivisions, 0, "degree {d}");
            assert!((r.value - 1.0 / (d as f64 + 1.0)).abs() < 1e-15, "degree {d}");
        }
    }

    #[test]
    fn subdivision_cap_reports_not_converged() {
        let tol = Tolerances { max_subdivisions: 3, ..Tolerances::default() };
        let r = integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &tol).unwrap();
        assert!(!r.converged);
        assert!(r.error_estimate > tol.abs_tol);
    }

    #[test]
    fn non_finite_is_an_error() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, &Tolerances::default());
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(integrate(|x| x, 1.0, 1.0, &Tolerances::default()).is_err());
    }

    #[test]
    fn converged_flag_is_honest() {
        let r = integrate(|x| (3.0 * x).cos() * x.exp(), -2.0, 3.0, &Tolerances::default()).unwrap();
        assert!(r.converged);
        assert!(r.error_estimate <= 1e-12f64.max(1e-12 * r.value.abs()));
    }
}
