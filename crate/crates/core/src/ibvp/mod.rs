//! Multi-element energy-stable solvers for linear advection (SAT coupling)
//! and advection–diffusion (LDG with SATs), manufactured solutions, and
//! convergence studies.
//!
//! State vectors are flat: element `e` owns `grid.range(e)`, and interface
//! nodes are duplicated between neighbours.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsbp::{scale_to_element, FsbpOperator};

mod advdiff;
mod advection;
mod solve;
mod study;
mod time;

pub use advdiff::{advdiff_rhs, auxiliary, AdvDiffSats};
pub use advection::{advection_energy_rate, advection_rhs, AdvectionSats};
pub use solve::{final_error, solve, Problem, Scheme};
pub use study::{convergence_study, observed_orders, ConvergenceRow, Coordinates, OperatorSource, StudyOptions};
pub use time::{cfl_dt, rk4_step, time_integrate, DtControl, EnergyTrace, Integration, TimeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeParams {
    /// Wave speed.
    pub a: f64,
    /// Diffusion coefficient (zero for pure advection).
    #[serde(default)]
    pub eps: f64,
    pub final_time: f64,
}

impl PdeParams {
    pub fn validate(&self, diffusive: bool) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!("wave speed must be positive, got {}", self.a)));
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return Err(Error::InvalidParameter(format!("final time must be positive, got {}", self.final_time)));
        }
        if diffusive && !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("advection-diffusion needs eps > 0, got {}", self.eps)));
        }
        if self.eps < 0.0 || !self.eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be non-negative, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Per-element data in the layout the right-hand sides use.
#[derive(Debug, Clone)]
pub struct Element {
    pub op: FsbpOperator,
    /// `D` row-major.
    d: Vec<f64>,
    p_inv: Vec<f64>,
}

impl Element {
    fn new(op: FsbpOperator) -> Self {
        let n = op.len();
        let d = (0..n * n).map(|k| op.d[(k / n, k % n)]).collect();
        let p_inv = op.p.iter().map(|w| 1.0 / w).collect();
        Self { op, d, p_inv }
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    /// `out = scale * D u`.
    fn apply_d(&self, u: &[f64], scale: f64, out: &mut [f64]) {
        let n = self.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.d[i * n..(i + 1) * n];
            *o = scale * row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Elements tiling an interval in order, each carrying a closed operator.
#[derive(Debug, Clone)]
pub struct MultiElementGrid {
    elements: Vec<Element>,
    offsets: Vec<usize>,
}

impl MultiElementGrid {
    pub fn new(ops: Vec<FsbpOperator>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidParameter("a grid needs at least one element".into()));
        }
        for (k, op) in ops.iter().enumerate() {
            let (a, b) = op.interval;
            let n = op.len();
            let tol = 1e-12 * (b - a).abs().max(1.0);
            if n < 2 || (op.nodes[0] - a).abs() > tol || (op.nodes[n - 1] - b).abs() > tol {
                return Err(Error::InvalidNodes(format!("element {k} operator is not closed (needs both endpoints)")));
            }
            if k > 0 {
                let prev = ops[k - 1].interval.1;
                if (prev - a).abs() > tol {
                    return Err(Error::InvalidNodes(format!("element {k} starts at {a} but element {} ends at {prev}", k - 1)));
                }
            }
        }
        let mut offsets = vec![0];
        for op in &ops {
            offsets.push(offsets.last().unwrap() + op.len());
        }
        Ok(Self { elements: ops.into_iter().map(Element::new).collect(), offsets })
    }

    /// `count` equal elements on `domain`, each a copy of `reference` moved
    /// onto it (nodes translated and scaled affinely).
    pub fn uniform(reference: &FsbpOperator, count: usize, domain: (f64, f64)) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("element count must be positive".into()));
        }
        let (a, b) = domain;
        let h = (b - a) / count as f64;
        let ops = (0..count)
            .map(|k| {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == count { b } else { a + (k + 1) as f64 * h };
                scale_to_element(reference, lo, hi)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn range(&self, e: usize) -> Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    /// Nodes counted with interface duplication.
    pub fn total_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn global_nodes(&self) -> Vec<f64> {
        self.elements.iter().flat_map(|e| e.op.nodes.iter().copied()).collect()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.elements[0].op.interval.0, self.elements[self.len() - 1].op.interval.1)
    }

    /// Smallest distance between neighbouring nodes of any element.
    pub fn h_min(&self) -> f64 {
        self.elements.iter().flat_map(|e| e.op.nodes.windows(2).map(|w| w[1] - w[0])).fold(f64::INFINITY, f64::min)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.global_nodes().into_iter().map(f).collect()
    }

    /// `Σ_e u_eᵀ P_e u_e`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.elements.iter().enumerate().map(|(e, el)| el.op.p.iter().zip(&u[self.range(e)]).map(|(w, v)| w * v * v).sum::<f64>()).sum()
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.total_nodes() {
            return Err(Error::DimensionMismatch(format!("state has {} entries, grid has {} nodes", u.len(), self.total_nodes())));
        }
        Ok(())
    }
}

/// `Σ_e (u − v)ᵀ P_e (u − v)` and its square root.
pub fn solution_error(u: &[f64], grid: &MultiElementGrid, exact: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    grid.check_state(u)?;
    let diff: Vec<f64> = grid.global_nodes().iter().zip(u).map(|(x, v)| v - exact(*x)).collect();
    let sq = grid.energy(&diff);
    Ok((sq, sq.sqrt()))
}

pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Signal = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A manufactured solution with the forcing and boundary data that make it
/// exact. `exact` takes `(x, t)`.
#[derive(Clone)]
pub struct MmsCase {
    pub name: String,
    pub exact: Field,
    pub forcing: Field,
    pub left: Signal,
    pub right: Signal,
    pub initial: Signal,
    /// True when all data and forcing vanish, so energy may not grow.
    pub zero_data: bool,
}

impl std::fmt::Debug for MmsCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MmsCase").field("name", &self.name).field("zero_data", &self.zero_data).finish()
    }
}

impl MmsCase {
    /// `v = e^{sin(2π(x − a t))}` for `u_t + a u_x = 0` with inflow data at `x = 0`.
    pub fn advection_wave(a: f64) -> Self {
        let v = move |x: f64, t: f64| (2.0 * PI * (x - a * t)).sin().exp();
        Self {
            name: "advection-wave".into(),
            exact: Arc::new(v),
            forcing: Arc::new(|_, _| 0.0),
            left: Arc::new(move |t| v(0.0, t)),
            right: Arc::new(|_| 0.0),
            initial: Arc::new(move |x| v(x, 0.0)),
            zero_data: false,
        }
    }

    /// `v = (e^{ax/ε} − 1)/(e^{a/ε} − 1) e^{0.1 t}` on `[0, 1]` with Robin data
    /// `a v − ε v_x` at `x = 0`, Neumann data `ε v_x` at `x = 1`, and forcing
    /// `0.1 v` (the steady profile satisfies `a v_x = ε v_xx`).
    pub fn boundary_layer(a: f64, eps: f64) -> Self {
        let k = a / eps;
        // Written with non-positive exponents so large a/ε cannot overflow.
        let denom = -(-k).exp_m1();
        let profile = move |x: f64| ((k * (x - 1.0)).exp() - (-k).exp()) / denom;
        let slope = move |x: f64| k * (k * (x - 1.0)).exp() / denom;
        let growth = |t: f64| (0.1 * t).exp();
        Self {
            name: "boundary-layer".into(),
            exact: Arc::new(move |x, t| profile(x) * growth(t)),
            forcing: Arc::new(move |x, t| 0.1 * profile(x) * growth(t)),
            left: Arc::new(move |t| (a * profile(0.0) - eps * slope(0.0)) * growth(t)),
            right: Arc::new(move |t| eps * slope(1.0) * growth(t)),
            initial: Arc::new(profile),
            zero_data: false,
        }
    }

    /// Homogeneous data and forcing with the given initial state.
    pub fn zero_data(initial: Signal) -> Self {
        Self {
            name: "zero-data".into(),
            exact: Arc::new(|_, _| f64::NAN),
            forcing: Arc::new(|_, _| 0.0),
            left: Arc::new(|_| 0.0),
            right: Arc::new(|_| 0.0),
            initial,
            zero_data: true,
        }
    }

    /// Largest relative mismatch between `forcing` and the PDE residual
    /// `v_t + a v_x − ε v_xx` of `exact`, by central differences at `points`.
    pub fn forcing_mismatch(&self, params: &PdeParams, points: &[(f64, f64)]) -> f64 {
        let v = &self.exact;
        let h = 1e-4;
        points
            .iter()
            .map(|&(x, t)| {
                let vt = (v(x, t + h) - v(x, t - h)) / (2.0 * h);
                let vx = (v(x + h, t) - v(x - h, t)) / (2.0 * h);
                let vxx = (v(x + h, t) - 2.0 * v(x, t) + v(x - h, t)) / (h * h);
                let residual = vt + params.a * vx - params.eps * vxx;
                let f = (self.forcing)(x, t);
                (residual - f).abs() / f.abs().max(vt.abs()).max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsbp::build_operator;
    use crate::funcspace::{make_family, FamilySpec, SpaceSpec};
    use crate::gauss::{classical_gll, SolveOptions};
    use crate::integrate::Weight;

    pub(crate) fn gll_grid(degree: usize, elements: usize) -> MultiElementGrid {
        let h = 1.0 / elements as f64;
        let f = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree }, 0.0, h)).unwrap();
        let g = crate::funcspace::product_derivative_space(&f).unwrap();
        let rule = classical_gll(&g, degree, &Weight::Unit, &SolveOptions::default()).unwrap();
        let op = build_operator(&f, &rule).unwrap();
        MultiElementGrid::uniform(&op, elements, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn uniform_grid_tiles_domain() {
        let grid = gll_grid(3, 5);
        assert_eq!(grid.total_nodes(), 20);
        assert_eq!(grid.domain(), (0.0, 1.0));
        for e in 1..grid.len() {
            assert_eq!(grid.elements()[e - 1].op.interval.1, grid.elements()[e].op.interval.0);
        }
    }

    #[test]
    fn error_norm_of_constant_offset() {
        let grid = gll_grid(2, 3);
        let u = vec![0.5; grid.total_nodes()];
        let (sq, root) = solution_error(&u, &grid, |_| 0.0).unwrap();
        assert!((sq - 0.25).abs() < 1e-13);
        assert!((root - 0.5).abs() < 1e-13);
        let (zero, _) = solution_error(&grid.sample(|x| x * x), &grid, |x| x * x).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn gaps_are_rejected() {
        let grid = gll_grid(2, 2);
        let mut ops: Vec<_> = grid.elements().iter().map(|e| e.op.clone()).collect();
        ops[1] = scale_to_element(&ops[1], 0.6, 1.0).unwrap();
        assert!(matches!(MultiElementGrid::new(ops), Err(Error::InvalidNodes(_))));
    }

    #[test]
    fn manufactured_forcings_match_residuals() {
        let pts = [(0.1, 0.0), (0.37, 0.4), (0.8, 1.3), (0.95, 0.2)];
        let p = PdeParams { a: 1.0, eps: 0.1, final_time: 1.0 };
        assert!(MmsCase::boundary_layer(1.0, 0.1).forcing_mismatch(&p, &pts) < 1e-5);
        let p = PdeParams { a: 1.0, eps: 0.0, final_time: 1.0 };
        assert!(MmsCase::advection_wave(1.0).forcing_mismatch(&p, &pts) < 1e-5);
    }

    #[test]
    fn boundary_layer_data_are_consistent() {
        let (a, eps) = (1.0, 0.1);
        let c = MmsCase::boundary_layer(a, eps);
        let h = 1e-6;
        let vx = |x: f64| ((c.exact)(x + h, 0.3) - (c.exact)(x - h, 0.3)) / (2.0 * h);
        assert!(((c.left)(0.3) - (a * (c.exact)(0.0, 0.3) - eps * vx(0.0))).abs() < 1e-8);
        assert!(((c.right)(0.3) - eps * vx(1.0)).abs() < 1e-7);
        assert!(((c.exact)(1.0, 0.0) - 1.0).abs() < 1e-15 && (c.exact)(0.0, 0.0).abs() < 1e-15);
    }
}
