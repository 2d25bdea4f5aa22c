use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::FunctionSpace;

/// Indices of the nodes whose derivative conditions enter the system.
pub(crate) fn derivative_nodes(count: usize, closed: bool) -> std::ops::Range<usize> {
    if closed {
        1..count.saturating_sub(1)
    } else {
        0..count
    }
}

fn check_nodes(g: &FunctionSpace, nodes: &[f64], closed: bool) -> Result<()> {
    let m = g.dim();
    if !m.is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!("target space has odd dimension {m}")));
    }
    let n = m / 2;
    let expected = if closed { n + 1 } else { n };
    if nodes.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "{} nodes given, a {} rule for a space of dimension {m} needs {expected}",
            nodes.len(),
            if closed { "closed" } else { "open" }
        )));
    }
    if nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidNodes("non-finite node".into()));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidNodes("nodes must be strictly increasing".into()));
    }
    Ok(())
}

/// The (quasi-)Hermite–Vandermonde matrix: one row per interpolation condition,
/// one column per basis function. Value rows for every node come first, then
/// derivative rows (all nodes for open rules, interior nodes for closed rules).
/// Returns the matrix and its 2-norm condition number.
pub fn hermite_vandermonde(g: &FunctionSpace, nodes: &[f64], closed: bool) -> Result<(DMatrix<f64>, f64)> {
    check_nodes(g, nodes, closed)?;
    let m = g.dim();
    let (vals, ders) = g.collocation(nodes);
    let mut v = DMatrix::zeros(m, m);
    for (r, k) in (0..nodes.len()).enumerate() {
        v.row_mut(r).copy_from(&vals.row(k));
    }
    for (r, k) in derivative_nodes(nodes.len(), closed).enumerate() {
        v.row_mut(nodes.len() + r).copy_from(&ders.row(k));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(f64::NAN));
    }
    let sv = v.singular_values();
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    Ok((v, cond))
}

/// Cardinal basis of the target space with respect to the Hermite conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteLagrangeBasis {
    /// Row `i` expands `σ_i` over the basis of G.
    pub sigma_coeffs: DMatrix<f64>,
    /// Row `i` expands `η_i` over the basis of G.
    pub eta_coeffs: DMatrix<f64>,
    pub node_set: Vec<f64>,
    pub closed: bool,
    pub condition: f64,
}

impl HermiteLagrangeBasis {
    /// `(∫σ_i ω, ∫η_i ω)` given the moments `∫g_j ω` of the basis of G.
    pub fn integrals(&self, moments: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mu = DVector::from_column_slice(moments);
        let s = &self.sigma_coeffs * &mu;
        let e = &self.eta_coeffs * &mu;
        (s.iter().cloned().collect(), e.iter().cloned().collect())
    }
}

pub fn hermite_lagrange(g: &FunctionSpace, nodes: &[f64], closed: bool, max_condition: f64) -> Result<HermiteLagrangeBasis> {
    let (v, cond) = hermite_vandermonde(g, nodes, closed)?;
    if !(cond <= max_condition) {
        return Err(Error::SingularVandermonde(cond));
    }
    let inv = v.try_inverse().ok_or(Error::SingularVandermonde(cond))?;
    // Column r of V⁻¹ holds the coefficients of the function that satisfies
    // condition r with value one and every other condition with zero.
    let nv = nodes.len();
    let m = g.dim();
    let eta_coeffs = inv.columns(0, nv).transpose();
    let sigma_coeffs = inv.columns(nv, m - nv).transpose();
    Ok(HermiteLagrangeBasis { sigma_coeffs, eta_coeffs, node_set: nodes.to_vec(), closed, condition: cond })
}

/// Weights `∫η_i ω` at every node and residuals `∫σ_i ω` at the free nodes,
/// from one solve of `Vᵀ z = μ`.
pub(crate) struct NodeSystem {
    pub weights: Vec<f64>,
    pub sigma: Vec<f64>,
}

pub(crate) fn solve_system(g: &FunctionSpace, nodes: &[f64], closed: bool, moments: &[f64], max_condition: f64) -> Result<NodeSystem> {
    let (v, cond) = hermite_vandermonde(g, nodes, closed)?;
    if !(cond <= max_condition) {
        return Err(Error::SingularVandermonde(cond));
    }
    let z = v.transpose().lu().solve(&DVector::from_column_slice(moments)).ok_or(Error::SingularVandermonde(cond))?;
    let nv = nodes.len();
    Ok(NodeSystem { weights: z.rows(0, nv).iter().cloned().collect(), sigma: z.rows(nv, z.len() - nv).iter().cloned().collect() })
}
