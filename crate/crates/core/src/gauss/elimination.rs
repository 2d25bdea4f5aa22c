//! Node elimination, for target spaces that are not Tchebyshev systems.
//!
//! Growing a rule through leading subspaces assumes every intermediate
//! problem has an interior solution, which oscillatory spaces on long
//! intervals violate. Elimination instead starts from an oversampled rule that
//! is already exact, compresses it to `dim G` nodes by column-pivoted QR, and
//! removes one node at a time, restoring exactness by damped Gauss–Newton
//! after each removal.

use nalgebra::{DMatrix, DVector};

use super::Prepared;
use crate::error::{Error, Result};
use crate::integrate::Weight;
use crate::legendre::gauss_legendre;

const PANEL_POINTS: usize = 20;
const MAX_PANELS: usize = 1024;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone)]
pub(crate) struct Eliminated {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub removals: usize,
    pub iterations: usize,
    pub residual: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Moment residuals `Σ_k w_k g_j(x_k) − μ_j`.
fn residual(p: &Prepared, x: &[f64], w: &[f64]) -> Vec<f64> {
    let (v, _) = p.reference.collocation(x);
    let r = v.transpose() * DVector::from_column_slice(w);
    r.iter().zip(&p.moments).map(|(s, m)| s - m).collect()
}

/// Composite Gauss–Legendre on equal panels of `[-1, 1]`, refined until the
/// target moments are matched to `tol`.
fn oversampled(p: &Prepared, weight: &Weight, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let omega = weight.mapped(p.mid, p.half);
    let (s, ws) = gauss_legendre(PANEL_POINTS);
    let mut panels = p.reference.dim().div_ceil(PANEL_POINTS).max(2);
    loop {
        let h = 2.0 / panels as f64;
        let mut x = Vec::with_capacity(panels * PANEL_POINTS);
        let mut w = Vec::with_capacity(panels * PANEL_POINTS);
        for k in 0..panels {
            let mid = -1.0 + h * (k as f64 + 0.5);
            for (sj, wj) in s.iter().zip(&ws) {
                let xj = mid + 0.5 * h * sj;
                x.push(xj);
                w.push(0.5 * h * wj * omega.at(xj));
            }
        }
        let r = max_abs(&residual(p, &x, &w));
        if r <= tol {
            return Ok((x, w));
        }
        if panels >= MAX_PANELS {
            return Err(Error::IntegrationFailed { error_estimate: r, subdivisions: panels });
        }
        panels *= 2;
    }
}

/// Minimum-norm weights on fixed nodes.
fn weights_on(p: &Prepared, x: &[f64]) -> Result<Vec<f64>> {
    let (v, _) = p.reference.collocation(x);
    let w = v.transpose().svd(true, true).solve(&DVector::from_column_slice(&p.moments), 1e-14).map_err(|e| Error::RankDeficient(e.into()))?;
    Ok(w.as_slice().to_vec())
}

/// `dim G` nodes of the oversampled rule chosen by column-pivoted QR of the
/// weight-scaled collocation matrix, with weights re-solved on them. Closed
/// rules get the endpoints added.
fn compressed(p: &Prepared, x: &[f64], w: &[f64], closed: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = p.reference.dim();
    let (v, _) = p.reference.collocation(x);
    let mut a = v.transpose();
    for (k, wk) in w.iter().enumerate() {
        a.column_mut(k).scale_mut(wk.abs().sqrt());
    }
    let qr = a.col_piv_qr();
    // Track where each column ends up to recover the pivot order.
    let mut order = DMatrix::from_fn(1, x.len(), |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let mut picked: Vec<f64> = order.iter().take(m).map(|j| x[*j as usize]).collect();
    if closed {
        picked.push(-1.0);
        picked.push(1.0);
    }
    picked.sort_by(f64::total_cmp);
    let weights = weights_on(p, &picked)?;
    Ok((picked, weights))
}

/// Nodes that may move or be removed: all of them for open rules, the
/// interior ones for closed rules.
fn movable(n: usize, closed: bool) -> std::ops::Range<usize> {
    if closed {
        1..n - 1
    } else {
        0..n
    }
}

/// Gauss–Newton on the moment equations over movable node positions and all
/// weights. Steps are minimum-norm solutions of the column-scaled Jacobian;
/// damping keeps nodes ordered and strictly inside the interval.
fn gauss_newton(p: &Prepared, mut x: Vec<f64>, mut w: Vec<f64>, closed: bool, tol: f64) -> Result<(Vec<f64>, Vec<f64>, usize, f64)> {
    let n = x.len();
    let free: Vec<usize> = movable(n, closed).collect();
    let mut f = residual(p, &x, &w);
    let mut res = max_abs(&f);
    for iter in 0..MAX_ITERATIONS {
        if res <= tol {
            return Ok((x, w, iter, res));
        }
        let (v, d) = p.reference.collocation(&x);
        let m = p.reference.dim();
        let cols = free.len() + n;
        let mut jac = DMatrix::zeros(m, cols);
        for (c, &k) in free.iter().enumerate() {
            for j in 0..m {
                jac[(j, c)] = w[k] * d[(k, j)];
            }
        }
        for k in 0..n {
            for j in 0..m {
                jac[(j, free.len() + k)] = v[(k, j)];
            }
        }
        let scale: Vec<f64> = (0..cols).map(|c| jac.column(c).norm().max(f64::MIN_POSITIVE)).collect();
        for (c, s) in scale.iter().enumerate() {
            jac.column_mut(c).scale_mut(1.0 / s);
        }
        let rhs = -DVector::from_vec(f.clone());
        let step = jac.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::RankDeficient(e.into()))?;
        let step: Vec<f64> = step.iter().zip(&scale).map(|(s, c)| s / c).collect();

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let mut xt = x.clone();
            for (c, &k) in free.iter().enumerate() {
                xt[k] += lambda * step[c];
            }
            let wt: Vec<f64> = w.iter().zip(&step[free.len()..]).map(|(wk, s)| wk + lambda * s).collect();
            let inside = xt.iter().all(|s| (-1.0..=1.0).contains(s)) && free.iter().all(|&k| xt[k].abs() < 1.0);
            if inside && xt.windows(2).all(|q| q[1] > q[0]) {
                let ft = residual(p, &xt, &wt);
                let rt = max_abs(&ft);
                if rt < res {
                    (x, w, f, res) = (xt, wt, ft, rt);
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::MaxIterations { iterations: iter + 1, residual: res });
        }
    }
    if res <= tol {
        return Ok((x, w, MAX_ITERATIONS, res));
    }
    Err(Error::MaxIterations { iterations: MAX_ITERATIONS, residual: res })
}

fn non_positive(w: &[f64]) -> usize {
    w.iter().filter(|v| !(**v > 0.0)).count()
}

/// Rule with `dim G / 2` nodes (open) or `dim G / 2 + 1` nodes (closed) for
/// the prepared target, reached by elimination. `tol` is the moment residual
/// accepted after each removal.
pub(crate) fn eliminate(p: &Prepared, weight: &Weight, closed: bool, tol: f64) -> Result<Eliminated> {
    let m = p.reference.dim();
    let target = if closed { m / 2 + 1 } else { m / 2 };
    let (x, w) = oversampled(p, weight, tol)?;
    let (x, w) = compressed(p, &x, &w, closed)?;
    let (mut x, mut w, mut iterations, mut res) = gauss_newton(p, x, w, closed, tol)?;
    let mut removals = 0;
    while x.len() > target {
        // Least significant first; non-positive weights sort to the front.
        let (v, _) = p.reference.collocation(&x);
        let mut order: Vec<(usize, f64)> = movable(x.len(), closed).map(|k| (k, w[k] * v.row(k).norm_squared())).collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1));
        let bad = non_positive(&w);
        let mut next = None;
        for (k, _) in order {
            let mut xt = x.clone();
            let mut wt = w.clone();
            xt.remove(k);
            wt.remove(k);
            if let Ok(out) = gauss_newton(p, xt, wt, closed, tol) {
                if non_positive(&out.1) <= bad {
                    next = Some(out);
                    break;
                }
            }
        }
        let Some((xn, wn, it, r)) = next else {
            return Err(Error::RankDeficient(format!("no node of a {}-point rule can be removed while keeping exactness", x.len())));
        };
        (x, w, res) = (xn, wn, r);
        iterations += it;
        removals += 1;
    }
    Ok(Eliminated { nodes: x, weights: w, removals, iterations, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{make_family, FamilySpec, SpaceSpec};
    use crate::integrate::Tolerances;

    fn prepared(degree: usize) -> Prepared {
        let g = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree }, -1.0, 1.0)).unwrap();
        Prepared::new(&g, &Weight::Unit, &Tolerances::default()).unwrap()
    }

    #[test]
    fn reaches_gauss_legendre() {
        let p = prepared(5);
        let out = eliminate(&p, &Weight::Unit, false, 1e-12).unwrap();
        let (x, w) = gauss_legendre(3);
        for k in 0..3 {
            assert!((out.nodes[k] - x[k]).abs() < 1e-10 && (out.weights[k] - w[k]).abs() < 1e-10, "{out:?}");
        }
        assert_eq!(out.removals, 3);
    }

    #[test]
    fn reaches_lobatto() {
        let p = prepared(5);
        let out = eliminate(&p, &Weight::Unit, true, 1e-12).unwrap();
        let c = (1.0 / 5f64).sqrt();
        let expect = [-1.0, -c, c, 1.0];
        assert!(out.nodes.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-10), "{out:?}");
        assert!((out.weights[0] - 1.0 / 6.0).abs() < 1e-10);
    }
}
