use nalgebra::{DMatrix, DVector};

use super::{FunctionSpace, Provenance};
use crate::error::{Error, Result};
use crate::legendre::gauss_legendre_on;

/// Relative singular-value cutoff for numerical rank decisions.
pub const RANK_CUTOFF: f64 = 1e-12;

/// A column is accepted during ordered selection only if this fraction of its
/// norm survives projection onto the columns already chosen.
const SELECTION_RESIDUAL: f64 = 1e-6;

/// Quadrature-weighted collocation matrix `A[k, j] = sqrt(w_k) g_j(x_k)` on a
/// Gauss–Legendre grid, so that `AᵀA` is the L² Gram matrix of the basis.
pub fn sample_matrix(space: &FunctionSpace) -> DMatrix<f64> {
    let m = space.dim();
    let points = (4 * m).max(64);
    let (a, b) = space.interval();
    let (x, w) = gauss_legendre_on(points, a, b);
    let mut out = DMatrix::zeros(points, m);
    let mut vals = vec![0.0; m];
    for k in 0..points {
        space.values_into(x[k], &mut vals);
        let s = w[k].sqrt();
        for j in 0..m {
            out[(k, j)] = s * vals[j];
        }
    }
    out
}

/// `a` with every nonzero column scaled to unit norm, and the norms. Rank
/// decisions are made on this, so they do not depend on how the basis
/// functions happen to be scaled.
pub(crate) fn equilibrated(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut out = a.clone();
    for (j, n) in norms.iter().enumerate() {
        if *n > 0.0 {
            out.column_mut(j).scale_mut(1.0 / n);
        }
    }
    (out, norms)
}

/// Numerical rank of `a` under [`RANK_CUTOFF`], after column equilibration.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = equilibrated(a).0.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_CUTOFF * top).count()
}

pub(crate) struct Selection {
    /// Indices of the chosen input columns, in input order.
    pub chosen: Vec<usize>,
    /// Orthonormalised coefficient rows over the input basis, one per chosen column.
    pub coeffs: DMatrix<f64>,
}

/// Ordered rank-revealing selection: keeps input columns in order while each
/// adds a new direction, and builds an orthonormal basis of their span.
pub(crate) fn select(a: &DMatrix<f64>) -> Selection {
    let m = a.ncols();
    let (a, scale) = equilibrated(a);
    let svd = a.svd(false, true);
    let top = svd.singular_values.max();
    let idx: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| top > 0.0 && svd.singular_values[i] > RANK_CUTOFF * top).collect();
    let r = idx.len();
    if r == 0 {
        return Selection { chosen: vec![], coeffs: DMatrix::zeros(0, m) };
    }
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    // Coordinates of each column in the numerically significant left subspace:
    // y_j = U_rᵀ a_j = Σ_r V_rᵀ e_j.
    let y: Vec<DVector<f64>> = (0..m).map(|j| DVector::from_iterator(r, idx.iter().map(|&i| svd.singular_values[i] * vt[(i, j)]))).collect();

    let residual = |v: &DVector<f64>, qs: &[DVector<f64>]| {
        let mut v = v.clone();
        for _ in 0..2 {
            for q in qs {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        v
    };

    let mut chosen = Vec::new();
    let mut qs: Vec<DVector<f64>> = Vec::new();
    for (j, yj) in y.iter().enumerate() {
        if qs.len() == r {
            break;
        }
        let norm = yj.norm();
        if norm <= RANK_CUTOFF * top {
            continue;
        }
        let v = residual(yj, &qs);
        let vn = v.norm();
        if vn > SELECTION_RESIDUAL * norm {
            chosen.push(j);
            qs.push(v / vn);
        }
    }
    // Fill up with the most independent remaining columns if the ordered pass
    // was too strict.
    while qs.len() < r {
        let best = (0..m).filter(|j| !chosen.contains(j)).map(|j| (j, residual(&y[j], &qs))).max_by(|p, q| p.1.norm().total_cmp(&q.1.norm()));
        match best {
            Some((j, v)) if v.norm() > 0.0 => {
                let vn = v.norm();
                chosen.push(j);
                qs.push(v / vn);
            }
            _ => break,
        }
    }
    let mut order: Vec<usize> = (0..chosen.len()).collect();
    order.sort_by_key(|&k| chosen[k]);
    let chosen_sorted: Vec<usize> = order.iter().map(|&k| chosen[k]).collect();

    // Output function i has samples U_r q_i, i.e. coefficients V_r Σ_r⁻¹ q_i.
    let mut coeffs = DMatrix::zeros(qs.len(), m);
    for (row, q) in qs.iter().enumerate() {
        for j in 0..m {
            let mut c = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                c += vt[(i, j)] * q[k] / svd.singular_values[i];
            }
            coeffs[(row, j)] = if scale[j] > 0.0 { c / scale[j] } else { 0.0 };
        }
    }
    Selection { chosen: chosen_sorted, coeffs }
}

/// L²-orthonormal basis of the same span; numerically dependent directions are
/// dropped. Output function `i` is a positive multiple of the part of the
/// `i`-th selected input function orthogonal to its predecessors.
pub fn orthonormalize(space: &FunctionSpace) -> Result<FunctionSpace> {
    let a = sample_matrix(space);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(f64::NAN));
    }
    let sel = select(&a);
    if sel.coeffs.nrows() == 0 {
        return Err(Error::RankCollapse(0));
    }
    let ids = (0..sel.coeffs.nrows()).map(|i| format!("q{i}")).collect();
    FunctionSpace::linear_combination(space, sel.coeffs, Provenance::Orthonormalized { of: Box::new(space.provenance().clone()) }, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{make_family, monomial, FamilySpec, SpaceSpec};
    use crate::legendre::gauss_legendre_on;

    fn gram(space: &FunctionSpace, points: usize) -> DMatrix<f64> {
        let (a, b) = space.interval();
        let (x, w) = gauss_legendre_on(points, a, b);
        let m = space.dim();
        let mut g = DMatrix::zeros(m, m);
        for (xk, wk) in x.iter().zip(&w) {
            let v: Vec<f64> = space.jets(*xk).iter().map(|j| j[0]).collect();
            for i in 0..m {
                for j in 0..m {
                    g[(i, j)] += wk * v[i] * v[j];
                }
            }
        }
        g
    }

    #[test]
    fn linear_on_symmetric_interval() {
        let s = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 1 }, -1.0, 1.0)).unwrap();
        let q = orthonormalize(&s).unwrap();
        let c0 = q.basis()[0].coeffs().unwrap();
        let c1 = q.basis()[1].coeffs().unwrap();
        assert!((c0[0] - 0.5f64.sqrt()).abs() < 1e-14 && c0[1].abs() < 1e-14);
        assert!(c1[0].abs() < 1e-14 && (c1[1] - 1.5f64.sqrt()).abs() < 1e-14);
        // Derivatives follow the coefficients exactly.
        assert!((q.jets(0.3)[1][1] - 1.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn duplicated_direction_is_dropped() {
        let twice_x = crate::funcspace::BasisFunction::new("2x", 3, |x| [2.0 * x, 2.0, 0.0, 0.0]);
        let s = FunctionSpace::explicit((-1.0, 1.0), vec![monomial(0), monomial(1), twice_x]).unwrap();
        assert_eq!(orthonormalize(&s).unwrap().dim(), 2);
    }

    #[test]
    fn gram_is_identity_for_exponential_space() {
        let spec = SpaceSpec::new(FamilySpec::Exponential { poly_degree: Some(2), rates: vec![1.0, 2.0, 3.0] }, 0.0, 1.0);
        let q = orthonormalize(&make_family(&spec).unwrap()).unwrap();
        let g = gram(&q, 90);
        assert_eq!(q.dim(), 6);
        assert!((g - DMatrix::identity(6, 6)).amax() < 1e-10);
    }

    #[test]
    fn ordered_selection_prefers_earlier_columns() {
        let twice_x = crate::funcspace::BasisFunction::new("2x", 3, |x| [2.0 * x, 2.0, 0.0, 0.0]);
        let s = FunctionSpace::explicit((0.0, 1.0), vec![monomial(1), twice_x, monomial(2)]).unwrap();
        let sel = select(&sample_matrix(&s));
        assert_eq!(sel.chosen, vec![0, 2]);
    }
}
