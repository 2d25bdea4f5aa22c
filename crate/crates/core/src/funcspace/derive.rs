use nalgebra::DMatrix;

use super::ortho::{equilibrated, sample_matrix, select, RANK_CUTOFF};
use super::{monomial, BasisFunction, FunctionSpace, Provenance};
use crate::error::{Error, Result};

/// Relative projection residual above which a monomial counts as independent
/// of the space being augmented.
const AUGMENT_RESIDUAL: f64 = 1e-6;

/// `G = (FF)'`: derivatives of all pairwise products `f_i f_j`, `i ≤ j`,
/// ordered by `(i + j, i)` and reduced to a numerically independent subset.
pub fn product_derivative_space(f: &FunctionSpace) -> Result<FunctionSpace> {
    if f.min_order() < 1 {
        return Err(Error::InvalidParameter("product derivatives need first derivatives".into()));
    }
    let n = f.dim();
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    pairs.sort_by_key(|&(i, j)| (i + j, i));

    let order = f.min_order() - 1;
    let raw: Vec<BasisFunction> = pairs
        .iter()
        .map(|&(i, j)| {
            let (fi, fj) = (f.basis()[i].clone(), f.basis()[j].clone());
            let id = format!("({})({})'", fi.id(), fj.id());
            BasisFunction::new(id, order, move |x| {
                let p = fi.jet(x);
                let q = fj.jet(x);
                [
                    p[1] * q[0] + p[0] * q[1],
                    p[2] * q[0] + 2.0 * p[1] * q[1] + p[0] * q[2],
                    p[3] * q[0] + 3.0 * p[2] * q[1] + 3.0 * p[1] * q[2] + p[0] * q[3],
                    f64::NAN,
                ]
            })
        })
        .collect();
    let candidates = FunctionSpace::new(f.interval(), raw.clone(), Provenance::Explicit { ids: vec![] })?;
    let sel = select(&sample_matrix(&candidates));
    if sel.chosen.is_empty() {
        return Err(Error::RankCollapse(0));
    }
    let basis = sel.chosen.iter().map(|&k| raw[k].clone()).collect();
    FunctionSpace::new(f.interval(), basis, Provenance::ProductDerivative { of: Box::new(f.provenance().clone()) })
}

/// Pads an odd-dimensional space with the lowest-degree monomial (in the
/// space's own coordinate) that is not numerically in its span.
pub fn augment_to_even(g: &FunctionSpace) -> Result<FunctionSpace> {
    if g.dim().is_multiple_of(2) {
        return Ok(g.clone());
    }
    let cap = g.dim() + 4;
    let (a, _) = equilibrated(&sample_matrix(g));
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().expect("left vectors requested");
    let top = svd.singular_values.max();
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > RANK_CUTOFF * top).collect();
    let ur = DMatrix::from_fn(u.nrows(), cols.len(), |r, c| u[(r, cols[c])]);
    for m in 0..=cap {
        let candidate = FunctionSpace::new(g.interval(), vec![monomial(m)], Provenance::Explicit { ids: vec![] })?;
        let c = sample_matrix_with_rows(&candidate, a.nrows());
        let proj = &ur * (ur.transpose() * &c);
        let residual = (&c - proj).norm() / c.norm();
        if residual > AUGMENT_RESIDUAL {
            return g.with_appended(monomial(m), Provenance::Augmented { of: Box::new(g.provenance().clone()), monomial_degree: m });
        }
    }
    Err(Error::AugmentationFailed(cap))
}

/// Samples a one-function space on the same grid size as a reference sample.
fn sample_matrix_with_rows(space: &FunctionSpace, rows: usize) -> DMatrix<f64> {
    let (a, b) = space.interval();
    let (x, w) = crate::legendre::gauss_legendre_on(rows, a, b);
    DMatrix::from_fn(rows, 1, |k, _| w[k].sqrt() * space.basis()[0].value_at(x[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{make_family, FamilySpec, SpaceSpec};
    use crate::integrate::{integrate, Tolerances};

    fn example_one() -> FunctionSpace {
        make_family(&SpaceSpec::new(FamilySpec::Exponential { poly_degree: Some(1), rates: vec![1.0] }, 0.0, 1.0)).unwrap()
    }

    fn span_contains(space: &FunctionSpace, f: impl Fn(f64) -> f64) -> bool {
        let a = sample_matrix(space);
        let (lo, hi) = space.interval();
        let (x, w) = crate::legendre::gauss_legendre_on(a.nrows(), lo, hi);
        let v = nalgebra::DVector::from_fn(a.nrows(), |k, _| w[k].sqrt() * f(x[k]));
        let sol = a.clone().svd(true, true).solve(&v, 1e-12).unwrap();
        (&a * sol - &v).norm() < 1e-10 * v.norm()
    }

    #[test]
    fn example_one_product_space() {
        let g = product_derivative_space(&example_one()).unwrap();
        assert_eq!(g.dim(), 5);
        for f in [|_: f64| 1.0, |x: f64| x, |x: f64| x.exp(), |x: f64| x * x.exp(), |x: f64| (2.0 * x).exp()] {
            assert!(span_contains(&g, f));
        }
        let aug = augment_to_even(&g).unwrap();
        assert_eq!(aug.dim(), 6);
        assert_eq!(aug.basis()[5].id(), "x^2");
    }

    #[test]
    fn polynomial_product_space() {
        let f = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 3 }, -1.0, 1.0)).unwrap();
        let g = product_derivative_space(&f).unwrap();
        assert_eq!(g.dim(), 6);
        assert!(span_contains(&g, |x| x.powi(5)));
    }

    #[test]
    fn constant_space_collapses() {
        let f = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 0 }, 0.0, 1.0)).unwrap();
        assert!(matches!(product_derivative_space(&f), Err(Error::RankCollapse(_))));
    }

    #[test]
    fn quadratics_augmented_with_cubic() {
        let g = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 2 }, 0.0, 1.0)).unwrap();
        let aug = augment_to_even(&g).unwrap();
        assert_eq!(aug.basis()[3].id(), "x^3");
        let even = augment_to_even(&aug).unwrap();
        assert_eq!(even.dim(), 4);
    }

    #[test]
    fn product_rule_integrates_to_boundary_difference() {
        let f = example_one();
        let n = f.dim();
        let tol = Tolerances::default();
        for i in 0..n {
            for j in i..n {
                let (fi, fj) = (&f.basis()[i], &f.basis()[j]);
                let r = integrate(|x| fi.deriv_at(x) * fj.value_at(x) + fi.value_at(x) * fj.deriv_at(x), 0.0, 1.0, &tol).unwrap();
                let exact = fi.value_at(1.0) * fj.value_at(1.0) - fi.value_at(0.0) * fj.value_at(0.0);
                assert!((r.value - exact).abs() < 1e-10);
            }
        }
    }
}
