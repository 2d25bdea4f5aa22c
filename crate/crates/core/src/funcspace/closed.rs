//! Closed-form `F` and `(FF)'` for the exponential-polynomial families, in a
//! divided-difference basis that stays well conditioned on short intervals.
//!
//! On `[a, b]` with `x = mid + half * s`, every built-in family except Bessel
//! spans functions of the form `s^k e^{μ s}` (or their real trigonometric
//! counterparts). The basis used here is the sequence of divided differences
//! with respect to the rate, `B_k(s) = [μ_1, ..., μ_k] e^{μ s}`, expanded as a
//! power series whose coefficients are complete homogeneous symmetric
//! polynomials of the rates. As rates coalesce the `B_k` tend to
//! `s^{k-1}/(k-1)!` instead of becoming numerically dependent, which is what
//! the sampled product-derivative route cannot avoid.

use super::{make_family, BasisFunction, FamilySpec, FunctionSpace, Jet, Provenance, SpaceSpec};
use crate::error::Result;

/// Relative size below which trailing series terms are dropped.
const SERIES_TAIL: f64 = 1e-20;
const MAX_TERMS: usize = 400;
/// Rates closer than this (relative) are treated as equal.
const RATE_MERGE: f64 = 1e-12;

/// `F`, its closed-form `(FF)'`, and the even-dimensional target obtained by
/// appending the lowest monomial not in `(FF)'` when the dimension is odd.
#[derive(Clone)]
pub struct ClosedFormSpaces {
    pub f: FunctionSpace,
    pub g: FunctionSpace,
    pub target: FunctionSpace,
}

/// Closed-form spaces on the requested interval, or `None` for families without
/// a closed form.
pub fn closed_form_spaces(spec: &SpaceSpec) -> Result<Option<ClosedFormSpaces>> {
    if matches!(spec.family, FamilySpec::Bessel { .. }) {
        return Ok(None);
    }
    // Same validation as the sampled family.
    make_family(spec)?;
    let [a, b] = spec.interval;
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    // Degree of the monomial appended to an odd-dimensional (FF)', if any.
    let mut augment = None;
    let (f_parts, g_parts, target_parts) = match &spec.family {
        FamilySpec::Monomial { degree } => {
            let f = vec![Part::exponential(vec![0.0; degree + 1])];
            let g = vec![Part::exponential(vec![0.0; 2 * degree])];
            (f, g, None)
        }
        FamilySpec::Exponential { poly_degree, rates } => {
            let f = exponential_groups(*poly_degree, rates);
            let g = derivative_groups(&product_groups(&f));
            let g_rates = expand(&g, half);
            let target = (g_rates.len() % 2 == 1).then(|| {
                // x^{d+1} for the polynomial group P_d (x^0 when there is none).
                let d = g.iter().find(|(r, _)| *r == 0.0).map_or(0, |(_, d)| d + 1);
                augment = Some(d);
                let mut rates = g_rates.clone();
                rates.push(0.0);
                rates.sort_by(|x, y| x.total_cmp(y));
                vec![Part::exponential(rates)]
            });
            (vec![Part::exponential(expand(&f, half))], vec![Part::exponential(g_rates)], target)
        }
        FamilySpec::Trigonometric { harmonics, frequency } => {
            let theta = frequency * half;
            let z = |m: usize| (m as f64 * theta).powi(2);
            let mut even_f = vec![0.0];
            even_f.extend((1..=*harmonics).map(z));
            let odd_f: Vec<f64> = (1..=*harmonics).map(z).collect();
            let g_rates: Vec<f64> = (1..=2 * harmonics).map(z).collect();
            (vec![Part::cosine(even_f), Part::sine(odd_f)], vec![Part::cosine(g_rates.clone()), Part::sine(g_rates)], None)
        }
        FamilySpec::Bessel { .. } => return Ok(None),
    };
    let build = |parts: Vec<Part>, derived: bool, provenance: Provenance| {
        let mut series: Vec<Series> = parts.iter().flat_map(|p| p.functions(mid, half)).collect();
        // Nested leading subspaces must grow like polynomial degree for the
        // continuation, so order by the lowest power present.
        series.sort_by_key(Series::leading_power);
        let name = if derived { "g" } else { "f" };
        let basis = series.into_iter().enumerate().map(|(i, s)| BasisFunction::new(format!("{name}{i}"), 3, move |x| s.jet(x))).collect();
        FunctionSpace::new((a, b), basis, provenance)
    };
    let closed = |derived| Provenance::ClosedForm { spec: spec.clone(), derived };
    let f = build(f_parts, false, closed(false))?;
    let g = build(g_parts, true, closed(true))?;
    let target = match (target_parts, augment) {
        (Some(parts), Some(m)) => build(parts, true, Provenance::Augmented { of: Box::new(closed(true)), monomial_degree: m })?,
        _ => g.clone(),
    };
    Ok(Some(ClosedFormSpaces { f, g, target }))
}

/// Distinct rates with the largest polynomial degree attached to each.
type Groups = Vec<(f64, usize)>;

fn merge(groups: &mut Groups, rate: f64, degree: usize) {
    for g in groups.iter_mut() {
        if (g.0 - rate).abs() <= RATE_MERGE * g.0.abs().max(rate.abs()).max(1.0) {
            g.1 = g.1.max(degree);
            return;
        }
    }
    groups.push((rate, degree));
}

fn exponential_groups(poly_degree: Option<usize>, rates: &[f64]) -> Groups {
    let mut groups = Groups::new();
    if let Some(p) = poly_degree {
        groups.push((0.0, p));
    }
    for r in rates {
        merge(&mut groups, *r, 0);
    }
    groups
}

/// Rate groups spanned by all pairwise products.
fn product_groups(f: &Groups) -> Groups {
    let mut out = Groups::new();
    for (i, (r1, d1)) in f.iter().enumerate() {
        for (r2, d2) in &f[i..] {
            merge(&mut out, r1 + r2, d1 + d2);
        }
    }
    out
}

/// Differentiation keeps `x^k e^{rx}` groups for `r != 0` and lowers the
/// polynomial degree of the `r = 0` group by one.
fn derivative_groups(products: &Groups) -> Groups {
    products.iter().filter_map(|&(r, d)| if r == 0.0 { d.checked_sub(1).map(|d| (r, d)) } else { Some((r, d)) }).collect()
}

/// Rate multiset in the reference coordinate, sorted so coincident rates sit
/// together.
fn expand(groups: &Groups, half: f64) -> Vec<f64> {
    let mut rates: Vec<f64> = groups.iter().flat_map(|&(r, d)| std::iter::repeat_n(r * half, d + 1)).collect();
    rates.sort_by(|x, y| x.total_cmp(y));
    rates
}

/// One block of divided-difference functions: `Σ_j a_j s^{step*j + shift}`
/// differenced over `nodes`.
struct Part {
    nodes: Vec<f64>,
    step: usize,
    shift: usize,
    coeff: fn(usize) -> f64,
}

impl Part {
    /// `e^{μ s}`: `a_j = 1/j!`.
    fn exponential(nodes: Vec<f64>) -> Self {
        Part { nodes, step: 1, shift: 0, coeff: |j| 1.0 / factorial(j) }
    }

    /// `cos(s √z)`: `a_j = (-1)^j/(2j)!`.
    fn cosine(nodes: Vec<f64>) -> Self {
        Part { nodes, step: 2, shift: 0, coeff: |j| sign(j) / factorial(2 * j) }
    }

    /// `sin(s √z)/√z`: `a_j = (-1)^j/(2j+1)!`.
    fn sine(nodes: Vec<f64>) -> Self {
        Part { nodes, step: 2, shift: 1, coeff: |j| sign(j) / factorial(2 * j + 1) }
    }

    /// Power-series coefficients of `[z_1..z_k] f` for `k = 1..=nodes.len()`.
    fn functions(&self, mid: f64, half: f64) -> Vec<Series> {
        let n = self.nodes.len();
        let r = self.nodes.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        // h[k][d] = h_d(z_1..z_k), complete homogeneous symmetric polynomials.
        let mut h = vec![vec![0.0; MAX_TERMS]; n + 1];
        h[0][0] = 1.0;
        for k in 1..=n {
            let z = self.nodes[k - 1];
            h[k][0] = 1.0;
            for d in 1..MAX_TERMS {
                h[k][d] = h[k - 1][d] + z * h[k][d - 1];
            }
        }
        (1..=n)
            .map(|k| {
                let mut coeffs = Vec::new();
                let mut peak: f64 = 0.0;
                for j in (k - 1)..MAX_TERMS {
                    let d = j + 1 - k;
                    let a = (self.coeff)(j);
                    let c = a * h[k][d];
                    let power = self.step * j + self.shift;
                    if coeffs.len() <= power {
                        coeffs.resize(power + 1, 0.0);
                    }
                    coeffs[power] = c;
                    peak = peak.max(c.abs());
                    // |h_d| <= C(d+k-1, k-1) r^d bounds every later term.
                    let bound = a.abs() * binomial(d + k - 1, k - 1) * r.powi(d as i32);
                    if d > 2 && bound < SERIES_TAIL * peak {
                        break;
                    }
                }
                Series(coeffs, mid, half)
            })
            .collect()
    }
}

fn sign(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |p, k| p * k as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |p, i| p * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ c_k s^k` with `s = (x - mid)/half`.
#[derive(Clone)]
struct Series(Vec<f64>, f64, f64);

impl Series {
    fn leading_power(&self) -> usize {
        self.0.iter().position(|c| *c != 0.0).unwrap_or(usize::MAX)
    }

    fn jet(&self, x: f64) -> Jet {
        let (c, mid, half) = (&self.0, self.1, self.2);
        let s = (x - mid) / half;
        // Horner for the value and first three derivatives at once.
        let mut j = [0.0; 4];
        for &ck in c.iter().rev() {
            j[3] = j[3] * s + 3.0 * j[2];
            j[2] = j[2] * s + 2.0 * j[1];
            j[1] = j[1] * s + j[0];
            j[0] = j[0] * s + ck;
        }
        [j[0], j[1] / half, j[2] / (half * half), j[3] / (half * half * half)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{product_derivative_space, sample_matrix};
    use nalgebra::DMatrix;

    /// Largest relative residual of projecting `b`'s samples onto `a`'s span.
    fn span_gap(a: &FunctionSpace, b: &FunctionSpace) -> f64 {
        let sa = sample_matrix(a);
        let rows = sa.nrows();
        let (lo, hi) = a.interval();
        let (x, w) = crate::legendre::gauss_legendre_on(rows, lo, hi);
        let sb = DMatrix::from_fn(rows, b.dim(), |k, j| w[k].sqrt() * b.basis()[j].value_at(x[k]));
        let svd = sa.svd(true, false);
        let u = svd.u.unwrap();
        let top = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-13 * top).collect();
        let ur = DMatrix::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])]);
        (0..b.dim())
            .map(|j| {
                let col = sb.column(j).into_owned();
                (&col - &ur * (ur.transpose() * &col)).norm() / col.norm()
            })
            .fold(0.0, f64::max)
    }

    fn check_family(family: FamilySpec, a: f64, b: f64) {
        let spec = SpaceSpec::new(family, a, b);
        let ClosedFormSpaces { f, g, .. } = closed_form_spaces(&spec).unwrap().unwrap();
        let f_std = make_family(&spec).unwrap();
        let g_std = product_derivative_space(&f_std).unwrap();
        assert_eq!(f.dim(), f_std.dim());
        assert_eq!(g.dim(), g_std.dim());
        let gaps = [span_gap(&f, &f_std), span_gap(&f_std, &f), span_gap(&g, &g_std), span_gap(&g_std, &g)];
        assert!(gaps.iter().all(|g| *g < 1e-9), "{spec:?} {gaps:?}");
    }

    #[test]
    fn spans_match_generic_route() {
        check_family(FamilySpec::Exponential { poly_degree: Some(1), rates: vec![1.0] }, 0.0, 1.0);
        check_family(FamilySpec::Exponential { poly_degree: Some(1), rates: vec![10.0] }, 0.0, 1.0);
        check_family(FamilySpec::Exponential { poly_degree: None, rates: vec![-1.0, 2.0] }, -1.0, 1.0);
        check_family(FamilySpec::Trigonometric { harmonics: 2, frequency: std::f64::consts::PI }, 0.0, 1.0);
        check_family(FamilySpec::Trigonometric { harmonics: 1, frequency: 2.0 }, 0.3, 0.9);
        check_family(FamilySpec::Monomial { degree: 4 }, -0.5, 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = SpaceSpec::new(FamilySpec::Trigonometric { harmonics: 2, frequency: 3.0 }, 0.0, 0.5);
        let ClosedFormSpaces { f, g, target } = closed_form_spaces(&spec).unwrap().unwrap();
        for space in [&f, &g, &target] {
            for bf in space.basis() {
                for x in [0.05, 0.2, 0.41] {
                    let j = bf.jet(x);
                    let h = 1e-5;
                    for k in 0..3 {
                        let fd = (bf.jet(x + h)[k] - bf.jet(x - h)[k]) / (2.0 * h);
                        assert!((fd - j[k + 1]).abs() < 1e-5 * (1.0 + j[k + 1].abs()), "{} d{k} at {x}", bf.id());
                    }
                }
            }
        }
    }

    #[test]
    fn short_interval_stays_independent() {
        let spec = SpaceSpec::new(FamilySpec::Trigonometric { harmonics: 2, frequency: std::f64::consts::PI }, 0.0, 1.0 / 64.0);
        let g = closed_form_spaces(&spec).unwrap().unwrap().g;
        assert_eq!(crate::funcspace::numerical_rank(&sample_matrix(&g.to_reference().unwrap())), 8);
    }

    #[test]
    fn coalescing_rates_tend_to_monomials() {
        let spec = SpaceSpec::new(FamilySpec::Exponential { poly_degree: Some(1), rates: vec![1e-9] }, -1.0, 1.0);
        let f = closed_form_spaces(&spec).unwrap().unwrap().f;
        let x = 0.7;
        assert!((f.basis()[2].value_at(x) - x * x / 2.0).abs() < 1e-9);
    }

    #[test]
    fn example_one_augmented_with_square() {
        let spec = SpaceSpec::new(FamilySpec::Exponential { poly_degree: Some(1), rates: vec![1.0] }, 0.0, 1.0);
        let c = closed_form_spaces(&spec).unwrap().unwrap();
        assert_eq!((c.g.dim(), c.target.dim()), (5, 6));
        let generic = product_derivative_space(&make_family(&spec).unwrap()).unwrap();
        let with_square = generic.with_appended(crate::funcspace::monomial(2), Provenance::Explicit { ids: vec![] }).unwrap();
        assert!(span_gap(&c.target, &with_square) < 1e-9 && span_gap(&with_square, &c.target) < 1e-9);
    }

    #[test]
    fn bessel_has_no_closed_form() {
        let spec = SpaceSpec::new(FamilySpec::Bessel { orders: [0, 2] }, 0.0, 5.0);
        assert!(closed_form_spaces(&spec).unwrap().is_none());
    }
}
