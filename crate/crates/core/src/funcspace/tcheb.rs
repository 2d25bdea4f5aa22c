use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FunctionSpace;

pub const FAIL_THRESHOLD: f64 = 1e-13;
pub const PASS_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TchebyshevReport {
    pub tested_grids: usize,
    pub min_abs_det: f64,
    pub verdict: Verdict,
    /// Node set attaining the smallest scaled determinant.
    pub worst_nodes: Vec<f64>,
}

/// Signed collocation determinant divided by the node Vandermonde product, in
/// log form: `(sign, ln|det M| - Σ ln(x_j - x_i))`. The quotient is invariant
/// under changes of basis up to a constant factor and stays finite as nodes
/// coalesce for extended Tchebyshev systems.
fn scaled_det(space: &FunctionSpace, nodes: &[f64]) -> (f64, f64) {
    let m = nodes.len();
    let (vals, _) = space.collocation(nodes);
    // Row equilibration: divide each row by its largest entry.
    let mut mat = vals;
    let mut log_scale = 0.0;
    for i in 0..m {
        let s = mat.row(i).amax();
        if s == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        mat.row_mut(i).scale_mut(1.0 / s);
        log_scale += s.ln();
    }
    let lu = mat.lu();
    let u = lu.u();
    let p = lu.p();
    let mut sign = if p.determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let mut log_det = log_scale;
    for i in 0..m {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return (0.0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        log_det += d.abs().ln();
    }
    let mut log_vdm = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            log_vdm += (nodes[j] - nodes[i]).ln();
        }
    }
    (sign, log_det - log_vdm)
}

fn random_nodes(rng: &mut ChaCha8Rng, m: usize, a: f64, b: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..m).map(|_| rng.random_range(a..=b)).collect();
    x.sort_by(f64::total_cmp);
    x
}

fn distinct(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] > w[0])
}

/// Heuristic check that the collocation determinant of `space` never vanishes
/// on ordered distinct node sets. Random sets, sets containing both endpoints
/// and sets with a nearly coincident pair are sampled; a sign change between
/// two sets is followed by bisection along the segment joining them, which
/// exposes the zero the sign change implies.
pub fn tchebyshev_screen(space: &FunctionSpace, trials: usize, seed: u64) -> TchebyshevReport {
    let m = space.dim();
    let (a, b) = space.interval();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut grids: Vec<Vec<f64>> = Vec::with_capacity(trials + trials / 2);
    for _ in 0..trials {
        grids.push(random_nodes(&mut rng, m, a, b));
    }
    for _ in 0..trials / 4 {
        let mut x = random_nodes(&mut rng, m, a, b);
        x[0] = a;
        x[m - 1] = b;
        if m == 1 {
            x[0] = if rng.random_bool(0.5) { a } else { b };
        }
        x.sort_by(f64::total_cmp);
        grids.push(x);
    }
    if m >= 2 {
        for _ in 0..trials / 4 {
            let mut x = random_nodes(&mut rng, m, a, b);
            let k = rng.random_range(0..m - 1);
            x[k + 1] = x[k] + 1e-6 * (b - a) * rng.random_range(0.1..1.0);
            x.sort_by(f64::total_cmp);
            grids.push(x);
        }
    }

    let mut samples: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let mut reference: Option<(f64, Vec<f64>)> = None;
    let mut bisected = false;
    for x in grids {
        if !distinct(&x) {
            continue;
        }
        let (sign, log_v) = scaled_det(space, &x);
        samples.push((x.clone(), sign, log_v));
        if sign == 0.0 || bisected {
            continue;
        }
        let Some((s0, x0)) = &reference else {
            reference = Some((sign, x));
            continue;
        };
        if sign != *s0 {
            // Bisect along the convex path between the two node sets; every
            // point on it is an ordered distinct set.
            let s0 = *s0;
            let x0 = x0.clone();
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let xm: Vec<f64> = x0.iter().zip(&x).map(|(p, q)| (1.0 - mid) * p + mid * q).collect();
                let (sm, lv) = scaled_det(space, &xm);
                samples.push((xm, sm, lv));
                if sm == 0.0 || hi - lo < 1e-15 {
                    break;
                }
                if sm == s0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            bisected = true;
        }
    }

    // Magnitudes are reported relative to the largest one observed.
    let log_max = samples.iter().filter(|s| s.1 != 0.0).map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let mut min_abs = f64::INFINITY;
    let mut worst = Vec::new();
    for (x, sign, log_v) in &samples {
        let v = if *sign == 0.0 || !log_max.is_finite() { 0.0 } else { (log_v - log_max).exp() };
        if v < min_abs {
            min_abs = v;
            worst = x.clone();
        }
    }
    let tested = samples.len();

    let verdict = if min_abs < FAIL_THRESHOLD {
        Verdict::Fail
    } else if min_abs > PASS_THRESHOLD {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    TchebyshevReport { tested_grids: tested, min_abs_det: min_abs, verdict, worst_nodes: worst }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{make_family, monomial, BasisFunction, FamilySpec, SpaceSpec};

    #[test]
    fn cubic_monomials_pass() {
        let s = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 3 }, -1.0, 1.0)).unwrap();
        let r = tchebyshev_screen(&s, 100, 7);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.min_abs_det > 0.999);
    }

    #[test]
    fn even_pair_fails() {
        let sq = BasisFunction::new("x^2", 3, |x| [x * x, 2.0 * x, 2.0, 0.0]);
        let s = FunctionSpace::explicit((-1.0, 1.0), vec![monomial(0), sq]).unwrap();
        let r = tchebyshev_screen(&s, 100, 7);
        assert_eq!(r.verdict, Verdict::Fail);
        let w = &r.worst_nodes;
        assert!((w[0] + w[1]).abs() < 1e-6);
    }

    #[test]
    fn deterministic_for_seed() {
        let s = make_family(&SpaceSpec::new(FamilySpec::Trigonometric { harmonics: 1, frequency: 1.0 }, 0.0, 1.0)).unwrap();
        assert_eq!(tchebyshev_screen(&s, 50, 3), tchebyshev_screen(&s, 50, 3));
    }
}
