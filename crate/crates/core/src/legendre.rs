//! Classical Legendre machinery: Gauss–Legendre grids used for sampling and
//! the Gauss–Lobatto–Legendre rule behind the `classical-gll` node mode.

use std::f64::consts::PI;

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P_n' from P_n and P_{n-1}; the endpoint limit is n(n+1)/2 * (+-1)^{n+1}.
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-14 { 0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1) } else { nf * (p0 - x * p1) / (1.0 - x * x) };
    (p1, dp)
}

/// `n`-point Gauss–Legendre nodes (ascending) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|s| mid + half * s).collect(), w.iter().map(|v| half * v).collect())
}

/// `n + 1`-point Gauss–Lobatto–Legendre rule on [-1, 1] (exact for degree `2n - 1`).
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Lobatto rule needs at least two nodes");
    let m = n + 1;
    let mut nodes = vec![0.0; m];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    // Interior nodes are the roots of P_n'. Newton on (1 - x^2) P_n'(x), whose
    // derivative is -n(n+1) P_n(x).
    for (j, node) in nodes.iter_mut().enumerate().take(n).skip(1) {
        let mut x = -(PI * j as f64 / n as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = (1.0 - x * x) * dp / (n as f64 * (n as f64 + 1.0) * p);
            x += dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        *node = x;
    }
    let denom = n as f64 * (n as f64 + 1.0);
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre_and_derivative(n, x);
            2.0 / (denom * p * p)
        })
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_gauss() {
        let (x, w) = gauss_legendre(2);
        let c = 1.0 / 3f64.sqrt();
        assert!((x[0] + c).abs() < 1e-15 && (x[1] - c).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_integrates_high_degree() {
        let (x, w) = gauss_legendre(40);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(78)).sum();
        assert!((s - 2.0 / 79.0).abs() < 1e-14);
    }

    #[test]
    fn lobatto_four_points() {
        let (x, w) = gauss_lobatto(3);
        let c = 1.0 / 5f64.sqrt();
        assert!((x[1] + c).abs() < 1e-15 && (x[2] - c).abs() < 1e-15);
        for (got, want) in w.iter().zip([1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }
}
