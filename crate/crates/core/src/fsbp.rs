//! Diagonal-norm function-space SBP operators `D = P⁻¹Q` with `Q + Qᵀ = B`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{numerical_rank, FunctionSpace};
use crate::gauss::QuadratureRule;

/// Largest acceptable residual of the skew-part least-squares problem,
/// relative to the size of its right side.
const LSQ_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "OperatorRecord", try_from = "OperatorRecord")]
pub struct FsbpOperator {
    pub nodes: Vec<f64>,
    /// Diagonal of the norm matrix P.
    pub p: Vec<f64>,
    pub q: DMatrix<f64>,
    /// Diagonal of the boundary matrix B = diag(-1, 0, ..., 0, 1).
    pub b: Vec<f64>,
    pub d: DMatrix<f64>,
    /// Fingerprint of the space the operator differentiates exactly.
    pub space_ref: String,
    pub interval: (f64, f64),
    /// Dimension of the set of exact skew parts; zero means the operator is unique.
    pub null_space_dim: Option<usize>,
}

/// On-disk layout: dense matrices row-major, D recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OperatorRecord {
    nodes: Vec<f64>,
    p: Vec<f64>,
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
    space_ref: String,
    interval: (f64, f64),
    #[serde(default)]
    null_space_dim: Option<usize>,
}

impl From<FsbpOperator> for OperatorRecord {
    fn from(op: FsbpOperator) -> Self {
        let q = (0..op.q.nrows()).map(|i| op.q.row(i).iter().cloned().collect()).collect();
        OperatorRecord { nodes: op.nodes, p: op.p, q, b: op.b, space_ref: op.space_ref, interval: op.interval, null_space_dim: op.null_space_dim }
    }
}

impl TryFrom<OperatorRecord> for FsbpOperator {
    type Error = Error;

    fn try_from(r: OperatorRecord) -> Result<Self> {
        let n = r.nodes.len();
        if r.p.len() != n || r.b.len() != n || r.q.len() != n || r.q.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch("operator record has inconsistent sizes".into()));
        }
        let q = DMatrix::from_fn(n, n, |i, j| r.q[i][j]);
        let d = DMatrix::from_fn(n, n, |i, j| q[(i, j)] / r.p[i]);
        Ok(FsbpOperator { nodes: r.nodes, p: r.p, q, b: r.b, d, space_ref: r.space_ref, interval: r.interval, null_space_dim: r.null_space_dim })
    }
}

fn boundary(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n];
    b[0] = -1.0;
    b[n - 1] = 1.0;
    b
}

impl FsbpOperator {
    /// Operator from published nodes, weights and differentiation matrix (`Q = P D`).
    pub fn from_published(nodes: Vec<f64>, weights: Vec<f64>, d: DMatrix<f64>, space_ref: impl Into<String>) -> Result<Self> {
        let n = nodes.len();
        if weights.len() != n || d.nrows() != n || d.ncols() != n || n < 2 {
            return Err(Error::DimensionMismatch("published operator sizes disagree".into()));
        }
        let q = DMatrix::from_fn(n, n, |i, j| weights[i] * d[(i, j)]);
        Ok(Self { interval: (nodes[0], nodes[n - 1]), b: boundary(n), nodes, p: weights, q, d, space_ref: space_ref.into(), null_space_dim: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `D u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (&self.d * DVector::from_column_slice(u)).iter().cloned().collect()
    }
}

/// Assembles `Q = B/2 + S` with `S` skew-symmetric and exact on `F`
/// (`S F = P F_x - B F / 2`), choosing the minimum-norm `S` when several exist.
pub fn build_operator(f: &FunctionSpace, rule: &QuadratureRule) -> Result<FsbpOperator> {
    let n = rule.nodes.len();
    let k = f.dim();
    if !rule.closed {
        return Err(Error::InvalidParameter("FSBP operators need a closed rule".into()));
    }
    if let Some((x, w)) = rule.nodes.iter().zip(&rule.weights).find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::NonPositiveWeight { node: *x, weight: *w });
    }
    if !rule.certificate.is_valid() {
        return Err(Error::InconsistentRule(rule.certificate.max_abs_error));
    }
    if k > n {
        return Err(Error::RankDeficient(format!("{k} basis functions on {n} nodes")));
    }
    let (fv, fx) = f.collocation(&rule.nodes);
    if numerical_rank(&fv) < k {
        return Err(Error::RankDeficient("collocation matrix of F at the nodes".into()));
    }
    let b = boundary(n);
    let r = DMatrix::from_fn(n, k, |i, c| rule.weights[i] * fx[(i, c)] - 0.5 * b[i] * fv[(i, c)]);

    // Unknowns: strictly lower entries s_ij (i > j) with S_ij = s, S_ji = -s.
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let mut a = DMatrix::zeros(n * k, pairs.len());
    for (col, &(i, j)) in pairs.iter().enumerate() {
        for c in 0..k {
            a[(i * k + c, col)] += fv[(j, c)];
            a[(j * k + c, col)] -= fv[(i, c)];
        }
    }
    let rhs = DVector::from_fn(n * k, |row, _| r[(row / k, row % k)]);
    let (s, rank) = if pairs.is_empty() {
        (DVector::zeros(0), 0)
    } else {
        let svd = a.clone().svd(true, true);
        let top = svd.singular_values.max();
        let eps = 1e-12 * top;
        let rank = svd.singular_values.iter().filter(|&&v| v > eps).count();
        let s = svd.solve(&rhs, eps).map_err(|e| Error::RankDeficient(e.into()))?;
        (s, rank)
    };
    let residual = if pairs.is_empty() { rhs.amax() } else { (&a * &s - &rhs).amax() };
    if residual > LSQ_RESIDUAL * rhs.amax().max(1.0) {
        return Err(Error::InconsistentRule(residual));
    }

    let mut q = DMatrix::zeros(n, n);
    for (col, &(i, j)) in pairs.iter().enumerate() {
        q[(i, j)] = s[col];
        q[(j, i)] = -s[col];
    }
    for i in 0..n {
        q[(i, i)] += 0.5 * b[i];
    }
    let d = DMatrix::from_fn(n, n, |i, j| q[(i, j)] / rule.weights[i]);
    Ok(FsbpOperator {
        nodes: rule.nodes.clone(),
        p: rule.weights.clone(),
        q,
        b,
        d,
        space_ref: f.fingerprint(),
        interval: rule.interval,
        null_space_dim: Some(pairs.len() - rank),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbpTolerances {
    pub exactness: f64,
    pub skew: f64,
    pub ibp: f64,
    pub ibp_pairs: usize,
    pub seed: u64,
}

impl Default for SbpTolerances {
    fn default() -> Self {
        Self { exactness: 1e-8, skew: 1e-12, ibp: 1e-10, ibp_pairs: 100, seed: 0 }
    }
}

impl SbpTolerances {
    /// For operators read from printed tables, whose digits limit how well
    /// `Q + Qᵀ = B` and exactness can hold.
    pub fn ingested() -> Self {
        Self { exactness: 1e-6, skew: 1e-7, ibp: 1e-6, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbpVerdict {
    pub max_exactness_error: f64,
    pub max_skew_defect: f64,
    pub min_weight: f64,
    pub max_ibp_defect: f64,
    pub null_space_dim: Option<usize>,
    pub pass: bool,
}

/// Checks exactness on `F`, `Q + Qᵀ = B`, positivity of `P` and the discrete
/// integration-by-parts identity on random pairs from span `F`. IBP defects are
/// relative to `max(1, |u|∞ |v|∞)`.
pub fn verify_sbp(op: &FsbpOperator, f: &FunctionSpace, tol: &SbpTolerances) -> SbpVerdict {
    let n = op.len();
    let (fv, fx) = f.collocation(&op.nodes);
    let dfv = &op.d * &fv;
    let max_exactness_error = (dfv - &fx).amax();

    let mut skew = &op.q + op.q.transpose();
    for i in 0..n {
        skew[(i, i)] -= op.b[i];
    }
    let max_skew_defect = skew.amax();
    let min_weight = op.p.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(tol.seed);
    let mut max_ibp_defect: f64 = 0.0;
    for _ in 0..tol.ibp_pairs {
        let c = DVector::from_fn(f.dim(), |_, _| rng.random_range(-1.0..1.0));
        let e = DVector::from_fn(f.dim(), |_, _| rng.random_range(-1.0..1.0));
        let u = &fv * c;
        let v = &fv * e;
        let du = &op.d * &u;
        let dv = &op.d * &v;
        let mut lhs = 0.0;
        for i in 0..n {
            lhs += op.p[i] * (u[i] * dv[i] + du[i] * v[i]);
        }
        let boundary = u[n - 1] * v[n - 1] - u[0] * v[0];
        let scale = (u.amax() * v.amax()).max(1.0);
        max_ibp_defect = max_ibp_defect.max((lhs - boundary).abs() / scale);
    }

    let pass = max_exactness_error <= tol.exactness && max_skew_defect <= tol.skew && min_weight > 0.0 && max_ibp_defect <= tol.ibp;
    SbpVerdict { max_exactness_error, max_skew_defect, min_weight, max_ibp_defect, null_space_dim: op.null_space_dim, pass }
}

/// The operator on `[a, b]`: nodes mapped affinely, `P` scaled by the length
/// ratio, `D` by its inverse, `Q` unchanged.
pub fn scale_to_element(op: &FsbpOperator, a: f64, b: f64) -> Result<FsbpOperator> {
    crate::funcspace::check_interval(a, b)?;
    let (a0, b0) = op.interval;
    let ratio = (b - a) / (b0 - a0);
    let n = op.len();
    let mut nodes: Vec<f64> = op.nodes.iter().map(|x| a + (x - a0) * ratio).collect();
    nodes[0] = a;
    nodes[n - 1] = b;
    Ok(FsbpOperator {
        nodes,
        p: op.p.iter().map(|w| w * ratio).collect(),
        q: op.q.clone(),
        b: op.b.clone(),
        d: &op.d / ratio,
        space_ref: op.space_ref.clone(),
        interval: (a, b),
        null_space_dim: op.null_space_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{make_family, FamilySpec, SpaceSpec};
    use crate::gauss::{ingest_rule, SolveOptions};
    use crate::integrate::Weight;

    fn trapezoid() -> (FunctionSpace, FsbpOperator) {
        let f = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 1 }, 0.0, 1.0)).unwrap();
        let rule = ingest_rule(&f, &Weight::Unit, vec![0.0, 1.0], vec![0.5, 0.5], &SolveOptions::default()).unwrap();
        let op = build_operator(&f, &rule).unwrap();
        (f, op)
    }

    #[test]
    fn trapezoid_operator_is_forced() {
        let (f, op) = trapezoid();
        assert_eq!(op.p, vec![0.5, 0.5]);
        assert!((op.q.clone() - DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, 0.5])).amax() < 1e-15);
        assert!((op.d.clone() - DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 1.0])).amax() < 1e-15);
        let v = verify_sbp(&op, &f, &SbpTolerances::default());
        assert!(v.pass);
        assert!(v.max_exactness_error < 1e-14 && v.max_skew_defect < 1e-14 && v.max_ibp_defect < 1e-14);
        assert_eq!(v.null_space_dim, Some(0));
    }

    #[test]
    fn scaling_trapezoid() {
        let (_, op) = trapezoid();
        let same = scale_to_element(&op, 0.0, 1.0).unwrap();
        assert_eq!(same, op);
        let half = scale_to_element(&op, 0.0, 0.5).unwrap();
        assert_eq!(half.p, vec![0.25, 0.25]);
        assert!((half.d - DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, -2.0, 2.0])).amax() < 1e-15);
        assert!(scale_to_element(&op, 1.0, 1.0).is_err());
    }

    #[test]
    fn json_round_trip_keeps_verdict() {
        let (f, op) = trapezoid();
        let text = serde_json::to_string(&op).unwrap();
        let back: FsbpOperator = serde_json::from_str(&text).unwrap();
        assert_eq!(verify_sbp(&back, &f, &SbpTolerances::default()), verify_sbp(&op, &f, &SbpTolerances::default()));
    }

    #[test]
    fn open_rule_rejected() {
        let f = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 1 }, 0.0, 1.0)).unwrap();
        let rule = ingest_rule(&f, &Weight::Unit, vec![0.25, 0.75], vec![0.5, 0.5], &SolveOptions::default()).unwrap();
        assert!(matches!(build_operator(&f, &rule), Err(Error::InvalidParameter(_))));
    }
}
