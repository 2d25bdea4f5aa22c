//! Finite-dimensional function spaces on an interval.
//!
//! Every basis function carries an analytic *jet* `[f, f', f'', f''']`; spaces
//! derived from others (products, orthonormal combinations, affine maps)
//! propagate jets exactly and never differentiate numerically. Entries past a
//! function's `order` are `NaN`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[cfg(feature = "bessel")]
mod bessel;
mod closed;
mod derive;
mod family;
mod ortho;
mod tcheb;

pub use closed::{closed_form_spaces, ClosedFormSpaces};
pub use derive::{augment_to_even, product_derivative_space};
pub use family::{make_family, FamilySpec, SpaceSpec};
pub use ortho::{numerical_rank, orthonormalize, sample_matrix, RANK_CUTOFF};
pub use tcheb::{tchebyshev_screen, TchebyshevReport, Verdict};

/// Value and first three derivatives at a point.
pub type Jet = [f64; 4];

type JetFn = Arc<dyn Fn(f64) -> Jet + Send + Sync>;

#[derive(Clone)]
pub struct BasisFunction {
    id: String,
    jet: JetFn,
    order: usize,
    coeffs: Option<Vec<f64>>,
}

impl BasisFunction {
    /// `order` is the highest derivative the jet provides exactly (1..=3).
    pub fn new<F>(id: impl Into<String>, order: usize, jet: F) -> Self
    where
        F: Fn(f64) -> Jet + Send + Sync + 'static,
    {
        Self { id: id.into(), jet: Arc::new(jet), order: order.min(3), coeffs: None }
    }

    /// Function given by a value and a first derivative only.
    pub fn from_pair<V, D>(id: impl Into<String>, value: V, deriv: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(id, 1, move |x| [value(x), deriv(x), f64::NAN, f64::NAN])
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficients over the parent basis when this function is a linear combination.
    pub fn coeffs(&self) -> Option<&[f64]> {
        self.coeffs.as_deref()
    }

    pub fn jet(&self, x: f64) -> Jet {
        (self.jet)(x)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        (self.jet)(x)[0]
    }

    pub fn deriv_at(&self, x: f64) -> f64 {
        (self.jet)(x)[1]
    }
}

impl fmt::Debug for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisFunction").field("id", &self.id).field("order", &self.order).finish()
    }
}

/// Structured record of how a space was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Provenance {
    Family {
        spec: SpaceSpec,
    },
    /// Closed-form divided-difference basis of `F` (or of `(FF)'` when `derived`).
    ClosedForm {
        spec: SpaceSpec,
        derived: bool,
    },
    Explicit {
        ids: Vec<String>,
    },
    ProductDerivative {
        of: Box<Provenance>,
    },
    Augmented {
        of: Box<Provenance>,
        monomial_degree: usize,
    },
    Orthonormalized {
        of: Box<Provenance>,
    },
    Mapped {
        of: Box<Provenance>,
        interval: (f64, f64),
    },
    Leading {
        of: Box<Provenance>,
        len: usize,
    },
}

impl Provenance {
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("provenance serialises");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Linear-combination backing used for fast batch evaluation.
#[derive(Clone)]
struct Combination {
    parent: Arc<FunctionSpace>,
    coeffs: DMatrix<f64>,
}

/// Affine reparametrisation `x = mid + half * s` backing a mapped space.
#[derive(Clone)]
struct Mapping {
    parent: Arc<FunctionSpace>,
    mid: f64,
    half: f64,
}

#[derive(Clone)]
pub struct FunctionSpace {
    interval: (f64, f64),
    basis: Vec<BasisFunction>,
    provenance: Provenance,
    combination: Option<Combination>,
    mapping: Option<Mapping>,
}

impl fmt::Debug for FunctionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionSpace").field("interval", &self.interval).field("basis", &self.basis.iter().map(|b| b.id.as_str()).collect::<Vec<_>>()).finish()
    }
}

pub(crate) fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::DegenerateInterval { a, b })
    }
}

impl FunctionSpace {
    pub fn new(interval: (f64, f64), basis: Vec<BasisFunction>, provenance: Provenance) -> Result<Self> {
        check_interval(interval.0, interval.1)?;
        if basis.is_empty() {
            return Err(Error::DimensionMismatch("a function space needs at least one basis function".into()));
        }
        Ok(Self { interval, basis, provenance, combination: None, mapping: None })
    }

    /// A space from caller-supplied functions.
    pub fn explicit(interval: (f64, f64), basis: Vec<BasisFunction>) -> Result<Self> {
        let ids = basis.iter().map(|b| b.id.clone()).collect();
        Self::new(interval, basis, Provenance::Explicit { ids })
    }

    /// Space spanned by `coeffs * parent.basis` (one row per new function).
    pub fn linear_combination(parent: &FunctionSpace, coeffs: DMatrix<f64>, provenance: Provenance, ids: Vec<String>) -> Result<Self> {
        if coeffs.ncols() != parent.dim() || coeffs.nrows() != ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix {}x{} for parent of dimension {} and {} ids",
                coeffs.nrows(),
                coeffs.ncols(),
                parent.dim(),
                ids.len()
            )));
        }
        let parent = Arc::new(parent.clone());
        let order = parent.min_order();
        let basis = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| {
                let row: Vec<f64> = coeffs.row(i).iter().cloned().collect();
                let p = Arc::clone(&parent);
                let c = row.clone();
                let mut f = BasisFunction::new(id, order, move |x| {
                    let mut acc = [0.0; 4];
                    for (cj, g) in c.iter().zip(&p.basis) {
                        if *cj != 0.0 {
                            let j = g.jet(x);
                            for k in 0..4 {
                                acc[k] += cj * j[k];
                            }
                        }
                    }
                    acc
                });
                f.coeffs = Some(row);
                f
            })
            .collect();
        let mut space = Self::new(parent.interval, basis, provenance)?;
        space.combination = Some(Combination { parent, coeffs });
        Ok(space)
    }

    /// Coefficients (one row per function, one column per parent function)
    /// when the space is a linear combination of another.
    pub fn combination_coeffs(&self) -> Option<&DMatrix<f64>> {
        self.combination.as_ref().map(|c| &c.coeffs)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn basis(&self) -> &[BasisFunction] {
        &self.basis
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn fingerprint(&self) -> String {
        self.provenance.fingerprint()
    }

    /// Lowest derivative order available across the basis.
    pub fn min_order(&self) -> usize {
        self.basis.iter().map(|b| b.order).min().unwrap_or(0)
    }

    /// Jets of every basis function at `x`.
    pub fn jets_into(&self, x: f64, out: &mut [Jet]) {
        debug_assert_eq!(out.len(), self.dim());
        if let Some(c) = &self.combination {
            let mut parent = vec![[0.0; 4]; c.parent.dim()];
            c.parent.jets_into(x, &mut parent);
            for (i, o) in out.iter_mut().enumerate() {
                *o = [0.0; 4];
                for (j, pj) in parent.iter().enumerate() {
                    let cij = c.coeffs[(i, j)];
                    if cij != 0.0 {
                        for k in 0..4 {
                            o[k] += cij * pj[k];
                        }
                    }
                }
            }
        } else if let Some(m) = &self.mapping {
            m.parent.jets_into(m.mid + m.half * x, out);
            let scale = [1.0, m.half, m.half * m.half, m.half * m.half * m.half];
            for o in out.iter_mut() {
                for k in 0..4 {
                    o[k] *= scale[k];
                }
            }
        } else {
            for (o, f) in out.iter_mut().zip(&self.basis) {
                *o = f.jet(x);
            }
        }
    }

    pub fn jets(&self, x: f64) -> Vec<Jet> {
        let mut out = vec![[0.0; 4]; self.dim()];
        self.jets_into(x, &mut out);
        out
    }

    /// Values of every basis function at `x`.
    pub fn values_into(&self, x: f64, out: &mut [f64]) {
        let mut jets = vec![[0.0; 4]; self.dim()];
        self.jets_into(x, &mut jets);
        for (o, j) in out.iter_mut().zip(&jets) {
            *o = j[0];
        }
    }

    /// Collocation matrices (values, derivatives): one row per node, one column per basis function.
    pub fn collocation(&self, nodes: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut vals = DMatrix::zeros(nodes.len(), n);
        let mut ders = DMatrix::zeros(nodes.len(), n);
        let mut jets = vec![[0.0; 4]; n];
        for (i, &x) in nodes.iter().enumerate() {
            self.jets_into(x, &mut jets);
            for (j, jet) in jets.iter().enumerate() {
                vals[(i, j)] = jet[0];
                ders[(i, j)] = jet[1];
            }
        }
        (vals, ders)
    }

    /// The same functions reparametrised onto `[lo, hi]`: `g̃(s) = g(x(s))`
    /// with `x` the affine map taking `[lo, hi]` onto this space's interval.
    pub fn mapped_to(&self, lo: f64, hi: f64) -> Result<FunctionSpace> {
        check_interval(lo, hi)?;
        let (a, b) = self.interval;
        let half = (b - a) / (hi - lo);
        let mid = a - half * lo;
        let parent = Arc::new(self.clone());
        let basis = self
            .basis
            .iter()
            .map(|f| {
                let g = f.clone();
                BasisFunction::new(f.id.clone(), f.order, move |s| {
                    let j = g.jet(mid + half * s);
                    [j[0], half * j[1], half * half * j[2], half * half * half * j[3]]
                })
            })
            .collect();
        let mut space = FunctionSpace::new((lo, hi), basis, Provenance::Mapped { of: Box::new(self.provenance.clone()), interval: (lo, hi) })?;
        space.mapping = Some(Mapping { parent, mid, half });
        Ok(space)
    }

    /// The same functions on the reference interval [-1, 1].
    pub fn to_reference(&self) -> Result<FunctionSpace> {
        self.mapped_to(-1.0, 1.0)
    }

    /// The subspace spanned by the first `len` basis functions.
    pub fn leading(&self, len: usize) -> Result<FunctionSpace> {
        if len == 0 || len > self.dim() {
            return Err(Error::DimensionMismatch(format!("cannot take {len} of {} functions", self.dim())));
        }
        if len == self.dim() {
            return Ok(self.clone());
        }
        let provenance = Provenance::Leading { of: Box::new(self.provenance.clone()), len };
        if let Some(c) = &self.combination {
            let ids = self.basis[..len].iter().map(|b| b.id.clone()).collect();
            return FunctionSpace::linear_combination(&c.parent, c.coeffs.rows(0, len).into_owned(), provenance, ids);
        }
        FunctionSpace::new(self.interval, self.basis[..len].to_vec(), provenance)
    }

    /// Appends one function (used for augmentation).
    pub fn with_appended(&self, f: BasisFunction, provenance: Provenance) -> Result<FunctionSpace> {
        let mut basis = self.basis.clone();
        basis.push(f);
        FunctionSpace::new(self.interval, basis, provenance)
    }
}

/// Monomial `x^d` with its exact jet.
pub(crate) fn monomial(d: usize) -> BasisFunction {
    let id = match d {
        0 => "1".to_string(),
        1 => "x".to_string(),
        _ => format!("x^{d}"),
    };
    BasisFunction::new(id, 3, move |x| {
        let mut jet = [0.0; 4];
        for (k, slot) in jet.iter_mut().enumerate() {
            if k <= d {
                let falling: f64 = (0..k).map(|i| (d - i) as f64).product();
                *slot = falling * x.powi((d - k) as i32);
            }
        }
        jet
    })
}
