use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_interval, monomial, BasisFunction, FunctionSpace, Provenance};
use crate::error::{Error, Result};

fn default_frequency() -> f64 {
    PI
}

/// Built-in function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `1, x, ..., x^degree`.
    Monomial { degree: usize },
    /// `1, sin(kωx), cos(kωx)` for `k = 1..=harmonics`, ω defaulting to π.
    Trigonometric {
        harmonics: usize,
        #[serde(default = "default_frequency")]
        frequency: f64,
    },
    /// `1, x, ..., x^poly_degree` followed by `e^{r x}` for each rate.
    Exponential {
        #[serde(default)]
        poly_degree: Option<usize>,
        rates: Vec<f64>,
    },
    /// Bessel functions of the first kind `J_ν` for integer `ν` in `orders[0]..=orders[1]`.
    Bessel { orders: [usize; 2] },
}

/// A family together with the interval it lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub interval: [f64; 2],
}

impl SpaceSpec {
    pub fn new(family: FamilySpec, a: f64, b: f64) -> Self {
        Self { family, interval: [a, b] }
    }
}

fn sine(k: usize, w: f64) -> BasisFunction {
    let c = k as f64 * w;
    BasisFunction::new(format!("sin({k}*{w}*x)"), 3, move |x| {
        let (s, co) = (c * x).sin_cos();
        [s, c * co, -c * c * s, -c * c * c * co]
    })
}

fn cosine(k: usize, w: f64) -> BasisFunction {
    let c = k as f64 * w;
    BasisFunction::new(format!("cos({k}*{w}*x)"), 3, move |x| {
        let (s, co) = (c * x).sin_cos();
        [co, -c * s, -c * c * co, c * c * c * s]
    })
}

fn exponential(r: f64) -> BasisFunction {
    BasisFunction::new(format!("exp({r}*x)"), 3, move |x| {
        let e = (r * x).exp();
        [e, r * e, r * r * e, r * r * r * e]
    })
}

pub fn make_family(spec: &SpaceSpec) -> Result<FunctionSpace> {
    let [a, b] = spec.interval;
    check_interval(a, b)?;
    let basis = match &spec.family {
        FamilySpec::Monomial { degree } => (0..=*degree).map(monomial).collect(),
        FamilySpec::Trigonometric { harmonics, frequency } => {
            if !frequency.is_finite() || *frequency <= 0.0 {
                return Err(Error::UnsupportedFamily(format!("trigonometric frequency {frequency}")));
            }
            let mut basis = vec![monomial(0)];
            for k in 1..=*harmonics {
                basis.push(sine(k, *frequency));
                basis.push(cosine(k, *frequency));
            }
            basis
        }
        FamilySpec::Exponential { poly_degree, rates } => {
            if rates.iter().any(|r| !r.is_finite() || *r == 0.0) {
                return Err(Error::UnsupportedFamily("exponential rates must be finite and non-zero".into()));
            }
            let mut basis: Vec<_> = poly_degree.map(|d| (0..=d).map(monomial).collect()).unwrap_or_default();
            basis.extend(rates.iter().map(|&r| exponential(r)));
            if basis.is_empty() {
                return Err(Error::UnsupportedFamily("exponential family with no functions".into()));
            }
            basis
        }
        FamilySpec::Bessel { orders } => bessel_basis(*orders)?,
    };
    FunctionSpace::new((a, b), basis, Provenance::Family { spec: spec.clone() })
}

#[cfg(feature = "bessel")]
fn bessel_basis(orders: [usize; 2]) -> Result<Vec<BasisFunction>> {
    if orders[0] > orders[1] {
        return Err(Error::UnsupportedFamily(format!("empty Bessel order range {orders:?}")));
    }
    Ok((orders[0]..=orders[1]).map(super::bessel::bessel_j).collect())
}

#[cfg(not(feature = "bessel"))]
fn bessel_basis(_orders: [usize; 2]) -> Result<Vec<BasisFunction>> {
    Err(Error::FeatureDisabled("bessel"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(space: &FunctionSpace) {
        let (a, b) = space.interval();
        for f in space.basis() {
            for i in 0..20 {
                let x = a + (b - a) * (0.025 + 0.95 * i as f64 / 19.0);
                let h = 1e-5 * (b - a);
                let fd = (f.value_at(x + h) - f.value_at(x - h)) / (2.0 * h);
                let d = f.deriv_at(x);
                assert!((fd - d).abs() <= 1e-6 * (1.0 + d.abs()), "{} at {x}: {fd} vs {d}", f.id());
            }
        }
    }

    #[test]
    fn linear_monomials() {
        let s = make_family(&SpaceSpec::new(FamilySpec::Monomial { degree: 1 }, 0.0, 1.0)).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.basis()[0].jet(0.3)[..2], [1.0, 0.0]);
        assert_eq!(s.basis()[1].jet(0.3)[..2], [0.3, 1.0]);
    }

    #[test]
    fn trig_family_has_2k_plus_1_functions() {
        let spec = SpaceSpec::new(FamilySpec::Trigonometric { harmonics: 2, frequency: PI }, 0.0, 1.0);
        let s = make_family(&spec).unwrap();
        assert_eq!(s.dim(), 5);
        assert!((s.basis()[3].value_at(0.25) - (0.5 * PI).sin()).abs() < 1e-15);
        check_derivatives(&s);
    }

    #[test]
    fn exponential_family() {
        let spec = SpaceSpec::new(FamilySpec::Exponential { poly_degree: Some(1), rates: vec![1.0] }, 0.0, 1.0);
        let s = make_family(&spec).unwrap();
        assert_eq!(s.dim(), 3);
        assert!((s.basis()[2].value_at(1.0) - 1f64.exp()).abs() < 1e-15);
        check_derivatives(&s);
    }

    #[test]
    fn degenerate_interval() {
        let spec = SpaceSpec::new(FamilySpec::Monomial { degree: 2 }, 1.0, 1.0);
        assert!(matches!(make_family(&spec), Err(Error::DegenerateInterval { .. })));
    }

    #[cfg(not(feature = "bessel"))]
    #[test]
    fn bessel_needs_feature() {
        let spec = SpaceSpec::new(FamilySpec::Bessel { orders: [0, 3] }, 0.0, 25.0);
        assert!(matches!(make_family(&spec), Err(Error::FeatureDisabled("bessel"))));
    }

    #[test]
    fn descriptor_round_trip() {
        let json = r#"{"kind":"exponential","poly_degree":1,"rates":[1.0],"interval":[0.0,1.0]}"#;
        let spec: SpaceSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.family, FamilySpec::Exponential { poly_degree: Some(1), rates: vec![1.0] });
        let trig: SpaceSpec = serde_json::from_str(r#"{"kind":"trigonometric","harmonics":1,"interval":[0,1]}"#).unwrap();
        assert_eq!(trig.family, FamilySpec::Trigonometric { harmonics: 1, frequency: PI });
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"kind":"wavelet","interval":[0,1]}"#).is_err());
    }
}
