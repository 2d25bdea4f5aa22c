//! Published reference tables, transcribed digit for digit.
//!
//! All exponential fixtures belong to `F = span{1, x, eˣ}` on `[0, 1]`,
//! with `(FF)' = span{1, x, eˣ, xeˣ, e²ˣ}`. The Bessel table belongs to
//! `F = span{J_0, …, J_9}` on `[0, 25]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fsbp::FsbpOperator;
use crate::funcspace::{FamilySpec, SpaceSpec};

/// Nodes, weights and (when printed) the differentiation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedTable {
    pub name: String,
    pub space: SpaceSpec,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    /// Digits after the decimal point in the printed values.
    pub printed_decimals: u32,
}

impl PublishedTable {
    pub fn operator(&self) -> Option<Result<FsbpOperator>> {
        let d = self.d.as_ref()?;
        let n = d.len();
        let m = DMatrix::from_fn(n, n, |i, j| d[i][j]);
        Some(FsbpOperator::from_published(self.nodes.clone(), self.weights.clone(), m, self.name.clone()))
    }
}

pub fn exp_space() -> SpaceSpec {
    SpaceSpec::new(FamilySpec::Exponential { poly_degree: Some(1), rates: vec![1.0] }, 0.0, 1.0)
}

/// The 4-point generalised Gauss–Lobatto rule and its operator.
pub fn exp_gglq() -> PublishedTable {
    PublishedTable {
        name: "exp-gglq-4".into(),
        space: exp_space(),
        nodes: vec![0.0, 0.2956452974, 0.7423537958, 1.0],
        weights: vec![0.0914828668, 0.4341375639, 0.3987262252, 0.0756533441],
        d: Some(vec![
            vec![-5.465504277, 7.365125959, -2.802901094, 0.903279412],
            vec![-1.552003083, 0.0, 2.142484824, -0.590481741],
            vec![0.643091453, -2.332761387, 0.0, 1.689669934],
            vec![-1.092279411, 3.388486098, -8.905299859, 6.609093173],
        ]),
        printed_decimals: 10,
    }
}

/// The 5-point equally spaced least-squares rule and its operator.
pub fn exp_equispaced() -> PublishedTable {
    PublishedTable {
        name: "exp-equispaced-5".into(),
        space: exp_space(),
        nodes: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        weights: vec![0.0759763872, 0.3620888878, 0.1244746618, 0.3608784643, 0.0765815990],
        d: Some(vec![
            vec![-6.528983553, 8.521455370, -0.479376527, -2.489678844, 0.976583554],
            vec![-1.808328128, 0.0, 0.890963460, 1.451385592, -0.534020924],
            vec![0.294930875, -2.583092176, 0.0, 2.569553027, -0.28139173],
            vec![0.526565695, -1.446533768, -0.883330737, 0.0, 1.803298810],
            vec![-0.984362811, 2.536533493, 0.461013497, -8.594176227, 6.580992049],
        ]),
        printed_decimals: 9,
    }
}

/// A 4-point uniform-grid operator obtained by optimisation rather than from
/// a `(FF)'`-exact rule.
pub fn exp_uniform_optimised() -> PublishedTable {
    PublishedTable {
        name: "exp-uniform-optimised-4".into(),
        space: exp_space(),
        nodes: vec![0.0, 0.3333333333, 0.6666666666, 1.0],
        weights: vec![0.1413079925, 0.3300510668, 0.4159300208, 0.1126686223],
        d: Some(vec![
            vec![-3.538370274, 3.606205594, 0.4025982272, -0.4704099266],
            vec![-1.543960084, 0.0, 1.631806089, -0.08783997038],
            vec![-0.1367786512, -1.294879700, 0.0, 1.431657018],
            vec![0.5899839814, 0.2573181010, -5.285137255, 4.437792793],
        ]),
        printed_decimals: 10,
    }
}

/// The 25-point Gauss–Lobatto-type rule for `J_0..J_9` on `[0, 25]`.
pub fn bessel_gglq() -> PublishedTable {
    PublishedTable {
        name: "bessel-gglq-25".into(),
        space: SpaceSpec::new(FamilySpec::Bessel { orders: [0, 9] }, 0.0, 25.0),
        nodes: vec![
            0.0,
            0.1708613339,
            0.5661606569,
            1.166443811,
            1.954074975,
            2.905578711,
            3.993567909,
            5.198004650,
            6.495279513,
            7.897105635,
            9.334639871,
            10.680527,
            12.14501738,
            13.78368019,
            15.30246428,
            16.63807436,
            18.11924712,
            19.49873798,
            20.68293671,
            21.87902576,
            22.83987635,
            23.70798388,
            24.35339492,
            24.80987539,
            25.0,
        ],
        weights: vec![
            0.04674109541,
            0.2857413813,
            0.5014293903,
            0.6963842628,
            0.8750817726,
            1.022716109,
            1.150946736,
            1.252002006,
            1.347451304,
            1.446405823,
            1.393772578,
            1.350167740,
            1.586926028,
            1.634993556,
            1.373778538,
            1.392918441,
            1.503655935,
            1.226087151,
            1.214279320,
            1.094192400,
            0.8957497727,
            0.7768641260,
            0.5561938824,
            0.3170472565,
            0.05847348825,
        ],
        d: None,
        printed_decimals: 9,
    }
}

pub fn all() -> Vec<PublishedTable> {
    vec![exp_gglq(), exp_equispaced(), exp_uniform_optimised(), bessel_gglq()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_are_consistent() {
        for t in all() {
            assert_eq!(t.nodes.len(), t.weights.len(), "{}", t.name);
            assert!(t.nodes.windows(2).all(|w| w[1] > w[0]), "{}", t.name);
            assert_eq!(t.nodes[0], t.space.interval[0]);
            assert_eq!(*t.nodes.last().unwrap(), t.space.interval[1]);
            if let Some(d) = &t.d {
                assert!(d.iter().all(|r| r.len() == t.nodes.len()));
            }
        }
    }

    fn exact_tables() -> Vec<PublishedTable> {
        vec![exp_gglq(), exp_equispaced(), bessel_gglq()]
    }

    #[test]
    fn weights_sum_to_length() {
        for t in exact_tables() {
            let len = t.space.interval[1] - t.space.interval[0];
            let s: f64 = t.weights.iter().sum();
            assert!((s - len).abs() < 1e-7 * len, "{} {s}", t.name);
        }
    }

    #[test]
    fn rows_of_d_annihilate_constants() {
        for t in exact_tables() {
            for (i, row) in t.d.iter().flatten().enumerate() {
                let s: f64 = row.iter().sum();
                assert!(s.abs() < 2e-8, "{} row {i}: {s}", t.name);
            }
        }
    }

    #[test]
    fn optimised_uniform_operator_is_not_exact() {
        let t = exp_uniform_optimised();
        let s: f64 = t.weights.iter().sum();
        assert!((s - 0.9999577024).abs() < 1e-12);
        let row0: f64 = t.d.unwrap()[0].iter().sum();
        assert!((row0 - 2.36206e-5).abs() < 1e-10);
    }
}
