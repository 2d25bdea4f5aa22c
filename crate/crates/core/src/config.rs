//! Run configuration shared by every command. Every field has a default
//! that [`Config::resolved`] writes out, so an echoed config reproduces a run
//! on its own.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsbp::SbpTolerances;
use crate::funcspace::SpaceSpec;
use crate::gauss::SolveOptions;
use crate::ibvp::{AdvDiffSats, AdvectionSats, MmsCase, OperatorSource, PdeParams, Problem, Scheme, StudyOptions, TimeOptions};
use crate::pipeline::{BasisRoute, NodeMode};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// The function space `F` for `rule`, `operator` and `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default)]
    pub rule: RuleConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub sbp: SbpTolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    #[serde(default = "default_mode")]
    pub mode: NodeMode,
    /// Node count for the equispaced and classical modes.
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default)]
    pub route: BasisRoute,
}

fn default_mode() -> NodeMode {
    NodeMode::Gglq
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self { mode: default_mode(), nodes: None, route: BasisRoute::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeKind {
    Advection,
    AdvectionDiffusion,
}

/// Initial states for runs with homogeneous data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Profile {
    /// `sin(2π k x)`.
    Sine { k: f64 },
    /// `exp(−((x − centre)/width)²)`.
    Gaussian { centre: f64, width: f64 },
}

impl Profile {
    pub fn signal(self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        match self {
            Profile::Sine { k } => Arc::new(move |x| (2.0 * PI * k * x).sin()),
            Profile::Gaussian { centre, width } => Arc::new(move |x| (-((x - centre) / width).powi(2)).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CaseConfig {
    /// `e^{sin(2π(x − a t))}`.
    AdvectionWave,
    /// `(e^{ax/ε} − 1)/(e^{a/ε} − 1) e^{0.1 t}`.
    BoundaryLayer,
    ZeroData {
        initial: Profile,
    },
}

/// Free penalty choices; the rest follow from the stability relations.
/// Unset values take the standard choices and are filled in on resolution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatConfig {
    /// Advection interface penalty on the left element (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_l: Option<f64>,
    /// LDG `σ1L` (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1_l: Option<f64>,
    /// LDG `σ3L` (default −ε/2, giving `σ2L = σ4L`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma3_l: Option<f64>,
    /// LDG `σ4L` (default −ε/2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma4_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub pde: PdeKind,
    pub a: f64,
    #[serde(default)]
    pub eps: f64,
    pub final_time: f64,
    pub case: CaseConfig,
    #[serde(default)]
    pub sats: SatConfig,
    #[serde(default)]
    pub time: TimeOptions,
    /// Element operator for `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSource>,
    /// Element count for `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<usize>,
    #[serde(default = "unit_domain")]
    pub domain: (f64, f64),
}

fn unit_domain() -> (f64, f64) {
    (0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub n_totals: Vec<usize>,
    pub sources: Vec<OperatorSource>,
}

impl ProblemConfig {
    pub fn params(&self) -> PdeParams {
        PdeParams { a: self.a, eps: self.eps, final_time: self.final_time }
    }

    /// The penalties with every free choice filled in.
    pub fn scheme(&self) -> Scheme {
        let (a, eps, s) = (self.a, self.eps, self.sats);
        match self.pde {
            PdeKind::Advection => Scheme::Advection(AdvectionSats::new(a, s.sigma_l.unwrap_or(0.0))),
            PdeKind::AdvectionDiffusion => Scheme::AdvectionDiffusion(AdvDiffSats::new(
                a,
                eps,
                s.sigma1_l.unwrap_or(0.0),
                s.sigma3_l.unwrap_or(-0.5 * eps),
                s.sigma4_l.unwrap_or(-0.5 * eps),
            )),
        }
    }

    pub fn case(&self) -> Result<MmsCase> {
        match (self.case, self.pde) {
            (CaseConfig::AdvectionWave, PdeKind::Advection) => Ok(MmsCase::advection_wave(self.a)),
            (CaseConfig::BoundaryLayer, PdeKind::AdvectionDiffusion) => Ok(MmsCase::boundary_layer(self.a, self.eps)),
            (CaseConfig::ZeroData { initial }, _) => Ok(MmsCase::zero_data(initial.signal())),
            (case, pde) => Err(Error::InvalidParameter(format!("case {case:?} does not solve the {pde:?} equation"))),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let p = Problem { params: self.params(), scheme: self.scheme(), case: self.case()? };
        p.validate()?;
        if self.domain != (0.0, 1.0) && !matches!(self.case, CaseConfig::ZeroData { .. }) {
            return Err(Error::InvalidParameter("manufactured solutions are posed on [0, 1]".into()));
        }
        Ok(p)
    }

    fn resolve(&mut self) {
        match self.scheme() {
            Scheme::Advection(s) => self.sats = SatConfig { sigma_l: Some(s.sigma_l), ..SatConfig::default() },
            Scheme::AdvectionDiffusion(s) => {
                self.sats = SatConfig { sigma_l: None, sigma1_l: Some(s.sigma1_l), sigma3_l: Some(s.sigma3_l), sigma4_l: Some(s.sigma4_l) }
            }
        }
    }
}

impl Config {
    /// A copy with defaulted choices made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if let Some(p) = c.problem.as_mut() {
            p.resolve();
        }
        c
    }

    pub fn space(&self) -> Result<&SpaceSpec> {
        self.space.as_ref().ok_or_else(|| Error::InvalidParameter("config has no [space] section".into()))
    }

    pub fn problem(&self) -> Result<&ProblemConfig> {
        self.problem.as_ref().ok_or_else(|| Error::InvalidParameter("config has no [problem] section".into()))
    }

    pub fn study_options(&self) -> Result<(StudyOptions, Vec<OperatorSource>)> {
        let p = self.problem()?;
        let s = self.study.as_ref().ok_or_else(|| Error::InvalidParameter("config has no [study] section".into()))?;
        if s.n_totals.is_empty() || s.sources.is_empty() {
            return Err(Error::InvalidParameter("a study needs node counts and operator sources".into()));
        }
        let opts = StudyOptions { n_totals: s.n_totals.clone(), time: p.time.clone(), solve: self.solver.clone(), sbp: self.sbp, domain: p.domain };
        Ok((opts, s.sources.clone()))
    }

    /// Overrides the seed everywhere one is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.solver.seed = seed;
        self.sbp.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave() -> ProblemConfig {
        ProblemConfig {
            pde: PdeKind::Advection,
            a: 1.0,
            eps: 0.0,
            final_time: 1.0,
            case: CaseConfig::AdvectionWave,
            sats: SatConfig::default(),
            time: TimeOptions::default(),
            operator: None,
            elements: None,
            domain: (0.0, 1.0),
        }
    }

    #[test]
    fn defaults_become_explicit() {
        let c = Config { problem: Some(wave()), ..Config::default() };
        let r = c.resolved();
        assert_eq!(r.problem.unwrap().sats.sigma_l, Some(0.0));

        let mut p = wave();
        p.pde = PdeKind::AdvectionDiffusion;
        p.eps = 0.1;
        p.case = CaseConfig::BoundaryLayer;
        let r = Config { problem: Some(p), ..Config::default() }.resolved();
        let s = r.problem.as_ref().unwrap().sats;
        assert_eq!((s.sigma1_l, s.sigma3_l, s.sigma4_l), (Some(0.0), Some(-0.05), Some(-0.05)));
        // Resolving again changes nothing.
        assert_eq!(r.resolved(), r);
    }

    #[test]
    fn mismatched_case_is_rejected() {
        let mut p = wave();
        p.case = CaseConfig::BoundaryLayer;
        assert!(p.problem().is_err());
        let mut p = wave();
        p.sats.sigma_l = Some(0.9);
        assert!(p.problem().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = Config { problem: Some(wave()), ..Config::default() }.resolved();
        let text = serde_json::to_string(&c).unwrap();
        let back: Config = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
