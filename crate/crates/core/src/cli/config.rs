//! Experiment configuration: one JSON document, every default materialized
//! on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distributions::{InstanceKind, InstanceSpec};
use crate::error::{Error, Result};
use crate::evaluation::ThetaNorm;
use crate::funcclass::ClassSpec;
use crate::learner::LearnerConfig;
use crate::oracle::{CompFormula, OracleConfig};
use crate::surrogate::{SurrogateKind, SurrogateSpec};
use crate::version_space::DisagreeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    pub kind: SurrogateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_b_constant")]
    pub b_constant: f64,
    #[serde(default)]
    pub comp: Option<CompFormula>,
    #[serde(default)]
    pub oracle_cfg: OracleConfig,
    #[serde(default)]
    pub disagree_cfg: DisagreeConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for LearnerSection {
    fn default() -> Self {
        LearnerSection {
            delta: default_delta(),
            b_constant: default_b_constant(),
            comp: None,
            oracle_cfg: OracleConfig::default(),
            disagree_cfg: DisagreeConfig::default(),
            seed: 0,
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_b_constant() -> f64 {
    1.0
}

/// Nondecreasing `psi` used by the assumption and bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiSpec {
    /// `psi(t) = slope * t`.
    Linear { slope: f64 },
    /// `psi(t) = scale * t^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl PsiSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            PsiSpec::Linear { slope } => slope * t,
            PsiSpec::Power { scale, exponent } => scale * t.max(0.0).powf(exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PsiSpec::Linear { slope } => slope > 0.0 && slope.is_finite(),
            PsiSpec::Power { scale, exponent } => scale > 0.0 && exponent > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("verify.psi", "must be positive and nondecreasing"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub psi: PsiSpec,
    #[serde(default = "default_verify_samples")]
    pub samples: usize,
    /// Random feasible members checked against the transfer bound.
    #[serde(default = "default_bound_members")]
    pub bound_members: usize,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
}

fn default_verify_samples() -> usize {
    10_000
}

fn default_bound_members() -> usize {
    5
}

fn default_gamma_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 40.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSection {
    #[serde(default = "default_theta_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_theta_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_theta_mc")]
    pub mc: usize,
    #[serde(default = "default_theta_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub norm: ThetaNorm,
}

impl Default for ThetaSection {
    fn default() -> Self {
        ThetaSection {
            gammas: default_theta_gammas(),
            epsilons: default_theta_epsilons(),
            mc: default_theta_mc(),
            restarts: default_theta_restarts(),
            norm: ThetaNorm::default(),
        }
    }
}

fn default_theta_gammas() -> Vec<f64> {
    vec![0.1]
}

fn default_theta_epsilons() -> Vec<f64> {
    vec![0.1]
}

fn default_theta_mc() -> usize {
    2_000
}

fn default_theta_restarts() -> usize {
    8
}

fn default_trials() -> usize {
    1
}

fn default_mc_eval() -> usize {
    20_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

/// Raw document as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub class: Option<ClassSpec>,
    #[serde(default)]
    pub surrogate: Option<SurrogateSection>,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub sweep: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_mc_eval")]
    pub mc_eval: usize,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub theta: ThetaSection,
}

/// Validated configuration with every default resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub class: ClassSpec,
    pub surrogate: SurrogateSpec,
    pub learner: LearnerSection,
    pub sweep: Vec<usize>,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub mc_eval: usize,
    pub record_wall_time: bool,
    pub verify: VerifySection,
    pub theta: ThetaSection,
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::config(format!("{section}.{field}"), message),
        Error::InvalidArgument(m) | Error::Domain(m) => Error::config(section, m),
        other => other,
    }
}

fn default_psi(inst: &InstanceSpec) -> PsiSpec {
    let slope = match inst.kind {
        InstanceKind::Example1 => 1.0 / (inst.d as f64).sqrt(),
        InstanceKind::LinfApproxRealizable => match (inst.epsilon, inst.gamma) {
            (Some(e), Some(g)) if g > 0.0 => 1.0 - e / g,
            _ => 1.0,
        },
        _ => 1.0,
    };
    PsiSpec::Linear { slope }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| format!("line {} column {}", e.line(), e.column()));
            Error::config(field, msg)
        })?;
        Self::resolve(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn resolve(raw: RawConfig) -> Result<Self> {
        let inst = raw.instance;
        inst.validate().map_err(|e| prefixed("instance", e))?;
        let class = raw.class.unwrap_or_else(|| inst.default_class());
        class.validate().map_err(|e| prefixed("class", e))?;
        if class.d != inst.d || class.k != inst.k {
            return Err(Error::config("class", "dimensions must match the instance"));
        }
        let surrogate = match raw.surrogate {
            None if inst.k == 2 => SurrogateSpec::squared(),
            None => SurrogateSpec::logistic_for_score_bound(class.score_bound(), class.k)?,
            Some(s) => match (s.kind, s.beta_phi, s.l_phi) {
                (SurrogateKind::Squared, None, None) => SurrogateSpec::squared(),
                (SurrogateKind::Squared, _, _) => {
                    return Err(Error::config("surrogate.beta_phi", "squared loss fixes beta_phi = l_phi = 1"))
                }
                (SurrogateKind::Logistic, Some(b), l) => {
                    SurrogateSpec::logistic(b, l.unwrap_or(1.0)).map_err(|e| prefixed("surrogate", e))?
                }
                (SurrogateKind::Logistic, None, _) => {
                    SurrogateSpec::logistic_for_score_bound(class.score_bound(), class.k)?
                }
            },
        };
        crate::oracle::check_pairing(&class, &surrogate).map_err(|e| prefixed("surrogate", e))?;
        if raw.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if raw.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("sweep", "must be strictly increasing"));
        }
        if raw.mc_eval == 0 {
            return Err(Error::config("mc_eval", "must be at least 1"));
        }
        let learner = raw.learner;
        let probe = LearnerConfig {
            n: raw.sweep.first().copied().unwrap_or(3),
            delta: learner.delta,
            b_constant: learner.b_constant,
            comp: learner.comp.clone(),
            oracle_cfg: learner.oracle_cfg.clone(),
            disagree_cfg: learner.disagree_cfg.clone(),
            seed: learner.seed,
        };
        probe.validate().map_err(|e| match e {
            Error::Config { field, message } if field == "n" => Error::config("sweep", message),
            e => prefixed("learner", e),
        })?;
        let verify = raw.verify.unwrap_or_else(|| VerifySection {
            psi: default_psi(&inst),
            samples: default_verify_samples(),
            bound_members: default_bound_members(),
            gamma_grid: default_gamma_grid(),
        });
        verify.psi.validate()?;
        if verify.gamma_grid.is_empty() || verify.gamma_grid.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::config("verify.gamma_grid", "must be non-empty and positive"));
        }
        let theta = raw.theta;
        check_grid("theta.gammas", &theta.gammas)?;
        check_grid("theta.epsilons", &theta.epsilons)?;
        if theta.mc == 0 {
            return Err(Error::config("theta.mc", "must be at least 1"));
        }
        Ok(ExperimentConfig {
            instance: inst,
            class,
            surrogate,
            learner,
            sweep: raw.sweep,
            trials: raw.trials,
            output_dir: raw.output_dir,
            mc_eval: raw.mc_eval,
            record_wall_time: raw.record_wall_time,
            verify,
            theta,
        })
    }

    pub fn learner_config(&self, n: usize, seed: u64) -> LearnerConfig {
        LearnerConfig {
            n,
            delta: self.learner.delta,
            b_constant: self.learner.b_constant,
            comp: self.learner.comp.clone(),
            oracle_cfg: self.learner.oracle_cfg.clone(),
            disagree_cfg: self.learner.disagree_cfg.clone(),
            seed,
        }
    }
}

pub fn check_grid(field: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    if let Some(bad) = grid.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::config(field, format!("values must be positive, got {bad}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"instance": {"kind": "example1", "d": 2}, "sweep": [15]}"#;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.class, ClassSpec::binary(2));
        assert_eq!(c.surrogate, SurrogateSpec::squared());
        assert_eq!(c.trials, 1);
        assert_eq!(c.verify.psi, PsiSpec::Linear { slope: 1.0 / 2f64.sqrt() });
    }

    #[test]
    fn bad_delta_names_the_field() {
        let text = r#"{"instance": {"kind": "example1", "d": 2}, "sweep": [15], "learner": {"delta": 1.5}}"#;
        match ExperimentConfig::from_json(text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "learner.delta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected_by_name() {
        let text = r#"{"instance": {"kind": "example1", "d": 2}, "sweeps": [15]}"#;
        match ExperimentConfig::from_json(text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "sweeps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_must_increase() {
        let text = r#"{"instance": {"kind": "example1", "d": 2}, "sweep": [15, 7]}"#;
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config { field, .. }) if field == "sweep"));
    }
}
