//! Experiment specifications.

use std::path::{Path, PathBuf};

use agboost_core::apps::Access;
use agboost_core::boost::Mode;
use agboost_core::concepts::ConceptClass;
use agboost_core::space::{BoundedFn, Domain};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::families::{generate, parse_instance, FamilySpec, InstanceFile};

/// Largest `n` run in exact mode unless overridden by [`DENSE_CAP_ENV`].
pub const DENSE_CAP: u32 = 16;
pub const DENSE_CAP_ENV: &str = "AGBOOST_DENSE_CAP";

pub fn dense_cap() -> u32 {
    std::env::var(DENSE_CAP_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DENSE_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    A2boost,
    Aboost,
    Aboostdi,
    LearnDt,
    LearnDnf,
    ThPac,
    Hardcore,
}

/// Where the instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Path(PathBuf),
    File(InstanceFile),
    Family(FamilySpec),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Threshold weight `W`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<usize>,
    /// Tree size `s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Params {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.05)
    }
}

/// Concept class used by weak learners and baselines.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassSpec {
    #[default]
    Parities,
    Trees {
        size: usize,
    },
    Conjunctions {
        width: u32,
    },
    /// `{+1, -1}`.
    Constants,
}

impl ClassSpec {
    pub fn build(&self, domain: Domain) -> Result<ConceptClass> {
        let n = domain.bits();
        Ok(match self {
            Self::Parities => ConceptClass::parities(n)?,
            Self::Trees { size } => ConceptClass::trees(n, *size)?,
            Self::Conjunctions { width } => ConceptClass::conjunctions(n, *width)?,
            Self::Constants => {
                ConceptClass::explicit(vec![BoundedFn::constant(domain, 1.0)?], true)?
            }
        })
    }
}

/// Weak learner handed to the boosters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Best member of the class; fails below `gamma`.
    #[default]
    Exhaustive,
    /// Fails below `alpha`, otherwise returns advantage in `[gamma, 2 gamma]`.
    Throttled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub instance: InstanceSource,
    /// Seed for generated instances; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_seed: Option<u64>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub class: ClassSpec,
    #[serde(default)]
    pub learner: LearnerKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access: Option<Access>,
    #[serde(default)]
    pub outputs: Outputs,
    /// Directory relative instance paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn require(v: Option<f64>, name: &str, algo: Algorithm) -> Result<f64> {
    v.ok_or_else(|| HarnessError::Spec(format!("{algo:?} needs params.{name}")))
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut spec = Self::parse(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        Ok(spec)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let algo = self.algorithm;
        if let (Some(a), Some(g)) = (p.alpha, p.gamma) {
            if g > a {
                return Err(HarnessError::Spec(format!("gamma {g} exceeds alpha {a}")));
            }
        }
        for (name, v) in [
            ("alpha", p.alpha),
            ("gamma", p.gamma),
            ("epsilon", p.epsilon),
            ("lambda", p.lambda),
        ] {
            if let Some(v) = v {
                if !(0.0..=0.5).contains(&v) {
                    return Err(HarnessError::Spec(format!("{name} {v} outside [0, 1/2]")));
                }
            }
        }
        if let Some(d) = p.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(HarnessError::Spec(format!("delta {d} outside (0, 1)")));
            }
        }
        require(p.epsilon, "epsilon", algo)?;
        match algo {
            Algorithm::A2boost | Algorithm::Aboost | Algorithm::Aboostdi => {
                require(p.alpha, "alpha", algo)?;
                require(p.gamma, "gamma", algo)?;
            }
            Algorithm::LearnDt => {
                if p.size.is_none() {
                    return Err(HarnessError::Spec("learn-dt needs params.size".into()));
                }
            }
            Algorithm::ThPac => {
                if p.weight.is_none() {
                    return Err(HarnessError::Spec("th-pac needs params.weight".into()));
                }
            }
            Algorithm::Hardcore => {
                require(p.gamma, "gamma", algo)?;
            }
            Algorithm::LearnDnf => {}
        }
        Ok(())
    }

    pub fn instance_file(&self) -> Result<InstanceFile> {
        let seed = self.instance_seed.unwrap_or(self.seed);
        match &self.instance {
            InstanceSource::Path(p) => {
                let p = match &self.base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                let p = &p;
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
                parse_instance(&text)
            }
            InstanceSource::File(f) => Ok(f.clone()),
            InstanceSource::Family(f) => generate(f, seed),
        }
    }

    /// Requested mode, defaulting to exact up to the dense cap.
    pub fn mode_for(&self, bits: u32) -> Result<Mode> {
        let cap = dense_cap();
        match self.mode {
            Some(Mode::Exact) if bits > cap => Err(HarnessError::Spec(format!(
                "exact mode needs n <= {cap} (set {DENSE_CAP_ENV} to override), got {bits}"
            ))),
            Some(m) => Ok(m),
            None if bits <= cap => Ok(Mode::Exact),
            None => Ok(Mode::Sampled),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "instance": {"family": "noisy-parity", "n": 6, "mask": "5", "eta": 0.1},
        "algorithm": "a2boost",
        "params": {"alpha": 0.05, "gamma": 0.05, "epsilon": 0.05},
        "seed": 3
    }"#;

    #[test]
    fn parses_and_hashes_stably() {
        let s = ExperimentSpec::parse(BASE).unwrap();
        assert_eq!(s.hash().unwrap(), s.clone().hash().unwrap());
        assert_eq!(s.hash().unwrap().len(), 64);
        let mut t = s.clone();
        t.seed = 4;
        assert_ne!(s.hash().unwrap(), t.hash().unwrap());
        assert!(matches!(s.instance, InstanceSource::Family(_)));
    }

    #[test]
    fn rejects_gamma_above_alpha() {
        let text = BASE.replace(r#""gamma": 0.05"#, r#""gamma": 0.1"#);
        let err = ExperimentSpec::parse(&text).unwrap_err();
        assert!(err.to_string().contains("exceeds alpha"));
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = BASE.replace(r#""seed": 3"#, r#""seed": 3, "colour": 1"#);
        assert!(ExperimentSpec::parse(&text).is_err());
        let text = BASE.replace(r#""epsilon": 0.05"#, r#""epsilon": 0.05, "eta": 1"#);
        assert!(ExperimentSpec::parse(&text).is_err());
    }

    #[test]
    fn missing_required_params() {
        let text = BASE.replace(r#""alpha": 0.05, "#, "");
        assert!(ExperimentSpec::parse(&text).is_err());
    }

    #[test]
    fn exact_mode_respects_cap() {
        let s = ExperimentSpec::parse(BASE).unwrap();
        assert_eq!(s.mode_for(10).unwrap(), Mode::Exact);
        assert_eq!(s.mode_for(DENSE_CAP + 1).unwrap(), Mode::Sampled);
        let mut e = s.clone();
        e.mode = Some(Mode::Exact);
        assert!(e.mode_for(DENSE_CAP + 1).is_err());
    }
}
