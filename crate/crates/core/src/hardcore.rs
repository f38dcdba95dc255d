//! Hard-core measures: the weak-learner adapter for measures and the
//! reweighting-booster construction with exhaustive certification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boost::{
    reweight_boost, BoostParams, BoostResult, ReweightStop, StopReason, Transcript,
};
use crate::codec::set_to_hex;
use crate::concepts::{ConceptClass, SCAN_LIMIT};
use crate::error::{Error, Result};
use crate::learners::{best_member, certified_advantage, ExhaustiveWeak, WeakLearner, WeakOutcome};
use crate::oracles::{exact_opt, measure_product};
use crate::rng::{stream, Purpose};
use crate::space::{project_p1, BaseDistribution, BoundedFn, ExampleDistribution, Measure};

/// Attempts of [`measure_to_set`] before giving up on an empty set.
pub const ROUNDING_ATTEMPTS: u64 = 8;

/// `mu_D(M) = E_D[M]`.
pub fn density(m: &Measure, d: &BaseDistribution) -> Result<f64> {
    if m.domain() != d.domain() {
        return Err(Error::DomainMismatch {
            expected: d.domain().bits(),
            found: m.domain().bits(),
        });
    }
    let v = m.as_fn().values();
    Ok(d.expect(|x| v[x]))
}

/// `D_M(x) = D(x) M(x) / mu_D(M)`.
pub fn measure_distribution(m: &Measure, d: &BaseDistribution) -> Result<BaseDistribution> {
    if density(m, d)? <= 0.0 {
        return Err(Error::ZeroDensity);
    }
    let v = m.as_fn().values();
    let w: Vec<f64> = d.domain().points().map(|x| d.prob(x) * v[x]).collect();
    BaseDistribution::from_weights(d.domain(), &w)
}

/// Runs `weak` on `(D, f M)`. A success is re-checked on `(D_M, f)` through
/// `E_{D_M}[g f] = E_D[g f M] / mu_D(M)` and must have advantage at least
/// the learner's `gamma` there.
pub fn weak_from_measure(
    weak: &dyn WeakLearner,
    a: &ExampleDistribution,
    m: &Measure,
    seed: u64,
) -> Result<WeakOutcome> {
    let mu = density(m, a.base())?;
    if mu <= 0.0 {
        return Err(Error::ZeroDensity);
    }
    let product = measure_product(a, m)?;
    let outcome = weak.learn(&product, seed)?;
    if let WeakOutcome::Success { hypothesis, .. } = &outcome {
        let on_dm = certified_advantage(&product, hypothesis)? / mu;
        let gamma = weak.contract().gamma;
        if on_dm < gamma - 1e-12 {
            return Err(Error::Contract(format!(
                "advantage {on_dm} on D_M is below gamma {gamma}"
            )));
        }
        return Ok(WeakOutcome::Success {
            hypothesis: hypothesis.clone(),
            advantage: on_dm,
        });
    }
    Ok(outcome)
}

/// A Boolean target claimed to be `lambda`-hard for an explicit class.
#[derive(Clone, Debug)]
pub struct HardnessInstance {
    pub target: ExampleDistribution,
    pub class: ConceptClass,
    pub lambda: f64,
    /// `Delta(A, C)` when the class is small enough to scan.
    pub opt: Option<f64>,
    pub warnings: Vec<String>,
}

impl HardnessInstance {
    pub fn new(target: ExampleDistribution, class: ConceptClass, lambda: f64) -> Result<Self> {
        if let Some(x) = target.label().first_non_boolean() {
            return Err(Error::NotBoolean(x));
        }
        if !(0.0..=0.5).contains(&lambda) {
            return Err(Error::Param(format!("lambda {lambda} outside [0, 1/2]")));
        }
        let mut warnings = Vec::new();
        let opt = if class.len() <= SCAN_LIMIT {
            let opt = exact_opt(&target, &class)?.delta;
            if lambda > opt + 1e-12 {
                warnings.push(format!(
                    "lambda {lambda} exceeds the best class error {opt}; the target is not that hard"
                ));
            }
            Some(opt)
        } else {
            None
        };
        Ok(Self {
            target,
            class,
            lambda,
            opt,
            warnings,
        })
    }

    /// Uses the scanned `Delta(A, C)` as the hardness level.
    pub fn at_opt(target: ExampleDistribution, class: ConceptClass) -> Result<Self> {
        let opt = exact_opt(&target, &class)?.delta;
        Self::new(target, class, opt)
    }
}

/// Worst class member for a target under some marginal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstConcept {
    pub concept: String,
    /// `Gamma` of the best member of `C` and `-C`.
    pub advantage: f64,
}

/// Exhaustive advantage scan of `C` and `-C` for `(d, f)`.
pub fn worst_concept(
    d: &BaseDistribution,
    f: &BoundedFn,
    class: &ConceptClass,
) -> Result<WorstConcept> {
    let round = ExampleDistribution::new(d.clone(), f.clone())?;
    let best = best_member(&round, class)?;
    let (negated, corr) = if class.negation_closed() {
        (best.negated, best.correlation)
    } else {
        // best_member only searched C; scan -C through the most negative.
        let neg = best_member(&ExampleDistribution::new(d.clone(), f.neg())?, class)?;
        if neg.correlation > best.correlation {
            return Ok(WorstConcept {
                concept: class.describe(neg.index, true),
                advantage: neg.correlation / 2.0,
            });
        }
        (best.negated, best.correlation)
    };
    Ok(WorstConcept {
        concept: class.describe(best.index, negated),
        advantage: corr / 2.0,
    })
}

/// Independent rounding of a measure into a set.
#[derive(Clone, Debug)]
pub struct RoundedSet {
    pub members: Vec<bool>,
    pub fraction: f64,
    /// Worst-class advantage under the uniform distribution on the set.
    pub worst: WorstConcept,
    pub seed: u64,
}

/// A certified hard-core measure.
#[derive(Clone, Debug)]
pub struct HardcoreCertificate {
    pub measure: Measure,
    pub density: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub lambda: f64,
    /// `Pr_D[f != sign(h_t)]` at the stopping round.
    pub achieved_error: f64,
    pub worst: WorstConcept,
    pub rounds: usize,
    pub transcript: Transcript,
    pub set: Option<RoundedSet>,
}

impl HardcoreCertificate {
    pub fn record(&self) -> CertificateRecord {
        CertificateRecord {
            measure: self.measure.as_fn().values().into_owned(),
            density: self.density,
            gamma: self.gamma,
            epsilon: self.epsilon,
            lambda: self.lambda,
            achieved_error: self.achieved_error,
            worst_concept: self.worst.concept.clone(),
            worst_advantage: self.worst.advantage,
            set_hex: self
                .set
                .as_ref()
                .map(|s| set_to_hex(s.members.len(), |x| s.members[x])),
            set_fraction: self.set.as_ref().map(|s| s.fraction),
        }
    }
}

/// Certificate JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateRecord {
    pub measure: Vec<f64>,
    pub density: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub achieved_error: f64,
    pub worst_concept: String,
    pub worst_advantage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_hex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_fraction: Option<f64>,
}

/// Result of [`construct_hardcore_measure`].
#[derive(Clone, Debug)]
pub enum HardcoreOutcome {
    Certificate(HardcoreCertificate),
    /// The booster reached error below `lambda`; `sign(h_t)` refutes the
    /// claimed hardness.
    Refuted {
        approximator: BoundedFn,
        error: f64,
        run: BoostResult,
    },
}

/// Runs the reweighting booster with the exhaustive `(gamma, gamma)` learner
/// for the instance class. When the learner fails at error at least
/// `lambda`, the measure `|P1(f - h_t)|` is returned after an exhaustive
/// check that its density is at least `2 lambda - eps` and that no member of
/// `C` or `-C` reaches advantage `gamma` on `D_M`.
pub fn construct_hardcore_measure(
    inst: &HardnessInstance,
    gamma: f64,
    epsilon: f64,
    seed: u64,
) -> Result<HardcoreOutcome> {
    let weak = ExhaustiveWeak::new(inst.class.clone(), gamma, gamma)?;
    let p = BoostParams::exact(gamma, gamma, epsilon)?;
    let a = &inst.target;
    let run = reweight_boost(a, &weak, p, seed, ReweightStop::Below(inst.lambda))?;
    match run.result.stop_reason {
        StopReason::TargetReached => Ok(HardcoreOutcome::Refuted {
            approximator: run.result.hypothesis(),
            error: run.final_error,
            run: run.result,
        }),
        StopReason::BothFailed => {
            let f = a.label().values();
            let m = Measure::from_table(
                a.domain(),
                f.iter()
                    .zip(&run.h)
                    .map(|(fx, hx)| project_p1(fx - hx).abs())
                    .collect(),
            )?;
            let cert = HardcoreCertificate {
                density: density(&m, a.base())?,
                worst: worst_concept(&measure_distribution(&m, a.base())?, a.label(), &inst.class)?,
                measure: m,
                gamma,
                epsilon,
                lambda: inst.lambda,
                achieved_error: run.final_error,
                rounds: run.result.weak_updates + run.result.balance_updates,
                transcript: run.result.transcript,
                set: None,
            };
            verify_certificate(inst, &cert)?;
            Ok(HardcoreOutcome::Certificate(cert))
        }
        StopReason::ZeroResidual => Err(Error::Contract(
            "residual vanished while the error was at least lambda".into(),
        )),
        StopReason::RoundCapHit => Err(Error::RoundCap(format!(
            "hard-core construction exceeded {} weak updates",
            p.reweighted_cap()
        ))),
    }
}

/// Recomputes density and worst advantage from the measure alone and checks
/// both certified properties.
pub fn verify_certificate(inst: &HardnessInstance, cert: &HardcoreCertificate) -> Result<()> {
    let d = inst.target.base();
    let mu = density(&cert.measure, d)?;
    let floor = 2.0 * inst.lambda - cert.epsilon;
    if mu < floor - 1e-12 {
        return Err(Error::Contract(format!(
            "density {mu} below 2 lambda - eps = {floor}"
        )));
    }
    let worst = worst_concept(
        &measure_distribution(&cert.measure, d)?,
        inst.target.label(),
        &inst.class,
    )?;
    if worst.advantage >= cert.gamma {
        return Err(Error::Contract(format!(
            "{} reaches advantage {} >= gamma {} on D_M",
            worst.concept, worst.advantage, cert.gamma
        )));
    }
    Ok(())
}

/// Puts each `x` in the set independently with probability `M(x)` and
/// rescans the class under the uniform distribution on the set.
pub fn measure_to_set(
    m: &Measure,
    d: &BaseDistribution,
    f: &BoundedFn,
    class: &ConceptClass,
    seed: u64,
) -> Result<RoundedSet> {
    if !d.is_uniform() {
        return Err(Error::NonUniform);
    }
    let domain = m.domain();
    let v = m.as_fn().values();
    for attempt in 0..ROUNDING_ATTEMPTS {
        let mut rng = stream(seed, Purpose::Rounding, attempt);
        let members: Vec<bool> = domain.points().map(|x| rng.gen::<f64>() < v[x]).collect();
        let count = members.iter().filter(|b| **b).count();
        if count == 0 {
            continue;
        }
        let weights: Vec<f64> = members.iter().map(|b| f64::from(u8::from(*b))).collect();
        let on_set = BaseDistribution::from_weights(domain, &weights)?;
        return Ok(RoundedSet {
            fraction: count as f64 / domain.size() as f64,
            worst: worst_concept(&on_set, f, class)?,
            members,
            seed,
        });
    }
    Err(Error::EmptyClass)
}
