//! End-to-end learners built from the boosters and the parity learners.

use serde::{Deserialize, Serialize};

use crate::boost::{
    a2boost, aboost, BoostParams, BoostResult, Mode, RoundRecord, RowKind, Transcript,
};
use crate::concepts::{ConceptClass, DnfFormula};
use crate::error::{Error, Result};
use crate::fourier::{coefficients, correlations};
use crate::learners::{
    best_member, ExhaustiveWeak, KmConfig, KmParityWeak, ParityExact, WeakLearner, WeakOutcome,
};
use crate::numeric::sign;
use crate::oracles::{residual_clipped, reweighted_dh};
use crate::rng::child_seed;
use crate::space::{
    apply_step, inner_product, potential_r, BaseDistribution, BoundedFn, Ensemble,
    ExampleDistribution, StepKind,
};

/// Which residual booster drives [`weak_to_strong`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    A2boost,
    Aboost,
}

/// Builds a weak learner for a requested accuracy `tau`.
pub type WeakFamily<'a> = dyn Fn(f64) -> Result<Box<dyn WeakLearner>> + 'a;

/// Boosts the `(eps/3)`-instantiation of `family` at accuracy `eps/3`, for
/// error at most `Delta(A, C) + eps`.
pub fn weak_to_strong(
    a: &ExampleDistribution,
    family: &WeakFamily<'_>,
    epsilon: f64,
    delta: f64,
    mode: Mode,
    engine: Engine,
    seed: u64,
) -> Result<BoostResult> {
    let tau = epsilon / 3.0;
    let weak = family(tau)?;
    let c = weak.contract();
    let p = BoostParams::new(c.alpha, c.gamma, tau, delta, mode)?;
    match engine {
        Engine::A2boost => a2boost(a, weak.as_ref(), p, seed),
        Engine::Aboost => aboost(a, weak.as_ref(), p, seed),
    }
}

/// How the decision-tree learner reaches the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    /// Full truth table; the parity learner uses a transform.
    Dense,
    /// Membership queries through KM search.
    Query,
}

/// Parameters of [`learn_decision_tree`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Tree size bound `s` (leaf count), which bounds the spectral norm.
    pub size: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub access: Access,
}

impl TreeConfig {
    pub fn tau(&self) -> f64 {
        self.epsilon / 3.0
    }

    /// Advantage guaranteed by the parity learner, `tau / (2s)`.
    pub fn parity_gamma(&self) -> f64 {
        self.tau() / (2.0 * self.size as f64)
    }

    /// Coefficient threshold `2 tau / s`.
    pub fn theta(&self) -> f64 {
        2.0 * self.tau() / self.size as f64
    }
}

/// Output of [`learn_decision_tree`].
#[derive(Clone, Debug)]
pub struct TreeOutcome {
    pub result: BoostResult,
    /// Membership queries spent (zero in dense mode).
    pub queries: u64,
}

/// Agnostic decision-tree learning under the uniform marginal.
pub fn learn_decision_tree(
    a: &ExampleDistribution,
    cfg: TreeConfig,
    seed: u64,
) -> Result<TreeOutcome> {
    if !a.base().is_uniform() {
        return Err(Error::NonUniform);
    }
    if cfg.size == 0 {
        return Err(Error::Param("tree size must be positive".into()));
    }
    let bits = a.domain().bits();
    let tau = cfg.tau();
    let gamma = cfg.parity_gamma();
    let weak: Box<dyn WeakLearner> = match cfg.access {
        Access::Dense => Box::new(ParityExact::new(bits, tau, gamma)?),
        Access::Query => Box::new(KmParityWeak::new(
            KmConfig::new(cfg.theta(), cfg.delta)?,
            tau,
            gamma,
        )?),
    };
    // Same instantiation as `weak_to_strong` with the parity family at tau.
    let p = BoostParams::new(tau, gamma, tau, cfg.delta, Mode::Exact)?;
    let result = a2boost(a, weak.as_ref(), p, seed)?;
    Ok(TreeOutcome {
        queries: weak.queries(),
        result,
    })
}

/// One audited weak call of the tree learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PremiseCheck {
    /// Ensemble prefix length at the call.
    pub step: usize,
    /// `max_a |hat rho(a)|` for the residual `rho = (phi - h)/2`.
    pub max_coefficient: f64,
    /// `<c, rho>` for the reference concept `c`.
    pub reference_correlation: f64,
    /// Spectral norm `sum_a |hat c(a)|` of the reference concept.
    pub reference_l1: f64,
}

impl PremiseCheck {
    /// `max |hat rho| >= |<c, rho>| / L1(c)`.
    pub fn holds(&self) -> bool {
        self.max_coefficient >= self.reference_correlation.abs() / self.reference_l1 - 1e-12
    }
}

/// Replays an ensemble over a uniform instance and, before each weak step
/// and at the end, checks that the residual has a Fourier coefficient at
/// least `|<c, rho>| / L1(c)` for the reference concept `c`.
pub fn audit_fourier_premise(
    a: &ExampleDistribution,
    ensemble: &Ensemble,
    reference: &BoundedFn,
) -> Result<Vec<PremiseCheck>> {
    if !a.base().is_uniform() {
        return Err(Error::NonUniform);
    }
    let domain = a.domain();
    let l1: f64 = coefficients(reference).iter().map(|c| c.abs()).sum();
    let phi = a.label().values();
    let cv = reference.values();
    let size = domain.size() as f64;
    let mut h = vec![0.0; domain.size()];
    let mut checks = Vec::new();
    let mut check = |h: &[f64], step: usize| -> Result<()> {
        let rho: Vec<f64> = phi.iter().zip(h).map(|(p, v)| (p - v) / 2.0).collect();
        let corr = rho.iter().zip(cv.iter()).map(|(r, c)| r * c).sum::<f64>() / size;
        let rho = BoundedFn::from_table(domain, rho)?;
        let max = coefficients(&rho)
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
        checks.push(PremiseCheck {
            step,
            max_coefficient: max,
            reference_correlation: corr,
            reference_l1: l1,
        });
        Ok(())
    };
    for (i, s) in ensemble.steps().iter().enumerate() {
        if s.kind == StepKind::Weak {
            check(&h, i)?;
        }
        apply_step(&mut h, s.weight, &s.base);
    }
    check(&h, ensemble.len())?;
    Ok(checks)
}

/// Parameters of [`pac_learn_threshold`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Number of terms `W` of the threshold.
    pub weight: usize,
    pub epsilon: f64,
}

impl ThresholdConfig {
    /// Accuracy asked of the agnostic learner, `eps/(4W)`.
    pub fn learner_accuracy(&self) -> f64 {
        self.epsilon / (4.0 * self.weight as f64)
    }

    /// Minimum acceptable residual correlation, `eps/(2W)`.
    pub fn required_correlation(&self) -> f64 {
        self.epsilon / (2.0 * self.weight as f64)
    }

    /// `ceil((16/3) (W/eps)^2)` with the usual slack.
    pub fn round_cap(&self) -> usize {
        let r = self.weight as f64 / self.epsilon;
        (16.0 / 3.0 * r * r).ceil() as usize * crate::boost::ROUND_SLACK
    }
}

/// Output of [`pac_learn_threshold`].
#[derive(Clone, Debug)]
pub struct ThresholdOutcome {
    pub ensemble: Ensemble,
    pub transcript: Transcript,
    pub rounds: usize,
    pub final_error: f64,
    /// `max_c |<f, c>_{D_h}|` per round, when audited.
    pub discriminator: Vec<f64>,
    pub queries: u64,
}

impl ThresholdOutcome {
    pub fn hypothesis(&self) -> BoundedFn {
        self.ensemble.sign_fn()
    }
}

/// PAC learning of a threshold of `W` concepts: boost the agnostic learner
/// on `(D, P1(f - h))` until the error is at most `eps`. With `audit_class`
/// set, `max_c |<f, c>_{D_h}|` over that class is recorded every round.
pub fn pac_learn_threshold(
    a: &ExampleDistribution,
    learner: &dyn WeakLearner,
    audit_class: Option<&ConceptClass>,
    cfg: ThresholdConfig,
    seed: u64,
) -> Result<ThresholdOutcome> {
    if cfg.weight == 0 || !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::Param(format!(
            "need W >= 1 and eps in (0, 1), got {} and {}",
            cfg.weight, cfg.epsilon
        )));
    }
    if let Some(x) = a.label().first_non_boolean() {
        return Err(Error::NotBoolean(x));
    }
    let domain = a.domain();
    let d = a.base();
    let f = a.label().values().into_owned();
    let mut h = vec![0.0; domain.size()];
    let mut ensemble = Ensemble::new(domain);
    let mut transcript = Transcript::default();
    let mut discriminator = Vec::new();

    let error = |h: &[f64]| d.expect(|x| if f[x] * sign(h[x]) < 0.0 { 1.0 } else { 0.0 });
    let potential = |h: &[f64]| d.expect(|x| potential_r(f[x] - h[x]));
    let mut err = error(&h);
    transcript.rows.push(RoundRecord {
        round: 0,
        kind: RowKind::Init,
        gamma_hat: None,
        potential: potential(&h),
        n_h: None,
        error_estimate: err,
        smoothness: None,
    });

    let mut rounds = 0;
    while err > cfg.epsilon {
        if rounds >= cfg.round_cap() {
            return Err(Error::RoundCap(format!(
                "{rounds} rounds without reaching error {} (now {err})",
                cfg.epsilon
            )));
        }
        let h_fn = BoundedFn::from_table(domain, h.clone())?;
        if let Some(class) = audit_class {
            let rw = reweighted_dh(a, &h_fn)?;
            let best = best_member(
                &ExampleDistribution::new(rw.dist, a.label().clone())?,
                class,
            )?;
            discriminator.push(best.correlation.abs());
        }
        let round = residual_clipped(a, &h_fn)?;
        let g = match learner.learn(&round, child_seed(seed, rounds as u64))? {
            WeakOutcome::Success { hypothesis, .. } => hypothesis,
            WeakOutcome::Fail { reason } => {
                return Err(Error::Contract(format!(
                    "learner failed at round {rounds} with error {err}: {reason}"
                )))
            }
        };
        let corr = inner_product(d, round.label(), &g)?;
        if corr < cfg.required_correlation() {
            return Err(Error::Contract(format!(
                "round {rounds}: residual correlation {corr} below {} at error {err}",
                cfg.required_correlation()
            )));
        }
        let weight = (corr / 2.0).min(1.0);
        apply_step(&mut h, weight, &g);
        ensemble.push(StepKind::Weak, weight, g)?;
        rounds += 1;
        err = error(&h);
        transcript.rows.push(RoundRecord {
            round: rounds,
            kind: RowKind::Weak,
            gamma_hat: Some(corr / 2.0),
            potential: potential(&h),
            n_h: None,
            error_estimate: err,
            smoothness: None,
        });
    }
    Ok(ThresholdOutcome {
        ensemble,
        transcript,
        rounds,
        final_error: err,
        discriminator,
        queries: learner.queries(),
    })
}

/// Parameters of [`pac_learn_dnf`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnfConfig {
    /// Threshold weight `W`; the formula is assumed to lie in `TH(W, parities)`.
    pub weight: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub access: Access,
}

/// DNF learning as a threshold of parities under the uniform marginal.
pub fn pac_learn_dnf(dnf: &DnfFormula, cfg: DnfConfig, seed: u64) -> Result<ThresholdOutcome> {
    let f = dnf.to_fn()?;
    let bits = f.domain().bits();
    let a = ExampleDistribution::new(BaseDistribution::uniform(f.domain()), f)?;
    let tcfg = ThresholdConfig {
        weight: cfg.weight,
        epsilon: cfg.epsilon,
    };
    let gamma = tcfg.learner_accuracy();
    let learner: Box<dyn WeakLearner> = match cfg.access {
        Access::Dense => Box::new(ExhaustiveWeak::new(
            ConceptClass::parities(bits)?,
            gamma,
            gamma,
        )?),
        Access::Query => Box::new(KmParityWeak::new(
            KmConfig::new(tcfg.required_correlation(), cfg.delta)?,
            gamma,
            gamma,
        )?),
    };
    pac_learn_threshold(&a, learner.as_ref(), None, tcfg, seed)
}

/// `max_a |<f, chi_a>_{D}|` over all masks of the domain.
pub fn max_parity_correlation(d: &BaseDistribution, f: &BoundedFn) -> Result<f64> {
    Ok(correlations(d, f)?
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs())))
}
