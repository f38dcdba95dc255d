//! The boosting loops.
//!
//! * [`a2boost`] runs the weak learner on `(D, (phi - h)/2)` and monitors
//!   `||phi - h||_D^2`.
//! * [`aboost`] runs it on `(D, P1(f - h))` and monitors `E_D[R(f - h)]`,
//!   splitting points first when `phi` is not Boolean.
//! * [`aboostdi`] reweights the marginal to `D_h` and keeps the target `f`.
//!
//! All three interleave weak updates with balancing updates along
//! `-sign(h)`, clip after every step, and log one transcript row per update.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::codec::EnsembleRecord;
use crate::error::{Error, Result};
use crate::learners::{WeakLearner, WeakOutcome};
use crate::numeric::sign;
use crate::oracles::{
    estimate_correlation, point_split, residual_clipped, residual_half, reweighted_dh,
    EstimationBudget, Estimator, Reweighted,
};
use crate::rng::child_seed;
use crate::space::{
    apply_step, potential_r, BoundedFn, Domain, Ensemble, ExampleDistribution, StepKind,
};

/// Slack applied to the analytic round budgets.
pub const ROUND_SLACK: usize = 2;

/// Absolute slack on exact-mode potential-drop checks.
const DROP_TOL: f64 = 1e-12;

/// How expectations are obtained during a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Sampled,
}

/// Booster parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: Mode,
}

impl BoostParams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64, delta: f64, mode: Mode) -> Result<Self> {
        let unit = |v: f64| v > 0.0 && v <= 0.5;
        if !unit(alpha) || !unit(gamma) || !unit(epsilon) {
            return Err(Error::Param(format!(
                "alpha, gamma, epsilon must lie in (0, 1/2], got {alpha}, {gamma}, {epsilon}"
            )));
        }
        if gamma > alpha {
            return Err(Error::Param(format!("gamma {gamma} exceeds alpha {alpha}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Param(format!("delta {delta} outside (0, 1)")));
        }
        Ok(Self {
            alpha,
            gamma,
            epsilon,
            delta,
            mode,
        })
    }

    pub fn exact(alpha: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        Self::new(alpha, gamma, epsilon, 0.05, Mode::Exact)
    }

    /// `ceil(2 gamma^-2 / 3)` without slack: the analytic weak-update bound.
    pub fn weak_budget(&self) -> usize {
        (2.0 / (3.0 * self.gamma * self.gamma)).ceil() as usize
    }

    /// `ceil(4 epsilon^-2 / 3)` without slack.
    pub fn balance_budget(&self) -> usize {
        (4.0 / (3.0 * self.epsilon * self.epsilon)).ceil() as usize
    }

    pub fn weak_cap(&self) -> usize {
        self.weak_budget() * ROUND_SLACK
    }

    pub fn balance_cap(&self) -> usize {
        self.balance_budget() * ROUND_SLACK
    }

    /// Weak-update cap for the reweighting booster:
    /// `ceil(gamma^-2 (2/eps) ln(2/eps)) * slack`.
    pub fn reweighted_cap(&self) -> usize {
        let e = self.epsilon;
        ((2.0 / e) * (2.0 / e).ln() / (self.gamma * self.gamma)).ceil() as usize * ROUND_SLACK
    }

    fn confidence(&self, caps: usize) -> f64 {
        self.delta / (2.0 * caps as f64)
    }

    fn estimator(&self, tolerance: f64, caps: usize) -> Result<Estimator> {
        Ok(match self.mode {
            Mode::Exact => Estimator::Exact,
            Mode::Sampled => {
                Estimator::Sampled(EstimationBudget::new(tolerance, self.confidence(caps))?)
            }
        })
    }
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BothFailed,
    RoundCapHit,
    ZeroResidual,
    TargetReached,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Init,
    Weak,
    Balance,
}

/// State after one update (or the initial state).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub kind: RowKind,
    pub gamma_hat: Option<f64>,
    pub potential: f64,
    #[serde(rename = "N_h")]
    pub n_h: Option<f64>,
    pub error_estimate: f64,
    pub smoothness: Option<f64>,
}

/// Per-update log of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    pub rows: Vec<RoundRecord>,
}

impl Transcript {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "round",
                "kind",
                "gamma_hat",
                "potential",
                "N_h",
                "error_estimate",
                "smoothness",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<RoundRecord>, _>>()?;
        Ok(Self { rows })
    }

    /// Potentials before and after each update, with its `gamma_hat`.
    pub fn drops(&self) -> impl Iterator<Item = (f64, f64, &RoundRecord)> {
        self.rows
            .windows(2)
            .map(|w| (w[0].potential, w[1].potential, &w[1]))
    }
}

/// Outcome of a boosting run.
#[derive(Clone, Debug)]
pub struct BoostResult {
    /// Ensemble on the caller's domain.
    pub ensemble: Ensemble,
    pub transcript: Transcript,
    pub stop_reason: StopReason,
    pub weak_updates: usize,
    pub balance_updates: usize,
    pub weak_calls: usize,
    /// True when the run went through point-splitting.
    pub split: bool,
}

impl BoostResult {
    /// `sign(h_t)`.
    pub fn hypothesis(&self) -> BoundedFn {
        self.ensemble.sign_fn()
    }

    pub fn record(&self) -> BoostRecord {
        BoostRecord {
            ensemble: EnsembleRecord::encode(&self.ensemble),
            stop_reason: self.stop_reason,
            weak_updates: self.weak_updates,
            balance_updates: self.balance_updates,
            weak_calls: self.weak_calls,
            split: self.split,
        }
    }
}

/// Serialized [`BoostResult`] (the transcript is written separately as CSV).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostRecord {
    pub ensemble: EnsembleRecord,
    pub stop_reason: StopReason,
    pub weak_updates: usize,
    pub balance_updates: usize,
    pub weak_calls: usize,
    pub split: bool,
}

/// Error `Pr_D[phi-label disagrees with sign(h)]`, i.e. `Delta(A, sign h)`.
fn error_of_sign(
    a: &ExampleDistribution,
    h: &[f64],
    est: Estimator,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let s = sign_table(a.domain(), h, 1.0)?;
    Ok((1.0 - estimate_correlation(a, &s, est, seed, index)?) / 2.0)
}

fn sign_table(domain: Domain, h: &[f64], scale: f64) -> Result<BoundedFn> {
    BoundedFn::from_table(domain, h.iter().map(|v| scale * sign(*v)).collect())
}

#[derive(Clone, Copy)]
enum Residual {
    Half,
    Clipped,
}

impl Residual {
    fn round(self, a: &ExampleDistribution, h: &BoundedFn) -> Result<ExampleDistribution> {
        match self {
            Self::Half => residual_half(a, h),
            Self::Clipped => residual_clipped(a, h),
        }
    }

    fn potential(self, a: &ExampleDistribution, h: &[f64]) -> f64 {
        let phi = a.label().values();
        match self {
            Self::Half => a.base().expect(|x| (phi[x] - h[x]).powi(2)),
            Self::Clipped => a.base().expect(|x| potential_r(phi[x] - h[x])),
        }
    }
}

/// Stream index for an estimate: four purposes per update slot.
fn slot(updates: usize, k: u64) -> u64 {
    (updates as u64) << 2 | k
}

struct Run<'a> {
    a: &'a ExampleDistribution,
    p: BoostParams,
    seed: u64,
    h: Vec<f64>,
    ensemble: Ensemble,
    transcript: Transcript,
    weak_updates: usize,
    balance_updates: usize,
    weak_calls: usize,
    error_est: Estimator,
}

impl<'a> Run<'a> {
    fn new(a: &'a ExampleDistribution, p: BoostParams, seed: u64, caps: usize) -> Result<Self> {
        Ok(Self {
            a,
            p,
            seed,
            h: vec![0.0; a.domain().size()],
            ensemble: Ensemble::new(a.domain()),
            transcript: Transcript::default(),
            weak_updates: 0,
            balance_updates: 0,
            weak_calls: 0,
            error_est: p.estimator(p.epsilon / 4.0, caps)?,
        })
    }

    fn updates(&self) -> usize {
        self.weak_updates + self.balance_updates
    }

    fn h_fn(&self) -> Result<BoundedFn> {
        BoundedFn::from_table(self.a.domain(), self.h.clone())
    }

    fn error(&self) -> Result<f64> {
        error_of_sign(
            self.a,
            &self.h,
            self.error_est,
            self.seed,
            slot(self.updates(), 3),
        )
    }

    fn push_row(
        &mut self,
        kind: RowKind,
        gamma_hat: Option<f64>,
        potential: f64,
        rw: Option<&Reweighted>,
    ) -> Result<()> {
        let error_estimate = self.error()?;
        self.transcript.rows.push(RoundRecord {
            round: self.updates(),
            kind,
            gamma_hat,
            potential,
            n_h: rw.map(|r| r.norm),
            error_estimate,
            smoothness: rw.map(Reweighted::smoothness),
        });
        Ok(())
    }

    fn update(&mut self, kind: StepKind, weight: f64, g: BoundedFn) -> Result<()> {
        apply_step(&mut self.h, weight, &g);
        self.ensemble.push(kind, weight, g)?;
        match kind {
            StepKind::Weak => self.weak_updates += 1,
            StepKind::Balance => self.balance_updates += 1,
        }
        Ok(())
    }

    fn check_drop(&self, before: f64, after: f64, required: f64, what: &str) -> Result<()> {
        if self.p.mode == Mode::Exact && before - after < required - DROP_TOL {
            return Err(Error::Contract(format!(
                "{what} update {} lowered the potential by {} < {required}",
                self.updates(),
                before - after
            )));
        }
        Ok(())
    }
}

/// Shared loop of the residual-label boosters.
fn residual_boost<'a>(
    a: &'a ExampleDistribution,
    residual: Residual,
    weak: &dyn WeakLearner,
    p: BoostParams,
    seed: u64,
) -> Result<(Run<'a>, StopReason)> {
    let caps = p.weak_cap() + p.balance_cap();
    let mut run = Run::new(a, p, seed, caps)?;
    let weak_est = p.estimator(p.gamma / 4.0, caps)?;
    let balance_est = p.estimator(p.epsilon / 4.0, caps)?;
    let mut potential = residual.potential(a, &run.h);
    run.push_row(RowKind::Init, None, potential, None)?;

    let stop = loop {
        let h_fn = run.h_fn()?;
        let round = residual.round(a, &h_fn)?;
        if round.label().values().iter().all(|v| *v == 0.0) {
            break StopReason::ZeroResidual;
        }

        run.weak_calls += 1;
        let outcome = weak.learn(&round, child_seed(seed, run.weak_calls as u64))?;
        if let WeakOutcome::Success { hypothesis, .. } = outcome {
            let corr =
                estimate_correlation(&round, &hypothesis, weak_est, seed, slot(run.updates(), 0))?;
            let gamma_hat = corr / 2.0;
            if gamma_hat > 3.0 * p.gamma / 4.0 {
                let weight = gamma_hat.min(1.0);
                run.update(StepKind::Weak, weight, hypothesis)?;
                let next = residual.potential(a, &run.h);
                run.check_drop(potential, next, 3.0 * weight * weight, "weak")?;
                potential = next;
                run.push_row(RowKind::Weak, Some(gamma_hat), potential, None)?;
                if run.weak_updates >= p.weak_cap() {
                    break StopReason::RoundCapHit;
                }
                continue;
            }
        }

        // Balance along -sign(h) while it keeps a nontrivial advantage.
        let mut balanced = false;
        let mut capped = false;
        loop {
            let h_fn = run.h_fn()?;
            let round = residual.round(a, &h_fn)?;
            let g = sign_table(a.domain(), &run.h, -1.0)?;
            let corr = estimate_correlation(&round, &g, balance_est, seed, slot(run.updates(), 1))?;
            let gamma_hat = corr / 2.0;
            if gamma_hat < p.epsilon / 2.0 {
                break;
            }
            let weight = gamma_hat.max(p.epsilon / 4.0).min(1.0);
            run.update(StepKind::Balance, weight, g)?;
            let next = residual.potential(a, &run.h);
            run.check_drop(potential, next, 3.0 * weight * weight, "balance")?;
            potential = next;
            run.push_row(RowKind::Balance, Some(gamma_hat), potential, None)?;
            balanced = true;
            if run.balance_updates >= p.balance_cap() {
                capped = true;
                break;
            }
        }
        if capped {
            break StopReason::RoundCapHit;
        }
        if !balanced {
            break StopReason::BothFailed;
        }
    };
    Ok((run, stop))
}

fn finish(run: Run<'_>, stop: StopReason, split: bool) -> BoostResult {
    BoostResult {
        ensemble: run.ensemble,
        transcript: run.transcript,
        stop_reason: stop,
        weak_updates: run.weak_updates,
        balance_updates: run.balance_updates,
        weak_calls: run.weak_calls,
        split,
    }
}

/// Residual boosting on `(D, (phi - h)/2)`; the output has error at most
/// `Delta(A, C) + 2 alpha + eps` when the weak learner honors its contract.
pub fn a2boost(
    a: &ExampleDistribution,
    weak: &dyn WeakLearner,
    p: BoostParams,
    seed: u64,
) -> Result<BoostResult> {
    let (run, stop) = residual_boost(a, Residual::Half, weak, p, seed)?;
    Ok(finish(run, stop, false))
}

/// Clipped-residual boosting on `(D, P1(f - h))`; the output has error at
/// most `Delta(A, C) + alpha + eps`. A non-Boolean label is point-split first
/// and the resulting ensemble is read back on the original domain.
pub fn aboost(
    a: &ExampleDistribution,
    weak: &dyn WeakLearner,
    p: BoostParams,
    seed: u64,
) -> Result<BoostResult> {
    if a.is_boolean() {
        let (run, stop) = residual_boost(a, Residual::Clipped, weak, p, seed)?;
        return Ok(finish(run, stop, false));
    }
    let split = point_split(a)?;
    let (run, stop) = residual_boost(&split, Residual::Clipped, weak, p, seed)?;
    let mut result = finish(run, stop, true);
    result.ensemble = unsplit(&result.ensemble, a.domain())?;
    Ok(result)
}

/// Reads a split-domain ensemble back on the original domain. Every step must
/// agree on the two copies of each point.
pub fn unsplit(e: &Ensemble, domain: Domain) -> Result<Ensemble> {
    let size = domain.size();
    let mut out = Ensemble::new(domain);
    for (i, s) in e.steps().iter().enumerate() {
        let base = match s.base.as_parity() {
            Some((mask, negated)) if mask >> domain.bits() == 0 => {
                BoundedFn::parity(domain, mask, negated)?
            }
            _ => {
                let v = s.base.values();
                if let Some(x) = (0..size).find(|&x| v[x] != v[x + size]) {
                    return Err(Error::Contract(format!(
                        "step {i} separates the split copies of point {x}"
                    )));
                }
                BoundedFn::from_table(domain, v[..size].to_vec())?
            }
        };
        out.push(s.kind, s.weight, base)?;
    }
    Ok(out)
}

/// When the reweighting booster stops on its own.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReweightStop {
    /// Stop once the error is at most `eps/2`, or when it has not improved by
    /// more than `eps/4` over `ceil(gamma^-2)` consecutive updates.
    Adaptive,
    /// Stop as soon as the error drops below the given level.
    Below(f64),
}

/// A reweighting run together with its final state.
#[derive(Clone, Debug)]
pub struct ReweightRun {
    pub result: BoostResult,
    /// Final `h_t` as a dense table.
    pub h: Vec<f64>,
    /// `D_{h_t}` and `N_{h_t}`, absent after a zero residual.
    pub last: Option<Reweighted>,
    pub final_error: f64,
}

/// Boosting by reweighting: the weak learner sees `(D_h, f)`. The output has
/// error at most `Delta(A, C)/(1 - 2 alpha) + eps` for a distribution-
/// independent weak learner.
pub fn aboostdi(
    a: &ExampleDistribution,
    weak: &dyn WeakLearner,
    p: BoostParams,
    seed: u64,
) -> Result<BoostResult> {
    Ok(reweight_boost(a, weak, p, seed, ReweightStop::Adaptive)?.result)
}

/// The reweighting loop with an explicit stopping rule.
pub fn reweight_boost(
    a: &ExampleDistribution,
    weak: &dyn WeakLearner,
    p: BoostParams,
    seed: u64,
    stop_rule: ReweightStop,
) -> Result<ReweightRun> {
    if let Some(x) = a.label().first_non_boolean() {
        return Err(Error::NotBoolean(x));
    }
    let caps = p.reweighted_cap() + p.balance_cap();
    let mut run = Run::new(a, p, seed, caps)?;
    let weak_est = p.estimator(p.gamma / 4.0, caps)?;
    let balance_est = p.estimator(p.epsilon / 4.0, caps)?;
    let window = (1.0 / (p.gamma * p.gamma)).ceil() as usize;
    let f = a.label().clone();

    let mut potential = Residual::Clipped.potential(a, &run.h);
    let mut rw = Some(reweighted_dh(a, &run.h_fn()?)?);
    run.push_row(RowKind::Init, None, potential, rw.as_ref())?;
    let mut errors = vec![run.transcript.rows[0].error_estimate];

    let stop = loop {
        let Some(current) = rw.clone() else {
            break StopReason::ZeroResidual;
        };
        let err = *errors.last().expect("initial error recorded");
        match stop_rule {
            ReweightStop::Adaptive => {
                if err <= p.epsilon / 2.0 {
                    break StopReason::TargetReached;
                }
                if errors.len() > window
                    && errors[errors.len() - 1 - window] - err <= p.epsilon / 4.0
                {
                    break StopReason::TargetReached;
                }
            }
            ReweightStop::Below(level) => {
                // A tie with `level` is not a refutation.
                if err < level - DROP_TOL {
                    break StopReason::TargetReached;
                }
            }
        }

        // Balancing keeps <P1(f - h), -sign h>_D below eps.
        let h_fn = run.h_fn()?;
        let clipped = residual_clipped(a, &h_fn)?;
        let g = sign_table(a.domain(), &run.h, -1.0)?;
        let corr = estimate_correlation(&clipped, &g, balance_est, seed, slot(run.updates(), 1))?;
        let (kind, gamma_hat, weight, base) = if corr / 2.0 >= p.epsilon / 2.0 {
            let gamma_hat = corr / 2.0;
            let weight = gamma_hat.max(p.epsilon / 4.0).min(1.0);
            (StepKind::Balance, gamma_hat, weight, g)
        } else {
            run.weak_calls += 1;
            let round = ExampleDistribution::new(current.dist.clone(), f.clone())?;
            match weak.learn(&round, child_seed(seed, run.weak_calls as u64))? {
                WeakOutcome::Fail { .. } => break StopReason::BothFailed,
                WeakOutcome::Success { hypothesis, .. } => {
                    let corr = estimate_correlation(
                        &round,
                        &hypothesis,
                        weak_est,
                        seed,
                        slot(run.updates(), 0),
                    )?;
                    let gamma_hat = corr / 2.0;
                    if gamma_hat <= 3.0 * p.gamma / 4.0 {
                        break StopReason::BothFailed;
                    }
                    let weight = (gamma_hat * current.norm).min(1.0);
                    (StepKind::Weak, gamma_hat, weight, hypothesis)
                }
            }
        };

        run.update(kind, weight, base)?;
        let next = Residual::Clipped.potential(a, &run.h);
        run.check_drop(potential, next, 3.0 * weight * weight, "reweighted")?;
        if kind == StepKind::Weak && p.mode == Mode::Exact {
            let factor = 1.0 - gamma_hat * gamma_hat * current.norm;
            if next > potential * factor + DROP_TOL {
                return Err(Error::Contract(format!(
                    "update {} missed the multiplicative drop: {next} > {potential} * {factor}",
                    run.updates()
                )));
            }
        }
        potential = next;
        rw = match reweighted_dh(a, &run.h_fn()?) {
            Ok(r) => Some(r),
            Err(Error::ZeroResidual) => None,
            Err(e) => return Err(e),
        };
        let row_kind = match kind {
            StepKind::Weak => RowKind::Weak,
            StepKind::Balance => RowKind::Balance,
        };
        run.push_row(row_kind, Some(gamma_hat), potential, rw.as_ref())?;
        errors.push(
            run.transcript
                .rows
                .last()
                .expect("row pushed")
                .error_estimate,
        );
        if run.weak_updates >= p.reweighted_cap() || run.balance_updates >= p.balance_cap() {
            break StopReason::RoundCapHit;
        }
    };
    let h = run.h.clone();
    let final_error = *errors.last().expect("initial error recorded");
    Ok(ReweightRun {
        result: finish(run, stop, false),
        h,
        last: rw,
        final_error,
    })
}
