//! Executes experiment specs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use agboost_core::apps::{
    audit_fourier_premise, learn_decision_tree, pac_learn_dnf, pac_learn_threshold, Access,
    DnfConfig, ThresholdConfig, ThresholdOutcome, TreeConfig,
};
use agboost_core::boost::{a2boost, aboost, aboostdi, BoostParams, BoostResult, Mode, Transcript};
use agboost_core::codec::EnsembleRecord;
use agboost_core::concepts::{ConceptClass, SCAN_LIMIT};
use agboost_core::hardcore::{
    construct_hardcore_measure, measure_to_set, HardcoreOutcome, HardnessInstance,
};
use agboost_core::learners::{ExhaustiveWeak, ThrottledWeak, WeakLearner};
use agboost_core::oracles::exact_opt;
use agboost_core::space::{delta_gamma, BoundedFn, ExampleDistribution};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{HarnessError, Result};
use crate::families::{InstanceFile, Reference};
use crate::report::{BaselineSource, BoundKind, Report, Rounds};
use crate::spec::{Algorithm, ExperimentSpec, LearnerKind};

/// Everything a run produces before it is written out.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub transcript: Option<Transcript>,
    /// Ensemble, certificate or refutation JSON.
    pub result: Value,
}

/// Wall-clock data, kept apart from the report so reports stay
/// byte-identical across repeated runs.
#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub spec_hash: String,
    pub seconds: f64,
}

fn weak_learner(
    kind: LearnerKind,
    class: ConceptClass,
    alpha: f64,
    gamma: f64,
) -> Result<Box<dyn WeakLearner>> {
    Ok(match kind {
        LearnerKind::Exhaustive => Box::new(ExhaustiveWeak::new(class, alpha, gamma)?),
        LearnerKind::Throttled => Box::new(ThrottledWeak::new(class, alpha, gamma)?),
    })
}

fn error_of(a: &ExampleDistribution, h: &BoundedFn) -> Result<f64> {
    Ok(delta_gamma(a, h)?.0)
}

struct Context {
    spec: ExperimentSpec,
    file: InstanceFile,
    a: ExampleDistribution,
    mode: Mode,
    report: Report,
}

impl Context {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        let file = spec.instance_file()?;
        let a = file.distribution()?;
        let n = a.domain().bits();
        let mode = spec.mode_for(n)?;
        let p = &spec.params;
        let report = Report {
            spec_hash: spec.hash()?,
            algorithm: spec.algorithm,
            mode,
            seed: spec.seed,
            n,
            alpha: p.alpha,
            gamma: p.gamma,
            epsilon: p.epsilon.unwrap_or_default(),
            lambda: p.lambda,
            final_error: 1.0,
            baseline: None,
            baseline_source: None,
            bound_kind: BoundKind::Eps,
            bound: None,
            density: None,
            worst_advantage: None,
            rounds: Rounds::default(),
            stop_reason: None,
            queries: 0,
            audits: BTreeMap::new(),
            transcript: None,
            notes: Vec::new(),
            passed: false,
        };
        Ok(Self {
            spec: spec.clone(),
            file,
            a,
            mode,
            report,
        })
    }

    fn class(&self) -> Result<ConceptClass> {
        self.spec.class.build(self.a.domain())
    }

    /// `Delta(A, C)` by full scan when the class is small enough.
    fn exact_baseline(&mut self, class: &ConceptClass) -> Result<()> {
        if class.len() <= SCAN_LIMIT {
            self.report.baseline = Some(exact_opt(&self.a, class)?.delta);
            self.report.baseline_source = Some(BaselineSource::ExactOpt);
        } else {
            self.report
                .notes
                .push(format!("class of size {} not scanned", class.len()));
        }
        Ok(())
    }

    fn record_boost(&mut self, r: &BoostResult, p: &BoostParams, weak_budget: usize) -> Result<()> {
        self.report.final_error = error_of(&self.a, &r.hypothesis())?;
        self.report.stop_reason = Some(r.stop_reason);
        self.report.rounds = Rounds {
            weak_updates: r.weak_updates,
            balance_updates: r.balance_updates,
            weak_calls: r.weak_calls,
            weak_budget: Some(weak_budget),
            balance_budget: Some(p.balance_budget()),
        };
        if r.split {
            self.report
                .notes
                .push("non-Boolean label: ran on the point-split instance".into());
        }
        Ok(())
    }

    fn record_threshold(&mut self, out: &ThresholdOutcome, budget: usize) {
        self.report.final_error = out.final_error;
        self.report.rounds = Rounds {
            weak_updates: out.rounds,
            balance_updates: 0,
            weak_calls: out.rounds,
            weak_budget: Some(budget),
            balance_budget: None,
        };
        self.report.queries = out.queries;
    }
}

fn boost_params(spec: &ExperimentSpec, mode: Mode) -> Result<BoostParams> {
    let p = &spec.params;
    let need = |v: Option<f64>| v.ok_or_else(|| HarnessError::Spec("missing parameter".into()));
    Ok(BoostParams::new(
        need(p.alpha)?,
        need(p.gamma)?,
        need(p.epsilon)?,
        p.delta(),
        mode,
    )?)
}

fn ensemble_json(r: &BoostResult) -> Result<Value> {
    Ok(serde_json::to_value(r.record())?)
}

/// Runs one spec in memory.
pub fn execute(spec: &ExperimentSpec) -> Result<RunOutput> {
    spec.validate()?;
    let mut cx = Context::new(spec)?;
    let eps = spec.params.epsilon.unwrap_or_default();
    let seed = spec.seed;
    let (transcript, result) = match spec.algorithm {
        Algorithm::A2boost | Algorithm::Aboost | Algorithm::Aboostdi => {
            let p = boost_params(spec, cx.mode)?;
            let class = cx.class()?;
            cx.exact_baseline(&class)?;
            let weak = weak_learner(spec.learner, class, p.alpha, p.gamma)?;
            let (r, kind, budget) = match spec.algorithm {
                Algorithm::A2boost => (
                    a2boost(&cx.a, weak.as_ref(), p, seed)?,
                    BoundKind::OptPlusTwoAlphaPlusEps,
                    p.weak_budget(),
                ),
                Algorithm::Aboost => (
                    aboost(&cx.a, weak.as_ref(), p, seed)?,
                    BoundKind::OptPlusAlphaPlusEps,
                    p.weak_budget(),
                ),
                _ => {
                    let r = aboostdi(&cx.a, weak.as_ref(), p, seed)?;
                    cx.report.audits.insert(
                        "smoothness".into(),
                        smoothness_violations(&r.transcript, eps),
                    );
                    (
                        r,
                        BoundKind::OptOverOneMinusTwoAlphaPlusEps,
                        p.reweighted_cap() / 2,
                    )
                }
            };
            cx.report.bound_kind = kind;
            cx.record_boost(&r, &p, budget)?;
            (Some(r.transcript.clone()), ensemble_json(&r)?)
        }
        Algorithm::LearnDt => {
            let size = spec.params.size.expect("validated");
            let cfg = TreeConfig {
                size,
                epsilon: eps,
                delta: spec.params.delta(),
                access: spec.access.unwrap_or(Access::Dense),
            };
            if ConceptClass::tree_count(cx.a.domain().bits(), size) <= SCAN_LIMIT {
                let class = ConceptClass::trees(cx.a.domain().bits(), size)?;
                cx.exact_baseline(&class)?;
            }
            let reference = match &cx.file.reference {
                Some(r @ Reference::Tree(t)) if t.size() <= size => Some(r.target(cx.a.domain())?),
                _ => None,
            };
            if cx.report.baseline.is_none() {
                if let Some(c) = &reference {
                    cx.report.baseline = Some(error_of(&cx.a, c)?);
                    cx.report.baseline_source = Some(BaselineSource::Reference);
                }
            }
            let out = learn_decision_tree(&cx.a, cfg, seed)?;
            if let Some(c) = &reference {
                let checks = audit_fourier_premise(&cx.a, &out.result.ensemble, c)?;
                let bad = checks.iter().filter(|c| !c.holds()).count() as u64;
                cx.report.audits.insert("fourier_premise".into(), bad);
            }
            let p = BoostParams::new(
                cfg.tau(),
                cfg.parity_gamma(),
                cfg.tau(),
                cfg.delta,
                Mode::Exact,
            )?;
            cx.report.bound_kind = BoundKind::OptPlusEps;
            cx.record_boost(&out.result, &p, p.weak_budget())?;
            cx.report.queries = out.queries;
            (
                Some(out.result.transcript.clone()),
                ensemble_json(&out.result)?,
            )
        }
        Algorithm::LearnDnf => {
            let Some(Reference::Dnf(dnf)) = &cx.file.reference else {
                return Err(HarnessError::Spec("learn-dnf needs a dnf instance".into()));
            };
            let weight = spec.params.weight.unwrap_or(2 * dnf.terms.len() + 1);
            let cfg = DnfConfig {
                weight,
                epsilon: eps,
                delta: spec.params.delta(),
                access: spec.access.unwrap_or(Access::Dense),
            };
            if spec.params.weight.is_none() {
                cx.report
                    .notes
                    .push(format!("W defaulted to 2s + 1 = {weight}"));
            }
            let out = pac_learn_dnf(dnf, cfg, seed)?;
            let tcfg = ThresholdConfig {
                weight,
                epsilon: eps,
            };
            cx.report.bound_kind = BoundKind::Eps;
            cx.record_threshold(&out, tcfg.round_cap() / 2);
            let ens = EnsembleRecord::encode(&out.ensemble);
            (Some(out.transcript.clone()), json!({ "ensemble": ens }))
        }
        Algorithm::ThPac => {
            let weight = spec.params.weight.expect("validated");
            let cfg = ThresholdConfig {
                weight,
                epsilon: eps,
            };
            let class = cx.class()?;
            let learner = weak_learner(
                spec.learner,
                class.clone(),
                match spec.learner {
                    LearnerKind::Exhaustive => cfg.learner_accuracy(),
                    LearnerKind::Throttled => cfg.required_correlation(),
                },
                cfg.learner_accuracy(),
            )?;
            let audit = (cx.mode == Mode::Exact).then_some(&class);
            let out = pac_learn_threshold(&cx.a, learner.as_ref(), audit, cfg, seed)?;
            let floor = 1.0 / weight as f64 - 1e-12;
            if audit.is_some() {
                let bad = out.discriminator.iter().filter(|v| **v < floor).count() as u64;
                cx.report.audits.insert("discriminator".into(), bad);
            }
            cx.report.bound_kind = BoundKind::Eps;
            cx.record_threshold(&out, cfg.round_cap() / 2);
            let ens = EnsembleRecord::encode(&out.ensemble);
            (Some(out.transcript.clone()), json!({ "ensemble": ens }))
        }
        Algorithm::Hardcore => {
            let gamma = spec.params.gamma.expect("validated");
            let class = cx.class()?;
            let inst = match spec.params.lambda {
                Some(l) => HardnessInstance::new(cx.a.clone(), class.clone(), l)?,
                None => HardnessInstance::at_opt(cx.a.clone(), class.clone())?,
            };
            cx.report
                .notes
                .push("circuits of bounded size are modelled by the explicit concept class".into());
            cx.report.notes.extend(inst.warnings.iter().cloned());
            cx.report.lambda = Some(inst.lambda);
            cx.report.baseline = inst.opt;
            cx.report.baseline_source = inst.opt.map(|_| BaselineSource::ExactOpt);
            match construct_hardcore_measure(&inst, gamma, eps, seed)? {
                HardcoreOutcome::Certificate(mut cert) => {
                    if cx.a.base().is_uniform() {
                        cert.set = Some(measure_to_set(
                            &cert.measure,
                            cx.a.base(),
                            cx.a.label(),
                            &class,
                            seed,
                        )?);
                    }
                    cx.report.bound_kind = BoundKind::HardcoreDensity;
                    cx.report.final_error = cert.achieved_error;
                    cx.report.density = Some(cert.density);
                    cx.report.worst_advantage = Some(cert.worst.advantage);
                    cx.report.rounds.weak_updates = cert.rounds;
                    (
                        Some(cert.transcript.clone()),
                        serde_json::to_value(cert.record())?,
                    )
                }
                HardcoreOutcome::Refuted { error, run, .. } => {
                    cx.report.bound_kind = BoundKind::BelowLambda;
                    cx.report.final_error = error;
                    cx.report.stop_reason = Some(run.stop_reason);
                    cx.report.rounds = Rounds {
                        weak_updates: run.weak_updates,
                        balance_updates: run.balance_updates,
                        weak_calls: run.weak_calls,
                        weak_budget: None,
                        balance_budget: None,
                    };
                    (
                        Some(run.transcript.clone()),
                        json!({ "refuted": true, "error": error, "approximator": run.record() }),
                    )
                }
            }
        }
    };
    Ok(RunOutput {
        report: cx.report.finalize(),
        transcript,
        result,
    })
}

/// Rows where a weak call followed a state whose smoothness exceeds
/// `1/(2 err - eps)`.
pub fn smoothness_violations(t: &Transcript, eps: f64) -> u64 {
    use agboost_core::boost::RowKind;
    t.rows
        .windows(2)
        .filter(|w| w[1].kind == RowKind::Weak)
        .filter(|w| {
            let floor = 2.0 * w[0].error_estimate - eps;
            match w[0].smoothness {
                Some(s) if floor > 0.0 => s > 1.0 / floor + 1e-9,
                _ => false,
            }
        })
        .count() as u64
}

/// Runs a spec and writes `report.json`, `transcript.csv`, `result.json`
/// and `timing.json` under `dir`.
pub fn run_to_dir(spec: &ExperimentSpec, dir: &Path) -> Result<Report> {
    let start = Instant::now();
    let mut out = execute(spec)?;
    let seconds = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let write = |name: &str, body: &[u8]| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    };
    if let Some(t) = &out.transcript {
        write("transcript.csv", t.to_csv_string()?.as_bytes())?;
        out.report.transcript = Some("transcript.csv".into());
    }
    write(
        "result.json",
        (serde_json::to_string_pretty(&out.result)? + "\n").as_bytes(),
    )?;
    write("report.json", out.report.to_json()?.as_bytes())?;
    let timing = Timing {
        spec_hash: out.report.spec_hash.clone(),
        seconds,
    };
    write(
        "timing.json",
        (serde_json::to_string_pretty(&timing)? + "\n").as_bytes(),
    )?;
    Ok(out.report)
}

/// Runs specs on up to `jobs` threads; results keep the input order.
pub fn run_batch(specs: &[(ExperimentSpec, PathBuf)], jobs: usize) -> Vec<Result<Report>> {
    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<Report>>> = (0..specs.len()).map(|_| None).collect();
    for (chunk_specs, chunk_out) in specs.chunks(jobs).zip(results.chunks_mut(jobs)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_specs
                .iter()
                .map(|(spec, dir)| s.spawn(move || run_to_dir(spec, dir)))
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(
                    h.join()
                        .unwrap_or_else(|_| Err(HarnessError::Spec("run panicked".into()))),
                );
            }
        });
    }
    results
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
