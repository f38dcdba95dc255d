//! Weak agnostic learners: exhaustive class scans, a throttled test double,
//! exact Walsh-Hadamard parity search and Kushilevitz-Mansour search from
//! point queries.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concepts::{ClassKind, ConceptClass, SCAN_LIMIT};
use crate::error::{Error, Result};
use crate::fourier::{argmax_abs, correlations, wht_in_place};
use crate::numeric::{parity_sign, CompensatedSum};
use crate::oracles::QueryAccess;
use crate::rng::{stream, Purpose};
use crate::space::{inner_product, BoundedFn, Domain, ExampleDistribution};

/// Declared `(alpha, gamma)` of a weak learner: whenever some concept has
/// advantage at least `alpha`, it returns a hypothesis with advantage at
/// least `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub alpha: f64,
    pub gamma: f64,
}

/// Outcome of one weak-learner call.
#[derive(Clone, Debug)]
pub enum WeakOutcome {
    /// `advantage` is `Gamma(A_i, hypothesis)` measured on the round
    /// distribution.
    Success {
        hypothesis: BoundedFn,
        advantage: f64,
    },
    Fail {
        reason: String,
    },
}

impl WeakOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Self::Success { .. })
    }
}

/// A weak agnostic learner run on the round distributions a booster builds.
pub trait WeakLearner {
    fn contract(&self) -> Contract;

    fn learn(&self, round: &ExampleDistribution, seed: u64) -> Result<WeakOutcome>;

    /// Point queries issued so far, for learners that use them.
    fn queries(&self) -> u64 {
        0
    }
}

/// Exact advantage `<phi, g>_D / 2` of a hypothesis on a round.
pub fn certified_advantage(round: &ExampleDistribution, g: &BoundedFn) -> Result<f64> {
    Ok(inner_product(round.base(), round.label(), g)? / 2.0)
}

/// Best member of a class on a round, with its correlation `<phi, c>_D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestMember {
    pub index: u64,
    pub negated: bool,
    pub correlation: f64,
}

/// Scans the class for the member (or negation, when allowed) with the
/// largest correlation. Parities go through one transform of `D phi`; other
/// classes are scanned member by member. Ties go to the lowest index.
pub fn best_member(round: &ExampleDistribution, class: &ConceptClass) -> Result<BestMember> {
    let domain = round.domain();
    if class.bits() > domain.bits() {
        return Err(Error::ClassDomain {
            class: class.bits(),
            domain: domain.bits(),
        });
    }
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let corr: Vec<f64> = match class.kind() {
        ClassKind::AllParities => {
            let mut c = correlations(round.base(), round.label())?;
            c.truncate(1usize << class.bits());
            c
        }
        _ => {
            if class.len() > SCAN_LIMIT {
                return Err(Error::ClassTooLarge {
                    size: class.len(),
                    limit: SCAN_LIMIT,
                });
            }
            let d = round.base();
            let phi = round.label().values();
            (0..class.len())
                .map(|i| d.expect(|x| phi[x] * class.eval(i, x)))
                .collect()
        }
    };
    let mut best = BestMember {
        index: 0,
        negated: false,
        correlation: f64::NEG_INFINITY,
    };
    for (i, &c) in corr.iter().enumerate() {
        if c > best.correlation {
            best = BestMember {
                index: i as u64,
                negated: false,
                correlation: c,
            };
        }
        if class.negation_closed() && -c > best.correlation {
            best = BestMember {
                index: i as u64,
                negated: true,
                correlation: -c,
            };
        }
    }
    Ok(best)
}

/// Returns the best member when its advantage reaches `gamma`: a
/// `(gamma, gamma)`-weak learner, hence `(alpha, gamma)` for `alpha >= gamma`.
#[derive(Clone, Debug)]
pub struct ExhaustiveWeak {
    pub class: ConceptClass,
    pub alpha: f64,
    pub gamma: f64,
}

impl ExhaustiveWeak {
    pub fn new(class: ConceptClass, alpha: f64, gamma: f64) -> Result<Self> {
        check_contract(alpha, gamma)?;
        Ok(Self {
            class,
            alpha,
            gamma,
        })
    }
}

fn check_contract(alpha: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= alpha && alpha <= 0.5) {
        return Err(Error::Param(format!(
            "weak contract needs 0 < gamma <= alpha <= 1/2, got alpha {alpha}, gamma {gamma}"
        )));
    }
    Ok(())
}

impl WeakLearner for ExhaustiveWeak {
    fn contract(&self) -> Contract {
        Contract {
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    fn learn(&self, round: &ExampleDistribution, _seed: u64) -> Result<WeakOutcome> {
        let best = best_member(round, &self.class)?;
        let advantage = best.correlation / 2.0;
        if advantage < self.gamma {
            return Ok(WeakOutcome::Fail {
                reason: format!("best advantage {advantage:.6} below {}", self.gamma),
            });
        }
        let hypothesis = self
            .class
            .member(best.index, best.negated, round.domain())?;
        Ok(WeakOutcome::Success {
            hypothesis,
            advantage,
        })
    }
}

/// Test double that exercises `alpha > gamma`: it fails unless some member
/// reaches advantage `alpha`, and otherwise degrades that member with a
/// seeded sign mask until the advantage lands in `[gamma, 2 gamma]`.
#[derive(Clone, Debug)]
pub struct ThrottledWeak {
    pub class: ConceptClass,
    pub alpha: f64,
    pub gamma: f64,
    /// When false the mask is identically `+1` and the learner returns the
    /// best member unchanged.
    pub masking: bool,
    pub retries: u32,
}

impl ThrottledWeak {
    pub fn new(class: ConceptClass, alpha: f64, gamma: f64) -> Result<Self> {
        check_contract(alpha, gamma)?;
        Ok(Self {
            class,
            alpha,
            gamma,
            masking: true,
            retries: 8,
        })
    }

    pub fn without_mask(mut self) -> Self {
        self.masking = false;
        self
    }
}

impl WeakLearner for ThrottledWeak {
    fn contract(&self) -> Contract {
        Contract {
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    fn learn(&self, round: &ExampleDistribution, seed: u64) -> Result<WeakOutcome> {
        let best = best_member(round, &self.class)?;
        let top = best.correlation / 2.0;
        if top < self.alpha {
            return Ok(WeakOutcome::Fail {
                reason: format!("best advantage {top:.6} below alpha {}", self.alpha),
            });
        }
        let domain = round.domain();
        let member = self.class.member(best.index, best.negated, domain)?;
        if !self.masking {
            return Ok(WeakOutcome::Success {
                hypothesis: member,
                advantage: top,
            });
        }
        // The mask lives on the class coordinates so the output stays a
        // function of them (point-split rounds add a coordinate on top).
        let low = Domain::new(self.class.bits())?;
        let mut contrib = vec![0.0; low.size()];
        let (d, phi) = (round.base(), round.label().values());
        let c = member.values();
        for x in domain.points() {
            contrib[x & low.mask()] += d.prob(x) * phi[x] * c[x] / 2.0;
        }
        let (lo, hi) = (self.gamma, 2.0 * self.gamma);
        for attempt in 0..self.retries {
            let mut rng = stream(seed, Purpose::Mask, u64::from(attempt));
            let mut order: Vec<usize> = low.points().collect();
            order.shuffle(&mut rng);
            let mut mask = vec![1.0; low.size()];
            let mut adv = top;
            for &x in &order {
                if adv <= hi {
                    break;
                }
                let w = contrib[x];
                if w > 0.0 && adv - 2.0 * w >= lo {
                    mask[x] = -1.0;
                    adv -= 2.0 * w;
                }
            }
            let g = BoundedFn::from_fn(domain, |x| c[x] * mask[x & low.mask()])?;
            let measured = certified_advantage(round, &g)?;
            if (lo..=hi).contains(&measured) {
                return Ok(WeakOutcome::Success {
                    hypothesis: g,
                    advantage: measured,
                });
            }
        }
        Ok(WeakOutcome::Fail {
            reason: format!(
                "no mask put the advantage in [{lo}, {hi}] after {} attempts",
                self.retries
            ),
        })
    }
}

/// Sign-corrected parity of largest `|hat phi(a)|` under a uniform marginal,
/// from a full transform. Fails only below the caller's threshold.
#[derive(Clone, Debug)]
pub struct ParityExact {
    /// Class coordinates searched; masks range over `0..2^bits`.
    pub bits: u32,
    pub alpha: f64,
    pub threshold: f64,
}

impl ParityExact {
    pub fn new(bits: u32, alpha: f64, threshold: f64) -> Result<Self> {
        check_contract(alpha, threshold)?;
        Domain::new(bits)?;
        Ok(Self {
            bits,
            alpha,
            threshold,
        })
    }
}

/// Full spectrum of the label under a uniform marginal.
pub fn uniform_spectrum(round: &ExampleDistribution) -> Result<Vec<f64>> {
    if !round.base().is_uniform() {
        return Err(Error::NonUniform);
    }
    Ok(crate::fourier::coefficients(round.label()))
}

impl WeakLearner for ParityExact {
    fn contract(&self) -> Contract {
        Contract {
            alpha: self.alpha,
            gamma: self.threshold,
        }
    }

    fn learn(&self, round: &ExampleDistribution, _seed: u64) -> Result<WeakOutcome> {
        let spectrum = uniform_spectrum(round)?;
        let limit = 1usize << self.bits.min(round.domain().bits());
        let a = argmax_abs(&spectrum, limit).expect("nonempty spectrum");
        let advantage = spectrum[a].abs() / 2.0;
        if advantage < self.threshold {
            return Ok(WeakOutcome::Fail {
                reason: format!("largest coefficient gives advantage {advantage:.6}"),
            });
        }
        Ok(WeakOutcome::Success {
            hypothesis: BoundedFn::parity(round.domain(), a as u64, spectrum[a] < 0.0)?,
            advantage,
        })
    }
}

/// Heavy Fourier coefficient found by [`km_search`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierIndex {
    pub mask: u64,
    pub coefficient: f64,
}

/// Parameters of the prefix search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmConfig {
    pub theta: f64,
    pub delta: f64,
    /// When the sampled estimates would cost at least as many queries as
    /// reading the whole table, read the table once and use exact bucket
    /// weights instead.
    pub exhaustive_when_cheaper: bool,
    pub max_queries: Option<u64>,
}

impl KmConfig {
    pub fn new(theta: f64, delta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Param(format!(
                "KM needs theta in (0, 1] and delta in (0, 1), got {theta}, {delta}"
            )));
        }
        Ok(Self {
            theta,
            delta,
            exhaustive_when_cheaper: true,
            max_queries: None,
        })
    }

    pub fn sampled_only(mut self) -> Self {
        self.exhaustive_when_cheaper = false;
        self
    }

    /// Per-estimate confidence `delta / (levels 4/theta^2)`.
    pub fn estimate_confidence(&self, bits: u32) -> f64 {
        let levels = f64::from(bits) + 1.0;
        self.delta / (levels * 4.0 / (self.theta * self.theta))
    }

    /// Sample pairs for a bucket estimate within `theta^2/4`. Products lie in
    /// `[-1, 1]`, so Hoeffding asks for `2 ln(2/conf) / tol^2`.
    pub fn bucket_samples(&self, bits: u32) -> u64 {
        let tol = self.theta * self.theta / 4.0;
        (2.0 * (2.0 / self.estimate_confidence(bits)).ln() / (tol * tol)).ceil() as u64
    }

    /// Samples for a single coefficient within `theta/4`.
    pub fn coefficient_samples(&self, bits: u32) -> u64 {
        let tol = self.theta / 4.0;
        (2.0 * (2.0 / self.estimate_confidence(bits)).ln() / (tol * tol)).ceil() as u64
    }
}

/// Result of a prefix search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmOutput {
    pub heavy: Vec<FourierIndex>,
    /// Surviving buckets per prefix length `1..=n`.
    pub survivors: Vec<usize>,
    pub queries: u64,
    pub exhaustive: bool,
}

/// Kushilevitz-Mansour search over masks, extending prefixes on the low
/// coordinates. A bucket `p` of length `k` holds every mask whose low `k`
/// bits equal `p`; its weight `sum hat f(a)^2` is estimated as
/// `E[f(y1 z) f(y2 z) chi_p(y1 xor y2)]` with `y1, y2` the low `k` bits and
/// `z` the rest. Buckets are kept at estimated weight `>= theta^2/2`, and
/// full-length masks at estimated `|hat f(a)| >= 3 theta/4`.
pub fn km_search(access: &dyn QueryAccess, cfg: &KmConfig, seed: u64) -> Result<KmOutput> {
    let domain = access.domain();
    let n = domain.bits();
    let start = access.queries();
    let pairs = cfg.bucket_samples(n);
    let exhaustive = cfg.exhaustive_when_cheaper && 2 * pairs >= domain.size() as u64;
    let spectrum = if exhaustive {
        let mut v: Vec<f64> = domain.points().map(|x| access.query(x)).collect();
        wht_in_place(&mut v);
        let scale = 1.0 / domain.size() as f64;
        v.iter_mut().for_each(|c| *c *= scale);
        Some(v)
    } else {
        None
    };
    let budget_check = |access: &dyn QueryAccess| -> Result<()> {
        match cfg.max_queries {
            Some(limit) if access.queries() - start > limit => {
                Err(Error::QueryBudget(access.queries() - start))
            }
            _ => Ok(()),
        }
    };

    let keep_bucket = cfg.theta * cfg.theta / 2.0;
    let keep_coefficient = 3.0 * cfg.theta / 4.0;
    let mut frontier: Vec<u64> = vec![0];
    let mut survivors = Vec::with_capacity(n as usize);
    let mut estimate_index: u64 = 0;
    for k in 1..=n {
        let mut next = Vec::new();
        for &p in &frontier {
            for child in [p, p | 1 << (k - 1)] {
                let weight = match &spectrum {
                    Some(s) => exact_bucket_weight(s, child, k),
                    None => {
                        estimate_index += 1;
                        let mut rng = stream(seed, Purpose::Query, estimate_index);
                        let w = sampled_bucket_weight(access, child, k, pairs, &mut rng);
                        budget_check(access)?;
                        w
                    }
                };
                if weight >= keep_bucket {
                    next.push(child);
                }
            }
        }
        survivors.push(next.len());
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }

    let mut heavy = Vec::new();
    let coefficient_samples = cfg.coefficient_samples(n);
    for &a in &frontier {
        let coefficient = match &spectrum {
            Some(s) => s[a as usize],
            None => {
                estimate_index += 1;
                let mut rng = stream(seed, Purpose::Query, estimate_index);
                let mut acc = CompensatedSum::new();
                for _ in 0..coefficient_samples {
                    let x = rng.gen_range(0..domain.size());
                    acc.add(access.query(x) * parity_sign(a, x));
                }
                budget_check(access)?;
                acc.value() / coefficient_samples as f64
            }
        };
        if coefficient.abs() >= keep_coefficient {
            heavy.push(FourierIndex {
                mask: a,
                coefficient,
            });
        }
    }
    Ok(KmOutput {
        heavy,
        survivors,
        queries: access.queries() - start,
        exhaustive,
    })
}

fn exact_bucket_weight(spectrum: &[f64], prefix: u64, k: u32) -> f64 {
    let step = 1usize << k;
    spectrum[prefix as usize..]
        .iter()
        .step_by(step)
        .map(|c| c * c)
        .sum()
}

fn sampled_bucket_weight<R: Rng>(
    access: &dyn QueryAccess,
    prefix: u64,
    k: u32,
    pairs: u64,
    rng: &mut R,
) -> f64 {
    let n = access.domain().bits();
    let low = (1usize << k) - 1;
    let high_count = 1usize << (n - k);
    let mut acc = CompensatedSum::new();
    for _ in 0..pairs {
        let z = rng.gen_range(0..high_count) << k;
        let y1 = rng.gen_range(0..=low);
        let y2 = rng.gen_range(0..=low);
        let v = access.query(z | y1) * access.query(z | y2) * parity_sign(prefix, y1 ^ y2);
        acc.add(v);
    }
    acc.value() / pairs as f64
}

/// Counts queries against a dense round label.
struct LabelQueries<'a> {
    label: &'a BoundedFn,
    count: &'a AtomicU64,
}

impl QueryAccess for LabelQueries<'_> {
    fn domain(&self) -> Domain {
        self.label.domain()
    }

    fn query(&self, x: usize) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.label.value(x)
    }

    fn queries(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

/// Parity weak learner driven by [`km_search`] over point queries to the
/// round label. Each query to a residual label costs one membership query
/// to the target, since the booster knows its own hypothesis.
#[derive(Debug)]
pub struct KmParityWeak {
    pub config: KmConfig,
    pub alpha: f64,
    pub gamma: f64,
    queries: AtomicU64,
}

impl KmParityWeak {
    pub fn new(config: KmConfig, alpha: f64, gamma: f64) -> Result<Self> {
        check_contract(alpha, gamma)?;
        Ok(Self {
            config,
            alpha,
            gamma,
            queries: AtomicU64::new(0),
        })
    }
}

impl WeakLearner for KmParityWeak {
    fn contract(&self) -> Contract {
        Contract {
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    fn learn(&self, round: &ExampleDistribution, seed: u64) -> Result<WeakOutcome> {
        if !round.base().is_uniform() {
            return Err(Error::NonUniform);
        }
        let access = LabelQueries {
            label: round.label(),
            count: &self.queries,
        };
        let out = km_search(&access, &self.config, seed)?;
        let Some(best) = out.heavy.iter().fold(None::<FourierIndex>, |b, c| match b {
            Some(b) if b.coefficient.abs() >= c.coefficient.abs() => Some(b),
            _ => Some(*c),
        }) else {
            return Ok(WeakOutcome::Fail {
                reason: "no heavy coefficient found".into(),
            });
        };
        let hypothesis = BoundedFn::parity(round.domain(), best.mask, best.coefficient < 0.0)?;
        let advantage = certified_advantage(round, &hypothesis)?;
        Ok(WeakOutcome::Success {
            hypothesis,
            advantage,
        })
    }

    fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}
