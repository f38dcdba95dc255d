//! Example generation, the label and marginal transformations boosters feed
//! back to weak learners, statistical estimation, and the brute-force optimum.

use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concepts::{ConceptClass, SCAN_LIMIT};
use crate::error::{Error, Result};
use crate::numeric::{csum, CompensatedSum};
use crate::rng::{stream, Purpose};
use crate::space::{
    project_p1, BaseDistribution, BoundedFn, Domain, ExampleDistribution, Measure, PointSampler,
};

/// One draw `(x, b)` with `b` in `{-1, +1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: usize,
    pub b: i8,
}

#[inline]
fn label_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> i8 {
    if rng.gen::<f64>() < (1.0 + mean) / 2.0 {
        1
    } else {
        -1
    }
}

/// `m` i.i.d. examples: `x ~ D`, then `b = +1` with probability `(1 + phi(x))/2`.
pub fn draw_examples(a: &ExampleDistribution, m: usize, seed: u64) -> Vec<LabeledExample> {
    draw_examples_stream(a, m, seed, 0)
}

/// As [`draw_examples`], on the numbered stream `index`.
pub fn draw_examples_stream(
    a: &ExampleDistribution,
    m: usize,
    seed: u64,
    index: u64,
) -> Vec<LabeledExample> {
    let mut rng = stream(seed, Purpose::Examples, index);
    let sampler = a.base().sampler();
    let label = a.label();
    (0..m)
        .map(|_| {
            let x = sampler.draw(&mut rng);
            LabeledExample {
                x,
                b: label_draw(label.value(x), &mut rng),
            }
        })
        .collect()
}

/// Writes examples as JSON lines.
pub fn write_examples<W: Write>(out: &mut W, examples: &[LabeledExample]) -> Result<()> {
    for e in examples {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_examples<R: BufRead>(input: R) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: LabeledExample = serde_json::from_str(&line)?;
        if e.b != 1 && e.b != -1 {
            return Err(Error::Format(format!("label {} is not +-1", e.b)));
        }
        out.push(e);
    }
    Ok(out)
}

/// `(D, (phi - h)/2)`.
pub fn residual_half(a: &ExampleDistribution, h: &BoundedFn) -> Result<ExampleDistribution> {
    let label = a.label().half_difference(h)?.materialize();
    ExampleDistribution::new(a.base().clone(), label)
}

/// `(D, P1(f - h))`; needs a Boolean target.
pub fn residual_clipped(a: &ExampleDistribution, h: &BoundedFn) -> Result<ExampleDistribution> {
    if let Some(x) = a.label().first_non_boolean() {
        return Err(Error::NotBoolean(x));
    }
    let label = a.label().clipped_difference(h)?.materialize();
    ExampleDistribution::new(a.base().clone(), label)
}

/// Splits each point `x` into `(x, +)` at `x` and `(x, -)` at `x + 2^n`, with
/// masses `D(x)(1 + phi(x))/2` and `D(x)(1 - phi(x))/2` and targets `+1`, `-1`.
/// Functions of the original domain are read on the wider one through
/// [`BoundedFn::lift`].
pub fn point_split(a: &ExampleDistribution) -> Result<ExampleDistribution> {
    let domain = a.domain();
    let wide = domain.widened()?;
    let size = domain.size();
    let label = a.label();
    let mut probs = vec![0.0; wide.size()];
    for x in domain.points() {
        let p = a.base().prob(x);
        let v = label.value(x).clamp(-1.0, 1.0);
        probs[x] = p * (1.0 + v) / 2.0;
        probs[x + size] = p * (1.0 - v) / 2.0;
    }
    // The pair masses sum to D(x) up to rounding; renormalize so the mass
    // check sees exactly the original total.
    let total = csum(probs.iter().copied());
    probs.iter_mut().for_each(|p| *p /= total);
    let base = BaseDistribution::explicit(wide, probs)?;
    let target = BoundedFn::from_fn(wide, |x| if x < size { 1.0 } else { -1.0 })?;
    ExampleDistribution::new(base, target)
}

/// The reweighted marginal `D_h(x) = D(x) |P1(f(x) - h(x))| / N_h`.
#[derive(Clone, Debug)]
pub struct Reweighted {
    pub dist: BaseDistribution,
    pub norm: f64,
    /// `|P1(f - h)|` per point; the rejection sampler's acceptance table.
    pub acceptance: Vec<f64>,
}

impl Reweighted {
    /// `max_x D_h(x) / D(x)`.
    pub fn smoothness(&self) -> f64 {
        self.acceptance.iter().fold(0.0f64, |m, a| m.max(*a)) / self.norm
    }

    /// Draws labeled examples `(x, f(x))` with `x ~ D_h` by rejection from
    /// `D`. Gives up after `max_tries` proposals.
    pub fn draw(
        &self,
        base: &BaseDistribution,
        target: &BoundedFn,
        m: usize,
        seed: u64,
        index: u64,
        max_tries: usize,
    ) -> Result<Vec<LabeledExample>> {
        let mut rng = stream(seed, Purpose::Examples, index);
        let sampler: PointSampler = base.sampler();
        let mut out = Vec::with_capacity(m);
        let mut tries = 0usize;
        while out.len() < m {
            if tries >= max_tries {
                return Err(Error::QueryBudget(tries as u64));
            }
            tries += 1;
            let x = sampler.draw(&mut rng);
            if rng.gen::<f64>() < self.acceptance[x] {
                out.push(LabeledExample {
                    x,
                    b: if target.value(x) > 0.0 { 1 } else { -1 },
                });
            }
        }
        Ok(out)
    }
}

/// Computes `D_h` and `N_h = E_D[|P1(f - h)|]` exactly.
pub fn reweighted_dh(a: &ExampleDistribution, h: &BoundedFn) -> Result<Reweighted> {
    if let Some(x) = a.label().first_non_boolean() {
        return Err(Error::NotBoolean(x));
    }
    let d = a.base();
    let f = a.label().values();
    let hv = h.values();
    if h.domain() != a.domain() {
        return Err(Error::DomainMismatch {
            expected: a.domain().bits(),
            found: h.domain().bits(),
        });
    }
    let acceptance: Vec<f64> = f
        .iter()
        .zip(hv.iter())
        .map(|(fx, hx)| project_p1(fx - hx).abs())
        .collect();
    let norm = d.expect(|x| acceptance[x]);
    if norm <= 0.0 {
        return Err(Error::ZeroResidual);
    }
    let weights: Vec<f64> = a
        .domain()
        .points()
        .map(|x| d.prob(x) * acceptance[x])
        .collect();
    let dist = BaseDistribution::from_weights(a.domain(), &weights)?;
    Ok(Reweighted {
        dist,
        norm,
        acceptance,
    })
}

/// `(D, f M)`.
pub fn measure_product(a: &ExampleDistribution, m: &Measure) -> Result<ExampleDistribution> {
    if let Some(x) = a.label().first_non_boolean() {
        return Err(Error::NotBoolean(x));
    }
    let label = a.label().product(m.as_fn())?.materialize();
    ExampleDistribution::new(a.base().clone(), label)
}

/// Hoeffding sample budget for one estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationBudget {
    pub tolerance: f64,
    pub confidence: f64,
}

impl EstimationBudget {
    pub fn new(tolerance: f64, confidence: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < 1.0) || !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::Param(format!(
                "budget needs tolerance and confidence in (0, 1), got {tolerance}, {confidence}"
            )));
        }
        Ok(Self {
            tolerance,
            confidence,
        })
    }

    /// `ceil(ln(2/confidence) / (2 tolerance^2))`.
    pub fn samples(&self) -> usize {
        ((2.0 / self.confidence).ln() / (2.0 * self.tolerance * self.tolerance)).ceil() as usize
    }
}

/// How expectations over an example distribution are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimator {
    Exact,
    Sampled(EstimationBudget),
}

/// Estimate of `<phi, g>_D`. Sampled mode averages `b g(x)` over
/// `budget.samples()` draws; the tolerance is on the error scale
/// `(1 - <phi, g>)/2`, so the correlation itself is within twice that.
pub fn estimate_correlation(
    a: &ExampleDistribution,
    g: &BoundedFn,
    est: Estimator,
    seed: u64,
    index: u64,
) -> Result<f64> {
    match est {
        Estimator::Exact => crate::space::inner_product(a.base(), a.label(), g),
        Estimator::Sampled(budget) => {
            if g.domain() != a.domain() {
                return Err(Error::DomainMismatch {
                    expected: a.domain().bits(),
                    found: g.domain().bits(),
                });
            }
            let m = budget.samples();
            let mut rng = stream(seed, Purpose::WeakEstimate, index);
            let sampler = a.base().sampler();
            let label = a.label();
            let mut acc = CompensatedSum::new();
            for _ in 0..m {
                let x = sampler.draw(&mut rng);
                let b = f64::from(label_draw(label.value(x), &mut rng));
                acc.add(b * g.value(x));
            }
            Ok(acc.value() / m as f64)
        }
    }
}

/// Result of the brute-force scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    /// `Delta(A, C)`.
    pub delta: f64,
    pub index: u64,
    pub negated: bool,
    pub class_size: u64,
}

/// `min_c Delta(A, c)` by scanning every member (and its negation when the
/// class is negation-closed). Ties go to the lowest index, unnegated first.
pub fn exact_opt(a: &ExampleDistribution, class: &ConceptClass) -> Result<OptResult> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if class.len() > SCAN_LIMIT {
        return Err(Error::ClassTooLarge {
            size: class.len(),
            limit: SCAN_LIMIT,
        });
    }
    if class.bits() > a.domain().bits() {
        return Err(Error::ClassDomain {
            class: class.bits(),
            domain: a.domain().bits(),
        });
    }
    let d = a.base();
    let phi = a.label().values();
    let mut best: Option<OptResult> = None;
    for i in 0..class.len() {
        let corr = d.expect(|x| phi[x] * class.eval(i, x));
        let mut consider = |delta: f64, negated: bool| {
            if best.as_ref().is_none_or(|b| delta < b.delta) {
                best = Some(OptResult {
                    delta,
                    index: i,
                    negated,
                    class_size: class.len(),
                });
            }
        };
        consider((1.0 - corr) / 2.0, false);
        if class.negation_closed() {
            consider((1.0 + corr) / 2.0, true);
        }
    }
    Ok(best.expect("class is nonempty"))
}

/// Point-query access to a real-valued function.
pub trait QueryAccess {
    fn domain(&self) -> Domain;
    fn query(&self, x: usize) -> f64;
    fn queries(&self) -> u64;
}

/// Membership oracle for a fixed target, with a query counter.
#[derive(Debug)]
pub struct MembershipOracle {
    target: BoundedFn,
    count: AtomicU64,
}

impl MembershipOracle {
    pub fn new(target: BoundedFn) -> Self {
        Self {
            target,
            count: AtomicU64::new(0),
        }
    }

    pub fn target(&self) -> &BoundedFn {
        &self.target
    }
}

impl QueryAccess for MembershipOracle {
    fn domain(&self) -> Domain {
        self.target.domain()
    }

    fn query(&self, x: usize) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.target.value(x)
    }

    fn queries(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

/// Queries `(f(x) - h(x)) * scale`, clipped or halved as the round requires,
/// where `f` is behind a membership oracle and `h` is known.
pub struct ResidualQueries<'a> {
    pub oracle: &'a MembershipOracle,
    pub hypothesis: &'a [f64],
    pub clipped: bool,
}

impl QueryAccess for ResidualQueries<'_> {
    fn domain(&self) -> Domain {
        self.oracle.domain()
    }

    fn query(&self, x: usize) -> f64 {
        let f = self.oracle.query(x);
        if self.clipped {
            project_p1(f - self.hypothesis[x])
        } else {
            (f - self.hypothesis[x]) / 2.0
        }
    }

    fn queries(&self) -> u64 {
        self.oracle.queries()
    }
}
