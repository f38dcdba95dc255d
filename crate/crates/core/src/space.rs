//! Domains, distributions, bounded functions and the `D`-weighted geometry
//! shared by every booster.
//!
//! Points of an `n`-bit domain are the integers `0..2^n`. Functions are
//! either dense tables or lazily evaluated views over other functions; both
//! answer `value(x)` identically, and views can be materialized at any time.

use std::borrow::Cow;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{csum, parity_sign, sign};

/// Hard cap on domain bit width.
pub const MAX_BITS: u32 = 24;

/// Tolerance for range checks on function values.
pub const RANGE_TOL: f64 = 1e-9;

/// Tolerance on the total mass of an explicit distribution.
pub const MASS_TOL: f64 = 1e-12;

/// The Boolean cube `{0,1}^n`, identified with `0..2^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    bits: u32,
}

impl Domain {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::BitWidth(bits));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn size(&self) -> usize {
        1usize << self.bits
    }

    /// Mask selecting the coordinates of this domain.
    pub fn mask(&self) -> usize {
        self.size() - 1
    }

    pub fn points(&self) -> std::ops::Range<usize> {
        0..self.size()
    }

    /// The domain with one extra (top) coordinate.
    pub fn widened(&self) -> Result<Self> {
        Self::new(self.bits + 1)
    }

    fn expect_same(&self, other: &Domain) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                expected: self.bits,
                found: other.bits,
            })
        }
    }
}

/// Marginal distribution over the domain.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseDistribution {
    Uniform(Domain),
    Explicit { domain: Domain, probs: Arc<[f64]> },
}

impl BaseDistribution {
    pub fn uniform(domain: Domain) -> Self {
        Self::Uniform(domain)
    }

    pub fn explicit(domain: Domain, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != domain.size() {
            return Err(Error::TableLength {
                expected: domain.size(),
                found: probs.len(),
            });
        }
        if let Some((x, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::Distribution(format!(
                "probability {p} at point {x} is negative or not finite"
            )));
        }
        let total = csum(probs.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Distribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self::Explicit {
            domain,
            probs: probs.into(),
        })
    }

    /// Builds an explicit distribution from nonnegative weights, normalizing
    /// them to unit mass.
    pub fn from_weights(domain: Domain, weights: &[f64]) -> Result<Self> {
        let total = csum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::Distribution("weights have zero mass".into()));
        }
        Self::explicit(domain, weights.iter().map(|w| w / total).collect())
    }

    pub fn domain(&self) -> Domain {
        match self {
            Self::Uniform(d) => *d,
            Self::Explicit { domain, .. } => *domain,
        }
    }

    #[inline]
    pub fn prob(&self, x: usize) -> f64 {
        match self {
            Self::Uniform(d) => 1.0 / d.size() as f64,
            Self::Explicit { probs, .. } => probs[x],
        }
    }

    pub fn probs(&self) -> Cow<'_, [f64]> {
        match self {
            Self::Uniform(d) => Cow::Owned(vec![1.0 / d.size() as f64; d.size()]),
            Self::Explicit { probs, .. } => Cow::Borrowed(probs),
        }
    }

    /// True when every point carries mass `2^-n`.
    pub fn is_uniform(&self) -> bool {
        match self {
            Self::Uniform(_) => true,
            Self::Explicit { domain, probs } => {
                let u = 1.0 / domain.size() as f64;
                probs.iter().all(|p| (p - u).abs() <= MASS_TOL * u)
            }
        }
    }

    /// Compensated expectation `E_D[f]` of a pointwise function.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        let domain = self.domain();
        match self {
            Self::Uniform(_) => csum(domain.points().map(&f)) / domain.size() as f64,
            Self::Explicit { probs, .. } => csum(
                domain
                    .points()
                    .filter(|&x| probs[x] != 0.0)
                    .map(|x| probs[x] * f(x)),
            ),
        }
    }

    /// Sampler for i.i.d. draws from this distribution.
    pub fn sampler(&self) -> PointSampler {
        match self {
            Self::Uniform(d) => PointSampler::Uniform(d.size()),
            Self::Explicit { probs, .. } => PointSampler::Weighted(
                WeightedIndex::new(probs.iter().copied()).expect("validated distribution"),
            ),
        }
    }
}

/// Draws points from a [`BaseDistribution`].
#[derive(Clone, Debug)]
pub enum PointSampler {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

impl PointSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Self::Uniform(size) => rng.gen_range(0..*size),
            Self::Weighted(w) => w.sample(rng),
        }
    }
}

/// A function from the domain into `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct BoundedFn {
    domain: Domain,
    repr: Repr,
}

#[derive(Clone, Debug)]
enum Repr {
    Table(Arc<[f64]>),
    View(Arc<View>),
}

/// Lazily evaluated compositions of bounded functions.
#[derive(Clone, Debug)]
pub enum View {
    Constant(f64),
    /// `sign * chi_mask(x)`.
    Parity {
        mask: u64,
        sign: f64,
    },
    Neg(BoundedFn),
    Sign(BoundedFn),
    Abs(BoundedFn),
    /// `(f - g) / 2`.
    HalfDifference(BoundedFn, BoundedFn),
    /// `P1(f - g)`.
    ClippedDifference(BoundedFn, BoundedFn),
    Product(BoundedFn, BoundedFn),
    /// A function on a narrower domain read through the low coordinates.
    Lift(BoundedFn),
}

impl BoundedFn {
    /// Dense table; every value must lie in `[-1, 1]` up to [`RANGE_TOL`].
    pub fn from_table(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.size() {
            return Err(Error::TableLength {
                expected: domain.size(),
                found: values.len(),
            });
        }
        check_range(&values, -1.0, 1.0)?;
        Ok(Self {
            domain,
            repr: Repr::Table(values.into()),
        })
    }

    pub fn from_fn(domain: Domain, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::from_table(domain, domain.points().map(f).collect())
    }

    pub fn constant(domain: Domain, c: f64) -> Result<Self> {
        check_range(&[c], -1.0, 1.0)?;
        Ok(Self::view(domain, View::Constant(c)))
    }

    pub fn zero(domain: Domain) -> Self {
        Self::view(domain, View::Constant(0.0))
    }

    /// Signed character `sign * chi_mask`; `mask` must fit the domain.
    pub fn parity(domain: Domain, mask: u64, negated: bool) -> Result<Self> {
        if mask >> domain.bits() != 0 {
            return Err(Error::Param(format!(
                "parity mask {mask:#x} exceeds {} bits",
                domain.bits()
            )));
        }
        let sign = if negated { -1.0 } else { 1.0 };
        Ok(Self::view(domain, View::Parity { mask, sign }))
    }

    fn view(domain: Domain, v: View) -> Self {
        Self {
            domain,
            repr: Repr::View(Arc::new(v)),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn value(&self, x: usize) -> f64 {
        match &self.repr {
            Repr::Table(t) => t[x],
            Repr::View(v) => match v.as_ref() {
                View::Constant(c) => *c,
                View::Parity { mask, sign } => sign * parity_sign(*mask, x),
                View::Neg(f) => -f.value(x),
                View::Sign(f) => sign(f.value(x)),
                View::Abs(f) => f.value(x).abs(),
                View::HalfDifference(f, g) => (f.value(x) - g.value(x)) / 2.0,
                View::ClippedDifference(f, g) => project_p1(f.value(x) - g.value(x)),
                View::Product(f, g) => f.value(x) * g.value(x),
                View::Lift(f) => f.value(x & f.domain.mask()),
            },
        }
    }

    /// Dense values, borrowed when already a table.
    pub fn values(&self) -> Cow<'_, [f64]> {
        match &self.repr {
            Repr::Table(t) => Cow::Borrowed(t),
            Repr::View(_) => Cow::Owned(self.domain.points().map(|x| self.value(x)).collect()),
        }
    }

    /// The same function stored as a dense table.
    pub fn materialize(&self) -> Self {
        match &self.repr {
            Repr::Table(_) => self.clone(),
            Repr::View(_) => Self {
                domain: self.domain,
                repr: Repr::Table(self.values().into_owned().into()),
            },
        }
    }

    pub fn as_view(&self) -> Option<&View> {
        match &self.repr {
            Repr::View(v) => Some(v),
            Repr::Table(_) => None,
        }
    }

    /// `(mask, negated)` when this is a plain signed parity view.
    pub fn as_parity(&self) -> Option<(u64, bool)> {
        match self.as_view()? {
            View::Parity { mask, sign } => Some((*mask, *sign < 0.0)),
            View::Lift(inner) => inner.as_parity(),
            _ => None,
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.first_non_boolean().is_none()
    }

    pub fn first_non_boolean(&self) -> Option<usize> {
        if let Some(View::Parity { .. }) = self.as_view() {
            return None;
        }
        self.domain.points().find(|&x| {
            let v = self.value(x);
            v != 1.0 && v != -1.0
        })
    }

    pub fn neg(&self) -> Self {
        match self.as_view() {
            Some(View::Parity { mask, sign }) => Self::view(
                self.domain,
                View::Parity {
                    mask: *mask,
                    sign: -sign,
                },
            ),
            _ => Self::view(self.domain, View::Neg(self.clone())),
        }
    }

    pub fn sign(&self) -> Self {
        Self::view(self.domain, View::Sign(self.clone()))
    }

    pub fn abs(&self) -> Self {
        Self::view(self.domain, View::Abs(self.clone()))
    }

    pub fn half_difference(&self, other: &Self) -> Result<Self> {
        self.domain.expect_same(&other.domain)?;
        Ok(Self::view(
            self.domain,
            View::HalfDifference(self.clone(), other.clone()),
        ))
    }

    pub fn clipped_difference(&self, other: &Self) -> Result<Self> {
        self.domain.expect_same(&other.domain)?;
        Ok(Self::view(
            self.domain,
            View::ClippedDifference(self.clone(), other.clone()),
        ))
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        self.domain.expect_same(&other.domain)?;
        Ok(Self::view(
            self.domain,
            View::Product(self.clone(), other.clone()),
        ))
    }

    /// Reads this function on a wider domain through its low coordinates.
    pub fn lift(&self, to: Domain) -> Result<Self> {
        if to.bits() < self.domain.bits() {
            return Err(Error::DomainMismatch {
                expected: self.domain.bits(),
                found: to.bits(),
            });
        }
        if to == self.domain {
            return Ok(self.clone());
        }
        Ok(match self.as_view() {
            Some(View::Parity { mask, sign }) => Self::view(
                to,
                View::Parity {
                    mask: *mask,
                    sign: *sign,
                },
            ),
            Some(View::Constant(c)) => Self::view(to, View::Constant(*c)),
            _ => Self::view(to, View::Lift(self.clone())),
        })
    }

    /// Pointwise equality within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.domain == other.domain
            && self
                .domain
                .points()
                .all(|x| (self.value(x) - other.value(x)).abs() <= tol)
    }
}

fn check_range(values: &[f64], lo: f64, hi: f64) -> Result<()> {
    match values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= lo - RANGE_TOL && **v <= hi + RANGE_TOL))
    {
        Some((point, &value)) => Err(Error::OutOfRange {
            point,
            value,
            lo,
            hi,
        }),
        None => Ok(()),
    }
}

/// A labeled-example source `(D, phi)` where `phi(x) = E[b | x]`.
#[derive(Clone, Debug)]
pub struct ExampleDistribution {
    base: BaseDistribution,
    label: BoundedFn,
    boolean: bool,
}

impl ExampleDistribution {
    pub fn new(base: BaseDistribution, label: BoundedFn) -> Result<Self> {
        base.domain().expect_same(&label.domain())?;
        let boolean = label.is_boolean();
        Ok(Self {
            base,
            label,
            boolean,
        })
    }

    pub fn base(&self) -> &BaseDistribution {
        &self.base
    }

    pub fn label(&self) -> &BoundedFn {
        &self.label
    }

    pub fn domain(&self) -> Domain {
        self.base.domain()
    }

    /// True when the label function is `{-1, 1}`-valued.
    pub fn is_boolean(&self) -> bool {
        self.boolean
    }

    /// The same pair with the label function stored densely.
    pub fn materialized(&self) -> Self {
        Self {
            base: self.base.clone(),
            label: self.label.materialize(),
            boolean: self.boolean,
        }
    }
}

/// Kind of an ensemble update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Weak,
    Balance,
}

/// One update `h <- P1(h + weight * base)`.
#[derive(Clone, Debug)]
pub struct Step {
    pub kind: StepKind,
    pub weight: f64,
    pub base: BoundedFn,
}

/// Ordered update sequence; evaluation replays the clipped fold per point.
#[derive(Clone, Debug)]
pub struct Ensemble {
    domain: Domain,
    steps: Vec<Step>,
}

impl Ensemble {
    pub fn new(domain: Domain) -> Self {
        Self {
            domain,
            steps: Vec::new(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, kind: StepKind, weight: f64, base: BoundedFn) -> Result<()> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::Param(format!("step weight {weight} outside (0, 1]")));
        }
        self.domain.expect_same(&base.domain())?;
        self.steps.push(Step { kind, weight, base });
        Ok(())
    }

    pub fn count(&self, kind: StepKind) -> usize {
        self.steps.iter().filter(|s| s.kind == kind).count()
    }

    /// The clipped fold `h_{i+1}(x) = P1(h_i(x) + w_i g_i(x))` from `h_0 = 0`.
    pub fn eval(&self, x: usize) -> f64 {
        self.steps
            .iter()
            .fold(0.0, |h, s| project_p1(h + s.weight * s.base.value(x)))
    }

    pub fn sign_of(&self, x: usize) -> f64 {
        sign(self.eval(x))
    }

    /// All values of the fold, computed step by step over the whole table.
    pub fn eval_table(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.domain.size()];
        for s in &self.steps {
            apply_step(&mut h, s.weight, &s.base);
        }
        h
    }

    pub fn to_fn(&self) -> BoundedFn {
        BoundedFn::from_table(self.domain, self.eval_table()).expect("fold stays in range")
    }

    /// The Boolean hypothesis `sign(h)`.
    pub fn sign_fn(&self) -> BoundedFn {
        BoundedFn::from_table(
            self.domain,
            self.eval_table().into_iter().map(sign).collect(),
        )
        .expect("signs are in range")
    }
}

/// In-place clipped update of a dense hypothesis table.
pub fn apply_step(h: &mut [f64], weight: f64, base: &BoundedFn) {
    let g = base.values();
    for (hx, gx) in h.iter_mut().zip(g.iter()) {
        *hx = project_p1(*hx + weight * gx);
    }
}

/// A `[0, 1]`-valued weighting of the domain.
#[derive(Clone, Debug)]
pub struct Measure(BoundedFn);

impl Measure {
    pub fn new(f: BoundedFn) -> Result<Self> {
        check_range(&f.values(), 0.0, 1.0)?;
        Ok(Self(f))
    }

    pub fn from_table(domain: Domain, values: Vec<f64>) -> Result<Self> {
        check_range(&values, 0.0, 1.0)?;
        Ok(Self(BoundedFn::from_table(domain, values)?))
    }

    pub fn as_fn(&self) -> &BoundedFn {
        &self.0
    }

    pub fn domain(&self) -> Domain {
        self.0.domain()
    }

    pub fn value(&self, x: usize) -> f64 {
        self.0.value(x)
    }
}

/// `<f, g>_D = E_D[f g]`.
pub fn inner_product(d: &BaseDistribution, f: &BoundedFn, g: &BoundedFn) -> Result<f64> {
    d.domain().expect_same(&f.domain())?;
    d.domain().expect_same(&g.domain())?;
    let (fv, gv) = (f.values(), g.values());
    Ok(d.expect(|x| fv[x] * gv[x]))
}

/// `||f||_D`.
pub fn norm(d: &BaseDistribution, f: &BoundedFn) -> Result<f64> {
    Ok(inner_product(d, f, f)?.max(0.0).sqrt())
}

/// Error and advantage of a Boolean hypothesis: `((1 - <phi, h>)/2, 1/2 - error)`.
pub fn delta_gamma(a: &ExampleDistribution, h: &BoundedFn) -> Result<(f64, f64)> {
    if let Some(x) = h.first_non_boolean() {
        return Err(Error::NotBoolean(x));
    }
    let corr = inner_product(a.base(), a.label(), h)?;
    let delta = (1.0 - corr) / 2.0;
    Ok((delta, 0.5 - delta))
}

/// Truncation into `[-1, 1]`.
#[inline]
pub fn project_p1(a: f64) -> f64 {
    a.clamp(-1.0, 1.0)
}

/// `a^2` on `[-1, 1]`, `2|a| - 1` outside.
#[inline]
pub fn potential_r(a: f64) -> f64 {
    if a.abs() <= 1.0 {
        a * a
    } else {
        2.0 * a.abs() - 1.0
    }
}

/// `E_D[R(f - h)]`.
pub fn potential_energy(d: &BaseDistribution, f: &BoundedFn, h: &BoundedFn) -> Result<f64> {
    d.domain().expect_same(&f.domain())?;
    d.domain().expect_same(&h.domain())?;
    let (fv, hv) = (f.values(), h.values());
    Ok(d.expect(|x| potential_r(fv[x] - hv[x])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dom(n: u32) -> Domain {
        Domain::new(n).unwrap()
    }

    #[test]
    fn domain_bounds() {
        assert!(Domain::new(0).is_err());
        assert!(Domain::new(MAX_BITS + 1).is_err());
        assert_eq!(dom(3).size(), 8);
    }

    #[test]
    fn explicit_distribution_checks_mass() {
        assert!(BaseDistribution::explicit(dom(1), vec![0.5, 0.5 + 1e-10]).is_err());
        assert!(BaseDistribution::explicit(dom(1), vec![1.5, -0.5]).is_err());
        assert!(BaseDistribution::explicit(dom(1), vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn table_range_is_enforced() {
        assert!(BoundedFn::from_table(dom(1), vec![1.0 + 1e-10, 0.0]).is_ok());
        assert!(BoundedFn::from_table(dom(1), vec![1.01, 0.0]).is_err());
        assert!(BoundedFn::from_table(dom(1), vec![0.0]).is_err());
    }

    #[test]
    fn inner_product_of_small_explicit_pair() {
        let d = BaseDistribution::explicit(dom(2), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let phi = BoundedFn::from_table(dom(2), vec![1.0, 1.0, -1.0, 0.0]).unwrap();
        let psi = BoundedFn::from_table(dom(2), vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        let direct = 0.1 * 1.0 * 1.0 + 0.2 * 1.0 * -1.0 + 0.3 * -1.0 * 1.0 + 0.4 * 0.0 * 1.0;
        assert!((inner_product(&d, &phi, &psi).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn parity_orthogonality() {
        let d = BaseDistribution::uniform(dom(3));
        let a = BoundedFn::parity(dom(3), 0b011, false).unwrap();
        let b = BoundedFn::parity(dom(3), 0b101, false).unwrap();
        assert_eq!(inner_product(&d, &a, &b).unwrap(), 0.0);
        assert_eq!(inner_product(&d, &a, &a).unwrap(), 1.0);
    }

    #[test]
    fn delta_gamma_examples() {
        let d = BaseDistribution::uniform(dom(2));
        let phi = BoundedFn::from_table(dom(2), vec![1.0, 1.0, -1.0, 0.0]).unwrap();
        let a = ExampleDistribution::new(d.clone(), phi).unwrap();
        let one = BoundedFn::constant(dom(2), 1.0).unwrap();
        let (delta, gamma) = delta_gamma(&a, &one).unwrap();
        assert!((delta - 0.375).abs() < 1e-15);
        assert!((delta + gamma - 0.5).abs() < 1e-15);

        let h = BoundedFn::parity(dom(2), 1, false).unwrap();
        let exact = ExampleDistribution::new(d, h.clone()).unwrap();
        assert_eq!(delta_gamma(&exact, &h).unwrap(), (0.0, 0.5));
        assert_eq!(delta_gamma(&exact, &h.neg()).unwrap(), (1.0, -0.5));
        assert!(delta_gamma(&exact, &BoundedFn::zero(dom(2))).is_err());
    }

    #[test]
    fn projection_and_potential_values() {
        assert_eq!(project_p1(0.3), 0.3);
        assert_eq!(project_p1(1.7), 1.0);
        assert_eq!(project_p1(-5.0), -1.0);
        assert_eq!(potential_r(0.5), 0.25);
        assert_eq!(potential_r(1.5), 2.0);
        assert_eq!(potential_r(0.0), 0.0);
    }

    #[test]
    fn potential_energy_of_boolean_target_starts_at_one() {
        let d = BaseDistribution::uniform(dom(4));
        let f = BoundedFn::parity(dom(4), 0b1010, true).unwrap();
        assert_eq!(
            potential_energy(&d, &f, &BoundedFn::zero(dom(4))).unwrap(),
            1.0
        );
        assert_eq!(potential_energy(&d, &f, &f).unwrap(), 0.0);
    }

    #[test]
    fn empty_ensemble_is_zero_with_positive_sign() {
        let e = Ensemble::new(dom(2));
        assert!(dom(2)
            .points()
            .all(|x| e.eval(x) == 0.0 && e.sign_of(x) == 1.0));
    }

    #[test]
    fn ensemble_clips_between_steps() {
        let d = dom(2);
        let one = BoundedFn::constant(d, 1.0).unwrap();
        let mut e = Ensemble::new(d);
        e.push(StepKind::Weak, 0.5, one.clone()).unwrap();
        assert!(d.points().all(|x| e.eval(x) == 0.5));

        let mut e = Ensemble::new(d);
        e.push(StepKind::Weak, 1.0, one.clone()).unwrap();
        e.push(StepKind::Weak, 1.0, one.clone()).unwrap();
        e.push(StepKind::Balance, 0.5, one.neg()).unwrap();
        // Replay by hand: 0 -> 1 -> clip(2) = 1 -> 0.5.
        let mut h: f64 = 0.0;
        for (w, g) in [(1.0, 1.0), (1.0, 1.0), (0.5, -1.0)] {
            h = (h + w * g).clamp(-1.0, 1.0);
        }
        assert_eq!(h, 0.5);
        assert!(d.points().all(|x| e.eval(x) == h));
        assert_eq!(e.eval_table(), vec![h; 4]);
    }

    #[test]
    fn ensemble_rejects_bad_weights() {
        let d = dom(1);
        let mut e = Ensemble::new(d);
        assert!(e.push(StepKind::Weak, 0.0, BoundedFn::zero(d)).is_err());
        assert!(e.push(StepKind::Weak, 1.5, BoundedFn::zero(d)).is_err());
    }

    #[test]
    fn lifted_functions_ignore_top_bit() {
        let d = dom(2);
        let f = BoundedFn::from_table(d, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let wide = f.lift(dom(3)).unwrap();
        for x in 0..8 {
            assert_eq!(wide.value(x), f.value(x & 3));
        }
    }

    #[test]
    fn measure_range() {
        assert!(Measure::from_table(dom(1), vec![0.0, 1.0]).is_ok());
        assert!(Measure::from_table(dom(1), vec![-0.5, 1.0]).is_err());
    }

    fn table(n: u32) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..=1.0, 1usize << n)
    }

    proptest! {
        #[test]
        fn views_match_materialized_tables(f in table(3), g in table(3)) {
            let d = dom(3);
            let f = BoundedFn::from_table(d, f).unwrap();
            let g = BoundedFn::from_table(d, g).unwrap();
            for v in [
                f.neg(), f.sign(), f.abs(),
                f.half_difference(&g).unwrap(),
                f.clipped_difference(&g).unwrap(),
                f.product(&g).unwrap(),
            ] {
                let m = v.materialize();
                prop_assert!(v.approx_eq(&m, 0.0));
                prop_assert!(m.values().iter().all(|x| x.abs() <= 1.0));
            }
        }

        #[test]
        fn ensemble_table_matches_pointwise_replay(
            steps in prop::collection::vec((0.01f64..=1.0, table(2)), 0..12)
        ) {
            let d = dom(2);
            let mut e = Ensemble::new(d);
            for (w, g) in steps {
                e.push(StepKind::Weak, w, BoundedFn::from_table(d, g).unwrap()).unwrap();
            }
            let t = e.eval_table();
            for x in d.points() {
                prop_assert_eq!(t[x], e.eval(x));
                prop_assert!(t[x].abs() <= 1.0);
            }
        }
    }
}
