//! Concept classes and the concrete Boolean representations used as targets.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{mask_from_hex, mask_to_hex};
use crate::error::{Error, Result};
use crate::numeric::{parity_sign, sign};
use crate::space::{BoundedFn, Domain};

/// Largest class an exhaustive scan will enumerate.
pub const SCAN_LIMIT: u64 = 1 << 20;

/// A decision tree with `+-1` leaves; a node sends `x` left when bit `var`
/// is 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecisionTree {
    Leaf(i8),
    Node {
        var: u32,
        left: Box<DecisionTree>,
        right: Box<DecisionTree>,
    },
}

impl DecisionTree {
    pub fn eval(&self, x: usize) -> f64 {
        let mut t = self;
        loop {
            match t {
                Self::Leaf(v) => return f64::from(*v),
                Self::Node { var, left, right } => {
                    t = if x >> var & 1 == 0 { left } else { right };
                }
            }
        }
    }

    /// Number of leaves.
    pub fn size(&self) -> usize {
        match self {
            Self::Leaf(_) => 1,
            Self::Node { left, right, .. } => left.size() + right.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Leaf(_) => 0,
            Self::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn max_var(&self) -> Option<u32> {
        match self {
            Self::Leaf(_) => None,
            Self::Node { var, left, right } => Some(
                (*var)
                    .max(left.max_var().unwrap_or(0))
                    .max(right.max_var().unwrap_or(0)),
            ),
        }
    }

    /// Complete tree of the given depth; variables along a path are
    /// distinct, leaves are uniform `+-1`.
    pub fn random_complete<R: Rng + ?Sized>(bits: u32, depth: u32, rng: &mut R) -> Result<Self> {
        if depth > bits {
            return Err(Error::Param(format!(
                "depth {depth} exceeds {bits} variables"
            )));
        }
        fn grow<R: Rng + ?Sized>(free: &[u32], depth: u32, rng: &mut R) -> DecisionTree {
            if depth == 0 {
                return DecisionTree::Leaf(if rng.gen::<bool>() { 1 } else { -1 });
            }
            let var = *free.choose(rng).expect("free variables remain");
            let rest: Vec<u32> = free.iter().copied().filter(|&v| v != var).collect();
            let left = grow(&rest, depth - 1, rng);
            let right = grow(&rest, depth - 1, rng);
            DecisionTree::Node {
                var,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
        let vars: Vec<u32> = (0..bits).collect();
        Ok(grow(&vars, depth, rng))
    }

    pub fn to_fn(&self, domain: Domain) -> Result<BoundedFn> {
        if self.max_var().is_some_and(|v| v >= domain.bits()) {
            return Err(Error::Param(
                "tree reads a variable outside the domain".into(),
            ));
        }
        BoundedFn::from_fn(domain, |x| self.eval(x))
    }
}

/// Number of trees with exactly `k` leaves over `n` variables, saturating.
fn trees_with_leaves(n: u64, k: usize, memo: &mut Vec<u64>) -> u64 {
    while memo.len() <= k {
        let j = memo.len();
        let v = if j == 0 {
            0
        } else if j == 1 {
            2
        } else {
            let mut total: u64 = 0;
            for a in 1..j {
                total = total.saturating_add(memo[a].saturating_mul(memo[j - a]));
            }
            total.saturating_mul(n)
        };
        memo.push(v);
    }
    memo[k]
}

fn enumerate_trees(
    n: u32,
    k: usize,
    out: &mut Vec<DecisionTree>,
    memo: &mut Vec<Vec<DecisionTree>>,
) {
    while memo.len() <= k {
        let j = memo.len();
        let mut level = Vec::new();
        if j == 1 {
            level.push(DecisionTree::Leaf(1));
            level.push(DecisionTree::Leaf(-1));
        } else if j > 1 {
            for var in 0..n {
                for a in 1..j {
                    for l in &memo[a] {
                        for r in &memo[j - a] {
                            level.push(DecisionTree::Node {
                                var,
                                left: Box::new(l.clone()),
                                right: Box::new(r.clone()),
                            });
                        }
                    }
                }
            }
        }
        memo.push(level);
    }
    out.extend(memo[k].iter().cloned());
}

/// A conjunction of literals: all `pos` bits set and all `neg` bits clear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub pos: u64,
    pub neg: u64,
}

impl Term {
    #[inline]
    pub fn holds(&self, x: usize) -> bool {
        let x = x as u64;
        x & self.pos == self.pos && x & self.neg == 0
    }

    pub fn width(&self) -> u32 {
        (self.pos | self.neg).count_ones()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRecord {
    pos_mask: String,
    neg_mask: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DnfRecord {
    n: u32,
    terms: Vec<TermRecord>,
}

/// An OR of terms; `+1` means true.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DnfRecord", try_from = "DnfRecord")]
pub struct DnfFormula {
    pub bits: u32,
    pub terms: Vec<Term>,
}

impl From<DnfFormula> for DnfRecord {
    fn from(f: DnfFormula) -> Self {
        Self {
            n: f.bits,
            terms: f
                .terms
                .iter()
                .map(|t| TermRecord {
                    pos_mask: mask_to_hex(t.pos),
                    neg_mask: mask_to_hex(t.neg),
                })
                .collect(),
        }
    }
}

impl TryFrom<DnfRecord> for DnfFormula {
    type Error = Error;

    fn try_from(r: DnfRecord) -> Result<Self> {
        let terms = r
            .terms
            .iter()
            .map(|t| {
                Ok(Term {
                    pos: mask_from_hex(&t.pos_mask)?,
                    neg: mask_from_hex(&t.neg_mask)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DnfFormula::new(r.n, terms)
    }
}

impl DnfFormula {
    pub fn new(bits: u32, terms: Vec<Term>) -> Result<Self> {
        Domain::new(bits)?;
        for t in &terms {
            if t.pos & t.neg != 0 || (t.pos | t.neg) >> bits != 0 {
                return Err(Error::Param(format!(
                    "term {:#x}/{:#x} is contradictory or outside {bits} bits",
                    t.pos, t.neg
                )));
            }
        }
        Ok(Self { bits, terms })
    }

    /// `terms` random terms of exactly `width` distinct literals.
    pub fn random<R: Rng + ?Sized>(
        bits: u32,
        terms: usize,
        width: u32,
        rng: &mut R,
    ) -> Result<Self> {
        if width > bits {
            return Err(Error::Param(format!(
                "width {width} exceeds {bits} variables"
            )));
        }
        let vars: Vec<u32> = (0..bits).collect();
        let terms = (0..terms)
            .map(|_| {
                let mut t = Term { pos: 0, neg: 0 };
                for &v in vars.choose_multiple(rng, width as usize) {
                    if rng.gen::<bool>() {
                        t.pos |= 1 << v;
                    } else {
                        t.neg |= 1 << v;
                    }
                }
                t
            })
            .collect();
        Self::new(bits, terms)
    }

    pub fn eval(&self, x: usize) -> f64 {
        if self.terms.iter().any(|t| t.holds(x)) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn to_fn(&self) -> Result<BoundedFn> {
        BoundedFn::from_fn(Domain::new(self.bits)?, |x| self.eval(x))
    }
}

/// `sign(sum_i f_i(x))` with ties resolved to `+1`.
#[derive(Clone, Debug)]
pub struct ThresholdOfClass {
    terms: Vec<BoundedFn>,
}

impl ThresholdOfClass {
    pub fn new(terms: Vec<BoundedFn>) -> Result<Self> {
        let first = terms.first().ok_or(Error::EmptyClass)?.domain();
        if let Some(t) = terms.iter().find(|t| t.domain() != first) {
            return Err(Error::DomainMismatch {
                expected: first.bits(),
                found: t.domain().bits(),
            });
        }
        Ok(Self { terms })
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[BoundedFn] {
        &self.terms
    }

    pub fn eval(&self, x: usize) -> f64 {
        sign(self.terms.iter().map(|t| t.value(x)).sum())
    }

    pub fn to_fn(&self) -> BoundedFn {
        BoundedFn::from_fn(self.terms[0].domain(), |x| self.eval(x)).expect("signs are in range")
    }
}

/// How the members of a class are produced.
#[derive(Clone, Debug)]
pub enum ClassKind {
    Explicit(Arc<[BoundedFn]>),
    /// All `2^n` characters `chi_a`.
    AllParities,
    /// Decision trees with at most `size` leaves, materialized in order.
    EnumeratedTrees {
        size: usize,
        trees: Arc<[DecisionTree]>,
    },
    /// Conjunctions of at most `width` literals, including the empty one.
    Conjunctions {
        width: u32,
        terms: Arc<[Term]>,
    },
}

/// A finite, ordered concept class over `bits` coordinates. Members act on
/// wider domains through their low coordinates.
#[derive(Clone, Debug)]
pub struct ConceptClass {
    bits: u32,
    kind: ClassKind,
    negation_closed: bool,
}

impl ConceptClass {
    /// All parities; scanned together with their negations.
    pub fn parities(bits: u32) -> Result<Self> {
        Domain::new(bits)?;
        Ok(Self {
            bits,
            kind: ClassKind::AllParities,
            negation_closed: true,
        })
    }

    pub fn explicit(members: Vec<BoundedFn>, negation_closed: bool) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyClass)?.domain();
        for (i, m) in members.iter().enumerate() {
            if m.domain() != first {
                return Err(Error::DomainMismatch {
                    expected: first.bits(),
                    found: m.domain().bits(),
                });
            }
            if let Some(x) = m.first_non_boolean() {
                return Err(Error::Param(format!(
                    "member {i} is not Boolean at point {x}"
                )));
            }
        }
        Ok(Self {
            bits: first.bits(),
            kind: ClassKind::Explicit(members.into()),
            negation_closed,
        })
    }

    /// Decision trees with at most `size` leaves. The class contains the
    /// negation of every member.
    pub fn trees(bits: u32, size: usize) -> Result<Self> {
        Domain::new(bits)?;
        let count = Self::tree_count(bits, size);
        if count > SCAN_LIMIT {
            return Err(Error::ClassTooLarge {
                size: count,
                limit: SCAN_LIMIT,
            });
        }
        let mut trees = Vec::with_capacity(count as usize);
        let mut memo = Vec::new();
        for k in 1..=size {
            enumerate_trees(bits, k, &mut trees, &mut memo);
        }
        Ok(Self {
            bits,
            kind: ClassKind::EnumeratedTrees {
                size,
                trees: trees.into(),
            },
            negation_closed: true,
        })
    }

    /// Count of trees with at most `size` leaves (saturating).
    pub fn tree_count(bits: u32, size: usize) -> u64 {
        let mut memo = Vec::new();
        (1..=size).fold(0u64, |acc, k| {
            acc.saturating_add(trees_with_leaves(u64::from(bits), k, &mut memo))
        })
    }

    /// Conjunctions of at most `width` literals, as `+-1` functions.
    pub fn conjunctions(bits: u32, width: u32) -> Result<Self> {
        Domain::new(bits)?;
        let mut terms = vec![Term { pos: 0, neg: 0 }];
        let mut frontier = terms.clone();
        for _ in 0..width.min(bits) {
            let mut next = Vec::new();
            for t in &frontier {
                let used = t.pos | t.neg;
                // Extend only with variables above the highest one used, so
                // each term is produced once.
                let start = if used == 0 {
                    0
                } else {
                    64 - used.leading_zeros()
                };
                for v in start..bits {
                    next.push(Term {
                        pos: t.pos | 1 << v,
                        neg: t.neg,
                    });
                    next.push(Term {
                        pos: t.pos,
                        neg: t.neg | 1 << v,
                    });
                }
            }
            if terms.len() + next.len() > SCAN_LIMIT as usize {
                return Err(Error::ClassTooLarge {
                    size: (terms.len() + next.len()) as u64,
                    limit: SCAN_LIMIT,
                });
            }
            terms.extend_from_slice(&next);
            frontier = next;
        }
        Ok(Self {
            bits,
            kind: ClassKind::Conjunctions {
                width,
                terms: terms.into(),
            },
            negation_closed: false,
        })
    }

    pub fn with_negation_closed(mut self, closed: bool) -> Self {
        self.negation_closed = closed;
        self
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn kind(&self) -> &ClassKind {
        &self.kind
    }

    /// When set, scans consider `-c` alongside every member `c`.
    pub fn negation_closed(&self) -> bool {
        self.negation_closed
    }

    pub fn len(&self) -> u64 {
        match &self.kind {
            ClassKind::Explicit(m) => m.len() as u64,
            ClassKind::AllParities => 1u64 << self.bits,
            ClassKind::EnumeratedTrees { trees, .. } => trees.len() as u64,
            ClassKind::Conjunctions { terms, .. } => terms.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Member `i` evaluated at `x` (read through the low `bits` coordinates).
    #[inline]
    pub fn eval(&self, i: u64, x: usize) -> f64 {
        let x = x & ((1usize << self.bits) - 1);
        match &self.kind {
            ClassKind::Explicit(m) => m[i as usize].value(x),
            ClassKind::AllParities => parity_sign(i, x),
            ClassKind::EnumeratedTrees { trees, .. } => trees[i as usize].eval(x),
            ClassKind::Conjunctions { terms, .. } => {
                if terms[i as usize].holds(x) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Member `i` on `domain`, negated on request.
    pub fn member(&self, i: u64, negated: bool, domain: Domain) -> Result<BoundedFn> {
        if domain.bits() < self.bits {
            return Err(Error::ClassDomain {
                class: self.bits,
                domain: domain.bits(),
            });
        }
        if i >= self.len() {
            return Err(Error::Param(format!("member index {i} out of range")));
        }
        if let ClassKind::AllParities = self.kind {
            return BoundedFn::parity(domain, i, negated);
        }
        let s = if negated { -1.0 } else { 1.0 };
        BoundedFn::from_fn(domain, |x| s * self.eval(i, x))
    }

    /// Human-readable member description for reports.
    pub fn describe(&self, i: u64, negated: bool) -> String {
        let sign = if negated { "-" } else { "+" };
        match &self.kind {
            ClassKind::Explicit(_) => format!("{sign}member[{i}]"),
            ClassKind::AllParities => format!("{sign}chi[{}]", mask_to_hex(i)),
            ClassKind::EnumeratedTrees { trees, .. } => format!(
                "{sign}{}",
                serde_json::to_string(&trees[i as usize]).unwrap_or_default()
            ),
            ClassKind::Conjunctions { terms, .. } => {
                let t = terms[i as usize];
                format!("{sign}and[{}/{}]", mask_to_hex(t.pos), mask_to_hex(t.neg))
            }
        }
    }
}
