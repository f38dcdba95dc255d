//! Seeded instance families and the instance file format.

use std::path::Path;

use agboost_core::codec::{mask_from_hex, mask_to_hex, InstanceRecord, LabelRecord};
use agboost_core::concepts::{DecisionTree, DnfFormula};
use agboost_core::numeric::{parity_sign, sign};
use agboost_core::rng::{stream, Purpose};
use agboost_core::space::{BaseDistribution, BoundedFn, Domain, ExampleDistribution};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// How label noise is introduced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// `phi = (1 - 2 eta) c`.
    #[default]
    Scaled,
    /// Flip the label on a seeded set of `round(eta 2^n)` points.
    Corrupted,
}

/// Generator parameters, tagged by family name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    NoisyParity {
        n: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<String>,
        eta: f64,
        #[serde(default)]
        noise: Noise,
    },
    NoisyTree {
        n: u32,
        depth: u32,
        eta: f64,
    },
    Dnf {
        n: u32,
        terms: usize,
        width: u32,
    },
    ThresholdOfParities {
        n: u32,
        weight: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        masks: Option<Vec<String>>,
    },
    RandomBoolean {
        n: u32,
    },
    /// A parity on half the cube and a negated inner-product function on the
    /// other half.
    PlantedHardcore {
        n: u32,
    },
    /// Product of majorities over the two halves of the coordinates.
    XorMajorities {
        n: u32,
    },
    Explicit {
        instance: InstanceRecord,
    },
}

/// Structured description of a generated target, kept for baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    Parity { mask: String },
    Tree(DecisionTree),
    Dnf(DnfFormula),
    Threshold { masks: Vec<String> },
}

impl Reference {
    /// Noise-free target function on `domain`.
    pub fn target(&self, domain: Domain) -> Result<BoundedFn> {
        Ok(match self {
            Self::Parity { mask } => BoundedFn::parity(domain, mask_from_hex(mask)?, false)?,
            Self::Tree(t) => t.to_fn(domain)?,
            Self::Dnf(d) => d.to_fn()?,
            Self::Threshold { masks } => threshold(domain, &decode_masks(masks)?)?,
        })
    }
}

/// Instance file: the concrete instance plus how it was made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub generator: FamilySpec,
    pub seed: u64,
    pub instance: InstanceRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

impl InstanceFile {
    pub fn distribution(&self) -> Result<ExampleDistribution> {
        expand(&self.instance, self.seed)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        parse_instance(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Accepts either a full instance file or a bare `{n, distribution, phi}`.
pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    if let Ok(f) = serde_json::from_str::<InstanceFile>(text) {
        return Ok(f);
    }
    let record: InstanceRecord = serde_json::from_str(text)?;
    let file = InstanceFile {
        generator: FamilySpec::Explicit {
            instance: record.clone(),
        },
        seed: 0,
        instance: record,
        reference: None,
    };
    file.distribution()?;
    Ok(file)
}

/// Decodes a record, expanding a generator label with `seed`.
pub fn expand(record: &InstanceRecord, seed: u64) -> Result<ExampleDistribution> {
    if let LabelRecord::Generator(v) = &record.phi {
        let spec: FamilySpec = serde_json::from_value(v.clone())?;
        let file = generate(&spec, seed)?;
        if file.instance.n != record.n {
            return Err(HarnessError::Spec(format!(
                "generator label has n = {} but the record says {}",
                file.instance.n, record.n
            )));
        }
        let label = file.distribution()?.label().clone();
        return Ok(ExampleDistribution::new(record.base()?, label)?);
    }
    Ok(record.decode()?)
}

fn decode_masks(masks: &[String]) -> Result<Vec<u64>> {
    Ok(masks
        .iter()
        .map(|m| mask_from_hex(m))
        .collect::<Result<_, _>>()?)
}

fn threshold(domain: Domain, masks: &[u64]) -> Result<BoundedFn> {
    Ok(BoundedFn::from_fn(domain, |x| {
        sign(masks.iter().map(|m| parity_sign(*m, x)).sum::<f64>())
    })?)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eta) {
        return Err(HarnessError::Spec(format!("eta {eta} outside [0, 1/2)")));
    }
    Ok(())
}

/// Flips `f` on a seeded set of `round(eta 2^n)` points.
fn corrupt(f: &BoundedFn, eta: f64, seed: u64) -> Result<BoundedFn> {
    let domain = f.domain();
    let k = (eta * domain.size() as f64).round() as usize;
    let mut order: Vec<usize> = domain.points().collect();
    order.shuffle(&mut stream(seed, Purpose::Instance, 1));
    let mut v = f.values().into_owned();
    for &x in &order[..k] {
        v[x] = -v[x];
    }
    Ok(BoundedFn::from_table(domain, v)?)
}

fn uniform(label: BoundedFn) -> Result<InstanceRecord> {
    let a = ExampleDistribution::new(BaseDistribution::uniform(label.domain()), label)?;
    Ok(InstanceRecord::encode(&a))
}

/// Majority of `bits` as `+1/-1`, ties to `+1`.
fn majority(bits: impl Iterator<Item = bool>) -> f64 {
    sign(bits.map(|b| if b { 1.0 } else { -1.0 }).sum::<f64>())
}

/// Builds the instance for `spec`. Same spec and seed give the same file.
pub fn generate(spec: &FamilySpec, seed: u64) -> Result<InstanceFile> {
    let mut rng = stream(seed, Purpose::Instance, 0);
    let (instance, reference) = match spec {
        FamilySpec::NoisyParity {
            n,
            mask,
            eta,
            noise,
        } => {
            check_eta(*eta)?;
            let d = Domain::new(*n)?;
            let a = match mask {
                Some(m) => mask_from_hex(m)?,
                None => rng.gen_range(1..d.size() as u64),
            };
            if a >> n != 0 {
                return Err(HarnessError::Spec(format!("mask {a:x} exceeds {n} bits")));
            }
            let c = BoundedFn::parity(d, a, false)?;
            let label = match noise {
                Noise::Scaled => BoundedFn::from_fn(d, |x| (1.0 - 2.0 * eta) * c.value(x))?,
                Noise::Corrupted => corrupt(&c, *eta, seed)?,
            };
            let reference = Reference::Parity {
                mask: mask_to_hex(a),
            };
            (uniform(label)?, Some(reference))
        }
        FamilySpec::NoisyTree { n, depth, eta } => {
            check_eta(*eta)?;
            let d = Domain::new(*n)?;
            let tree = DecisionTree::random_complete(*n, *depth, &mut rng)?;
            let label = corrupt(&tree.to_fn(d)?, *eta, seed)?;
            (uniform(label)?, Some(Reference::Tree(tree)))
        }
        FamilySpec::Dnf { n, terms, width } => {
            let dnf = DnfFormula::random(*n, *terms, *width, &mut rng)?;
            (uniform(dnf.to_fn()?)?, Some(Reference::Dnf(dnf)))
        }
        FamilySpec::ThresholdOfParities { n, weight, masks } => {
            let d = Domain::new(*n)?;
            let masks = match masks {
                Some(m) => decode_masks(m)?,
                None => {
                    if *weight as u64 >= d.size() as u64 {
                        return Err(HarnessError::Spec(format!(
                            "{weight} distinct nonzero masks do not fit in {n} bits"
                        )));
                    }
                    let mut chosen = Vec::with_capacity(*weight);
                    while chosen.len() < *weight {
                        let m = rng.gen_range(1..d.size() as u64);
                        if !chosen.contains(&m) {
                            chosen.push(m);
                        }
                    }
                    chosen
                }
            };
            if masks.len() != *weight || masks.iter().any(|m| m >> n != 0) {
                return Err(HarnessError::Spec(format!(
                    "need {weight} masks within {n} bits"
                )));
            }
            let reference = Reference::Threshold {
                masks: masks.iter().map(|m| mask_to_hex(*m)).collect(),
            };
            (uniform(threshold(d, &masks)?)?, Some(reference))
        }
        FamilySpec::RandomBoolean { n } => {
            let d = Domain::new(*n)?;
            let table: Vec<f64> = d
                .points()
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            (uniform(BoundedFn::from_table(d, table)?)?, None)
        }
        FamilySpec::PlantedHardcore { n } => {
            if *n < 4 || n % 2 != 0 {
                return Err(HarnessError::Spec(format!(
                    "planted-hardcore needs an even n >= 4, got {n}"
                )));
            }
            let d = Domain::new(*n)?;
            let half = (n - 2) / 2;
            let low = (1usize << half) - 1;
            let (split, marked) = (1usize << (n - 1), 1u64 << (n - 2));
            let label = BoundedFn::from_fn(d, |x| {
                if x & split == 0 {
                    parity_sign(marked, x)
                } else {
                    let ip = (x & low) & ((x >> half) & low);
                    -parity_sign(ip as u64, usize::MAX)
                }
            })?;
            (uniform(label)?, None)
        }
        FamilySpec::XorMajorities { n } => {
            if *n < 2 {
                return Err(HarnessError::Spec("xor-majorities needs n >= 2".into()));
            }
            let d = Domain::new(*n)?;
            let k = n.div_ceil(2);
            let label = BoundedFn::from_fn(d, |x| {
                let lo = majority((0..k).map(|i| x >> i & 1 == 1));
                let hi = majority((k..*n).map(|i| x >> i & 1 == 1));
                lo * hi
            })?;
            (uniform(label)?, None)
        }
        FamilySpec::Explicit { instance } => {
            expand(instance, seed)?;
            (instance.clone(), None)
        }
    };
    let file = InstanceFile {
        generator: spec.clone(),
        seed,
        instance,
        reference,
    };
    Ok(file)
}
