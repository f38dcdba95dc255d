//! JSON and hex encodings for functions, ensembles and instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{BaseDistribution, BoundedFn, Domain, Ensemble, ExampleDistribution, StepKind};

/// Packs a Boolean table as hex: bit `k` of the stream is point `k`,
/// least significant bit first within each byte, `1` meaning `+1`.
pub fn boolean_to_hex(f: &BoundedFn) -> Result<String> {
    if let Some(x) = f.first_non_boolean() {
        return Err(Error::NotBoolean(x));
    }
    let size = f.domain().size();
    let mut bytes = vec![0u8; size.div_ceil(8)];
    for x in 0..size {
        if f.value(x) > 0.0 {
            bytes[x / 8] |= 1 << (x % 8);
        }
    }
    Ok(hex::encode(bytes))
}

pub fn boolean_from_hex(domain: Domain, s: &str) -> Result<BoundedFn> {
    let bytes = hex::decode(s).map_err(|e| Error::Format(format!("boolean hex: {e}")))?;
    let size = domain.size();
    if bytes.len() != size.div_ceil(8) {
        return Err(Error::Format(format!(
            "boolean hex has {} bytes, expected {}",
            bytes.len(),
            size.div_ceil(8)
        )));
    }
    BoundedFn::from_fn(domain, |x| {
        if bytes[x / 8] >> (x % 8) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Bit set over the domain, same layout as [`boolean_to_hex`].
pub fn set_to_hex(size: usize, member: impl Fn(usize) -> bool) -> String {
    let mut bytes = vec![0u8; size.div_ceil(8)];
    for x in (0..size).filter(|&x| member(x)) {
        bytes[x / 8] |= 1 << (x % 8);
    }
    hex::encode(bytes)
}

pub fn mask_to_hex(mask: u64) -> String {
    format!("{mask:x}")
}

pub fn mask_from_hex(s: &str) -> Result<u64> {
    let t = s.trim_start_matches("0x");
    u64::from_str_radix(t, 16).map_err(|e| Error::Format(format!("mask {s:?}: {e}")))
}

/// Serialized form of a bounded function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FnRepr {
    Parity { parity: String, sign: i8 },
    BooleanHex { boolean_hex: String },
    Table { table: Vec<f64> },
}

impl FnRepr {
    /// Parities keep their symbolic form; other Boolean functions become
    /// hex; everything else a dense table.
    pub fn encode(f: &BoundedFn) -> Self {
        if let Some((mask, negated)) = f.as_parity() {
            return Self::Parity {
                parity: mask_to_hex(mask),
                sign: if negated { -1 } else { 1 },
            };
        }
        match boolean_to_hex(f) {
            Ok(boolean_hex) => Self::BooleanHex { boolean_hex },
            Err(_) => Self::Table {
                table: f.values().into_owned(),
            },
        }
    }

    pub fn decode(&self, domain: Domain) -> Result<BoundedFn> {
        match self {
            Self::Parity { parity, sign } => {
                let negated = match sign {
                    1 => false,
                    -1 => true,
                    s => return Err(Error::Format(format!("parity sign {s} is not +-1"))),
                };
                BoundedFn::parity(domain, mask_from_hex(parity)?, negated)
            }
            Self::BooleanHex { boolean_hex } => boolean_from_hex(domain, boolean_hex),
            Self::Table { table } => BoundedFn::from_table(domain, table.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub kind: StepKind,
    pub weight: f64,
    pub base: FnRepr,
}

/// Ensemble as a step list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleRecord {
    pub n: u32,
    pub steps: Vec<StepRecord>,
}

impl EnsembleRecord {
    pub fn encode(e: &Ensemble) -> Self {
        Self {
            n: e.domain().bits(),
            steps: e
                .steps()
                .iter()
                .map(|s| StepRecord {
                    kind: s.kind,
                    weight: s.weight,
                    base: FnRepr::encode(&s.base),
                })
                .collect(),
        }
    }

    pub fn decode(&self) -> Result<Ensemble> {
        let domain = Domain::new(self.n)?;
        let mut e = Ensemble::new(domain);
        for s in &self.steps {
            e.push(s.kind, s.weight, s.base.decode(domain)?)?;
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionRecord {
    Uniform,
    Explicit(Vec<f64>),
}

/// Label function of an instance file. Generator specs are opaque here and
/// expanded by whoever owns the instance families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRecord {
    Table(Vec<f64>),
    BooleanHex(String),
    Generator(serde_json::Value),
}

/// `{n, distribution, phi}` instance file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub n: u32,
    pub distribution: DistributionRecord,
    pub phi: LabelRecord,
}

impl InstanceRecord {
    /// Encodes a concrete instance; Boolean labels use hex.
    pub fn encode(a: &ExampleDistribution) -> Self {
        let distribution = match a.base() {
            BaseDistribution::Uniform(_) => DistributionRecord::Uniform,
            BaseDistribution::Explicit { probs, .. } => {
                DistributionRecord::Explicit(probs.to_vec())
            }
        };
        let phi = match boolean_to_hex(a.label()) {
            Ok(h) => LabelRecord::BooleanHex(h),
            Err(_) => LabelRecord::Table(a.label().values().into_owned()),
        };
        Self {
            n: a.domain().bits(),
            distribution,
            phi,
        }
    }

    pub fn base(&self) -> Result<BaseDistribution> {
        let domain = Domain::new(self.n)?;
        match &self.distribution {
            DistributionRecord::Uniform => Ok(BaseDistribution::uniform(domain)),
            DistributionRecord::Explicit(p) => BaseDistribution::explicit(domain, p.clone()),
        }
    }

    /// Decodes table and hex labels; generator labels are an error here.
    pub fn decode(&self) -> Result<ExampleDistribution> {
        let base = self.base()?;
        let domain = base.domain();
        let label = match &self.phi {
            LabelRecord::Table(t) => BoundedFn::from_table(domain, t.clone())?,
            LabelRecord::BooleanHex(h) => boolean_from_hex(domain, h)?,
            LabelRecord::Generator(_) => {
                return Err(Error::Format(
                    "generator labels must be expanded before decoding".into(),
                ))
            }
        };
        ExampleDistribution::new(base, label)
    }
}
