//! Standard and batch LPN samplers, residual extraction, and the exact
//! batch-LPN law used as the verification target.

use serde::{Deserialize, Serialize};

use crate::dist::NoiseDistribution;
use crate::error::Error;
use crate::gf2::BitVector;
use crate::rational::{pow2, Probability, Rational};
use crate::rng::{bernoulli_unchecked, sample_uniform, RandomStream, TableSampler};

/// Size guard on `(n+1)·k` for exact batch laws.
pub const MAX_EXACT_TARGET_BITS: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKey {
    n: usize,
    sk: BitVector,
}

impl SecretKey {
    pub fn new(sk: BitVector) -> Self {
        SecretKey { n: sk.len(), sk }
    }

    pub fn random(n: usize, rng: &mut RandomStream) -> Self {
        SecretKey::new(sample_uniform(n, rng))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &BitVector {
        &self.sk
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("secret key serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let key: SecretKey = serde_json::from_str(s)?;
        if key.sk.len() != key.n {
            return Err(Error::LengthMismatch {
                expected: key.n,
                found: key.sk.len(),
            });
        }
        Ok(key)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpnSample {
    pub u: BitVector,
    #[serde(with = "bit")]
    pub y: bool,
}

impl LpnSample {
    /// y ⊕ ⟨u, sk⟩.
    pub fn residual(&self, sk: &SecretKey) -> Result<bool, Error> {
        Ok(self.y ^ self.u.inner_product(&sk.sk)?)
    }
}

/// An ordered tuple of k samples sharing one dimension n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    n: usize,
    samples: Vec<LpnSample>,
}

#[derive(Serialize, Deserialize)]
struct BatchLine {
    n: usize,
    k: usize,
    samples: Vec<LpnSample>,
}

impl Batch {
    pub fn new(n: usize, samples: Vec<LpnSample>) -> Result<Self, Error> {
        if let Some(s) = samples.iter().find(|s| s.u.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: s.u.len(),
            });
        }
        Ok(Batch { n, samples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[LpnSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LpnSample> {
        self.samples
    }

    /// One JSON Lines record: `{"n":..,"k":..,"samples":[{"u":"..","y":0|1},..]}`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&BatchLine {
            n: self.n,
            k: self.k(),
            samples: self.samples.clone(),
        })
        .expect("batch serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self, Error> {
        let raw: BatchLine = serde_json::from_str(line)?;
        if raw.samples.len() != raw.k {
            return Err(Error::LengthMismatch {
                expected: raw.k,
                found: raw.samples.len(),
            });
        }
        Batch::new(raw.n, raw.samples)
    }
}

mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*b as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("bit must be 0 or 1, got {other}"))),
        }
    }
}

fn check_dimension(n: usize, sk: &SecretKey) -> Result<(), Error> {
    if sk.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: sk.n(),
        });
    }
    Ok(())
}

fn noiseless_allowed() -> bool {
    cfg!(any(test, feature = "noiseless"))
}

/// One sample of LPN_{n,δ}(sk): u uniform, y = ⟨u,sk⟩ ⊕ e with e ∼ Ber(½−δ).
///
/// δ must lie in (0, ½). With the `noiseless` feature (and in unit tests)
/// δ = ½ is also accepted, which makes e identically zero.
pub fn sample_lpn(
    n: usize,
    delta: f64,
    sk: &SecretKey,
    rng: &mut RandomStream,
) -> Result<LpnSample, Error> {
    check_dimension(n, sk)?;
    let in_range = delta > 0.0 && delta < 0.5;
    if !(in_range || (delta == 0.5 && noiseless_allowed())) {
        return Err(Error::BiasOutOfRange(delta.to_string(), "(0, 1/2)"));
    }
    let u = sample_uniform(n, rng);
    let e = bernoulli_unchecked(0.5 - delta, rng);
    let y = u.inner_product(sk.bits())? ^ e;
    Ok(LpnSample { u, y })
}

/// Repeated batch-LPN sampling with a precomputed noise sampler.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    n: usize,
    k: usize,
    noise: TableSampler,
}

impl BatchSampler {
    pub fn new<P: Probability>(n: usize, p: &NoiseDistribution<P>) -> Self {
        BatchSampler {
            n,
            k: p.k(),
            noise: p.sampler(),
        }
    }

    pub fn sample(&self, sk: &SecretKey, rng: &mut RandomStream) -> Result<Batch, Error> {
        check_dimension(self.n, sk)?;
        let us: Vec<BitVector> = (0..self.k).map(|_| sample_uniform(self.n, rng)).collect();
        let e = BitVector::decode(self.noise.sample(rng) as u64, self.k);
        let samples = us
            .into_iter()
            .enumerate()
            .map(|(i, u)| {
                let y = u.inner_product(sk.bits())? ^ e.get(i);
                Ok(LpnSample { u, y })
            })
            .collect::<Result<_, Error>>()?;
        Ok(Batch { n: self.n, samples })
    }
}

/// One batch of LPN_{n,p}(sk): k iid uniform u-vectors, noise drawn jointly from p.
pub fn sample_batch_lpn<P: Probability>(
    n: usize,
    p: &NoiseDistribution<P>,
    sk: &SecretKey,
    rng: &mut RandomStream,
) -> Result<Batch, Error> {
    BatchSampler::new(n, p).sample(sk, rng)
}

/// (yⁱ ⊕ ⟨uⁱ, sk⟩)ᵢ.
pub fn residuals(batch: &Batch, sk: &SecretKey) -> Result<BitVector, Error> {
    check_dimension(batch.n, sk)?;
    let bits = batch
        .samples
        .iter()
        .map(|s| s.residual(sk))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BitVector::from_bits(&bits))
}

/// A probability table over full batch outcomes (F₂^n × F₂)^k.
///
/// Sample i (0-based) occupies bits `(n+1)i .. (n+1)(i+1)` of the outcome
/// index: the low n bits hold `encode(u)`, the next bit holds y.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLaw {
    n: usize,
    k: usize,
    table: Vec<Rational>,
}

impl BatchLaw {
    pub(crate) fn from_table(n: usize, k: usize, table: Vec<Rational>) -> Self {
        debug_assert_eq!(table.len(), 1 << ((n + 1) * k));
        BatchLaw { n, k, table }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[Rational] {
        &self.table
    }

    pub fn outcome_index(batch: &Batch) -> usize {
        let w = batch.n + 1;
        batch.samples.iter().enumerate().fold(0, |acc, (i, s)| {
            acc | ((s.u.encode() as usize | (s.y as usize) << batch.n) << (w * i))
        })
    }

    pub fn outcome(&self, index: usize) -> Batch {
        decode_outcome(self.n, self.k, index)
    }

    pub fn total_mass(&self) -> Rational {
        self.table.iter().sum()
    }

    pub fn tv_distance(&self, other: &BatchLaw) -> Result<Rational, Error> {
        if (self.n, self.k) != (other.n, other.k) {
            return Err(Error::DimensionMismatch(format!(
                "laws over (n={}, k={}) and (n={}, k={})",
                self.n, self.k, other.n, other.k
            )));
        }
        crate::dist::tv_distance(&self.table, &other.table)
    }

    /// Law of the residual vector under `sk`.
    pub fn residual_law(&self, sk: &SecretKey) -> Result<NoiseDistribution, Error> {
        check_dimension(self.n, sk)?;
        let mut out = vec![Rational::from_integer(0.into()); 1 << self.k];
        for (idx, v) in self.table.iter().enumerate() {
            let r = residuals(&self.outcome(idx), sk)?;
            out[r.encode() as usize] += v;
        }
        Ok(NoiseDistribution::from_table_unchecked(self.k, out))
    }

    /// Law of the u-vector of sample i (1-based), indexed by `encode(u)`.
    pub fn u_marginal(&self, i: usize) -> Result<Vec<Rational>, Error> {
        if i == 0 || i > self.k {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: self.k,
            });
        }
        let shift = (self.n + 1) * (i - 1);
        let mask = (1usize << self.n) - 1;
        let mut out = vec![Rational::from_integer(0.into()); 1 << self.n];
        for (idx, v) in self.table.iter().enumerate() {
            out[(idx >> shift) & mask] += v;
        }
        Ok(out)
    }
}

fn decode_outcome(n: usize, k: usize, index: usize) -> Batch {
    let w = n + 1;
    let samples = (0..k)
        .map(|i| {
            let chunk = (index >> (w * i)) & ((1 << w) - 1);
            LpnSample {
                u: BitVector::decode(chunk as u64, n),
                y: (chunk >> n) & 1 == 1,
            }
        })
        .collect();
    Batch { n, samples }
}

pub(crate) fn check_exact_size(n: usize, k: usize, limit: usize) -> Result<(), Error> {
    let bits = (n + 1) * k;
    if bits > limit {
        return Err(Error::SizeGuard {
            what: "(n+1)k",
            value: bits,
            limit,
        });
    }
    Ok(())
}

/// Exact law of LPN_{n,p}(sk): Pr[(u,y)] = 2^{−nk} · p(residuals).
pub fn exact_target_distribution(
    n: usize,
    p: &NoiseDistribution,
    sk: &SecretKey,
) -> Result<BatchLaw, Error> {
    check_dimension(n, sk)?;
    let k = p.k();
    check_exact_size(n, k, MAX_EXACT_TARGET_BITS)?;
    let scale = pow2(-((n * k) as i32));
    let table = (0..1usize << ((n + 1) * k))
        .map(|idx| {
            let r = residuals(&decode_outcome(n, k, idx), sk).expect("dimensions checked");
            p.prob(&r) * &scale
        })
        .collect();
    Ok(BatchLaw::from_table(n, k, table))
}
