//! Random affine functions with prescribed evaluation probabilities.
//!
//! Given q: F₂^k → [½ − 2^{−(k+3)}, ½ + 2^{−(k+3)}], [`build_mu_star`]
//! produces a distribution μ* over coefficient vectors f = (f₀, …, f_k)
//! such that f₀ ⊕ ⟨f_{1:k}, z⟩ ∼ Ber(q(z)) for every z. Equivalently
//! Aᵀμ* = q, where A is the 0/1 evaluation matrix of [`build_matrix_a`].
//!
//! Coefficient vectors encode as Σ fᵢ·2^i with f₀ least significant, so the
//! index set {0}×(F₂^k∖0) consists of the even indices 2·encode(z), z ≠ 0.
//!
//! The construction starts from μ̄ = Ber(q(0)) × Ber(½)^{⊗k}, which already
//! matches q at z = 0 and gives ½ elsewhere, and then corrects the linear
//! (f₀ = 0) block by B⁻¹(q_Z − ½𝟙), moving the opposite total onto f = 0.
//! B is the matrix of [`build_matrix_b`]; it satisfies B² = 2^{k−2}(J + I)
//! and B𝟙 = 2^{k−1}𝟙, which give the closed form B⁻¹ = 2^{2−k}(B − J/2).

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gf2::BitVector;
use crate::matrix::RationalMatrix;
use crate::rational::{int, pow2, Entry, Probability, Rational};
use crate::rng::{RandomStream, TableSampler};

/// Arity limit for dense tables in this module.
pub const MAX_ARITY: usize = 16;

fn parity(x: usize) -> bool {
    x.count_ones() & 1 == 1
}

/// Whether the affine function with coefficient index `f` evaluates to 1 at `z`.
pub fn affine_eval(f: usize, z: usize) -> bool {
    (f & 1 == 1) ^ parity((f >> 1) & z)
}

/// q: F₂^k → [0,1], indexed by `encode(z)`, within 2^{−(k+3)} of ½.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasFunction<P = Rational> {
    k: usize,
    table: Vec<P>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableFile {
    pub k: usize,
    pub table: Vec<Entry>,
}

impl<P: Probability> BiasFunction<P> {
    /// The admissible deviation 2^{−(k+3)}.
    pub fn bound(k: usize) -> P {
        P::pow2(-(k as i32) - 3)
    }

    /// Validates the range hypothesis; the comparison is exact for rationals.
    pub fn new(k: usize, table: Vec<P>) -> Result<Self, Error> {
        if k > MAX_ARITY {
            return Err(Error::SizeGuard {
                what: "k",
                value: k,
                limit: MAX_ARITY,
            });
        }
        if table.len() != 1 << k {
            return Err(Error::LengthMismatch {
                expected: 1 << k,
                found: table.len(),
            });
        }
        let q = BiasFunction { k, table };
        let deviation = q.deviation();
        let bound = Self::bound(k);
        if !deviation.at_most(&bound) {
            return Err(Error::BiasFunctionOutOfRange {
                deviation: deviation.to_string(),
                bound: bound.to_string(),
            });
        }
        Ok(q)
    }

    pub fn constant_half(k: usize) -> Self {
        BiasFunction {
            k,
            table: vec![P::half(); 1 << k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[P] {
        &self.table
    }

    /// ‖q − ½𝟙‖_∞.
    pub fn deviation(&self) -> P {
        let half = P::half();
        self.table
            .iter()
            .map(|v| (v.clone() - half.clone()).abs())
            .fold(P::zero(), |acc, d| if d > acc { d } else { acc })
    }

    pub fn to_float(&self) -> BiasFunction<f64> {
        BiasFunction {
            k: self.k,
            table: self.table.iter().map(P::to_f64).collect(),
        }
    }

    pub fn to_file(&self) -> TableFile {
        TableFile {
            k: self.k,
            table: self.table.iter().map(P::to_entry).collect(),
        }
    }

    pub fn from_file(file: &TableFile) -> Result<Self, Error> {
        let table = file.table.iter().map(P::from_entry).collect::<Result<_, _>>()?;
        Self::new(file.k, table)
    }
}

/// A distribution μ over affine coefficient vectors in F₂^{k+1}.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineCoeffDistribution<P = Rational> {
    k: usize,
    table: Vec<P>,
}

impl<P: Probability> AffineCoeffDistribution<P> {
    /// Validates that `table` (2^{k+1} entries) lies in the simplex.
    pub fn new(k: usize, table: Vec<P>) -> Result<Self, Error> {
        if table.len() != 2 << k {
            return Err(Error::LengthMismatch {
                expected: 2 << k,
                found: table.len(),
            });
        }
        if let Some(i) = first_outside_simplex(&table) {
            return Err(Error::InvalidDistribution(format!("entry {i} is negative")));
        }
        let total = table.iter().fold(P::zero(), |a, v| a + v.clone());
        if !total.close_to(&P::one()) {
            return Err(Error::InvalidDistribution(format!("total mass {total} != 1")));
        }
        Ok(AffineCoeffDistribution { k, table })
    }

    /// Ber(prob_f0) × Ber(½)^{⊗k}: f₀ biased, linear part uniform.
    pub fn base(k: usize, prob_f0: &P) -> Self {
        let scale = P::pow2(-(k as i32));
        let table = (0..2usize << k)
            .map(|f| {
                let w = if f & 1 == 1 {
                    prob_f0.clone()
                } else {
                    P::one() - prob_f0.clone()
                };
                w * scale.clone()
            })
            .collect();
        AffineCoeffDistribution { k, table }
    }

    pub fn point_mass(f: &BitVector) -> Self {
        assert!(!f.is_empty(), "coefficient vectors have at least f0");
        let mut table = vec![P::zero(); 1 << f.len()];
        table[f.encode() as usize] = P::one();
        AffineCoeffDistribution {
            k: f.len() - 1,
            table,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[P] {
        &self.table
    }

    pub fn to_float(&self) -> AffineCoeffDistribution<f64> {
        AffineCoeffDistribution {
            k: self.k,
            table: self.table.iter().map(P::to_f64).collect(),
        }
    }

    pub fn sampler(&self) -> AffineSampler {
        let weights: Vec<f64> = self.table.iter().map(P::to_f64).collect();
        AffineSampler {
            k: self.k,
            table: TableSampler::new(&weights).expect("valid distribution"),
        }
    }

    pub fn to_file(&self) -> TableFile {
        TableFile {
            k: self.k,
            table: self.table.iter().map(P::to_entry).collect(),
        }
    }

    pub fn from_file(file: &TableFile) -> Result<Self, Error> {
        let table = file.table.iter().map(P::from_entry).collect::<Result<_, _>>()?;
        Self::new(file.k, table)
    }
}

fn first_outside_simplex<P: Probability>(table: &[P]) -> Option<usize> {
    table
        .iter()
        .position(|v| !(P::zero().at_most(v) && v.at_most(&P::one())))
}

/// Inverse-CDF sampler for affine coefficient vectors.
#[derive(Clone, Debug)]
pub struct AffineSampler {
    k: usize,
    table: TableSampler,
}

impl AffineSampler {
    pub fn sample_index(&self, rng: &mut RandomStream) -> usize {
        self.table.sample(rng)
    }

    /// F ∼ μ as a vector (F₀, …, F_k); coordinate 1 of the bit vector holds F₀.
    pub fn sample(&self, rng: &mut RandomStream) -> BitVector {
        BitVector::decode(self.sample_index(rng) as u64, self.k + 1)
    }
}

pub fn sample_affine_coeffs<P: Probability>(
    mu: &AffineCoeffDistribution<P>,
    rng: &mut RandomStream,
) -> BitVector {
    mu.sampler().sample(rng)
}

/// A ∈ {0,1}^{2^{k+1} × 2^k}, A_{fz} = 𝟙[f₀ + Σ fⱼzⱼ ≡ 1 mod 2].
pub fn build_matrix_a(k: usize) -> RationalMatrix {
    RationalMatrix::from_fn(2 << k, 1 << k, |f, z| int(affine_eval(f, z) as i64))
}

/// B_{uv} = ⟨u,v⟩ mod 2 over nonzero u, v ∈ F₂^k, rows and columns in
/// encoding order 1, 2, …, 2^k − 1.
pub fn build_matrix_b(k: usize) -> RationalMatrix {
    let m = (1usize << k) - 1;
    RationalMatrix::from_fn(m, m, |r, c| int(parity((r + 1) & (c + 1)) as i64))
}

/// B⁻¹ in closed form, 2^{2−k}(B − J/2).
pub fn invert_matrix_b(k: usize) -> RationalMatrix {
    let m = (1usize << k) - 1;
    let b = build_matrix_b(k);
    let half_j = RationalMatrix::ones(m, m).scale(&crate::rational::ratio(1, 2));
    b.sub(&half_j)
        .expect("same shape")
        .scale(&pow2(2 - k as i32))
}

/// B⁻¹x by the closed form, without materializing B⁻¹.
pub fn apply_b_inverse<P: Probability>(k: usize, x: &[P]) -> Vec<P> {
    let m = (1usize << k) - 1;
    assert_eq!(x.len(), m, "vector length must be 2^k - 1");
    let half_sum = x.iter().fold(P::zero(), |a, v| a + v.clone()) * P::half();
    let scale = P::pow2(2 - k as i32);
    (1..=m)
        .map(|u| {
            let bx = (1..=m)
                .filter(|&v| parity(u & v))
                .fold(P::zero(), |a, v| a + x[v - 1].clone());
            (bx - half_sum.clone()) * scale.clone()
        })
        .collect()
}

/// B⁻¹(q_Z − ½𝟙), the correction added to the linear block of μ̄.
pub fn mu_star_perturbation<P: Probability>(q: &BiasFunction<P>) -> Vec<P> {
    let half = P::half();
    let centered: Vec<P> = q.table[1..].iter().map(|v| v.clone() - half.clone()).collect();
    apply_b_inverse(q.k, &centered)
}

/// μ* with Aᵀμ* = q.
///
/// Fails with [`Error::BiasFunctionOutOfRange`] if q violates the range
/// hypothesis, and with [`Error::SimplexViolation`] if the result leaves the
/// simplex, which cannot happen for in-range q.
pub fn build_mu_star<P: Probability>(q: &BiasFunction<P>) -> Result<AffineCoeffDistribution<P>, Error> {
    let q = BiasFunction::new(q.k, q.table.clone())?;
    let k = q.k;
    let mut mu = AffineCoeffDistribution::base(k, &q.table[0]);
    let correction = mu_star_perturbation(&q);
    let mut moved = P::zero();
    for (z, c) in (1..1usize << k).zip(correction) {
        let f = z << 1;
        mu.table[f] = mu.table[f].clone() + c.clone();
        moved = moved + c;
    }
    mu.table[0] = mu.table[0].clone() - moved;
    if let Some(i) = first_outside_simplex(&mu.table) {
        return Err(Error::SimplexViolation(i));
    }
    Ok(mu)
}

/// (Aᵀμ)_z = Pr_{F∼μ}[F₀ + ⟨F_{1:k}, z⟩ ≡ 1], indexed by `encode(z)`.
pub fn apply_a_transpose<P: Probability>(mu: &AffineCoeffDistribution<P>) -> Vec<P> {
    (0..1usize << mu.k)
        .map(|z| {
            mu.table
                .iter()
                .enumerate()
                .filter(|(f, _)| affine_eval(*f, z))
                .fold(P::zero(), |a, (_, v)| a + v.clone())
        })
        .collect()
}
