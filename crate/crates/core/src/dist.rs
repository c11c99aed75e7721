//! Dense probability tables over F₂^k.
//!
//! A [`NoiseDistribution`] stores 2^k probabilities indexed by
//! [`BitVector::encode`]. The scalar type decides the arithmetic: exact
//! rationals for verification, `f64` for sampling.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gf2::BitVector;
use crate::rational::{pow2, Entry, Mode, Probability, Rational};
use crate::rng::{RandomStream, TableSampler};

/// Largest k accepted for a dense table.
pub const MAX_TABLE_BITS: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDistribution<P = Rational> {
    k: usize,
    table: Vec<P>,
}

/// On-disk form: `{"k": .., "mode": "rational"|"float", "table": [..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionFile {
    pub k: usize,
    pub mode: Mode,
    pub table: Vec<Entry>,
}

impl<P: Probability> NoiseDistribution<P> {
    /// Validates non-negativity and unit mass (exact for rationals).
    pub fn new(k: usize, table: Vec<P>) -> Result<Self, Error> {
        if k > MAX_TABLE_BITS {
            return Err(Error::SizeGuard {
                what: "k",
                value: k,
                limit: MAX_TABLE_BITS,
            });
        }
        if table.len() != 1 << k {
            return Err(Error::InvalidDistribution(format!(
                "table for k={k} needs {} entries, found {}",
                1usize << k,
                table.len()
            )));
        }
        if let Some((i, v)) = table.iter().enumerate().find(|(_, v)| v.is_negative()) {
            return Err(Error::InvalidDistribution(format!("negative entry {v} at index {i}")));
        }
        let total = table.iter().fold(P::zero(), |acc, v| acc + v.clone());
        if !total.close_to(&P::one()) {
            return Err(Error::InvalidDistribution(format!("total mass {total} != 1")));
        }
        Ok(NoiseDistribution { k, table })
    }

    pub(crate) fn from_table_unchecked(k: usize, table: Vec<P>) -> Self {
        debug_assert_eq!(table.len(), 1 << k);
        NoiseDistribution { k, table }
    }

    pub fn uniform(k: usize) -> Self {
        let n = 1usize << k;
        let w = P::one() / P::from_usize(n).expect("table size fits the scalar type");
        NoiseDistribution::from_table_unchecked(k, vec![w; n])
    }

    pub fn point_mass(z: &BitVector) -> Self {
        let mut table = vec![P::zero(); 1 << z.len()];
        table[z.encode() as usize] = P::one();
        NoiseDistribution::from_table_unchecked(z.len(), table)
    }

    /// Ber(prob_one) on a single bit.
    pub fn bernoulli(prob_one: P) -> Result<Self, Error> {
        if prob_one.is_negative() || prob_one > P::one() {
            return Err(Error::ProbabilityOutOfRange(prob_one.to_string()));
        }
        let zero = P::one() - prob_one.clone();
        Ok(NoiseDistribution::from_table_unchecked(1, vec![zero, prob_one]))
    }

    /// ⊗ᵢ Ber(½ − biases[i]).
    pub fn product(biases: &[P]) -> Result<Self, Error> {
        let half = P::half();
        for b in biases {
            if b.abs() > half {
                return Err(Error::BiasOutOfRange(b.to_string(), "[-1/2, 1/2]"));
            }
        }
        Ok(Self::from_conditionals(biases.len(), |i, _| {
            half.clone() - biases[i - 1].clone()
        }))
    }

    /// Builds p by the chain rule from `cond(i, prefix) = Pr[Z_i = 1 | Z_<i = prefix]`
    /// (i is 1-based, `prefix` has length i−1). Values must lie in [0, 1].
    pub fn from_conditionals(k: usize, cond: impl Fn(usize, &BitVector) -> P) -> Self {
        let mut table = vec![P::one()];
        for i in 1..=k {
            let mut next = vec![P::zero(); 1 << i];
            for (x, mass) in table.iter().enumerate() {
                let c = cond(i, &BitVector::decode(x as u64, i - 1));
                next[x] = mass.clone() * (P::one() - c.clone());
                next[x | (1 << (i - 1))] = mass.clone() * c;
            }
            table = next;
        }
        NoiseDistribution::from_table_unchecked(k, table)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[P] {
        &self.table
    }

    pub fn prob(&self, z: &BitVector) -> &P {
        &self.table[z.encode() as usize]
    }

    pub fn is_uniform(&self) -> bool {
        let u = Self::uniform(self.k);
        self.table.iter().zip(&u.table).all(|(a, b)| a.close_to(b))
    }

    /// Marginal of the first `i` coordinates; `i = 0` gives the point mass on F₂^0.
    fn prefix_table(&self, i: usize) -> Vec<P> {
        let mask = (1usize << i) - 1;
        let mut out = vec![P::zero(); 1 << i];
        for (z, v) in self.table.iter().enumerate() {
            let slot = &mut out[z & mask];
            *slot = slot.clone() + v.clone();
        }
        out
    }

    /// Exact marginal law of Z_{1:i}.
    pub fn marginal_prefix(&self, i: usize) -> Result<Self, Error> {
        if i == 0 || i > self.k {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: self.k,
            });
        }
        Ok(NoiseDistribution::from_table_unchecked(i, self.prefix_table(i)))
    }

    /// Pr[Z_i = 1 | Z_<i = prefix].
    pub fn conditional_bit(&self, i: usize, prefix: &BitVector) -> Result<P, Error> {
        if i == 0 || i > self.k {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: self.k,
            });
        }
        if prefix.len() != i - 1 {
            return Err(Error::LengthMismatch {
                expected: i - 1,
                found: prefix.len(),
            });
        }
        let x = prefix.encode() as usize;
        let before = self.prefix_table(i - 1);
        if before[x].is_zero() {
            return Err(Error::ZeroMassPrefix {
                index: i,
                prefix: prefix.clone(),
            });
        }
        let after = self.prefix_table(i);
        Ok(after[x | (1 << (i - 1))].clone() / before[x].clone())
    }

    /// Every defined conditional `(i, prefix, Pr[Z_i=1 | prefix])`, with `None`
    /// for zero-mass prefixes. Ordered by i, then by prefix encoding.
    pub fn conditionals(&self) -> Vec<(usize, BitVector, Option<P>)> {
        let marginals: Vec<Vec<P>> = (0..=self.k).map(|i| self.prefix_table(i)).collect();
        let mut out = Vec::with_capacity(1 << self.k);
        for i in 1..=self.k {
            for (x, mass) in marginals[i - 1].iter().enumerate() {
                let cond = (!mass.is_zero())
                    .then(|| marginals[i][x | (1 << (i - 1))].clone() / mass.clone());
                out.push((i, BitVector::decode(x as u64, i - 1), cond));
            }
        }
        out
    }

    /// Smallest δ for which p is a δ-Santha-Vazirani source, taken over
    /// prefixes of positive mass.
    pub fn sv_parameter(&self) -> P {
        let half = P::half();
        self.conditionals()
            .into_iter()
            .filter_map(|(_, _, c)| c)
            .map(|c| (c - half.clone()).abs())
            .fold(P::zero(), |acc, b| if b > acc { b } else { acc })
    }

    /// Succeeds iff every conditional is defined and within `delta` of ½.
    /// The error names the first offending coordinate and prefix.
    pub fn certify_sv(&self, delta: &P) -> Result<(), Error> {
        let half = P::half();
        for (i, prefix, cond) in self.conditionals() {
            let Some(c) = cond else {
                return Err(Error::ZeroMassPrefix { index: i, prefix });
            };
            let bias = (c.clone() - half.clone()).abs();
            if !bias.at_most(delta) {
                return Err(Error::NotSantaVazirani {
                    delta: delta.to_string(),
                    index: i,
                    prefix,
                    conditional: c.to_string(),
                    bias: bias.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Exact law of ⟨weights, Z⟩ mod 2, as a distribution on one bit.
    pub fn pushforward_xor(&self, weights: &BitVector) -> Result<NoiseDistribution<P>, Error> {
        if weights.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                found: weights.len(),
            });
        }
        let w = weights.encode() as usize;
        let mut out = vec![P::zero(), P::zero()];
        for (z, v) in self.table.iter().enumerate() {
            let bit = ((z & w).count_ones() & 1) as usize;
            out[bit] = out[bit].clone() + v.clone();
        }
        Ok(NoiseDistribution::from_table_unchecked(1, out))
    }

    /// ½ Σ_z |p(z) − q(z)|.
    pub fn tv_distance(&self, other: &Self) -> Result<P, Error> {
        tv_distance(&self.table, &other.table)
    }

    pub fn to_float(&self) -> NoiseDistribution<f64> {
        NoiseDistribution::from_table_unchecked(self.k, self.table.iter().map(P::to_f64).collect())
    }

    pub fn sampler(&self) -> TableSampler {
        let weights: Vec<f64> = self.table.iter().map(P::to_f64).collect();
        TableSampler::new(&weights).expect("validated distribution has positive mass")
    }

    /// Draws z ∼ p.
    pub fn sample(&self, rng: &mut RandomStream) -> BitVector {
        BitVector::decode(self.sampler().sample(rng) as u64, self.k)
    }

    pub fn to_file(&self) -> DistributionFile {
        DistributionFile {
            k: self.k,
            mode: P::MODE,
            table: self.table.iter().map(P::to_entry).collect(),
        }
    }

    pub fn from_file(file: &DistributionFile) -> Result<Self, Error> {
        if P::MODE == Mode::Rational && file.mode == Mode::Float {
            return Err(Error::Parse(
                "float-mode distribution cannot be used where exact rationals are required".into(),
            ));
        }
        let table = file
            .table
            .iter()
            .map(P::from_entry)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(file.k, table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("distribution serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        Self::from_file(&serde_json::from_str(s)?)
    }
}

/// ½ Σ |p_i − q_i| over two tables of equal length.
pub fn tv_distance<P: Probability>(p: &[P], q: &[P]) -> Result<P, Error> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "tables of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    let l1 = p
        .iter()
        .zip(q)
        .fold(P::zero(), |acc, (a, b)| acc + (a.clone() - b.clone()).abs());
    Ok(l1 * P::half())
}

/// Bias of the XOR of independent Ber(½−δ₁) and Ber(½−δ₂): returns 2δ₁δ₂.
pub fn convolve_bernoulli<P: Probability>(delta1: &P, delta2: &P) -> Result<P, Error> {
    let half = P::half();
    for d in [delta1, delta2] {
        if d.abs() > half {
            return Err(Error::BiasOutOfRange(d.to_string(), "[-1/2, 1/2]"));
        }
    }
    Ok((P::one() + P::one()) * delta1.clone() * delta2.clone())
}

/// Law of (e₁⊕b, …, e_k⊕b) with eᵢ ∼ Ber(½ − e_bias) and b ∼ Ber(½), all independent.
pub fn common_coin_source(k: usize, e_bias: &Rational) -> Result<NoiseDistribution, Error> {
    let e = NoiseDistribution::<Rational>::product(&vec![e_bias.clone(); k])?;
    let all_ones = (1usize << k) - 1;
    let half = <Rational as Probability>::half();
    let table = (0..1usize << k)
        .map(|z| (&e.table[z] + &e.table[z ^ all_ones]) * &half)
        .collect();
    Ok(NoiseDistribution::from_table_unchecked(k, table))
}

/// Random δ-SV source with dyadic conditionals ½ + δ·j/2^resolution,
/// j uniform in [−2^resolution, 2^resolution].
pub fn random_sv_source(
    k: usize,
    delta: &Rational,
    resolution: u32,
    rng: &mut RandomStream,
) -> NoiseDistribution {
    let steps = 1u64 << resolution;
    let half = <Rational as Probability>::half();
    let mut conds = Vec::with_capacity(1 << k);
    for _ in 0..(1usize << k) {
        let j = (rng.next_u64() % (2 * steps + 1)) as i64 - steps as i64;
        conds.push(&half + delta * crate::rational::int(j) * pow2(-(resolution as i32)));
    }
    // Prefix x of coordinate i owns slot 2^(i−1) + x.
    NoiseDistribution::from_conditionals(k, |i, prefix| {
        conds[(1usize << (i - 1)) + prefix.encode() as usize].clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    fn half() -> Rational {
        ratio(1, 2)
    }

    /// Independent oracle: Pr[X_i=1 | X_<i=prefix] by summing the full table.
    fn brute_conditional(p: &NoiseDistribution, i: usize, prefix: u64) -> Option<Rational> {
        let mut num = int(0);
        let mut den = int(0);
        for z in 0..(1u64 << p.k()) {
            let v = BitVector::decode(z, p.k());
            if (0..i - 1).all(|j| v.get(j) == ((prefix >> j) & 1 == 1)) {
                den += &p.table()[z as usize];
                if v.get(i - 1) {
                    num += &p.table()[z as usize];
                }
            }
        }
        (den != int(0)).then(|| num / den)
    }

    fn section_two(delta: Rational) -> NoiseDistribution {
        let eta = crate::rational::exact_sqrt(&delta).unwrap();
        common_coin_source(2, &eta).unwrap()
    }

    #[test]
    fn validation() {
        assert!(NoiseDistribution::new(1, vec![ratio(1, 2), ratio(1, 3)]).is_err());
        assert!(NoiseDistribution::new(1, vec![ratio(3, 2), ratio(-1, 2)]).is_err());
        assert!(NoiseDistribution::new(2, vec![ratio(1, 2), ratio(1, 2)]).is_err());
        assert!(NoiseDistribution::<f64>::new(1, vec![0.5, 0.5 + 1e-13]).is_ok());
        assert!(NoiseDistribution::<f64>::new(1, vec![0.5, 0.5 + 1e-9]).is_err());
    }

    #[test]
    fn sv_parameter_examples() {
        assert_eq!(NoiseDistribution::<Rational>::uniform(3).sv_parameter(), int(0));
        let d = ratio(1, 32);
        let p = NoiseDistribution::product(&[d.clone(), d.clone(), d.clone()]).unwrap();
        assert_eq!(p.sv_parameter(), d);

        // Four-outcome oracle for the common-coin pair with δ = 1/64:
        // e ∼ Ber(3/8), Z₁ = e₁⊕b is uniform and independent of e, so
        // Pr[Z₂=1 | Z₁=0] = Pr[e₁≠e₂] = 2·(3/8)(5/8) = 15/32.
        let p = section_two(ratio(1, 64));
        let expected = [ratio(17, 64), ratio(15, 64), ratio(15, 64), ratio(17, 64)];
        assert_eq!(p.table(), &expected);
        assert_eq!(p.sv_parameter(), ratio(1, 32));
        assert!(p.sv_parameter() <= ratio(4, 64));
    }

    #[test]
    fn conditional_bit_examples() {
        let u = NoiseDistribution::<Rational>::uniform(3);
        assert_eq!(u.conditional_bit(3, &bv("10")).unwrap(), half());
        let b = NoiseDistribution::bernoulli(ratio(1, 4)).unwrap();
        assert_eq!(b.conditional_bit(1, &BitVector::zeros(0)).unwrap(), ratio(1, 4));
        let copy = NoiseDistribution::new(2, vec![half(), int(0), int(0), half()]).unwrap();
        assert_eq!(copy.conditional_bit(2, &bv("1")).unwrap(), int(1));
        assert_eq!(copy.sv_parameter(), half());
    }

    #[test]
    fn conditional_bit_errors() {
        let p = NoiseDistribution::<Rational>::point_mass(&bv("00"));
        assert!(matches!(
            p.conditional_bit(2, &bv("1")),
            Err(Error::ZeroMassPrefix { index: 2, .. })
        ));
        assert!(p.conditional_bit(3, &bv("11")).is_err());
        assert!(p.conditional_bit(2, &bv("11")).is_err());
        assert!(matches!(p.certify_sv(&ratio(1, 4)), Err(Error::NotSantaVazirani { index: 1, .. })));
        assert!(matches!(p.certify_sv(&ratio(1, 2)), Err(Error::ZeroMassPrefix { index: 2, .. })));
    }

    #[test]
    fn certify_reports_offending_prefix() {
        let p = section_two(ratio(1, 64));
        assert!(p.certify_sv(&ratio(1, 32)).is_ok());
        match p.certify_sv(&ratio(1, 64)) {
            Err(Error::NotSantaVazirani { index, prefix, .. }) => {
                assert_eq!(index, 2);
                assert_eq!(prefix, bv("0"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn marginal_examples() {
        let d = ratio(1, 8);
        let p = NoiseDistribution::product(&[d.clone(), ratio(1, 16), ratio(-1, 4)]).unwrap();
        assert_eq!(p.marginal_prefix(3).unwrap(), p);
        assert_eq!(
            p.marginal_prefix(2).unwrap(),
            NoiseDistribution::product(&[d, ratio(1, 16)]).unwrap()
        );
        let s = section_two(ratio(1, 64));
        assert_eq!(s.marginal_prefix(1).unwrap(), NoiseDistribution::uniform(1));
        assert!(p.marginal_prefix(0).is_err());
        assert!(p.marginal_prefix(4).is_err());
    }

    #[test]
    fn convolve_examples() {
        assert_eq!(convolve_bernoulli(&int(0), &ratio(3, 7)).unwrap(), int(0));
        assert_eq!(convolve_bernoulli(&half(), &ratio(3, 7)).unwrap(), ratio(3, 7));
        assert_eq!(convolve_bernoulli(&ratio(1, 4), &ratio(1, 4)).unwrap(), ratio(1, 8));
        assert!(convolve_bernoulli(&ratio(3, 4), &int(0)).is_err());
    }

    #[test]
    fn convolve_matches_enumeration_on_dyadic_grid() {
        // δ = j/32 − 1/2 for j = 0..=32.
        let grid: Vec<Rational> = (0..=32).map(|j| ratio(j, 32) - half()).collect();
        for d1 in &grid {
            for d2 in &grid {
                let p1 = &half() - d1;
                let p2 = &half() - d2;
                let one = &p1 * (int(1) - &p2) + (int(1) - &p1) * &p2;
                let bias = convolve_bernoulli(d1, d2).unwrap();
                assert_eq!(&half() - bias, one);
            }
        }
    }

    #[test]
    fn tv_examples() {
        let u = NoiseDistribution::<Rational>::uniform(2);
        assert_eq!(u.tv_distance(&u).unwrap(), int(0));
        let a = NoiseDistribution::<Rational>::point_mass(&bv("0"));
        let b = NoiseDistribution::<Rational>::point_mass(&bv("1"));
        assert_eq!(a.tv_distance(&b).unwrap(), int(1));
        let d = ratio(1, 32);
        let p = NoiseDistribution::bernoulli(&half() - &d).unwrap();
        assert_eq!(p.tv_distance(&NoiseDistribution::uniform(1)).unwrap(), d);
        assert!(u.tv_distance(&a).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let p = section_two(ratio(1, 64));
        assert_eq!(
            p.pushforward_xor(&bv("00")).unwrap(),
            NoiseDistribution::point_mass(&bv("0"))
        );
        assert_eq!(
            p.pushforward_xor(&bv("11")).unwrap(),
            NoiseDistribution::bernoulli(ratio(15, 32)).unwrap()
        );
        let d = ratio(1, 8);
        let prod = NoiseDistribution::product(&[d.clone(), d.clone()]).unwrap();
        let bias = convolve_bernoulli(&d, &d).unwrap();
        assert_eq!(
            prod.pushforward_xor(&bv("11")).unwrap(),
            NoiseDistribution::bernoulli(&half() - bias).unwrap()
        );
        assert!(p.pushforward_xor(&bv("1")).is_err());
    }

    #[test]
    fn json_round_trip_and_modes() {
        let p = section_two(ratio(1, 64));
        let s = p.to_json();
        assert!(s.contains("\"17/64\""));
        assert_eq!(NoiseDistribution::from_json(&s).unwrap(), p);
        let f = NoiseDistribution::<f64>::from_json(&s).unwrap();
        assert_eq!(f.table()[0], 17.0 / 64.0);
        let float_text = f.to_json();
        assert!(float_text.contains("\"float\""));
        assert!(NoiseDistribution::<Rational>::from_json(&float_text).is_err());
        assert!(NoiseDistribution::<Rational>::from_json(r#"{"k":1,"mode":"rational","table":["1/2","1/3"]}"#).is_err());
    }

    #[test]
    fn random_sources_respect_delta() {
        let mut rng = RandomStream::new(9);
        let delta = ratio(1, 64);
        for k in 1..=4 {
            let p = random_sv_source(k, &delta, 3, &mut rng);
            assert!(NoiseDistribution::new(k, p.table().to_vec()).is_ok());
            assert!(p.sv_parameter() <= delta);
            assert!(p.certify_sv(&delta).is_ok());
        }
    }

    fn dyadic_bias() -> impl Strategy<Value = Rational> {
        (-16i64..=16).prop_map(|j| ratio(j, 32))
    }

    fn full_support(k: usize) -> impl Strategy<Value = NoiseDistribution> {
        prop::collection::vec(1i64..=20, 1 << k).prop_map(move |w| {
            let total: i64 = w.iter().sum();
            NoiseDistribution::new(k, w.iter().map(|&x| ratio(x, total)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sv_of_product_is_max_bias(biases in prop::collection::vec(dyadic_bias(), 1..=4)) {
            let p = NoiseDistribution::product(&biases).unwrap();
            let max = biases.iter().map(num_traits::Signed::abs).max().unwrap();
            prop_assert_eq!(p.sv_parameter(), max);
        }

        #[test]
        fn chain_rule_reconstructs(p in (1usize..=4).prop_flat_map(full_support)) {
            for z in 0..(1u64 << p.k()) {
                let mut prod = int(1);
                for i in 1..=p.k() {
                    let c = p.conditional_bit(i, &BitVector::decode(z, i - 1)).unwrap();
                    prop_assert_eq!(Some(c.clone()), brute_conditional(&p, i, z));
                    prod *= if (z >> (i - 1)) & 1 == 1 { c } else { int(1) - c };
                }
                prop_assert_eq!(&prod, &p.table()[z as usize]);
            }
        }

        #[test]
        fn tv_is_a_metric(
            (a, b, c) in (1usize..=4).prop_flat_map(|k| (full_support(k), full_support(k), full_support(k)))
        ) {
            let ab = a.tv_distance(&b).unwrap();
            prop_assert_eq!(&ab, &b.tv_distance(&a).unwrap());
            prop_assert!(ab <= a.tv_distance(&c).unwrap() + c.tv_distance(&b).unwrap());
            prop_assert!(ab >= int(0) && ab <= int(1));
            prop_assert_eq!(a.tv_distance(&a).unwrap(), int(0));
        }

        #[test]
        fn operations_preserve_unit_mass(p in (2usize..=4).prop_flat_map(full_support), w in 0u64..16) {
            let weights = BitVector::decode(w, p.k());
            let x = p.pushforward_xor(&weights).unwrap();
            prop_assert!(NoiseDistribution::new(1, x.table().to_vec()).is_ok());
            let m = p.marginal_prefix(p.k() - 1).unwrap();
            prop_assert!(NoiseDistribution::new(p.k() - 1, m.table().to_vec()).is_ok());
        }
    }
}
