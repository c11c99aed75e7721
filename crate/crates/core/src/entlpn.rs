//! The EntLPN reduction.
//!
//! Input: k independent samples (aᵢ, yᵢ) of LPN_{n, 2^{k+2}δ}(sk), a
//! δ-Santha-Vazirani source p over F₂^k with δ < 2^{−(k+3)}.
//! Output: one batch distributed exactly as LPN_{n,p}(sk). The secret is
//! never an input.
//!
//! The output is built one sample at a time. Sample 1 gets fresh Bernoulli
//! noise e′₁. Sample i > 1 gets a random affine function of the earlier
//! output residuals added to its noise: F⁽ⁱ⁾ ∼ μ*(p⁽ⁱ⁾) is drawn, and
//! adding F⁽ⁱ⁾₀ ⊕ Σⱼ F⁽ⁱ⁾ⱼ·y′ⱼ to yᵢ while adding Σⱼ F⁽ⁱ⁾ⱼ·a′ⱼ to aᵢ adds
//! exactly F⁽ⁱ⁾₀ ⊕ Σⱼ F⁽ⁱ⁾ⱼ·(y′ⱼ ⊕ ⟨a′ⱼ, sk⟩) to the residual, without
//! knowing sk.

use num_traits::{One, Zero};

use crate::dist::NoiseDistribution;
use crate::error::Error;
use crate::gf2::BitVector;
use crate::linearize::{build_mu_star, AffineCoeffDistribution, AffineSampler, BiasFunction};
use crate::lpn::{check_exact_size, Batch, BatchLaw, LpnSample, SecretKey};
use crate::rational::{format_rational, pow2, to_f64, Probability, Rational};
use crate::rng::{bernoulli_unchecked, RandomStream};

/// Size guard on `(n+1)·k` for the exact output-law enumeration.
pub const MAX_EXACT_REDUCTION_BITS: usize = 16;

/// Exclusive upper bound 2^{−(k+3)} on δ.
pub fn delta_bound(k: usize) -> Rational {
    pow2(-(k as i32) - 3)
}

/// A validated reduction instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionConfig {
    n: usize,
    delta: Rational,
    p: NoiseDistribution,
}

impl ReductionConfig {
    pub fn new(n: usize, p: NoiseDistribution, delta: Rational) -> Result<Self, Error> {
        let bound = delta_bound(p.k());
        if delta <= Rational::zero() || delta >= bound {
            return Err(Error::DeltaOutOfRange {
                delta: format_rational(&delta),
                bound: format_rational(&bound),
            });
        }
        p.certify_sv(&delta)?;
        Ok(ReductionConfig { n, delta, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.p.k()
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn p(&self) -> &NoiseDistribution {
        &self.p
    }

    /// Bias 2^{k+2}δ of the standard LPN samples the reduction consumes.
    pub fn input_bias(&self) -> Rational {
        pow2(self.k() as i32 + 2) * &self.delta
    }
}

/// p⁽ⁱ⁾(z) = ½ − (½ − Pr[Zᵢ=1 | Z_{<i}=z]) / (2^{k+3}δ), over z ∈ F₂^{i−1}.
pub fn compute_p_i(p: &NoiseDistribution, i: usize, delta: &Rational) -> Result<BiasFunction, Error> {
    if i == 0 || i > p.k() {
        return Err(Error::IndexOutOfRange { index: i, max: p.k() });
    }
    let half = <Rational as Probability>::half();
    let scale = pow2(p.k() as i32 + 3) * delta;
    let table = (0..1u64 << (i - 1))
        .map(|z| {
            let prefix = BitVector::decode(z, i - 1);
            let c = p.conditional_bit(i, &prefix)?;
            let bias = &half - &c;
            if num_traits::Signed::abs(&bias) > *delta {
                return Err(Error::NotSantaVazirani {
                    delta: format_rational(delta),
                    index: i,
                    prefix,
                    conditional: format_rational(&c),
                    bias: format_rational(&bias),
                });
            }
            Ok(&half - bias / &scale)
        })
        .collect::<Result<Vec<_>, _>>()?;
    BiasFunction::new(i - 1, table)
}

#[derive(Clone, Debug)]
struct Step {
    exact: AffineCoeffDistribution,
    float: AffineCoeffDistribution<f64>,
    sampler: AffineSampler,
}

/// A reduction with every μ* table precomputed.
#[derive(Clone, Debug)]
pub struct EntLpn {
    config: ReductionConfig,
    first_noise: Rational,
    first_noise_f64: f64,
    /// Entry j serves output sample j + 2.
    steps: Vec<Step>,
}

impl EntLpn {
    pub fn new(config: ReductionConfig) -> Result<Self, Error> {
        let k = config.k();
        let half = <Rational as Probability>::half();
        // e′₁ ∼ Ber(½ − ½(½ − p₁(1)) / (2^{k+2}δ)).
        let p1 = config.p.marginal_prefix(1)?.table()[1].clone();
        let first_noise = &half - &half * (&half - p1) / (pow2(k as i32 + 2) * &config.delta);
        let steps = (2..=k)
            .map(|i| {
                let q = compute_p_i(&config.p, i, &config.delta)?;
                let exact = build_mu_star(&q)?;
                let float = build_mu_star(&q.to_float())?;
                let sampler = float.sampler();
                Ok(Step {
                    exact,
                    float,
                    sampler,
                })
            })
            .collect::<Result<_, Error>>()?;
        Ok(EntLpn {
            first_noise_f64: to_f64(&first_noise),
            first_noise,
            steps,
            config,
        })
    }

    pub fn config(&self) -> &ReductionConfig {
        &self.config
    }

    /// Pr[e′₁ = 1].
    pub fn first_noise(&self) -> &Rational {
        &self.first_noise
    }

    /// μ* used at output sample `i` (2 ≤ i ≤ k).
    pub fn mu_star(&self, i: usize) -> Option<&AffineCoeffDistribution> {
        i.checked_sub(2).and_then(|j| self.steps.get(j)).map(|s| &s.exact)
    }

    /// The floating copy of [`EntLpn::mu_star`] that drives sampling.
    pub fn mu_star_float(&self, i: usize) -> Option<&AffineCoeffDistribution<f64>> {
        i.checked_sub(2).and_then(|j| self.steps.get(j)).map(|s| &s.float)
    }

    fn check_input(&self, input: &Batch) -> Result<(), Error> {
        if input.k() != self.config.k() {
            return Err(Error::DimensionMismatch(format!(
                "reduction needs {} input samples, got {}",
                self.config.k(),
                input.k()
            )));
        }
        if input.n() != self.config.n {
            return Err(Error::LengthMismatch {
                expected: self.config.n,
                found: input.n(),
            });
        }
        Ok(())
    }

    /// Runs the reduction on one block of k standard-LPN samples.
    pub fn reduce(&self, input: &Batch, rng: &mut RandomStream) -> Result<Batch, Error> {
        self.check_input(input)?;
        let e1 = bernoulli_unchecked(self.first_noise_f64, rng);
        let coeffs: Vec<usize> = self.steps.iter().map(|s| s.sampler.sample_index(rng)).collect();
        Ok(self.transform(input.samples(), e1, &coeffs))
    }

    /// The deterministic part of the reduction, given its internal randomness:
    /// `e1` is e′₁ and `coeffs[j]` is the index of F⁽ʲ⁺²⁾ in F₂^{j+2}.
    /// Processes `input.len()` samples, which may be fewer than k.
    fn transform(&self, input: &[LpnSample], e1: bool, coeffs: &[usize]) -> Batch {
        let mut out: Vec<LpnSample> = Vec::with_capacity(input.len());
        for (idx, sample) in input.iter().enumerate() {
            if idx == 0 {
                // a′₁ = a₁, y′₁ = y₁ ⊕ e′₁
                out.push(LpnSample {
                    u: sample.u.clone(),
                    y: sample.y ^ e1,
                });
                continue;
            }
            let f = coeffs[idx - 1];
            // β = Σⱼ Fⱼ a′ⱼ and α = F₀ ⊕ Σⱼ Fⱼ y′ⱼ; the new sample is (aᵢ − β, yᵢ + α).
            let mut u = sample.u.clone();
            let mut y = sample.y ^ (f & 1 == 1);
            for (j, prev) in out.iter().enumerate() {
                if (f >> (j + 1)) & 1 == 1 {
                    u.xor_assign(&prev.u).expect("equal dimensions");
                    y ^= prev.y;
                }
            }
            out.push(LpnSample { u, y });
        }
        Batch::new(self.config.n, out).expect("equal dimensions")
    }

    /// Exact law of the first `steps` output samples when the inputs are iid
    /// LPN_{n, input_bias}(sk).
    ///
    /// Enumerates every input u-tuple, input noise vector, e′₁ and F⁽ⁱ⁾,
    /// weighting each by its exact probability, and pushes the resulting
    /// deterministic run forward into the outcome table. With
    /// `input_bias = config.input_bias()` and `steps = k` this is the law of
    /// the reduction's output.
    pub fn exact_output_law(
        &self,
        sk: &SecretKey,
        input_bias: &Rational,
        steps: usize,
    ) -> Result<BatchLaw, Error> {
        let n = self.config.n;
        if sk.n() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: sk.n(),
            });
        }
        if steps == 0 || steps > self.config.k() {
            return Err(Error::IndexOutOfRange {
                index: steps,
                max: self.config.k(),
            });
        }
        check_exact_size(n, self.config.k(), MAX_EXACT_REDUCTION_BITS)?;
        let half = <Rational as Probability>::half();
        if num_traits::Signed::abs(input_bias) > half {
            return Err(Error::BiasOutOfRange(format_rational(input_bias), "[-1/2, 1/2]"));
        }

        // Internal randomness: input noise bits, e′₁, then F⁽²⁾..F⁽ˢᵗᵉᵖˢ⁾.
        let noise_one = &half - input_bias;
        let bit_law = |p_one: &Rational| vec![Rational::one() - p_one, p_one.clone()];
        let mut factors: Vec<Vec<Rational>> = vec![bit_law(&noise_one); steps];
        factors.push(bit_law(&self.first_noise));
        factors.extend(self.steps[..steps - 1].iter().map(|s| s.exact.table().to_vec()));

        let outcome_bits = (n + 1) * steps;
        let mut table = vec![Rational::zero(); 1 << outcome_bits];
        let u_tuples = 1usize << (n * steps);
        let mut input: Vec<LpnSample> = (0..steps)
            .map(|_| LpnSample {
                u: BitVector::zeros(n),
                y: false,
            })
            .collect();

        for_each_assignment(&factors, |choice, weight| {
            let (noise, rest) = choice.split_at(steps);
            let e1 = rest[0] == 1;
            let coeffs = &rest[1..];
            for tuple in 0..u_tuples {
                for (i, sample) in input.iter_mut().enumerate() {
                    sample.u = BitVector::decode((tuple >> (n * i)) as u64, n);
                    sample.y = sample.u.inner_product(sk.bits()).expect("dimension checked")
                        ^ (noise[i] == 1);
                }
                let out = self.transform(&input, e1, coeffs);
                table[BatchLaw::outcome_index(&out)] += weight;
            }
        });

        let scale = pow2(-((n * steps) as i32));
        for v in &mut table {
            *v *= &scale;
        }
        Ok(BatchLaw::from_table(n, steps, table))
    }
}

/// Calls `f(choice, weight)` for every tuple `choice[j] ∈ 0..factors[j].len()`
/// of positive product weight.
fn for_each_assignment(factors: &[Vec<Rational>], mut f: impl FnMut(&[usize], &Rational)) {
    fn recurse(
        factors: &[Vec<Rational>],
        choice: &mut Vec<usize>,
        weight: Rational,
        f: &mut impl FnMut(&[usize], &Rational),
    ) {
        let depth = choice.len();
        if depth == factors.len() {
            f(choice, &weight);
            return;
        }
        for (i, w) in factors[depth].iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            choice.push(i);
            recurse(factors, choice, &weight * w, f);
            choice.pop();
        }
    }
    recurse(factors, &mut Vec::with_capacity(factors.len()), Rational::one(), &mut f);
}

/// Applies the reduction once, building the plan from scratch.
pub fn ent_lpn(
    input: &Batch,
    p: &NoiseDistribution,
    delta: &Rational,
    rng: &mut RandomStream,
) -> Result<Batch, Error> {
    let reduction = EntLpn::new(ReductionConfig::new(input.n(), p.clone(), delta.clone())?)?;
    reduction.reduce(input, rng)
}

/// Exact law of `ent_lpn`'s output on iid LPN_{n, 2^{k+2}δ}(sk) inputs.
pub fn ent_lpn_exact_distribution(
    n: usize,
    p: &NoiseDistribution,
    delta: &Rational,
    sk: &SecretKey,
) -> Result<BatchLaw, Error> {
    let config = ReductionConfig::new(n, p.clone(), delta.clone())?;
    check_exact_size(n, config.k(), MAX_EXACT_REDUCTION_BITS)?;
    let bias = config.input_bias();
    let k = config.k();
    EntLpn::new(config)?.exact_output_law(sk, &bias, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{common_coin_source, random_sv_source};
    use crate::linearize::apply_a_transpose;
    use crate::lpn::{exact_target_distribution, residuals, sample_lpn};
    use crate::rational::{int, ratio};

    fn all_keys(n: usize) -> Vec<SecretKey> {
        (0..1u64 << n)
            .map(|s| SecretKey::new(BitVector::decode(s, n)))
            .collect()
    }

    #[test]
    fn config_validation() {
        let p = NoiseDistribution::product(&[ratio(1, 64), ratio(1, 64)]).unwrap();
        assert!(ReductionConfig::new(1, p.clone(), ratio(1, 64)).is_ok());
        assert!(matches!(
            ReductionConfig::new(1, p.clone(), ratio(1, 32)),
            Err(Error::DeltaOutOfRange { .. })
        ));
        assert!(ReductionConfig::new(1, p.clone(), int(0)).is_err());
        assert!(matches!(
            ReductionConfig::new(1, p, ratio(1, 128)),
            Err(Error::NotSantaVazirani { index: 1, .. })
        ));
        let cfg = ReductionConfig::new(3, NoiseDistribution::uniform(3), ratio(1, 128)).unwrap();
        assert_eq!(cfg.input_bias(), ratio(1, 4));
    }

    #[test]
    fn p_i_examples() {
        let delta = ratio(1, 128);
        let u = NoiseDistribution::uniform(3);
        for i in 1..=3 {
            assert!(compute_p_i(&u, i, &delta).unwrap().table().iter().all(|v| *v == ratio(1, 2)));
        }

        let d = ratio(1, 32);
        let dprime = ratio(1, 64);
        let p = NoiseDistribution::bernoulli(ratio(1, 2) - &dprime).unwrap();
        let q = compute_p_i(&p, 1, &d).unwrap();
        assert_eq!(q.table(), &[ratio(1, 2) - &dprime / (int(16) * &d)]);

        let k = 3;
        let prod = NoiseDistribution::product(&vec![delta.clone(); k]).unwrap();
        for i in 1..=k {
            let q = compute_p_i(&prod, i, &delta).unwrap();
            assert!(q.table().iter().all(|v| *v == ratio(1, 2) - pow2(-(k as i32) - 3)));
        }
        assert!(compute_p_i(&prod, 0, &delta).is_err());
        assert!(compute_p_i(&prod, 2, &ratio(1, 256)).is_err());
    }

    #[test]
    fn first_step_matches_general_machinery() {
        let mut rng = RandomStream::new(21);
        for k in 1..=3 {
            let delta = pow2(-(k as i32) - 4);
            for _ in 0..5 {
                let p = random_sv_source(k, &delta, 4, &mut rng);
                let plan = EntLpn::new(ReductionConfig::new(1, p.clone(), delta.clone()).unwrap()).unwrap();
                let q = compute_p_i(&p, 1, &delta).unwrap();
                let mu = build_mu_star(&q).unwrap();
                assert_eq!(mu.k(), 0);
                assert_eq!(&mu.table()[1], plan.first_noise());
                assert_eq!(apply_a_transpose(&mu), q.table());
            }
        }
    }

    #[test]
    fn float_tables_track_exact_tables() {
        let mut rng = RandomStream::new(22);
        let delta = pow2(-7);
        let p = random_sv_source(3, &delta, 6, &mut rng);
        let plan = EntLpn::new(ReductionConfig::new(4, p, delta).unwrap()).unwrap();
        for i in 2..=3 {
            let exact = plan.mu_star(i).unwrap();
            let float = plan.mu_star_float(i).unwrap();
            for (a, b) in exact.table().iter().zip(float.table()) {
                assert!((to_f64(a) - b).abs() < 1e-12);
            }
        }
        assert!(plan.mu_star(1).is_none() && plan.mu_star(4).is_none());
    }

    #[test]
    fn k1_closed_form() {
        let delta = pow2(-5);
        let dprime = pow2(-6);
        let p = NoiseDistribution::bernoulli(ratio(1, 2) - &dprime).unwrap();
        for sk in all_keys(1) {
            let law = ent_lpn_exact_distribution(1, &p, &delta, &sk).unwrap();
            assert_eq!(law, exact_target_distribution(1, &p, &sk).unwrap());
            assert_eq!(law.residual_law(&sk).unwrap(), p);
        }
    }

    #[test]
    fn uniform_source_gives_uniform_output() {
        let delta = pow2(-6);
        let u = NoiseDistribution::uniform(2);
        let plan = EntLpn::new(ReductionConfig::new(1, u, delta.clone()).unwrap()).unwrap();
        for sk in all_keys(1) {
            // Any input noise level: the fair e′₁ and F coins wash it out.
            for bias in [int(0), ratio(1, 4), ratio(1, 2)] {
                let law = plan.exact_output_law(&sk, &bias, 2).unwrap();
                assert!(law.table().iter().all(|v| *v == ratio(1, 16)));
            }
        }
    }

    #[test]
    fn common_coin_source_exact() {
        let delta = pow2(-6);
        let p = common_coin_source(2, &pow2(-4)).unwrap();
        assert!(p.sv_parameter() <= delta);
        for sk in all_keys(1) {
            let law = ent_lpn_exact_distribution(1, &p, &delta, &sk).unwrap();
            assert_eq!(law, exact_target_distribution(1, &p, &sk).unwrap());
        }
    }

    #[test]
    fn per_step_invariant() {
        let mut rng = RandomStream::new(23);
        let k = 3;
        let delta = pow2(-7);
        let p = random_sv_source(k, &delta, 3, &mut rng);
        let plan = EntLpn::new(ReductionConfig::new(1, p.clone(), delta).unwrap()).unwrap();
        let bias = plan.config().input_bias();
        for sk in all_keys(1) {
            for i in 1..=k {
                let law = plan.exact_output_law(&sk, &bias, i).unwrap();
                let target = exact_target_distribution(1, &p.marginal_prefix(i).unwrap(), &sk).unwrap();
                assert_eq!(law, target, "step {i}");
            }
        }
    }

    #[test]
    fn exact_law_size_guard() {
        let p = NoiseDistribution::uniform(3);
        let sk = SecretKey::new(BitVector::zeros(5));
        assert!(matches!(
            ent_lpn_exact_distribution(5, &p, &pow2(-7), &sk),
            Err(Error::SizeGuard { value: 18, .. })
        ));
    }

    #[test]
    fn reduce_checks_shapes() {
        let p = NoiseDistribution::uniform(2);
        let mut rng = RandomStream::new(24);
        let sk = SecretKey::new(BitVector::zeros(3));
        let one = sample_lpn(3, 0.25, &sk, &mut rng).unwrap();
        let short = Batch::new(3, vec![one.clone()]).unwrap();
        assert!(ent_lpn(&short, &p, &pow2(-6), &mut rng).is_err());
        let ok = Batch::new(3, vec![one.clone(), one]).unwrap();
        let out = ent_lpn(&ok, &p, &pow2(-6), &mut rng).unwrap();
        assert_eq!((out.n(), out.k()), (3, 2));
        assert!(ent_lpn(&ok, &p, &pow2(-5), &mut rng).is_err());
    }

    #[test]
    fn reduce_is_deterministic_per_seed() {
        let delta = pow2(-7);
        let mut src = RandomStream::new(25);
        let p = random_sv_source(3, &delta, 5, &mut src);
        let sk = SecretKey::random(16, &mut src);
        let input = Batch::new(
            16,
            (0..3).map(|_| sample_lpn(16, 0.25, &sk, &mut src).unwrap()).collect(),
        )
        .unwrap();
        let a = ent_lpn(&input, &p, &delta, &mut RandomStream::new(1)).unwrap();
        let b = ent_lpn(&input, &p, &delta, &mut RandomStream::new(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(residuals(&a, &sk).unwrap().len(), 3);
    }
}
