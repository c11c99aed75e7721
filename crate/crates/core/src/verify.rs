//! Verification battery for the reduction and its supporting lemmas.

use std::time::Instant;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{common_coin_source, NoiseDistribution};
use crate::entlpn::{EntLpn, ReductionConfig, MAX_EXACT_REDUCTION_BITS};
use crate::error::Error;
use crate::lpn::{check_exact_size, exact_target_distribution, residuals, sample_lpn, Batch, SecretKey};
use crate::rational::{exact_sqrt, format_rational, int, pow2, ratio, to_f64, Rational};
use crate::rng::RandomStream;
use crate::stats::{chi_square_test, ChiSquareResult, MIN_EXPECTED_COUNT};

/// Default significance level for statistical checks.
pub const DEFAULT_SIGNIFICANCE: f64 = 1e-3;

/// At most this many low bits of each a′ᵢ enter the uniformity test.
pub const MAX_UNIFORMITY_BITS: usize = 8;

/// Largest k accepted by [`check_lemma2`].
pub const MAX_LEMMA2_K: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    Exact,
    Statistical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub n: usize,
    pub k: usize,
    pub delta: String,
    /// Hex SHA-256 of the canonical JSON form of p.
    pub p_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sk: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Bias of the standard LPN inputs, when it differs from 2^{k+2}δ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_bias: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedChiSquare {
    pub name: String,
    pub cells: usize,
    #[serde(flatten)]
    pub result: ChiSquareResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub instance: InstanceDescriptor,
    pub mode: CheckMode,
    /// Exact mode: "num/den". Statistical mode: empirical residual TV as a decimal.
    pub tv_distance: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub chi_square: Vec<NamedChiSquare>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    /// Per-test threshold after Bonferroni correction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_batches: Option<u64>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report without its wall-clock field, for reproducibility comparisons.
    pub fn statistics_json(&self) -> String {
        let mut r = self.clone();
        r.runtime_seconds = 0.0;
        serde_json::to_string(&r).expect("report serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn descriptor(config: &ReductionConfig, sk: Option<&SecretKey>, seed: Option<u64>) -> InstanceDescriptor {
    InstanceDescriptor {
        n: config.n(),
        k: config.k(),
        delta: format_rational(config.delta()),
        p_digest: sha256_hex(config.p().to_json().as_bytes()),
        sk: sk.map(|s| s.bits().to_string()),
        seed,
        input_bias: None,
    }
}

/// Exact TV between the reduction's output law and LPN_{n,p}(sk); passes iff it is 0.
pub fn check_reduction_exact(
    n: usize,
    p: &NoiseDistribution,
    delta: &Rational,
    sk: &SecretKey,
) -> Result<VerificationReport, Error> {
    let config = ReductionConfig::new(n, p.clone(), delta.clone())?;
    let bias = config.input_bias();
    check_reduction_exact_at_bias(config, sk, &bias)
}

/// As [`check_reduction_exact`], but feeding inputs of an arbitrary bias.
/// Any bias other than 2^{k+2}δ is a negative control.
pub fn check_reduction_exact_at_bias(
    config: ReductionConfig,
    sk: &SecretKey,
    input_bias: &Rational,
) -> Result<VerificationReport, Error> {
    let start = Instant::now();
    let mut instance = descriptor(&config, Some(sk), None);
    if *input_bias != config.input_bias() {
        instance.input_bias = Some(format_rational(input_bias));
    }
    let (n, k) = (config.n(), config.k());
    check_exact_size(n, k, MAX_EXACT_REDUCTION_BITS)?;
    let target = exact_target_distribution(n, config.p(), sk)?;
    let reduction = EntLpn::new(config)?;
    let output = reduction.exact_output_law(sk, input_bias, k)?;
    let tv = output.tv_distance(&target)?;
    Ok(VerificationReport {
        instance,
        mode: CheckMode::Exact,
        pass: tv.is_zero(),
        tv_distance: format_rational(&tv),
        chi_square: Vec::new(),
        significance: None,
        threshold: None,
        num_batches: None,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Streaming histograms of residuals and of the low bits of each u-vector.
#[derive(Clone, Debug)]
pub struct BatchHistogram {
    n: usize,
    k: usize,
    u_bits: usize,
    residuals: Vec<u64>,
    u_counts: Vec<Vec<u64>>,
    batches: u64,
}

impl BatchHistogram {
    /// `expected_batches` sizes the u-vector cells so each expects ≥ 5 hits.
    pub fn new(n: usize, k: usize, expected_batches: u64) -> Self {
        let mut u_bits = n.min(MAX_UNIFORMITY_BITS);
        while u_bits > 0 && (expected_batches as f64) < MIN_EXPECTED_COUNT * (1u64 << u_bits) as f64 {
            u_bits -= 1;
        }
        BatchHistogram {
            n,
            k,
            u_bits,
            residuals: vec![0; 1 << k],
            u_counts: vec![vec![0; 1 << u_bits]; k],
            batches: 0,
        }
    }

    pub fn add(&mut self, batch: &Batch, sk: &SecretKey) -> Result<(), Error> {
        if (batch.n(), batch.k()) != (self.n, self.k) {
            return Err(Error::DimensionMismatch(format!(
                "batch (n={}, k={}) vs histogram (n={}, k={})",
                batch.n(),
                batch.k(),
                self.n,
                self.k
            )));
        }
        self.residuals[residuals(batch, sk)?.encode() as usize] += 1;
        for (counts, s) in self.u_counts.iter_mut().zip(batch.samples()) {
            counts[s.u.low_bits(self.u_bits) as usize] += 1;
        }
        self.batches += 1;
        Ok(())
    }

    pub fn batches(&self) -> u64 {
        self.batches
    }

    pub fn residual_counts(&self) -> &[u64] {
        &self.residuals
    }

    /// Chi-square fits: residuals against `target`, then each a′ᵢ against uniform.
    pub fn fit(&self, target: &NoiseDistribution<f64>) -> Result<Vec<NamedChiSquare>, Error> {
        if target.k() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "target over k={} vs histogram k={}",
                target.k(),
                self.k
            )));
        }
        let mut out = vec![NamedChiSquare {
            name: "residuals".into(),
            cells: 1 << self.k,
            result: chi_square_test(&self.residuals, target.table())?,
        }];
        let uniform = vec![1.0 / (1u64 << self.u_bits) as f64; 1 << self.u_bits];
        for (i, counts) in self.u_counts.iter().enumerate() {
            out.push(NamedChiSquare {
                name: format!("u{}_low{}", i + 1, self.u_bits),
                cells: counts.len(),
                result: chi_square_test(counts, &uniform)?,
            });
        }
        Ok(out)
    }

    pub fn empirical_tv(&self, target: &NoiseDistribution<f64>) -> f64 {
        let total = self.batches.max(1) as f64;
        0.5 * self
            .residuals
            .iter()
            .zip(target.table())
            .map(|(&c, p)| (c as f64 / total - p).abs())
            .sum::<f64>()
    }
}

/// Ensures every chi-square cell expects at least five hits.
pub fn check_sample_size(target: &NoiseDistribution<f64>, num_batches: u64) -> Result<(), Error> {
    let min_p = target
        .table()
        .iter()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    let min_expected = (min_p * num_batches as f64).min(num_batches as f64 / 2.0);
    if min_expected < MIN_EXPECTED_COUNT {
        return Err(Error::TooFewSamples(format!("{min_expected:.3}")));
    }
    Ok(())
}

/// Builds a statistical report from a filled histogram.
pub fn statistical_report(
    instance: InstanceDescriptor,
    histogram: &BatchHistogram,
    target: &NoiseDistribution<f64>,
    significance: f64,
    start: Instant,
) -> Result<VerificationReport, Error> {
    check_sample_size(target, histogram.batches())?;
    let tests = histogram.fit(target)?;
    let threshold = significance / tests.len() as f64;
    let pass = tests.iter().all(|t| t.result.p_value > threshold);
    Ok(VerificationReport {
        instance,
        mode: CheckMode::Statistical,
        tv_distance: format!("{:e}", histogram.empirical_tv(target)),
        chi_square: tests,
        significance: Some(significance),
        threshold: Some(threshold),
        num_batches: Some(histogram.batches()),
        pass,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs the reduction `num_batches` times on fresh LPN_{n, 2^{k+2}δ}(sk)
/// samples and tests the outputs against p.
pub fn check_reduction_statistical(
    n: usize,
    p: &NoiseDistribution,
    delta: &Rational,
    sk: &SecretKey,
    num_batches: u64,
    significance: f64,
    rng: &mut RandomStream,
) -> Result<VerificationReport, Error> {
    check_reduction_statistical_against(n, p, delta, sk, num_batches, significance, p, rng)
}

/// As [`check_reduction_statistical`], with residuals tested against `target`
/// instead of p. A target other than p is a power check.
#[allow(clippy::too_many_arguments)]
pub fn check_reduction_statistical_against(
    n: usize,
    p: &NoiseDistribution,
    delta: &Rational,
    sk: &SecretKey,
    num_batches: u64,
    significance: f64,
    target: &NoiseDistribution,
    rng: &mut RandomStream,
) -> Result<VerificationReport, Error> {
    let start = Instant::now();
    let config = ReductionConfig::new(n, p.clone(), delta.clone())?;
    let target = target.to_float();
    check_sample_size(&target, num_batches)?;
    let k = config.k();
    let input_bias = to_f64(&config.input_bias());
    let instance = descriptor(&config, Some(sk), Some(rng.seed()));
    let reduction = EntLpn::new(config)?;
    let mut hist = BatchHistogram::new(n, k, num_batches);
    for _ in 0..num_batches {
        let input = (0..k)
            .map(|_| sample_lpn(n, input_bias, sk, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let out = reduction.reduce(&Batch::new(n, input)?, rng)?;
        hist.add(&out, sk)?;
    }
    statistical_report(instance, &hist, &target, significance, start)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub k: usize,
    pub size: usize,
    pub symmetric: bool,
    /// B𝟙 = 2^{k−1}𝟙
    pub row_sums: bool,
    /// B² = 2^{k−2}(J + I)
    pub square_identity: bool,
    /// B · 2^{2−k}(B − J/2) = I
    pub inverse_identity: bool,
    /// Smallest eigenvalue of BᵀB implied by the square identity.
    pub min_eigenvalue_btb: String,
    pub sigma_min: f64,
    /// The bound 2^{(k−2)/2}.
    pub sigma_min_bound: f64,
    pub bound_met_with_equality: bool,
    pub implication: Vec<String>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

/// Certifies the structure of B for one k by exact integer computation.
///
/// B has 0/1 entries, so products are computed on packed rows: by symmetry
/// (B²)_{uv} = |row_u ∧ row_v|, and with B⁻¹ = (2B − J)/2^{k−1},
/// (B(2B − J))_{uv} = 2|row_u ∧ row_v| − |row_u|, which must equal 2^{k−1}·[u = v].
pub fn check_lemma2(k: usize) -> Result<Lemma2Report, Error> {
    if k == 0 || k > MAX_LEMMA2_K {
        return Err(Error::IndexOutOfRange {
            index: k,
            max: MAX_LEMMA2_K,
        });
    }
    let start = Instant::now();
    let m = (1usize << k) - 1;
    let words = m.div_ceil(64);
    // rows[u-1] has bit v-1 set iff ⟨u,v⟩ is odd.
    let rows: Vec<Vec<u64>> = (1..=m)
        .map(|u| {
            let mut row = vec![0u64; words];
            for v in 1..=m {
                if (u & v).count_ones() & 1 == 1 {
                    row[(v - 1) / 64] |= 1 << ((v - 1) % 64);
                }
            }
            row
        })
        .collect();
    let entry = |u: usize, v: usize| (rows[u][v / 64] >> (v % 64)) & 1;
    let and_count = |a: &[u64], b: &[u64]| -> i64 {
        a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as i64).sum()
    };

    let symmetric = (0..m).all(|u| (0..u).all(|v| entry(u, v) == entry(v, u)));
    let half_k = 1i64 << (k - 1);
    let row_weights: Vec<i64> = rows.iter().map(|r| and_count(r, r)).collect();
    let row_sums = row_weights.iter().all(|&w| w == half_k);

    let mut square_identity = symmetric;
    let mut inverse_identity = symmetric;
    for u in 0..m {
        for v in u..m {
            let inner = and_count(&rows[u], &rows[v]);
            let diag = (u == v) as i64;
            // 2·(B²)_{uv} = 2^{k−1}(1 + [u=v])
            square_identity &= 2 * inner == half_k * (1 + diag);
            inverse_identity &= 2 * inner - row_weights[u] == half_k * diag;
        }
    }

    // BᵀB = B² = 2^{k−2}(J + I) has eigenvalue 2^{2k−2} on 𝟙 and 2^{k−2} on 𝟙^⊥;
    // the latter is empty when k = 1.
    let min_eig = if m >= 2 { pow2(k as i32 - 2) } else { pow2(2 * k as i32 - 2) };
    let sigma_min = to_f64(&min_eig).sqrt();
    let sigma_min_bound = 2f64.powf((k as f64 - 2.0) / 2.0);
    let identities = symmetric && row_sums && square_identity && inverse_identity;
    let implication = vec![
        "B is symmetric, so B^T B = B^2".to_string(),
        format!("B^2 = 2^{}(J + I) holds exactly", k as i32 - 2),
        format!(
            "eigenvalues of 2^{}(J + I) on a {m}x{m} matrix: 2^{} (once, on the all-ones vector) and 2^{} ({} times)",
            k as i32 - 2,
            2 * k as i32 - 2,
            k as i32 - 2,
            m - 1
        ),
        format!("lambda_min(B^T B) = {}", format_rational(&min_eig)),
        format!("sigma_min(B) = sqrt({}) >= 2^(({k}-2)/2)", format_rational(&min_eig)),
    ];
    let bound_met = min_eig >= pow2(k as i32 - 2);
    Ok(Lemma2Report {
        k,
        size: m,
        symmetric,
        row_sums,
        square_identity,
        inverse_identity,
        min_eigenvalue_btb: format_rational(&min_eig),
        sigma_min,
        sigma_min_bound,
        bound_met_with_equality: m >= 2,
        implication,
        pass: identities && bound_met,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    #[serde(with = "crate::rational::serde_rational")]
    pub delta: Rational,
    /// √δ: each eᵢ ∼ Ber(½ − √δ).
    #[serde(with = "crate::rational::serde_rational")]
    pub e_bias: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub sv_param: Rational,
    /// TV(Z₁ ⊕ Z₂, Ber(½)).
    #[serde(with = "crate::rational::serde_rational")]
    pub tv_xor: Rational,
    /// Smallest η with Ber(½−η)^{⊗2} XOR statistic at least tv_xor: √(tv_xor/2).
    #[serde(with = "crate::rational::serde_rational")]
    pub implied_min_product_bias: Rational,
    /// sv_param / δ.
    #[serde(with = "crate::rational::serde_rational")]
    pub sv_constant: Rational,
    pub tv_xor_is_two_delta: bool,
}

/// Statistics of the law of (e₁⊕b, e₂⊕b), eᵢ ∼ Ber(½−√δ), b ∼ Ber(½).
///
/// δ must lie in [0, 1/16) and be the square of a rational, so that √δ
/// and the derived quantities stay exact. δ = 0 gives the uniform source.
pub fn counterexample_report(delta: &Rational) -> Result<CounterexampleReport, Error> {
    if *delta < int(0) || *delta >= ratio(1, 16) {
        return Err(Error::BiasOutOfRange(format_rational(delta), "[0, 1/16)"));
    }
    let e_bias = exact_sqrt(delta).ok_or_else(|| {
        Error::BiasOutOfRange(format_rational(delta), "squares of rationals")
    })?;
    let p = common_coin_source(2, &e_bias)?;
    let sv_param = p.sv_parameter();
    let xor = p.pushforward_xor(&"11".parse().expect("literal"))?;
    let tv_xor = xor.tv_distance(&NoiseDistribution::uniform(1))?;
    let implied = exact_sqrt(&(&tv_xor / int(2))).expect("tv_xor / 2 = delta is a square");
    let sv_constant = if delta.is_zero() { int(0) } else { &sv_param / delta };
    Ok(CounterexampleReport {
        tv_xor_is_two_delta: tv_xor == int(2) * delta,
        delta: delta.clone(),
        e_bias,
        sv_param,
        tv_xor,
        implied_min_product_bias: implied,
        sv_constant,
    })
}
