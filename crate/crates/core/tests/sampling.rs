use batchlpn::dist::{random_sv_source, NoiseDistribution};
use batchlpn::entlpn::{compute_p_i, EntLpn, ReductionConfig};
use batchlpn::linearize::{build_mu_star, sample_affine_coeffs, AffineCoeffDistribution, BiasFunction};
use batchlpn::lpn::{residuals, sample_batch_lpn, sample_lpn, Batch, SecretKey};
use batchlpn::rational::{pow2, ratio, to_f64, Rational};
use batchlpn::stats::chi_square_test;
use batchlpn::verify::BatchHistogram;
use batchlpn::RandomStream;

const ALPHA: f64 = 1e-4;

#[test]
fn standard_lpn_residuals_and_u_marginal() {
    let mut rng = RandomStream::new(101);
    let n = 8;
    let sk = SecretKey::random(n, &mut rng);
    let delta = 0.125;
    let mut residual = [0u64; 2];
    let mut u_counts = vec![0u64; 1 << n];
    for _ in 0..1_000_000 {
        let s = sample_lpn(n, delta, &sk, &mut rng).unwrap();
        residual[s.residual(&sk).unwrap() as usize] += 1;
        u_counts[s.u.encode() as usize] += 1;
    }
    let r = chi_square_test(&residual, &[0.5 + delta, 0.5 - delta]).unwrap();
    assert!(r.p_value > ALPHA, "{r:?}");
    let uniform = vec![1.0 / 256.0; 256];
    let u = chi_square_test(&u_counts, &uniform).unwrap();
    assert!(u.p_value > ALPHA, "{u:?}");
}

#[test]
fn batch_lpn_residual_law_matches_p() {
    let mut rng = RandomStream::new(102);
    let p = random_sv_source(3, &pow2(-3), 4, &mut rng);
    let sk = SecretKey::random(12, &mut rng);
    let mut hist = BatchHistogram::new(12, 3, 200_000);
    for _ in 0..200_000 {
        hist.add(&sample_batch_lpn(12, &p, &sk, &mut rng).unwrap(), &sk).unwrap();
    }
    for t in hist.fit(&p.to_float()).unwrap() {
        assert!(t.result.p_value > ALPHA, "{t:?}");
    }
}

#[test]
fn batch_of_one_matches_standard_lpn() {
    let mut rng = RandomStream::new(103);
    let n = 5;
    let sk = SecretKey::random(n, &mut rng);
    let p = NoiseDistribution::bernoulli(ratio(3, 8)).unwrap();
    let cells = 2 << n;
    let mut batch_counts = vec![0u64; cells];
    let mut std_counts = vec![0u64; cells];
    for _ in 0..200_000 {
        let b = sample_batch_lpn(n, &p, &sk, &mut rng).unwrap();
        let s = &b.samples()[0];
        batch_counts[(s.u.encode() as usize) << 1 | s.y as usize] += 1;
        let s = sample_lpn(n, 0.125, &sk, &mut rng).unwrap();
        std_counts[(s.u.encode() as usize) << 1 | s.y as usize] += 1;
    }
    // Both are LPN_{5, 1/8}(sk): y = <u, sk> xor Ber(3/8).
    let probs: Vec<f64> = (0..cells)
        .map(|c| {
            let u = batchlpn::BitVector::decode((c >> 1) as u64, n);
            let clean = u.inner_product(sk.bits()).unwrap() as usize;
            let noisy = (c & 1) ^ clean;
            (if noisy == 1 { 0.375 } else { 0.625 }) / 32.0
        })
        .collect();
    for counts in [&batch_counts, &std_counts] {
        let r = chi_square_test(counts, &probs).unwrap();
        assert!(r.p_value > ALPHA, "{r:?}");
    }
}

#[test]
fn affine_coeffs_under_uniform_mu() {
    let mut rng = RandomStream::new(104);
    for k in 1..=4 {
        let mu = AffineCoeffDistribution::<Rational>::base(k, &ratio(1, 2));
        let mut counts = vec![0u64; 2 << k];
        for _ in 0..100_000 {
            counts[sample_affine_coeffs(&mu, &mut rng).encode() as usize] += 1;
        }
        let probs = vec![1.0 / (2 << k) as f64; 2 << k];
        let r = chi_square_test(&counts, &probs).unwrap();
        assert!(r.p_value > ALPHA, "k={k}: {r:?}");
    }
}

#[test]
fn affine_coeffs_realize_mu_star() {
    let mut rng = RandomStream::new(105);
    let k = 2;
    let bound = BiasFunction::<Rational>::bound(k);
    let q = BiasFunction::new(k, vec![ratio(1, 2) + &bound, ratio(1, 2) - &bound, ratio(1, 2), ratio(1, 2) + &bound * ratio(1, 3)])
        .unwrap();
    let mu = build_mu_star(&q).unwrap();
    let draws = 1_000_000u64;
    let mut counts = vec![0u64; 2 << k];
    let mut f_of_z = vec![0u64; 1 << k];
    for _ in 0..draws {
        let f = sample_affine_coeffs(&mu, &mut rng);
        counts[f.encode() as usize] += 1;
        for (z, c) in f_of_z.iter_mut().enumerate() {
            let zf = batchlpn::linearize::affine_eval(f.encode() as usize, z);
            *c += zf as u64;
        }
    }
    let probs: Vec<f64> = mu.table().iter().map(to_f64).collect();
    let r = chi_square_test(&counts, &probs).unwrap();
    assert!(r.p_value > ALPHA, "{r:?}");
    for (z, &c) in f_of_z.iter().enumerate() {
        let qz = to_f64(&q.table()[z]);
        let sd = (qz * (1.0 - qz) / draws as f64).sqrt();
        assert!((c as f64 / draws as f64 - qz).abs() < 3.0 * sd + 1e-12, "z={z}");
    }
}

#[test]
fn reduction_output_is_batch_lpn_at_moderate_n() {
    let mut rng = RandomStream::new(106);
    let (n, k) = (10, 2);
    let delta = pow2(-6);
    let p = random_sv_source(k, &delta, 4, &mut rng);
    let sk = SecretKey::random(n, &mut rng);
    let config = ReductionConfig::new(n, p.clone(), delta).unwrap();
    let bias = to_f64(&config.input_bias());
    let plan = EntLpn::new(config).unwrap();
    let batches = 300_000;
    let mut hist = BatchHistogram::new(n, k, batches);
    for _ in 0..batches {
        let input: Vec<_> = (0..k).map(|_| sample_lpn(n, bias, &sk, &mut rng).unwrap()).collect();
        let out = plan.reduce(&Batch::new(n, input).unwrap(), &mut rng).unwrap();
        assert_eq!(residuals(&out, &sk).unwrap().len(), k);
        hist.add(&out, &sk).unwrap();
    }
    for t in hist.fit(&p.to_float()).unwrap() {
        assert!(t.result.p_value > ALPHA, "{t:?}");
    }
}

#[test]
fn second_step_bias_function_stays_in_range() {
    let mut rng = RandomStream::new(107);
    for k in 2..=5 {
        let delta = pow2(-(k as i32) - 4);
        let p = random_sv_source(k, &delta, 6, &mut rng);
        for i in 2..=k {
            let pi = compute_p_i(&p, i, &delta).unwrap();
            assert!(pi.deviation() <= BiasFunction::<Rational>::bound(i - 1));
        }
    }
}
