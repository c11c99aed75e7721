use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use batchlpn::entlpn::{EntLpn, ReductionConfig};
use batchlpn::linearize::{apply_a_transpose, build_mu_star};
use batchlpn::lpn::{sample_lpn, Batch, BatchSampler, LpnSample, SecretKey};
use batchlpn::rational::{format_rational, to_f64};
use batchlpn::verify::{
    check_lemma2, check_reduction_exact, check_reduction_statistical, counterexample_report,
    sha256_hex, statistical_report, BatchHistogram, InstanceDescriptor, VerificationReport,
};
use batchlpn::{BitVector, RandomStream};

use crate::files::{
    json_lines, parse_delta, read_p, read_q, read_sk, write_atomic, AtomicOutput, CliError, Result,
};
use crate::manifest::{digest_file, digest_report, FileDigest, RunManifest};
use crate::{
    Command, KeygenArgs, MuStarArgs, ReduceArgs, ReplayArgs, SampleArgs, SampleMode, VerifyArgs,
    VerifyMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Pass => ExitCode::SUCCESS,
            Status::Fail => ExitCode::from(1),
        }
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(crate::files::io_err(path))
}

fn absolute_opt(path: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    path.as_deref().map(absolute).transpose()
}

/// Rewrites every path argument as an absolute path so the recorded
/// invocation replays from any directory.
fn resolve_paths(command: Command) -> Result<Command> {
    Ok(match command {
        Command::Keygen(a) => Command::Keygen(KeygenArgs {
            out: absolute(&a.out)?,
            ..a
        }),
        Command::Sample(a) => Command::Sample(SampleArgs {
            p: absolute_opt(&a.p)?,
            sk: absolute(&a.sk)?,
            out: absolute(&a.out)?,
            ..a
        }),
        Command::Reduce(a) => Command::Reduce(ReduceArgs {
            p: absolute(&a.p)?,
            input: absolute(&a.input)?,
            out: absolute(&a.out)?,
            ..a
        }),
        Command::MuStar(a) => Command::MuStar(MuStarArgs {
            q: absolute(&a.q)?,
            out: absolute(&a.out)?,
        }),
        Command::Verify(a) => Command::Verify(VerifyArgs {
            p: absolute_opt(&a.p)?,
            sk: absolute_opt(&a.sk)?,
            input: absolute_opt(&a.input)?,
            out: absolute_opt(&a.out)?,
            ..a
        }),
        Command::Replay(a) => Command::Replay(a),
    })
}

pub fn run(command: Command) -> Result<Status> {
    match resolve_paths(command)? {
        Command::Keygen(a) => keygen(a),
        Command::Sample(a) => sample(a),
        Command::Reduce(a) => reduce(a),
        Command::MuStar(a) => mu_star(a),
        Command::Verify(a) => verify(a),
        Command::Replay(a) => replay(a),
    }
}

fn finish(
    name: &str,
    invocation: Command,
    seed: Option<u64>,
    inputs: &[&Path],
    output: FileDigest,
) -> Result<()> {
    let out = output.path.clone();
    RunManifest {
        command: name.into(),
        invocation,
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        inputs: inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?,
        outputs: vec![output],
    }
    .write(&out)?;
    Ok(())
}

fn keygen(a: KeygenArgs) -> Result<Status> {
    let sk = SecretKey::random(a.n, &mut RandomStream::new(a.seed));
    write_atomic(&a.out, &sk.to_json())?;
    finish("keygen", Command::Keygen(a.clone()), Some(a.seed), &[], digest_file(&a.out)?)?;
    Ok(Status::Pass)
}

fn check_n(given: Option<usize>, sk: &SecretKey) -> Result<usize> {
    match given {
        Some(n) if n != sk.n() => Err(CliError::Usage(format!(
            "--n {n} does not match the secret key length {}",
            sk.n()
        ))),
        _ => Ok(sk.n()),
    }
}

fn sample(mut a: SampleArgs) -> Result<Status> {
    let sk = read_sk(&a.sk)?;
    let n = check_n(a.n, &sk)?;
    a.n = Some(n);
    let mut rng = RandomStream::new(a.seed);
    let mut out;
    match a.mode {
        SampleMode::Standard => {
            if a.p.is_some() || a.k.is_some() {
                return Err(CliError::Usage("--p and --k apply to batch mode only".into()));
            }
            let delta = a
                .delta
                .as_deref()
                .ok_or_else(|| CliError::Usage("standard mode requires --delta".into()))?;
            let delta = to_f64(&parse_delta(delta)?);
            // Validate the level before any output exists.
            sample_lpn(n, delta, &sk, &mut RandomStream::new(0))?;
            out = AtomicOutput::create(&a.out)?;
            for _ in 0..a.count {
                let s = sample_lpn(n, delta, &sk, &mut rng)?;
                out.write_line(&serde_json::to_string(&s).expect("sample serializes"))?;
            }
        }
        SampleMode::Batch => {
            if a.delta.is_some() {
                return Err(CliError::Usage("--delta applies to standard mode only".into()));
            }
            let p_path = a
                .p
                .as_deref()
                .ok_or_else(|| CliError::Usage("batch mode requires --p".into()))?;
            let p = read_p(p_path)?;
            if a.k.is_some_and(|k| k != p.k()) {
                return Err(CliError::Usage(format!("--k does not match the arity {} of --p", p.k())));
            }
            a.k = Some(p.k());
            let sampler = BatchSampler::new(n, &p);
            out = AtomicOutput::create(&a.out)?;
            for _ in 0..a.count {
                out.write_line(&sampler.sample(&sk, &mut rng)?.to_json_line())?;
            }
        }
    }
    out.commit()?;
    let mut inputs = vec![a.sk.as_path()];
    inputs.extend(a.p.as_deref());
    finish("sample", Command::Sample(a.clone()), Some(a.seed), &inputs, digest_file(&a.out)?)?;
    Ok(Status::Pass)
}

fn reduce(a: ReduceArgs) -> Result<Status> {
    let p = read_p(&a.p)?;
    let delta = parse_delta(&a.delta)?;
    let k = p.k();
    let mut plan: Option<EntLpn> = None;
    let mut rng = RandomStream::new(a.seed);
    let mut block: Vec<LpnSample> = Vec::with_capacity(k);
    let mut consumed = 0u64;
    let mut out = AtomicOutput::create(&a.out)?;
    for line in json_lines(&a.input)? {
        let (no, text) = line?;
        let sample: LpnSample = serde_json::from_str(&text).map_err(|e| CliError::Line {
            path: a.input.clone(),
            line: no,
            message: e.to_string(),
        })?;
        if plan.is_none() {
            let config = ReductionConfig::new(sample.u.len(), p.clone(), delta.clone())?;
            plan = Some(EntLpn::new(config)?);
        }
        let plan = plan.as_ref().expect("initialized above");
        if sample.u.len() != plan.config().n() {
            return Err(CliError::Line {
                path: a.input.clone(),
                line: no,
                message: format!("sample dimension {} differs from {}", sample.u.len(), plan.config().n()),
            });
        }
        block.push(sample);
        consumed += 1;
        if block.len() == k {
            let batch = Batch::new(plan.config().n(), std::mem::take(&mut block))?;
            out.write_line(&plan.reduce(&batch, &mut rng)?.to_json_line())?;
        }
    }
    if !block.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: {consumed} input samples is not a multiple of k = {k}",
            a.input.display()
        )));
    }
    if plan.is_none() {
        // No samples: still validate p against delta.
        let config = ReductionConfig::new(1, p.clone(), delta.clone())?;
        EntLpn::new(config)?;
    }
    out.commit()?;
    finish("reduce", Command::Reduce(a.clone()), Some(a.seed), &[&a.p, &a.input], digest_file(&a.out)?)?;
    Ok(Status::Pass)
}

fn mu_star(a: MuStarArgs) -> Result<Status> {
    let q = read_q(&a.q)?;
    let mu = build_mu_star(&q)?;
    let exact = apply_a_transpose(&mu) == q.table();
    write_atomic(&a.out, &serde_json::to_string_pretty(&mu.to_file()).expect("table serializes"))?;
    finish("mu-star", Command::MuStar(a.clone()), None, &[&a.q], digest_file(&a.out)?)?;
    if exact {
        println!("A^T mu = q: exact");
        Ok(Status::Pass)
    } else {
        println!("A^T mu = q: MISMATCH");
        Ok(Status::Fail)
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, mode: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{mode} mode requires {flag}")))
}

fn emit_report(a: &VerifyArgs, json: String, pass: bool, inputs: &[&Path]) -> Result<Status> {
    match &a.out {
        Some(out) => {
            write_atomic(out, &json)?;
            let seed = matches!(a.mode, VerifyMode::Statistical).then_some(a.seed);
            finish("verify", Command::Verify(a.clone()), seed, inputs, digest_report(out)?)?;
        }
        None => println!("{json}"),
    }
    eprintln!("{}", if pass { "pass" } else { "FAIL" });
    Ok(if pass { Status::Pass } else { Status::Fail })
}

fn verify(mut a: VerifyArgs) -> Result<Status> {
    match a.mode {
        VerifyMode::Exact => {
            let p_path = require(&a.p, "--p", "exact")?.clone();
            let p = read_p(&p_path)?;
            let delta = parse_delta(require(&a.delta, "--delta", "exact")?)?;
            let keys = match &a.sk {
                Some(path) => {
                    let sk = read_sk(path)?;
                    a.n = Some(check_n(a.n, &sk)?);
                    vec![sk]
                }
                None => {
                    let n = *require(&a.n, "--n or --sk", "exact")?;
                    if n > 16 {
                        return Err(CliError::Usage(format!("--n {n} is too large to enumerate keys")));
                    }
                    (0..1u64 << n).map(|s| SecretKey::new(BitVector::decode(s, n))).collect()
                }
            };
            let n = a.n.expect("resolved above");
            let reports = keys
                .iter()
                .map(|sk| check_reduction_exact(n, &p, &delta, sk))
                .collect::<std::result::Result<Vec<VerificationReport>, _>>()?;
            let pass = reports.iter().all(|r| r.pass);
            let json = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])
            } else {
                serde_json::to_string_pretty(&reports)
            }
            .expect("report serializes");
            let mut inputs = vec![p_path.as_path()];
            let sk_path = a.sk.clone();
            inputs.extend(sk_path.as_deref());
            emit_report(&a, json, pass, &inputs)
        }
        VerifyMode::Statistical => {
            let p_path = require(&a.p, "--p", "statistical")?.clone();
            let sk_path = require(&a.sk, "--sk", "statistical")?.clone();
            let p = read_p(&p_path)?;
            let sk = read_sk(&sk_path)?;
            let n = check_n(a.n, &sk)?;
            a.n = Some(n);
            let delta = parse_delta(require(&a.delta, "--delta", "statistical")?)?;
            let report = match &a.input {
                None => {
                    let count = *require(&a.count, "--count or --in", "statistical")?;
                    let mut rng = RandomStream::new(a.seed);
                    check_reduction_statistical(n, &p, &delta, &sk, count, a.significance, &mut rng)?
                }
                Some(input) => statistical_from_file(input, n, &p, &delta, &sk, a.significance)?,
            };
            let json = report.to_json();
            let mut inputs = vec![p_path.as_path(), sk_path.as_path()];
            let in_path = a.input.clone();
            inputs.extend(in_path.as_deref());
            emit_report(&a, json, report.pass, &inputs)
        }
        VerifyMode::Lemma2 => {
            let k = *require(&a.k, "--k", "lemma2")?;
            let report = check_lemma2(k)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            emit_report(&a, json, report.pass, &[])
        }
        VerifyMode::Counterexample => {
            let delta = parse_delta(require(&a.delta, "--delta", "counterexample")?)?;
            let report = counterexample_report(&delta)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            emit_report(&a, json, report.tv_xor_is_two_delta, &[])
        }
    }
}

fn statistical_from_file(
    input: &Path,
    n: usize,
    p: &batchlpn::dist::NoiseDistribution,
    delta: &batchlpn::Rational,
    sk: &SecretKey,
    significance: f64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let config = ReductionConfig::new(n, p.clone(), delta.clone())?;
    let batches: Vec<Batch> = json_lines(input)?
        .map(|line| {
            let (no, text) = line?;
            Batch::from_json_line(&text).map_err(|e| CliError::Line {
                path: input.to_path_buf(),
                line: no,
                message: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let mut hist = BatchHistogram::new(n, p.k(), batches.len() as u64);
    for b in &batches {
        hist.add(b, sk)?;
    }
    let instance = InstanceDescriptor {
        n,
        k: p.k(),
        delta: format_rational(config.delta()),
        p_digest: sha256_hex(p.to_json().as_bytes()),
        sk: Some(sk.bits().to_string()),
        seed: None,
        input_bias: None,
    };
    Ok(statistical_report(instance, &hist, &p.to_float(), significance, start)?)
}

fn replay(a: ReplayArgs) -> Result<Status> {
    let manifest = RunManifest::read(&a.manifest)?;
    for recorded in &manifest.inputs {
        let now = digest_file(&recorded.path)?;
        if now.sha256 != recorded.sha256 {
            return Err(CliError::Usage(format!(
                "input {} changed since the run was recorded",
                recorded.path.display()
            )));
        }
    }
    let recorded = manifest
        .outputs
        .first()
        .ok_or_else(|| CliError::Usage("manifest lists no outputs".into()))?;
    let dir = tempfile::tempdir().map_err(crate::files::io_err(&a.manifest))?;
    let target = match &a.out {
        Some(out) => out.clone(),
        None => dir.path().join("replay.out"),
    };
    let invocation = match manifest.invocation.clone() {
        Command::Keygen(x) => Command::Keygen(KeygenArgs { out: target.clone(), ..x }),
        Command::Sample(x) => Command::Sample(SampleArgs { out: target.clone(), ..x }),
        Command::Reduce(x) => Command::Reduce(ReduceArgs { out: target.clone(), ..x }),
        Command::MuStar(x) => Command::MuStar(MuStarArgs { out: target.clone(), ..x }),
        Command::Verify(x) => Command::Verify(VerifyArgs {
            out: Some(target.clone()),
            ..x
        }),
        Command::Replay(_) => return Err(CliError::Usage("cannot replay a replay".into())),
    };
    run(invocation)?;
    let fresh = if recorded.excludes.is_empty() {
        digest_file(&target)?
    } else {
        digest_report(&target)?
    };
    if fresh.sha256 == recorded.sha256 {
        println!("reproduced {} ({})", recorded.path.display(), fresh.sha256);
        Ok(Status::Pass)
    } else {
        println!("digest mismatch: recorded {}, replayed {}", recorded.sha256, fresh.sha256);
        Ok(Status::Fail)
    }
}
