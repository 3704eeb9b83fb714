//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the per-criterion lines appear in
//! order. Exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::*;
use qcorr_cli::commands::{analyze_mixed, analyze_pure, report_json};
use qcorr_cli::{Common, MixedArgs, PureArgs};
use qcorr_core::complexity::{
    comm_corr_consistency, extract_factors, marginal_complexity_eps, qcomm_pure_bounds, qcorr_pure, qcorr_pure_report,
    verify_general_characterization, CutoffRule,
};
use qcorr_core::psd_rank::{fit, psd_rank_lower, psd_rank_upper, FitOptions, PsdFactorization};
use qcorr_core::spectral::{apply_right, approx_schmidt_rank, connecting_unitary, marginal_ranks, uhlmann_partner};
use qcorr_core::states::{embed_classical, fidelity};
use qcorr_core::synthesis::{purification_from_psd, truncate_pure};
use qcorr_core::{sample, ClassicalDistribution, CMatrix, PartySplit, PureState, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RNG_SEED: u64 = 0;

/// Outcome of one criterion: pass/fail, a one-line detail, and a
/// deterministic serialization of everything it computed.
struct Check {
    pass: bool,
    detail: String,
    artifact: String,
}

fn pure_args(input: PathBuf) -> PureArgs {
    PureArgs { input, common: Common { eps: None, out: None }, brute_cover: false }
}

fn c1_ghz(dir: &Path) -> Check {
    let input = write_pure(dir, "ghz.json", &ghz3());
    let o = analyze_pure(&pure_args(input)).unwrap();
    let r = &o.report;
    let got = (r.m, r.qcorr.exact, r.qcomm.lower_int(), r.qcomm.upper_int());
    Check {
        pass: got == (3, Some(3), 2, 2),
        detail: format!("m = {}, qcorr = {:?}, qcomm in [{}, {}] (want 3, 3, [2, 2])", got.0, got.1, got.2, got.3),
        artifact: report_json(&o),
    }
}

fn c2_epr(dir: &Path) -> Check {
    let input = write_pure(dir, "epr.json", &epr());
    let o = analyze_pure(&pure_args(input)).unwrap();
    let r = &o.report;
    let got = (r.m, r.qcomm.lower_int(), r.qcomm.upper_int());
    Check {
        pass: got == (2, 1, 1),
        detail: format!("m = {}, qcomm in [{}, {}] (want 2, [1, 1])", got.0, got.1, got.2),
        artifact: report_json(&o),
    }
}

fn c3_ghz_w(dir: &Path) -> Check {
    let rho = write_density(dir, "rho0.json", &rho0());
    let cand = write_purification(dir, "psi0.json", &psi0());
    let o = analyze_mixed(&MixedArgs { input: rho, candidates: vec![cand], common: Common { eps: None, out: None } }).unwrap();
    let ranks = marginal_ranks(&psi0().grouped().unwrap());
    let (qu, ru) = (o.report.qcorr.upper_int(), o.report.r.upper_int());
    let parts = [qu == 3, ru == 4, ranks == [2, 2, 4]];
    Check {
        pass: parts.iter().all(|&b| b),
        detail: format!(
            "qcorr upper {qu} [{}], r upper {ru} [{}], marginal_ranks(psi0) = {ranks:?} vs [2, 2, 4] [{}]",
            ok(parts[0]),
            ok(parts[1]),
            ok(parts[2])
        ),
        artifact: format!("{}{ranks:?}", report_json(&o)),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISMATCH"
    }
}

/// The random pure states of the sandwich suite.
fn sandwich_states() -> Vec<PureState> {
    let shapes: [&[usize]; 3] = [&[2, 2], &[2, 2, 2], &[3, 2, 2]];
    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED);
    (0..200).map(|i| sample::random_pure(shapes[i % 3], &mut rng)).collect()
}

fn c4_sandwich() -> Check {
    let mut violations = Vec::new();
    let mut artifact = String::new();
    let mut worst_gap = f64::INFINITY;
    for (i, psi) in sandwich_states().iter().enumerate() {
        let k = psi.parties() as f64;
        for eps in [0.05, 0.1, 0.3] {
            let lo = marginal_complexity_eps(psi, eps).unwrap();
            let hi = marginal_complexity_eps(psi, eps / k).unwrap();
            let t = truncate_pure(psi, eps).unwrap();
            let q = qcorr_pure(&t.state);
            worst_gap = worst_gap.min(t.fidelity - (1.0 - eps));
            if lo > hi {
                violations.push(format!("#{i} eps={eps}: m_eps {lo} > m_eps/k {hi}"));
            }
            if t.fidelity < 1.0 - eps || t.fidelity < (1.0 - eps).sqrt() - 1e-9 {
                violations.push(format!("#{i} eps={eps}: fidelity {}", t.fidelity));
            }
            if q > hi {
                violations.push(format!("#{i} eps={eps}: qcorr(truncation) {q} > {hi}"));
            }
            artifact += &format!("{i} {eps} {lo} {hi} {q} {:e}\n", t.fidelity);
        }
    }
    Check {
        pass: violations.is_empty(),
        detail: format!("600 (state, eps) cases, {} violations; min F - (1 - eps) = {worst_gap:.4}{}", violations.len(), first(&violations)),
        artifact,
    }
}

fn first(v: &[String]) -> String {
    v.first().map(|s| format!("; first: {s}")).unwrap_or_default()
}

fn random_factorization(r: usize, rng: &mut ChaCha8Rng) -> PsdFactorization {
    let mut factors: Vec<Vec<CMatrix>> = (0..3)
        .map(|_| {
            (0..2)
                .map(|_| {
                    let g = sample::ginibre(r, r, rng);
                    &g * g.adjoint()
                })
                .collect()
        })
        .collect();
    let mass: f64 = PsdFactorization::new(factors.clone()).unwrap().evaluate().iter().sum();
    factors[0].iter_mut().for_each(|m| *m /= C64::new(mass, 0.0));
    PsdFactorization::new(factors).unwrap()
}

fn c5_psd_roundtrip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED);
    let mut worst: f64 = 0.0;
    let mut artifact = String::new();
    for _ in 0..50 {
        let f = random_factorization(2, &mut rng);
        let p = ClassicalDistribution::normalized(f.dims(), f.evaluate()).unwrap();
        let pur = purification_from_psd(&f).unwrap();
        let check = pur.check(&embed_classical(&p)).unwrap();
        worst = worst.max(check.residual);
        artifact += &format!("{:e}\n", check.residual);
    }
    Check { pass: worst <= 1e-8, detail: format!("50 factorizations, max trace residual {worst:.2e} (want <= 1e-8)"), artifact }
}

fn c6_psd_rank() -> Check {
    let opts = FitOptions { seed: RNG_SEED, ..FitOptions::default() };
    let bits = correlated_bits();
    let (lo, up) = (psd_rank_lower(&bits), psd_rank_upper(&bits, &opts).unwrap().rank);
    let r2 = fit(&bits, 2, &opts).unwrap().residual;
    let r1 = fit(&bits, 1, &opts).unwrap().residual;
    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED);
    let mut product_ok = true;
    let mut artifact = format!("{lo} {up} {r2:e} {r1:e}\n");
    for dims in [vec![2, 2], vec![3, 2], vec![2, 2, 2]] {
        let margins: Vec<Vec<f64>> = dims.iter().map(|&d| (0..d).map(|_| rng.random_range(0.1..1.0)).collect()).collect();
        let n: usize = dims.iter().product();
        let probs = (0..n)
            .map(|f| qcorr_core::tensor::unravel(f, &dims).iter().zip(&margins).map(|(&i, m)| m[i] / m.iter().sum::<f64>()).product())
            .collect();
        let p = ClassicalDistribution::normalized(dims, probs).unwrap();
        let (l, u) = (psd_rank_lower(&p), psd_rank_upper(&p, &opts).unwrap().rank);
        product_ok &= l == 1 && u == 1;
        artifact += &format!("{l} {u}\n");
    }
    let pass = lo == 2 && up == 2 && r2 < 1e-6 && r1 > 0.1 && product_ok;
    Check {
        pass,
        detail: format!(
            "bits: lower {lo}, upper {up}, residual r=2 {r2:.1e}, r=1 {r1:.3}; products rank 1: {product_ok}"
        ),
        artifact,
    }
}

fn c7_characterization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED);
    let split = PartySplit::new(&[0, 1], 4).unwrap();
    let (mut worst, mut mismatches) = (0.0f64, 0);
    let mut artifact = String::new();
    for i in 0..100 {
        let eps = [0.05, 0.1, 0.3][i % 3];
        let sigma = sample::random_density(&[2, 2], 1 + i % 4, &mut rng);
        let pur = sample::random_purification(&sigma, 4, &mut rng);
        let psi = PureState::new(vec![1, 2, 2, 4], pur.amplitudes().to_vec()).unwrap();
        let (a, b) = extract_factors(&psi).unwrap();
        let chk = verify_general_characterization(&sigma, &a, &b, eps, CutoffRule::Squared).unwrap();
        let expected = approx_schmidt_rank(&psi, &split, eps).unwrap();
        worst = worst.max(chk.reconstruction_residual).max(chk.orthogonality_residual);
        if !chk.holds || chk.r != expected {
            mismatches += 1;
        }
        artifact += &format!("{} {} {expected}\n", chk.holds, chk.r);
    }
    Check {
        pass: worst <= 1e-8 && mismatches == 0,
        detail: format!("100 purifications, max residual {worst:.2e}, {mismatches} failures of holds / r = approx Schmidt rank"),
        artifact,
    }
}

fn c8_uhlmann() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED);
    let split = PartySplit::single(0, 2).unwrap();
    let (mut overlap_dev, mut recon_dev) = (0.0f64, 0.0f64);
    let mut artifact = String::new();
    for _ in 0..100 {
        let rho = sample::random_density(&[2], 2, &mut rng);
        let sigma = sample::random_density(&[2], 2, &mut rng);
        let psi = sample::random_purification(&rho, 2, &mut rng);
        let phi = uhlmann_partner(&psi, &rho, &sigma, &split).unwrap();
        let overlap = phi.inner(&psi).unwrap().norm();
        let f = fidelity(&rho, &sigma).unwrap();
        overlap_dev = overlap_dev.max((overlap - f).abs());

        let a = sample::random_pure(&[2, 2], &mut rng);
        let b = a.apply_local(1, &sample::random_unitary(2, &mut rng)).unwrap();
        let u = connecting_unitary(&a, &b, &split).unwrap();
        let back = apply_right(&a, &split, &u).unwrap();
        let dev = back.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        recon_dev = recon_dev.max(dev);
        artifact += &format!("{overlap:e} {f:e} {dev:e}\n");
    }
    Check {
        pass: overlap_dev <= 1e-8 && recon_dev <= 1e-8,
        detail: format!("100 instances, max |overlap - F| {overlap_dev:.2e}, max reconstruction error {recon_dev:.2e}"),
        artifact,
    }
}

fn c9_consistency() -> Check {
    let mut failures = 0;
    let mut artifact = String::new();
    for psi in sandwich_states() {
        let (q, c) = (qcorr_pure_report(&psi), qcomm_pure_bounds(&psi));
        let okay = comm_corr_consistency(&q, &c, psi.parties());
        failures += usize::from(!okay);
        artifact += &format!("{:?} {} {} {okay}\n", q.exact, c.lower, c.upper);
    }
    Check { pass: failures == 0, detail: format!("200 report pairs, {failures} inconsistent"), artifact }
}

type Criterion = fn(&Path) -> Check;

const CRITERIA: [(&str, Criterion); 9] = [
    ("GHZ3: m = 3, qcorr = 3, qcomm = [2, 2]", c1_ghz),
    ("EPR: m = 2, qcomm = [1, 1]", c2_epr),
    ("GHZ/W mixture with candidate purification", c3_ghz_w),
    ("sandwich suite on 200 random pure states", |_| c4_sandwich()),
    ("PSD factorization purification roundtrip", |_| c5_psd_roundtrip()),
    ("PSD-rank sanity (correlated bits, products)", |_| c6_psd_rank()),
    ("general characterization roundtrip", |_| c7_characterization()),
    ("Uhlmann partner and connecting unitary", |_| c8_uhlmann()),
    ("qcorr/qcomm consistency over the random suite", |_| c9_consistency()),
];

fn guarded(f: impl FnOnce() -> Check) -> Check {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
        Check { pass: false, detail: format!("panicked: {msg}"), artifact: String::new() }
    })
}

fn cli(dir: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_qcorr")).current_dir(dir).args(args).output().unwrap().status.code().unwrap_or(-1)
}

/// Re-runs every criterion and the CLI commands in two fresh directories and
/// compares all outputs byte for byte.
fn c10_determinism(first: &[String], dir: &Path) -> Check {
    let mut differing = Vec::new();
    for (i, (_, f)) in CRITERIA.iter().enumerate() {
        let again = guarded(|| f(dir));
        if again.artifact != first[i] {
            differing.push(format!("criterion {}", i + 1));
        }
    }
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for run in &runs {
        let d = run.path();
        write_pure(d, "ghz.json", &ghz3());
        write_dist(d, "bits.json", &correlated_bits());
        write_density(d, "rho0.json", &rho0());
        write_purification(d, "psi0.json", &psi0());
        let seed = RNG_SEED.to_string();
        cli(d, &["analyze-pure", "ghz.json", "--eps", "0.1", "--brute-cover", "--out", "pure.json"]);
        cli(d, &["analyze-dist", "bits.json", "--eps", "0.1", "--seed", &seed, "--out", "dist.json"]);
        cli(d, &["analyze-mixed", "rho0.json", "--candidate", "psi0.json", "--out", "mixed.json"]);
        cli(d, &["verify", "pure.preparer.json", "--out", "verify.json"]);
    }
    let mut names: Vec<_> = std::fs::read_dir(runs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in &names {
        let a = std::fs::read(runs[0].path().join(n)).unwrap();
        let b = std::fs::read(runs[1].path().join(n)).ok();
        if b.as_deref() != Some(&a[..]) {
            differing.push(n.to_string_lossy().into_owned());
        }
    }
    Check {
        pass: differing.is_empty() && names.len() >= 12,
        detail: format!("criteria 1-9 re-run and {} CLI files compared; differing: {differing:?}", names.len()),
        artifact: String::new(),
    }
}

fn main() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    let mut artifacts = Vec::new();
    for (i, (name, f)) in CRITERIA.iter().enumerate() {
        let t = Instant::now();
        let c = guarded(|| f(dir.path()));
        println!("{} criterion {:>2}: {name} — {} ({:.2}s)", if c.pass { "PASS" } else { "FAIL" }, i + 1, c.detail, t.elapsed().as_secs_f64());
        results.push(c.pass);
        artifacts.push(c.artifact);
    }
    let t = Instant::now();
    let c = guarded(|| c10_determinism(&artifacts, dir.path()));
    println!("{} criterion 10: byte-identical repeats — {} ({:.2}s)", if c.pass { "PASS" } else { "FAIL" }, c.detail, t.elapsed().as_secs_f64());
    results.push(c.pass);

    let elapsed = start.elapsed().as_secs_f64();
    let passed = results.iter().filter(|&&b| b).count();
    println!("acceptance: {passed}/{} criteria passed in {elapsed:.2}s (budget 60s)", results.len());
    if passed != results.len() || elapsed > 60.0 {
        std::process::exit(1);
    }
}
