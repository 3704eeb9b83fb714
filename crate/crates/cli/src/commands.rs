//! Command implementations. Each returns a typed report plus the witness
//! files it wants written; [`run`] does the I/O.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qcorr_core::complexity::{
    comm_corr_consistency, marginal_complexity, marginal_complexity_eps, qcomm_mixed_bounds, qcomm_pure_bounds,
    qcorr_classical_bounds, qcorr_eps_bipartite_pure, qcorr_eps_classical, qcorr_eps_pure_bounds, qcorr_eps_pure_mixed_relation,
    qcorr_mixed_bounds, qcorr_pure, qcorr_pure_report, min_product_cover, CoverMode,
};
use qcorr_core::io::{self, Document};
use qcorr_core::spectral::{marginal_ranks, support_decomposition};
use qcorr_core::synthesis::{
    canonical_seed, purification_from_psd, qcomm_upper_protocol, simulate_protocol, truncate_pure, GenerationProtocol,
};
use qcorr_core::{ComplexityReport, Error, PureState};
use serde::Serialize;

use crate::{exit, Cli, Command, DistArgs, MixedArgs, PureArgs, SynthArgs, VerifyArgs, Witness, VERSION};

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

const TOOL: Tool = Tool { name: "qcorr", version: VERSION };

/// A report with the files it references and the exit status it implies.
#[derive(Debug, Clone)]
pub struct Output<R> {
    pub report: R,
    pub witnesses: Vec<(PathBuf, String)>,
    pub summary: String,
    pub code: i32,
}

impl<R> Output<R> {
    fn new(report: R, summary: String) -> Self {
        Self { report, witnesses: Vec::new(), summary, code: exit::OK }
    }
}

fn witness_path(out: Option<&Path>, name: &str) -> Option<PathBuf> {
    let out = out?;
    let stem = out.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
    Some(out.with_file_name(format!("{stem}.{name}.json")))
}

/// Registers a witness file and returns the path to cite, if any.
fn attach(witnesses: &mut Vec<(PathBuf, String)>, out: Option<&Path>, name: &str, doc: Document) -> Option<String> {
    let path = witness_path(out, name)?;
    let cite = path.display().to_string();
    witnesses.push((path, io::to_json(&doc)));
    Some(cite)
}

fn cite(report: &mut ComplexityReport, path: &Option<String>) {
    if let Some(p) = path {
        report.witness = Some(p.clone());
    }
}

fn check_eps(eps: Option<f64>) -> Result<Option<f64>> {
    match eps {
        Some(e) if !(e > 0.0 && e < 1.0) => Err(Error::OutOfRange { name: "eps", value: e }.into()),
        e => Ok(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolSummary {
    pub size: u32,
    pub communication: u32,
    pub fidelity: f64,
    pub witness: Option<String>,
}

fn summarize(p: &GenerationProtocol, witness: Option<String>) -> Result<ProtocolSummary> {
    let sim = simulate_protocol(p)?;
    Ok(ProtocolSummary { size: sim.size, communication: sim.communication, fidelity: sim.fidelity, witness })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverSummary {
    pub mode: CoverMode,
    pub subsets: Vec<Vec<usize>>,
    pub product: usize,
    pub qubits: u32,
    pub retained_mass: f64,
    pub heuristic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationSummary {
    pub fidelity: f64,
    pub retained_mass: f64,
    pub kept_ranks: Vec<usize>,
    pub qcorr: u32,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxPure {
    pub eps: f64,
    pub m_eps: u32,
    pub m_eps_over_k: u32,
    pub qcorr_pure: ComplexityReport,
    /// Exact value for two parties, `⌈log₂ r⌉` of the approximate Schmidt rank.
    pub bipartite: Option<u32>,
    /// Mixed-output approximation; only defined for `eps < 1/k`.
    pub qcorr: Option<ComplexityReport>,
    pub truncation: TruncationSummary,
    pub cover: CoverSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct PureReport {
    pub tool: Tool,
    pub command: &'static str,
    pub config: PureArgs,
    pub dims: Vec<usize>,
    pub marginal_ranks: Vec<usize>,
    pub m: u32,
    pub qcorr: ComplexityReport,
    pub qcomm: ComplexityReport,
    pub consistent: bool,
    pub seed_protocol: ProtocolSummary,
    pub preparer_protocol: ProtocolSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx: Option<ApproxPure>,
}

pub fn analyze_pure(args: &PureArgs) -> Result<Output<PureReport>> {
    let eps = check_eps(args.common.eps)?;
    let psi = io::read_pure(&args.input)?;
    analyze_pure_state(&psi, args, eps)
}

pub fn analyze_pure_state(psi: &PureState, args: &PureArgs, eps: Option<f64>) -> Result<Output<PureReport>> {
    let out = args.common.out.as_deref();
    let k = psi.parties();
    let mut witnesses = Vec::new();

    let seed = canonical_seed(psi)?;
    let seed_path = attach(&mut witnesses, out, "seed", Document::Protocol(io::protocol_to_file(&seed)));
    let preparer = qcomm_upper_protocol(psi)?;
    let preparer_path = attach(&mut witnesses, out, "preparer", Document::Protocol(io::protocol_to_file(&preparer)));

    let mut qcorr = qcorr_pure_report(psi);
    cite(&mut qcorr, &seed_path);
    let mut qcomm = qcomm_pure_bounds(psi);
    cite(&mut qcomm, &preparer_path);
    let consistent = comm_corr_consistency(&qcorr, &qcomm, k);

    let approx = match eps {
        None => None,
        Some(eps) => {
            let (mut sandwich, trunc) = qcorr_eps_pure_bounds(psi, eps)?;
            let tpath = attach(&mut witnesses, out, "truncation", Document::Pure(io::pure_to_file(&trunc.state)));
            cite(&mut sandwich, &tpath);
            let relation = if eps * (k as f64) < 1.0 { Some(qcorr_eps_pure_mixed_relation(psi, eps)?) } else { None };
            let sd = support_decomposition(psi);
            let mode = if args.brute_cover { CoverMode::Brute } else { CoverMode::Greedy };
            let cover = min_product_cover(&sd.shape(), &sd.coefficients, eps, mode)?;
            Some(ApproxPure {
                eps,
                m_eps: marginal_complexity_eps(psi, eps)?,
                m_eps_over_k: marginal_complexity_eps(psi, eps / k as f64)?,
                qcorr_pure: sandwich,
                bipartite: if k == 2 { Some(qcorr_eps_bipartite_pure(psi, eps)?) } else { None },
                qcorr: relation,
                truncation: TruncationSummary {
                    fidelity: trunc.fidelity,
                    retained_mass: trunc.retained_mass,
                    kept_ranks: trunc.kept_ranks.clone(),
                    qcorr: qcorr_pure(&trunc.state),
                    witness: tpath,
                },
                cover: CoverSummary {
                    mode,
                    subsets: cover.subsets,
                    product: cover.product,
                    qubits: cover.qubits,
                    retained_mass: cover.retained_mass,
                    heuristic: cover.heuristic,
                },
            })
        }
    };

    let m = marginal_complexity(psi);
    let mut summary = format!(
        "m = {m}\nqcorr = {}\nqcomm in [{}, {}]\nconsistent = {consistent}\n",
        qcorr.exact.unwrap_or_default(),
        qcomm.lower,
        qcomm.upper
    );
    if let Some(a) = &approx {
        summary += &format!(
            "eps = {}: m_eps = {}, qcorr_pure_eps in [{}, {}], truncation fidelity {:.9}\n",
            a.eps, a.m_eps, a.qcorr_pure.lower, a.qcorr_pure.upper, a.truncation.fidelity
        );
    }
    let report = PureReport {
        tool: TOOL,
        command: "analyze-pure",
        config: args.clone(),
        dims: psi.dims().to_vec(),
        marginal_ranks: marginal_ranks(psi),
        m,
        qcorr,
        qcomm,
        consistent,
        seed_protocol: summarize(&seed, seed_path)?,
        preparer_protocol: summarize(&preparer, preparer_path)?,
        approx,
    };
    Ok(Output { witnesses, ..Output::new(report, summary) })
}

#[derive(Debug, Clone, Serialize)]
pub struct PsdRankSummary {
    pub lower: usize,
    pub upper: usize,
    pub residual: f64,
    pub exact_construction: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxDist {
    pub eps: f64,
    pub rank: usize,
    pub fidelity: f64,
    pub qcorr: ComplexityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistReport {
    pub tool: Tool,
    pub command: &'static str,
    pub config: DistArgs,
    pub dims: Vec<usize>,
    pub psd_rank: PsdRankSummary,
    pub qcorr: ComplexityReport,
    /// Purification realizing the factorization.
    pub purification: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx: Option<ApproxDist>,
}

pub fn analyze_dist(args: &DistArgs) -> Result<Output<DistReport>> {
    let eps = check_eps(args.common.eps)?;
    let out = args.common.out.as_deref();
    let p = io::read_dist(&args.input)?;
    let opts = args.fit.options();
    let mut witnesses = Vec::new();

    let b = qcorr_classical_bounds(&p, &opts)?;
    let fpath = attach(&mut witnesses, out, "factorization", Document::Factorization(io::factorization_to_file(&b.rank_upper.factorization)));
    let pur = purification_from_psd(&b.rank_upper.factorization)?;
    let ppath = attach(&mut witnesses, out, "purification", Document::Pure(io::purification_to_file(&pur)));
    let mut qcorr = b.report.clone();
    cite(&mut qcorr, &fpath);

    let approx = match eps {
        Some(eps) if p.parties() == 2 => {
            let (mut r, a) = qcorr_eps_classical(&p, eps, &opts)?;
            let apath = attach(&mut witnesses, out, "approx-factorization", Document::Factorization(io::factorization_to_file(&a.factorization)));
            cite(&mut r, &apath);
            Some(ApproxDist { eps, rank: a.rank, fidelity: a.fidelity, qcorr: r })
        }
        Some(_) => {
            qcorr.notes.push("approximate bounds are only computed for two parties".into());
            None
        }
        None => None,
    };

    let mut summary = format!(
        "PSD-rank in [{}, {}] (residual {:.3e})\nqcorr in [{}, {}]{}\n",
        b.rank_lower,
        b.rank_upper.rank,
        b.rank_upper.residual,
        qcorr.lower,
        qcorr.upper,
        if qcorr.heuristic { " (heuristic upper bound)" } else { "" }
    );
    if let Some(a) = &approx {
        summary += &format!("eps = {}: approximate PSD-rank <= {} (fidelity {:.9})\n", a.eps, a.rank, a.fidelity);
    }
    let report = DistReport {
        tool: TOOL,
        command: "analyze-dist",
        config: args.clone(),
        dims: p.dims().to_vec(),
        psd_rank: PsdRankSummary {
            lower: b.rank_lower,
            upper: b.rank_upper.rank,
            residual: b.rank_upper.residual,
            exact_construction: b.rank_upper.exact_construction,
            witness: fpath,
        },
        qcorr,
        purification: ppath,
        approx,
    };
    Ok(Output { witnesses, ..Output::new(report, summary) })
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateSummary {
    pub path: String,
    pub residual: f64,
    pub marginal_complexity: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixedReport {
    pub tool: Tool,
    pub command: &'static str,
    pub config: MixedArgs,
    pub dims: Vec<usize>,
    pub rank: usize,
    pub diagonal: bool,
    pub candidates: Vec<CandidateSummary>,
    pub qcorr: ComplexityReport,
    pub r: ComplexityReport,
    pub qcomm: ComplexityReport,
    pub consistent: bool,
    /// The purification behind the `r` upper bound.
    pub purification: Option<String>,
}

pub fn analyze_mixed(args: &MixedArgs) -> Result<Output<MixedReport>> {
    check_eps(args.common.eps)?;
    let out = args.common.out.as_deref();
    let rho = io::read_density(&args.input)?;
    let k = rho.parties();
    let candidates = args
        .candidates
        .iter()
        .map(|p| io::read_purification(p, k).with_context(|| format!("candidate {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::new();
    for (path, c) in args.candidates.iter().zip(&candidates) {
        let check = c.check(&rho)?;
        if !check.holds {
            return Err(anyhow::Error::new(Error::NotPurification { residual: check.residual })
                .context(format!("candidate {} does not purify the input (residual {:.3e})", path.display(), check.residual)));
        }
        summaries.push(CandidateSummary {
            path: path.display().to_string(),
            residual: check.residual,
            marginal_complexity: marginal_complexity(&c.grouped()?),
        });
    }

    let mut witnesses = Vec::new();
    let mixed = qcorr_mixed_bounds(&rho, &candidates)?;
    let comm = qcomm_mixed_bounds(&rho, &candidates)?;
    let ppath = attach(&mut witnesses, out, "purification", Document::Pure(io::purification_to_file(&mixed.best)));
    let preparer = qcomm_upper_protocol(&comm.best.grouped()?)?;
    let cpath = attach(&mut witnesses, out, "preparer", Document::Protocol(io::protocol_to_file(&preparer)));

    let (mut qcorr, mut r, mut qcomm) = (mixed.qcorr, mixed.r, comm.report);
    if let Some(w) = qcorr.witness.as_deref() {
        // sharing the state itself needs no file
        if w != "share the state itself" {
            cite(&mut qcorr, &ppath);
        }
    }
    cite(&mut r, &ppath);
    cite(&mut qcomm, &cpath);
    let consistent = comm_corr_consistency(&qcorr, &qcomm, k);
    let summary = format!(
        "qcorr in [{}, {}]\nr in [{}, {}]\nqcomm in [{}, {}]\nconsistent = {consistent}\n",
        qcorr.lower, qcorr.upper, r.lower, r.upper, qcomm.lower, qcomm.upper
    );
    let report = MixedReport {
        tool: TOOL,
        command: "analyze-mixed",
        config: args.clone(),
        dims: rho.dims().to_vec(),
        rank: rho.rank(),
        diagonal: rho.is_diagonal(qcorr_core::tol::HERMITIAN),
        candidates: summaries,
        qcorr,
        r,
        qcomm,
        consistent,
        purification: ppath,
    };
    Ok(Output { witnesses, ..Output::new(report, summary) })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub tool: Tool,
    pub command: &'static str,
    pub config: VerifyArgs,
    pub parties: usize,
    pub seed_qubits: Vec<u32>,
    pub size: u32,
    pub communication: u32,
    /// `ledger[i][j]`: qubits sent from party `i` to party `j`.
    pub ledger: Vec<Vec<u32>>,
    pub fidelity: f64,
    pub passed: bool,
}

pub fn verify(args: &VerifyArgs) -> Result<Output<VerifyReport>> {
    check_eps(Some(args.eps))?;
    let mut p = io::read_protocol(&args.protocol)?;
    if let Some(t) = &args.target {
        p.target = io::read_pure(t)?;
    }
    let sim = simulate_protocol(&p)?;
    let passed = sim.fidelity >= 1.0 - args.eps;
    let summary = format!(
        "size = {}\ncommunication = {}\nfidelity = {:.12}\n{}\n",
        sim.size,
        sim.communication,
        sim.fidelity,
        if passed { "PASS" } else { "FAIL: fidelity below 1 - eps" }
    );
    let report = VerifyReport {
        tool: TOOL,
        command: "verify",
        config: args.clone(),
        parties: p.parties,
        seed_qubits: p.seed_qubits(),
        size: sim.size,
        communication: sim.communication,
        ledger: sim.ledger,
        fidelity: sim.fidelity,
        passed,
    };
    let mut o = Output::new(report, summary);
    if !passed {
        o.code = exit::FIDELITY;
    }
    Ok(o)
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub tool: Tool,
    pub command: &'static str,
    pub config: SynthArgs,
    pub witness: Option<String>,
    pub size: Option<u32>,
    pub communication: Option<u32>,
    /// Fidelity of the generated state to the target, for protocols and truncations.
    pub fidelity: Option<f64>,
    /// Partial-trace residual, for purifications.
    pub residual: Option<f64>,
    /// Whether the input needed renormalizing before the witness was built.
    pub renormalized: bool,
}

pub fn synthesize(args: &SynthArgs) -> Result<Output<SynthReport>> {
    let eps = check_eps(args.common.eps)?;
    let out = args.common.out.as_deref();
    let mut witnesses = Vec::new();
    let name = match args.witness {
        Witness::Seed => "seed",
        Witness::Preparer => "preparer",
        Witness::Truncation => "truncation",
        Witness::Purification => "purification",
    };
    let mut residual = None;
    let (doc, size, communication, fidelity, renormalized) = match args.witness {
        Witness::Seed | Witness::Preparer => {
            let psi = io::read_pure(&args.input)?;
            let p = if args.witness == Witness::Seed { canonical_seed(&psi)? } else { qcomm_upper_protocol(&psi)? };
            let sim = simulate_protocol(&p)?;
            (Document::Protocol(io::protocol_to_file(&p)), Some(sim.size), Some(sim.communication), Some(sim.fidelity), psi.renormalized())
        }
        Witness::Truncation => {
            let eps = eps.ok_or_else(|| Error::Parse("truncation requires --eps".into()))?;
            let psi = io::read_pure(&args.input)?;
            let t = truncate_pure(&psi, eps)?;
            (Document::Pure(io::pure_to_file(&t.state)), Some(qcorr_pure(&t.state)), None, Some(t.fidelity), psi.renormalized())
        }
        Witness::Purification => {
            let f = io::read_factorization(&args.input)?;
            let pur = purification_from_psd(&f)?;
            let target = qcorr_core::states::embed_classical(&qcorr_core::ClassicalDistribution::normalized(f.dims(), f.evaluate())?);
            residual = Some(pur.check(&target)?.residual);
            (Document::Pure(io::purification_to_file(&pur)), None, None, None, pur.renormalized())
        }
    };
    let path = attach(&mut witnesses, out, name, doc);
    let mut summary = format!(
        "{name} witness{}\n",
        path.as_deref().map(|p| format!(" written to {p}")).unwrap_or_else(|| " (no --out given, not written)".into())
    );
    if let Some(f) = fidelity {
        summary += &format!("fidelity = {f:.12}\n");
    }
    if let Some(r) = residual {
        summary += &format!("partial-trace residual = {r:.3e}\n");
    }
    let report = SynthReport {
        tool: TOOL,
        command: "synthesize",
        config: args.clone(),
        witness: path,
        size,
        communication,
        fidelity,
        residual,
        renormalized,
    };
    Ok(Output { witnesses, ..Output::new(report, summary) })
}

fn emit<R: Serialize>(o: Output<R>, out: Option<&Path>) -> Result<i32> {
    for (path, text) in &o.witnesses {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(out) = out {
        std::fs::write(out, io::to_json(&o.report)).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{}", o.summary);
    Ok(o.code)
}

/// Runs a parsed command line; returns the exit status of a completed run.
pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::AnalyzePure(a) => emit(analyze_pure(a)?, a.common.out.as_deref()),
        Command::AnalyzeDist(a) => emit(analyze_dist(a)?, a.common.out.as_deref()),
        Command::AnalyzeMixed(a) => emit(analyze_mixed(a)?, a.common.out.as_deref()),
        Command::Verify(a) => emit(verify(a)?, a.out.as_deref()),
        Command::Synthesize(a) => emit(synthesize(a)?, a.common.out.as_deref()),
    }
}

/// Serializes a report exactly as `--out` would.
pub fn report_json<R: Serialize>(o: &Output<R>) -> String {
    io::to_json(&o.report)
}
