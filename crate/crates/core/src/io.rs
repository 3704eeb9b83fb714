//! JSON file formats for states, distributions, factorizations and protocols.
//!
//! Every file is an object tagged by `"kind"`. Sparse listings (`amplitudes`,
//! `probs`) omit zero entries; indices are per-party, in the row-major order
//! used throughout the crate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psd_rank::PsdFactorization;
use crate::states::{ClassicalDistribution, DensityOperator, PureState};
use crate::synthesis::{GenerationProtocol, LocalIsometry, Purification, Step};
use crate::{tensor, tol, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Complex> for C64 {
    fn from(z: Complex) -> Self {
        C64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub index: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub index: Vec<usize>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureFile {
    pub dims: Vec<usize>,
    pub amplitudes: Vec<Amplitude>,
    /// Party owning each register, for purifications with extra registers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owners: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFile {
    pub dims: Vec<usize>,
    pub matrix: Vec<Vec<Complex>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFile {
    pub dims: Vec<usize>,
    pub probs: Vec<Probability>,
}

/// `factors[t][x]` is the `r × r` factor of symbol `x` of party `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationFile {
    pub r: usize,
    pub factors: Vec<Vec<Vec<Vec<Complex>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum StepFile {
    Isometry { party: usize, register: usize, matrix: Vec<Vec<Complex>> },
    Send { from: usize, to: usize, register: usize, qubits: u32 },
    Discard { party: usize, register: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub parties: usize,
    pub seed: PureFile,
    /// Initial owner of each seed register.
    pub owners: Vec<usize>,
    pub steps: Vec<StepFile>,
    pub target: PureFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Document {
    Pure(PureFile),
    Density(DensityFile),
    Dist(DistFile),
    Factorization(FactorizationFile),
    Protocol(ProtocolFile),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Pure(_) => "pure",
            Document::Density(_) => "density",
            Document::Dist(_) => "dist",
            Document::Factorization(_) => "factorization",
            Document::Protocol(_) => "protocol",
        }
    }
}

pub fn parse_document(text: &str) -> Result<Document> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_document(path: &Path) -> Result<Document> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_document(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn wrong_kind(expected: &str, doc: &Document) -> Error {
    Error::Parse(format!("expected a {expected} document, found {}", doc.kind()))
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Shape(format!("invalid dims {dims:?}")));
    }
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
    if total > tol::MAX_DIM {
        return Err(Error::TooLarge { dim: total, cap: tol::MAX_DIM });
    }
    Ok(())
}

fn flat_index(index: &[usize], dims: &[usize]) -> Result<usize> {
    if index.len() != dims.len() || index.iter().zip(dims).any(|(i, d)| i >= d) {
        return Err(Error::Shape(format!("index {index:?} out of range for dims {dims:?}")));
    }
    Ok(tensor::ravel(index, dims))
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<Complex>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

fn rows_to_matrix(rows: &[Vec<Complex>]) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Shape("matrix rows are empty or ragged".into()));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j].into()))
}

pub fn pure_to_file(psi: &PureState) -> PureFile {
    let amplitudes = psi
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm_sqr() > 0.0)
        .map(|(f, z)| Amplitude { index: tensor::unravel(f, psi.dims()), re: z.re, im: z.im })
        .collect();
    PureFile { dims: psi.dims().to_vec(), amplitudes, owners: None }
}

/// Repeated indices accumulate.
pub fn pure_from_file(f: &PureFile) -> Result<PureState> {
    check_dims(&f.dims)?;
    let mut a = vec![C64::new(0.0, 0.0); tensor::total(&f.dims)];
    for e in &f.amplitudes {
        a[flat_index(&e.index, &f.dims)?] += C64::new(e.re, e.im);
    }
    PureState::new(f.dims.clone(), a)
}

pub fn purification_to_file(p: &Purification) -> PureFile {
    PureFile { owners: Some(p.owners().to_vec()), ..pure_to_file(p.state()) }
}

/// Without `owners`, registers beyond the first `parties` go to the last party.
pub fn purification_from_file(f: &PureFile, parties: usize) -> Result<Purification> {
    let state = pure_from_file(f)?;
    match &f.owners {
        Some(o) => Purification::new(state, o.clone()),
        None => Purification::with_default_owners(state, parties),
    }
}

pub fn density_to_file(rho: &DensityOperator) -> DensityFile {
    DensityFile { dims: rho.dims().to_vec(), matrix: matrix_to_rows(rho.matrix()) }
}

pub fn density_from_file(f: &DensityFile) -> Result<DensityOperator> {
    check_dims(&f.dims)?;
    DensityOperator::new(f.dims.clone(), rows_to_matrix(&f.matrix)?)
}

pub fn dist_to_file(p: &ClassicalDistribution) -> DistFile {
    let probs = p
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(f, &v)| Probability { index: tensor::unravel(f, p.dims()), p: v })
        .collect();
    DistFile { dims: p.dims().to_vec(), probs }
}

pub fn dist_from_file(f: &DistFile) -> Result<ClassicalDistribution> {
    check_dims(&f.dims)?;
    let mut v = vec![0.0; tensor::total(&f.dims)];
    for e in &f.probs {
        v[flat_index(&e.index, &f.dims)?] += e.p;
    }
    ClassicalDistribution::new(f.dims.clone(), v)
}

pub fn factorization_to_file(f: &PsdFactorization) -> FactorizationFile {
    FactorizationFile {
        r: f.r(),
        factors: f.factors().iter().map(|p| p.iter().map(matrix_to_rows).collect()).collect(),
    }
}

pub fn factorization_from_file(f: &FactorizationFile) -> Result<PsdFactorization> {
    let factors = f
        .factors
        .iter()
        .map(|p| p.iter().map(|m| rows_to_matrix(m)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let out = PsdFactorization::new(factors)?;
    if out.r() != f.r {
        return Err(Error::Shape(format!("declared r = {} but factors are {}x{}", f.r, out.r(), out.r())));
    }
    Ok(out)
}

pub fn protocol_to_file(p: &GenerationProtocol) -> ProtocolFile {
    let steps = p
        .steps
        .iter()
        .map(|s| match s {
            Step::Isometry(iso) => StepFile::Isometry { party: iso.party, register: iso.register, matrix: matrix_to_rows(&iso.matrix) },
            Step::Send { from, to, register, qubits } => StepFile::Send { from: *from, to: *to, register: *register, qubits: *qubits },
            Step::Discard { party, register } => StepFile::Discard { party: *party, register: *register },
        })
        .collect();
    ProtocolFile {
        parties: p.parties,
        seed: pure_to_file(&p.seed),
        owners: p.owners.clone(),
        steps,
        target: pure_to_file(&p.target),
    }
}

/// Structural checks only; ownership is checked by the simulator.
pub fn protocol_from_file(f: &ProtocolFile) -> Result<GenerationProtocol> {
    let seed = pure_from_file(&f.seed)?;
    if f.owners.len() != seed.parties() {
        return Err(Error::Shape(format!("{} owners for {} seed registers", f.owners.len(), seed.parties())));
    }
    let steps = f
        .steps
        .iter()
        .map(|s| {
            Ok(match s {
                StepFile::Isometry { party, register, matrix } => {
                    Step::Isometry(LocalIsometry::new(*party, *register, rows_to_matrix(matrix)?)?)
                }
                StepFile::Send { from, to, register, qubits } => Step::Send { from: *from, to: *to, register: *register, qubits: *qubits },
                StepFile::Discard { party, register } => Step::Discard { party: *party, register: *register },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GenerationProtocol { parties: f.parties, seed, owners: f.owners.clone(), steps, target: pure_from_file(&f.target)? })
}

pub fn read_pure(path: &Path) -> Result<PureState> {
    match read_document(path)? {
        Document::Pure(f) => pure_from_file(&f),
        d => Err(wrong_kind("pure", &d)),
    }
}

/// A `pure` file is accepted as its rank-one density operator.
pub fn read_density(path: &Path) -> Result<DensityOperator> {
    match read_document(path)? {
        Document::Density(f) => density_from_file(&f),
        Document::Pure(f) => Ok(pure_from_file(&f)?.density()),
        d => Err(wrong_kind("density", &d)),
    }
}

pub fn read_dist(path: &Path) -> Result<ClassicalDistribution> {
    match read_document(path)? {
        Document::Dist(f) => dist_from_file(&f),
        d => Err(wrong_kind("dist", &d)),
    }
}

pub fn read_purification(path: &Path, parties: usize) -> Result<Purification> {
    match read_document(path)? {
        Document::Pure(f) => purification_from_file(&f, parties),
        d => Err(wrong_kind("pure", &d)),
    }
}

pub fn read_factorization(path: &Path) -> Result<PsdFactorization> {
    match read_document(path)? {
        Document::Factorization(f) => factorization_from_file(&f),
        d => Err(wrong_kind("factorization", &d)),
    }
}

pub fn read_protocol(path: &Path) -> Result<GenerationProtocol> {
    match read_document(path)? {
        Document::Protocol(f) => protocol_from_file(&f),
        d => Err(wrong_kind("protocol", &d)),
    }
}
