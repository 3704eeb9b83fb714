//! Constructive witnesses: seed states with local isometries, purifications,
//! spectral truncations, and a simulator for generation protocols.
//!
//! A protocol acts on *registers*. Each register has a current dimension and
//! an owner; isometries change a register's dimension, sends change its owner,
//! discards remove it. At the end the live registers are grouped by owner and
//! compared with the target, each party's target space being embedded in its
//! final space by zero padding.


use crate::error::{Error, Result};
use crate::psd_rank::PsdFactorization;
use crate::spectral::{approx_schmidt_rank, check_open_unit, hermitian_eig, support_decomposition};
use crate::states::{fidelity, DensityOperator, PartySplit, PureState};
use crate::{tensor, tol, CMatrix, C64};

fn ceil_log2(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

/// A pure state on registers, each register assigned to a party.
#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    state: PureState,
    owners: Vec<usize>,
    renormalized: bool,
}

impl Purification {
    /// Every party `0..k` must own at least one register; a party's first
    /// register is its visible system, later ones are ancillas.
    pub fn new(state: PureState, owners: Vec<usize>) -> Result<Self> {
        if owners.len() != state.parties() {
            return Err(Error::Shape(format!("{} owners for {} registers", owners.len(), state.parties())));
        }
        let k = owners.iter().max().map_or(0, |m| m + 1);
        if let Some(p) = (0..k).find(|p| !owners.contains(p)) {
            return Err(Error::Shape(format!("party {p} owns no register")));
        }
        Ok(Self { state, owners, renormalized: false })
    }

    /// One register per party plus the extra registers held by the last party.
    pub fn with_default_owners(state: PureState, parties: usize) -> Result<Self> {
        if parties == 0 || state.parties() < parties {
            return Err(Error::Shape(format!("{} registers cannot carry {parties} parties", state.parties())));
        }
        let owners = (0..state.parties()).map(|j| j.min(parties - 1)).collect();
        Self::new(state, owners)
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }

    /// True when the source tensor's mass was off by more than `1e-6`.
    pub fn renormalized(&self) -> bool {
        self.renormalized || self.state.renormalized()
    }

    pub fn parties(&self) -> usize {
        self.owners.iter().max().map_or(0, |m| m + 1)
    }

    /// The visible register of each party.
    pub fn system_registers(&self) -> Vec<usize> {
        (0..self.parties()).map(|p| self.owners.iter().position(|&o| o == p).expect("validated")).collect()
    }

    /// The state with each party's registers merged into one.
    pub fn grouped(&self) -> Result<PureState> {
        self.state.group(&self.owners)
    }

    /// Whether the visible registers carry `rho`.
    pub fn check(&self, rho: &DensityOperator) -> Result<crate::states::PurificationCheck> {
        crate::states::is_purification(&self.state, rho, &self.system_registers())
    }
}

/// `Σ_i √λ_i |v_i⟩|i⟩`, the ancilla of dimension `rank(ρ)` held by the last party.
pub fn standard_purification(rho: &DensityOperator) -> Result<Purification> {
    let eig = hermitian_eig(rho.matrix())?;
    let rank = eig.rank().max(1);
    let d = rho.matrix().nrows();
    let mut amps = vec![C64::new(0.0, 0.0); d * rank];
    for i in 0..rank {
        let w = eig.values[i].max(0.0).sqrt();
        for x in 0..d {
            amps[x * rank + i] = eig.vectors[(x, i)] * w;
        }
    }
    let mut dims = rho.dims().to_vec();
    dims.push(rank);
    let state = PureState::from_unnormalized(dims, amps)?;
    Purification::with_default_owners(state, rho.parties())
}

/// Isometry on one register.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalIsometry {
    pub party: usize,
    pub register: usize,
    /// `d_out × d_in` with `V†V = I`.
    pub matrix: CMatrix,
}

impl LocalIsometry {
    pub fn new(party: usize, register: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() < matrix.ncols() {
            return Err(Error::Shape(format!("{}x{} cannot be an isometry", matrix.nrows(), matrix.ncols())));
        }
        let deviation = isometry_deviation(&matrix);
        if deviation > tol::RECON {
            return Err(Error::Shape(format!("V†V deviates from the identity by {deviation:.3e}")));
        }
        Ok(Self { party, register, matrix })
    }
}

fn isometry_deviation(v: &CMatrix) -> f64 {
    let g = v.adjoint() * v;
    crate::states::max_abs_diff(&g, &CMatrix::identity(g.nrows(), g.ncols()))
}

/// One protocol step.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Isometry(LocalIsometry),
    /// Moves a whole register; `qubits` must equal `log₂` of its dimension.
    Send { from: usize, to: usize, register: usize, qubits: u32 },
    /// Traces out a register.
    Discard { party: usize, register: usize },
}

/// Seed, ordered steps and the declared target.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationProtocol {
    pub parties: usize,
    /// Registers of the initial state.
    pub seed: PureState,
    /// Initial owner of each seed register.
    pub owners: Vec<usize>,
    pub steps: Vec<Step>,
    pub target: PureState,
}

impl GenerationProtocol {
    /// Qubits per party in the seed, `Σ_{registers of i} ⌈log₂ dim⌉`.
    pub fn seed_qubits(&self) -> Vec<u32> {
        let mut n = vec![0; self.parties];
        for (j, &o) in self.owners.iter().enumerate() {
            if o < self.parties {
                n[o] += ceil_log2(self.seed.dims()[j]);
            }
        }
        n
    }

    /// Seed size `Σ n_i`.
    pub fn size(&self) -> u32 {
        self.seed_qubits().iter().sum()
    }

    /// Qubits sent, as declared by the steps.
    pub fn communication(&self) -> u32 {
        self.steps.iter().map(|s| if let Step::Send { qubits, .. } = s { *qubits } else { 0 }).sum()
    }
}

/// Final state of a simulation.
#[derive(Debug, Clone)]
pub enum Outcome {
    Pure(PureState),
    Mixed(DensityOperator),
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: Outcome,
    /// Fidelity to the zero-padded target.
    pub fidelity: f64,
    pub size: u32,
    pub communication: u32,
    /// `ledger[i][j]`: qubits sent from party `i` to party `j`.
    pub ledger: Vec<Vec<u32>>,
}

fn violation(step: usize, reason: impl Into<String>) -> Error {
    Error::Protocol { step, reason: reason.into() }
}

/// Replays `p` and compares the result with its target. Bookkeeping errors
/// carry the index of the offending step (`steps.len()` for end-of-run checks).
pub fn simulate_protocol(p: &GenerationProtocol) -> Result<Simulation> {
    let k = p.parties;
    let end = p.steps.len();
    if p.owners.len() != p.seed.parties() {
        return Err(violation(0, format!("{} owners for {} seed registers", p.owners.len(), p.seed.parties())));
    }
    if let Some(&o) = p.owners.iter().find(|&&o| o >= k) {
        return Err(violation(0, format!("seed register owned by unknown party {o}")));
    }
    if p.target.parties() != k {
        return Err(violation(end, format!("target has {} parties, protocol {k}", p.target.parties())));
    }

    let mut state = p.seed.clone();
    let mut owner: Vec<Option<usize>> = p.owners.iter().map(|&o| Some(o)).collect();
    let mut ledger = vec![vec![0u32; k]; k];
    let live = |owner: &[Option<usize>], step: usize, register: usize| -> Result<usize> {
        owner.get(register).copied().flatten().ok_or_else(|| violation(step, format!("register {register} does not exist or was discarded")))
    };

    for (s, step) in p.steps.iter().enumerate() {
        match step {
            Step::Isometry(iso) => {
                let held = live(&owner, s, iso.register)?;
                if held != iso.party {
                    return Err(violation(s, format!("party {} acts on register {} held by party {held}", iso.party, iso.register)));
                }
                if iso.matrix.ncols() != state.dims()[iso.register] {
                    return Err(violation(
                        s,
                        format!("isometry expects dimension {}, register has {}", iso.matrix.ncols(), state.dims()[iso.register]),
                    ));
                }
                if iso.matrix.nrows() < iso.matrix.ncols() || isometry_deviation(&iso.matrix) > tol::RECON {
                    return Err(violation(s, "matrix is not an isometry"));
                }
                state = state.apply_local(iso.register, &iso.matrix).map_err(|e| violation(s, e.to_string()))?;
            }
            Step::Send { from, to, register, qubits } => {
                let held = live(&owner, s, *register)?;
                if held != *from {
                    return Err(violation(s, format!("party {from} sends register {register} held by party {held}")));
                }
                if *to >= k || to == from {
                    return Err(violation(s, format!("invalid recipient {to}")));
                }
                let dim = state.dims()[*register];
                if 1usize.checked_shl(*qubits) != Some(dim) {
                    return Err(violation(s, format!("register of dimension {dim} is not {qubits} qubits")));
                }
                owner[*register] = Some(*to);
                ledger[*from][*to] += qubits;
            }
            Step::Discard { party, register } => {
                let held = live(&owner, s, *register)?;
                if held != *party {
                    return Err(violation(s, format!("party {party} discards register {register} held by party {held}")));
                }
                owner[*register] = None;
            }
        }
    }

    // group live registers by owner; discarded ones go to a phantom party k
    let mut group: Vec<usize> = owner.iter().map(|o| o.unwrap_or(k)).collect();
    let discarded = group.contains(&k);
    let mut dims = state.dims().to_vec();
    for party in 0..=k {
        if !group.contains(&party) && party < k {
            // parties holding nothing get a trivial register
            dims.push(1);
            group.push(party);
        }
    }
    if dims.len() != state.parties() {
        state = PureState::new(dims, state.amplitudes().to_vec())?;
    }
    let grouped = state.group(&group).map_err(|e| violation(end, e.to_string()))?;
    let final_dims: Vec<usize> = grouped.dims()[..k].to_vec();
    if let Some(j) = (0..k).find(|&j| p.target.dims()[j] > final_dims[j]) {
        return Err(violation(
            end,
            format!("party {j} ends with dimension {}, target needs {}", final_dims[j], p.target.dims()[j]),
        ));
    }
    let target = p.target.padded(&final_dims)?;

    let (outcome, f) = if discarded {
        let rho = grouped.reduced(&(0..k).collect::<Vec<_>>())?;
        let f = fidelity(&rho, &target.density())?;
        (Outcome::Mixed(rho), f)
    } else {
        let f = target.inner(&grouped)?.norm().min(1.0);
        (Outcome::Pure(grouped), f)
    };
    Ok(Simulation {
        state: outcome,
        fidelity: f,
        size: p.size(),
        communication: ledger.iter().flatten().sum(),
        ledger,
    })
}

/// Columns of `basis` (orthonormal, `d × r`) completed to an isometry
/// `d × n` with `r ≤ n ≤ d`.
fn complete_isometry(basis: &CMatrix, n: usize) -> CMatrix {
    let (d, r) = basis.shape();
    let mut v = CMatrix::zeros(d, n);
    v.columns_mut(0, r).copy_from(basis);
    if n > r {
        let proj = CMatrix::identity(d, d) - basis * basis.adjoint();
        let eig = hermitian_eig(&((&proj + proj.adjoint()).scale(0.5))).expect("projector is Hermitian");
        v.columns_mut(r, n - r).copy_from(&eig.vectors.columns(0, n - r));
    }
    v
}

/// Seed registers of `2^⌈log₂ r_j⌉` dimensions holding the coefficient tensor
/// of the support decomposition, and one isometry per party onto its support.
fn seed_and_isometries(psi: &PureState) -> Result<(PureState, Vec<LocalIsometry>)> {
    let sd = support_decomposition(psi);
    let shape = sd.shape();
    let seed_dims: Vec<usize> = shape.iter().map(|&r| 1 << ceil_log2(r)).collect();
    let seed = PureState::new(shape.clone(), sd.coefficients.clone())?.padded(&seed_dims)?;
    let isometries = sd
        .bases
        .iter()
        .enumerate()
        .map(|(j, basis)| {
            let (d, n) = (psi.dims()[j], seed_dims[j]);
            let mut lifted = CMatrix::zeros(d.max(n), basis.ncols());
            lifted.rows_mut(0, d).copy_from(basis);
            LocalIsometry::new(j, j, complete_isometry(&lifted, n))
        })
        .collect::<Result<_>>()?;
    Ok((seed, isometries))
}

/// The seed `Σ a_{i_1…i_k} |i_1⟩⋯|i_k⟩` on `⌈log₂ r_j⌉` qubits per party,
/// followed by each party's isometry `|i⟩ ↦ |λ_i⟩`.
///
/// When `2^⌈log₂ r_j⌉` exceeds `d_j` the isometry lands in the larger space
/// and the target is compared after zero padding.
pub fn canonical_seed(psi: &PureState) -> Result<GenerationProtocol> {
    let (seed, isometries) = seed_and_isometries(psi)?;
    let k = psi.parties();
    Ok(GenerationProtocol {
        parties: k,
        seed,
        owners: (0..k).collect(),
        steps: isometries.into_iter().map(Step::Isometry).collect(),
        target: psi.clone(),
    })
}

/// One party prepares the whole canonical seed and sends every other party
/// its share; each party then applies its isometry. The preparer is the
/// party with the largest share (lowest index on ties), so the cost is
/// `m(ψ) − max_j ⌈log₂ r_j⌉`.
pub fn qcomm_upper_protocol(psi: &PureState) -> Result<GenerationProtocol> {
    let (seed, isometries) = seed_and_isometries(psi)?;
    let k = psi.parties();
    let qubits: Vec<u32> = seed.dims().iter().map(|&d| ceil_log2(d)).collect();
    let preparer = (0..k).max_by_key(|&j| (qubits[j], std::cmp::Reverse(j))).expect("k >= 1");
    let owners = (0..k).map(|j| if qubits[j] > 0 { preparer } else { j }).collect();
    let mut steps: Vec<Step> = (0..k)
        .filter(|&j| j != preparer && qubits[j] > 0)
        .map(|j| Step::Send { from: preparer, to: j, register: j, qubits: qubits[j] })
        .collect();
    steps.extend(isometries.into_iter().map(Step::Isometry));
    Ok(GenerationProtocol { parties: k, seed, owners, steps, target: psi.clone() })
}

/// Purification of the tensor realized by `f`: per party, registers
/// `(x, x', u)` of dimensions `(|X_t|, |X_t|, r)` holding
/// `Σ_i ⊗_t Σ_{x_t} |x_t⟩|x_t⟩|u^i_{x_t}⟩`, with `u^i_x` the `i`-th column of
/// `√C_x`. The visible register of party `t` is register `3t`.
pub fn purification_from_psd(f: &PsdFactorization) -> Result<Purification> {
    let dims = f.dims();
    let k = dims.len();
    let r = f.r();
    let reg_dims: Vec<usize> = dims.iter().flat_map(|&d| [d, d, r]).collect();
    let total = reg_dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    match total {
        Some(t) if t <= tol::MAX_DIM => {}
        _ => return Err(Error::TooLarge { dim: total.unwrap_or(usize::MAX), cap: tol::MAX_DIM }),
    }
    let roots: Vec<Vec<CMatrix>> = f
        .factors()
        .iter()
        .map(|party| {
            party
                .iter()
                .map(|c| {
                    let e = hermitian_eig(c)?;
                    if let Some(&min) = e.values.last() {
                        if min < -tol::PSD {
                            return Err(Error::NotPsd { min_eigenvalue: min });
                        }
                    }
                    Ok(e.reconstruct(|l| l.max(0.0).sqrt()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mass: f64 = f.evaluate().iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Unnormalized { norm: mass });
    }
    let visible_dims = dims.clone();
    let j_dims = vec![r; k];
    let mut amps = vec![C64::new(0.0, 0.0); total.expect("checked")];
    let mut reg = vec![0usize; 3 * k];
    for xf in 0..tensor::total(&visible_dims) {
        let x = tensor::unravel(xf, &visible_dims);
        for jf in 0..tensor::total(&j_dims) {
            let j = tensor::unravel(jf, &j_dims);
            let amp: C64 = (0..r).map(|i| (0..k).map(|t| roots[t][x[t]][(j[t], i)]).product::<C64>()).sum();
            for t in 0..k {
                reg[3 * t] = x[t];
                reg[3 * t + 1] = x[t];
                reg[3 * t + 2] = j[t];
            }
            amps[tensor::ravel(&reg, &reg_dims)] = amp;
        }
    }
    let state = PureState::from_unnormalized(reg_dims, amps)?;
    let mut pur = Purification::new(state, (0..3 * k).map(|j| j / 3).collect())?;
    pur.renormalized = (mass - 1.0).abs() > 1e-6;
    Ok(pur)
}

/// Result of a spectral truncation.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub state: PureState,
    /// `|⟨ψ|φ'⟩|`, which equals `√(retained_mass)`.
    pub fidelity: f64,
    pub retained_mass: f64,
    /// Eigenvectors kept per party.
    pub kept_ranks: Vec<usize>,
}

fn restrict(psi: &PureState, keep: &[Vec<usize>]) -> Result<(PureState, f64)> {
    let sd = support_decomposition(psi);
    let shape = sd.shape();
    if keep.len() != shape.len() {
        return Err(Error::Shape(format!("{} index sets for {} parties", keep.len(), shape.len())));
    }
    for (j, s) in keep.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::Shape(format!("empty index set for party {j}")));
        }
        if let Some(&i) = s.iter().find(|&&i| i >= shape[j]) {
            return Err(Error::Shape(format!("index {i} beyond marginal rank {} of party {j}", shape[j])));
        }
    }
    let mut coeffs = sd.coefficients.clone();
    for (f, c) in coeffs.iter_mut().enumerate() {
        let idx = tensor::unravel(f, &shape);
        if idx.iter().zip(keep).any(|(i, s)| !s.contains(i)) {
            *c = C64::new(0.0, 0.0);
        }
    }
    let mass: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if !(mass > 0.0) {
        return Err(Error::Unnormalized { norm: 0.0 });
    }
    let state = PureState::from_unnormalized(psi.dims().to_vec(), sd.lift(&coeffs))?;
    Ok((state, mass))
}

/// Keeps each party's leading `r_j^{(ε/k)}` marginal eigenvectors and renormalizes.
pub fn truncate_pure(psi: &PureState, eps: f64) -> Result<Truncation> {
    check_open_unit("eps", eps)?;
    let k = psi.parties();
    let kept_ranks: Vec<usize> = if k == 1 {
        vec![1]
    } else {
        (0..k)
            .map(|j| approx_schmidt_rank(psi, &PartySplit::single(j, k)?, eps / k as f64))
            .collect::<Result<_>>()?
    };
    let keep: Vec<Vec<usize>> = kept_ranks.iter().map(|&r| (0..r).collect()).collect();
    let (state, retained_mass) = restrict(psi, &keep)?;
    let fidelity = psi.inner(&state)?.norm().min(1.0);
    Ok(Truncation { state, fidelity, retained_mass, kept_ranks })
}

/// Restriction of the coefficient tensor to `S_1 × … × S_k` (0-based indices
/// into each party's marginal eigenbasis, eigenvalues nonincreasing), renormalized.
pub fn subset_truncate(psi: &PureState, subsets: &[Vec<usize>]) -> Result<(PureState, f64)> {
    restrict(psi, subsets)
}
