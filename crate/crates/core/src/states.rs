//! Multipartite pure states, density operators and classical distributions.
//!
//! Every tensor is stored flat in row-major order with party 0 as the slowest
//! index; the same order defines the computational basis of every matrix.

use crate::error::{Error, Result};
use crate::spectral::hermitian_eig;
use crate::tensor::{self, strides, total};
use crate::{tol, CMatrix, C64};

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::Shape("at least one party is required".into()));
    }
    if let Some(p) = dims.iter().position(|&d| d == 0) {
        return Err(Error::Shape(format!("party {p} has dimension 0")));
    }
    let d = dims
        .iter()
        .try_fold(1usize, |acc, &x| acc.checked_mul(x))
        .ok_or(Error::TooLarge { dim: usize::MAX, cap: tol::MAX_DIM })?;
    if d > tol::MAX_DIM {
        return Err(Error::TooLarge { dim: d, cap: tol::MAX_DIM });
    }
    Ok(d)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// A unit vector in `H_1 ⊗ … ⊗ H_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: Vec<C64>,
    renormalized: bool,
}

impl PureState {
    /// Builds a state from row-major amplitudes. Norm deviations up to
    /// [`tol::NORM`] are corrected and flagged.
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let d = check_dims(&dims)?;
        if amps.len() != d {
            return Err(Error::Shape(format!("{} amplitudes for total dimension {d}", amps.len())));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Shape("non-finite amplitude".into()));
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let deviation = (norm_sqr - 1.0).abs();
        if deviation > tol::NORM {
            return Err(Error::NotNormalized { deviation });
        }
        let mut amps = amps;
        let renormalized = deviation > tol::RENORM_FLAG;
        if deviation > 0.0 {
            let s = norm_sqr.sqrt();
            amps.iter_mut().for_each(|a| *a /= s);
        }
        Ok(Self { dims, amps, renormalized })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_unnormalized(dims: Vec<usize>, mut amps: Vec<C64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { deviation: 1.0 });
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::new(dims, amps)
    }

    /// Computational basis state `|i_1 … i_k⟩`.
    pub fn basis(dims: Vec<usize>, index: &[usize]) -> Result<Self> {
        let d = check_dims(&dims)?;
        if index.len() != dims.len() || index.iter().zip(&dims).any(|(&i, &n)| i >= n) {
            return Err(Error::Shape(format!("basis index {index:?} out of range for {dims:?}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); d];
        amps[tensor::ravel(index, &dims)] = C64::new(1.0, 0.0);
        Self::new(dims, amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: &[usize]) -> C64 {
        self.amps[tensor::ravel(index, &self.dims)]
    }

    /// True when construction had to rescale the input by more than rounding noise.
    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { expected: self.dims.clone(), found: other.dims.clone() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Rank-one projector `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DensityOperator {
        let v = CMatrix::from_column_slice(self.amps.len(), 1, &self.amps);
        DensityOperator::from_parts(self.dims.clone(), &v * v.adjoint())
    }

    /// Reduced state on `keep` (in the given order), tracing every other party.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityOperator> {
        check_party_set(keep, self.parties())?;
        if keep.is_empty() {
            return Err(Error::EmptyRemainder);
        }
        let m = tensor::flatten(&self.amps, &self.dims, keep);
        let dims = keep.iter().map(|&p| self.dims[p]).collect();
        DensityOperator::new(dims, &m * m.adjoint())
    }

    /// Coefficient matrix across `split`: rows index the left parties, columns the right ones.
    pub fn matrix(&self, split: &PartySplit) -> CMatrix {
        tensor::flatten(&self.amps, &self.dims, split.left())
    }

    /// Inverse of [`PureState::matrix`].
    pub fn from_matrix(dims: Vec<usize>, split: &PartySplit, m: &CMatrix) -> Result<Self> {
        let dl: usize = split.left().iter().map(|&p| dims[p]).product();
        if m.nrows() != dl || m.len() != total(&dims) {
            return Err(Error::Shape(format!("{}x{} matrix does not fit dims {dims:?}", m.nrows(), m.ncols())));
        }
        let amps = tensor::unflatten(m, &dims, split.left());
        Self::new(dims, amps)
    }

    /// Same vector with its parties reordered: party `j` of the result is party `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_party_set(order, self.parties())?;
        if order.len() != self.parties() {
            return Err(Error::Shape("permutation must list every party".into()));
        }
        let (amps, dims) = tensor::permute(&self.amps, &self.dims, order);
        Ok(Self { dims, amps, renormalized: self.renormalized })
    }

    /// Applies an isometry `op` (shape `d_out × d_party`) to one party.
    pub fn apply_local(&self, party: usize, op: &CMatrix) -> Result<Self> {
        if party >= self.parties() {
            return Err(Error::Shape(format!("party {party} out of range")));
        }
        if op.ncols() != self.dims[party] {
            return Err(Error::DimensionMismatch { expected: vec![self.dims[party]], found: vec![op.ncols()] });
        }
        let (amps, dims) = tensor::apply_local(&self.amps, &self.dims, party, op);
        check_dims(&dims)?;
        Self::new(dims, amps)
    }

    /// Merges registers into parties: register `j` goes to party `owners[j]`,
    /// and each party's registers keep their relative order (first register slowest).
    pub fn group(&self, owners: &[usize]) -> Result<Self> {
        if owners.len() != self.parties() {
            return Err(Error::Shape(format!("{} owners for {} registers", owners.len(), self.parties())));
        }
        let k = owners.iter().max().map_or(0, |m| m + 1);
        let mut order = Vec::with_capacity(owners.len());
        let mut dims = vec![1usize; k];
        for p in 0..k {
            for (j, _) in owners.iter().enumerate().filter(|(_, &o)| o == p) {
                order.push(j);
                dims[p] *= self.dims[j];
            }
        }
        let (amps, _) = tensor::permute(&self.amps, &self.dims, &order);
        Self::new(dims, amps)
    }

    /// Same amplitudes embedded into larger local dimensions (zero padding).
    pub fn padded(&self, dims: &[usize]) -> Result<Self> {
        if dims.len() != self.parties() || dims.iter().zip(&self.dims).any(|(n, o)| n < o) {
            return Err(Error::DimensionMismatch { expected: self.dims.clone(), found: dims.to_vec() });
        }
        let d = check_dims(dims)?;
        let mut amps = vec![C64::new(0.0, 0.0); d];
        for (f, a) in self.amps.iter().enumerate() {
            amps[tensor::ravel(&tensor::unravel(f, &self.dims), dims)] = *a;
        }
        Self::new(dims.to_vec(), amps)
    }
}

/// A Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    dims: Vec<usize>,
    matrix: CMatrix,
    renormalized: bool,
}

impl DensityOperator {
    /// Validates and canonicalizes: the matrix is re-Hermitized, eigenvalues in
    /// `[-1e-10, 0)` are clipped and small trace deviations are corrected.
    pub fn new(dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let d = check_dims(&dims)?;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Shape(format!("{}x{} matrix for total dimension {d}", matrix.nrows(), matrix.ncols())));
        }
        if matrix.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Shape("non-finite matrix entry".into()));
        }
        let adj = matrix.adjoint();
        let deviation = max_abs_diff(&matrix, &adj);
        if deviation > tol::HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        let mut m = (&matrix + &adj).scale(0.5);
        let eig = hermitian_eig(&m)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -tol::PSD {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        if min < 0.0 {
            m = eig.reconstruct(|l| l.max(0.0));
        }
        let trace = m.trace().re;
        let deviation = (trace - 1.0).abs();
        if deviation > tol::NORM {
            return Err(Error::NotNormalized { deviation });
        }
        if deviation > 0.0 {
            m.unscale_mut(trace);
        }
        Ok(Self { dims, matrix: m, renormalized: deviation > tol::RENORM_FLAG })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts(dims: Vec<usize>, matrix: CMatrix) -> Self {
        Self { dims, matrix, renormalized: false }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    /// Numerical rank at the relative cutoff [`tol::RANK`].
    pub fn rank(&self) -> usize {
        hermitian_eig(&self.matrix).map(|e| e.rank()).unwrap_or(0)
    }

    /// Whether every off-diagonal entry is below `tol` in modulus.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.matrix.nrows();
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[(i, j)].norm() <= tol))
    }

    /// Traces out the parties in `discard`; the remaining parties keep ascending order.
    pub fn partial_trace(&self, discard: &[usize]) -> Result<Self> {
        check_party_set(discard, self.parties())?;
        let keep: Vec<usize> = (0..self.parties()).filter(|p| !discard.contains(p)).collect();
        if keep.is_empty() {
            return Err(Error::EmptyRemainder);
        }
        let st = strides(&self.dims);
        let offsets = |parties: &[usize]| -> Vec<usize> {
            let sub: Vec<usize> = parties.iter().map(|&p| self.dims[p]).collect();
            (0..total(&sub))
                .map(|f| tensor::unravel(f, &sub).iter().zip(parties).map(|(&i, &p)| i * st[p]).sum())
                .collect()
        };
        let ko = offsets(&keep);
        let dropped: Vec<usize> = (0..self.parties()).filter(|p| discard.contains(p)).collect();
        let co = offsets(&dropped);
        let n = ko.len();
        let out = CMatrix::from_fn(n, n, |a, b| co.iter().map(|&c| self.matrix[(ko[a] + c, ko[b] + c)]).sum());
        let dims = keep.iter().map(|&p| self.dims[p]).collect();
        Self::new(dims, out)
    }

    /// PSD square root.
    pub fn sqrt(&self) -> CMatrix {
        hermitian_eig(&self.matrix).map(|e| e.reconstruct(|l| l.max(0.0).sqrt())).unwrap_or_else(|_| self.matrix.clone())
    }
}

fn check_party_set(parties: &[usize], k: usize) -> Result<()> {
    for (i, &p) in parties.iter().enumerate() {
        if p >= k {
            return Err(Error::InvalidSplit(format!("party {p} out of range for {k} parties")));
        }
        if parties[..i].contains(&p) {
            return Err(Error::InvalidSplit(format!("party {p} listed twice")));
        }
    }
    Ok(())
}

/// A nonnegative tensor summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalDistribution {
    dims: Vec<usize>,
    probs: Vec<f64>,
    renormalized: bool,
}

impl ClassicalDistribution {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let d = check_dims(&dims)?;
        if probs.len() != d {
            return Err(Error::Shape(format!("{} probabilities for total size {d}", probs.len())));
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::NegativeProbability { index, value });
        }
        let sum: f64 = probs.iter().sum();
        let deviation = (sum - 1.0).abs();
        if deviation > tol::NORM {
            return Err(Error::NotNormalized { deviation });
        }
        let mut probs = probs;
        if deviation > 0.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self { dims, probs, renormalized: deviation > tol::RENORM_FLAG })
    }

    /// Clips entries below zero and divides by the sum.
    pub fn normalized(dims: Vec<usize>, mut values: Vec<f64>) -> Result<Self> {
        values.iter_mut().for_each(|v| *v = v.max(0.0));
        let sum: f64 = values.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::NotNormalized { deviation: 1.0 });
        }
        values.iter_mut().for_each(|v| *v /= sum);
        Self::new(dims, values)
    }

    pub fn point_mass(dims: Vec<usize>, index: &[usize]) -> Result<Self> {
        let d = check_dims(&dims)?;
        let mut probs = vec![0.0; d];
        probs[tensor::ravel(index, &dims)] = 1.0;
        Self::new(dims, probs)
    }

    pub fn uniform(dims: Vec<usize>) -> Result<Self> {
        let d = check_dims(&dims)?;
        Self::new(dims, vec![1.0 / d as f64; d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: &[usize]) -> f64 {
        self.probs[tensor::ravel(index, &self.dims)]
    }

    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    /// Real matrix across a bipartition of the parties.
    pub fn flattening(&self, rows: &[usize]) -> nalgebra::DMatrix<f64> {
        let order = tensor::order_with_front(rows, self.parties());
        let (p, _) = tensor::permute(&self.probs, &self.dims, &order);
        let nr: usize = rows.iter().map(|&a| self.dims[a]).product();
        nalgebra::DMatrix::from_row_slice(nr, p.len() / nr, &p)
    }
}

/// A bipartition `(left | right)` of the parties `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartySplit {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl PartySplit {
    pub fn new(left: &[usize], k: usize) -> Result<Self> {
        check_party_set(left, k)?;
        if left.is_empty() || left.len() == k {
            return Err(Error::InvalidSplit(format!("{left:?} does not leave two nonempty sides of {k} parties")));
        }
        let mut left = left.to_vec();
        left.sort_unstable();
        let right = (0..k).filter(|p| !left.contains(p)).collect();
        Ok(Self { left, right })
    }

    /// `{party} | rest`.
    pub fn single(party: usize, k: usize) -> Result<Self> {
        Self::new(&[party], k)
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    pub fn parties(&self) -> usize {
        self.left.len() + self.right.len()
    }

    fn check(&self, k: usize) -> Result<()> {
        if self.parties() != k {
            return Err(Error::InvalidSplit(format!("split over {} parties used on {k}", self.parties())));
        }
        Ok(())
    }

    pub(crate) fn validate_for(&self, dims: &[usize]) -> Result<()> {
        self.check(dims.len())
    }
}

/// `a ⊗ b` with the parties of `a` first.
pub fn tensor_product(a: &PureState, b: &PureState) -> Result<PureState> {
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    check_dims(&dims)?;
    let amps = a.amps.iter().flat_map(|x| b.amps.iter().map(move |y| x * y)).collect();
    PureState::new(dims, amps)
}

/// Traces out `discard`, keeping the other parties in ascending order.
pub fn partial_trace(rho: &DensityOperator, discard: &[usize]) -> Result<DensityOperator> {
    rho.partial_trace(discard)
}

/// `F(ρ, σ) = tr √(√σ ρ √σ)`, clipped to `[0, 1]`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.matrix.nrows() != sigma.matrix.nrows() {
        return Err(Error::DimensionMismatch { expected: rho.dims.clone(), found: sigma.dims.clone() });
    }
    let s = sigma.sqrt();
    let inner = &s * &rho.matrix * &s;
    let inner = (&inner + inner.adjoint()).scale(0.5);
    let f: f64 = hermitian_eig(&inner)?.values.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Bhattacharyya coefficient `Σ_x √(P(x) Q(x))`.
pub fn classical_fidelity(p: &ClassicalDistribution, q: &ClassicalDistribution) -> Result<f64> {
    if p.dims != q.dims {
        return Err(Error::DimensionMismatch { expected: p.dims.clone(), found: q.dims.clone() });
    }
    let f: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `Σ_x P(x) |x⟩⟨x|`.
pub fn embed_classical(p: &ClassicalDistribution) -> DensityOperator {
    let diag = nalgebra::DVector::from_iterator(p.probs.len(), p.probs.iter().map(|&x| C64::new(x, 0.0)));
    DensityOperator::from_parts(p.dims.clone(), CMatrix::from_diagonal(&diag))
}

/// Outcome of a purification check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurificationCheck {
    pub holds: bool,
    /// Max entrywise deviation between the reduced state and the target.
    pub residual: f64,
}

/// Whether tracing every party of `psi` outside `kept` leaves `rho`.
/// `kept` lists the parties of `psi` that carry the parties of `rho`, in order.
pub fn is_purification(psi: &PureState, rho: &DensityOperator, kept: &[usize]) -> Result<PurificationCheck> {
    check_party_set(kept, psi.parties())?;
    let kept_dims: Vec<usize> = kept.iter().map(|&p| psi.dims[p]).collect();
    if kept_dims != rho.dims {
        return Err(Error::DimensionMismatch { expected: rho.dims.clone(), found: kept_dims });
    }
    let reduced = psi.reduced(kept)?;
    let residual = max_abs_diff(&reduced.matrix, &rho.matrix);
    Ok(PurificationCheck { holds: residual <= tol::RECON, residual })
}
