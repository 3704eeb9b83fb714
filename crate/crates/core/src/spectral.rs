//! Eigen and Schmidt machinery: decompositions, exact and approximate ranks,
//! the per-party support decomposition of a multipartite pure state, and the
//! two constructive purification facts (connecting unitary, Uhlmann partner).
//!
//! Degenerate eigenvalues and Schmidt coefficients keep the order the
//! underlying solver produced them in, so vectors inside a degenerate block
//! (and everything built from them) are unique only up to a unitary on that
//! block.

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::states::{is_purification, max_abs_diff, DensityOperator, PartySplit, PureState};
use crate::{tensor, tol, CMatrix, C64};

/// Eigenpairs of a Hermitian matrix, eigenvalues nonincreasing.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl Eigen {
    /// Number of eigenvalues above `tol::RANK` times the largest one.
    pub fn rank(&self) -> usize {
        count_above_relative(&self.values)
    }

    /// `V f(Λ) V†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&l| C64::new(f(l), 0.0)));
        &self.vectors * CMatrix::from_diagonal(&d) * self.vectors.adjoint()
    }
}

fn count_above_relative(sorted_desc: &[f64]) -> usize {
    match sorted_desc.first() {
        Some(&top) if top > 0.0 => sorted_desc.iter().take_while(|&&v| v > tol::RANK * top).count(),
        _ => 0,
    }
}

/// Rotates a vector so its largest-magnitude entry (first one on ties) is
/// real and positive; returns the applied phase factor.
fn fix_phase(v: &mut [C64]) -> C64 {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let Some(pivot) = v.iter().find(|z| z.norm() >= max * (1.0 - 1e-12)).copied() else {
        return C64::new(1.0, 0.0);
    };
    if pivot.norm() == 0.0 {
        return C64::new(1.0, 0.0);
    }
    let phase = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|z| *z *= phase);
    phase
}

fn fix_column_phase(m: &mut CMatrix, col: usize) -> C64 {
    let mut v: Vec<C64> = m.column(col).iter().copied().collect();
    let phase = fix_phase(&mut v);
    m.column_mut(col).iter_mut().zip(v).for_each(|(dst, src)| *dst = src);
    phase
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are sorted
/// nonincreasing (stable with respect to solver order) and each eigenvector
/// has its largest entry made real positive.
pub fn hermitian_eig(m: &CMatrix) -> Result<Eigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let adj = m.adjoint();
    let deviation = max_abs_diff(m, &adj);
    if deviation > 1e-8 {
        return Err(Error::NotHermitian { deviation });
    }
    let h = (m + adj).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    for c in 0..n {
        fix_column_phase(&mut vectors, c);
    }
    Ok(Eigen { values, vectors })
}

/// Singular values (nonincreasing) with matching left and right singular vectors.
struct Svd {
    values: Vec<f64>,
    u: CMatrix,
    v_t: CMatrix,
}

fn svd(m: &CMatrix) -> Svd {
    let s = m.clone().svd(true, true);
    let (u, v_t) = (s.u.expect("requested U"), s.v_t.expect("requested V^T"));
    let n = s.singular_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.singular_values[b].total_cmp(&s.singular_values[a]));
    Svd {
        values: order.iter().map(|&i| s.singular_values[i]).collect(),
        u: CMatrix::from_fn(u.nrows(), n, |r, c| u[(r, order[c])]),
        v_t: CMatrix::from_fn(n, v_t.ncols(), |r, c| v_t[(order[r], c)]),
    }
}

fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `|ψ⟩ = Σ_i s_i |v_i⟩ ⊗ |w_i⟩` across a bipartition.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Nonincreasing positive coefficients `s_i = √p_i`.
    pub coefficients: Vec<f64>,
    /// Left vectors as columns; rows index the left parties in ascending order.
    pub left: CMatrix,
    /// Right vectors as columns; rows index the right parties in ascending order.
    pub right: CMatrix,
    pub split: PartySplit,
    dims: Vec<usize>,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// Squared coefficients `p_i`.
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|s| s * s).collect()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `Σ_i s_i |v_i⟩|w_i⟩` with the first `terms` coefficients, unnormalized
    /// amplitudes in the source party order.
    pub fn partial_sum(&self, terms: usize) -> Vec<C64> {
        let mut m = CMatrix::zeros(self.left.nrows(), self.right.nrows());
        for i in 0..terms.min(self.rank()) {
            m += self.left.column(i) * self.right.column(i).transpose() * C64::new(self.coefficients[i], 0.0);
        }
        tensor::unflatten(&m, &self.dims, self.split.left())
    }

    pub fn reconstruct(&self) -> Result<PureState> {
        PureState::new(self.dims.clone(), self.partial_sum(self.rank()))
    }
}

/// Schmidt decomposition via the SVD of the coefficient matrix across `split`.
/// Coefficients below `tol::RANK` times the largest are dropped.
pub fn schmidt(psi: &PureState, split: &PartySplit) -> Result<SchmidtDecomposition> {
    split.validate_for(psi.dims())?;
    let d = svd(&psi.matrix(split));
    let n = count_above_relative(&d.values);
    let mut left = d.u.columns(0, n).into_owned();
    let mut right = d.v_t.rows(0, n).transpose();
    for i in 0..n {
        let phase = fix_column_phase(&mut left, i);
        right.column_mut(i).iter_mut().for_each(|z| *z /= phase);
    }
    Ok(SchmidtDecomposition {
        coefficients: d.values[..n].to_vec(),
        left,
        right,
        split: split.clone(),
        dims: psi.dims().to_vec(),
    })
}

/// Number of Schmidt coefficients above `tol::RANK` times the largest.
pub fn schmidt_rank(psi: &PureState, split: &PartySplit) -> Result<usize> {
    split.validate_for(psi.dims())?;
    Ok(count_above_relative(&singular_values(&psi.matrix(split))))
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value })
    }
}

/// Smallest `r` whose leading weights reach `target` (with slack), capped at
/// the number of weights.
pub(crate) fn mass_cutoff(weights_desc: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights_desc.iter().enumerate() {
        acc += w;
        if acc >= target - tol::CUTOFF_SLACK {
            return i + 1;
        }
    }
    weights_desc.len()
}

/// ε-approximate Schmidt rank: the smallest `r` with `Σ_{i≤r} p_i ≥ (1-ε)²`.
pub fn approx_schmidt_rank(psi: &PureState, split: &PartySplit, eps: f64) -> Result<usize> {
    check_open_unit("eps", eps)?;
    split.validate_for(psi.dims())?;
    let sv = singular_values(&psi.matrix(split));
    let n = count_above_relative(&sv);
    let weights: Vec<f64> = sv[..n].iter().map(|s| s * s).collect();
    Ok(mass_cutoff(&weights, (1.0 - eps).powi(2)))
}

/// δ-approximate rank of a matrix with unit Frobenius norm: the smallest `r`
/// whose leading squared singular values sum to at least `1 - δ`.
pub fn approx_matrix_rank(a: &CMatrix, delta: f64) -> Result<usize> {
    let norm = a.norm();
    if (norm - 1.0).abs() > tol::NORM {
        return Err(Error::Unnormalized { norm });
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::OutOfRange { name: "delta", value: delta });
    }
    let sv = singular_values(a);
    let n = count_above_relative(&sv);
    let weights: Vec<f64> = sv[..n].iter().map(|s| s * s).collect();
    Ok(mass_cutoff(&weights, 1.0 - delta))
}

/// Rank of every single-party marginal.
pub fn marginal_ranks(psi: &PureState) -> Vec<usize> {
    (0..psi.parties())
        .map(|p| count_above_relative(&singular_values(&tensor::flatten(psi.amplitudes(), psi.dims(), &[p]))))
        .collect()
}

/// `|ψ⟩ = Σ a_{j_1…j_k} |α_{1 j_1}⟩ ⊗ … ⊗ |α_{k j_k}⟩` over the supports of the marginals.
#[derive(Debug, Clone)]
pub struct SupportDecomposition {
    dims: Vec<usize>,
    /// Per party, the eigenvectors of the marginal with nonzero eigenvalue
    /// (columns, eigenvalues nonincreasing).
    pub bases: Vec<CMatrix>,
    /// Per party, the nonzero eigenvalues of the marginal.
    pub spectra: Vec<Vec<f64>>,
    /// Coefficient tensor `a`, row-major over `shape()`.
    pub coefficients: Vec<C64>,
}

impl SupportDecomposition {
    /// `[r_1, …, r_k]`.
    pub fn shape(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Maps a coefficient tensor over `shape()` back into the physical space.
    pub fn lift(&self, coefficients: &[C64]) -> Vec<C64> {
        let mut data = coefficients.to_vec();
        let mut dims = self.shape();
        for (p, basis) in self.bases.iter().enumerate() {
            (data, dims) = tensor::apply_local(&data, &dims, p, basis);
        }
        data
    }

    pub fn reconstruct(&self) -> Result<PureState> {
        PureState::new(self.dims.clone(), self.lift(&self.coefficients))
    }
}

pub fn support_decomposition(psi: &PureState) -> SupportDecomposition {
    let mut bases = Vec::with_capacity(psi.parties());
    let mut spectra = Vec::with_capacity(psi.parties());
    for p in 0..psi.parties() {
        let d = svd(&tensor::flatten(psi.amplitudes(), psi.dims(), &[p]));
        let r = count_above_relative(&d.values);
        let mut basis = d.u.columns(0, r).into_owned();
        for c in 0..r {
            fix_column_phase(&mut basis, c);
        }
        spectra.push(d.values[..r].iter().map(|s| s * s).collect());
        bases.push(basis);
    }
    let mut data = psi.amplitudes().to_vec();
    let mut dims = psi.dims().to_vec();
    for (p, basis) in bases.iter().enumerate() {
        (data, dims) = tensor::apply_local(&data, &dims, p, &basis.adjoint());
    }
    SupportDecomposition { dims: psi.dims().to_vec(), bases, spectra, coefficients: data }
}

/// A unitary `U` on the right side of `split` with `(I ⊗ U)|ψ⟩ = |φ⟩`, for
/// states with equal left marginals.
///
/// `U` solves the unitary Procrustes problem `min ‖M_ψ Uᵀ - M_φ‖_F`, whose
/// optimum is zero exactly when the left marginals agree.
pub fn connecting_unitary(psi: &PureState, phi: &PureState, split: &PartySplit) -> Result<CMatrix> {
    if psi.dims() != phi.dims() {
        return Err(Error::DimensionMismatch { expected: psi.dims().to_vec(), found: phi.dims().to_vec() });
    }
    split.validate_for(psi.dims())?;
    let (mp, mf) = (psi.matrix(split), phi.matrix(split));
    let residual = max_abs_diff(&(&mp * mp.adjoint()), &(&mf * mf.adjoint()));
    if residual > tol::RECON {
        return Err(Error::NotLocallyConnected { residual });
    }
    let d = svd(&(mp.adjoint() * mf));
    let x = &d.u * &d.v_t;
    Ok(x.transpose())
}

/// Applies `u` to the right side of `split`.
pub fn apply_right(psi: &PureState, split: &PartySplit, u: &CMatrix) -> Result<PureState> {
    let m = psi.matrix(split);
    if u.ncols() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: vec![m.ncols()], found: vec![u.ncols()] });
    }
    PureState::from_matrix(psi.dims().to_vec(), split, &(m * u.transpose()))
}

/// A purification `|φ⟩` of `sigma` in the same space as `psi` (which purifies
/// `rho` on the left side) with `|⟨φ|ψ⟩| = F(ρ, σ)`.
///
/// With `M` the coefficient matrix of `psi` and `√σ M = U S V†`, the partner
/// is `√σ U V†`.
pub fn uhlmann_partner(
    psi: &PureState,
    rho: &DensityOperator,
    sigma: &DensityOperator,
    split: &PartySplit,
) -> Result<PureState> {
    split.validate_for(psi.dims())?;
    let check = is_purification(psi, rho, split.left())?;
    if !check.holds {
        return Err(Error::NotPurification { residual: check.residual });
    }
    if sigma.dims() != rho.dims() {
        return Err(Error::DimensionMismatch { expected: rho.dims().to_vec(), found: sigma.dims().to_vec() });
    }
    let m = psi.matrix(split);
    if m.ncols() < m.nrows() {
        return Err(Error::Shape(format!(
            "right side has dimension {} smaller than the left side {}",
            m.ncols(),
            m.nrows()
        )));
    }
    let root = sigma.sqrt();
    let d = svd(&(&root * m));
    let w = &d.u * &d.v_t;
    PureState::from_matrix(psi.dims().to_vec(), split, &(root * w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use crate::states::fidelity;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn epr() -> PureState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(vec![2, 2], vec![c(h), c(0.0), c(0.0), c(h)]).unwrap()
    }

    fn ghz3() -> PureState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = vec![c(0.0); 8];
        a[0] = c(h);
        a[7] = c(h);
        PureState::new(vec![2, 2, 2], a).unwrap()
    }

    fn skewed() -> PureState {
        PureState::new(vec![2, 2], vec![c(0.9f64.sqrt()), c(0.0), c(0.0), c(0.1f64.sqrt())]).unwrap()
    }

    fn split(left: &[usize], k: usize) -> PartySplit {
        PartySplit::new(left, k).unwrap()
    }

    #[test]
    fn hermitian_eig_examples() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(2.0)]);
        let e = hermitian_eig(&m).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert_abs_diff_eq!(e.vectors[(1, 0)].re, 1.0);

        let e = hermitian_eig(&CMatrix::identity(2, 2).scale(0.5)).unwrap();
        assert_eq!(e.values, vec![0.5, 0.5]);

        let marginal = ghz3().reduced(&[0]).unwrap();
        let e = hermitian_eig(marginal.matrix()).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 0.5, epsilon = 1e-14);

        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!(matches!(hermitian_eig(&bad), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn hermitian_eig_satisfies_eigen_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rho = sample::random_density(&[3, 2], 6, &mut rng);
            let m = rho.matrix();
            let e = hermitian_eig(m).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            for (i, &l) in e.values.iter().enumerate() {
                let v = e.vectors.column(i);
                let r = (m * v - v * C64::new(l, 0.0)).norm();
                assert!(r < 1e-8 * m.norm());
                let (_, big) = v.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
                assert!(big.im.abs() < 1e-12 && big.re > 0.0);
            }
        }
    }

    #[test]
    fn schmidt_examples() {
        let prod = PureState::basis(vec![2, 3], &[1, 2]).unwrap();
        let s = schmidt(&prod, &split(&[0], 2)).unwrap();
        assert_eq!(s.coefficients.len(), 1);
        assert_abs_diff_eq!(s.coefficients[0], 1.0, epsilon = 1e-14);

        let s = schmidt(&epr(), &split(&[0], 2)).unwrap();
        assert_eq!(s.rank(), 2);
        for &x in &s.coefficients {
            assert_abs_diff_eq!(x, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        }

        let s = schmidt(&skewed(), &split(&[0], 2)).unwrap();
        assert_abs_diff_eq!(s.coefficients[0], 0.9f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.coefficients[1], 0.1f64.sqrt(), epsilon = 1e-14);
        let back = s.reconstruct().unwrap();
        assert!(back.inner(&skewed()).unwrap().norm() > 1.0 - 1e-12);
    }

    #[test]
    fn schmidt_reconstructs_random_states_with_noncontiguous_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let psi = sample::random_pure(&[2, 3, 2], &mut rng);
            let s = schmidt(&psi, &split(&[0, 2], 3)).unwrap();
            let back = s.reconstruct().unwrap();
            let dev = psi.amplitudes().iter().zip(back.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-8);
            let gram_l = s.left.adjoint() * &s.left;
            let gram_r = s.right.adjoint() * &s.right;
            let id = CMatrix::identity(s.rank(), s.rank());
            assert!(max_abs_diff(&gram_l, &id) < 1e-8);
            assert!(max_abs_diff(&gram_r, &id) < 1e-8);
            assert!(s.coefficients.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn schmidt_rank_examples() {
        let prod = PureState::basis(vec![2, 2], &[0, 1]).unwrap();
        assert_eq!(schmidt_rank(&prod, &split(&[0], 2)).unwrap(), 1);
        assert_eq!(schmidt_rank(&epr(), &split(&[0], 2)).unwrap(), 2);
        assert_eq!(schmidt_rank(&ghz3(), &split(&[0], 3)).unwrap(), 2);
        assert!(schmidt_rank(&ghz3(), &split(&[0], 2)).is_err());
    }

    #[test]
    fn approx_schmidt_rank_examples() {
        let s = split(&[0], 2);
        assert_eq!(approx_schmidt_rank(&skewed(), &s, 1e-9).unwrap(), 2);
        assert_eq!(approx_schmidt_rank(&epr(), &s, 1e-9).unwrap(), 2);
        assert_eq!(approx_schmidt_rank(&skewed(), &s, 0.04).unwrap(), 2);
        assert_eq!(approx_schmidt_rank(&skewed(), &s, 0.06).unwrap(), 1);
        assert!(matches!(approx_schmidt_rank(&skewed(), &s, 0.0), Err(Error::OutOfRange { .. })));
        assert!(approx_schmidt_rank(&skewed(), &s, 1.0).is_err());
    }

    #[test]
    fn approx_schmidt_rank_includes_exact_boundary() {
        // p_1 = 0.81 = (1 - 0.1)^2 exactly
        let psi = PureState::new(vec![2, 2], vec![c(0.9), c(0.0), c(0.0), c(0.19f64.sqrt())]).unwrap();
        assert_eq!(approx_schmidt_rank(&psi, &split(&[0], 2), 0.1).unwrap(), 1);
    }

    #[test]
    fn approx_matrix_rank_examples() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.9f64.sqrt()), c(0.0), c(0.0), c(0.1f64.sqrt())]);
        assert_eq!(approx_matrix_rank(&a, 0.0).unwrap(), 2);
        assert_eq!(approx_matrix_rank(&a, 0.1).unwrap(), 1);
        assert_eq!(approx_matrix_rank(&a, 0.05).unwrap(), 2);
        let r1 = CMatrix::from_row_slice(2, 2, &[c(0.6), c(0.8), c(0.0), c(0.0)]);
        assert_eq!(approx_matrix_rank(&r1, 0.0).unwrap(), 1);
        assert!(matches!(approx_matrix_rank(&a.scale(2.0), 0.1), Err(Error::Unnormalized { .. })));
        assert!(approx_matrix_rank(&a, 1.0).is_err());
    }

    #[test]
    fn marginal_rank_examples() {
        assert_eq!(marginal_ranks(&ghz3()), vec![2, 2, 2]);
        let prod = PureState::basis(vec![3, 2, 4], &[1, 0, 3]).unwrap();
        assert_eq!(marginal_ranks(&prod), vec![1, 1, 1]);
        let single = PureState::basis(vec![3], &[2]).unwrap();
        assert_eq!(marginal_ranks(&single), vec![1]);
    }

    #[test]
    fn support_decomposition_examples() {
        let prod = PureState::basis(vec![2, 3], &[1, 2]).unwrap();
        let s = support_decomposition(&prod);
        assert_eq!(s.shape(), vec![1, 1]);
        assert_abs_diff_eq!(s.coefficients[0].norm(), 1.0, epsilon = 1e-14);

        let s = support_decomposition(&ghz3());
        assert_eq!(s.shape(), vec![2, 2, 2]);
        let nz: Vec<f64> = s.coefficients.iter().map(|a| a.norm()).filter(|&m| m > 1e-12).collect();
        assert_eq!(nz.len(), 2);
        nz.iter().for_each(|&m| assert_abs_diff_eq!(m, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12));

        let s = support_decomposition(&epr());
        let mags: Vec<f64> = s.coefficients.iter().map(|a| a.norm()).collect();
        // degenerate spectrum: the coefficient matrix is 1/√2 times a unitary
        let m = CMatrix::from_row_slice(2, 2, &s.coefficients);
        assert!(max_abs_diff(&(&m * m.adjoint()), &CMatrix::identity(2, 2).scale(0.5)) < 1e-12);
        assert_abs_diff_eq!(mags.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn connecting_unitary_examples() {
        let s = split(&[0], 2);
        let u = connecting_unitary(&epr(), &epr(), &s).unwrap();
        let back = apply_right(&epr(), &s, &u).unwrap();
        assert!(back.inner(&epr()).unwrap().re > 1.0 - 1e-12);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let flipped = PureState::new(vec![2, 2], vec![c(0.0), c(h), c(h), c(0.0)]).unwrap();
        let u = connecting_unitary(&epr(), &flipped, &s).unwrap();
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        assert!(max_abs_diff(&u, &x) < 1e-12);

        let other = PureState::basis(vec![2, 2], &[0, 0]).unwrap();
        assert!(matches!(connecting_unitary(&epr(), &other, &s), Err(Error::NotLocallyConnected { .. })));
    }

    #[test]
    fn connecting_unitary_recovers_random_local_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dims in [vec![2, 2], vec![2, 3, 2], vec![3, 2]] {
            let k = dims.len();
            let s = split(&[0], k);
            let psi = sample::random_pure(&dims, &mut rng);
            let dr: usize = dims[1..].iter().product();
            let v = sample::random_unitary(dr, &mut rng);
            let phi = apply_right(&psi, &s, &v).unwrap();
            let u = connecting_unitary(&psi, &phi, &s).unwrap();
            assert!(max_abs_diff(&(u.adjoint() * &u), &CMatrix::identity(dr, dr)) < 1e-8);
            let got = apply_right(&psi, &s, &u).unwrap();
            let dev = got.amplitudes().iter().zip(phi.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-8, "{dev}");
        }
    }

    #[test]
    fn uhlmann_examples() {
        let s = split(&[0], 2);
        let rho = epr().reduced(&[0]).unwrap();
        let phi = uhlmann_partner(&epr(), &rho, &rho, &s).unwrap();
        assert_abs_diff_eq!(phi.inner(&epr()).unwrap().norm(), 1.0, epsilon = 1e-12);

        let psi = PureState::basis(vec![2, 2], &[0, 0]).unwrap();
        let rho = psi.reduced(&[0]).unwrap();
        let sigma = PureState::basis(vec![2], &[1]).unwrap().density();
        let phi = uhlmann_partner(&psi, &rho, &sigma, &s).unwrap();
        assert_abs_diff_eq!(phi.inner(&psi).unwrap().norm(), 0.0, epsilon = 1e-12);
        assert!(is_purification(&phi, &sigma, &[0]).unwrap().holds);

        let wrong = PureState::basis(vec![2], &[1]).unwrap().density();
        assert!(matches!(uhlmann_partner(&psi, &wrong, &sigma, &s), Err(Error::NotPurification { .. })));
    }

    #[test]
    fn uhlmann_overlap_matches_fidelity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = split(&[0], 2);
        for _ in 0..20 {
            let rho = sample::random_density(&[2], 2, &mut rng);
            let sigma = sample::random_density(&[2], 2, &mut rng);
            let psi = sample::random_purification(&rho, 2, &mut rng);
            let phi = uhlmann_partner(&psi, &rho, &sigma, &s).unwrap();
            assert!(is_purification(&phi, &sigma, &[0]).unwrap().holds);
            let f = fidelity(&rho, &sigma).unwrap();
            assert_abs_diff_eq!(phi.inner(&psi).unwrap().norm(), f, epsilon = 1e-8);
        }
    }

    #[test]
    fn squared_schmidt_coefficients_are_marginal_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let psi = sample::random_pure(&[3, 2, 2], &mut rng);
            let s = schmidt(&psi, &split(&[1], 3)).unwrap();
            let e = hermitian_eig(psi.reduced(&[1]).unwrap().matrix()).unwrap();
            for (w, l) in s.weights().iter().zip(&e.values) {
                assert_abs_diff_eq!(w, l, epsilon = 1e-8);
            }
        }
    }
}
