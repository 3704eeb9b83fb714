//! Random states and operators for property sweeps and benchmarks.
//!
//! Pure states are Haar distributed (normalized complex Gaussian vectors),
//! unitaries come from the QR decomposition of a Ginibre matrix with the
//! phase of `R`'s diagonal removed.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::states::{DensityOperator, PureState};
use crate::{tensor, CMatrix, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> PureState {
    let amps = (0..tensor::total(dims)).map(|_| gaussian(rng)).collect();
    PureState::from_unnormalized(dims.to_vec(), amps).expect("gaussian vector is nonzero")
}

/// Density operator of rank at most `rank`, `G G† / tr(G G†)` for a Ginibre `G`.
pub fn random_density<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(tensor::total(dims), rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = m.trace();
    DensityOperator::new(dims.to_vec(), m / t).expect("Wishart matrix is a valid state")
}

pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
    }
    q
}

/// A purification of `rho` on its parties plus one extra register of
/// dimension `ancilla`, randomized by a Haar unitary on the extra register.
/// Requires `ancilla >= rank(rho)`.
pub fn random_purification<R: Rng + ?Sized>(rho: &DensityOperator, ancilla: usize, rng: &mut R) -> PureState {
    let eig = crate::spectral::hermitian_eig(rho.matrix()).expect("density operators are Hermitian");
    let d = rho.matrix().nrows();
    let u = random_unitary(ancilla, rng);
    let mut m = CMatrix::zeros(d, ancilla);
    for (i, &l) in eig.values.iter().enumerate().filter(|(_, &l)| l > 0.0) {
        assert!(i < ancilla, "ancilla too small for the rank of rho");
        m += eig.vectors.column(i) * u.column(i).transpose() * C64::new(l.sqrt(), 0.0);
    }
    let mut dims = rho.dims().to_vec();
    dims.push(ancilla);
    let amps = m.transpose().iter().copied().collect();
    PureState::from_unnormalized(dims, amps).expect("purification is nonzero")
}
