//! PSD factorizations of nonnegative tensors.
//!
//! A factorization assigns an `r × r` PSD matrix `C^(t)_x` to every party `t`
//! and symbol `x`, and realizes the tensor
//! `P(x_1, …, x_k) = Σ_{i,j} C^(1)_{x_1}(i,j) ⋯ C^(k)_{x_k}(i,j)`.
//!
//! Upper bounds on the smallest such `r` come from a heuristic alternating
//! fit plus an always-exact diagonal construction; lower bounds come from
//! flattening ranks. A failed fit never certifies anything.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::spectral::hermitian_eig;
use crate::states::{classical_fidelity, max_abs_diff, ClassicalDistribution};
use crate::{tensor, tol, CMatrix, C64};

/// `r × r` PSD factors per party and symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactorization {
    r: usize,
    factors: Vec<Vec<CMatrix>>,
}

impl PsdFactorization {
    /// Validates shapes, Hermiticity and positivity (both within `1e-10`).
    pub fn new(factors: Vec<Vec<CMatrix>>) -> Result<Self> {
        let r = factors
            .first()
            .and_then(|p| p.first())
            .map(|m| m.nrows())
            .ok_or_else(|| Error::Shape("factorization needs at least one party and symbol".into()))?;
        if r == 0 {
            return Err(Error::Shape("factor size must be positive".into()));
        }
        for (t, party) in factors.iter().enumerate() {
            if party.is_empty() {
                return Err(Error::Shape(format!("party {t} has no symbols")));
            }
            for m in party {
                if m.nrows() != r || m.ncols() != r {
                    return Err(Error::Shape(format!("party {t} has a {}x{} factor, expected {r}x{r}", m.nrows(), m.ncols())));
                }
                let deviation = max_abs_diff(m, &m.adjoint());
                if deviation > tol::HERMITIAN {
                    return Err(Error::NotHermitian { deviation });
                }
                let min = hermitian_eig(m)?.values.last().copied().unwrap_or(0.0);
                if min < -tol::PSD {
                    return Err(Error::NotPsd { min_eigenvalue: min });
                }
            }
        }
        let total = factors.iter().map(|p| p.len()).try_fold(1usize, |a, d| a.checked_mul(d));
        match total {
            Some(d) if d <= tol::MAX_DIM => Ok(Self { r, factors }),
            _ => Err(Error::TooLarge { dim: total.unwrap_or(usize::MAX), cap: tol::MAX_DIM }),
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn parties(&self) -> usize {
        self.factors.len()
    }

    /// Alphabet sizes.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|p| p.len()).collect()
    }

    pub fn factors(&self) -> &[Vec<CMatrix>] {
        &self.factors
    }

    pub fn factor(&self, party: usize, symbol: usize) -> &CMatrix {
        &self.factors[party][symbol]
    }

    /// `Σ_{i,j} Π_t C^(t)_{x_t}(i,j)` before taking the real part.
    pub fn hadamard_sum(&self, index: &[usize]) -> C64 {
        let mut h = self.factors[0][index[0]].clone();
        for (t, &x) in index.iter().enumerate().skip(1) {
            h.component_mul_assign(&self.factors[t][x]);
        }
        h.sum()
    }

    /// The realized tensor, row-major over `dims()`.
    pub fn evaluate(&self) -> Vec<f64> {
        let dims = self.dims();
        (0..tensor::total(&dims)).map(|f| self.hadamard_sum(&tensor::unravel(f, &dims)).re).collect()
    }

    fn scale_party(&mut self, party: usize, s: f64) {
        self.factors[party].iter_mut().for_each(|m| *m *= C64::new(s, 0.0));
    }
}

/// Frobenius distance between the realized tensor and `p`.
pub fn residual(f: &PsdFactorization, p: &ClassicalDistribution) -> Result<f64> {
    if f.dims() != p.dims() {
        return Err(Error::DimensionMismatch { expected: p.dims().to_vec(), found: f.dims() });
    }
    Ok(f.evaluate().iter().zip(p.probs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// Options of the alternating fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop when a sweep improves the residual by less than this fraction.
    pub convergence: f64,
    /// Residual at or below which a fit counts as exact.
    pub residual_target: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 16, max_iters: 500, seed: 0, convergence: 1e-9, residual_target: 1e-7 }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::OutOfRange { name: "restarts", value: 0.0 });
        }
        if self.max_iters == 0 {
            return Err(Error::OutOfRange { name: "max_iters", value: 0.0 });
        }
        if !(self.convergence > 0.0) {
            return Err(Error::OutOfRange { name: "convergence", value: self.convergence });
        }
        if !(self.residual_target > 0.0) {
            return Err(Error::OutOfRange { name: "residual_target", value: self.residual_target });
        }
        Ok(())
    }
}

/// Result of [`fit`].
#[derive(Debug, Clone)]
pub struct Fit {
    pub factorization: PsdFactorization,
    /// Exact residual of `factorization`.
    pub residual: f64,
    /// Index of the winning restart.
    pub restart: usize,
    pub iterations: usize,
}

fn project_psd(m: &CMatrix) -> CMatrix {
    let h = (m + m.adjoint()).scale(0.5);
    match hermitian_eig(&h) {
        Ok(e) => {
            let p = e.reconstruct(|l| l.max(0.0));
            (&p + p.adjoint()).scale(0.5)
        }
        Err(_) => CMatrix::zeros(m.nrows(), m.ncols()),
    }
}

/// Orthonormal real coordinates of a Hermitian matrix: the diagonal, then
/// `√2 Re`, `√2 Im` of each upper entry. Euclidean distance in coordinates is
/// Frobenius distance, so eigenvalue clipping is the projection onto the cone.
fn hermitian_coords(c: &CMatrix) -> Vec<f64> {
    let r = c.nrows();
    let mut v: Vec<f64> = (0..r).map(|i| c[(i, i)].re).collect();
    for i in 0..r {
        for j in i + 1..r {
            v.push(SQRT_2 * c[(i, j)].re);
            v.push(SQRT_2 * c[(i, j)].im);
        }
    }
    v
}

fn from_coords(v: &[f64], r: usize) -> CMatrix {
    let mut c = CMatrix::zeros(r, r);
    for i in 0..r {
        c[(i, i)] = C64::new(v[i], 0.0);
    }
    let mut k = r;
    for i in 0..r {
        for j in i + 1..r {
            c[(i, j)] = C64::new(v[k], v[k + 1]) / SQRT_2;
            c[(j, i)] = c[(i, j)].conj();
            k += 2;
        }
    }
    c
}

/// Coefficients of `Σ_ij C_ij W_ij` in the coordinates of `C`.
fn features(w: &CMatrix, out: &mut [f64]) {
    let r = w.nrows();
    for i in 0..r {
        out[i] = w[(i, i)].re;
    }
    let mut k = r;
    for i in 0..r {
        for j in i + 1..r {
            out[k] = SQRT_2 * w[(i, j)].re;
            out[k + 1] = -SQRT_2 * w[(i, j)].im;
            k += 2;
        }
    }
}

/// Least-squares update of every factor of `party` with the others fixed,
/// followed by projection onto the PSD cone.
fn update_party(f: &mut PsdFactorization, p: &ClassicalDistribution, party: usize) {
    let dims = f.dims();
    let r = f.r;
    let others: Vec<usize> = (0..dims.len()).filter(|&t| t != party).collect();
    let other_dims: Vec<usize> = others.iter().map(|&t| dims[t]).collect();
    let rows = tensor::total(&other_dims);
    let n = r * r;

    let mut design = DMatrix::<f64>::zeros(rows, n);
    let mut row = vec![0.0; n];
    for y in 0..rows {
        let idx = tensor::unravel(y, &other_dims);
        let mut w = CMatrix::from_element(r, r, C64::new(1.0, 0.0));
        for (&t, &x) in others.iter().zip(&idx) {
            w.component_mul_assign(&f.factors[t][x]);
        }
        features(&w, &mut row);
        design.row_mut(y).iter_mut().zip(&row).for_each(|(d, s)| *d = *s);
    }
    let svd = design.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12;

    let mut full = vec![0; dims.len()];
    for x in 0..dims[party] {
        let current = DMatrix::from_column_slice(n, 1, &hermitian_coords(&f.factors[party][x]));
        let target = DMatrix::from_fn(rows, 1, |y, _| {
            let idx = tensor::unravel(y, &other_dims);
            for (&t, &v) in others.iter().zip(&idx) {
                full[t] = v;
            }
            full[party] = x;
            p.prob(&full)
        });
        let rhs = target - &design * &current;
        let Ok(step) = svd.solve(&rhs, cutoff) else { continue };
        let coords = current + step;
        f.factors[party][x] = project_psd(&from_coords(coords.as_slice(), r));
    }
}

const POLISH_ITERS: usize = 300;
const POLISH_MAX_PARAMS: usize = 4096;

/// Square-root factors `B` with `C = B B†`.
fn psd_sqrt(c: &CMatrix) -> CMatrix {
    hermitian_eig(&(c + c.adjoint()).scale(0.5)).map(|e| e.reconstruct(|l| l.max(0.0).sqrt())).unwrap_or_else(|_| c.clone())
}

fn from_roots(roots: &[Vec<CMatrix>], r: usize) -> PsdFactorization {
    let factors = roots
        .iter()
        .map(|p| {
            p.iter()
                .map(|b| {
                    let c = b * b.adjoint();
                    (&c + c.adjoint()).scale(0.5)
                })
                .collect()
        })
        .collect();
    PsdFactorization { r, factors }
}

/// Jacobian of the realized tensor with respect to the real and imaginary
/// parts of every root. With `M = Wᵀ` the Hadamard product of the other
/// parties' factors, `dP = 2 Re tr(B† M dB)`.
fn root_jacobian(f: &PsdFactorization, roots: &[Vec<CMatrix>]) -> DMatrix<f64> {
    let dims = f.dims();
    let r = f.r;
    let block = 2 * r * r;
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d * block;
            Some(o)
        })
        .collect();
    let params = offsets.last().unwrap() + dims.last().unwrap() * block;
    let n = tensor::total(&dims);
    let mut jac = DMatrix::zeros(n, params);
    for row in 0..n {
        let idx = tensor::unravel(row, &dims);
        for t in 0..dims.len() {
            let mut w = CMatrix::from_element(r, r, C64::new(1.0, 0.0));
            for (s, &x) in idx.iter().enumerate() {
                if s != t {
                    w.component_mul_assign(&f.factors[s][x]);
                }
            }
            let z = w.transpose() * &roots[t][idx[t]];
            let base = offsets[t] + idx[t] * block;
            for (e, v) in z.iter().enumerate() {
                jac[(row, base + 2 * e)] = 2.0 * v.re;
                jac[(row, base + 2 * e + 1)] = 2.0 * v.im;
            }
        }
    }
    jac
}

fn shifted_roots(roots: &[Vec<CMatrix>], delta: &DMatrix<f64>) -> Vec<Vec<CMatrix>> {
    let mut k = 0;
    roots
        .iter()
        .map(|p| {
            p.iter()
                .map(|b| {
                    let mut out = b.clone();
                    for v in out.iter_mut() {
                        *v += C64::new(delta[k], delta[k + 1]);
                        k += 2;
                    }
                    out
                })
                .collect()
        })
        .collect()
}

/// Levenberg–Marquardt refinement in square-root coordinates. Zeros of `P`
/// push exact factorizations onto the boundary of the cone, where alternating
/// sweeps only creep; the factored form stays PSD and converges quickly there.
fn polish(start: &PsdFactorization, p: &ClassicalDistribution, target: f64) -> PsdFactorization {
    let r = start.r;
    let mut roots: Vec<Vec<CMatrix>> = start.factors.iter().map(|ms| ms.iter().map(psd_sqrt).collect()).collect();
    let mut f = from_roots(&roots, r);
    let cost = |f: &PsdFactorization| residual(f, p).expect("shapes agree");
    let mut res = cost(&f);
    if 2 * r * r * start.dims().iter().sum::<usize>() > POLISH_MAX_PARAMS {
        return f;
    }
    let mut lambda: Option<f64> = None;
    for _ in 0..POLISH_ITERS {
        if res <= target * 1e-3 {
            break;
        }
        let jac = root_jacobian(&f, &roots);
        let err = DMatrix::from_iterator(jac.nrows(), 1, f.evaluate().iter().zip(p.probs()).map(|(a, b)| a - b));
        // (JᵀJ + λI)⁻¹Jᵀ = Jᵀ(JJᵀ + λI)⁻¹; the row form is the small system
        let jjt = &jac * jac.transpose();
        let scale = jjt.diagonal().max().max(f64::MIN_POSITIVE);
        let mut lam = lambda.unwrap_or(1e-3 * scale);
        let mut accepted = false;
        while lam <= 1e8 * scale {
            let mut sys = jjt.clone();
            sys.iter_mut().step_by(jjt.nrows() + 1).for_each(|d| *d += lam);
            let Some(chol) = sys.cholesky() else {
                lam *= 4.0;
                continue;
            };
            let delta = -(jac.transpose() * chol.solve(&err));
            let trial_roots = shifted_roots(&roots, &delta);
            let trial = from_roots(&trial_roots, r);
            let trial_res = cost(&trial);
            if trial_res < res {
                roots = trial_roots;
                f = trial;
                res = trial_res;
                lambda = Some(lam / 3.0);
                accepted = true;
                break;
            }
            lam *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    f
}

/// Rescales parties to equal factor magnitude without changing the product.
fn balance(f: &mut PsdFactorization) {
    let k = f.parties();
    let norms: Vec<f64> = f.factors.iter().map(|p| p.iter().map(|m| m.norm()).fold(0.0, f64::max)).collect();
    if norms.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return;
    }
    let g = norms.iter().map(|s| s.ln()).sum::<f64>() / k as f64;
    for (t, s) in norms.iter().enumerate() {
        f.scale_party(t, (g - s.ln()).exp());
    }
}

fn random_start(dims: &[usize], r: usize, rng: &mut ChaCha8Rng) -> PsdFactorization {
    let factors = dims
        .iter()
        .map(|&d| {
            (0..d)
                .map(|_| {
                    let g = CMatrix::from_fn(r, r, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
                    let m = &g * g.adjoint() / C64::new(r as f64, 0.0);
                    (&m + m.adjoint()).scale(0.5)
                })
                .collect()
        })
        .collect();
    let mut f = PsdFactorization { r, factors };
    let mass: f64 = f.evaluate().iter().sum();
    if mass > 0.0 {
        let s = mass.powf(-1.0 / dims.len() as f64);
        (0..dims.len()).for_each(|t| f.scale_party(t, s));
    }
    f
}

fn run_restart(p: &ClassicalDistribution, r: usize, opts: &FitOptions, restart: usize) -> Fit {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let mut f = random_start(p.dims(), r, &mut rng);
    let mut res = residual(&f, p).expect("shapes agree");
    let mut best = (f.clone(), res, 0);
    for it in 1..=opts.max_iters {
        for t in 0..f.parties() {
            update_party(&mut f, p, t);
        }
        balance(&mut f);
        let next = residual(&f, p).expect("shapes agree");
        if next < best.1 {
            best = (f.clone(), next, it);
        }
        if next <= opts.residual_target || (res - next).abs() <= opts.convergence * res {
            break;
        }
        res = next;
    }
    if best.1 > opts.residual_target {
        let polished = polish(&best.0, p, opts.residual_target);
        let pres = residual(&polished, p).expect("shapes agree");
        if pres < best.1 {
            best = (polished, pres, best.2);
        }
    }
    Fit { factorization: best.0, residual: best.1, restart, iterations: best.2 }
}

/// Alternating least-squares fit at factor size `r`, best of `opts.restarts`
/// seeded restarts (ties go to the lowest restart index).
pub fn fit(p: &ClassicalDistribution, r: usize, opts: &FitOptions) -> Result<Fit> {
    if r == 0 {
        return Err(Error::OutOfRange { name: "r", value: 0.0 });
    }
    opts.validate()?;
    let fits: Vec<Fit> = (0..opts.restarts).into_par_iter().map(|s| run_restart(p, r, opts, s)).collect();
    Ok(fits
        .into_iter()
        .reduce(|best, f| if f.residual < best.residual { f } else { best })
        .expect("at least one restart"))
}

/// Exact diagonal factorization of size `min_i Π_{t≠i} |X_t|`: party `i`
/// carries the probabilities, every other party an indicator of its symbol.
pub fn trivial_factorization(p: &ClassicalDistribution) -> PsdFactorization {
    let dims = p.dims();
    let k = dims.len();
    let size = |i: usize| -> usize { dims.iter().enumerate().filter(|&(t, _)| t != i).map(|(_, d)| d).product() };
    let carrier = (0..k).min_by_key(|&i| (size(i), i)).expect("k >= 1");
    let others: Vec<usize> = (0..k).filter(|&t| t != carrier).collect();
    let other_dims: Vec<usize> = others.iter().map(|&t| dims[t]).collect();
    let r = size(carrier);
    let tuples: Vec<Vec<usize>> = (0..r).map(|j| tensor::unravel(j, &other_dims)).collect();

    let mut factors = vec![Vec::new(); k];
    for (pos, &t) in others.iter().enumerate() {
        factors[t] = (0..dims[t])
            .map(|x| {
                let d = nalgebra::DVector::from_iterator(r, tuples.iter().map(|tu| C64::new(f64::from(u8::from(tu[pos] == x)), 0.0)));
                CMatrix::from_diagonal(&d)
            })
            .collect();
    }
    let mut full = vec![0; k];
    factors[carrier] = (0..dims[carrier])
        .map(|x| {
            let d = nalgebra::DVector::from_iterator(
                r,
                tuples.iter().map(|tu| {
                    for (&t, &v) in others.iter().zip(tu) {
                        full[t] = v;
                    }
                    full[carrier] = x;
                    C64::new(p.prob(&full), 0.0)
                }),
            );
            CMatrix::from_diagonal(&d)
        })
        .collect();
    PsdFactorization { r, factors }
}

fn integer_ceil_sqrt(n: usize) -> usize {
    let mut s = (n as f64).sqrt() as usize;
    while s * s < n {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= n {
        s -= 1;
    }
    s
}

/// `max_S ⌈√rank(P_{S|S̄})⌉` over bipartite flattenings: each entry is an
/// inner product of the `r²`-dimensional vectors `vec(C)`, so every
/// flattening has rank at most `r²`.
pub fn psd_rank_lower(p: &ClassicalDistribution) -> usize {
    let k = p.parties();
    let mut best = 1;
    // bit 0 always on the row side; each bipartition is visited once
    for mask in 1usize..(1 << k) {
        if mask & 1 == 0 || mask == (1 << k) - 1 {
            continue;
        }
        let rows: Vec<usize> = (0..k).filter(|t| mask >> t & 1 == 1).collect();
        let mut sv: Vec<f64> = p.flattening(&rows).singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let rank = match sv.first() {
            Some(&top) if top > 0.0 => sv.iter().take_while(|&&s| s > tol::RANK * top).count(),
            _ => 0,
        };
        best = best.max(integer_ceil_sqrt(rank));
    }
    best
}

/// An upper bound on the PSD-rank together with the factorization proving it.
#[derive(Debug, Clone)]
pub struct PsdRankBound {
    pub rank: usize,
    pub factorization: PsdFactorization,
    pub residual: f64,
    /// True when the witness is the exact diagonal construction rather than a fit.
    pub exact_construction: bool,
}

/// Smallest size at which the fit reaches `opts.residual_target`, starting
/// from [`psd_rank_lower`] and falling back to the diagonal construction.
pub fn psd_rank_upper(p: &ClassicalDistribution, opts: &FitOptions) -> Result<PsdRankBound> {
    opts.validate()?;
    let trivial = trivial_factorization(p);
    for r in psd_rank_lower(p)..trivial.r {
        let f = fit(p, r, opts)?;
        if f.residual <= opts.residual_target {
            return Ok(PsdRankBound { rank: r, factorization: f.factorization, residual: f.residual, exact_construction: false });
        }
    }
    let residual = residual(&trivial, p)?;
    Ok(PsdRankBound { rank: trivial.r, factorization: trivial, residual, exact_construction: true })
}

/// Witness for an upper bound on the ε-approximate PSD-rank.
#[derive(Debug, Clone)]
pub struct ApproxPsdRank {
    pub rank: usize,
    /// `P'`, the normalized realized tensor.
    pub witness: ClassicalDistribution,
    /// Factorization rescaled so that it realizes `witness` (up to clipping of
    /// entries within `1e-10` below zero).
    pub factorization: PsdFactorization,
    pub fidelity: f64,
}

/// Smallest size at which some fitted factorization, once normalized, stays
/// within fidelity `1 - ε` of `p`.
pub fn approx_psd_rank_upper(p: &ClassicalDistribution, eps: f64, opts: &FitOptions) -> Result<ApproxPsdRank> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange { name: "eps", value: eps });
    }
    opts.validate()?;
    let trivial = trivial_factorization(p);
    for r in 1..trivial.r {
        let mut f = fit(p, r, opts)?.factorization;
        let values = f.evaluate();
        let mass: f64 = values.iter().map(|v| v.max(0.0)).sum();
        let Ok(witness) = ClassicalDistribution::normalized(p.dims().to_vec(), values) else { continue };
        let fidelity = classical_fidelity(p, &witness)?;
        if fidelity >= 1.0 - eps {
            f.scale_party(0, 1.0 / mass);
            return Ok(ApproxPsdRank { rank: r, witness, factorization: f, fidelity });
        }
    }
    Ok(ApproxPsdRank { rank: trivial.r, witness: p.clone(), factorization: trivial, fidelity: 1.0 })
}
