//! Correlation and communication complexity: exact values where a closed
//! form exists, certified intervals elsewhere.
//!
//! Bound arithmetic is exact over rationals; floating point only enters
//! through ranks and residuals. Upper bounds that come from a fit or from a
//! user-chosen purification are valid but not known to be optimal and are
//! flagged `heuristic`; they never tighten a lower bound.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psd_rank::{approx_psd_rank_upper, psd_rank_lower, psd_rank_upper, ApproxPsdRank, FitOptions, PsdRankBound};
use crate::spectral::{approx_schmidt_rank, check_open_unit, hermitian_eig, marginal_ranks, mass_cutoff, schmidt};
use crate::states::{max_abs_diff, ClassicalDistribution, DensityOperator, PartySplit, PureState};
use crate::synthesis::{standard_purification, truncate_pure, Purification, Truncation};
use crate::{tensor, tol, CMatrix, C64};

pub type Rational = Ratio<i64>;

mod ratio_json {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Frac {
        num: i64,
        den: i64,
    }

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        Frac { num: *r.numer(), den: *r.denom() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let f = Frac::deserialize(d)?;
        if f.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Rational::new(f.num, f.den))
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            r.map(|r| Frac { num: *r.numer(), den: *r.denom() }).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            Option::<Frac>::deserialize(d)?
                .map(|f| if f.den == 0 { Err(serde::de::Error::custom("zero denominator")) } else { Ok(Rational::new(f.num, f.den)) })
                .transpose()
        }
    }
}

/// A reported quantity: an exact value or a `[lower, upper]` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub quantity: String,
    pub exact: Option<i64>,
    #[serde(with = "ratio_json")]
    pub lower: Rational,
    #[serde(with = "ratio_json")]
    pub upper: Rational,
    /// Unrounded bounds, when the integer interval comes from rounding them.
    #[serde(with = "ratio_json::opt", default, skip_serializing_if = "Option::is_none")]
    pub rational_lower: Option<Rational>,
    #[serde(with = "ratio_json::opt", default, skip_serializing_if = "Option::is_none")]
    pub rational_upper: Option<Rational>,
    pub witness: Option<String>,
    /// The upper bound is valid but not known to be tight.
    #[serde(default)]
    pub heuristic: bool,
    pub notes: Vec<String>,
}

impl ComplexityReport {
    /// `exact` is filled in when the bounds meet at an integer.
    pub fn interval(quantity: &str, lower: Rational, upper: Rational) -> Result<Self> {
        if lower > upper {
            return Err(Error::InvalidInterval { lower: lower.to_string(), upper: upper.to_string() });
        }
        let exact = (lower == upper && lower.is_integer()).then(|| lower.to_integer());
        Ok(Self {
            quantity: quantity.into(),
            exact,
            lower,
            upper,
            rational_lower: None,
            rational_upper: None,
            witness: None,
            heuristic: false,
            notes: Vec::new(),
        })
    }

    pub fn exact(quantity: &str, value: i64) -> Self {
        Self::interval(quantity, value.into(), value.into()).expect("degenerate interval")
    }

    pub fn with_witness(mut self, w: impl Into<String>) -> Self {
        self.witness = Some(w.into());
        self
    }

    pub fn with_note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    /// Smallest integer the interval admits.
    pub fn lower_int(&self) -> i64 {
        self.lower.ceil().to_integer()
    }

    /// Largest integer the interval admits.
    pub fn upper_int(&self) -> i64 {
        self.upper.floor().to_integer()
    }

    pub fn contains(&self, v: i64) -> bool {
        Rational::from(v) >= self.lower && Rational::from(v) <= self.upper
    }
}

fn ceil_log2(n: usize) -> i64 {
    i64::from(n.max(1).next_power_of_two().trailing_zeros())
}

/// `k / (2k − 2)`, for `k ≥ 2`.
fn sandwich_factor(k: usize) -> Rational {
    Rational::new(k as i64, 2 * k as i64 - 2)
}

/// `m(ψ) = Σ_j ⌈log₂ rank ρ_j⌉`.
pub fn marginal_complexity(psi: &PureState) -> u32 {
    marginal_ranks(psi).iter().map(|&r| ceil_log2(r) as u32).sum()
}

/// `qcorr(ψ) = m(ψ)`.
pub fn qcorr_pure(psi: &PureState) -> u32 {
    marginal_complexity(psi)
}

pub fn qcorr_pure_report(psi: &PureState) -> ComplexityReport {
    ComplexityReport::exact("qcorr", i64::from(qcorr_pure(psi))).with_witness("canonical seed")
}

fn approx_marginal_ranks(psi: &PureState, eps: f64) -> Result<Vec<usize>> {
    check_open_unit("eps", eps)?;
    let k = psi.parties();
    if k == 1 {
        return Ok(vec![1]);
    }
    (0..k).map(|j| approx_schmidt_rank(psi, &PartySplit::single(j, k)?, eps)).collect()
}

/// `m_ε(ψ) = Σ_j ⌈log₂ r_j^{(ε)}⌉`.
pub fn marginal_complexity_eps(psi: &PureState, eps: f64) -> Result<u32> {
    Ok(approx_marginal_ranks(psi, eps)?.iter().map(|&r| ceil_log2(r) as u32).sum())
}

/// `m_ε ≤ qcorr^pure_ε ≤ m_{ε/k}`, with the truncation that realizes the upper bound.
pub fn qcorr_eps_pure_bounds(psi: &PureState, eps: f64) -> Result<(ComplexityReport, Truncation)> {
    let k = psi.parties();
    let lower = marginal_complexity_eps(psi, eps)?;
    let upper = marginal_complexity_eps(psi, eps / k as f64)?;
    let truncation = truncate_pure(psi, eps)?;
    let mut report = ComplexityReport::interval("qcorr_eps_pure", i64::from(lower).into(), i64::from(upper).into())?
        .with_witness("truncation")
        .with_note(format!("eps = {eps}; truncation fidelity {:.12}", truncation.fidelity));
    if k == 2 {
        let exact = qcorr_eps_bipartite_pure(psi, eps)?;
        report = report.with_note(format!(
            "bipartite exact value {exact} counts ⌈log₂ r⌉ for the approximate Schmidt rank r (one party's share)"
        ));
    }
    Ok((report, truncation))
}

/// `⌈log₂ r⌉` for the ε-approximate Schmidt rank `r` of a bipartite state.
pub fn qcorr_eps_bipartite_pure(psi: &PureState, eps: f64) -> Result<u32> {
    if psi.parties() != 2 {
        return Err(Error::Shape(format!("bipartite state required, got {} parties", psi.parties())));
    }
    let r = approx_schmidt_rank(psi, &PartySplit::single(0, 2)?, eps)?;
    Ok(ceil_log2(r) as u32)
}

/// Reports for a mixed state: `qcorr(ρ)` and `r(ρ)`, the least marginal
/// complexity over purifications.
#[derive(Debug, Clone)]
pub struct MixedBounds {
    pub qcorr: ComplexityReport,
    pub r: ComplexityReport,
    /// Index of the candidate attaining the `r` upper bound; `None` for the
    /// built-in purification.
    pub best_candidate: Option<usize>,
    pub best: Purification,
}

/// The pure state behind a rank-one density operator.
pub fn pure_from_rank_one(rho: &DensityOperator) -> Result<Option<PureState>> {
    if rho.rank() != 1 {
        return Ok(None);
    }
    let e = hermitian_eig(rho.matrix())?;
    let v: Vec<C64> = e.vectors.column(0).iter().copied().collect();
    Ok(Some(PureState::from_unnormalized(rho.dims().to_vec(), v)?))
}

/// The distribution on the diagonal when `ρ` is diagonal.
pub fn classical_part(rho: &DensityOperator) -> Option<ClassicalDistribution> {
    if !rho.is_diagonal(tol::HERMITIAN) {
        return None;
    }
    let d = rho.matrix().diagonal().iter().map(|z| z.re).collect();
    ClassicalDistribution::normalized(rho.dims().to_vec(), d).ok()
}

fn check_candidates(rho: &DensityOperator, candidates: &[Purification]) -> Result<()> {
    for c in candidates {
        let check = c.check(rho)?;
        if !check.holds {
            return Err(Error::NotPurification { residual: check.residual });
        }
    }
    Ok(())
}

/// Picks the purification of least marginal complexity among `candidates`
/// and the built-in one (candidates first, ties to the earliest).
fn best_purification(rho: &DensityOperator, candidates: &[Purification]) -> Result<(Option<usize>, Purification, u32)> {
    let default = standard_purification(rho)?;
    let mut best: Option<(Option<usize>, &Purification, u32)> = None;
    let all = candidates.iter().enumerate().map(|(i, c)| (Some(i), c)).chain(std::iter::once((None, &default)));
    for (i, c) in all {
        let m = marginal_complexity(&c.grouped()?);
        if best.as_ref().is_none_or(|b| m < b.2) {
            best = Some((i, c, m));
        }
    }
    let (i, c, m) = best.expect("default purification is always present");
    Ok((i, c.clone(), m))
}

/// `qcorr(ρ) ≤ r(ρ)`, with `r(ρ)` bounded above by the best purification on
/// hand and `qcorr(ρ)` additionally by sharing `ρ` itself (`Σ ⌈log₂ d_i⌉`).
/// No lower bound is certified for general mixed states; diagonal states
/// inherit the flattening bound of their distribution.
pub fn qcorr_mixed_bounds(rho: &DensityOperator, candidates: &[Purification]) -> Result<MixedBounds> {
    check_candidates(rho, candidates)?;
    if let Some(psi) = pure_from_rank_one(rho)? {
        let m = i64::from(qcorr_pure(&psi));
        let best = Purification::new(psi, (0..rho.parties()).collect())?;
        return Ok(MixedBounds {
            qcorr: ComplexityReport::exact("qcorr", m).with_witness("canonical seed").with_note("rank-one input treated as a pure state"),
            r: ComplexityReport::exact("r", m),
            best_candidate: None,
            best,
        });
    }
    let (best_candidate, best, r_upper) = best_purification(rho, candidates)?;
    let share_itself: i64 = rho.dims().iter().map(|&d| ceil_log2(d)).sum();
    let upper = i64::from(r_upper).min(share_itself);

    let mut lower = Rational::from(0);
    let mut notes = Vec::new();
    if let Some(p) = classical_part(rho) {
        let c = classical_lower(&p);
        lower = c;
        notes.push(format!("diagonal input: lower bound {c} from the flattening bound on the PSD-rank"));
    } else {
        notes.push("no certified lower bound for general mixed states".to_string());
    }
    let witness = match best_candidate {
        Some(i) => format!("candidate {i}"),
        None => "standard purification".to_string(),
    };
    let mut qcorr = ComplexityReport::interval("qcorr", lower, upper.into())?
        .with_witness(if upper == share_itself && upper < i64::from(r_upper) { "share the state itself".to_string() } else { witness.clone() });
    qcorr.heuristic = true;
    qcorr.notes = notes.clone();
    let mut r = ComplexityReport::interval("r", lower, i64::from(r_upper).into())?.with_witness(witness);
    r.heuristic = true;
    r.notes = notes;
    Ok(MixedBounds { qcorr, r, best_candidate, best })
}

/// Certified lower bound on `qcorr(P)` from the flattening bound.
fn classical_lower(p: &ClassicalDistribution) -> Rational {
    let k = p.parties();
    if k < 2 {
        return 0.into();
    }
    let l = ceil_log2(psd_rank_lower(p));
    if k == 2 {
        return l.into();
    }
    (sandwich_factor(k) * Rational::from(l)).ceil()
}

/// Bounds for a classical distribution with the factorization behind the upper bound.
#[derive(Debug, Clone)]
pub struct ClassicalBounds {
    pub report: ComplexityReport,
    pub rank_lower: usize,
    pub rank_upper: PsdRankBound,
}

/// `(k/(2k−2))⌈log₂ prank⌉ ≤ qcorr(P) ≤ k⌈log₂ prank⌉`; for two parties the
/// interval `[⌈log₂ lower⌉, ⌈log₂ upper⌉]` of the exact characterization
/// `⌈log₂ prank(P)⌉`.
pub fn qcorr_classical_bounds(p: &ClassicalDistribution, opts: &FitOptions) -> Result<ClassicalBounds> {
    let k = p.parties();
    let rank_lower = psd_rank_lower(p);
    let rank_upper = psd_rank_upper(p, opts)?;
    let lu = ceil_log2(rank_upper.rank);
    let upper = match k {
        1 => 0,
        2 => lu,
        _ => k as i64 * lu,
    };
    let mut report = ComplexityReport::interval("qcorr", classical_lower(p), upper.into())?
        .with_witness("factorization")
        .with_note(format!("PSD-rank in [{rank_lower}, {}]", rank_upper.rank));
    if k == 2 {
        report = report.with_note("two-party value counts ⌈log₂ prank⌉ (one party's share)");
    }
    if k == 1 {
        report = report.with_note("single party: generated locally");
    }
    if !rank_upper.exact_construction {
        report.heuristic = true;
        report = report.with_note(format!("PSD-rank upper bound from a fit with residual {:.3e}", rank_upper.residual));
    }
    Ok(ClassicalBounds { report, rank_lower, rank_upper })
}

/// `qcorr_ε(P) = ⌈log₂ rank_{psd,ε}(P)⌉` for two parties, bounded above by
/// the best fitted witness; only the trivial lower bound is certified.
pub fn qcorr_eps_classical(p: &ClassicalDistribution, eps: f64, opts: &FitOptions) -> Result<(ComplexityReport, ApproxPsdRank)> {
    if p.parties() != 2 {
        return Err(Error::Shape(format!("two-party distribution required, got {} parties", p.parties())));
    }
    let approx = approx_psd_rank_upper(p, eps, opts)?;
    let upper = ceil_log2(approx.rank);
    let mut report = ComplexityReport::interval("qcorr_eps", 0.into(), upper.into())?
        .with_witness("approximate factorization")
        .with_note(format!("eps = {eps}; witness fidelity {:.12}", approx.fidelity))
        .with_note("no certified lower bound for the approximate PSD-rank");
    report.heuristic = upper > 0;
    Ok((report, approx))
}

/// `½ m(ψ) ≤ qcomm(ψ) ≤ ((k−1)/k) m(ψ)` as whole qubits, with the exact rationals.
pub fn qcomm_pure_bounds(psi: &PureState) -> ComplexityReport {
    let k = psi.parties() as i64;
    let m = i64::from(marginal_complexity(psi));
    let lo = Rational::new(m, 2);
    let hi = Rational::new((k - 1) * m, k);
    let mut r = ComplexityReport::interval("qcomm", lo.ceil(), hi.floor()).expect("⌈m/2⌉ ≤ ⌊(k−1)m/k⌋ for pure states");
    r.rational_lower = Some(lo);
    r.rational_upper = Some(hi);
    r.with_witness("preparer protocol")
}

/// Communication bounds for a mixed state through its purifications.
#[derive(Debug, Clone)]
pub struct CommBounds {
    pub report: ComplexityReport,
    pub best_candidate: Option<usize>,
    pub best: Purification,
}

/// `qcomm(ρ)` is the least `qcomm` over purifications: the upper bound is
/// the best pure-state upper bound among the purifications on hand. Only
/// pure and diagonal inputs get a nonzero lower bound.
pub fn qcomm_mixed_bounds(rho: &DensityOperator, candidates: &[Purification]) -> Result<CommBounds> {
    check_candidates(rho, candidates)?;
    if let Some(psi) = pure_from_rank_one(rho)? {
        let report = qcomm_pure_bounds(&psi).with_note("rank-one input treated as a pure state");
        let best = Purification::new(psi, (0..rho.parties()).collect())?;
        return Ok(CommBounds { report, best_candidate: None, best });
    }
    let default = standard_purification(rho)?;
    let all = candidates.iter().enumerate().map(|(i, c)| (Some(i), c)).chain(std::iter::once((None, &default)));
    let mut best: Option<(Option<usize>, &Purification, ComplexityReport)> = None;
    for (i, c) in all {
        let rep = qcomm_pure_bounds(&c.grouped()?);
        if best.as_ref().is_none_or(|b| rep.upper < b.2.upper) {
            best = Some((i, c, rep));
        }
    }
    let (best_candidate, purification, pure) = best.expect("default purification is always present");
    let mut lower = Rational::from(0);
    let mut notes = vec![format!(
        "best purification has pure-state interval [{}, {}]; its lower end is not certified for the mixed state",
        pure.lower, pure.upper
    )];
    if let Some(p) = classical_part(rho) {
        // qcorr ≤ 2 qcomm
        lower = (classical_lower(&p) / 2).ceil();
        notes.push("diagonal input: lower bound is half the certified qcorr lower bound".into());
    }
    let mut report = ComplexityReport::interval("qcomm", lower, pure.upper)?.with_witness(match best_candidate {
        Some(i) => format!("preparer protocol on candidate {i}"),
        None => "preparer protocol on the standard purification".into(),
    });
    report.heuristic = true;
    report.notes = notes;
    Ok(CommBounds { report, best_candidate, best: purification.clone() })
}

/// Whether some integers `q ∈ qcorr`, `c ∈ qcomm` satisfy
/// `(k/(k−1)) c ≤ q ≤ 2c`.
pub fn comm_corr_consistency(qcorr: &ComplexityReport, qcomm: &ComplexityReport, k: usize) -> bool {
    let k = k as i64;
    (qcorr.lower_int()..=qcorr.upper_int()).any(|q| (qcomm.lower_int()..=qcomm.upper_int()).any(|c| k * c <= (k - 1) * q && q <= 2 * c))
}

/// `(k/(2k−2)) m_{kε}(ψ) ≤ qcorr_ε(ψ) ≤ m_{ε/k}(ψ)`, for `0 < ε < 1/k`.
pub fn qcorr_eps_pure_mixed_relation(psi: &PureState, eps: f64) -> Result<ComplexityReport> {
    let k = psi.parties();
    if !(eps > 0.0 && eps * (k as f64) < 1.0) {
        return Err(Error::OutOfRange { name: "eps", value: eps });
    }
    let upper = i64::from(marginal_complexity_eps(psi, eps / k as f64)?);
    let lower = if k < 2 {
        Rational::from(0)
    } else {
        (sandwich_factor(k) * Rational::from(i64::from(marginal_complexity_eps(psi, k as f64 * eps)?))).ceil()
    };
    Ok(ComplexityReport::interval("qcorr_eps", lower, upper.into())?
        .with_witness("truncation")
        .with_note(format!("eps = {eps}")))
}

/// How [`min_product_cover`] searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    Brute,
    Greedy,
}

/// Cap on the subsets enumerated by the exhaustive search.
pub const COVER_ENUMERATION_CAP: u64 = 1 << 22;

/// Index sets `S_i ⊆ [r_i]` whose product block keeps mass `≥ 1 − ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    pub subsets: Vec<Vec<usize>>,
    /// `Π |S_i|`.
    pub product: usize,
    pub retained_mass: f64,
    /// `Σ ⌈log₂ |S_i|⌉`: qubits of the seed that realizes the cover.
    pub qubits: u32,
    pub heuristic: bool,
}

fn block_mass(shape: &[usize], weights: &[f64], subsets: &[Vec<bool>]) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|(f, _)| tensor::unravel(*f, shape).iter().zip(subsets).all(|(&i, s)| s[i]))
        .map(|(_, w)| w)
        .sum()
}

fn make_cover(subsets: &[Vec<bool>], mass: f64, heuristic: bool) -> Cover {
    let subsets: Vec<Vec<usize>> = subsets.iter().map(|s| (0..s.len()).filter(|&i| s[i]).collect()).collect();
    Cover {
        product: subsets.iter().map(|s| s.len()).product(),
        qubits: subsets.iter().map(|s| ceil_log2(s.len()) as u32).sum(),
        subsets,
        retained_mass: mass,
        heuristic,
    }
}

/// Smallest `Π |S_i|` over product blocks of the coefficient tensor `a`
/// (row-major over `shape`) retaining mass at least `1 − ε`.
///
/// `Brute` enumerates the subsets of every party except the one with the
/// largest range, whose best subset given the others is its heaviest slices.
/// `Greedy` repeatedly drops the lightest remaining slice while feasible.
pub fn min_product_cover(shape: &[usize], a: &[C64], eps: f64, mode: CoverMode) -> Result<Cover> {
    check_open_unit("eps", eps)?;
    if shape.is_empty() || shape.contains(&0) || tensor::total(shape) != a.len() {
        return Err(Error::Shape(format!("{} coefficients for shape {shape:?}", a.len())));
    }
    let weights: Vec<f64> = a.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol::NORM {
        return Err(Error::Unnormalized { norm: total.sqrt() });
    }
    let target = 1.0 - eps - tol::CUTOFF_SLACK;
    match mode {
        CoverMode::Greedy => Ok(greedy_cover(shape, &weights, target)),
        CoverMode::Brute => brute_cover(shape, &weights, target),
    }
}

fn greedy_cover(shape: &[usize], weights: &[f64], target: f64) -> Cover {
    let mut sets: Vec<Vec<bool>> = shape.iter().map(|&r| vec![true; r]).collect();
    let mut mass = block_mass(shape, weights, &sets);
    loop {
        // lightest slice per party; drop the globally lightest feasible one
        let mut best: Option<(f64, usize, usize)> = None;
        for (j, set) in sets.iter().enumerate() {
            if set.iter().filter(|&&b| b).count() < 2 {
                continue;
            }
            for i in (0..set.len()).filter(|&i| set[i]) {
                let mut trial = sets.clone();
                trial[j][i] = false;
                let m = block_mass(shape, weights, &trial);
                let slice = mass - m;
                if m >= target && best.is_none_or(|b| slice < b.0) {
                    best = Some((slice, j, i));
                }
            }
        }
        let Some((slice, j, i)) = best else { break };
        sets[j][i] = false;
        mass -= slice;
    }
    let mass = block_mass(shape, weights, &sets);
    make_cover(&sets, mass, true)
}

fn brute_cover(shape: &[usize], weights: &[f64], target: f64) -> Result<Cover> {
    let k = shape.len();
    if tensor::total(shape) > tol::MAX_DIM {
        return Err(Error::SearchTooLarge(format!("Π r_i = {} exceeds {}", tensor::total(shape), tol::MAX_DIM)));
    }
    let free = (0..k).max_by_key(|&j| (shape[j], std::cmp::Reverse(j))).expect("k >= 1");
    let others: Vec<usize> = (0..k).filter(|&j| j != free).collect();
    let count: u64 = others.iter().map(|&j| (1u64 << shape[j]) - 1).product();
    if count > COVER_ENUMERATION_CAP {
        return Err(Error::SearchTooLarge(format!("{count} subset combinations exceed {COVER_ENUMERATION_CAP}")));
    }
    let idx: Vec<Vec<usize>> = (0..weights.len()).map(|f| tensor::unravel(f, shape)).collect();

    let mut best: Option<(usize, f64, Vec<Vec<bool>>)> = None;
    let mut masks = vec![1u64; others.len()];
    'outer: loop {
        let size: usize = others.iter().zip(&masks).map(|(_, m)| m.count_ones() as usize).product();
        let prunable = best.as_ref().is_some_and(|b| size > b.0);
        if !prunable {
            // heaviest slices of the free party given the others
            let mut slices = vec![0.0; shape[free]];
            for (f, w) in weights.iter().enumerate() {
                if others.iter().zip(&masks).all(|(&j, m)| m >> idx[f][j] & 1 == 1) {
                    slices[idx[f][free]] += w;
                }
            }
            let mut order: Vec<usize> = (0..shape[free]).collect();
            order.sort_by(|&x, &y| slices[y].total_cmp(&slices[x]).then(x.cmp(&y)));
            let mut acc = 0.0;
            for (n, &i) in order.iter().enumerate() {
                acc += slices[i];
                if acc >= target {
                    let product = size * (n + 1);
                    let better = best.as_ref().is_none_or(|b| product < b.0 || (product == b.0 && acc > b.1 + 1e-15));
                    if better {
                        let mut sets: Vec<Vec<bool>> = vec![Vec::new(); k];
                        for (&j, m) in others.iter().zip(&masks) {
                            sets[j] = (0..shape[j]).map(|i| m >> i & 1 == 1).collect();
                        }
                        sets[free] = vec![false; shape[free]];
                        order[..=n].iter().for_each(|&i| sets[free][i] = true);
                        best = Some((product, acc, sets));
                    }
                    break;
                }
            }
        }
        // odometer over the nonempty masks
        for (t, &j) in others.iter().enumerate() {
            masks[t] += 1;
            if masks[t] < 1 << shape[j] {
                continue 'outer;
            }
            masks[t] = 1;
        }
        break;
    }
    let (_, _, sets) = best.expect("full sets are always feasible");
    let mass = block_mass(shape, weights, &sets);
    Ok(make_cover(&sets, mass, false))
}

/// How the number of retained terms is counted in
/// [`verify_general_characterization`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffRule {
    /// `Σ_{i≤r} a_i ≥ (1−ε)²`: fidelity of the normalized truncation, the
    /// convention of the approximate Schmidt rank.
    #[default]
    Squared,
    /// `Σ_{i≤r} a_i ≥ 1−ε`: overlap of the unnormalized truncation.
    Linear,
}

/// Outcome of checking the three conditions of the general characterization.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizationCheck {
    /// Both structural conditions hold and `r ≤ l`.
    pub holds: bool,
    /// Max deviation of the reconstructed state from `σ`.
    pub reconstruction_residual: f64,
    /// Max `|Σ_x ⟨A_x(i)|A_x(j)⟩|` (and the `B` analogue) over `i ≠ j`.
    pub orthogonality_residual: f64,
    /// Smallest number of leading columns (by product mass) meeting the cutoff.
    pub r: usize,
    /// Product masses `a_i`, nonincreasing.
    pub masses: Vec<f64>,
}

fn family_shape(f: &[CMatrix], name: &str) -> Result<(usize, usize)> {
    let first = f.first().ok_or_else(|| Error::Shape(format!("empty {name} family")))?;
    let shape = first.shape();
    if f.iter().any(|m| m.shape() != shape) {
        return Err(Error::Shape(format!("{name} matrices differ in shape")));
    }
    Ok(shape)
}

/// Checks `σ = Σ |x⟩⟨x'| ⊗ |y⟩⟨y'| tr((A_{x'}†A_x)ᵀ (B_{y'}†B_y))`, the
/// cross-column orthogonality `Σ_x ⟨A_x(i)|A_x(j)⟩ = Σ_y ⟨B_y(i)|B_y(j)⟩ = 0`,
/// and finds the smallest `r` whose leading product masses meet the cutoff.
pub fn verify_general_characterization(
    sigma: &DensityOperator,
    a: &[CMatrix],
    b: &[CMatrix],
    eps: f64,
    rule: CutoffRule,
) -> Result<CharacterizationCheck> {
    check_open_unit("eps", eps)?;
    if sigma.parties() != 2 {
        return Err(Error::Shape(format!("bipartite state required, got {} parties", sigma.parties())));
    }
    let (da, db) = (sigma.dims()[0], sigma.dims()[1]);
    if a.len() != da || b.len() != db {
        return Err(Error::DimensionMismatch { expected: vec![da, db], found: vec![a.len(), b.len()] });
    }
    let (_, la) = family_shape(a, "A")?;
    let (_, lb) = family_shape(b, "B")?;
    if la != lb {
        return Err(Error::Shape(format!("A has {la} columns, B has {lb}")));
    }
    let l = la;

    let ga: Vec<Vec<CMatrix>> = (0..da).map(|xp| (0..da).map(|x| a[xp].adjoint() * &a[x]).collect()).collect();
    let gb: Vec<Vec<CMatrix>> = (0..db).map(|yp| (0..db).map(|y| b[yp].adjoint() * &b[y]).collect()).collect();
    let rebuilt = CMatrix::from_fn(da * db, da * db, |row, col| {
        let (x, y) = (row / db, row % db);
        let (xp, yp) = (col / db, col % db);
        ga[xp][x].iter().zip(gb[yp][y].iter()).map(|(p, q)| p * q).sum()
    });
    let reconstruction_residual = max_abs_diff(&rebuilt, sigma.matrix());

    let gram = |f: &[CMatrix]| f.iter().fold(CMatrix::zeros(l, l), |acc, m| acc + m.adjoint() * m);
    let (sa, sb) = (gram(a), gram(b));
    let mut orthogonality_residual: f64 = 0.0;
    for i in 0..l {
        for j in 0..l {
            if i != j {
                orthogonality_residual = orthogonality_residual.max(sa[(i, j)].norm()).max(sb[(i, j)].norm());
            }
        }
    }
    let mut masses: Vec<f64> = (0..l).map(|i| sa[(i, i)].re * sb[(i, i)].re).collect();
    masses.sort_by(|x, y| y.total_cmp(x));
    let target = match rule {
        CutoffRule::Squared => (1.0 - eps).powi(2),
        CutoffRule::Linear => 1.0 - eps,
    };
    let r = mass_cutoff(&masses, target);
    let holds = reconstruction_residual <= tol::RECON && orthogonality_residual <= tol::RECON && r <= l;
    Ok(CharacterizationCheck { holds, reconstruction_residual, orthogonality_residual, r, masses })
}

/// Factor families from a purification on registers `[A₁, A, B, B₁]`:
/// with the Schmidt decomposition `Σ_i s_i |L_i⟩|R_i⟩` across `A₁A | BB₁`,
/// column `i` of `A_x` is `√s_i ⟨x|_A L_i` and of `B_y` is `√s_i ⟨y|_B R_i`.
pub fn extract_factors(psi: &PureState) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    if psi.parties() != 4 {
        return Err(Error::Shape(format!("expected registers [A1, A, B, B1], got {} registers", psi.parties())));
    }
    let d = psi.dims();
    let (da1, da, db, db1) = (d[0], d[1], d[2], d[3]);
    let sd = schmidt(psi, &PartySplit::new(&[0, 1], 4)?)?;
    let s = sd.rank();
    let roots: Vec<f64> = sd.coefficients.iter().map(|c| c.sqrt()).collect();
    let a = (0..da)
        .map(|x| CMatrix::from_fn(da1, s, |a1, i| sd.left[(a1 * da + x, i)] * roots[i]))
        .collect();
    let b = (0..db)
        .map(|y| CMatrix::from_fn(db1, s, |b1, i| sd.right[(y * db1 + b1, i)] * roots[i]))
        .collect();
    Ok((a, b))
}
