//! Invariants checked over randomized inputs.

use proptest::prelude::*;
use qcorr_core::complexity::{
    comm_corr_consistency, extract_factors, marginal_complexity, marginal_complexity_eps, qcomm_pure_bounds, qcorr_eps_pure_bounds,
    qcorr_mixed_bounds, qcorr_pure, qcorr_pure_report, verify_general_characterization, CutoffRule,
};
use qcorr_core::psd_rank::{psd_rank_lower, residual, PsdFactorization};
use qcorr_core::sample;
use qcorr_core::spectral::{approx_schmidt_rank, support_decomposition};
use qcorr_core::states::{embed_classical, max_abs_diff, partial_trace};
use qcorr_core::synthesis::{canonical_seed, purification_from_psd, qcomm_upper_protocol, simulate_protocol, truncate_pure};
use qcorr_core::{ClassicalDistribution, CMatrix, PartySplit, PureState, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims_strategy(max_parties: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, 1..=max_parties)
}

fn state(dims: &[usize], seed: u64) -> PureState {
    sample::random_pure(dims, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn random_factorization(dims: &[usize], r: usize, rng: &mut ChaCha8Rng) -> PsdFactorization {
    let mut factors: Vec<Vec<CMatrix>> = dims
        .iter()
        .map(|&d| {
            (0..d)
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

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn partial_trace_composes(seed in any::<u64>()) {
        let rho = sample::random_density(&[2, 2, 3], 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let stepwise = partial_trace(&partial_trace(&rho, &[1]).unwrap(), &[1]).unwrap();
        let direct = partial_trace(&rho, &[1, 2]).unwrap();
        prop_assert!(max_abs_diff(stepwise.matrix(), direct.matrix()) <= 1e-10);
    }

    #[test]
    fn support_decomposition_reconstructs(dims in dims_strategy(3, 3), seed in any::<u64>()) {
        let psi = state(&dims, seed);
        let back = support_decomposition(&psi).reconstruct().unwrap();
        let dev = psi.amplitudes().iter().zip(back.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(dev <= 1e-8);
    }

    #[test]
    fn cutoff_is_monotone(dims in dims_strategy(3, 3), seed in any::<u64>(), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let psi = state(&dims, seed);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(marginal_complexity_eps(&psi, hi).unwrap() <= marginal_complexity_eps(&psi, lo).unwrap());
        prop_assert!(marginal_complexity_eps(&psi, lo).unwrap() <= marginal_complexity(&psi));
    }

    #[test]
    fn pure_routes_agree(dims in dims_strategy(3, 3), seed in any::<u64>()) {
        let psi = state(&dims, seed);
        let direct = qcorr_pure(&psi);
        prop_assert_eq!(direct, marginal_complexity(&psi));
        let mixed = qcorr_mixed_bounds(&psi.density(), &[]).unwrap();
        prop_assert_eq!(mixed.qcorr.exact, Some(i64::from(direct)));
        let (sandwich, _) = qcorr_eps_pure_bounds(&psi, 1e-12).unwrap();
        prop_assert_eq!(sandwich.exact, Some(i64::from(direct)));
    }

    #[test]
    fn reports_are_consistent(dims in dims_strategy(4, 3), seed in any::<u64>()) {
        let psi = state(&dims, seed);
        let qcorr = qcorr_pure_report(&psi);
        let qcomm = qcomm_pure_bounds(&psi);
        prop_assert!(qcomm.lower <= qcomm.upper);
        prop_assert!(comm_corr_consistency(&qcorr, &qcomm, psi.parties()));
    }

    #[test]
    fn preparer_communication_bound(dims in dims_strategy(4, 3), seed in any::<u64>()) {
        let psi = state(&dims, seed);
        let sim = simulate_protocol(&qcomm_upper_protocol(&psi).unwrap()).unwrap();
        let k = psi.parties() as i64;
        let m = i64::from(marginal_complexity(&psi));
        // c ≤ (k−1)m/k as integers
        prop_assert!(k * i64::from(sim.communication) <= (k - 1) * m);
        prop_assert!(sim.fidelity >= 1.0 - 1e-8);
    }

    #[test]
    fn canonical_seed_roundtrip(dims in prop::collection::vec(1usize..=4, 1..=3), seed in any::<u64>()) {
        let psi = state(&dims, seed);
        let p = canonical_seed(&psi).unwrap();
        let sim = simulate_protocol(&p).unwrap();
        prop_assert!(sim.fidelity >= 1.0 - 1e-8);
        prop_assert_eq!(sim.size, qcorr_pure(&psi));
        prop_assert_eq!(sim.communication, 0);
    }

    #[test]
    fn truncation_guarantees(dims in dims_strategy(3, 3), seed in any::<u64>(), eps in prop::sample::select(vec![0.05, 0.1, 0.3])) {
        let psi = state(&dims, seed);
        let k = psi.parties() as f64;
        let t = truncate_pure(&psi, eps).unwrap();
        prop_assert!(t.fidelity >= (1.0 - eps).sqrt() - 1e-9);
        prop_assert!(t.fidelity >= 1.0 - eps);
        prop_assert!(qcorr_pure(&t.state) <= marginal_complexity_eps(&psi, eps / k).unwrap());
    }

    #[test]
    fn psd_purification_roundtrip(seed in any::<u64>(), r in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_factorization(&[2, 2, 2], r, &mut rng);
        let p = ClassicalDistribution::normalized(f.dims(), f.evaluate()).unwrap();
        prop_assert!(residual(&f, &p).unwrap() <= 1e-10);
        let pur = purification_from_psd(&f).unwrap();
        let check = pur.check(&embed_classical(&p)).unwrap();
        prop_assert!(check.holds && check.residual <= 1e-8);
        // the flattening bound never exceeds a realized size
        prop_assert!(psd_rank_lower(&p) <= r);
    }

    #[test]
    fn characterization_roundtrip(seed in any::<u64>(), eps in prop::sample::select(vec![0.02, 0.1, 0.25])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = sample::random_density(&[2, 2], 4, &mut rng);
        let anc = 4;
        let pur = sample::random_purification(&sigma, anc, &mut rng);
        let psi = PureState::new(vec![1, 2, 2, anc], pur.amplitudes().to_vec()).unwrap();
        let (a, b) = extract_factors(&psi).unwrap();
        let chk = verify_general_characterization(&sigma, &a, &b, eps, CutoffRule::Squared).unwrap();
        prop_assert!(chk.holds);
        prop_assert!(chk.reconstruction_residual <= 1e-8 && chk.orthogonality_residual <= 1e-8);
        prop_assert_eq!(chk.r, approx_schmidt_rank(&psi, &PartySplit::new(&[0, 1], 4).unwrap(), eps).unwrap());
    }
}
