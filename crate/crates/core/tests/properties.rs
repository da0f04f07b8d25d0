mod common;

use std::f64::consts::PI;

use common::{max_abs_diff, scale, FAMILIES};
use locc_gauss::conditioning::{derived_quartet, schur_parity, schur_vacuum};
use locc_gauss::gaussian::{
    apply_local_symplectic, generate_random_state, invert_local_symplectic, validate_physicality, GenerationParams,
    StateFamily,
};
use locc_gauss::noise::{perturbation_sigma, perturb_conditioned_moments, NoisyChannel, NoisyChannelConfig};
use locc_gauss::reconstruction::{aligned_relative_errors, exact_observation, acos_argument, forward_quartet};
use locc_gauss::{
    run_protocol, Complex64, ExactChannel, LocalSymplectic, Mode, ProtocolConfig, SubensembleMoments,
    TwoModeCovariance,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(seed: u64, family: usize) -> TwoModeCovariance {
    generate_random_state(seed, &GenerationParams::family(FAMILIES[family])).unwrap().0
}

fn generic(seed: u64) -> TwoModeCovariance {
    generate_random_state(seed, &GenerationParams::family(StateFamily::Generic)).unwrap().0
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::One), Just(Mode::Two)]
}

fn obs_diff(a: &TwoModeCovariance, b: &TwoModeCovariance) -> f64 {
    let (x, y) = (exact_observation(a).unwrap().to_raw(), exact_observation(b).unwrap().to_raw());
    x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn local_symplectic_round_trips_and_stays_physical(
        seed in any::<u64>(),
        family in 0..FAMILIES.len(),
        mode in mode(),
        r in -2.0..2.0f64,
        s in 0.0..2.0 * PI,
    ) {
        let v = state(seed, family);
        let t = LocalSymplectic::new(mode, r, s);
        let w = apply_local_symplectic(&v, &t);
        prop_assert!(validate_physicality(&w).unwrap().is_physical());
        let back = apply_local_symplectic(&w, &invert_local_symplectic(&t));
        prop_assert!(max_abs_diff(&back, &v) / scale(&v) < 1e-10);
    }

    #[test]
    fn sign_partner_is_locally_invisible(seed in any::<u64>(), family in 0..FAMILIES.len()) {
        let v = state(seed, family);
        prop_assert!(obs_diff(&v, &v.sign_partner()) < 1e-12 * scale(&v));
    }

    #[test]
    fn tmsv_squeeze_sign_is_locally_invisible(r in 0.0..1.5f64) {
        let a = TwoModeCovariance::two_mode_squeezed_vacuum(r);
        let b = TwoModeCovariance::two_mode_squeezed_vacuum(-r);
        prop_assert!(obs_diff(&a, &b) < 1e-12 * scale(&a));
    }

    #[test]
    fn conditional_blocks_are_physical(seed in any::<u64>(), family in 0..FAMILIES.len()) {
        let v = state(seed, family);
        prop_assert!(schur_parity(&v).unwrap().satisfies_invariant());
        prop_assert!(schur_vacuum(&v).unwrap().satisfies_invariant());
    }

    #[test]
    fn parity_probabilities_sum_to_one(seed in any::<u64>(), family in 0..FAMILIES.len()) {
        let o = exact_observation(&state(seed, family)).unwrap();
        let (pe, po, p0) = (o.parity.even.probability, o.parity.odd.probability, o.vacuum.probability);
        prop_assert!((pe + po - 1.0).abs() < 1e-12);
        prop_assert!(pe >= p0 && p0 > 0.0 && p0 <= 1.0);
    }

    #[test]
    fn derived_quartet_matches_forward_map(seed in any::<u64>(), family in 0..FAMILIES.len()) {
        let v = state(seed, family);
        let q = derived_quartet(&v.v1(), &v.v2(), &schur_parity(&v).unwrap(), &schur_vacuum(&v).unwrap()).unwrap();
        let f = forward_quartet(v.n2, v.m2, v.ms, v.mc);
        let size = q.scale().max(f.scale()).max(f64::MIN_POSITIVE);
        prop_assert!((q.product() - v.ms * v.mc).norm() / size < 1e-10);
        prop_assert!((q.gamma - f.gamma).abs() / size < 1e-10);
        prop_assert!((q.alpha - f.alpha).abs() / size < 1e-10);
    }

    #[test]
    fn acos_argument_ignores_local_rotations(seed in any::<u64>(), mode in mode(), phi in 0.0..2.0 * PI) {
        let v = generic(seed);
        let w = apply_local_symplectic(&v, &LocalSymplectic::new(mode, 0.0, phi));
        let x = |u: &TwoModeCovariance| {
            let q = derived_quartet(&u.v1(), &u.v2(), &schur_parity(u).unwrap(), &schur_vacuum(u).unwrap()).unwrap();
            acos_argument(&q, u.n2, u.m2).unwrap()
        };
        let (a, b) = (x(&v), x(&w));
        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&a));
        prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
    }

    #[test]
    fn correlation_det_is_a_local_invariant(seed in any::<u64>(), mode in mode(), r in -1.5..1.5f64, s in 0.0..2.0 * PI) {
        let v = generic(seed);
        let w = apply_local_symplectic(&v, &LocalSymplectic::new(mode, r, s));
        let d = v.correlation_det();
        prop_assert!((w.correlation_det() - d).abs() < 1e-9 * scale(&w).powi(2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exact_round_trip_modulo_sign(seed in any::<u64>(), family in 0..FAMILIES.len()) {
        let v = state(seed, family);
        let r = run_protocol(&mut ExactChannel::new(v), &ProtocolConfig::default());
        prop_assert!(r.status.is_success(), "{:?}", r.message);
        let err = aligned_relative_errors(&r.recovered.unwrap(), &v).into_iter().fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "error {:e}", err);
    }

    #[test]
    fn swapped_roles_round_trip(seed in any::<u64>(), family in 0..FAMILIES.len()) {
        let v = state(seed, family).swapped();
        let r = run_protocol(&mut ExactChannel::new(v), &ProtocolConfig::default());
        prop_assert!(r.status.is_success());
        let err = aligned_relative_errors(&r.recovered.unwrap(), &v).into_iter().fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "error {:e}", err);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn noisy_runs_are_seed_deterministic(seed in any::<u64>(), noise_seed in any::<u64>()) {
        let v = generic(seed);
        let cfg = NoisyChannelConfig::uniform(10_000, noise_seed);
        let run = || {
            let mut ch = NoisyChannel::new(v, cfg.clone()).unwrap();
            let r = run_protocol(&mut ch, &ProtocolConfig::default());
            prop_assert_eq!(*ch.truth(), v);
            Ok(r)
        };
        prop_assert_eq!(run()?, run()?);
    }
}

#[test]
fn perturbation_spread_matches_its_sigma() {
    let g = SubensembleMoments::new(0.4, 0.8, Complex64::new(-0.3, 0.2));
    let n = 10_000;
    let expected = perturbation_sigma(g.diag, n, 1.0);
    let draws: Vec<f64> = (0..200)
        .map(|s| perturb_conditioned_moments(&g, n, 1.0, &mut ChaCha8Rng::seed_from_u64(s)).0.diag)
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
    assert!((sd / expected - 1.0).abs() < 0.1, "empirical {sd:e}, expected {expected:e}");
}
