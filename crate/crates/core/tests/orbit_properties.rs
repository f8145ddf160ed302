mod common;

use common::{density_with_spectrum, random_spectrum, rng};
use hamrecon::examples::haar_unitary;
use hamrecon::orbit::{
    canonical_traceless, classify, dual_coefficients, projector_coefficients, spectrum_from_dual, WeylBasis,
    DEFAULT_CLUSTER_TOL,
};
use hamrecon::state::validate_density;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn classify_is_conjugation_invariant(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let rho = density_with_spectrum(&random_spectrum(n, &mut r), &mut r);
        let v = haar_unitary(n, &mut r);
        let moved = validate_density(&(&(&v * rho.matrix()) * &v.adjoint()).hermitian_part(), 1e-10).unwrap();
        let a = classify(&rho, DEFAULT_CLUSTER_TOL);
        let b = classify(&moved, DEFAULT_CLUSTER_TOL);
        for (x, y) in a.canonical_spectrum.iter().zip(&b.canonical_spectrum) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
        prop_assert_eq!(a.multiplicities, b.multiplicities);
        prop_assert_eq!(a.dimension, b.dimension);
    }

    #[test]
    fn chamber_coordinates_reproduce_canonical_form(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let rho = density_with_spectrum(&random_spectrum(n, &mut r), &mut r);
        let desc = classify(&rho, DEFAULT_CLUSTER_TOL);
        let mu = canonical_traceless(&desc);
        let basis = WeylBasis::new(n);
        prop_assert!(basis.combine_pis(&desc.c_coeffs).max_abs_diff(mu.matrix()) <= 1e-12);
        prop_assert!(basis.combine_gammas(&desc.b_coeffs).max_abs_diff(mu.matrix()) <= 1e-12);
        prop_assert_eq!(projector_coefficients(&mu, 1e-12).unwrap(), desc.c_coeffs.clone());
    }

    #[test]
    fn generic_orbits_have_dimension_n2_minus_n(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let rho = density_with_spectrum(&random_spectrum(n, &mut r), &mut r);
        let desc = classify(&rho, DEFAULT_CLUSTER_TOL);
        prop_assume!(desc.multiplicities.iter().all(|&m| m == 1));
        prop_assert_eq!(desc.dimension, n * n - n);
    }

    #[test]
    fn pure_orbits_have_dimension_2n_minus_2(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let mut spectrum = vec![0.0; n];
        spectrum[0] = 1.0;
        let rho = density_with_spectrum(&spectrum, &mut r);
        let desc = classify(&rho, DEFAULT_CLUSTER_TOL);
        prop_assert!(desc.is_pure);
        prop_assert_eq!(desc.dimension, 2 * (n - 1));
    }

    #[test]
    fn dual_coordinates_round_trip(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let spectrum = random_spectrum(n, &mut r);
        let b: Vec<f64> = spectrum.windows(2).map(|w| w[0] - w[1]).collect();
        let back = spectrum_from_dual(&b, n);
        for (x, y) in back.iter().zip(&spectrum) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
        let mu = hamrecon::state::TracelessState::from_real_diagonal(
            &back.iter().map(|l| l - 1.0 / n as f64).collect::<Vec<_>>(),
            1e-12,
        )
        .unwrap();
        let again = dual_coefficients(&mu, 1e-12).unwrap();
        for (x, y) in again.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }
}
