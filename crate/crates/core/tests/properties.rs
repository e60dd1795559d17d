use idmft_core::analysis::single_valuedness_points;
use idmft_core::functionals::PenaltyFunctional;
use idmft_core::minimizer::project_capped_simplex;
use idmft_core::rdm::{assemble_onerdm, frobenius_distance, natural_decomposition};
use idmft_core::{hubbard_dimer, solve_fci, OneRDM};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn penalty() -> impl Strategy<Value = PenaltyFunctional> {
    prop_oneof![
        Just(PenaltyFunctional::PhEntropy),
        Just(PenaltyFunctional::SqrtPh),
        (0.05f64..0.95).prop_map(|p| PenaltyFunctional::Power { p }),
    ]
}

proptest! {
    #[test]
    fn penalties_are_particle_hole_symmetric(p in penalty(), n in prop::collection::vec(0.0f64..=1.0, 1..12)) {
        let flipped: Vec<f64> = n.iter().map(|x| 1.0 - x).collect();
        prop_assert!((p.value(&n) - p.value(&flipped)).abs() < 1e-12);
    }

    #[test]
    fn inverse_derivative_inverts(p in penalty(), n in 1e-6f64..(1.0 - 1e-6)) {
        let back = p.inverse_derivative(p.term_derivative(n));
        prop_assert!((back - n).abs() < 1e-8 * (1.0 + 1.0 / n.min(1.0 - n)).min(1e4), "{n} -> {back}");
    }

    #[test]
    fn projection_is_feasible(x in prop::collection::vec(-2.0f64..3.0, 2..10), frac in 0.05f64..0.95) {
        let x = DVector::from_vec(x);
        let target = frac * x.len() as f64;
        let p = project_capped_simplex(&x, target);
        prop_assert!((p.sum() - target).abs() < 1e-10);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // idempotent
        let q = project_capped_simplex(&p, target);
        prop_assert!((&q - &p).amax() < 1e-10);
    }

    #[test]
    fn dimer_fci_is_exact(t in 0.01f64..3.0, u in 0.0f64..6.0) {
        let e = solve_fci(&hubbard_dimer(t, u)).unwrap().energy;
        prop_assert!((e - (u / 2.0 - (u * u / 4.0 + 4.0 * t * t).sqrt())).abs() < 1e-10);
    }

    #[test]
    fn natural_decomposition_reassembles(n in prop::collection::vec(0.0f64..=1.0, 4), angle in -3.0f64..3.0) {
        let (c, s) = (angle.cos(), angle.sin());
        let mut chi = DMatrix::identity(4, 4);
        chi[(0, 0)] = c; chi[(0, 2)] = -s; chi[(2, 0)] = s; chi[(2, 2)] = c;
        let gamma = assemble_onerdm(&DVector::from_vec(n.clone()), &chi).unwrap();
        let nat = natural_decomposition(&gamma).unwrap();
        prop_assert!(nat.occupations.iter().zip(nat.occupations.iter().skip(1)).all(|(a, b)| a >= b));
        let back = assemble_onerdm(&nat.occupations, &nat.orbitals).unwrap();
        prop_assert!(frobenius_distance(&gamma, &back).unwrap() < 1e-12);
    }

    #[test]
    fn frobenius_distance_is_a_metric(a in prop::collection::vec(0.0f64..=1.0, 3), b in prop::collection::vec(0.0f64..=1.0, 3)) {
        let ga = OneRDM::new(DMatrix::from_diagonal(&DVector::from_vec(a))).unwrap();
        let gb = OneRDM::new(DMatrix::from_diagonal(&DVector::from_vec(b))).unwrap();
        let d = frobenius_distance(&ga, &gb).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - frobenius_distance(&gb, &ga).unwrap()).abs() < 1e-15);
        prop_assert_eq!(frobenius_distance(&ga, &ga).unwrap(), 0.0);
    }

    #[test]
    fn single_valuedness_is_permutation_stable(
        pts in prop::collection::vec((0.0f64..2.0, -1.0f64..0.0), 2..20),
        shift in 0usize..20,
    ) {
        let v = single_valuedness_points(&pts, 0.05, 0.05).unwrap();
        let mut rotated = pts.clone();
        let k = shift % rotated.len();
        rotated.rotate_left(k);
        let w = single_valuedness_points(&rotated, 0.05, 0.05).unwrap();
        prop_assert_eq!(v.single_valued, w.single_valued);
        prop_assert_eq!(v.witnesses.len(), w.witnesses.len());
        prop_assert_eq!(v.single_valued, v.witnesses.is_empty());
    }
}
