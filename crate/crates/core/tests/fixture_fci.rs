use std::path::PathBuf;

use idmft_core::fock::one_rdm_from_ci;
use idmft_core::functionals::{cumulant_energy, energy_components};
use idmft_core::{parse_fcidump, solve_fci};
use rayon::prelude::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn table() -> Vec<(String, f64)> {
    let text = std::fs::read_to_string(fixtures().join("reference_energies.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn every_fixture_matches_reference_fci() {
    let rows = table();
    assert_eq!(rows.len(), 111);
    let worst = rows
        .par_iter()
        .map(|(file, e_ref)| {
            let ints = parse_fcidump(&std::fs::read_to_string(fixtures().join(file)).unwrap())
                .unwrap()
                .integrals;
            let e = solve_fci(&ints).unwrap().energy;
            ((e - e_ref).abs(), file.clone())
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    // reference values carry 12 decimals
    assert!(worst.0 < 2e-9, "{} off by {:.2e}", worst.1, worst.0);
}

#[test]
fn energy_splits_into_one_body_mean_field_and_cumulant() {
    for file in ["h2/h2_R0.74.fcidump", "heh_plus/heh_plus_R1.50.fcidump"] {
        let ints = parse_fcidump(&std::fs::read_to_string(fixtures().join(file)).unwrap())
            .unwrap()
            .integrals;
        let sol = solve_fci(&ints).unwrap();
        let c = sol.civector();
        let gamma = one_rdm_from_ci(&c).unwrap();
        let (one, y) = energy_components(&gamma, &ints).unwrap();
        let cum = cumulant_energy(&c, &ints).unwrap();
        assert!(
            (one + y + cum + ints.core_energy() - sol.energy).abs() < 1e-10,
            "{file}"
        );
        assert!(cum < 0.0);
        assert!((gamma.trace() - 2.0).abs() < 1e-12);
    }
}
