//! Shared inputs for the benchmarks in `benches/`.

use std::path::PathBuf;

use idmft_core::{parse_fcidump, IntegralSet};

/// Loads a committed cc-pVDZ fixture, e.g. `"h2/h2_R0.74.fcidump"`.
pub fn fixture(rel: &str) -> IntegralSet {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_fcidump(&text).expect("fixture parses").integrals
}
