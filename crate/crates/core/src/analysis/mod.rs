//! Geometry scans and the diagnostics run over them: cumulant energy
//! against entropy, single-valuedness, 1RDM error curves, Schur-convexity
//! of penalties and their small-occupation divergence.

mod diagnostics;
mod io;
mod scan;
mod schur;

pub use diagnostics::{
    default_tolerances, linear_fit_cum_vs_s, rdm_error_curve, single_valuedness, single_valuedness_points, LinearFit,
    SingleValuednessVerdict,
};
pub use io::{records_from_json, records_to_csv, records_to_json, RowMajor, CSV_HEADER};
pub use scan::{
    dimer_series, scan_geometries, scan_geometries_with, Geometry, IdmftPoint, ScanConfig, ScanError, ScanRecord,
    SeparationUnit,
};
pub use schur::{
    exchange_force_exponent, exchange_force_exponent_of, schur_convexity_check, schur_convexity_check_penalty,
    ExchangeForceFit, SchurConfig, SchurVerdict, SchurViolation, LOGARITHMIC_R2,
};
