use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{pair_index, FoldedEri, IntegralSet};
use crate::error::{Error, Result};

/// Entries that differ by more than this are reported when overwritten.
const DUPLICATE_TOLERANCE: f64 = 1e-10;

/// Smallest magnitude written by [`emit_fcidump`].
const EMIT_THRESHOLD: f64 = 1e-14;

/// A parsed FCIDUMP together with non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct ParsedFcidump {
    pub integrals: IntegralSet,
    pub warnings: Vec<String>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits the `&FCI ... &END` namelist into `KEY -> values`.
fn parse_header(text: &str) -> BTreeMap<String, Vec<String>> {
    let mut keys: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for raw in text.split(|c: char| c == ',' || c.is_whitespace()) {
        let tok = raw.trim();
        if tok.is_empty() {
            continue;
        }
        let upper = tok.to_ascii_uppercase();
        if upper == "&FCI" || upper == "&END" || upper == "/" {
            continue;
        }
        if let Some((k, v)) = upper.split_once('=') {
            let k = k.trim().to_string();
            let entry = keys.entry(k.clone()).or_default();
            entry.clear();
            if !v.is_empty() {
                entry.push(v.to_string());
            }
            current = Some(k);
        } else if let Some(k) = &current {
            keys.entry(k.clone()).or_default().push(upper);
        }
    }
    keys
}

fn header_int(keys: &BTreeMap<String, Vec<String>>, key: &str) -> Result<Option<i64>> {
    match keys.get(key).and_then(|v| v.first()) {
        None => Ok(None),
        Some(v) => v
            .parse::<i64>()
            .map(Some)
            .map_err(|_| parse_err(1, format!("header key {key} has non-integer value '{v}'"))),
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    if tok.starts_with('(') {
        return Err(parse_err(line, "complex integrals are not supported"));
    }
    let normalized: String = tok
        .chars()
        .map(|c| if c == 'D' || c == 'd' { 'e' } else { c })
        .collect();
    normalized
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, format!("non-numeric value '{tok}'")))
}

/// Parses FCIDUMP text (chemists' notation, 1-based indices).
///
/// Point-group labels are read and ignored. Duplicate entries overwrite
/// earlier ones; conflicting duplicates are reported in `warnings`.
pub fn parse_fcidump(text: &str) -> Result<ParsedFcidump> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| l.trim_start().to_ascii_uppercase().starts_with("&FCI"))
        .ok_or_else(|| parse_err(1, "missing &FCI namelist header"))?;
    let end = lines[start..]
        .iter()
        .position(|l| {
            let u = l.trim().to_ascii_uppercase();
            u.contains("&END") || u == "/" || u.ends_with(" /") || u.ends_with(",/")
        })
        .map(|k| start + k)
        .ok_or_else(|| parse_err(start + 1, "unterminated &FCI namelist (no &END)"))?;
    let header = lines[start..=end].join("\n");
    let keys = parse_header(&header);

    let norb = header_int(&keys, "NORB")?.ok_or_else(|| parse_err(start + 1, "header missing NORB"))?;
    let nelec = header_int(&keys, "NELEC")?.ok_or_else(|| parse_err(start + 1, "header missing NELEC"))?;
    let ms2 = header_int(&keys, "MS2")?.ok_or_else(|| parse_err(start + 1, "header missing MS2"))?;
    if header_int(&keys, "IUHF")?.unwrap_or(0) != 0 {
        return Err(parse_err(start + 1, "unrestricted (IUHF) integrals are not supported"));
    }
    if norb <= 0 || nelec < 0 {
        return Err(parse_err(start + 1, format!("invalid NORB={norb} or NELEC={nelec}")));
    }
    let d = norb as usize;

    let mut h = DMatrix::zeros(d, d);
    let mut w = FoldedEri::zeros(d);
    let mut core = 0.0;
    let mut h_seen = vec![false; d * (d + 1) / 2];
    let mut w_seen = vec![false; w.n_unique()];
    let mut core_seen = false;
    let mut warnings = Vec::new();

    for (k, raw) in lines.iter().enumerate().skip(end + 1) {
        let line_no = k + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(parse_err(
                line_no,
                format!("expected 'value i j k l', found {} fields", toks.len()),
            ));
        }
        let value = parse_value(toks[0], line_no)?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&toks[1..]) {
            let v: i64 = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("non-integer index '{tok}'")))?;
            if v < 0 || v > norb {
                return Err(parse_err(line_no, format!("index {v} out of range [0, {norb}]")));
            }
            *slot = v as usize;
        }
        let [i, j, kk, l] = idx;
        let mut note = |what: String, old: f64| {
            if (old - value).abs() > DUPLICATE_TOLERANCE {
                warnings.push(format!(
                    "line {line_no}: duplicate {what} overwrites {old:e} with {value:e}"
                ));
            }
        };
        match (i, j, kk, l) {
            (0, 0, 0, 0) => {
                if core_seen {
                    note("core energy".into(), core);
                }
                core = value;
                core_seen = true;
            }
            (i, j, 0, 0) if i > 0 && j > 0 => {
                let slot = pair_index(i - 1, j - 1);
                if h_seen[slot] {
                    note(format!("h({i},{j})"), h[(i - 1, j - 1)]);
                }
                h[(i - 1, j - 1)] = value;
                h[(j - 1, i - 1)] = value;
                h_seen[slot] = true;
            }
            // orbital energies, not part of the Hamiltonian
            (i, 0, 0, 0) if i > 0 => {}
            (i, j, kk, l) if i > 0 && j > 0 && kk > 0 && l > 0 => {
                let slot = FoldedEri::index(i - 1, j - 1, kk - 1, l - 1);
                if w_seen[slot] {
                    note(format!("({i}{j}|{kk}{l})"), w.data[slot]);
                }
                w.data[slot] = value;
                w_seen[slot] = true;
            }
            _ => {
                return Err(parse_err(
                    line_no,
                    format!("unrecognized index pattern {i} {j} {kk} {l}"),
                ))
            }
        }
    }

    let integrals = IntegralSet::new(nelec as usize, ms2 as i32, core, h, w)?;
    Ok(ParsedFcidump { integrals, warnings })
}

/// Formats `v` with 16 significant digits and a signed two-digit exponent.
pub(crate) fn format_sci16(v: f64) -> String {
    let s = format!("{:.15e}", v);
    let (mantissa, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn push_record(out: &mut String, value: f64, i: usize, j: usize, k: usize, l: usize) {
    let _ = writeln!(out, "{:>23} {:>4} {:>4} {:>4} {:>4}", format_sci16(value), i, j, k, l);
}

/// Canonical FCIDUMP text: header, unique two-electron entries, one-electron
/// entries (`i >= j`), then the core energy.
pub fn emit_fcidump(ints: &IntegralSet) -> String {
    let d = ints.n_spatial();
    let mut out = String::new();
    let _ = writeln!(out, " &FCI NORB={},NELEC={},MS2={},", d, ints.n_electrons(), ints.ms2());
    let orbsym: String = (0..d).map(|_| "1,").collect();
    let _ = writeln!(out, "  ORBSYM={orbsym}");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for (p, q, r, s, v) in ints.w().iter_unique() {
        if v.abs() > EMIT_THRESHOLD {
            push_record(&mut out, v, p + 1, q + 1, r + 1, s + 1);
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = ints.h()[(i, j)];
            if v.abs() > EMIT_THRESHOLD {
                push_record(&mut out, v, i + 1, j + 1, 0, 0);
            }
        }
    }
    push_record(&mut out, ints.core_energy(), 0, 0, 0, 0);
    out
}
