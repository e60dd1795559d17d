use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use idmft_core::analysis::{
    default_tolerances, dimer_series, exchange_force_exponent, linear_fit_cum_vs_s, rdm_error_curve, records_from_json,
    records_to_csv, records_to_json, scan_geometries_with, schur_convexity_check_penalty, single_valuedness,
    ExchangeForceFit, Geometry, LinearFit, RowMajor, ScanConfig, SchurConfig, SchurVerdict, SeparationUnit,
    SingleValuednessVerdict,
};
use idmft_core::fock::one_rdm_from_ci;
use idmft_core::functionals::cumulant_energy;
use idmft_core::minimizer::{fit_kappa_b_with, minimize_idmft_with, FitConfig, MinimizeConfig};
use idmft_core::rdm::natural_decomposition;
use idmft_core::{hubbard_dimer, parse_fcidump, solve_fci, FunctionalParams, IntegralSet, PenaltyFunctional};
use serde::Serialize;

use crate::{Cli, Command, Input};

/// Files a command produces; without an output directory the first one is
/// printed to stdout.
struct Output {
    files: Vec<(&'static str, String)>,
}

pub fn run(cli: Cli) -> Result<()> {
    let minimize = MinimizeConfig {
        tolerance: cli.tolerance,
        starts: cli.starts,
        ..MinimizeConfig::default()
    };
    let out = match cli.command {
        Command::Fci { input } => fci(&input).context("fci")?,
        Command::Scan {
            files,
            model,
            functional,
        } => {
            let series = match (model.model, model.t_list, model.u) {
                (Some(_), Some(ts), Some(u)) => dimer_series(&ts, u),
                _ => load_series(&files)?,
            };
            let params = match (functional.kappa, functional.b) {
                (Some(k), Some(b)) => Some(FunctionalParams::new(k, b, functional.penalty)?),
                _ => None,
            };
            scan(&series, params.as_ref(), minimize, cli.out_dir.as_deref()).context("scan")?
        }
        Command::Fit {
            eq,
            diss,
            e_eq,
            e_diss,
            model,
            t_eq,
            t_diss,
            u,
            penalty,
            kappa_max,
        } => {
            let (a, b) = match (model, eq, diss) {
                (Some(_), _, _) => (
                    hubbard_dimer(t_eq.unwrap_or_default(), u.unwrap_or_default()),
                    hubbard_dimer(t_diss.unwrap_or_default(), u.unwrap_or_default()),
                ),
                (None, Some(eq), Some(diss)) => (load(&eq)?, load(&diss)?),
                _ => bail!("fit: give --eq and --diss files or --model dimer"),
            };
            let config = FitConfig {
                kappa_max,
                minimize,
                ..FitConfig::default()
            };
            fit(&a, &b, e_eq, e_diss, penalty, &config).context("fit")?
        }
        Command::Idmft {
            input,
            kappa,
            b,
            penalty,
        } => {
            let params = FunctionalParams::new(kappa, b, penalty)?;
            idmft(&input, &params, &minimize).context("idmft")?
        }
        Command::Analyze { scan, eps_s, eps_e } => analyze(&scan, eps_s, eps_e).context("analyze")?,
        Command::Schur {
            penalty,
            m,
            trials,
            seed,
        } => schur(
            penalty,
            m,
            &SchurConfig {
                trials,
                seed,
                ..SchurConfig::default()
            },
        )
        .context("schur")?,
    };
    emit(out, cli.out_dir.as_deref())
}

fn emit(out: Output, dir: Option<&Path>) -> Result<()> {
    match dir {
        None => {
            let (_, main) = out.files.first().expect("every command produces a document");
            print!("{main}");
            if !main.ends_with('\n') {
                println!();
            }
        }
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, contents) in &out.files {
                let path = dir.join(name);
                fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<IntegralSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse_fcidump(&text).with_context(|| format!("parsing {}", path.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed.integrals)
}

fn load_input(input: &Input) -> Result<(String, IntegralSet)> {
    match (&input.file, input.t, input.u) {
        (Some(path), _, _) => Ok((path.display().to_string(), load(path)?)),
        (None, Some(t), Some(u)) => Ok((format!("dimer t={t} U={u}"), hubbard_dimer(t, u))),
        _ => bail!("no input: give an FCIDUMP file or --model dimer --t T --U U"),
    }
}

/// `R` from a `_R<value>` file-name suffix (as in `h2_R0.74.fcidump`).
fn separation_from_name(path: &Path) -> Option<f64> {
    let stem = path.file_stem()?.to_str()?;
    stem.rsplit_once("_R")?.1.parse().ok()
}

fn load_series(files: &[PathBuf]) -> Result<Vec<Geometry>> {
    if files.is_empty() {
        bail!("no geometries: give FCIDUMP files or --model dimer --t-list ... --U ...");
    }
    files
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let (r, unit) = match separation_from_name(path) {
                Some(r) => (r, SeparationUnit::Angstrom),
                None => (i as f64, SeparationUnit::Model),
            };
            Ok(Geometry {
                label: path
                    .file_stem()
                    .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into()),
                r,
                unit,
                integrals: load(path)?,
            })
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Serialize)]
struct FciReport {
    input: String,
    energy: f64,
    occupations: Vec<f64>,
    entropy: f64,
    cumulant_energy: f64,
    gamma: RowMajor,
}

fn fci(input: &Input) -> Result<Output> {
    let (name, ints) = load_input(input)?;
    let sol = solve_fci(&ints)?;
    let civ = sol.civector();
    let gamma = one_rdm_from_ci(&civ)?;
    let occupations: Vec<f64> = natural_decomposition(&gamma)?.occupations.iter().copied().collect();
    let report = FciReport {
        input: name,
        energy: sol.energy,
        entropy: PenaltyFunctional::PhEntropy.value(&occupations),
        cumulant_energy: cumulant_energy(&civ, &ints)?,
        gamma: RowMajor::from(gamma.matrix()),
        occupations,
    };
    let mut text = String::new();
    writeln!(text, "E_fci       {}", num(report.energy))?;
    writeln!(text, "E_cum       {}", num(report.cumulant_energy))?;
    writeln!(text, "S           {}", num(report.entropy))?;
    let occ: Vec<String> = report.occupations.iter().map(|&n| num(n)).collect();
    writeln!(text, "occupations {}", occ.join(" "))?;
    Ok(Output {
        files: vec![("fci.txt", text), ("fci.json", to_json(&report))],
    })
}

/// On failure the geometries finished before the failing one are kept in
/// `scan.partial.json` when an output directory is set.
fn scan(
    series: &[Geometry],
    params: Option<&FunctionalParams>,
    minimize: MinimizeConfig,
    out_dir: Option<&Path>,
) -> Result<Output> {
    let config = ScanConfig {
        minimize,
        ..ScanConfig::default()
    };
    let records = match scan_geometries_with(series, params, &config) {
        Ok(r) => r,
        Err(e) => {
            if let (Some(dir), false) = (out_dir, e.completed.is_empty()) {
                emit(
                    Output {
                        files: vec![("scan.partial.json", records_to_json(&e.completed))],
                    },
                    Some(dir),
                )?;
            }
            return Err(e.into());
        }
    };
    Ok(Output {
        files: vec![
            ("scan.csv", records_to_csv(&records)),
            ("scan.json", records_to_json(&records)),
        ],
    })
}

#[derive(Serialize)]
struct FitReport {
    kappa: f64,
    b: f64,
    penalty: String,
    residual_eq: f64,
    residual_diss: f64,
    bracket: (f64, f64),
    evaluations: usize,
    e_eq: f64,
    e_diss: f64,
}

fn fit(
    eq: &IntegralSet,
    diss: &IntegralSet,
    e_eq: Option<f64>,
    e_diss: Option<f64>,
    penalty: PenaltyFunctional,
    config: &FitConfig,
) -> Result<Output> {
    let reference = |given: Option<f64>, ints: &IntegralSet| -> Result<f64> {
        Ok(match given {
            Some(e) => e,
            None => solve_fci(ints)?.energy,
        })
    };
    let (e_eq, e_diss) = (reference(e_eq, eq)?, reference(e_diss, diss)?);
    let r = fit_kappa_b_with(eq, diss, e_eq, e_diss, penalty, config)?;
    let report = FitReport {
        kappa: r.kappa,
        b: r.b,
        penalty: penalty.to_string(),
        residual_eq: r.residuals.0,
        residual_diss: r.residuals.1,
        bracket: r.bracket,
        evaluations: r.evaluations,
        e_eq,
        e_diss,
    };
    Ok(Output {
        files: vec![("fit.json", to_json(&report))],
    })
}

#[derive(Serialize)]
struct IdmftReport {
    input: String,
    kappa: f64,
    b: f64,
    penalty: String,
    energy: f64,
    penalty_value: f64,
    converged: bool,
    gradient_norm: f64,
    iterations: usize,
    degeneracy_flag: bool,
    start: usize,
    occupations: Vec<f64>,
    gamma: RowMajor,
}

fn idmft(input: &Input, params: &FunctionalParams, config: &MinimizeConfig) -> Result<Output> {
    let (name, ints) = load_input(input)?;
    let r = minimize_idmft_with(&ints, params, None, config)?;
    let mut occupations: Vec<f64> = r.occupations.iter().copied().collect();
    occupations.sort_by(|a, b| b.total_cmp(a));
    let report = IdmftReport {
        input: name,
        kappa: params.kappa,
        b: params.b,
        penalty: params.penalty.to_string(),
        energy: r.energy,
        penalty_value: r.penalty_value,
        converged: r.converged,
        gradient_norm: r.gradient_norm,
        iterations: r.iterations,
        degeneracy_flag: r.degeneracy_flag,
        start: r.start,
        occupations,
        gamma: RowMajor::from(r.gamma.matrix()),
    };
    Ok(Output {
        files: vec![("idmft.json", to_json(&report))],
    })
}

#[derive(Serialize)]
struct AnalyzeReport {
    points: usize,
    linear_fit: Option<LinearFit>,
    single_valuedness: SingleValuednessVerdict,
    /// `(R, Frobenius error)`; absent when the scan has no i-DMFT data.
    error_curve: Option<Vec<(f64, f64)>>,
}

fn analyze(path: &Path, eps_s: Option<f64>, eps_e: Option<f64>) -> Result<Output> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let records = records_from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (ds, de) = default_tolerances(&records);
    // a flat coordinate would give a zero default; fall back to a tiny positive width
    let positive = |given: Option<f64>, default: f64| given.unwrap_or(if default > 0.0 { default } else { 1e-12 });
    let verdict = single_valuedness(&records, positive(eps_s, ds), positive(eps_e, de))?;
    let has_idmft = !records.is_empty() && records.iter().all(|r| r.idmft.is_some());
    let report = AnalyzeReport {
        points: records.len(),
        linear_fit: linear_fit_cum_vs_s(&records).ok(),
        single_valuedness: verdict,
        error_curve: if has_idmft {
            Some(rdm_error_curve(&records)?)
        } else {
            None
        },
    };
    Ok(Output {
        files: vec![("analyze.json", to_json(&report))],
    })
}

#[derive(Serialize)]
struct SchurReport {
    penalty: String,
    m: usize,
    seed: u64,
    verdict: SchurVerdict,
    exchange_force: ExchangeForceFit,
}

fn schur(penalty: PenaltyFunctional, m: usize, config: &SchurConfig) -> Result<Output> {
    let report = SchurReport {
        penalty: penalty.to_string(),
        m,
        seed: config.seed,
        verdict: schur_convexity_check_penalty(penalty, m, config)?,
        exchange_force: exchange_force_exponent(penalty)?,
    };
    Ok(Output {
        files: vec![("schur.json", to_json(&report))],
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
