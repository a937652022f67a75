//! Subcommand implementations: thin wrappers over the library operations
//! that parse JSON inputs, run one computation, and write artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;

use wtan_core::curves::PathEnsemble;
use wtan_core::measure::DiscreteMeasure;
use wtan_core::ptransport::{enumerate_transports, transport_along_coupling, TransportResult};
use wtan_core::regularity::{holder_report, CouplingSampler, Functional};
use wtan_core::tangent::{compare_by_transport, sheaf_distance, TangentElement};
use wtan_core::transport::{solve_ot, Coupling};
use wtan_core::control::{solve_value, ControlMode, SolveOptions};
use wtan_core::instances;

use crate::error::CliError;
use crate::jsonfmt::{to_string_17, write_atomic, write_json};
use crate::svg::line_chart;

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn apply_merge_override(m: DiscreteMeasure, tol: Option<f64>) -> DiscreteMeasure {
    match tol {
        Some(t) => m.merged(t),
        None => m,
    }
}

#[derive(Serialize)]
struct OtOutput {
    p: f64,
    distance: f64,
    objective: f64,
    dual_gap: f64,
    coupling: Coupling,
}

pub fn cmd_ot(
    a: &Path,
    b: &Path,
    p: f64,
    out: &Path,
    tol_merge: Option<f64>,
) -> Result<(), CliError> {
    let mu = apply_merge_override(read_json::<DiscreteMeasure>(a)?, tol_merge);
    let nu = apply_merge_override(read_json::<DiscreteMeasure>(b)?, tol_merge);
    let sol = wtan_core::transport::solve_ot_certified(&mu, &nu, p)?;
    println!("W_{p} = {:.16e}", sol.distance);
    write_json(
        &out.join("coupling.json"),
        &OtOutput {
            p,
            distance: sol.distance,
            objective: sol.objective,
            dual_gap: sol.dual_gap,
            coupling: sol.coupling,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ScalarOutput {
    value: f64,
}

pub fn cmd_tangent_dist(a: &Path, b: &Path, out: &Path) -> Result<(), CliError> {
    let x: TangentElement = read_json(a)?;
    let y: TangentElement = read_json(b)?;
    let d = wtan_core::tangent::tangent_distance(&x, &y)?;
    println!("d_mu = {d:.16e}");
    write_json(&out.join("tangent-dist.json"), &ScalarOutput { value: d })?;
    Ok(())
}

pub fn cmd_calc_e(a: &Path, b: &Path, out: &Path) -> Result<(), CliError> {
    let x: TangentElement = read_json(a)?;
    let y: TangentElement = read_json(b)?;
    let e = compare_by_transport(&x, &y)?;
    println!("E = {e:.16e}");
    write_json(&out.join("calc-E.json"), &ScalarOutput { value: e })?;
    Ok(())
}

pub fn cmd_calc_d(a: &Path, b: &Path, out: &Path) -> Result<(), CliError> {
    let x: TangentElement = read_json(a)?;
    let y: TangentElement = read_json(b)?;
    let d = sheaf_distance(&x, &y)?;
    println!("D = {d:.16e}");
    write_json(&out.join("calc-D.json"), &ScalarOutput { value: d })?;
    Ok(())
}

#[derive(Serialize)]
struct TransportOutput<'a> {
    source: &'a TangentElement,
    arrival: &'a TangentElement,
    ensemble: &'a PathEnsemble,
}

fn write_transport(tr: &TransportResult, path: &Path) -> Result<(), CliError> {
    write_json(
        path,
        &TransportOutput {
            source: tr.source(),
            arrival: tr.arrival(),
            ensemble: tr.ensemble(),
        },
    )?;
    Ok(())
}

pub fn cmd_ptransport(
    element: &Path,
    coupling: &Path,
    enumerate: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let e: TangentElement = read_json(element)?;
    let gamma: Coupling = read_json(coupling)?;
    match enumerate {
        None => {
            let tr = transport_along_coupling(&e, &gamma)?;
            println!("1 transport written (canonical)");
            write_transport(&tr, &out.join("transport.json"))?;
        }
        Some(limit) => {
            let laws = enumerate_transports(&e, &gamma, limit)?;
            println!("{} transport laws", laws.len());
            for (k, tr) in laws.iter().enumerate() {
                write_transport(tr, &out.join(format!("transport-{k}.json")))?;
            }
        }
    }
    Ok(())
}

pub fn cmd_translate(
    eta: &Path,
    gamma0: &Path,
    out: &Path,
    svg: bool,
) -> Result<(), CliError> {
    let ensemble: PathEnsemble = read_json(eta)?;
    let coupling: Coupling = read_json(gamma0)?;
    let (pair, translated) = ensemble.translate(&coupling)?;
    write_json(&out.join("translated.json"), &translated)?;
    write_json(&out.join("coupling-curve.json"), &pair)?;
    write_atomic(&out.join("translated.csv"), translated.to_csv().as_bytes())?;
    // distance curve between the source and its translation
    let mut csv = String::from("t,w2,w2sq\n");
    let mut curve = Vec::new();
    for &t in ensemble.grid() {
        let (_, w) = solve_ot(&ensemble.marginal_at(t), &translated.marginal_at(t), 2.0)?;
        csv.push_str(&format!("{t:.16e},{w:.16e},{:.16e}\n", w * w));
        curve.push((t, w * w));
    }
    write_atomic(&out.join("distance-curve.csv"), csv.as_bytes())?;
    if svg {
        let chart = line_chart(
            "squared distance to the translation",
            "t",
            "W2^2",
            &[("W2^2".into(), curve)],
        );
        write_atomic(&out.join("distance-curve.svg"), chart.as_bytes())?;
    }
    println!(
        "translated {} trajectories over {} grid times",
        translated.trajectories().len(),
        translated.grid().len()
    );
    Ok(())
}

pub fn library_functional(name: &str, reference: Option<&Path>) -> Result<Functional, CliError> {
    match name {
        "linear-quadratic" => Ok(wtan_core::regularity::linear_half_square()),
        "interaction-quadratic" => Ok(wtan_core::regularity::interaction_half_square()),
        "half-squared-w2" => {
            let r = match reference {
                Some(p) => read_json::<DiscreteMeasure>(p)?,
                None => DiscreteMeasure::new(
                    1,
                    vec![vec![-1.0], vec![1.0]],
                    vec![0.5, 0.5],
                )
                .expect("default reference"),
            };
            Ok(Functional::half_squared_w2_to_ref(r))
        }
        other => Err(CliError::Usage(format!(
            "unknown functional '{other}'; known: linear-quadratic, interaction-quadratic, half-squared-w2"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_holder(
    functional: &str,
    reference: Option<&Path>,
    alpha: f64,
    budget: usize,
    seed: u64,
    dim: usize,
    out: &Path,
    svg: bool,
) -> Result<(), CliError> {
    let u = library_functional(functional, reference)?;
    let sampler = CouplingSampler::new(seed, dim);
    let report = holder_report(&u, &sampler, alpha, budget)?;
    println!(
        "I_est = {:.16e}, J_est = {:.16e} ({} samples)",
        report.i_est, report.j_est, report.samples
    );
    write_json(&out.join("holder.json"), &report)?;
    if svg {
        // running maximum of the quotient over the sample stream
        let mut running = Vec::new();
        let mut best = 0.0_f64;
        for idx in 0..budget as u64 {
            let (mu, nu, gamma) = sampler.sample(idx);
            if let Ok(q) = wtan_core::regularity::holder_quotient(&u, &mu, &nu, &gamma, alpha) {
                best = best.max(q);
            }
            running.push((idx as f64, best));
        }
        let chart = line_chart(
            "running Holder-quotient maximum",
            "sample",
            "estimate",
            &[("I running max".into(), running)],
        );
        write_atomic(&out.join("holder.svg"), chart.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ControlOutput {
    mode: String,
    value: f64,
    kinetic: f64,
    starts: usize,
    budget_exhausted: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_control(
    problem: &str,
    m0_path: Option<&Path>,
    mode: &str,
    starts: usize,
    branches: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let (p, default_m0) = match problem {
        "split-target" => instances::split_target(0.05, 40, 16),
        "lipschitz" => {
            let (base, _) = instances::lipschitz_pairs(&[0.1]);
            (instances::lipschitz_problem(20), base)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown problem '{other}'; known: split-target, lipschitz"
            )))
        }
    };
    let m0 = match m0_path {
        Some(path) => read_json::<DiscreteMeasure>(path)?,
        None => default_m0,
    };
    let mode = match mode {
        "det" | "deterministic" => ControlMode::DeterministicConstrained,
        "randomized" | "rand" => ControlMode::Randomized,
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode '{other}'; known: det, randomized"
            )))
        }
    };
    let opts = SolveOptions { starts, branches, max_iters: 120, init_scale: 1.0, seed };
    let outcome = solve_value(&p, &m0, mode, &opts)?;
    println!("value = {:.16e} (upper bound)", outcome.value);
    write_json(
        &out.join("control.json"),
        &ControlOutput {
            mode: format!("{mode:?}"),
            value: outcome.value,
            kinetic: outcome.kinetic,
            starts: outcome.starts_used,
            budget_exhausted: outcome.budget_exhausted,
        },
    )?;
    Ok(())
}

/// Writes a value as pretty-printed JSON to stdout (17 significant digits).
pub fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", to_string_17(value)?);
    Ok(())
}

pub fn ensure_out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("wtan-out"))
}
