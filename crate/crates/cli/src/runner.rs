//! Experiment orchestration: validates the model once, executes each
//! experiment in order, and emits CSVs (plus an error-vs-t SVG for
//! time-indexed series) under a manifest.

use std::path::Path;

use fklab_core::error::Error;
use fklab_core::ldp::{ldp_curve, rate};
use fklab_core::model::{validate, FkWeight, Observable, SymmetricChain};
use fklab_core::montecarlo::{fk_estimate, tail_probability};
use fklab_core::semigroup::{conditional_mean, conditional_second_moment, MomentReport};
use fklab_core::spectral::{ground_state, qe_quantities, SpectralData};

use crate::artifacts::{fmt_f64, svg_line_plot, ArtifactSink, CsvTable};
use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

fn numeric(e: Error) -> CliError {
    CliError::Numeric(e.to_string())
}

/// Parsed-and-built model bundle shared by all experiments of a run.
pub struct Workbench {
    pub chain: SymmetricChain,
    pub weight: FkWeight,
    pub observable: Observable,
}

impl Workbench {
    /// Builds and validates; a failing report is rendered verbatim.
    pub fn assemble(config: &ExperimentConfig) -> Result<Self, CliError> {
        let chain = config.build_chain()?;
        let weight = config.build_weight(chain.n())?;
        let observable = config.build_observable(chain.n())?;
        let report = validate(&chain, &weight);
        if !report.passed {
            return Err(CliError::Validation(report.to_string()));
        }
        Ok(Self {
            chain,
            weight,
            observable,
        })
    }
}

pub fn run(config: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let bench = Workbench::assemble(config)?;
    let canonical = serde_json::to_string(config).expect("config reserializes");
    let config_hash = crate::artifacts::sha256_hex(canonical.as_bytes());
    let mut sink = ArtifactSink::new(out_dir, config_hash, seed)?;

    for (idx, experiment) in config.experiments.iter().enumerate() {
        let stem = format!("{:02}_{}", idx, experiment.kind());
        match experiment {
            Experiment::Spectral => {
                let sp = ground_state(&bench.chain, &bench.weight, 1.0).map_err(numeric)?;
                let qe = qe_quantities(&bench.chain, &bench.weight, &sp).map_err(numeric)?;
                sink.write(&format!("{stem}.csv"), &spectral_csv(&sp, &qe))?;
            }
            Experiment::Qlimits { t_list } => {
                let mut reports = Vec::new();
                for &t in t_list {
                    reports.push(
                        conditional_mean(&bench.chain, &bench.weight, &bench.observable, t)
                            .map_err(numeric)?,
                    );
                }
                sink.write(&format!("{stem}.csv"), &moments_csv(&reports))?;
                sink.write(&format!("{stem}.svg"), &error_plot(&reports, "conditional mean"))?;
            }
            Experiment::SecondMoments { t_list } => {
                let mut reports = Vec::new();
                for &t in t_list {
                    reports.push(
                        conditional_second_moment(
                            &bench.chain,
                            &bench.weight,
                            &bench.observable,
                            t,
                        )
                        .map_err(numeric)?,
                    );
                }
                sink.write(&format!("{stem}.csv"), &moments_csv(&reports))?;
                sink.write(
                    &format!("{stem}.svg"),
                    &error_plot(&reports, "conditional moments"),
                )?;
            }
            Experiment::Ldp {
                theta_grid,
                gamma_list,
            } => {
                let curve =
                    ldp_curve(&bench.chain, &bench.weight, theta_grid).map_err(numeric)?;
                let mut curve_table = CsvTable::new(vec!["theta", "C", "Cprime", "psi"]);
                for k in 0..curve.thetas.len() {
                    curve_table.push(vec![
                        fmt_f64(curve.thetas[k]),
                        fmt_f64(curve.c[k]),
                        fmt_f64(curve.cprime[k]),
                        fmt_f64(curve.psi[k]),
                    ]);
                }
                sink.write(&format!("{stem}_curve.csv"), &curve_table.render())?;

                let mut rate_table = CsvTable::new(vec![
                    "gamma",
                    "theta_gamma",
                    "rate_legendre",
                    "rate_bilinear",
                    "agreement",
                    "error",
                ]);
                for &gamma in gamma_list {
                    match rate(&bench.chain, &bench.weight, gamma) {
                        Ok(point) => rate_table.push(vec![
                            fmt_f64(gamma),
                            fmt_f64(point.theta_gamma),
                            fmt_f64(point.rate_legendre),
                            fmt_f64(point.rate_bilinear),
                            fmt_f64(point.agreement),
                            String::new(),
                        ]),
                        // infeasible levels annotate their row; the run goes on
                        Err(e @ Error::GammaOutOfRange { .. }) => rate_table.push(vec![
                            fmt_f64(gamma),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            e.to_string().replace(',', ";"),
                        ]),
                        Err(e) => return Err(numeric(e)),
                    }
                }
                sink.write(&format!("{stem}_rates.csv"), &rate_table.render())?;
            }
            Experiment::Mc {
                t,
                n_paths,
                targets,
            } => {
                let mut table = mc_table();
                for &x in targets {
                    let est = fk_estimate(
                        &bench.chain,
                        &bench.weight,
                        &bench.observable,
                        *t,
                        x,
                        *n_paths,
                        seed,
                    )
                    .map_err(numeric)?;
                    table.push(vec![
                        format!("conditional_mean[x={x}]"),
                        fmt_f64(*t),
                        String::new(),
                        String::new(),
                        fmt_f64(est.value),
                        fmt_f64(est.stderr),
                        fmt_f64(est.ess),
                        est.n_paths.to_string(),
                        seed.to_string(),
                    ]);
                }
                sink.write(&format!("{stem}.csv"), &table.render())?;
            }
            Experiment::Tail {
                gamma,
                t,
                theta_tilt,
                n_paths,
            } => {
                let est = tail_probability(
                    &bench.chain,
                    &bench.weight,
                    *gamma,
                    *t,
                    0,
                    *theta_tilt,
                    *n_paths,
                    seed,
                )
                .map_err(numeric)?;
                let mut table = mc_table();
                table.push(vec![
                    "tail_probability".to_string(),
                    fmt_f64(*t),
                    fmt_f64(*gamma),
                    fmt_f64(*theta_tilt),
                    fmt_f64(est.value),
                    fmt_f64(est.stderr),
                    fmt_f64(est.ess),
                    est.n_paths.to_string(),
                    seed.to_string(),
                ]);
                sink.write(&format!("{stem}.csv"), &table.render())?;
            }
        }
    }
    sink.finish()
}

fn mc_table() -> CsvTable {
    CsvTable::new(vec![
        "quantity",
        "t",
        "gamma",
        "theta_tilt",
        "value",
        "stderr",
        "ess",
        "n_paths",
        "seed",
    ])
}

fn spectral_csv(sp: &SpectralData, qe: &fklab_core::spectral::QeQuantities) -> String {
    let mut table = CsvTable::new(vec!["quantity", "i", "j", "value"]);
    let scalar = |table: &mut CsvTable, name: &str, value: f64| {
        table.push(vec![
            name.to_string(),
            String::new(),
            String::new(),
            fmt_f64(value),
        ]);
    };
    scalar(&mut table, "lambda0", sp.lambda0);
    scalar(&mut table, "gap", sp.gap);
    let vector = |table: &mut CsvTable, name: &str, v: &nalgebra::DVector<f64>| {
        for i in 0..v.len() {
            table.push(vec![
                name.to_string(),
                i.to_string(),
                String::new(),
                fmt_f64(v[i]),
            ]);
        }
    };
    vector(&mut table, "spectrum", &sp.spectrum);
    vector(&mut table, "phi0", &sp.phi0);
    vector(&mut table, "nu", &qe.nu);
    vector(&mut table, "eta", &qe.eta);
    let n = qe.jphi.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                table.push(vec![
                    "jphi".to_string(),
                    i.to_string(),
                    j.to_string(),
                    fmt_f64(qe.jphi[(i, j)]),
                ]);
            }
        }
    }
    table.render()
}

fn moments_csv(reports: &[MomentReport]) -> String {
    let mut table = CsvTable::new(vec!["t", "state", "mean", "second", "limit_mean", "abs_error"]);
    for report in reports {
        for s in 0..report.per_state_mean.len() {
            table.push(vec![
                fmt_f64(report.t),
                s.to_string(),
                fmt_f64(report.per_state_mean[s]),
                report
                    .per_state_second
                    .as_ref()
                    .map(|v| fmt_f64(v[s]))
                    .unwrap_or_default(),
                fmt_f64(report.limit_mean),
                fmt_f64((report.per_state_mean[s] - report.limit_mean).abs()),
            ]);
        }
    }
    table.render()
}

/// Worst-start-state error against the limit, on a log10 scale, versus t.
fn error_plot(reports: &[MomentReport], what: &str) -> String {
    let points: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| {
            let worst = (0..r.per_state_mean.len())
                .map(|s| (r.per_state_mean[s] - r.limit_mean).abs())
                .fold(0.0f64, f64::max);
            (r.t, worst.max(1e-300).log10())
        })
        .collect();
    svg_line_plot(
        &format!("{what}: error vs t"),
        "t",
        "log10 worst-state error",
        &points,
    )
}

/// Prints the assembled generator and a spectral summary to stdout.
pub fn describe(config: &ExperimentConfig) -> Result<(), CliError> {
    let bench = Workbench::assemble(config)?;
    let n = bench.chain.n();
    let gen = fklab_core::model::tilted_generator(&bench.chain, &bench.weight, 1.0)
        .map_err(numeric)?;
    println!("states: {n}");
    println!("generator (tilt 1):");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:>12.6}", gen.matrix()[(i, j)])).collect();
        println!("  [{}]", row.join(" "));
    }
    let sp = ground_state(&bench.chain, &bench.weight, 1.0).map_err(numeric)?;
    let qe = qe_quantities(&bench.chain, &bench.weight, &sp).map_err(numeric)?;
    println!("lambda0 = {}", fmt_f64(sp.lambda0));
    println!("gap     = {}", fmt_f64(sp.gap));
    let show = |name: &str, v: &nalgebra::DVector<f64>| {
        let row: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
        println!("{name} = [{}]", row.join(", "));
    };
    show("phi0", &sp.phi0);
    show("nu  ", &qe.nu);
    show("eta ", &qe.eta);
    println!("total tilted jump mass = {}", fmt_f64(qe.jphi.iter().sum::<f64>()));
    Ok(())
}
