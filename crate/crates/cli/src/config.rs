//! Experiment configuration: JSON in, validated model objects out.
//!
//! Matrices are row-major arrays of arrays; reals are plain JSON numbers.
//! Exactly one model source is given (the enum enforces it), the weight and
//! observable default to zero, and every experiment is a tagged request.

use std::path::PathBuf;

use fklab_core::model::{build_discrete_stable, FkWeight, Observable, SymmetricChain};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    pub experiments: Vec<Experiment>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSource {
    /// Explicit chain: measure, jump-rate matrix, killing rates.
    Explicit {
        n: usize,
        m: Vec<f64>,
        q: Vec<Vec<f64>>,
        kappa: Vec<f64>,
    },
    /// Discretized absorbing stable process on a symmetric interval.
    Stable1d {
        n_grid: usize,
        alpha: f64,
        radius: f64,
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    #[serde(rename = "Vp")]
    pub vp: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Ground state, spectrum, and the three limit measures.
    Spectral,
    /// Conditional means of the observable at each horizon.
    Qlimits { t_list: Vec<f64> },
    /// Conditional first and second moments at each horizon.
    SecondMoments { t_list: Vec<f64> },
    /// Cumulant curve over a tilt grid plus rates at requested levels.
    Ldp {
        theta_grid: Vec<f64>,
        gamma_list: Vec<f64>,
    },
    /// Self-normalized path estimates from the listed start states.
    Mc {
        t: f64,
        n_paths: u64,
        targets: Vec<usize>,
    },
    /// Tilted importance-sampling estimate of one tail probability.
    Tail {
        gamma: f64,
        t: f64,
        theta_tilt: f64,
        n_paths: u64,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Spectral => "spectral",
            Experiment::Qlimits { .. } => "qlimits",
            Experiment::SecondMoments { .. } => "second_moments",
            Experiment::Ldp { .. } => "ldp",
            Experiment::Mc { .. } => "mc",
            Experiment::Tail { .. } => "tail",
        }
    }
}

/// Parses a config, reporting the offending field path on failure.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let deserializer = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(deserializer)
        .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!(
            "{what} must be a {n}x{n} row-major matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ExperimentConfig {
    pub fn build_chain(&self) -> Result<SymmetricChain, CliError> {
        match &self.model {
            ModelSource::Explicit { n, m, q, kappa } => {
                if m.len() != *n || kappa.len() != *n {
                    return Err(CliError::Config(format!(
                        "m and kappa must have length n = {n}"
                    )));
                }
                let q = matrix_from_rows(q, *n, "q")?;
                SymmetricChain::new(
                    DVector::from_vec(m.clone()),
                    q,
                    DVector::from_vec(kappa.clone()),
                )
                .map_err(|e| CliError::Config(e.to_string()))
            }
            ModelSource::Stable1d {
                n_grid,
                alpha,
                radius,
                scale,
            } => build_discrete_stable(*n_grid, *alpha, *radius, *scale)
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn build_weight(&self, n: usize) -> Result<FkWeight, CliError> {
        match &self.weight {
            None => Ok(FkWeight::zero(n)),
            Some(spec) => {
                if spec.v.len() != n {
                    return Err(CliError::Config(format!("V must have length {n}")));
                }
                let f = matrix_from_rows(&spec.f, n, "F")?;
                FkWeight::new(DVector::from_vec(spec.v.clone()), f)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    pub fn build_observable(&self, n: usize) -> Result<Observable, CliError> {
        match &self.observable {
            None => Ok(Observable::from_potential(DVector::zeros(n))),
            Some(spec) => {
                if spec.vp.len() != n {
                    return Err(CliError::Config(format!("Vp must have length {n}")));
                }
                let g = matrix_from_rows(&spec.g, n, "G")?;
                Observable::new(DVector::from_vec(spec.vp.clone()), g)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}
