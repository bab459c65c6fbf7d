//! JSON configuration schemas for every subcommand.
//!
//! Configs are strict: unknown fields are rejected so a typo cannot silently
//! fall back to a default. Each section builds the corresponding runtime
//! object, resolving data-size-dependent defaults (winsorization and
//! shrinkage levels) at the point where `n` and the dimension are known.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use sindex_core::linalg::Mat;
use sindex_core::optim::SolverConfig;
use sindex_core::robust::{self, MomentEstimate};
use sindex_core::score::ScoreModel;
use sindex_core::simgen::{LinkSpec, MatrixSimInstance, SimInstance};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignConfig {
    StandardGaussian,
    StudentT { dof: f64 },
    Gamma { shape: f64, scale: f64 },
    GaussianVector { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
}

impl DesignConfig {
    pub fn build(&self) -> Result<ScoreModel> {
        match self {
            DesignConfig::StandardGaussian => Ok(ScoreModel::standard_gaussian()),
            DesignConfig::StudentT { dof } => Ok(ScoreModel::student_t(*dof)?),
            DesignConfig::Gamma { shape, scale } => Ok(ScoreModel::gamma(*shape, *scale)?),
            DesignConfig::GaussianVector { mean, covariance } => {
                let p = mean.len();
                let mut data = Vec::with_capacity(p * p);
                for row in covariance {
                    if row.len() != p {
                        return Err(CliError::Config(format!(
                            "covariance rows must have length {p}"
                        )));
                    }
                    data.extend_from_slice(row);
                }
                if covariance.len() != p {
                    return Err(CliError::Config(format!(
                        "covariance must be {p} x {p} to match the mean"
                    )));
                }
                let sigma = Mat::from_vec(p, p, data)?;
                Ok(ScoreModel::gaussian_vector(mean.clone(), sigma)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkConfig {
    Identity,
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    Sign,
}

impl LinkConfig {
    pub fn build(&self) -> LinkSpec {
        match self {
            LinkConfig::Identity => LinkSpec::Identity,
            LinkConfig::F1 => LinkSpec::F1,
            LinkConfig::F2 => LinkSpec::F2,
            LinkConfig::F3 => LinkSpec::F3,
            LinkConfig::F4 => LinkSpec::F4,
            LinkConfig::F5 => LinkSpec::F5,
            LinkConfig::F6 => LinkSpec::F6,
            LinkConfig::F7 => LinkSpec::F7,
            LinkConfig::F8 => LinkSpec::F8,
            LinkConfig::Sign => LinkSpec::Sign,
        }
    }
}

fn default_stride() -> usize {
    10
}

fn default_plateau_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub alpha: f64,
    pub eta: f64,
    pub t_max: usize,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl SolverSection {
    pub fn build(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            eta: self.eta,
            t_max: self.t_max,
            record_stride: self.record_stride,
        }
    }
}

/// Moment estimator choice. Levels left unset resolve from the sample shape:
/// `tau = 2 (n / log p)^{1/4}` and `kappa = 2 sqrt(log(4d) / (n d))`, or from
/// the fourth-moment formulas when a bound is supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobustSection {
    Plain,
    Truncated {
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default)]
        fourth_moment: Option<f64>,
    },
    Shrunk {
        #[serde(default)]
        kappa: Option<f64>,
        #[serde(default)]
        fourth_moment: Option<f64>,
    },
}

impl RobustSection {
    /// The winsorization level this section implies for an `n x p` sample,
    /// when it is a truncation mode.
    pub fn resolve_tau(&self, n: usize, p: usize) -> Result<Option<f64>> {
        match self {
            RobustSection::Truncated { tau: Some(t), .. } => Ok(Some(*t)),
            RobustSection::Truncated {
                tau: None,
                fourth_moment: Some(m),
            } => Ok(Some(robust::fourth_moment_tau(*m, n, p)?)),
            RobustSection::Truncated {
                tau: None,
                fourth_moment: None,
            } => Ok(Some(robust::default_tau(n, p)?)),
            _ => Ok(None),
        }
    }

    pub fn moment_vector(
        &self,
        instance: &SimInstance,
        model: &ScoreModel,
    ) -> Result<MomentEstimate> {
        match self {
            RobustSection::Plain => Ok(robust::plain_moment_vector(instance, model)?),
            RobustSection::Truncated { .. } => {
                let tau = self
                    .resolve_tau(instance.n(), instance.p())?
                    .expect("truncated mode resolves a tau");
                Ok(robust::truncated_moment_vector(instance, model, tau)?)
            }
            RobustSection::Shrunk { .. } => Err(CliError::Config(
                "spectral shrinkage applies to matrix data only".into(),
            )),
        }
    }

    pub fn moment_matrix(
        &self,
        instance: &MatrixSimInstance,
        model: &ScoreModel,
    ) -> Result<MomentEstimate> {
        match self {
            RobustSection::Plain => Ok(robust::plain_moment_matrix(instance, model)?),
            RobustSection::Shrunk {
                kappa,
                fourth_moment,
            } => {
                let kappa = match (kappa, fourth_moment) {
                    (Some(k), _) => *k,
                    (None, Some(m)) => {
                        robust::fourth_moment_kappa(*m, instance.n(), instance.d())?
                    }
                    (None, None) => robust::default_kappa(instance.n(), instance.d())?,
                };
                Ok(robust::robust_moment_matrix(instance, model, kappa)?)
            }
            RobustSection::Truncated { .. } => Err(CliError::Config(
                "winsorized truncation applies to vector data only".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionSection {
    /// Pick the recorded iterate closest to the truth; benchmarks only.
    Oracle,
    /// Held-out risk over the loss plateau with `m` candidates.
    OutOfSample {
        m: usize,
        #[serde(default = "default_plateau_tol")]
        plateau_rel_tol: f64,
    },
    /// Use the record nearest a fixed step count.
    Fixed { t: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateConfig {
    Vector {
        design: DesignConfig,
        link: LinkConfig,
        p: usize,
        s: usize,
        noise_sigma: f64,
        n: usize,
        seed: u64,
    },
    Matrix {
        design: DesignConfig,
        link: LinkConfig,
        d: usize,
        r: usize,
        noise_sigma: f64,
        n: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub dataset: PathBuf,
    pub robust: RobustSection,
    pub solver: SolverSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub train_dataset: PathBuf,
    pub test_dataset: PathBuf,
    pub robust: RobustSection,
    pub solver: SolverSection,
    pub m: usize,
    #[serde(default = "default_plateau_tol")]
    pub plateau_rel_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub experiment: ExperimentKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    /// Full descent paths on repeated draws of one configuration.
    Trajectory {
        design: DesignConfig,
        link: LinkConfig,
        p: usize,
        s: usize,
        noise_sigma: f64,
        n: usize,
        robust: RobustSection,
        solver: SolverSection,
    },
    /// Direction error against the sample-size rate `sqrt(s log p / n)`.
    RateSweepVector {
        design: DesignConfig,
        link: LinkConfig,
        p: usize,
        s_values: Vec<usize>,
        noise_sigma: f64,
        #[serde(default)]
        rates: Option<Vec<f64>>,
        robust: RobustSection,
        solver: SolverSection,
        selection: SelectionSection,
    },
    /// Matrix analog against `sqrt(r d log d / n)`.
    RateSweepMatrix {
        design: DesignConfig,
        link: LinkConfig,
        d: usize,
        r_values: Vec<usize>,
        noise_sigma: f64,
        #[serde(default)]
        rates: Option<Vec<f64>>,
        robust: RobustSection,
        solver: SolverSection,
        selection: SelectionSection,
    },
    /// Support recovery across sampling ratios `n / (s log p)`, scored
    /// against the cross-validated soft-threshold baseline.
    SupportRecovery {
        design: DesignConfig,
        link: LinkConfig,
        p: usize,
        s: usize,
        noise_sigma: f64,
        #[serde(default)]
        ratios: Option<Vec<f64>>,
        robust: RobustSection,
        solver: SolverSection,
        selection: SelectionSection,
        /// Support readout level; defaults to five times the initialization
        /// scale.
        #[serde(default)]
        threshold: Option<f64>,
    },
    /// Binary responses from a thresholded Gaussian index; the stopping time
    /// is scored on held-out data with the known link.
    OneBit {
        p: usize,
        s: usize,
        noise_sigma: f64,
        #[serde(default)]
        n_factor: Option<f64>,
        solver: SolverSection,
        #[serde(default)]
        threshold: Option<f64>,
    },
    /// Held-out kernel prediction risk across sample sizes.
    PredictionRisk {
        design: DesignConfig,
        link: LinkConfig,
        p: usize,
        s: usize,
        noise_sigma: f64,
        sample_sizes: Vec<usize>,
        robust: RobustSection,
        solver: SolverSection,
        selection: SelectionSection,
    },
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(CliError::io(format!("reading {}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
