//! On-disk dataset format: one JSON document holding the design metadata,
//! the ground truth, and the flattened sample. Generation is fully seeded,
//! so a dataset is reproducible from its config alone; the file exists to
//! decouple fitting from simulation and to allow external data to enter the
//! pipeline in the same shape.

use serde::{Deserialize, Serialize};
use std::path::Path;

use sindex_core::linalg::Mat;
use sindex_core::simgen::{
    self, gen_lowrank_beta, gen_matrix_sim, gen_sparse_beta, gen_vector_sim, MatrixSimInstance,
    SimInstance,
};

use crate::config::{DesignConfig, LinkConfig, SimulateConfig};
use crate::error::{CliError, Result};

pub const DATASET_SCHEMA: &str = "dataset-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Vector,
    Matrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub schema: String,
    pub kind: DatasetKind,
    pub seed: u64,
    pub design: DesignConfig,
    pub link: LinkConfig,
    pub noise_sigma: f64,
    /// Sample estimate (or exact value) of the moment slope, when the link
    /// has a usable derivative.
    pub mu_star: Option<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// Row-major for matrix signals.
    pub beta_star: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<usize>>,
    /// Flattened row-major: `n * p` (vector) or `n * d * d` (matrix).
    pub covariates: Vec<f64>,
    pub responses: Vec<f64>,
}

/// Slope estimate attached at generation time: the exact value when the link
/// admits one, otherwise the sample mean of the link derivative along the
/// true index.
pub(crate) fn resolve_mu_star(link: &simgen::LinkSpec, index_values: &[f64]) -> Option<f64> {
    if let Some(mu) = link.mu_star_exact() {
        return Some(mu);
    }
    if index_values.is_empty() {
        return None;
    }
    let mut acc = 0.0;
    for &z in index_values {
        match link.derivative(z) {
            Ok(d) => acc += d,
            Err(_) => return None,
        }
    }
    Some(acc / index_values.len() as f64)
}

pub fn simulate(config: &SimulateConfig, seed_override: Option<u64>) -> Result<DatasetFile> {
    match config {
        SimulateConfig::Vector {
            design,
            link,
            p,
            s,
            noise_sigma,
            n,
            seed,
        } => {
            let seed = seed_override.unwrap_or(*seed);
            let model = design.build()?;
            let mut beta_rng = simgen::stream_rng(seed, 0);
            let (mut beta, support) = gen_sparse_beta(*p, *s, &mut beta_rng)?;
            // Correlated designs change the norm the signal must be unit in.
            let norm = model.identifiability_norm(&beta)?;
            for b in beta.iter_mut() {
                *b /= norm;
            }
            let link_spec = link.build();
            let inst = gen_vector_sim(
                &beta,
                &model,
                &link_spec,
                *noise_sigma,
                *n,
                simgen::split_seed(seed, 1),
            )?;
            let mu_star = resolve_mu_star(&link_spec, &inst.index_values(&beta)?);
            Ok(DatasetFile {
                schema: DATASET_SCHEMA.into(),
                kind: DatasetKind::Vector,
                seed,
                design: design.clone(),
                link: *link,
                noise_sigma: *noise_sigma,
                mu_star,
                n: *n,
                p: Some(*p),
                s: Some(*s),
                d: None,
                r: None,
                beta_star: beta,
                support: Some(support),
                covariates: inst.covariates.data().to_vec(),
                responses: inst.responses,
            })
        }
        SimulateConfig::Matrix {
            design,
            link,
            d,
            r,
            noise_sigma,
            n,
            seed,
        } => {
            let seed = seed_override.unwrap_or(*seed);
            let model = design.build()?;
            let mut beta_rng = simgen::stream_rng(seed, 0);
            let beta = gen_lowrank_beta(*d, *r, &mut beta_rng)?;
            let link_spec = link.build();
            let inst = gen_matrix_sim(
                &beta,
                &model,
                &link_spec,
                *noise_sigma,
                *n,
                simgen::split_seed(seed, 1),
            )?;
            let mu_star = resolve_mu_star(&link_spec, &inst.index_values(&beta)?);
            let mut covariates = Vec::with_capacity(n * d * d);
            for x in &inst.covariates {
                covariates.extend_from_slice(x.data());
            }
            Ok(DatasetFile {
                schema: DATASET_SCHEMA.into(),
                kind: DatasetKind::Matrix,
                seed,
                design: design.clone(),
                link: *link,
                noise_sigma: *noise_sigma,
                mu_star,
                n: *n,
                p: None,
                s: None,
                d: Some(*d),
                r: Some(*r),
                beta_star: beta.data().to_vec(),
                support: None,
                covariates,
                responses: inst.responses,
            })
        }
    }
}

impl DatasetFile {
    pub fn validate(&self) -> Result<()> {
        if self.schema != DATASET_SCHEMA {
            return Err(CliError::Config(format!(
                "unsupported dataset schema {:?}, expected {DATASET_SCHEMA:?}",
                self.schema
            )));
        }
        if self.responses.len() != self.n {
            return Err(CliError::Config(format!(
                "dataset holds {} responses for n = {}",
                self.responses.len(),
                self.n
            )));
        }
        match self.kind {
            DatasetKind::Vector => {
                let p = self
                    .p
                    .ok_or_else(|| CliError::Config("vector dataset needs p".into()))?;
                if self.beta_star.len() != p {
                    return Err(CliError::Config("signal length must equal p".into()));
                }
                if self.covariates.len() != self.n * p {
                    return Err(CliError::Config("covariates must hold n * p values".into()));
                }
                let support = self
                    .support
                    .as_ref()
                    .ok_or_else(|| CliError::Config("vector dataset needs a support".into()))?;
                if support.iter().any(|&j| j >= p) {
                    return Err(CliError::Config("support index out of range".into()));
                }
            }
            DatasetKind::Matrix => {
                let d = self
                    .d
                    .ok_or_else(|| CliError::Config("matrix dataset needs d".into()))?;
                if self.beta_star.len() != d * d {
                    return Err(CliError::Config("signal must hold d * d values".into()));
                }
                if self.covariates.len() != self.n * d * d {
                    return Err(CliError::Config(
                        "covariates must hold n * d * d values".into(),
                    ));
                }
                if self.r.is_none() {
                    return Err(CliError::Config("matrix dataset needs r".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_vector_instance(&self) -> Result<SimInstance> {
        self.validate()?;
        if self.kind != DatasetKind::Vector {
            return Err(CliError::Config(
                "expected a vector dataset, found matrix".into(),
            ));
        }
        let p = self.p.unwrap();
        Ok(SimInstance {
            covariates: Mat::from_vec(self.n, p, self.covariates.clone())?,
            responses: self.responses.clone(),
            beta_star: self.beta_star.clone(),
            support: self.support.clone().unwrap(),
            mu_star: self.mu_star,
            link: self.link.build(),
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        })
    }

    pub fn to_matrix_instance(&self) -> Result<MatrixSimInstance> {
        self.validate()?;
        if self.kind != DatasetKind::Matrix {
            return Err(CliError::Config(
                "expected a matrix dataset, found vector".into(),
            ));
        }
        let d = self.d.unwrap();
        let covariates = self
            .covariates
            .chunks(d * d)
            .map(|c| Mat::from_vec(d, d, c.to_vec()))
            .collect::<sindex_core::Result<Vec<_>>>()?;
        Ok(MatrixSimInstance {
            covariates,
            responses: self.responses.clone(),
            beta_star: Mat::from_vec(d, d, self.beta_star.clone())?,
            rank: self.r.unwrap(),
            mu_star: self.mu_star,
            link: self.link.build(),
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        })
    }
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let file: DatasetFile = crate::config::load_json(path)?;
    file.validate()?;
    Ok(file)
}

pub fn write_dataset(path: &Path, dataset: &DatasetFile) -> Result<()> {
    let mut text = serde_json::to_string(dataset)
        .map_err(|e| CliError::Config(format!("serializing dataset: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(format!("writing {}", path.display())))
}
