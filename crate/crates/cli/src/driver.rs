//! Batch experiment driver.
//!
//! An experiment is a grid of configurations times a number of seeded
//! trials. Tasks are enumerated in a fixed order, each derives its own seed
//! from the master seed and the task index, and results are collected in
//! task order, so output files are identical no matter how many worker
//! threads run the batch. A task that fails numerically records its error in
//! its row instead of aborting the batch.

use rayon::prelude::*;
use std::time::Instant;

use sindex_core::metrics::{self, support_metrics};
use sindex_core::optim::{
    self, run_matrix, run_vector, threshold_matrix, threshold_vector, SolverConfig, Trajectory,
    TrajectoryRecord, VectorTruth,
};
use sindex_core::score::ScoreModel;
use sindex_core::select;
use sindex_core::simgen::{
    gen_lowrank_beta, gen_matrix_sim, gen_sparse_beta, gen_vector_sim, split_seed, stream_rng,
    LinkSpec,
};

use crate::config::{
    ExperimentConfig, ExperimentKind, RobustSection, SelectionSection,
};
use crate::error::{CliError, Result};
use crate::trajectory_io::{fmt_float, fmt_opt_float, write_csv_table};

pub const METRICS_HEADER: &str =
    "kind,grid,sub,trial,seed,n,dim,selected_t,dist,fdr,tpr,rank_est,baseline_fdr,baseline_tpr,risk,error";
pub const TRAJECTORY_HEADER: &str = "trial,seed,t,loss,dist_sq,max_off_support";

#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub kind: &'static str,
    /// Grid coordinate: rate, sampling ratio, or sample size.
    pub grid: f64,
    /// Secondary grid coordinate (sparsity or rank), zero when unused.
    pub sub: usize,
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    pub selected_t: Option<usize>,
    pub dist: Option<f64>,
    pub fdr: Option<f64>,
    pub tpr: Option<f64>,
    pub rank_est: Option<usize>,
    pub baseline_fdr: Option<f64>,
    pub baseline_tpr: Option<f64>,
    pub risk: Option<f64>,
    pub error: Option<String>,
    /// Wall time of the task; diagnostic only, never serialized.
    pub wall_ms: u128,
}

impl MetricsRow {
    fn csv(&self) -> String {
        let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let err = self
            .error
            .as_deref()
            .unwrap_or("")
            .replace(',', ";")
            .replace('\n', " ");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            fmt_float(self.grid),
            self.sub,
            self.trial,
            self.seed,
            self.n,
            self.dim,
            opt_usize(self.selected_t),
            fmt_opt_float(self.dist),
            fmt_opt_float(self.fdr),
            fmt_opt_float(self.tpr),
            opt_usize(self.rank_est),
            fmt_opt_float(self.baseline_fdr),
            fmt_opt_float(self.baseline_tpr),
            fmt_opt_float(self.risk),
            err,
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrajRow {
    pub trial: usize,
    pub seed: u64,
    pub t: usize,
    pub loss: f64,
    pub dist_sq: Option<f64>,
    pub max_off_support: Option<f64>,
}

impl TrajRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.t,
            fmt_float(self.loss),
            fmt_opt_float(self.dist_sq),
            fmt_opt_float(self.max_off_support),
        )
    }
}

#[derive(Debug)]
pub enum ExperimentOutput {
    Metrics(Vec<MetricsRow>),
    Trajectories(Vec<TrajRow>),
}

pub fn write_output(path: &std::path::Path, output: &ExperimentOutput) -> Result<()> {
    match output {
        ExperimentOutput::Metrics(rows) => {
            let lines: Vec<String> = rows.iter().map(MetricsRow::csv).collect();
            write_csv_table(path, METRICS_HEADER, &lines)
        }
        ExperimentOutput::Trajectories(rows) => {
            let lines: Vec<String> = rows.iter().map(TrajRow::csv).collect();
            write_csv_table(path, TRAJECTORY_HEADER, &lines)
        }
    }
}

pub fn even_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

pub fn default_vector_rates() -> Vec<f64> {
    even_grid(0.25, 0.4, 8)
}

pub fn default_matrix_rates() -> Vec<f64> {
    even_grid(0.15, 0.35, 8)
}

pub fn default_ratios() -> Vec<f64> {
    even_grid(3.0, 10.0, 8)
}

/// Sample size putting `sqrt(s log p / n)` at `rate`.
pub fn n_for_vector_rate(rate: f64, s: usize, p: usize) -> usize {
    ((s as f64 * (p as f64).ln()) / (rate * rate)).ceil() as usize
}

/// Sample size putting `sqrt(r d log d / n)` at `rate`.
pub fn n_for_matrix_rate(rate: f64, r: usize, d: usize) -> usize {
    ((r as f64 * d as f64 * (d as f64).ln()) / (rate * rate)).ceil() as usize
}

fn positive_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(CliError::Config(format!("{what} grid is empty")));
    }
    if grid.iter().any(|&g| !(g > 0.0)) {
        return Err(CliError::Config(format!("{what} grid must be positive")));
    }
    Ok(())
}

/// Unit-scale copy of the signal in the model's identifiability norm.
fn unit_signal(model: &ScoreModel, beta: &mut [f64]) -> Result<()> {
    let norm = model.identifiability_norm(beta)?;
    if norm < 1e-14 {
        return Err(CliError::Core(sindex_core::Error::ZeroNorm));
    }
    for b in beta.iter_mut() {
        *b /= norm;
    }
    Ok(())
}

fn oracle_pick_vector<'a>(
    trajectory: &'a Trajectory<Vec<f64>>,
    beta_star: &[f64],
) -> Option<&'a TrajectoryRecord<Vec<f64>>> {
    let mut best: Option<(&TrajectoryRecord<Vec<f64>>, f64)> = None;
    for rec in &trajectory.records {
        if let Ok(d) = metrics::dist_vector(&rec.beta, beta_star) {
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((rec, d));
            }
        }
    }
    best.map(|(rec, _)| rec)
}

fn oracle_pick_matrix<'a>(
    trajectory: &'a Trajectory<sindex_core::linalg::Mat>,
    beta_star: &sindex_core::linalg::Mat,
) -> Option<&'a TrajectoryRecord<sindex_core::linalg::Mat>> {
    let mut best: Option<(&TrajectoryRecord<sindex_core::linalg::Mat>, f64)> = None;
    for rec in &trajectory.records {
        if let Ok(d) = metrics::dist_matrix(&rec.beta, beta_star) {
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((rec, d));
            }
        }
    }
    best.map(|(rec, _)| rec)
}

fn nearest_record<B>(trajectory: &Trajectory<B>, t: usize) -> Option<&TrajectoryRecord<B>> {
    trajectory
        .records
        .iter()
        .min_by_key(|r| (r.t.abs_diff(t), r.t))
}

struct VectorTask<'a> {
    model: &'a ScoreModel,
    link: &'a LinkSpec,
    p: usize,
    s: usize,
    noise_sigma: f64,
    n: usize,
    robust: &'a RobustSection,
    solver: SolverConfig,
    selection: &'a SelectionSection,
    threshold: f64,
    with_baseline: bool,
    with_risk: bool,
    task_seed: u64,
}

struct VectorTaskOutcome {
    selected_t: Option<usize>,
    dist: Option<f64>,
    fdr: Option<f64>,
    tpr: Option<f64>,
    baseline_fdr: Option<f64>,
    baseline_tpr: Option<f64>,
    risk: Option<f64>,
    error: Option<String>,
}

fn run_vector_task(task: &VectorTask) -> Result<VectorTaskOutcome> {
    let mut beta_rng = stream_rng(task.task_seed, 0);
    let (mut beta_star, support) = gen_sparse_beta(task.p, task.s, &mut beta_rng)?;
    unit_signal(task.model, &mut beta_star)?;
    let train = gen_vector_sim(
        &beta_star,
        task.model,
        task.link,
        task.noise_sigma,
        task.n,
        split_seed(task.task_seed, 1),
    )?;
    let phi = task.robust.moment_vector(&train, task.model)?;

    let baseline = if task.with_baseline {
        let tau = task.robust.resolve_tau(task.n, task.p)?;
        let report = metrics::l1_baseline_cv(&train, task.model, tau, 5)?;
        let sm = support_metrics(&report.support, &support, task.p)?;
        (Some(sm.fdr), Some(sm.tpr))
    } else {
        (None, None)
    };

    let needs_test = task.with_risk
        || matches!(task.selection, SelectionSection::OutOfSample { .. });
    let test = if needs_test {
        Some(gen_vector_sim(
            &beta_star,
            task.model,
            task.link,
            task.noise_sigma,
            task.n,
            split_seed(task.task_seed, 2),
        )?)
    } else {
        None
    };
    // Keep the sample alive only when selection or risk will read it again.
    let train = if needs_test || task.with_baseline {
        Some(train)
    } else {
        drop(train);
        None
    };

    let trajectory = run_vector(&phi, &task.solver, None)?;
    if trajectory.diverged {
        return Ok(VectorTaskOutcome {
            selected_t: trajectory.records.last().map(|r| r.t),
            dist: None,
            fdr: None,
            tpr: None,
            baseline_fdr: baseline.0,
            baseline_tpr: baseline.1,
            risk: None,
            error: Some("diverged".into()),
        });
    }

    let (selected, mut risk) = match task.selection {
        SelectionSection::Oracle => (oracle_pick_vector(&trajectory, &beta_star), None),
        SelectionSection::Fixed { t } => (nearest_record(&trajectory, *t), None),
        SelectionSection::OutOfSample { m, plateau_rel_tol } => {
            let report = select::select_stopping_time(
                &trajectory,
                train.as_ref().expect("test mode keeps train"),
                test.as_ref().expect("test mode builds test"),
                task.model,
                *m,
                *plateau_rel_tol,
            )?;
            let risk = report
                .candidates
                .iter()
                .find(|c| c.t == report.selected_t)
                .map(|c| c.test_risk)
                .filter(|r| r.is_finite());
            (
                trajectory.records.iter().find(|r| r.t == report.selected_t),
                risk,
            )
        }
    };
    let selected = match selected {
        Some(rec) => rec,
        None => {
            return Ok(VectorTaskOutcome {
                selected_t: None,
                dist: None,
                fdr: None,
                tpr: None,
                baseline_fdr: baseline.0,
                baseline_tpr: baseline.1,
                risk: None,
                error: Some("no usable iterate".into()),
            })
        }
    };

    let dist = metrics::dist_vector(&selected.beta, &beta_star).ok();
    let est_support = threshold_vector(&selected.beta, task.threshold)?;
    let sm = support_metrics(&est_support, &support, task.p)?;

    if task.with_risk && risk.is_none() {
        // Oracle and fixed selections still report held-out kernel risk.
        if let Ok(direction) = optim::normalize_identifiable(&selected.beta, task.model) {
            let train_ref = train.as_ref().expect("risk mode keeps train");
            let test_ref = test.as_ref().expect("risk mode builds test");
            let predictor = select::fit_kernel(train_ref, task.model, &direction, None, None)?;
            risk = Some(select::prediction_risk(&predictor, test_ref, &direction)?);
        }
    }

    Ok(VectorTaskOutcome {
        selected_t: Some(selected.t),
        dist,
        fdr: Some(sm.fdr),
        tpr: Some(sm.tpr),
        baseline_fdr: baseline.0,
        baseline_tpr: baseline.1,
        risk,
        error: None,
    })
}

struct MatrixTask<'a> {
    model: &'a ScoreModel,
    link: &'a LinkSpec,
    d: usize,
    r: usize,
    noise_sigma: f64,
    n: usize,
    robust: &'a RobustSection,
    solver: SolverConfig,
    selection: &'a SelectionSection,
    threshold: f64,
    task_seed: u64,
}

struct MatrixTaskOutcome {
    selected_t: Option<usize>,
    dist: Option<f64>,
    rank_est: Option<usize>,
    error: Option<String>,
}

fn run_matrix_task(task: &MatrixTask) -> Result<MatrixTaskOutcome> {
    let mut beta_rng = stream_rng(task.task_seed, 0);
    let beta_star = gen_lowrank_beta(task.d, task.r, &mut beta_rng)?;
    let train = gen_matrix_sim(
        &beta_star,
        task.model,
        task.link,
        task.noise_sigma,
        task.n,
        split_seed(task.task_seed, 1),
    )?;
    let phi = task.robust.moment_matrix(&train, task.model)?;

    let needs_test = matches!(task.selection, SelectionSection::OutOfSample { .. });
    let test = if needs_test {
        Some(gen_matrix_sim(
            &beta_star,
            task.model,
            task.link,
            task.noise_sigma,
            task.n,
            split_seed(task.task_seed, 2),
        )?)
    } else {
        None
    };
    let train = if needs_test {
        Some(train)
    } else {
        drop(train);
        None
    };

    let trajectory = run_matrix(&phi, &task.solver, None)?;
    if trajectory.diverged {
        return Ok(MatrixTaskOutcome {
            selected_t: trajectory.records.last().map(|r| r.t),
            dist: None,
            rank_est: None,
            error: Some("diverged".into()),
        });
    }

    let selected = match task.selection {
        SelectionSection::Oracle => oracle_pick_matrix(&trajectory, &beta_star),
        SelectionSection::Fixed { t } => nearest_record(&trajectory, *t),
        SelectionSection::OutOfSample { m, plateau_rel_tol } => {
            let report = select::select_stopping_time_matrix(
                &trajectory,
                train.as_ref().expect("test mode keeps train"),
                test.as_ref().expect("test mode builds test"),
                *m,
                *plateau_rel_tol,
            )?;
            trajectory.records.iter().find(|r| r.t == report.selected_t)
        }
    };
    let selected = match selected {
        Some(rec) => rec,
        None => {
            return Ok(MatrixTaskOutcome {
                selected_t: None,
                dist: None,
                rank_est: None,
                error: Some("no usable iterate".into()),
            })
        }
    };

    let dist = metrics::dist_matrix(&selected.beta, &beta_star).ok();
    let rank_est = threshold_matrix(&selected.beta, task.threshold)
        .ok()
        .map(|t| t.rank);
    Ok(MatrixTaskOutcome {
        selected_t: Some(selected.t),
        dist,
        rank_est,
        error: None,
    })
}

fn outcome_row(
    kind: &'static str,
    grid: f64,
    sub: usize,
    trial: usize,
    seed: u64,
    n: usize,
    dim: usize,
    outcome: std::result::Result<VectorTaskOutcome, CliError>,
    wall_ms: u128,
) -> MetricsRow {
    match outcome {
        Ok(o) => MetricsRow {
            kind,
            grid,
            sub,
            trial,
            seed,
            n,
            dim,
            selected_t: o.selected_t,
            dist: o.dist,
            fdr: o.fdr,
            tpr: o.tpr,
            rank_est: None,
            baseline_fdr: o.baseline_fdr,
            baseline_tpr: o.baseline_tpr,
            risk: o.risk,
            error: o.error,
            wall_ms,
        },
        Err(e) => MetricsRow {
            kind,
            grid,
            sub,
            trial,
            seed,
            n,
            dim,
            selected_t: None,
            dist: None,
            fdr: None,
            tpr: None,
            rank_est: None,
            baseline_fdr: None,
            baseline_tpr: None,
            risk: None,
            error: Some(e.to_string()),
            wall_ms,
        },
    }
}

pub fn run_experiment(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
    threads: Option<usize>,
) -> Result<ExperimentOutput> {
    if config.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let master_seed = seed_override.unwrap_or(config.master_seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    match &config.experiment {
        ExperimentKind::Trajectory {
            design,
            link,
            p,
            s,
            noise_sigma,
            n,
            robust,
            solver,
        } => {
            let model = design.build()?;
            let link = link.build();
            let solver = solver.build();
            let trials: Vec<usize> = (0..config.trials).collect();
            let rows: Vec<Vec<TrajRow>> = pool.install(|| {
                trials
                    .par_iter()
                    .map(|&trial| {
                        let task_seed = split_seed(master_seed, trial as u64);
                        trajectory_rows(
                            &model,
                            &link,
                            *p,
                            *s,
                            *noise_sigma,
                            *n,
                            robust,
                            solver,
                            trial,
                            task_seed,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            Ok(ExperimentOutput::Trajectories(
                rows.into_iter().flatten().collect(),
            ))
        }

        ExperimentKind::RateSweepVector {
            design,
            link,
            p,
            s_values,
            noise_sigma,
            rates,
            robust,
            solver,
            selection,
        } => {
            if matches!(robust, RobustSection::Shrunk { .. }) {
                return Err(CliError::Config(
                    "spectral shrinkage applies to matrix data only".into(),
                ));
            }
            let rates = rates.clone().unwrap_or_else(default_vector_rates);
            positive_grid(&rates, "rate")?;
            if s_values.is_empty() {
                return Err(CliError::Config("s_values is empty".into()));
            }
            let model = design.build()?;
            let link = link.build();
            let solver_cfg = solver.build();
            let threshold = 5.0 * solver_cfg.alpha;

            let mut specs = Vec::new();
            for &rate in &rates {
                for &s in s_values {
                    for trial in 0..config.trials {
                        specs.push((rate, s, trial));
                    }
                }
            }
            let rows = pool.install(|| {
                specs
                    .par_iter()
                    .enumerate()
                    .map(|(idx, &(rate, s, trial))| {
                        let task_seed = split_seed(master_seed, idx as u64);
                        let n = n_for_vector_rate(rate, s, *p);
                        let start = Instant::now();
                        let outcome = run_vector_task(&VectorTask {
                            model: &model,
                            link: &link,
                            p: *p,
                            s,
                            noise_sigma: *noise_sigma,
                            n,
                            robust,
                            solver: solver_cfg,
                            selection,
                            threshold,
                            with_baseline: false,
                            with_risk: false,
                            task_seed,
                        });
                        // Report the observed rate, which differs slightly
                        // from the nominal one after rounding n up.
                        let actual = ((s as f64 * (*p as f64).ln()) / n as f64).sqrt();
                        outcome_row(
                            "rate_sweep_vector",
                            actual,
                            s,
                            trial,
                            task_seed,
                            n,
                            *p,
                            outcome,
                            start.elapsed().as_millis(),
                        )
                    })
                    .collect()
            });
            Ok(ExperimentOutput::Metrics(rows))
        }

        ExperimentKind::RateSweepMatrix {
            design,
            link,
            d,
            r_values,
            noise_sigma,
            rates,
            robust,
            solver,
            selection,
        } => {
            if matches!(robust, RobustSection::Truncated { .. }) {
                return Err(CliError::Config(
                    "winsorized truncation applies to vector data only".into(),
                ));
            }
            let rates = rates.clone().unwrap_or_else(default_matrix_rates);
            positive_grid(&rates, "rate")?;
            if r_values.is_empty() {
                return Err(CliError::Config("r_values is empty".into()));
            }
            let model = design.build()?;
            let link = link.build();
            let solver_cfg = solver.build();
            let threshold = 5.0 * solver_cfg.alpha;

            let mut specs = Vec::new();
            for &rate in &rates {
                for &r in r_values {
                    for trial in 0..config.trials {
                        specs.push((rate, r, trial));
                    }
                }
            }
            let rows = pool.install(|| {
                specs
                    .par_iter()
                    .enumerate()
                    .map(|(idx, &(rate, r, trial))| {
                        let task_seed = split_seed(master_seed, idx as u64);
                        let n = n_for_matrix_rate(rate, r, *d);
                        let start = Instant::now();
                        let outcome = run_matrix_task(&MatrixTask {
                            model: &model,
                            link: &link,
                            d: *d,
                            r,
                            noise_sigma: *noise_sigma,
                            n,
                            robust,
                            solver: solver_cfg,
                            selection,
                            threshold,
                            task_seed,
                        });
                        let actual =
                            ((r as f64 * *d as f64 * (*d as f64).ln()) / n as f64).sqrt();
                        let wall = start.elapsed().as_millis();
                        match outcome {
                            Ok(o) => MetricsRow {
                                kind: "rate_sweep_matrix",
                                grid: actual,
                                sub: r,
                                trial,
                                seed: task_seed,
                                n,
                                dim: *d,
                                selected_t: o.selected_t,
                                dist: o.dist,
                                fdr: None,
                                tpr: None,
                                rank_est: o.rank_est,
                                baseline_fdr: None,
                                baseline_tpr: None,
                                risk: None,
                                error: o.error,
                                wall_ms: wall,
                            },
                            Err(e) => MetricsRow {
                                kind: "rate_sweep_matrix",
                                grid: actual,
                                sub: r,
                                trial,
                                seed: task_seed,
                                n,
                                dim: *d,
                                selected_t: None,
                                dist: None,
                                fdr: None,
                                tpr: None,
                                rank_est: None,
                                baseline_fdr: None,
                                baseline_tpr: None,
                                risk: None,
                                error: Some(e.to_string()),
                                wall_ms: wall,
                            },
                        }
                    })
                    .collect()
            });
            Ok(ExperimentOutput::Metrics(rows))
        }

        ExperimentKind::SupportRecovery {
            design,
            link,
            p,
            s,
            noise_sigma,
            ratios,
            robust,
            solver,
            selection,
            threshold,
        } => {
            if matches!(robust, RobustSection::Shrunk { .. }) {
                return Err(CliError::Config(
                    "spectral shrinkage applies to matrix data only".into(),
                ));
            }
            let ratios = ratios.clone().unwrap_or_else(default_ratios);
            positive_grid(&ratios, "ratio")?;
            let model = design.build()?;
            let link = link.build();
            let solver_cfg = solver.build();
            let threshold = threshold.unwrap_or(5.0 * solver_cfg.alpha);

            let mut specs = Vec::new();
            for &ratio in &ratios {
                for trial in 0..config.trials {
                    specs.push((ratio, trial));
                }
            }
            let rows = pool.install(|| {
                specs
                    .par_iter()
                    .enumerate()
                    .map(|(idx, &(ratio, trial))| {
                        let task_seed = split_seed(master_seed, idx as u64);
                        let n = (ratio * *s as f64 * (*p as f64).ln()).ceil() as usize;
                        let start = Instant::now();
                        let outcome = run_vector_task(&VectorTask {
                            model: &model,
                            link: &link,
                            p: *p,
                            s: *s,
                            noise_sigma: *noise_sigma,
                            n,
                            robust,
                            solver: solver_cfg,
                            selection,
                            threshold,
                            with_baseline: true,
                            with_risk: false,
                            task_seed,
                        });
                        outcome_row(
                            "support_recovery",
                            ratio,
                            *s,
                            trial,
                            task_seed,
                            n,
                            *p,
                            outcome,
                            start.elapsed().as_millis(),
                        )
                    })
                    .collect()
            });
            Ok(ExperimentOutput::Metrics(rows))
        }

        ExperimentKind::OneBit {
            p,
            s,
            noise_sigma,
            n_factor,
            solver,
            threshold,
        } => {
            let model = ScoreModel::standard_gaussian();
            let link = LinkSpec::Sign;
            let solver_cfg = solver.build();
            let threshold = threshold.unwrap_or(5.0 * solver_cfg.alpha);
            let n = ((n_factor.unwrap_or(5.0)) * *s as f64 * (*p as f64).ln()).ceil() as usize;

            let trials: Vec<usize> = (0..config.trials).collect();
            let rows = pool.install(|| {
                trials
                    .par_iter()
                    .map(|&trial| {
                        let task_seed = split_seed(master_seed, trial as u64);
                        let start = Instant::now();
                        let outcome = run_one_bit_task(
                            &model,
                            &link,
                            *p,
                            *s,
                            *noise_sigma,
                            n,
                            solver_cfg,
                            threshold,
                            task_seed,
                        );
                        outcome_row(
                            "one_bit",
                            n as f64,
                            *s,
                            trial,
                            task_seed,
                            n,
                            *p,
                            outcome,
                            start.elapsed().as_millis(),
                        )
                    })
                    .collect()
            });
            Ok(ExperimentOutput::Metrics(rows))
        }

        ExperimentKind::PredictionRisk {
            design,
            link,
            p,
            s,
            noise_sigma,
            sample_sizes,
            robust,
            solver,
            selection,
        } => {
            if sample_sizes.is_empty() {
                return Err(CliError::Config("sample_sizes is empty".into()));
            }
            if matches!(robust, RobustSection::Shrunk { .. }) {
                return Err(CliError::Config(
                    "spectral shrinkage applies to matrix data only".into(),
                ));
            }
            let model = design.build()?;
            let link = link.build();
            let solver_cfg = solver.build();

            let mut specs = Vec::new();
            for &n in sample_sizes {
                for trial in 0..config.trials {
                    specs.push((n, trial));
                }
            }
            let rows = pool.install(|| {
                specs
                    .par_iter()
                    .enumerate()
                    .map(|(idx, &(n, trial))| {
                        let task_seed = split_seed(master_seed, idx as u64);
                        let start = Instant::now();
                        let outcome = match selection {
                            SelectionSection::Oracle => run_true_direction_risk(
                                &model,
                                &link,
                                *p,
                                *s,
                                *noise_sigma,
                                n,
                                task_seed,
                            ),
                            _ => run_vector_task(&VectorTask {
                                model: &model,
                                link: &link,
                                p: *p,
                                s: *s,
                                noise_sigma: *noise_sigma,
                                n,
                                robust,
                                solver: solver_cfg,
                                selection,
                                threshold: 5.0 * solver_cfg.alpha,
                                with_baseline: false,
                                with_risk: true,
                                task_seed,
                            }),
                        };
                        outcome_row(
                            "prediction_risk",
                            n as f64,
                            *s,
                            trial,
                            task_seed,
                            n,
                            *p,
                            outcome,
                            start.elapsed().as_millis(),
                        )
                    })
                    .collect()
            });
            Ok(ExperimentOutput::Metrics(rows))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn trajectory_rows(
    model: &ScoreModel,
    link: &LinkSpec,
    p: usize,
    s: usize,
    noise_sigma: f64,
    n: usize,
    robust: &RobustSection,
    solver: SolverConfig,
    trial: usize,
    task_seed: u64,
) -> Result<Vec<TrajRow>> {
    let mut beta_rng = stream_rng(task_seed, 0);
    let (mut beta_star, support) = gen_sparse_beta(p, s, &mut beta_rng)?;
    unit_signal(model, &mut beta_star)?;
    let train = gen_vector_sim(
        &beta_star,
        model,
        link,
        noise_sigma,
        n,
        split_seed(task_seed, 1),
    )?;
    let phi = robust.moment_vector(&train, model)?;
    let index = train.index_values(&beta_star)?;
    let mu_star = crate::dataset::resolve_mu_star(link, &index).ok_or_else(|| {
        CliError::Config("link slope is unavailable for this configuration".into())
    })?;
    drop(train);

    let scaled: Vec<f64> = beta_star.iter().map(|&b| mu_star * b).collect();
    let truth = VectorTruth {
        scaled_beta: &scaled,
        support: &support,
    };
    let trajectory = run_vector(&phi, &solver, Some(&truth))?;
    Ok(trajectory
        .records
        .iter()
        .map(|rec| TrajRow {
            trial,
            seed: task_seed,
            t: rec.t,
            loss: rec.loss,
            dist_sq: rec.dist_sq,
            max_off_support: rec.max_off_support,
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn run_one_bit_task(
    model: &ScoreModel,
    link: &LinkSpec,
    p: usize,
    s: usize,
    noise_sigma: f64,
    n: usize,
    solver: SolverConfig,
    threshold: f64,
    task_seed: u64,
) -> Result<VectorTaskOutcome> {
    let mut beta_rng = stream_rng(task_seed, 0);
    let (mut beta_star, support) = gen_sparse_beta(p, s, &mut beta_rng)?;
    unit_signal(model, &mut beta_star)?;
    let train = gen_vector_sim(
        &beta_star,
        model,
        link,
        noise_sigma,
        n,
        split_seed(task_seed, 1),
    )?;
    let test = gen_vector_sim(
        &beta_star,
        model,
        link,
        noise_sigma,
        n,
        split_seed(task_seed, 2),
    )?;
    let phi = sindex_core::robust::plain_moment_vector(&train, model)?;
    let tau = None;
    let baseline_report = metrics::l1_baseline_cv(&train, model, tau, 5)?;
    let baseline_sm = support_metrics(&baseline_report.support, &support, p)?;
    drop(train);

    let trajectory = run_vector(&phi, &solver, None)?;
    if trajectory.diverged {
        return Ok(VectorTaskOutcome {
            selected_t: trajectory.records.last().map(|r| r.t),
            dist: None,
            fdr: None,
            tpr: None,
            baseline_fdr: Some(baseline_sm.fdr),
            baseline_tpr: Some(baseline_sm.tpr),
            risk: None,
            error: Some("diverged".into()),
        });
    }

    // The link is known here, so every recorded iterate is scored on the
    // held-out sample with the link applied to its normalized direction.
    let z_test = |direction: &[f64]| test.covariates.mul_vec(direction);
    let mut best: Option<(&TrajectoryRecord<Vec<f64>>, f64)> = None;
    for rec in &trajectory.records {
        let direction = match optim::normalize_identifiable(&rec.beta, model) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let z = z_test(&direction)?;
        let mut err = 0.0;
        for (&zi, &yi) in z.iter().zip(test.responses.iter()) {
            let pred = if zi >= 0.0 { 1.0 } else { -1.0 };
            err += (pred - yi) * (pred - yi);
        }
        err /= test.n() as f64;
        if best.is_none_or(|(_, b)| err < b) {
            best = Some((rec, err));
        }
    }
    let (selected, risk) = match best {
        Some((rec, err)) => (rec, err),
        None => {
            return Ok(VectorTaskOutcome {
                selected_t: None,
                dist: None,
                fdr: None,
                tpr: None,
                baseline_fdr: Some(baseline_sm.fdr),
                baseline_tpr: Some(baseline_sm.tpr),
                risk: None,
                error: Some("no usable iterate".into()),
            })
        }
    };

    let dist = metrics::dist_vector(&selected.beta, &beta_star).ok();
    let est_support = threshold_vector(&selected.beta, threshold)?;
    let sm = support_metrics(&est_support, &support, p)?;
    Ok(VectorTaskOutcome {
        selected_t: Some(selected.t),
        dist,
        fdr: Some(sm.fdr),
        tpr: Some(sm.tpr),
        baseline_fdr: Some(baseline_sm.fdr),
        baseline_tpr: Some(baseline_sm.tpr),
        risk: Some(risk),
        error: None,
    })
}

/// Held-out kernel risk using the true direction, the reference point for
/// rate checks on the smoother alone.
fn run_true_direction_risk(
    model: &ScoreModel,
    link: &LinkSpec,
    p: usize,
    s: usize,
    noise_sigma: f64,
    n: usize,
    task_seed: u64,
) -> Result<VectorTaskOutcome> {
    let mut beta_rng = stream_rng(task_seed, 0);
    let (mut beta_star, _support) = gen_sparse_beta(p, s, &mut beta_rng)?;
    unit_signal(model, &mut beta_star)?;
    let train = gen_vector_sim(
        &beta_star,
        model,
        link,
        noise_sigma,
        n,
        split_seed(task_seed, 1),
    )?;
    let test = gen_vector_sim(
        &beta_star,
        model,
        link,
        noise_sigma,
        n,
        split_seed(task_seed, 2),
    )?;
    let predictor = select::fit_kernel(&train, model, &beta_star, None, None)?;
    let risk = select::prediction_risk(&predictor, &test, &beta_star)?;
    Ok(VectorTaskOutcome {
        selected_t: None,
        dist: Some(0.0),
        fdr: None,
        tpr: None,
        baseline_fdr: None,
        baseline_tpr: None,
        risk: Some(risk),
        error: None,
    })
}
