use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sindex_cli::config::{
    load_json, ExperimentConfig, FitConfig, PredictConfig, SimulateConfig,
};
use sindex_cli::dataset::{self, DatasetKind};
use sindex_cli::driver;
use sindex_cli::error::{CliError, Result};
use sindex_cli::trajectory_io;

use sindex_core::linalg::Mat;
use sindex_core::optim::{run_matrix, run_vector, MatrixTruth, VectorTruth};
use sindex_core::select;

#[derive(Parser)]
#[command(
    name = "sindex",
    version,
    about = "Single index estimation by over-parameterized gradient descent"
)]
struct Cli {
    /// Worker threads for batch experiments (0 or unset: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the factored descent path on a vector dataset; writes the
    /// trajectory as CSV.
    FitVector {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the factored descent path on a matrix dataset; writes the
    /// trajectory as CSV.
    FitMatrix {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a stopping time out of sample; writes the candidate table.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded experiment grid; writes a metrics or trajectory CSV.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the master seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg: SimulateConfig = load_json(config)?;
    let ds = dataset::simulate(&cfg, seed)?;
    dataset::write_dataset(out, &ds)?;
    eprintln!(
        "wrote {} ({:?} dataset, n={}, seed={})",
        out.display(),
        ds.kind,
        ds.n,
        ds.seed
    );
    Ok(())
}

fn cmd_fit_vector(config: &Path, out: &Path) -> Result<()> {
    let cfg: FitConfig = load_json(config)?;
    let ds = dataset::read_dataset(&cfg.dataset)?;
    if ds.kind != DatasetKind::Vector {
        return Err(CliError::Config(format!(
            "{} holds a matrix dataset; use fit-matrix",
            cfg.dataset.display()
        )));
    }
    let instance = ds.to_vector_instance()?;
    let model = ds.design.build()?;
    let phi = cfg.robust.moment_vector(&instance, &model)?;
    let solver = cfg.solver.build();

    // Distances are recorded only when the dataset knows the link slope.
    let scaled: Option<Vec<f64>> = ds
        .mu_star
        .map(|mu| ds.beta_star.iter().map(|&b| mu * b).collect());
    let support = ds.support.clone().unwrap_or_default();
    let truth = scaled.as_ref().map(|sb| VectorTruth {
        scaled_beta: sb,
        support: &support,
    });
    let trajectory = run_vector(&phi, &solver, truth.as_ref())?;
    trajectory_io::write_trajectory_csv(out, &trajectory)?;
    if trajectory.diverged {
        let step = trajectory.records.last().map_or(0, |r| r.t);
        return Err(CliError::Diverged { step });
    }
    eprintln!(
        "wrote {} ({} records, final loss {:.6e})",
        out.display(),
        trajectory.records.len(),
        trajectory.records.last().map_or(f64::NAN, |r| r.loss)
    );
    Ok(())
}

fn cmd_fit_matrix(config: &Path, out: &Path) -> Result<()> {
    let cfg: FitConfig = load_json(config)?;
    let ds = dataset::read_dataset(&cfg.dataset)?;
    if ds.kind != DatasetKind::Matrix {
        return Err(CliError::Config(format!(
            "{} holds a vector dataset; use fit-vector",
            cfg.dataset.display()
        )));
    }
    let instance = ds.to_matrix_instance()?;
    let model = ds.design.build()?;
    let phi = cfg.robust.moment_matrix(&instance, &model)?;
    let solver = cfg.solver.build();

    let d = instance.d();
    let scaled: Option<Mat> = match ds.mu_star {
        Some(mu) => {
            let data: Vec<f64> = ds.beta_star.iter().map(|&b| mu * b).collect();
            Some(Mat::from_vec(d, d, data)?)
        }
        None => None,
    };
    let truth = scaled.as_ref().map(|sb| MatrixTruth { scaled_beta: sb });
    let trajectory = run_matrix(&phi, &solver, truth.as_ref())?;
    trajectory_io::write_trajectory_csv(out, &trajectory)?;
    if trajectory.diverged {
        let step = trajectory.records.last().map_or(0, |r| r.t);
        return Err(CliError::Diverged { step });
    }
    eprintln!(
        "wrote {} ({} records, final loss {:.6e})",
        out.display(),
        trajectory.records.len(),
        trajectory.records.last().map_or(f64::NAN, |r| r.loss)
    );
    Ok(())
}

fn cmd_predict(config: &Path, out: &Path) -> Result<()> {
    let cfg: PredictConfig = load_json(config)?;
    let train = dataset::read_dataset(&cfg.train_dataset)?;
    let test = dataset::read_dataset(&cfg.test_dataset)?;
    if train.kind != test.kind {
        return Err(CliError::Config(
            "train and test datasets have different kinds".into(),
        ));
    }
    let solver = cfg.solver.build();
    let report = match train.kind {
        DatasetKind::Vector => {
            let train_inst = train.to_vector_instance()?;
            let test_inst = test.to_vector_instance()?;
            let model = train.design.build()?;
            let phi = cfg.robust.moment_vector(&train_inst, &model)?;
            let trajectory = run_vector(&phi, &solver, None)?;
            if trajectory.diverged {
                let step = trajectory.records.last().map_or(0, |r| r.t);
                return Err(CliError::Diverged { step });
            }
            select::select_stopping_time(
                &trajectory,
                &train_inst,
                &test_inst,
                &model,
                cfg.m,
                cfg.plateau_rel_tol,
            )?
        }
        DatasetKind::Matrix => {
            let train_inst = train.to_matrix_instance()?;
            let test_inst = test.to_matrix_instance()?;
            let model = train.design.build()?;
            let phi = cfg.robust.moment_matrix(&train_inst, &model)?;
            let trajectory = run_matrix(&phi, &solver, None)?;
            if trajectory.diverged {
                let step = trajectory.records.last().map_or(0, |r| r.t);
                return Err(CliError::Diverged { step });
            }
            select::select_stopping_time_matrix(
                &trajectory,
                &train_inst,
                &test_inst,
                cfg.m,
                cfg.plateau_rel_tol,
            )?
        }
    };
    trajectory_io::write_selection_csv(out, &report)?;
    eprintln!(
        "wrote {} ({} candidates, selected t={})",
        out.display(),
        report.candidates.len(),
        report.selected_t
    );
    Ok(())
}

fn cmd_benchmark(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<()> {
    let cfg: ExperimentConfig = load_json(config)?;
    let started = std::time::Instant::now();
    let output = driver::run_experiment(&cfg, seed, threads)?;
    driver::write_output(out, &output)?;
    let rows = match &output {
        driver::ExperimentOutput::Metrics(r) => r.len(),
        driver::ExperimentOutput::Trajectories(r) => r.len(),
    };
    eprintln!(
        "wrote {} ({rows} rows in {:.1}s)",
        out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(config, out, *seed),
        Command::FitVector { config, out } => cmd_fit_vector(config, out),
        Command::FitMatrix { config, out } => cmd_fit_matrix(config, out),
        Command::Predict { config, out } => cmd_predict(config, out),
        Command::Benchmark { config, out, seed } => {
            cmd_benchmark(config, out, *seed, cli.threads)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
