use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use shearlab::experiments::{self, RunConfig};
use shearlab::Error;

#[derive(Parser)]
#[command(
    name = "shearlab",
    version,
    about = "Alternating-shear mixing and dissipation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the initial data as a coefficient file.
    BuildField(Common),
    /// Bootstrap trace of the inviscid evolution.
    RunInviscid(Common),
    /// One viscous run at the first --kappa.
    RunViscous(Common),
    /// Dissipation across the kappa list, with the u = 0 contrast.
    Sweep(Common),
    /// Universality under seeded band-limited perturbations.
    Perturbed(Common),
    /// Data-adaptive program followed by a sweep.
    Adaptive(Common),
    /// Reversible and vanishing-viscosity solutions on the round trip.
    Nonuniq(Common),
    /// Magnetic energy of the stream-function reading.
    Dynamo(Common),
    /// Measured dissipation against the Hölder bound.
    OcCompare(Common),
    /// Spectral solver against the finite-difference oracle.
    OracleValidate(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config to start from; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Repeatable.
    #[arg(long)]
    kappa: Vec<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    jmax: Option<u32>,
    #[arg(long)]
    substeps: Option<usize>,
    /// "sinsin:M,L" (joined with '+') or a coefficient file.
    #[arg(long)]
    theta0: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strict: bool,
    /// Perturbation size, repeatable.
    #[arg(long)]
    epsilon: Vec<f64>,
    #[arg(long)]
    band: Option<u32>,
    /// Hölder probe exponent, repeatable.
    #[arg(long)]
    beta: Vec<f64>,
}

impl Common {
    fn config(&self, experiment: &str) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        c.experiment = experiment.to_string();
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if !self.kappa.is_empty() {
            c.kappa = self.kappa.clone();
        }
        if let Some(v) = self.nx {
            c.nx = v;
            if self.ny.is_none() {
                c.ny = v;
            }
        }
        if let Some(v) = self.ny {
            c.ny = v;
        }
        if self.jmax.is_some() {
            c.j_max = self.jmax;
        }
        if let Some(v) = self.substeps {
            c.substeps = v;
        }
        if let Some(v) = &self.theta0 {
            c.theta0 = v.clone();
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.strict |= self.strict;
        if !self.epsilon.is_empty() {
            c.epsilon = self.epsilon.clone();
        }
        if let Some(v) = self.band {
            c.band = v;
        }
        if !self.beta.is_empty() {
            c.beta = self.beta.clone();
        }
        Ok(c)
    }
}

fn emit<T: Serialize>(r: Result<T, Error>) -> Result<(), Error> {
    let v = r?;
    println!(
        "{}",
        serde_json::to_string_pretty(&v).expect("report serializes")
    );
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::BuildField(a) => emit(experiments::exp_build_field(&a.config("build-field")?)),
        Command::RunInviscid(a) => emit(experiments::exp_run_inviscid(&a.config("run-inviscid")?)),
        Command::RunViscous(a) => emit(experiments::exp_run_viscous(&a.config("run-viscous")?)),
        Command::Sweep(a) => emit(experiments::exp_sweep(&a.config("sweep")?)),
        Command::Perturbed(a) => emit(experiments::exp_perturbed(&a.config("perturbed")?)),
        Command::Adaptive(a) => emit(experiments::exp_adaptive(&a.config("adaptive")?)),
        Command::Nonuniq(a) => emit(experiments::exp_nonuniq(&a.config("nonuniq")?)),
        Command::Dynamo(a) => emit(experiments::exp_dynamo(&a.config("dynamo")?)),
        Command::OcCompare(a) => emit(experiments::exp_oc_compare(&a.config("oc-compare")?)),
        Command::OracleValidate(a) => emit(experiments::exp_oracle_validate(
            &a.config("oracle-validate")?,
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
