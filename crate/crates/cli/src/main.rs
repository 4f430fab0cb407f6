//! `latentage`: the age-editing pipeline as batch subcommands.
//!
//! Exit status is 0 on success, 1 when the work itself fails (bad data, a
//! fit that cannot be made, unreadable files) and 2 for usage errors.

mod commands;
mod config;
mod gen;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;

/// A usage error detected after argument parsing, e.g. a value missing from
/// both the flags and the config file.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser, Debug)]
#[command(name = "latentage", version, about = "Age editing in generator latent spaces")]
struct Cli {
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Where to write the run manifest (default depends on the subcommand).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Standardize a latent file per component.
    Standardize(Io),
    /// Fit the age direction with linear SVR.
    FitDirection(Io),
    /// Identity mask from PCA explained variance.
    FitPcaMask(Select),
    /// Identity and age masks from LDA reconstruction, plus their combination.
    FitLdaMasks(LdaArgs),
    /// Edit weights from combined masks.
    ComposePhi(PhiArgs),
    /// Move every latent by a scalar step along the direction.
    Edit(EditArgs),
    /// Fit per-group scalar-to-age curves.
    Calibrate(CalibArgs),
    /// Scalar step between two ages.
    SolveScalar(SolveArgs),
    /// Verification-rate and age-gain curves from evaluation records.
    Evaluate(EvalArgs),
    /// Batch-generate edited latents at several target ages.
    GenDataset(GenArgs),
    /// Print a JSON summary of the given input files.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct Io {
    #[arg(long)]
    latents: Option<PathBuf>,
    /// Metadata CSV overriding the sidecar.
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Select {
    #[command(flatten)]
    io: Io,
    /// Variance share to retain.
    #[arg(long)]
    threshold: Option<f64>,
    /// Threshold reconstruction distances with this metric instead of using eigen-rank indices.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args, Debug)]
struct LdaArgs {
    /// Latents labelled by identity.
    #[command(flatten)]
    io: Io,
    /// Latents labelled by age; defaults to --latents.
    #[arg(long)]
    age_latents: Option<PathBuf>,
    /// Discriminability share to retain.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    metric: Option<String>,
    /// Age groups for samples that carry an age but no group.
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Args, Debug)]
struct PhiArgs {
    /// Directory written by fit-lda-masks.
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EditArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long)]
    direction: Option<PathBuf>,
    /// Edit weights; all ones when absent.
    #[arg(long)]
    phi: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    scalar: Option<f64>,
}

#[derive(Args, Debug)]
struct CalibArgs {
    /// CSV with columns group,scalar,estimated_age.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    range_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    range_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Defaults to the group of --from.
    #[arg(long)]
    group: Option<usize>,
    /// Original age; without it the absolute step for --to is printed.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// CSV with columns sample_id,scalar,fr_score,estimated_age,original_age,group.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Verification threshold on similarity scores.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// One curve over all groups instead of one per group.
    #[arg(long)]
    pooled: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long)]
    direction: Option<PathBuf>,
    #[arg(long)]
    phi: Option<PathBuf>,
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Comma-separated target ages.
    #[arg(long, value_delimiter = ',')]
    ages: Option<Vec<f64>>,
    /// Stop after writing this many target files (for interruption tests).
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    latents: Option<PathBuf>,
    #[arg(long)]
    direction: Option<PathBuf>,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    phi: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            eprintln!("run `latentage --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    config::set(&mut cfg.jobs, cli.jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()?;
    let manifest = cli.manifest;
    pool.install(|| dispatch(cli.command, cfg, manifest))
}

fn apply_io(cfg: &mut PipelineConfig, io: Io) {
    config::set(&mut cfg.latents, io.latents);
    config::set(&mut cfg.meta, io.meta);
    config::set(&mut cfg.out, io.out);
}

fn dispatch(cmd: Command, mut cfg: PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    use config::set;
    match cmd {
        Command::Standardize(io) => {
            apply_io(&mut cfg, io);
            commands::standardize_cmd(&cfg, manifest)
        }
        Command::FitDirection(io) => {
            apply_io(&mut cfg, io);
            commands::fit_direction(&cfg, manifest)
        }
        Command::FitPcaMask(a) => {
            apply_io(&mut cfg, a.io);
            set(&mut cfg.variance_threshold, a.threshold);
            set(&mut cfg.metric, a.metric);
            commands::fit_pca_mask(&cfg, manifest)
        }
        Command::FitLdaMasks(a) => {
            apply_io(&mut cfg, a.io);
            set(&mut cfg.age_latents, a.age_latents);
            set(&mut cfg.discriminability_threshold, a.threshold);
            set(&mut cfg.metric, a.metric);
            set(&mut cfg.scheme, a.scheme);
            commands::fit_lda_masks(&cfg, manifest)
        }
        Command::ComposePhi(a) => {
            set(&mut cfg.masks, a.masks);
            set(&mut cfg.alpha, a.alpha);
            set(&mut cfg.beta, a.beta);
            set(&mut cfg.out, a.out);
            commands::compose_phi_cmd(&cfg, manifest)
        }
        Command::Edit(a) => {
            apply_io(&mut cfg, a.io);
            set(&mut cfg.direction, a.direction);
            set(&mut cfg.phi, a.phi);
            set(&mut cfg.scalar, a.scalar);
            commands::edit(&cfg, manifest)
        }
        Command::Calibrate(a) => {
            set(&mut cfg.samples, a.samples);
            set(&mut cfg.scheme, a.scheme);
            set(&mut cfg.degree, a.degree);
            set(&mut cfg.range_min, a.range_min);
            set(&mut cfg.range_max, a.range_max);
            set(&mut cfg.out, a.out);
            commands::calibrate(&cfg, manifest)
        }
        Command::SolveScalar(a) => {
            set(&mut cfg.calib, a.calib);
            set(&mut cfg.group, a.group);
            set(&mut cfg.from, a.from);
            set(&mut cfg.to, a.to);
            commands::solve_scalar(&cfg, manifest)
        }
        Command::Evaluate(a) => {
            set(&mut cfg.records, a.records);
            set(&mut cfg.fr_threshold, a.threshold);
            set(&mut cfg.cutoff, a.cutoff);
            if a.pooled {
                cfg.pooled = Some(true);
            }
            set(&mut cfg.out, a.out);
            commands::evaluate(&cfg, manifest)
        }
        Command::GenDataset(a) => {
            apply_io(&mut cfg, a.io);
            set(&mut cfg.direction, a.direction);
            set(&mut cfg.phi, a.phi);
            set(&mut cfg.calib, a.calib);
            set(&mut cfg.target_ages, a.ages);
            gen::gen_dataset(&cfg, manifest, a.stop_after)
        }
        Command::Inspect(a) => {
            set(&mut cfg.latents, a.latents);
            set(&mut cfg.direction, a.direction);
            set(&mut cfg.calib, a.calib);
            set(&mut cfg.phi, a.phi);
            commands::inspect(&cfg, manifest)
        }
    }
}
