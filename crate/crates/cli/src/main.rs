//! `cuesim`: simulate accuracy surfaces, fit participants, cluster, report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cuesim_core::dataset::load_dataset;
use cuesim_core::fitting::{fit_all, fits_from_csv, fits_to_csv, tabulate_non_default};
use cuesim_core::grid::{run_surface, AccuracySurface};
use cuesim_core::pipeline::{
    analyze, cluster_family, run_pipeline, run_synthetic, write_atomic, PipelineConfig,
};
use cuesim_core::synth::{generate_synthetic, SynthSpec};
use cuesim_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "cuesim",
    version,
    about = "Cue-based retrieval simulation and individual-differences analysis"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per surface cell; overrides the configuration.
    #[arg(long, global = true)]
    iterations: Option<u32>,
    /// Worker threads for the surface. Does not change results.
    #[arg(long, global = true, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the accuracy surface and write it as CSV plus a JSON sidecar.
    Grid {
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit participants against a surface and print the non-default tables.
    Fit {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Cluster fitted parameters and print discrimination tables.
    Cluster {
        #[arg(long)]
        fits: PathBuf,
        /// Directory for the per-family assignment files.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Generate a synthetic cohort from a surface.
    Synth {
        #[arg(long)]
        surface: PathBuf,
        /// Cohort specification (TOML); the configuration's `synthetic`
        /// section otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Directory for dataset.csv and generating.csv.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Analyze a dataset against an existing surface and write a report bundle.
    Report {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Full pipeline: surface, fits, clustering and report.
    Run {
        /// Participant data; a synthetic cohort is generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn config(g: &Global) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(n) = g.iterations {
        c.iterations = n;
    }
    if g.parallelism == 0 {
        return Err(Error::invalid("--parallelism must be >= 1"));
    }
    c.parallelism = g.parallelism;
    c.validate()?;
    Ok(c)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli.global).map_err(|e| e.in_stage("config"))?;
    match cli.command {
        Command::Grid { out } => {
            let schedules = cfg.schedules()?;
            let s = run_surface(
                &cfg.grid,
                &schedules,
                &cfg.constants,
                cfg.iterations,
                cfg.seed,
                cfg.parallelism,
            )?;
            s.write(&out)?;
            eprintln!("wrote {} cells to {}", s.cell_count(), out.display());
        }
        Command::Fit { surface, data, out } => {
            let s = AccuracySurface::read(&surface)?;
            let d = load_dataset(&data)?;
            let types = cfg.sentence_types();
            let fits = fit_all(
                &d.observations(&types)?,
                &s,
                &cfg.defaults,
                &cfg.tolerances(),
            )?;
            write_atomic(&out, fits_to_csv(&fits).as_bytes())?;
            for f in &cfg.families {
                println!("{}", f.name);
                print!(
                    "{}",
                    tabulate_non_default(&fits, &[f.subject.clone(), f.object.clone()]).render()
                );
                println!();
            }
        }
        Command::Cluster { fits, out } => {
            let text = std::fs::read_to_string(&fits).map_err(|e| Error::io(&fits, e))?;
            let records = fits_from_csv(&text, &fits)?;
            create_dir(&out)?;
            for f in &cfg.families {
                let c = cluster_family(&records, f, &cfg)?;
                write_atomic(
                    &out.join(format!("assignments-{}.csv", c.family)),
                    c.assignments_csv.as_bytes(),
                )?;
                println!("{} ({} rows)", c.family, c.rows);
                print!("{}", c.table);
                println!(
                    "discrimination accuracy, {:.4}; null 5th-95th percentile, {:.4} to {:.4}\n",
                    c.accuracy, c.null_p05, c.null_p95
                );
            }
        }
        Command::Synth { surface, spec, out } => {
            let s = AccuracySurface::read(&surface)?;
            let spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    SynthSpec::from_toml(&text)?
                }
                None => cfg.synthetic.clone(),
            };
            let cohort = generate_synthetic(&spec, &s, &cfg.sentence_types())?;
            create_dir(&out)?;
            write_atomic(&out.join("dataset.csv"), cohort.dataset.to_csv().as_bytes())?;
            write_atomic(
                &out.join("generating.csv"),
                cohort.generating_csv().as_bytes(),
            )?;
            eprintln!(
                "wrote {} participants to {}",
                cohort.dataset.len(),
                out.display()
            );
        }
        Command::Report { surface, data, out } => {
            let s = AccuracySurface::read(&surface)?;
            let d = load_dataset(&data)?;
            let bundle = analyze(&d, s, &cfg)?;
            bundle.write_to(&out)?;
            print!("{}", bundle.report);
        }
        Command::Run { data, out } => {
            let bundle = match data {
                Some(p) => run_pipeline(&load_dataset(&p)?, &cfg)?,
                None => run_synthetic(&cfg)?,
            };
            bundle.write_to(&out)?;
            print!("{}", bundle.report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
