//! Command-line front end.

pub mod config;
pub mod experiment;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::conditioning::synthesize_conditioned;
use crate::darcy::{solve_pressure, BoundaryConditions};
use crate::diagnostics::{checkpoints, diagnostics_series, write_gnuplot_data, write_series_csv, DEFAULT_CHECKPOINT_EVERY};
use crate::error::{Error, McmcError};
use crate::grid::{fmt_real, read_field_csv, write_field_csv, write_field_pgm};
use crate::kle::energy_fraction;
use crate::kriging::{krige, read_measurements_csv, write_measurements_csv, MeasurementSet};
use crate::mcmc::ChainTrace;

pub use config::StudyConfig;
pub use experiment::{run_reference_experiment, StudyManifest};

#[derive(Debug, Parser)]
#[command(name = "permcond", version, about = "Conditioned KLE permeability fields and two-stage MCMC inversion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Direction {
    /// High pressure on the left, low on the right.
    X,
    /// High pressure at the bottom, low at the top.
    Y,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues and cumulative energy of the KLE.
    Kle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "eigenvalues.csv")]
        out: PathBuf,
        /// Also write each retained mode as a CSV field into this directory.
        #[arg(long)]
        modes: Option<PathBuf>,
    },
    /// Simple kriging of the measurements onto the fine grid.
    Krige {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `paths.measurements`.
        #[arg(long)]
        measurements: Option<PathBuf>,
        #[arg(long, default_value = "kriged.csv")]
        out: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// One conditioned realization from standard-normal coefficients.
    Condition {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "conditioned.csv")]
        out: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Pressure for a log-permeability CSV.
    Solve {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "pressure.csv")]
        out: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "x")]
        direction: Direction,
    },
    /// One MCMC study (`mcmc.conditioned` picks the variant).
    Invert {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `paths.output_dir` and the environment.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        dry_run: bool,
    },
    /// PSRF/MPSRF series for a set of trace CSVs.
    Diagnose {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Defaults to a tenth of the trace length.
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CHECKPOINT_EVERY)]
        every: usize,
        #[arg(long, default_value = "diagnostics.csv")]
        out: PathBuf,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Conditioned and unconditioned studies with paired seeds.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the manifest only.
        #[arg(long)]
        dry_run: bool,
    },
    /// Regenerates the synthetic reference field and its measurements.
    Reference {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = experiment::REFERENCE_SEED)]
        seed: u64,
        /// Defaults to `paths.reference_field`.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Defaults to `paths.measurements`.
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<StudyConfig, Error> {
    let cfg = match path {
        Some(p) => StudyConfig::parse_file(p)?,
        None => StudyConfig::default(),
    };
    log::set_max_level(cfg.verbosity.parse().unwrap_or(log::LevelFilter::Info));
    Ok(cfg)
}

fn output_dir(cfg: &StudyConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.resolved_output_dir())
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Kle { config, out, modes } => {
            let cfg = load_config(config.as_deref())?;
            let basis = experiment::build_basis(&cfg)?;
            let spectrum = basis.spectrum();
            let mut csv = String::from("mode,eigenvalue,cumulative_energy\n");
            for k in 0..spectrum.len() {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    k + 1,
                    fmt_real(spectrum[k]),
                    fmt_real(energy_fraction(spectrum, k + 1)?)
                ));
            }
            write_text(&out, &csv)?;
            if let Some(dir) = modes {
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for k in 0..basis.n() {
                    write_field_csv(&basis.phi(k), dir.join(format!("mode_{}.csv", k + 1)))?;
                }
            }
            println!("{} modes retain {:.6} of the energy", basis.n(), basis.energy());
        }
        Command::Krige {
            config,
            measurements,
            out,
            pgm,
        } => {
            let cfg = load_config(config.as_deref())?;
            let ms = read_measurements_csv(measurements.unwrap_or(cfg.measurements.clone()))?;
            let field = krige(&ms, &experiment::kernel_params(&cfg)?, &experiment::fine_grid(&cfg)?)?;
            write_field_csv(&field, &out)?;
            if let Some(p) = pgm {
                write_field_pgm(&field, p)?;
            }
        }
        Command::Condition { config, seed, out, pgm } => {
            let cfg = load_config(config.as_deref())?;
            let setup = experiment::build_setup(&cfg)?;
            let cond = setup.model.conditioning.as_ref().expect("setup always conditions");
            let coeffs = experiment::standard_normal(setup.model.n(), seed);
            let field = synthesize_conditioned(&setup.model.basis, &cond.kriged, &coeffs, &cond.projector)?;
            write_field_csv(&field, &out)?;
            if let Some(p) = pgm {
                write_field_pgm(&field, p)?;
            }
            let worst = cond
                .cells
                .iter()
                .zip(&cond.values)
                .map(|(&c, &v)| (field.values()[c] - v).abs())
                .fold(0.0, f64::max);
            println!(
                "rank {} nullity {}; max data mismatch {worst:e}",
                cond.projector.rank(),
                cond.projector.nullity()
            );
        }
        Command::Solve {
            field,
            out,
            pgm,
            direction,
        } => {
            let logperm = read_field_csv(&field)?;
            let bc = match direction {
                Direction::X => BoundaryConditions::left_to_right(1.0, 0.0),
                Direction::Y => BoundaryConditions::bottom_to_top(1.0, 0.0),
            };
            let p = solve_pressure(&logperm, &bc, None)?;
            write_field_csv(p.field(), &out)?;
            if let Some(path) = pgm {
                write_field_pgm(p.field(), path)?;
            }
        }
        Command::Invert { config, output, dry_run } => {
            let cfg = load_config(config.as_deref())?;
            let dir = output_dir(&cfg, output);
            let results = experiment::run_studies(&cfg, &[cfg.conditioned], &dir, dry_run)?;
            if !dry_run {
                print!("{}", experiment::summary_text(&results));
            }
        }
        Command::Diagnose {
            traces,
            burn_in,
            every,
            out,
            gnuplot,
        } => {
            if traces.len() < 2 {
                return Err(McmcError::Argument("diagnostics need at least 2 trace files".into()).into());
            }
            let loaded = traces
                .iter()
                .map(ChainTrace::read_csv)
                .collect::<Result<Vec<_>, _>>()?;
            let len = loaded[0].len();
            let burn = burn_in.unwrap_or(len / 10);
            let report = diagnostics_series(&loaded, burn, &checkpoints(every, len.saturating_sub(burn)))?;
            write_series_csv(&report.series, &out)?;
            if let Some(g) = gnuplot {
                write_gnuplot_data(&[("diagnostics", &report.series)], g)?;
            }
            if let Some(last) = report.series.last() {
                println!(
                    "max PSRF {:.4}, MPSRF {:.4} after {} draws per chain",
                    last.max_psrf, last.mpsrf, last.draws
                );
            }
        }
        Command::Experiment { config, output, dry_run } => {
            let cfg = load_config(config.as_deref())?;
            let dir = output_dir(&cfg, output);
            let results = run_reference_experiment(&cfg, &dir, dry_run)?;
            if !dry_run {
                print!("{}", experiment::summary_text(&results));
            }
        }
        Command::Reference {
            config,
            seed,
            field,
            measurements,
        } => {
            let cfg = load_config(config.as_deref())?;
            let basis = experiment::build_basis(&cfg)?;
            let reference = experiment::draw_reference(&basis, seed)?;
            let field_path = field.unwrap_or(cfg.reference_field.clone());
            let ms_path = measurements.unwrap_or(cfg.measurements.clone());
            for p in [&field_path, &ms_path] {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
            }
            write_field_csv(&reference, &field_path)?;
            let ms = MeasurementSet::sample(&reference, MeasurementSet::default_lattice())?;
            write_measurements_csv(&ms, &ms_path)?;
        }
    }
    Ok(())
}

/// `error:<module>:<code>: message` on one line.
pub fn format_error(e: &Error) -> String {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        source = s.source();
    }
    format!("error:{}: {}", e.tag(), msg.replace('\n', " "))
}
