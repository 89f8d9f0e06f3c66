//! Model assembly from a [`StudyConfig`] and the two-study reference
//! experiment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::StudyConfig;
use crate::covariance::{assemble_covariance, KernelParams};
use crate::darcy::{solve_pressure, BoundaryConditions};
use crate::diagnostics::{checkpoints, diagnostics_series, write_gnuplot_data, write_series_csv, DiagnosticsReport};
use crate::error::{Error, McmcError};
use crate::grid::{read_field_csv_on, write_field_csv, write_field_pgm, Grid2D, ScalarField};
use crate::kle::{solve_kle, KleBasis, Truncation};
use crate::kriging::{read_measurements_csv, MeasurementSet};
use crate::mcmc::{run_study, study_seeds, ChainConfig, ChainTrace, Conditioning, InversionModel, LikelihoodParams};

/// Seed of the KLE draw used as the synthetic reference field.
pub const REFERENCE_SEED: u64 = 2024;

pub fn kernel_params(cfg: &StudyConfig) -> Result<KernelParams, Error> {
    Ok(KernelParams::new(cfg.sigma2, cfg.lx, cfg.ly)?)
}

pub fn fine_grid(cfg: &StudyConfig) -> Result<Grid2D, Error> {
    Ok(Grid2D::new(cfg.fine_nx, cfg.fine_ny)?)
}

pub fn build_basis(cfg: &StudyConfig) -> Result<KleBasis, Error> {
    let grid = fine_grid(cfg)?;
    let params = kernel_params(cfg)?;
    let truncation = match (cfg.n_terms, cfg.energy_threshold) {
        (_, Some(e)) => Truncation::Energy(e),
        (Some(n), None) => Truncation::Modes(n),
        (None, None) => Truncation::Modes(20),
    };
    Ok(solve_kle(&assemble_covariance(&grid, &params), &grid, truncation)?)
}

/// `n` independent N(0, 1) values from `seed`.
pub fn standard_normal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// KLE draw with standard-normal coefficients from `seed`.
pub fn draw_reference(basis: &KleBasis, seed: u64) -> Result<ScalarField, Error> {
    Ok(basis.synthesize(&standard_normal(basis.n(), seed))?)
}

/// Everything derived from the config before sampling.
pub struct Setup {
    pub reference: ScalarField,
    pub measurements: MeasurementSet,
    pub model: InversionModel,
}

/// Loads the reference field and measurements named in `cfg`; either one
/// missing on disk is regenerated (fixed-seed draw, lattice sample).
pub fn build_setup(cfg: &StudyConfig) -> Result<Setup, Error> {
    let basis = build_basis(cfg)?;
    let grid = basis.grid();
    let reference = if cfg.reference_field.exists() {
        read_field_csv_on(&cfg.reference_field, grid)?
    } else {
        log::warn!(
            "{} not found; using the KLE draw with seed {REFERENCE_SEED}",
            cfg.reference_field.display()
        );
        draw_reference(&basis, REFERENCE_SEED)?
    };
    let measurements = if cfg.measurements.exists() {
        read_measurements_csv(&cfg.measurements)?
    } else {
        log::warn!(
            "{} not found; sampling the reference on the default 3x3 lattice",
            cfg.measurements.display()
        );
        MeasurementSet::sample(&reference, MeasurementSet::default_lattice())?
    };
    let params = kernel_params(cfg)?;
    let conditioning = Conditioning::from_measurements(&basis, &measurements, &params)?;
    let likelihood = LikelihoodParams {
        sigma_c2: cfg.sigma_c2,
        sigma_f2: cfg.sigma_f2,
    };
    let coarse = Grid2D::new(cfg.coarse_nx, cfg.coarse_ny)?;
    let model = InversionModel::new(
        basis,
        Some(conditioning),
        coarse,
        BoundaryConditions::default(),
        likelihood,
        &reference,
    )?;
    Ok(Setup {
        reference,
        measurements,
        model,
    })
}

pub fn chain_config(cfg: &StudyConfig, conditioned: bool) -> ChainConfig {
    ChainConfig {
        beta: cfg.beta,
        iterations: cfg.iterations,
        seed: cfg.seed,
        conditioned,
        store_projected: cfg.store_projected,
        single_component: cfg.single_component,
        two_stage: cfg.two_stage,
        explicit_prior_ratio: cfg.explicit_prior_ratio,
        initial_theta: None,
        snapshots: cfg.snapshots.iter().copied().filter(|&s| s >= 1 && s <= cfg.iterations).collect(),
    }
}

pub fn study_name(conditioned: bool) -> &'static str {
    if conditioned {
        "conditioned"
    } else {
        "unconditioned"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyManifest {
    pub version: String,
    pub config: StudyConfig,
    pub seeds: Vec<u64>,
    pub dry_run: bool,
    pub artifacts: Vec<PathBuf>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl StudyManifest {
    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Outcome of one study.
pub struct StudyResult {
    pub conditioned: bool,
    pub seeds: Vec<u64>,
    pub traces: Vec<ChainTrace>,
    /// `None` for single-chain studies.
    pub report: Option<DiagnosticsReport>,
}

impl StudyResult {
    pub fn mean_coarse_rate(&self) -> f64 {
        self.traces.iter().map(ChainTrace::coarse_rate).sum::<f64>() / self.traces.len() as f64
    }

    pub fn mean_fine_stage_rate(&self) -> f64 {
        self.traces.iter().map(ChainTrace::fine_stage_rate).sum::<f64>() / self.traces.len() as f64
    }

    pub fn mean_overall_rate(&self) -> f64 {
        self.traces.iter().map(ChainTrace::overall_rate).sum::<f64>() / self.traces.len() as f64
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn trace_path(dir: &Path, conditioned: bool, chain: usize) -> PathBuf {
    dir.join(study_name(conditioned)).join(format!("chain_{}.csv", chain + 1))
}

pub fn diagnostics_path(dir: &Path, conditioned: bool) -> PathBuf {
    dir.join(study_name(conditioned)).join("diagnostics.csv")
}

fn planned_artifacts(cfg: &StudyConfig, dir: &Path, studies: &[bool]) -> Vec<PathBuf> {
    let mut out = vec![dir.join("manifest.json")];
    for &c in studies {
        for j in 0..cfg.chains {
            out.push(trace_path(dir, c, j));
            for &s in &chain_config(cfg, c).snapshots {
                out.push(snapshot_path(dir, c, j, s));
            }
        }
        if cfg.chains >= 2 {
            out.push(diagnostics_path(dir, c));
        }
    }
    if studies.len() == 2 && cfg.chains >= 2 {
        out.push(dir.join("diagnostics.dat"));
    }
    out.push(dir.join("acceptance.csv"));
    out
}

fn snapshot_path(dir: &Path, conditioned: bool, chain: usize, it: usize) -> PathBuf {
    dir.join(study_name(conditioned))
        .join(format!("chain_{}_iter_{it}.pgm", chain + 1))
}

/// Runs one study and writes its traces, snapshots and diagnostics.
pub fn run_one_study(cfg: &StudyConfig, setup: &Setup, conditioned: bool, dir: &Path) -> Result<StudyResult, Error> {
    let seeds = study_seeds(cfg.seed, cfg.chains);
    let ccfg = chain_config(cfg, conditioned);
    log::info!(
        "{} study: {} chains x {} iterations",
        study_name(conditioned),
        cfg.chains,
        cfg.iterations
    );
    let traces = run_study(&ccfg, &seeds, &setup.model)?;
    create_dir(&dir.join(study_name(conditioned)))?;
    for (j, t) in traces.iter().enumerate() {
        t.write_csv(trace_path(dir, conditioned, j))?;
        for (it, field) in &t.snapshots {
            write_field_pgm(field, snapshot_path(dir, conditioned, j, *it))?;
        }
    }
    let report = if traces.len() >= 2 {
        let burn = cfg.burn_in();
        let report = diagnostics_series(&traces, burn, &checkpoints(cfg.checkpoint_every, cfg.iterations - burn))?;
        write_series_csv(&report.series, diagnostics_path(dir, conditioned))?;
        Some(report)
    } else {
        log::warn!("single-chain study: convergence diagnostics need at least 2 chains and are skipped");
        None
    };
    Ok(StudyResult {
        conditioned,
        seeds,
        traces,
        report,
    })
}

/// `study,chain,seed,coarse_rate,fine_stage_rate,overall_rate`, plus a mean
/// row per study.
pub fn write_acceptance_table(results: &[StudyResult], path: &Path) -> Result<(), Error> {
    let mut csv = String::from("study,chain,seed,coarse_rate,fine_stage_rate,overall_rate\n");
    for r in results {
        let name = study_name(r.conditioned);
        for (j, (t, s)) in r.traces.iter().zip(&r.seeds).enumerate() {
            csv.push_str(&format!(
                "{name},{},{s},{:.6},{:.6},{:.6}\n",
                j + 1,
                t.coarse_rate(),
                t.fine_stage_rate(),
                t.overall_rate()
            ));
        }
        let coarse = r.mean_coarse_rate();
        csv.push_str(&format!(
            "{name},mean,,{coarse:.6},{:.6},{:.6}\n",
            r.mean_fine_stage_rate(),
            r.mean_overall_rate()
        ));
    }
    fs::write(path, csv).map_err(|e| Error::io(path, e))
}

/// Mean acceptance rates per study and the last diagnostics checkpoint.
pub fn summary_text(results: &[StudyResult]) -> String {
    let mut text = format!("{:<14} {:>10} {:>10} {:>10}\n", "study", "coarse", "fine-stage", "overall");
    for r in results {
        text.push_str(&format!(
            "{:<14} {:>9.1}% {:>9.1}% {:>9.1}%\n",
            study_name(r.conditioned),
            100.0 * r.mean_coarse_rate(),
            100.0 * r.mean_fine_stage_rate(),
            100.0 * r.mean_overall_rate()
        ));
    }
    for r in results {
        if let Some(last) = r.report.as_ref().and_then(|rep| rep.series.last()) {
            text.push_str(&format!(
                "{}: max PSRF {:.3}, MPSRF {:.3} after {} draws per chain\n",
                study_name(r.conditioned),
                last.max_psrf,
                last.mpsrf,
                last.draws
            ));
        }
    }
    text
}

/// Writes the reference field, its pressure solution and the manifest, then
/// runs the requested studies with paired seeds.
pub fn run_studies(cfg: &StudyConfig, studies: &[bool], dir: &Path, dry_run: bool) -> Result<Vec<StudyResult>, Error> {
    cfg.validate()?;
    if studies.is_empty() {
        return Err(McmcError::Argument("no study requested".into()).into());
    }
    create_dir(dir)?;
    let start = Instant::now();
    let mut manifest = StudyManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds: study_seeds(cfg.seed, cfg.chains),
        dry_run,
        artifacts: planned_artifacts(cfg, dir, studies),
        timings: BTreeMap::new(),
    };
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    if dry_run {
        return Ok(Vec::new());
    }

    let setup = build_setup(cfg)?;
    write_field_csv(&setup.reference, dir.join("reference_logperm.csv"))?;
    write_field_pgm(&setup.reference, dir.join("reference_logperm.pgm"))?;
    let pressure = solve_pressure(&setup.reference, &setup.model.bc, None)?;
    write_field_csv(pressure.field(), dir.join("reference_pressure.csv"))?;
    write_field_pgm(pressure.field(), dir.join("reference_pressure.pgm"))?;
    if let Some(c) = &setup.model.conditioning {
        write_field_csv(&c.kriged, dir.join("kriged.csv"))?;
    }
    manifest.timings.insert("setup".into(), start.elapsed().as_secs_f64());

    let mut results = Vec::new();
    for &conditioned in studies {
        let t0 = Instant::now();
        results.push(run_one_study(cfg, &setup, conditioned, dir)?);
        manifest
            .timings
            .insert(study_name(conditioned).into(), t0.elapsed().as_secs_f64());
    }
    let with_report: Vec<(&str, &[_])> = results
        .iter()
        .filter_map(|r| r.report.as_ref().map(|rep| (study_name(r.conditioned), rep.series.as_slice())))
        .collect();
    if with_report.len() == 2 {
        write_gnuplot_data(&with_report, dir.join("diagnostics.dat"))?;
    }
    write_acceptance_table(&results, &dir.join("acceptance.csv"))?;
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    manifest.write(&manifest_path)?;
    Ok(results)
}

/// Conditioned and unconditioned studies with the same seeds.
pub fn run_reference_experiment(cfg: &StudyConfig, dir: &Path, dry_run: bool) -> Result<Vec<StudyResult>, Error> {
    run_studies(cfg, &[true, false], dir, dry_run)
}
