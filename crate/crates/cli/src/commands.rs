//! The four subcommands. Each returns the paths it wrote.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use polykin::harness::suites::{run_suite, Suite, SuiteReport};
use polykin::harness::{ConvergenceReport, DumbbellSweep, MomentSet, ReducedSweep, RodSweep};

use crate::config::{Engine, ExperimentConfig, Flow, Model, Potential, Spring};
use crate::error::CliError;
use crate::output::{
    distances_csv, moments_csv, sha256_hex, write_file, write_json, write_snapshots, ReportFile,
    RunMetadata, SCHEMA_VERSION,
};
use crate::run::{self, spring_model};

/// A config file as read, with the command-line overrides applied.
pub struct LoadedConfig {
    pub path: PathBuf,
    pub sha256: String,
    pub config: ExperimentConfig,
    pub seed_overridden: bool,
}

pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Parse(format!("{} is not UTF-8", path.display())))?;
    let mut config = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.output.dir = o.to_path_buf();
    }
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        config,
        seed_overridden: seed.is_some(),
    })
}

fn metadata(cmd: &str, cfg: &LoadedConfig, started: Instant, outputs: &[PathBuf]) -> RunMetadata {
    RunMetadata {
        schema_version: SCHEMA_VERSION,
        command: cmd.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_path: cfg.path.display().to_string(),
        config_sha256: cfg.sha256.clone(),
        seed: cfg.config.seed,
        seed_overridden: cfg.seed_overridden,
        threads: rayon::current_num_threads(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    }
}

/// moments.csv, optional snapshots and run.json.
pub fn simulate(cfg: &LoadedConfig) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let c = &cfg.config;
    let result = run::simulate(c)?;
    let dir = &c.output.dir;
    let mpath = dir.join("moments.csv");
    write_file(&mpath, &moments_csv(&result.rows))?;
    let mut outputs = vec![mpath];
    if c.output.snapshots {
        if let Some(coords) = &result.coordinates {
            outputs.extend(write_snapshots(&dir.join("snapshots"), coords, &result.frames)?);
        }
    }
    let rpath = dir.join("run.json");
    outputs.push(rpath.clone());
    write_json(&rpath, &metadata("simulate", cfg, started, &outputs))?;
    Ok(outputs)
}

fn sweep_error(field: &str, message: &str) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// The harness sweep a config describes.
pub fn sweep_report(c: &ExperimentConfig) -> Result<ConvergenceReport, CliError> {
    let s = c
        .sweep
        .as_ref()
        .ok_or_else(|| sweep_error("sweep.epsilons", "is required by the sweep command"))?;
    let p = &c.physics;
    let nm = &c.numerics;
    let along_axis = |n: [f64; 3]| -> Result<f64, CliError> {
        if n[1] != 0.0 || n[2] != 0.0 {
            return Err(sweep_error("initial.n", "sweeps start on the first axis, [n1, 0, 0]"));
        }
        Ok(n[0])
    };
    match (c.model, c.engine) {
        (Model::Dumbbell, Engine::SdeInertial) => {
            if p.spring != Spring::Hookean || p.flow != Flow::Quiescent {
                return Err(sweep_error(
                    "physics",
                    "the SDE dumbbell sweep compares against the Hookean law at rest",
                ));
            }
            let d = DumbbellSweep::default();
            Ok(DumbbellSweep {
                epsilons: s.epsilons.clone(),
                zeta: p.zeta,
                kbt: p.kbt,
                h: p.h,
                start: c.initial.n.map(along_axis).transpose()?.unwrap_or(d.start),
                samples: nm.samples,
                dt: nm.dt,
                t_final: nm.t_final,
                factorization_time: s.factorization_time,
                seed: c.seed,
            }
            .run()?)
        }
        (Model::Rod, Engine::SdeInertial) => {
            if p.flow != Flow::Quiescent || p.potential != Potential::None {
                return Err(sweep_error(
                    "physics",
                    "the SDE rod sweep compares against free rotational diffusion",
                ));
            }
            Ok(RodSweep {
                epsilons: s.epsilons.clone(),
                zeta_t: p.zeta_t,
                zeta_r: p.zeta_r,
                kbt: p.kbt,
                samples: nm.samples,
                dt: nm.dt,
                t_final: nm.t_final,
                factorization_time: s.factorization_time,
                seed: c.seed,
            }
            .run()?)
        }
        (Model::Dumbbell, Engine::FpInertialReduced) => {
            let d = ReducedSweep::default();
            Ok(ReducedSweep {
                epsilons: s.epsilons.clone(),
                zeta: p.zeta,
                kbt: p.kbt,
                spring: spring_model(c)?,
                kappa: if p.flow == Flow::PlanarExtension { p.rate } else { 0.0 },
                initial_mean: c.initial.n.map(along_axis).transpose()?.unwrap_or(d.initial_mean),
                initial_variance: c.initial.variance.unwrap_or(d.initial_variance),
                n_cells: nm.n_cells,
                v_points: nm.v_points,
                t_final: nm.t_final,
                ..d
            }
            .run()?)
        }
        _ => Err(sweep_error(
            "engine",
            "sweeps run the inertial engines: sde-inertial (dumbbell or rod) or fp-inertial-reduced (dumbbell)",
        )),
    }
}

fn prefix_sweep(e: CliError) -> CliError {
    match e {
        CliError::Config { field, message } if field == "epsilons" => CliError::Config {
            field: "sweep.epsilons".into(),
            message,
        },
        other => other,
    }
}

/// report.json, distances.csv and run.json. Fails with exit code 1 when a
/// report flag fails; the files are written either way.
pub fn sweep(cfg: &LoadedConfig) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let report = sweep_report(&cfg.config).map_err(prefix_sweep)?;
    let dir = &cfg.config.output.dir;
    let rpath = dir.join("report.json");
    write_json(
        &rpath,
        &ReportFile {
            schema_version: SCHEMA_VERSION,
            config_sha256: &cfg.sha256,
            thresholds: "engineering calibrations: monotone decrease, fitted order >= 0.8 for density solvers, factorization ratio < 0.5; Monte Carlo noise floors are listed per point",
            passed: report.passed(),
            report: &report,
        },
    )?;
    let dpath = dir.join("distances.csv");
    write_file(&dpath, &distances_csv(&report))?;
    let mpath = dir.join("run.json");
    let outputs = vec![rpath, dpath, mpath.clone()];
    write_json(&mpath, &metadata("sweep", cfg, started, &outputs))?;
    for f in &report.flags {
        eprintln!("{} {}: {}", if f.passed { "PASS" } else { "FAIL" }, f.name, f.detail);
    }
    if !report.passed() {
        let failing: Vec<&str> = report
            .flags
            .iter()
            .filter(|f| !f.passed)
            .map(|f| f.name.as_str())
            .collect();
        return Err(CliError::Verification(failing.join(", ")));
    }
    Ok(outputs)
}

#[derive(Serialize)]
struct SteadyFile<'a> {
    schema_version: u32,
    config_sha256: &'a str,
    model: Model,
    moments: &'a MomentSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    boltzmann_l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    onsager_self_consistency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    onsager_iterations: Option<usize>,
}

/// steady.json, the density with its sidecar, and run.json.
pub fn steady(cfg: &LoadedConfig) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let c = &cfg.config;
    let s = run::steady(c)?;
    let dir = &c.output.dir;
    let spath = dir.join("steady.json");
    write_json(
        &spath,
        &SteadyFile {
            schema_version: SCHEMA_VERSION,
            config_sha256: &cfg.sha256,
            model: c.model,
            moments: &s.moments,
            boltzmann_l1: s.boltzmann_l1,
            onsager_self_consistency: s.onsager.map(|o| o.0),
            onsager_iterations: s.onsager.map(|o| o.1),
        },
    )?;
    let mut outputs = vec![spath];
    let frame = run::Frame {
        t: f64::INFINITY,
        values: s.density,
    };
    outputs.extend(write_snapshots(&dir.join("steady"), &s.coordinates, &[frame])?);
    let mpath = dir.join("run.json");
    outputs.push(mpath.clone());
    write_json(&mpath, &metadata("steady", cfg, started, &outputs))?;
    Ok(outputs)
}

#[derive(Serialize)]
struct VerifyFile<'a> {
    schema_version: u32,
    passed: bool,
    failing: Vec<&'a str>,
    #[serde(flatten)]
    report: &'a SuiteReport,
}

/// JSON verdicts on stdout (and in `out/verify-<suite>.json` when `out` is
/// given), one human line per check on stderr.
pub fn verify(suite: Suite, quick: bool, out: Option<&Path>) -> Result<SuiteReport, CliError> {
    let report = run_suite(suite, quick)?;
    let file = VerifyFile {
        schema_version: SCHEMA_VERSION,
        passed: report.passed(),
        failing: report.failing(),
        report: &report,
    };
    let json = serde_json::to_string_pretty(&file).expect("plain data serializes");
    println!("{json}");
    if let Some(dir) = out {
        let name = format!("verify-{}.json", serde_json::to_value(suite).expect("unit enum").as_str().unwrap_or("suite"));
        write_file(&dir.join(name), &format!("{json}\n"))?;
    }
    for c in &report.checks {
        eprintln!(
            "{} {}: {:.3e} (threshold {:.1e}) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        );
    }
    if !report.passed() {
        return Err(CliError::Verification(report.failing().join(", ")));
    }
    Ok(report)
}
