//! Experiment configuration: a flat TOML file with one section per concern.
//!
//! ```toml
//! model = "dumbbell"
//! engine = "sde-inertial"
//! seed = 7
//!
//! [physics]
//! epsilon = 0.2
//! kBT = 1.0
//! zeta = 1.0
//! spring = "fene"
//! H = 1.0
//! n0 = 3.0
//!
//! [numerics]
//! dt = 0.005
//! samples = 10000
//! t_final = 1.0
//! sample_interval = 0.1
//! ```
//!
//! Unknown keys are rejected with their location. Every key has a default
//! except `model` and `engine`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Dumbbell,
    Rod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    SdeInertial,
    SdeOverdamped,
    FpLimit,
    FpInertialReduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spring {
    Hookean,
    Fene,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flow {
    Quiescent,
    SimpleShear,
    PlanarExtension,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    None,
    /// U(n) = −strength · P₂(n·director).
    Aligning,
    /// Self-consistent excluded volume; inertia-free rods only.
    Onsager,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Velocities {
    Thermal,
    Rest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub epsilon: f64,
    #[serde(rename = "kBT")]
    pub kbt: f64,
    /// Dumbbell bead friction.
    pub zeta: f64,
    pub zeta_t: f64,
    pub zeta_r: f64,
    pub spring: Spring,
    #[serde(rename = "H")]
    pub h: f64,
    pub n0: f64,
    pub flow: Flow,
    /// Shear or extension rate of the imposed flow, per unit time.
    pub rate: f64,
    /// Configuration dimension of dumbbells: 2 or 3 for SDEs, 1 to 3 for
    /// the inertia-free solver.
    pub dim: usize,
    pub potential: Potential,
    pub potential_strength: f64,
    pub director: [f64; 3],
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            kbt: 1.0,
            zeta: 1.0,
            zeta_t: 1.0,
            zeta_r: 1.0,
            spring: Spring::Hookean,
            h: 1.0,
            n0: 3.0,
            flow: Flow::Quiescent,
            rate: 0.0,
            dim: 3,
            potential: Potential::None,
            potential_strength: 0.0,
            director: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub dt: f64,
    pub t_final: f64,
    /// Ensemble size of the SDE engines.
    pub samples: usize,
    /// Spacing of the moment rows; 0 writes only t = 0 and t_final.
    pub sample_interval: f64,
    /// Refinement level of the inertia-free dumbbell grid.
    pub grid_level: u32,
    /// Harmonic degree of the inertia-free rod solver.
    pub l_max: usize,
    /// Configuration cells of the reduced inertial solver.
    pub n_cells: usize,
    /// Velocity points per axis of the reduced inertial solver.
    pub v_points: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_final: 1.0,
            samples: 10_000,
            sample_interval: 0.0,
            grid_level: 2,
            l_max: 16,
            n_cells: 200,
            v_points: 40,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Initial {
    /// Dumbbell start; absent means the configuration Boltzmann law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<[f64; 3]>,
    /// Rod start; absent means uniform orientations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub director: Option<[f64; 3]>,
    pub velocities: Velocities,
    /// Variance of the Gaussian initial density of the dumbbell solvers
    /// when `n` is given; defaults to kBT/H.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    /// Concentration c of the rod solver's initial exp(c (n·d − 1)).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concentration: Option<f64>,
}

impl Default for Velocities {
    fn default() -> Self {
        Self::Thermal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    /// Density snapshots at every sample time (deterministic solvers only).
    pub snapshots: bool,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshots: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    #[serde(default = "default_factorization_time")]
    pub factorization_time: f64,
}

fn default_factorization_time() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub engine: Engine,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn config_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be non-negative, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses and validates; TOML errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.physics;
        let n = &self.numerics;
        positive("physics.epsilon", p.epsilon)?;
        non_negative("physics.kBT", p.kbt)?;
        for (f, v) in [
            ("physics.zeta", p.zeta),
            ("physics.zeta_t", p.zeta_t),
            ("physics.zeta_r", p.zeta_r),
            ("physics.H", p.h),
            ("physics.n0", p.n0),
        ] {
            positive(f, v)?;
        }
        if !p.rate.is_finite() {
            return Err(config_error("physics.rate", "must be finite"));
        }
        if !p.potential_strength.is_finite() {
            return Err(config_error("physics.potential_strength", "must be finite"));
        }
        unit("physics.director", p.director)?;
        positive("numerics.dt", n.dt)?;
        non_negative("numerics.t_final", n.t_final)?;
        non_negative("numerics.sample_interval", n.sample_interval)?;
        if i64::try_from(self.seed).is_err() {
            return Err(config_error("seed", "must fit in a signed 64-bit integer"));
        }

        let stochastic = matches!(self.engine, Engine::SdeInertial | Engine::SdeOverdamped);
        if stochastic && n.samples < polykin::harness::moments::MIN_SAMPLES {
            return Err(config_error(
                "numerics.samples",
                format!(
                    "{} trajectories are too few for error bars; need at least {}",
                    n.samples,
                    polykin::harness::moments::MIN_SAMPLES
                ),
            ));
        }
        if p.kbt == 0.0 && (self.model == Model::Rod || !stochastic) {
            return Err(config_error(
                "physics.kBT",
                "rods and the density solvers need a positive temperature",
            ));
        }
        match self.model {
            Model::Dumbbell => {
                let dims: &[usize] = match self.engine {
                    Engine::FpLimit => &[1, 2, 3],
                    Engine::FpInertialReduced => &[1],
                    _ => &[2, 3],
                };
                if !dims.contains(&p.dim) {
                    return Err(config_error(
                        "physics.dim",
                        format!("must be one of {dims:?} for this engine, got {}", p.dim),
                    ));
                }
                if p.potential != Potential::None {
                    return Err(config_error("physics.potential", "only rods take a potential"));
                }
                if self.initial.director.is_some() {
                    return Err(config_error("initial.director", "dumbbells start from initial.n"));
                }
                if let Some(n0) = self.initial.n {
                    if n0.iter().any(|v| !v.is_finite()) {
                        return Err(config_error("initial.n", "must be finite"));
                    }
                    let r = n0.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if p.spring == Spring::Fene && r >= p.n0 {
                        return Err(config_error(
                            "initial.n",
                            format!(
                                "|n| = {r} lies outside the FENE ball of radius physics.n0 = {}",
                                p.n0
                            ),
                        ));
                    }
                    if n0[p.dim.min(3)..].iter().any(|v| *v != 0.0) {
                        return Err(config_error(
                            "initial.n",
                            format!("components beyond physics.dim = {} must be zero", p.dim),
                        ));
                    }
                }
                if self.initial.n.is_none() && p.kbt == 0.0 && self.engine != Engine::SdeInertial
                {
                    return Err(config_error(
                        "initial.n",
                        "kBT = 0 has no Boltzmann density; give a start",
                    ));
                }
                if let Some(v) = self.initial.variance {
                    positive("initial.variance", v)?;
                }
                if self.engine == Engine::FpLimit && p.dim == 3 {
                    if p.flow != Flow::Quiescent {
                        return Err(config_error(
                            "physics.flow",
                            "the three-dimensional solver keeps radial symmetry; flow must be quiescent",
                        ));
                    }
                    if self.initial.n.is_some_and(|n| n.iter().any(|v| *v != 0.0)) {
                        return Err(config_error(
                            "initial.n",
                            "the three-dimensional solver keeps radial symmetry; start at the origin",
                        ));
                    }
                }
                if self.engine == Engine::FpInertialReduced && p.flow == Flow::SimpleShear {
                    return Err(config_error(
                        "physics.flow",
                        "the reduced solver keeps one axis; use quiescent or planar-extension",
                    ));
                }
            }
            Model::Rod => {
                if self.engine == Engine::FpInertialReduced {
                    return Err(config_error(
                        "engine",
                        "the reduced inertial solver is dumbbell-only",
                    ));
                }
                if self.initial.n.is_some() {
                    return Err(config_error("initial.n", "rods start from initial.director"));
                }
                if let Some(d) = self.initial.director {
                    unit("initial.director", d)?;
                }
                if let Some(c) = self.initial.concentration {
                    positive("initial.concentration", c)?;
                }
                if p.potential == Potential::Onsager && self.engine != Engine::FpLimit {
                    return Err(config_error(
                        "physics.potential",
                        "the Onsager mean field needs the inertia-free solver (engine = \"fp-limit\")",
                    ));
                }
                if p.potential == Potential::Onsager && p.potential_strength < 0.0 {
                    return Err(config_error("physics.potential_strength", "must be non-negative"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            non_negative("sweep.factorization_time", s.factorization_time)?;
            if s.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(config_error("sweep.epsilons", "every epsilon must be positive"));
            }
        }
        Ok(())
    }

    /// Row times: 0, every `sample_interval` below t_final, and t_final.
    pub fn sample_times(&self) -> Vec<f64> {
        let (t, h) = (self.numerics.t_final, self.numerics.sample_interval);
        let mut out = Vec::new();
        if h > 0.0 {
            let mut k = 1;
            while (k as f64) * h < t * (1.0 - 1e-12) {
                out.push(k as f64 * h);
                k += 1;
            }
        }
        if t > 0.0 {
            out.push(t);
        }
        out
    }
}

fn unit(field: &str, d: [f64; 3]) -> Result<(), CliError> {
    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, "must be a nonzero finite vector"))
    }
}
