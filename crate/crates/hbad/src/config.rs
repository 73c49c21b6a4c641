//! Run configuration: a single JSON document (schema in `docs/config.schema.json`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use hbad_core::continuation::{SolveSettings, TraceSettings};
use hbad_core::fourier::{HarmonicSet, TimeGrid};
use hbad_core::model::Builtin;
use hbad_core::stability::FloquetSettings;
use hbad_core::timeint::NewmarkSettings;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub harmonics: HarmonicSpec,
    /// Time samples per period; default is the smallest power of two
    /// `>= 4 k_max`.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub omega: OmegaSpec,
    #[serde(default)]
    pub newton: NewtonSpec,
    #[serde(default)]
    pub continuation: ContinuationSpec,
    #[serde(default)]
    pub floquet: FloquetSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub initial_guess: InitialGuess,
    /// Output directory; `--out` overrides.
    #[serde(default)]
    pub output: Option<String>,
    /// Parameter variants run as independent jobs.
    #[serde(default)]
    pub variants: Vec<Variant>,
    /// Worker threads for variants; `--jobs` overrides.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Seed for random initial guesses; `--seed` overrides.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HarmonicSpec {
    /// Harmonics `0..=order`.
    Order(u32),
    Indices(Vec<u32>),
    Dual { p: u32, q: u32, order: u32 },
}

impl Default for HarmonicSpec {
    fn default() -> Self {
        Self::Order(5)
    }
}

impl HarmonicSpec {
    pub fn build(&self) -> Result<HarmonicSet, CliError> {
        Ok(match self {
            Self::Order(s) => HarmonicSet::contiguous(*s),
            Self::Indices(v) => HarmonicSet::new(v.clone())?,
            Self::Dual { p, q, order } => HarmonicSet::dual_frequency(*p, *q, *order)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmegaSpec {
    /// Single frequency for `solve` and `timesim`.
    pub value: Option<f64>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub step: f64,
    /// Frequencies for `compare`.
    pub list: Vec<f64>,
}

impl Default for OmegaSpec {
    fn default() -> Self {
        Self {
            value: None,
            start: None,
            end: None,
            step: 1.0,
            list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSpec {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSpec {
    fn default() -> Self {
        Self {
            tol: hbad_core::hb::DEFAULT_TOL,
            max_iter: hbad_core::hb::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationSpec {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_points: usize,
    pub growth: f64,
    pub fast_iterations: usize,
    pub corrector_max_iter: usize,
    pub amplitude_scale: Option<f64>,
    pub omega_scale: Option<f64>,
}

impl Default for ContinuationSpec {
    fn default() -> Self {
        let t = TraceSettings::default();
        Self {
            ds: t.ds,
            ds_min: t.ds_min,
            ds_max: t.ds_max,
            max_points: t.max_points,
            growth: t.growth,
            fast_iterations: t.fast_iterations,
            corrector_max_iter: t.corrector_max_iter,
            amplitude_scale: None,
            omega_scale: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetSpec {
    pub enabled: bool,
    pub substeps: usize,
    pub tol: f64,
}

impl Default for FloquetSpec {
    fn default() -> Self {
        let f = FloquetSettings::default();
        Self {
            enabled: true,
            substeps: f.substeps,
            tol: f.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Newmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub method: Method,
    pub steps_per_period: usize,
    pub discard_periods: usize,
    pub beta: f64,
    pub gamma: f64,
    pub dt_min: f64,
    /// Trailing periods written to `trajectory.csv`; all when absent.
    pub record_periods: Option<usize>,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        let n = NewmarkSettings::default();
        Self {
            method: Method::Newmark,
            steps_per_period: hbad_core::timeint::DEFAULT_STEPS_PER_PERIOD,
            discard_periods: hbad_core::timeint::DEFAULT_DISCARD_PERIODS,
            beta: n.beta,
            gamma: n.gamma,
            dt_min: n.dt_min,
            record_periods: None,
        }
    }
}

impl IntegratorSpec {
    pub fn newmark(&self) -> NewmarkSettings {
        NewmarkSettings {
            beta: self.beta,
            gamma: self.gamma,
            dt_min: self.dt_min,
            ..NewmarkSettings::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    /// One Newton step from zero.
    #[default]
    Linear,
    /// Linear guess with a seeded relative perturbation.
    Random,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Model parameters of job `index` (base parameters with the variant's
    /// overrides applied).
    pub fn job_params(&self, index: usize) -> BTreeMap<String, f64> {
        let mut params = self.model.params.clone();
        if let Some(v) = self.variants.get(index) {
            params.extend(v.params.iter().map(|(k, v)| (k.clone(), *v)));
        }
        params
    }

    pub fn job_count(&self) -> usize {
        self.variants.len().max(1)
    }

    pub fn build_model(&self, index: usize) -> Result<Builtin, CliError> {
        let params = self.job_params(index);
        let pairs: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        Ok(Builtin::new(&self.model.name, &pairs)?)
    }

    pub fn grid(&self, set: &HarmonicSet) -> TimeGrid {
        self.samples.map(TimeGrid::new).unwrap_or_else(|| TimeGrid::default_for(set))
    }

    pub fn solve_settings(&self) -> SolveSettings {
        SolveSettings {
            tol: self.newton.tol,
            max_iter: self.newton.max_iter,
            floquet: self.floquet.enabled.then_some(FloquetSettings {
                substeps: self.floquet.substeps,
                tol: self.floquet.tol,
            }),
        }
    }

    pub fn trace_settings(&self, start: f64, end: f64) -> TraceSettings {
        let c = &self.continuation;
        TraceSettings {
            solve: self.solve_settings(),
            ds: c.ds,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_points: c.max_points,
            omega_min: start.min(end),
            omega_max: start.max(end),
            corrector_max_iter: c.corrector_max_iter,
            growth: c.growth,
            fast_iterations: c.fast_iterations,
            amplitude_scale: c.amplitude_scale,
            omega_scale: c.omega_scale,
            direction: if end >= start { 1.0 } else { -1.0 },
        }
    }

    pub fn single_omega(&self) -> Result<f64, CliError> {
        let w = self
            .omega
            .value
            .or(self.omega.start)
            .ok_or_else(|| CliError::Config("`omega.value` is required".into()))?;
        positive("omega.value", w)?;
        Ok(w)
    }

    pub fn window(&self) -> Result<(f64, f64), CliError> {
        match (self.omega.start, self.omega.end) {
            (Some(a), Some(b)) => {
                positive("omega.start", a)?;
                positive("omega.end", b)?;
                if a == b {
                    return Err(CliError::Config("`omega.start` and `omega.end` must differ".into()));
                }
                Ok((a, b))
            }
            _ => Err(CliError::Config("`omega.start` and `omega.end` are required".into())),
        }
    }

    /// Checks everything that can be checked without solving: every job's
    /// model, the harmonic set, the grid and the numeric settings.
    pub fn validate(&self) -> Result<(), CliError> {
        for i in 0..self.job_count() {
            self.build_model(i)?;
        }
        let set = self.harmonics.build()?;
        hbad_core::fourier::BasisTables::build(&set, self.grid(&set))?;
        positive("newton.tol", self.newton.tol)?;
        if self.newton.max_iter == 0 {
            return Err(CliError::Config("`newton.max_iter` must be positive".into()));
        }
        if !(self.omega.step.is_finite() && self.omega.step != 0.0) {
            return Err(CliError::Config("`omega.step` must be nonzero".into()));
        }
        let c = &self.continuation;
        if !(c.ds_min > 0.0 && c.ds_min <= c.ds && c.ds <= c.ds_max && c.growth >= 1.0) {
            return Err(CliError::Config(
                "continuation steps must satisfy 0 < ds_min <= ds <= ds_max and growth >= 1".into(),
            ));
        }
        for (name, v) in [("continuation.amplitude_scale", c.amplitude_scale), ("continuation.omega_scale", c.omega_scale)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if self.floquet.enabled && self.floquet.substeps == 0 {
            return Err(CliError::Config("`floquet.substeps` must be positive".into()));
        }
        if self.integrator.steps_per_period < 4 {
            return Err(CliError::Config("`integrator.steps_per_period` must be at least 4".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("`jobs` must be positive".into()));
        }
        for w in &self.omega.list {
            positive("omega.list", *w)?;
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be positive, got {v}")))
    }
}
