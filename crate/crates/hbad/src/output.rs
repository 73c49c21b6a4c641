//! Serialized artifacts: `solve.json`, `branch.csv`/`branch.json`,
//! `trajectory.csv`/`timesim.json`, `compare.json` and the job index.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use hbad_core::continuation::{Branch, BranchPoint};
use hbad_core::fourier::{HarmonicSet, TimeGrid};
use hbad_core::hb::{HbProblem, NewtonReport};
use hbad_core::linalg::norm2;
use hbad_core::model::Builtin;
use hbad_core::stability::Stability;
use hbad_core::timeint::Trajectory;

use crate::io::{self, num, Csv};
use crate::{CliError, Command, JobOutcome, RunConfig};

/// Identifies the discretized problem an artifact belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub harmonics: Vec<u32>,
    pub samples: usize,
    pub dofs: usize,
}

impl ProblemRecord {
    pub fn new(config: &RunConfig, job: usize, set: &HarmonicSet, grid: TimeGrid, dofs: usize) -> Self {
        Self {
            model: config.model.name.clone(),
            params: config.job_params(job),
            harmonics: set.indices().to_vec(),
            samples: grid.samples(),
            dofs,
        }
    }

    pub fn build_model(&self) -> Result<Builtin, CliError> {
        let pairs: Vec<(&str, f64)> = self.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        Ok(Builtin::new(&self.model, &pairs)?)
    }

    pub fn harmonic_set(&self) -> Result<HarmonicSet, CliError> {
        Ok(HarmonicSet::new(self.harmonics.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonRecord {
    pub converged: bool,
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
    pub condition: f64,
    pub failure: Option<String>,
}

impl From<&NewtonReport> for NewtonRecord {
    fn from(r: &NewtonReport) -> Self {
        Self {
            converged: r.converged,
            iterations: r.iterations,
            residual_norms: r.residual_norms.clone(),
            condition: r.condition,
            failure: r.failure.clone(),
        }
    }
}

pub fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
        Stability::Unknown => "unknown",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRecord {
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub problem: ProblemRecord,
    pub omega: f64,
    pub initial_guess: String,
    pub converged: bool,
    /// Coefficients per DOF, ordered as the harmonic set's slots.
    pub coefficients: Vec<Vec<f64>>,
    pub amplitudes: Vec<f64>,
    pub newton: NewtonRecord,
    pub stability: String,
    pub multipliers: Vec<MultiplierRecord>,
    pub max_multiplier: Option<f64>,
    pub liouville_error: Option<f64>,
}

/// One branch point in `branch.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub omega: f64,
    pub amplitudes: Vec<f64>,
    pub stability: String,
    pub fold: bool,
    pub max_multiplier: Option<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
    /// Flat coefficient vector, DOF-major.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub omega: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub problem: ProblemRecord,
    pub kind: String,
    pub tol: f64,
    pub folds: Vec<usize>,
    pub gaps: Vec<GapRecord>,
    pub termination: Option<String>,
    pub points: Vec<PointRecord>,
}

impl BranchRecord {
    pub fn new(problem: ProblemRecord, kind: &str, tol: f64, branch: &Branch) -> Self {
        let points = branch
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| point_record(k, p, branch.is_fold(k)))
            .collect();
        Self {
            problem,
            kind: kind.into(),
            tol,
            folds: branch.folds.clone(),
            gaps: branch
                .gaps
                .iter()
                .map(|g| GapRecord {
                    omega: g.omega,
                    reason: g.reason.clone(),
                })
                .collect(),
            termination: branch.termination.clone(),
            points,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid branch file {}: {e}", path.display())))
    }
}

fn point_record(index: usize, p: &BranchPoint, fold: bool) -> PointRecord {
    PointRecord {
        index,
        omega: p.omega,
        amplitudes: p.amplitudes.clone(),
        stability: stability_name(p.stability).into(),
        fold,
        max_multiplier: p.max_multiplier,
        newton_iters: p.report.iterations,
        residual_norm: p.report.final_norm(),
        coefficients: p.coeffs.as_flat().to_vec(),
    }
}

/// `branch.csv`: one row per point.
pub fn branch_csv(branch: &Branch, dofs: usize) -> Csv {
    let mut header = vec!["index".to_string(), "omega_rad_s".to_string()];
    header.extend((0..dofs).map(|i| format!("amplitude_dof_{i}")));
    header.extend(["stability", "fold", "newton_iters", "residual_norm"].map(String::from));
    let mut csv = Csv::new(&header);
    for (k, p) in branch.points.iter().enumerate() {
        let mut row = vec![k.to_string(), num(p.omega)];
        row.extend(p.amplitudes.iter().map(|a| num(*a)));
        row.push(p.stability.flag().to_string());
        row.push(u8::from(branch.is_fold(k)).to_string());
        row.push(p.report.iterations.to_string());
        row.push(num(p.report.final_norm()));
        csv.row(row);
    }
    csv
}

/// `trajectory.csv`: time, then displacement and velocity per DOF.
pub fn trajectory_csv(traj: &Trajectory, from: usize) -> Csv {
    let n = traj.dofs();
    let mut header = vec!["t_s".to_string()];
    for i in 0..n {
        header.push(format!("x_dof_{i}"));
        header.push(format!("v_dof_{i}"));
    }
    let mut csv = Csv::new(&header);
    for k in from..traj.len() {
        let (x, v) = (traj.displacement(k), traj.velocity(k));
        let mut row = Vec::with_capacity(1 + 2 * n);
        row.push(num(traj.time(k)));
        for i in 0..n {
            row.push(num(x[i]));
            row.push(num(v[i]));
        }
        csv.row(row);
    }
    csv
}

pub fn write_branch(dir: &Path, record: &BranchRecord, branch: &Branch) -> Result<(), CliError> {
    branch_csv(branch, record.problem.dofs).write(&dir.join("branch.csv"))?;
    io::write_json(&dir.join("branch.json"), record)
}

/// Residual norm of every point of a saved branch, recomputed from scratch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub tol: f64,
    pub norms: Vec<f64>,
    pub max_norm: f64,
    pub passed: bool,
}

/// Rebuilds the problem recorded in `record` and re-evaluates the residual
/// at every stored point.
pub fn verify_branch(record: &BranchRecord) -> Result<Verification, CliError> {
    let model = record.problem.build_model()?;
    let set = record.problem.harmonic_set()?;
    let problem = HbProblem::new(&model, &set, TimeGrid::new(record.problem.samples))?;
    let norms = record
        .points
        .iter()
        .map(|p| Ok(norm2(&problem.assemble_residual(&p.coefficients, p.omega)?)))
        .collect::<Result<Vec<f64>, CliError>>()?;
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    Ok(Verification {
        tol: record.tol,
        passed: norms.iter().all(|n| *n < record.tol),
        norms,
        max_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimesimRecord {
    pub problem: ProblemRecord,
    pub omega: f64,
    pub method: String,
    pub dt: f64,
    pub periods: usize,
    pub response_period: f64,
    pub steady: bool,
    pub rms_change: f64,
    pub amplitudes: Vec<f64>,
    /// Harmonic content of the final period, per DOF.
    pub coefficients: Vec<Vec<f64>>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub omega: f64,
    pub hb_amplitudes: Option<Vec<f64>>,
    pub hb_seconds: Option<f64>,
    pub hb_iterations: Option<usize>,
    pub hb_warm_start: Option<String>,
    pub ti_amplitudes: Option<Vec<f64>>,
    pub ti_seconds: Option<f64>,
    pub ti_steady: Option<bool>,
    /// `max_i |A_hb - A_ti| / max_i A_hb`.
    pub relative_deviation: Option<f64>,
    /// Time-integration wall clock over HB wall clock.
    pub speedup: Option<f64>,
    pub failed: bool,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub problem: ProblemRecord,
    pub method: String,
    pub steps_per_period: usize,
    pub discard_periods: usize,
    pub rows: Vec<CompareRow>,
}

impl CompareRecord {
    /// Fixed-width text table of the comparison.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>, f: &dyn Fn(f64) -> String| v.map(f).unwrap_or_else(|| "-".into());
        let peak = |a: &Option<Vec<f64>>| a.as_ref().map(|a| a.iter().copied().fold(0.0, f64::max));
        let mut s = format!(
            "{:>12} {:>14} {:>14} {:>10} {:>10} {:>10} {:>9}  {}\n",
            "omega", "hb_peak", "ti_peak", "rel_dev", "hb_s", "ti_s", "speedup", "status"
        );
        for r in &self.rows {
            s += &format!(
                "{:>12} {:>14} {:>14} {:>10} {:>10} {:>10} {:>9}  {}\n",
                format!("{:.4}", r.omega),
                opt(peak(&r.hb_amplitudes), &|v| format!("{v:.6e}")),
                opt(peak(&r.ti_amplitudes), &|v| format!("{v:.6e}")),
                opt(r.relative_deviation, &|v| format!("{v:.2e}")),
                opt(r.hb_seconds, &|v| format!("{v:.4}")),
                opt(r.ti_seconds, &|v| format!("{v:.3}")),
                opt(r.speedup, &|v| format!("{v:.1}")),
                if r.failed { "FAILED" } else { "ok" }
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct JobIndexEntry {
    index: usize,
    name: Option<String>,
    dir: String,
    params: BTreeMap<String, f64>,
    converged: bool,
    summary: String,
}

/// `jobs.json` listing every variant job and its outcome.
pub fn write_job_index(out: &Path, command: Command, config: &RunConfig, outcomes: &[JobOutcome]) -> Result<(), CliError> {
    let entries: Vec<JobIndexEntry> = outcomes
        .iter()
        .map(|o| JobIndexEntry {
            index: o.index,
            name: config.variants.get(o.index).and_then(|v| v.name.clone()),
            dir: o
                .dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            params: config.job_params(o.index),
            converged: o.converged,
            summary: o.summary.clone(),
        })
        .collect();
    let doc = serde_json::json!({ "command": command.name(), "jobs": entries });
    io::write_json(&out.join("jobs.json"), &doc)
}
