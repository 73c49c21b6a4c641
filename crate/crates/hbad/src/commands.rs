//! One job of each subcommand.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hbad_core::continuation::{make_point, sweep, trace};
use hbad_core::fourier::HarmonicSet;
use hbad_core::hb::{HbProblem, NewtonReport};
use hbad_core::model::{Builtin, SystemModel};
use hbad_core::stability::{floquet, FloquetSettings, Stability};
use hbad_core::timeint::{newmark, response_period, rk4, steady_state_extract, SteadyState};

use crate::config::{InitialGuess, Method};
use crate::io;
use crate::output::{
    stability_name, write_branch, BranchRecord, CompareRecord, CompareRow, MultiplierRecord, NewtonRecord,
    ProblemRecord, SolveRecord, TimesimRecord,
};
use crate::{CliError, Command, JobOutcome, RunConfig};

/// Relative size of the random perturbation applied to the linear guess.
const RANDOM_PERTURBATION: f64 = 0.1;

struct Job<'a> {
    config: &'a RunConfig,
    index: usize,
    dir: &'a Path,
    set: HarmonicSet,
    record: ProblemRecord,
}

pub fn run_job(command: Command, config: &RunConfig, index: usize, dir: &Path) -> Result<JobOutcome, CliError> {
    let model = config.build_model(index)?;
    let set = config.harmonics.build()?;
    let grid = config.grid(&set);
    let record = ProblemRecord::new(config, index, &set, grid, model.dofs());
    let job = Job {
        config,
        index,
        dir,
        set,
        record,
    };
    let problem = HbProblem::new(&model, &job.set, grid)?;
    let (converged, summary) = match command {
        Command::Solve => solve(&job, &problem)?,
        Command::Sweep => run_sweep(&job, &problem)?,
        Command::Trace => run_trace(&job, &problem)?,
        Command::Timesim => timesim(&job, &model)?,
        Command::Compare => compare(&job, &problem)?,
    };
    Ok(JobOutcome {
        index,
        dir: dir.to_path_buf(),
        converged,
        summary,
    })
}

/// Initial Newton iterate at `omega` for the configured guess source.
pub fn initial_guess<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    omega: f64,
    kind: InitialGuess,
    seed: u64,
) -> Result<Vec<f64>, CliError> {
    Ok(match kind {
        InitialGuess::Zero => vec![0.0; problem.unknowns()],
        InitialGuess::Linear => problem.linear_guess(omega)?,
        InitialGuess::Random => {
            let mut a = problem.linear_guess(omega)?;
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in &mut a {
                *v += RANDOM_PERTURBATION * scale * rng.gen_range(-1.0..1.0);
            }
            a
        }
    })
}

fn guess_name(kind: InitialGuess) -> &'static str {
    match kind {
        InitialGuess::Zero => "zero",
        InitialGuess::Linear => "linear",
        InitialGuess::Random => "random",
    }
}

impl Job<'_> {
    fn seed(&self) -> u64 {
        self.config.seed.wrapping_add(self.index as u64)
    }

    fn floquet_settings(&self) -> Option<FloquetSettings> {
        self.config.solve_settings().floquet
    }

    fn seed_solve<M: SystemModel>(&self, problem: &HbProblem<'_, M>, omega: f64) -> Result<(Vec<f64>, NewtonReport), CliError> {
        let guess = initial_guess(problem, omega, self.config.initial_guess, self.seed())?;
        Ok(problem.newton_solve(&guess, omega, self.config.newton.tol, self.config.newton.max_iter)?)
    }
}

fn per_dof(flat: &[f64], set: &HarmonicSet) -> Vec<Vec<f64>> {
    flat.chunks(set.coeffs_per_dof()).map(<[f64]>::to_vec).collect()
}

fn solve<M: SystemModel>(job: &Job<'_>, problem: &HbProblem<'_, M>) -> Result<(bool, String), CliError> {
    let omega = job.config.single_omega()?;
    let (a, report) = job.seed_solve(problem, omega)?;
    let mut rec = SolveRecord {
        problem: job.record.clone(),
        omega,
        initial_guess: guess_name(job.config.initial_guess).into(),
        converged: report.converged,
        coefficients: per_dof(&a, &job.set),
        amplitudes: problem.peak_amplitudes(&a)?,
        newton: NewtonRecord::from(&report),
        stability: stability_name(Stability::Unknown).into(),
        multipliers: Vec::new(),
        max_multiplier: None,
        liouville_error: None,
    };
    if let (true, Some(settings)) = (report.converged, job.floquet_settings()) {
        let f = floquet(problem, &a, omega, &settings)?;
        let stab = if f.marginal { Stability::Unknown } else { f.classification };
        rec.stability = stability_name(stab).into();
        rec.multipliers = f
            .multipliers
            .iter()
            .map(|m| MultiplierRecord {
                re: m.re,
                im: m.im,
                magnitude: m.magnitude(),
            })
            .collect();
        rec.max_multiplier = f.max_magnitude.is_finite().then_some(f.max_magnitude);
        rec.liouville_error = Some(f.liouville_error());
    }
    io::write_json(&job.dir.join("solve.json"), &rec)?;
    let summary = format!(
        "omega {omega}: {} after {} iterations, |B| = {:.3e}, stability {}",
        if report.converged { "converged" } else { "did not converge" },
        report.iterations,
        report.final_norm(),
        rec.stability
    );
    Ok((report.converged, summary))
}

fn run_sweep<M: SystemModel>(job: &Job<'_>, problem: &HbProblem<'_, M>) -> Result<(bool, String), CliError> {
    let (start, end) = job.config.window()?;
    let step = job.config.omega.step.abs() * (end - start).signum();
    let guess = initial_guess(problem, start, job.config.initial_guess, job.seed())?;
    let settings = job.config.solve_settings();
    let branch = sweep(problem, start, end, step, &guess, &settings)?;
    let record = BranchRecord::new(job.record.clone(), "sweep", settings.tol, &branch);
    write_branch(job.dir, &record, &branch)?;
    Ok((
        true,
        format!(
            "sweep {start} -> {end}: {} points, {} gaps",
            branch.points.len(),
            branch.gaps.len()
        ),
    ))
}

fn run_trace<M: SystemModel>(job: &Job<'_>, problem: &HbProblem<'_, M>) -> Result<(bool, String), CliError> {
    let (start, end) = job.config.window()?;
    let (a, report) = job.seed_solve(problem, start)?;
    if !report.converged {
        return Err(CliError::Numerical(format!("trace seed at omega = {start}: {}", hbad_core::Error::from(&report))));
    }
    let settings = job.config.trace_settings(start, end);
    let seed = make_point(problem, a, start, report, settings.solve.floquet.as_ref())?;
    let branch = trace(problem, &seed, &settings)?;
    let record = BranchRecord::new(job.record.clone(), "trace", settings.solve.tol, &branch);
    write_branch(job.dir, &record, &branch)?;
    if let Some(t) = &branch.termination {
        log::warn!("trace stopped early: {t}");
    }
    Ok((
        true,
        format!(
            "trace {start} -> {end}: {} points, folds at {:?}{}",
            branch.points.len(),
            branch.folds,
            branch.termination.as_ref().map(|t| format!(", stopped: {t}")).unwrap_or_default()
        ),
    ))
}

/// Integrates from rest over `discard_periods + 1` response periods.
fn integrate<M: SystemModel>(
    config: &RunConfig,
    model: &M,
    omega: f64,
    set: &HarmonicSet,
) -> Result<(hbad_core::timeint::Trajectory, SteadyState, f64), CliError> {
    let spec = &config.integrator;
    let period = response_period(model, omega);
    let dt = period / spec.steps_per_period as f64;
    let periods = (spec.discard_periods + 1).max(2);
    let t_end = periods as f64 * period;
    let zero = vec![0.0; model.dofs()];
    let traj = match spec.method {
        Method::Rk4 => rk4(model, &zero, &zero, omega, t_end, dt)?,
        Method::Newmark => newmark(model, &zero, &zero, omega, t_end, dt, &spec.newmark())?,
    };
    let steady = steady_state_extract(&traj, period, periods - 1, set)?;
    Ok((traj, steady, period))
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Rk4 => "rk4",
        Method::Newmark => "newmark",
    }
}

fn timesim(job: &Job<'_>, model: &Builtin) -> Result<(bool, String), CliError> {
    let omega = job.config.single_omega()?;
    let start = Instant::now();
    let (traj, steady, period) = integrate(job.config, model, omega, &job.set)?;
    let seconds = start.elapsed().as_secs_f64();
    let spec = &job.config.integrator;
    let from = match spec.record_periods {
        Some(p) => traj.len().saturating_sub(p * spec.steps_per_period + 1),
        None => 0,
    };
    crate::output::trajectory_csv(&traj, from).write(&job.dir.join("trajectory.csv"))?;
    let rec = TimesimRecord {
        problem: job.record.clone(),
        omega,
        method: method_name(spec.method).into(),
        dt: traj.dt(),
        periods: (spec.discard_periods + 1).max(2),
        response_period: period,
        steady: steady.steady,
        rms_change: steady.rms_change,
        amplitudes: steady.amplitudes.clone(),
        coefficients: per_dof(steady.coeffs.as_flat(), &job.set),
        seconds,
    };
    io::write_json(&job.dir.join("timesim.json"), &rec)?;
    if !steady.steady {
        log::warn!("response at omega = {omega} not steady: period-to-period RMS change {:.3e}", steady.rms_change);
    }
    Ok((
        steady.steady,
        format!(
            "timesim omega {omega}: {} samples in {seconds:.2} s, RMS change {:.2e}",
            traj.len(),
            steady.rms_change
        ),
    ))
}

/// Newton at `omega` from `warm`, falling back to the linear guess.
fn timed_solve<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    config: &RunConfig,
    omega: f64,
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, NewtonReport, f64, &'static str), CliError> {
    let (tol, max_iter) = (config.newton.tol, config.newton.max_iter);
    let start = Instant::now();
    if let Some(w) = warm {
        let (a, r) = problem.newton_solve(w, omega, tol, max_iter)?;
        if r.converged {
            return Ok((a, r, start.elapsed().as_secs_f64(), "neighbor"));
        }
    }
    let guess = problem.linear_guess(omega)?;
    let (a, r) = problem.newton_solve(&guess, omega, tol, max_iter)?;
    Ok((a, r, start.elapsed().as_secs_f64(), "linear"))
}

/// Untimed solve at the neighbouring frequency `omega - step` that serves
/// as the warm start for the timed solve.
fn neighbor_solution<M: SystemModel>(
    problem: &HbProblem<'_, M>,
    config: &RunConfig,
    omega: f64,
    previous: Option<&[f64]>,
) -> Result<Option<Vec<f64>>, CliError> {
    let step = config.omega.step;
    let neighbor = if omega - step > 0.0 { omega - step } else { omega + step.abs() };
    let (tol, max_iter) = (config.newton.tol, config.newton.max_iter);
    let mut guesses = Vec::new();
    if let Some(p) = previous {
        guesses.push(p.to_vec());
    }
    guesses.push(problem.linear_guess(neighbor)?);
    for g in guesses {
        let (a, r) = problem.newton_solve(&g, neighbor, tol, max_iter)?;
        if r.converged {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

fn compare<M: SystemModel>(job: &Job<'_>, problem: &HbProblem<'_, M>) -> Result<(bool, String), CliError> {
    let list = &job.config.omega.list;
    if list.is_empty() {
        return Err(CliError::Config("`omega.list` must not be empty for compare".into()));
    }
    let model = problem.model();
    let mut rows = Vec::with_capacity(list.len());
    let mut previous: Option<Vec<f64>> = None;
    for &omega in list {
        let mut row = CompareRow {
            omega,
            hb_amplitudes: None,
            hb_seconds: None,
            hb_iterations: None,
            hb_warm_start: None,
            ti_amplitudes: None,
            ti_seconds: None,
            ti_steady: None,
            relative_deviation: None,
            speedup: None,
            failed: false,
            errors: Vec::new(),
        };
        let hb = neighbor_solution(problem, job.config, omega, previous.as_deref())
            .and_then(|warm| timed_solve(problem, job.config, omega, warm.as_deref()));
        match hb {
            Ok((a, report, secs, warm)) if report.converged => {
                row.hb_amplitudes = Some(problem.peak_amplitudes(&a)?);
                row.hb_seconds = Some(secs);
                row.hb_iterations = Some(report.iterations);
                row.hb_warm_start = Some(warm.into());
                previous = Some(a);
            }
            Ok((_, report, _, _)) => row.errors.push(format!("HB: {}", hbad_core::Error::from(&report))),
            Err(e) => row.errors.push(format!("HB: {e}")),
        }
        let start = Instant::now();
        match integrate(job.config, model, omega, &job.set) {
            Ok((_, steady, _)) => {
                row.ti_seconds = Some(start.elapsed().as_secs_f64());
                row.ti_steady = Some(steady.steady);
                if !steady.steady {
                    row.errors.push(format!("time integration not steady (RMS change {:.3e})", steady.rms_change));
                }
                row.ti_amplitudes = Some(steady.amplitudes);
            }
            Err(e) => row.errors.push(format!("time integration: {e}")),
        }
        if let (Some(h), Some(t)) = (&row.hb_amplitudes, &row.ti_amplitudes) {
            let peak = h.iter().copied().fold(0.0, f64::max);
            let dev = h.iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            row.relative_deviation = Some(if peak > 0.0 { dev / peak } else { dev });
        }
        if let (Some(h), Some(t)) = (row.hb_seconds, row.ti_seconds) {
            row.speedup = Some(t / h.max(f64::MIN_POSITIVE));
        }
        row.failed = !row.errors.is_empty();
        log::info!("compare omega {omega}: {:?}", row.errors);
        rows.push(row);
    }
    let spec = &job.config.integrator;
    let rec = CompareRecord {
        problem: job.record.clone(),
        method: method_name(spec.method).into(),
        steps_per_period: spec.steps_per_period,
        discard_periods: spec.discard_periods,
        rows,
    };
    io::write_json(&job.dir.join("compare.json"), &rec)?;
    let table = rec.table();
    io::write_atomic(&job.dir.join("compare.txt"), table.as_bytes())?;
    let failed = rec.rows.iter().filter(|r| r.failed).count();
    Ok((failed == 0, format!("compare: {} points, {failed} failed\n{table}", rec.rows.len())))
}
