//! Acceptance criteria 1-8. Runs sequentially (no test harness) so that the
//! wall-clock budgets are measured without competing test threads. Prints
//! one PASS/FAIL line per criterion and exits nonzero if any fails.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hbad::output::{verify_branch, BranchRecord, CompareRecord};
use hbad::{Command, RunConfig};
use hbad_core::ad::Scalar;
use hbad_core::continuation::{make_point, sweep, trace, Branch, SolveSettings, TraceSettings};
use hbad_core::fourier::{evaluate_at, Component, HarmonicSet};
use hbad_core::hb::{HbProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};
use hbad_core::linalg::norm2;
use hbad_core::model::{
    sommerfeld_integral, Builtin, DualRotor, DualRotorParams, Duffing, GaussLegendre, LinearModel, SfdRotor,
    SfdRotorParams, SystemModel,
};
use hbad_core::stability::{floquet, FloquetSettings, Stability};
use hbad_core::timeint::{newmark, response_period, rk4, steady_state_extract, NewmarkSettings};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_config(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(name)).expect("bundled config parses")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn duffing_problem(m: &Duffing) -> HbProblem<'_, Duffing> {
    HbProblem::with_default_grid(m, &HarmonicSet::contiguous(7)).unwrap()
}

/// Pseudo-arclength branch of the default Duffing oscillator, seeded far below
/// resonance.
fn duffing_branch(problem: &HbProblem<'_, Duffing>) -> Branch {
    let w0 = 0.5;
    let guess = problem.linear_guess(w0).unwrap();
    let (a, report) = problem.newton_solve(&guess, w0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let settings = TraceSettings {
        omega_min: 0.1,
        omega_max: 3.0,
        ..TraceSettings::default()
    };
    let seed = make_point(problem, a, w0, report, settings.solve.floquet.as_ref()).unwrap();
    trace(problem, &seed, &settings).unwrap()
}

// ---------------------------------------------------------------- criterion 1

/// Double-double scalar for the finite-difference oracle: exact-rounding
/// arithmetic and square root, so differences of nearby residuals keep about
/// 30 significant digits. Transcendentals are libm values with a first-order
/// correction in the low word; their arguments only depend on time in the
/// contact model.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    fn quick(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    /// Veltkamp splitting into two 26-bit halves.
    fn split(a: f64) -> (f64, f64) {
        let t = 134217729.0 * a;
        let hi = t - (t - a);
        (hi, a - hi)
    }

    /// Dekker's exact product; inlines where `mul_add` would be a libm call.
    fn prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        let ((ah, al), (bh, bl)) = (Dd::split(a), Dd::split(b));
        Dd { hi: p, lo: ((ah * bh - p) + ah * bl + al * bh) + al * bl }
    }

    fn lift(self, f: f64, df: f64) -> Dd {
        Dd::quick(f, df * self.lo)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let s = Dd::sum(self.hi, o.hi);
        let t = Dd::sum(self.lo, o.lo);
        let s = Dd::quick(s.hi, s.lo + t.hi);
        Dd::quick(s.hi, s.lo + t.lo)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = Dd::prod(self.hi, o.hi);
        Dd::quick(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        Dd::quick(q1, q2) + Dd::from(r.hi / o.hi)
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, o: f64) -> Dd {
        self + Dd::from(o)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, o: f64) -> Dd {
        self - Dd::from(o)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, o: f64) -> Dd {
        let p = Dd::prod(self.hi, o);
        Dd::quick(p.hi, p.lo + self.lo * o)
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, o: f64) -> Dd {
        self / Dd::from(o)
    }
}

impl Scalar for Dd {
    fn cst(v: f64) -> Self {
        Dd::from(v)
    }
    fn value(&self) -> f64 {
        self.hi + self.lo
    }
    fn sin(self) -> Self {
        self.lift(self.hi.sin(), self.hi.cos())
    }
    fn cos(self) -> Self {
        self.lift(self.hi.cos(), -self.hi.sin())
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = x.hi * x.hi + self.hi * self.hi;
        Dd::quick(self.hi.atan2(x.hi), (x.hi * self.lo - self.hi * x.lo) / r2)
    }
    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::from(0.0);
        }
        let s = self.hi.sqrt();
        let r = self - Dd::prod(s, s);
        Dd::quick(s, r.hi / (2.0 * s))
    }
    fn powf(self, e: f64) -> Self {
        if e == 1.5 {
            self * self.sqrt()
        } else {
            let p = self.hi.powf(e);
            self.lift(p, e * p / self.hi)
        }
    }
    fn exp(self) -> Self {
        let v = self.hi.exp();
        self.lift(v, v)
    }
    fn ln(self) -> Self {
        self.lift(self.hi.ln(), 1.0 / self.hi)
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
    fn pos_part(self) -> Self {
        if self.hi > 0.0 {
            self
        } else {
            Dd::from(0.0)
        }
    }
    /// Compensated dot product (Dot2): as accurate as evaluation in twice
    /// the working precision, at about half the cost of full `Dd` steps.
    fn dot(weights: &[f64], xs: &[Self]) -> Self {
        let (mut s, mut c) = (0.0, 0.0);
        for (w, x) in weights.iter().zip(xs) {
            if *w != 0.0 {
                let p = Dd::prod(*w, x.hi);
                let t = Dd::sum(s, p.hi);
                s = t.hi;
                c += t.lo + p.lo + *w * x.lo;
            }
        }
        Dd::quick(s, c)
    }
}

/// How the oracle differentiates a model's residual.
enum Stencil {
    /// Smooth residual: central differences at `h` and `h/2`, Richardson
    /// extrapolated.
    Richardson(f64),
    /// Residual only C1 (contact onset): a single central difference with a
    /// step small enough that no sample straddles a kink.
    Central(f64),
}

struct FdCase {
    model: Builtin,
    set: HarmonicSet,
    omega: (f64, f64),
    /// Coefficients the random points are drawn around; empty for the origin.
    center: Vec<f64>,
    /// Half-width of the uniform perturbation of each coefficient.
    scale: f64,
    stencil: Stencil,
}

fn criterion_1() -> Check {
    let sfd = SfdRotorParams::default();
    let sfd_set = HarmonicSet::contiguous(5);
    // circular whirl of radius 0.4 c with perturbations up to 0.07 c at the
    // journal, which keeps the journal away from the damper center where the
    // film force is nearly singular
    let c = sfd_set.coeffs_per_dof();
    let mut sfd_center = vec![0.0; 4 * c];
    sfd_center[sfd_set.position(1, Component::Cos).unwrap()] = 0.4 * sfd.clearance;
    sfd_center[c + sfd_set.position(1, Component::Sin).unwrap()] = 0.4 * sfd.clearance;
    let sfd_scale = 0.1 * sfd.clearance / (2f64.sqrt() * (1.0 + sfd.l1) * c as f64);
    let cases = [
        FdCase {
            model: Builtin::new("duffing", &[]).unwrap(),
            set: HarmonicSet::contiguous(7),
            omega: (0.3, 3.0),
            center: Vec::new(),
            scale: 0.5,
            stencil: Stencil::Richardson(1e-3),
        },
        FdCase {
            model: Builtin::new("linear", &[]).unwrap(),
            set: HarmonicSet::contiguous(3),
            omega: (0.2, 3.0),
            center: Vec::new(),
            scale: 1.0,
            stencil: Stencil::Richardson(1e-3),
        },
        FdCase {
            model: Builtin::new("sfd_rotor", &[]).unwrap(),
            set: sfd_set,
            omega: (100.0, 300.0),
            center: sfd_center,
            scale: sfd_scale,
            stencil: Stencil::Richardson(1e-3),
        },
        FdCase {
            model: Builtin::new("dual_rotor", &[]).unwrap(),
            set: HarmonicSet::dual_frequency(6, 5, 3).unwrap(),
            omega: (100.0, 250.0),
            center: Vec::new(),
            scale: 2e-4,
            stencil: Stencil::Central(1e-8),
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut parts = Vec::new();
    for case in &cases {
        let p = HbProblem::with_default_grid(&case.model, &case.set).unwrap();
        let n = p.unknowns();
        let center = if case.center.is_empty() { vec![0.0; n] } else { case.center.clone() };
        assert_eq!(center.len(), n);
        let (mut worst, t0) = (0.0f64, Instant::now());
        for _ in 0..20 {
            let a: Vec<f64> = center.iter().map(|c| c + case.scale * rng.gen_range(-1.0..1.0)).collect();
            let w = rng.gen_range(case.omega.0..case.omega.1);
            let (_, jac) = p.jacobian_augmented(&a, w).map_err(|e| format!("{}: {e}", case.model.name()))?;
            for col in 0..=n {
                let base = if col < n { case.scale } else { w };
                let eval = |d: f64| {
                    let mut x: Vec<Dd> = a.iter().map(|v| Dd::from(*v)).collect();
                    let mut wx = Dd::from(w);
                    if col < n {
                        x[col] = x[col] + d;
                    } else {
                        wx = wx + d;
                    }
                    p.residual(&x, wx).unwrap()
                };
                let central = |h: f64| {
                    let (fp, fm) = (eval(h), eval(-h));
                    fp.iter().zip(&fm).map(|(u, v)| (*u - *v).value() / (2.0 * h)).collect::<Vec<f64>>()
                };
                let fd = match case.stencil {
                    Stencil::Richardson(rel) => {
                        let (coarse, fine) = (central(rel * base), central(0.5 * rel * base));
                        fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
                    }
                    Stencil::Central(rel) => central(rel * base),
                };
                for (row, fd) in fd.iter().enumerate() {
                    let ad = jac[(row, col)];
                    let err = (ad - fd).abs() / (1e-6 * (1.0 + ad.abs()));
                    worst = worst.max(err);
                    ensure(err <= 1.0, || {
                        format!("{} entry ({row},{col}): AD {ad} vs FD {fd}", case.model.name())
                    })?;
                }
            }
        }
        parts.push(format!(
            "{} {}x{} worst {worst:.1e} ({:.1} s)",
            case.model.name(),
            n,
            n + 1,
            t0.elapsed().as_secs_f64()
        ));
    }
    Ok(format!(
        "20 points per model, |AD-FD| in units of 1e-6(1+|J|): {}",
        parts.join(", ")
    ))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Check {
    let m = LinearModel::two_dof();
    let set = HarmonicSet::contiguous(3);
    let p = HbProblem::with_default_grid(&m, &set).unwrap();
    let (mm, cc, kk, f) = (m.mass(), m.damping(), m.stiffness(), m.forcing());
    let c = set.coeffs_per_dof();
    let (cos1, sin1) = (set.position(1, Component::Cos).unwrap(), set.position(1, Component::Sin).unwrap());
    let (mut worst, mut max_iter) = (0.0f64, 0usize);
    for k in 0..50 {
        let w = 0.1 + 2.9 * k as f64 / 49.0;
        // D = K - w^2 M + i w C, x = Re(X e^{i w t}) with D X = F
        let d = |i: usize, j: usize| (kk[(i, j)] - w * w * mm[(i, j)], w * cc[(i, j)]);
        let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        let det = {
            let (x, y) = (mul(d(0, 0), d(1, 1)), mul(d(0, 1), d(1, 0)));
            (x.0 - y.0, x.1 - y.1)
        };
        let div = |a: (f64, f64)| {
            let n = det.0 * det.0 + det.1 * det.1;
            ((a.0 * det.0 + a.1 * det.1) / n, (a.1 * det.0 - a.0 * det.1) / n)
        };
        let x0 = div((d(1, 1).0 * f[0] - d(0, 1).0 * f[1], d(1, 1).1 * f[0] - d(0, 1).1 * f[1]));
        let x1 = div((d(0, 0).0 * f[1] - d(1, 0).0 * f[0], d(0, 0).1 * f[1] - d(1, 0).1 * f[0]));
        let mut exact = vec![0.0; 2 * c];
        for (i, x) in [x0, x1].iter().enumerate() {
            exact[i * c + cos1] = x.0;
            exact[i * c + sin1] = -x.1;
        }
        let (a, report) = p
            .newton_solve(&vec![0.0; p.unknowns()], w, DEFAULT_TOL, DEFAULT_MAX_ITER)
            .map_err(|e| e.to_string())?;
        ensure(report.converged, || format!("no convergence at omega = {w}"))?;
        let diff: Vec<f64> = a.iter().zip(&exact).map(|(x, y)| x - y).collect();
        let err = norm2(&diff) / norm2(&exact);
        worst = worst.max(err);
        max_iter = max_iter.max(report.iterations);
        ensure(err < 1e-10, || format!("omega = {w}: relative error {err:e}"))?;
        ensure(report.iterations <= 2, || format!("omega = {w}: {} Newton iterations", report.iterations))?;
    }
    Ok(format!("50 frequencies; worst relative error {worst:.2e}; at most {max_iter} Newton iterations"))
}

// ---------------------------------------------------------------- criterion 3

/// Fold frequencies of the one-harmonic Duffing amplitude equation
/// `(3k/4)^2 u^3 + 2(1-w^2)(3k/4) u^2 + ((1-w^2)^2 + 4 z^2 w^2) u - f^2 = 0`
/// (u = A^2): zeros of the cubic's discriminant.
fn duffing_discriminant_folds(zeta: f64, kappa: f64, force: f64, lo: f64, hi: f64) -> Vec<f64> {
    let disc = |w: f64| {
        let a = (0.75 * kappa).powi(2);
        let b = 2.0 * (1.0 - w * w) * 0.75 * kappa;
        let c = (1.0 - w * w).powi(2) + 4.0 * zeta * zeta * w * w;
        let d = -force * force;
        18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c - 4.0 * a * c.powi(3) - 27.0 * a * a * d * d
    };
    let steps = 20000;
    let mut roots = Vec::new();
    for k in 0..steps {
        let (mut x0, mut x1) = (lo + (hi - lo) * k as f64 / steps as f64, lo + (hi - lo) * (k + 1) as f64 / steps as f64);
        if disc(x0).signum() == disc(x1).signum() {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (x0 + x1);
            if disc(mid).signum() == disc(x0).signum() {
                x0 = mid;
            } else {
                x1 = mid;
            }
        }
        roots.push(0.5 * (x0 + x1));
    }
    roots
}

/// Coefficients on `segment` (point-index range) of `branch` linearly
/// interpolated at `omega`.
fn interpolate(branch: &Branch, segment: std::ops::Range<usize>, omega: f64) -> Option<Vec<f64>> {
    for k in segment.start..segment.end.saturating_sub(1) {
        let (p, q) = (&branch.points[k], &branch.points[k + 1]);
        if (p.omega - omega) * (q.omega - omega) <= 0.0 && p.omega != q.omega {
            let s = (omega - p.omega) / (q.omega - p.omega);
            let (a, b) = (p.coeffs.as_flat(), q.coeffs.as_flat());
            return Some(a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect());
        }
    }
    None
}

fn criterion_3() -> Check {
    let m = Duffing::default();
    let p = duffing_problem(&m);
    let branch = duffing_branch(&p);
    ensure(branch.folds.len() == 2, || format!("expected 2 folds, found {:?}", branch.folds))?;
    let (f1, f2) = (branch.folds[0], branch.folds[1]);
    let fold_w: Vec<f64> = branch.folds.iter().map(|&k| branch.points[k].omega).collect();
    let (lo, hi) = (fold_w[0].min(fold_w[1]), fold_w[0].max(fold_w[1]));

    let oracle = duffing_discriminant_folds(0.05, 1.0, 0.4, 0.5, 3.0);
    ensure(oracle.len() == 2, || format!("discriminant oracle found {oracle:?}"))?;
    ensure(rel(lo, oracle[0]) < 0.01 && rel(hi, oracle[1]) < 0.01, || {
        format!("folds at {lo}, {hi}; discriminant oracle {oracle:?}")
    })?;

    // bidirectional sweeps
    let dw = 1.0 / 160.0;
    let settings = SolveSettings {
        floquet: None,
        ..SolveSettings::default()
    };
    let (w_start, w_end) = (0.5, 0.5 + 336.0 * dw);
    let up = sweep(&p, w_start, w_end, dw, &p.linear_guess(w_start).unwrap(), &settings).map_err(|e| e.to_string())?;
    let down = sweep(&p, w_end, w_start, -dw, &p.linear_guess(w_end).unwrap(), &settings).map_err(|e| e.to_string())?;
    let jump = |b: &Branch, factor: f64| {
        b.points
            .windows(2)
            .find(|w| w[1].amplitudes[0] < factor * w[0].amplitudes[0] || w[1].amplitudes[0] > w[0].amplitudes[0] / factor)
            .map(|w| (w[0].omega, w[1].omega))
    };
    let up_jump = jump(&up, 0.8).ok_or("upward sweep shows no jump")?;
    let down_jump = jump(&down, 0.8).ok_or("downward sweep shows no jump")?;
    ensure(down_jump.0 < up_jump.0, || format!("no hysteresis: up jump {up_jump:?}, down jump {down_jump:?}"))?;
    ensure(up_jump.0 <= hi + 1e-12 && up_jump.1 >= hi - 1e-12 && down_jump.0 >= lo - 1e-12 && down_jump.1 <= lo + 1e-12, || {
        format!("jumps {up_jump:?} (up), {down_jump:?} (down) do not bracket the folds {hi}, {lo}")
    })?;

    // coexisting solutions at five in-window sweep frequencies
    let width = hi - lo;
    let mut lines = Vec::new();
    let mut worst_rk4 = 0.0f64;
    for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let target = lo + frac * width;
        let k = ((target - w_start) / dw).round() as usize;
        let w = up.points[k].omega;
        let upper_sweep = &up.points[k];
        let lower_sweep = down.points.iter().find(|q| (q.omega - w).abs() < 1e-9).ok_or("missing downward point")?;
        let mut amps = Vec::new();
        for (segment, sweep_point) in [(0..f1 + 1, Some(upper_sweep)), (f1..f2 + 1, None), (f2..branch.len(), Some(lower_sweep))] {
            let guess = interpolate(&branch, segment, w).ok_or_else(|| format!("branch segment misses omega = {w}"))?;
            let (a, r) = p.newton_solve(&guess, w, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
            ensure(r.converged, || format!("trace-seeded Newton failed at {w}"))?;
            let stab = floquet(&p, &a, w, &FloquetSettings::default()).map_err(|e| e.to_string())?;
            if let Some(sp) = sweep_point {
                let diff: Vec<f64> = a.iter().zip(sp.coeffs.as_flat()).map(|(x, y)| x - y).collect();
                ensure(norm2(&diff) < 1e-6 * norm2(&a), || format!("trace and sweep disagree at {w}"))?;
                ensure(stab.classification == Stability::Stable, || format!("outer solution unstable at {w}"))?;
                // time-domain cross-check from a perturbed start on this orbit
                let x0 = evaluate_at(&a, p.set(), 1, 0.0, 0)[0] * 1.02;
                let v0 = evaluate_at(&a, p.set(), 1, 0.0, 1)[0] * w * 1.02;
                let period = response_period(&m, w);
                let traj = rk4(&m, &[x0], &[v0], w, 150.0 * period, period / 256.0).map_err(|e| e.to_string())?;
                let ss = steady_state_extract(&traj, period, 149, p.set()).map_err(|e| e.to_string())?;
                let hb_amp = p.peak_amplitudes(&a).unwrap()[0];
                let dev = rel(ss.amplitudes[0], hb_amp);
                worst_rk4 = worst_rk4.max(dev);
                ensure(ss.steady && dev < 0.01, || format!("RK4 {} vs HB {hb_amp} at {w}", ss.amplitudes[0]))?;
            } else {
                ensure(stab.classification == Stability::Unstable, || {
                    format!("middle solution at {w} classified {:?}", stab.classification)
                })?;
            }
            amps.push(p.peak_amplitudes(&a).unwrap()[0]);
        }
        ensure(amps[0] > amps[1] && amps[1] > amps[2], || format!("amplitudes at {w} not ordered: {amps:?}"))?;
        lines.push(format!("{w:.4}: {:.4}/{:.4}/{:.4}", amps[0], amps[1], amps[2]));
    }
    Ok(format!(
        "folds at {lo:.4}, {hi:.4} (oracle {:.4}, {:.4}); sweep jumps up {:.4}->{:.4}, down {:.4}->{:.4}; \
         three solutions (stable/unstable/stable) {}; worst RK4 deviation {:.2e}",
        oracle[0],
        oracle[1],
        up_jump.0,
        up_jump.1,
        down_jump.0,
        down_jump.1,
        lines.join(", "),
        worst_rk4
    ))
}

// ---------------------------------------------------------------- criterion 4

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn criterion_4() -> Check {
    // Sommerfeld integrals against adaptive quadrature
    let rule = GaussLegendre::new(64);
    let mut worst_int = 0.0f64;
    for e in (0..10).map(|k| 0.1 * k as f64) {
        for t1 in [0.0, 0.7, 2.0, -1.3] {
            for (l, n) in (0..3).flat_map(|l| (0..3).map(move |n| (l, n))) {
                let f = move |t: f64| t.sin().powi(l) * t.cos().powi(n) / (1.0 + e * t.cos()).powi(3);
                let o = adaptive_simpson(&f, t1, t1 + PI, 1e-13);
                let v = sommerfeld_integral(l as u32, n as u32, e, t1, &rule).map_err(|e| e.to_string())?;
                let err = (v - o).abs() / o.abs().max(1.0);
                worst_int = worst_int.max(err);
                ensure(err < 1e-8, || format!("I(l={l}, n={n}) at e={e}, theta1={t1}: {v} vs {o}"))?;
            }
        }
    }

    // HB orbits against Newmark steady state, warm-started by a sweep
    let m = SfdRotor::new(SfdRotorParams::default()).unwrap();
    let set = HarmonicSet::contiguous(5);
    let p = HbProblem::with_default_grid(&m, &set).unwrap();
    let settings = SolveSettings {
        floquet: None,
        ..SolveSettings::default()
    };
    let branch = sweep(&p, 100.0, 300.0, 1.0, &p.linear_guess(100.0).unwrap(), &settings).map_err(|e| e.to_string())?;
    ensure(branch.gaps.is_empty(), || format!("sweep gaps at {:?}", branch.gaps.iter().map(|g| g.omega).collect::<Vec<_>>()))?;
    let peak = branch
        .points
        .iter()
        .max_by(|a, b| a.amplitudes[0].total_cmp(&b.amplitudes[0]))
        .unwrap();
    let resonance = peak.omega;
    let speeds = [resonance - 60.0, resonance - 20.0, resonance, resonance + 25.0, resonance + 70.0];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for &w in &speeds {
        let pt = branch.points.iter().find(|q| (q.omega - w).abs() < 1e-9).ok_or("speed not on sweep grid")?;
        let a = pt.coeffs.as_flat();
        let period = response_period(&m, w);
        let per = 500;
        let dt = period / per as f64;
        let traj = newmark(&m, &[0.0; 4], &[0.0; 4], w, 201.0 * period, dt, &NewmarkSettings::default())
            .map_err(|e| e.to_string())?;
        let ss = steady_state_extract(&traj, period, 200, &set).map_err(|e| e.to_string())?;
        ensure(ss.steady, || format!("Newmark not steady at {w}: {:e}", ss.rms_change))?;
        let start = traj.len() - 1 - per;
        let (mut dev, mut radius) = (0.0f64, 0.0f64);
        for k in 0..=per {
            let t = traj.time(start + k);
            let x = evaluate_at(a, &set, 4, w * t / m.period_divisor() as f64, 0);
            let y = traj.displacement(start + k);
            radius = radius.max(x[0].hypot(x[1]));
            dev = dev.max((x[0] - y[0]).hypot(x[1] - y[1]));
        }
        let r = dev / radius;
        worst = worst.max(r);
        ensure(r < 0.02, || format!("orbit deviation {r:.3e} of radius at {w} rad/s"))?;
        parts.push(format!("{w:.0}: {r:.1e}"));
    }
    Ok(format!(
        "Sommerfeld (order 64, ratio 0-0.9) worst error {worst_int:.1e}; resonance near {resonance:.0} rad/s; \
         orbit deviation / radius at {}; worst {worst:.2e}",
        parts.join(", ")
    ))
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5(out: &Path) -> Check {
    let config = load_config("dual_rotor_trace.json");
    let dir = out.join("dual_trace");
    hbad::run(Command::Trace, &config, &dir, 1).map_err(|e| e.to_string())?;
    let rec = BranchRecord::load(&dir.join("branch.json")).map_err(|e| e.to_string())?;
    let pts = &rec.points;
    ensure(rec.folds.len() == 4, || format!("expected two fold pairs, found folds {:?}", rec.folds))?;
    let amp = |k: usize| pts[k].amplitudes[0];
    // Point k of a fold pair (a, b) is the first point past the fold, so
    // a..b is the middle branch. With a truncated harmonic set the Floquet
    // crossing sits within a few points of the HB fold, hence the margin.
    const NEAR: usize = 3;
    let mut regions = Vec::new();
    for pair in rec.folds.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        let unstable: Vec<usize> = (a..b).filter(|&k| pts[k].stability == "unstable").collect();
        let (first, last) = match (unstable.first(), unstable.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(format!("no unstable point between folds {a} and {b}")),
        };
        ensure(unstable.len() == last - first + 1, || format!("unstable run between {a} and {b} is broken"))?;
        ensure(first <= a + NEAR && last + 1 + NEAR >= b, || {
            format!("unstable run {first}..={last} does not span folds {a}..{b}")
        })?;
        let outside = |r: std::ops::Range<usize>| r.filter(|&k| k < pts.len()).all(|k| pts[k].stability == "stable");
        ensure(outside(a.saturating_sub(NEAR + 5)..a.saturating_sub(NEAR)) && outside(b + NEAR..b + NEAR + 5), || {
            format!("segment {a}..{b} is not bounded by stable branches")
        })?;
        let k = (a..=b).max_by(|&i, &j| amp(i).total_cmp(&amp(j))).unwrap();
        regions.push((k, pts[a].omega.min(pts[b].omega), pts[a].omega.max(pts[b].omega), unstable.len(), b - a));
    }
    let (i1, i2) = (regions[0].0, regions[1].0);
    let valley = (rec.folds[1]..rec.folds[2]).map(amp).fold(f64::INFINITY, f64::min);
    ensure(valley < 0.5 * amp(i1).min(amp(i2)), || {
        format!("regions not separated: valley {valley:e}, peaks {:e}, {:e}", amp(i1), amp(i2))
    })?;
    ensure(regions[0].2 < regions[1].1, || format!("fold windows overlap: {regions:?}"))?;
    let v = verify_branch(&rec).map_err(|e| e.to_string())?;
    ensure(v.passed, || format!("round trip: max residual {:e}", v.max_norm))?;
    Ok(format!(
        "{} points; peak I {:.3e} m at {:.1} rad/s (folds {:.1}-{:.1}, {}/{} middle points unstable); \
         peak II {:.3e} m at {:.1} rad/s (folds {:.1}-{:.1}, {}/{} middle points unstable); valley {:.2e} m",
        pts.len(),
        amp(i1),
        pts[i1].omega,
        regions[0].1,
        regions[0].2,
        regions[0].3,
        regions[0].4,
        amp(i2),
        pts[i2].omega,
        regions[1].1,
        regions[1].2,
        regions[1].3,
        regions[1].4,
        valley
    ))
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6(out: &Path) -> Check {
    let config = load_config("dual_rotor_compare.json");
    let dir = out.join("dual_compare");
    hbad::run(Command::Compare, &config, &dir, 1).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(dir.join("compare.json")).map_err(|e| e.to_string())?;
    let rec: CompareRecord = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    print!("{}", rec.table());
    let mut parts = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for r in &rec.rows {
        let ratio = r.speedup.ok_or_else(|| format!("omega {}: {:?}", r.omega, r.errors))?;
        min_ratio = min_ratio.min(ratio);
        ensure(ratio >= 5.0, || format!("omega {}: speed ratio {ratio:.1}", r.omega))?;
        parts.push(format!(
            "{:.0}: HB {:.3} s vs Newmark {:.2} s = {ratio:.0}x",
            r.omega,
            r.hb_seconds.unwrap(),
            r.ti_seconds.unwrap()
        ));
    }
    Ok(format!("{}; minimum ratio {min_ratio:.0}x", parts.join("; ")))
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Check {
    let settings = FloquetSettings::default();
    let mut worst = 0.0f64;
    let mut counts = Vec::new();

    let check = |name: &str, r: &hbad_core::stability::FloquetResult, worst: &mut f64| -> Result<(), String> {
        let e = r.liouville_error();
        *worst = worst.max(e);
        ensure(e < 1e-4, || format!("{name}: Liouville error {e:e}"))
    };

    let lin = LinearModel::two_dof();
    let p = HbProblem::with_default_grid(&lin, &HarmonicSet::contiguous(3)).unwrap();
    for w in [0.3, 1.0, 1.7, 2.5] {
        let a = p.linear_guess(w).unwrap();
        check("linear", &floquet(&p, &a, w, &settings).map_err(|e| e.to_string())?, &mut worst)?;
    }
    counts.push("linear 4");

    let duf = Duffing::default();
    let p = duffing_problem(&duf);
    let branch = duffing_branch(&p);
    for pt in branch.points.iter().step_by(10) {
        check("duffing", &floquet(&p, pt.coeffs.as_flat(), pt.omega, &settings).map_err(|e| e.to_string())?, &mut worst)?;
    }
    counts.push("duffing branch every 10th point");
    let flips: Vec<usize> = (1..branch.len())
        .filter(|&k| branch.points[k].stability != branch.points[k - 1].stability)
        .collect();
    ensure(flips == branch.folds, || format!("stability flips at {flips:?}, folds at {:?}", branch.folds))?;

    let sfd = SfdRotor::new(SfdRotorParams::default()).unwrap();
    let p = HbProblem::with_default_grid(&sfd, &HarmonicSet::contiguous(5)).unwrap();
    let sw = sweep(&p, 150.0, 250.0, 25.0, &p.linear_guess(150.0).unwrap(), &SolveSettings { floquet: None, ..Default::default() })
        .map_err(|e| e.to_string())?;
    for pt in &sw.points {
        check("sfd_rotor", &floquet(&p, pt.coeffs.as_flat(), pt.omega, &settings).map_err(|e| e.to_string())?, &mut worst)?;
    }
    counts.push("sfd_rotor 5");

    let dual = DualRotor::new(DualRotorParams::default()).unwrap();
    let p = HbProblem::with_default_grid(&dual, &HarmonicSet::dual_frequency(6, 5, 3).unwrap()).unwrap();
    let sw = sweep(&p, 130.0, 230.0, 25.0, &p.linear_guess(130.0).unwrap(), &SolveSettings { floquet: None, ..Default::default() })
        .map_err(|e| e.to_string())?;
    for pt in &sw.points {
        check("dual_rotor", &floquet(&p, pt.coeffs.as_flat(), pt.omega, &settings).map_err(|e| e.to_string())?, &mut worst)?;
    }
    counts.push("dual_rotor 5");

    Ok(format!(
        "Liouville worst relative error {worst:.2e} ({}); Duffing stability flips at {flips:?} = folds",
        counts.join(", ")
    ))
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8(out: &Path) -> Check {
    let bin = env!("CARGO_BIN_EXE_hbad");
    let cfg = out.join("determinism.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"name": "duffing"}, "harmonics": {"order": 7}, "omega": {"start": 0.5, "end": 3.0},
            "initial_guess": "random"}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (k, jobs) in ["1", "2"].iter().enumerate() {
        let dir = out.join(format!("determinism_{k}"));
        let status = Process::new(bin)
            .args(["trace", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--seed", "42", "--jobs", jobs])
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("run {k} exited with {status}"))?;
        runs.push(std::fs::read(dir.join("branch.csv")).map_err(|e| e.to_string())?);
    }
    ensure(runs[0] == runs[1], || "branch.csv differs between identical runs".into())?;

    let sweep_cfg = configs().join("duffing_sweep.json");
    let mut sweeps = Vec::new();
    for (k, jobs) in ["1", "3"].iter().enumerate() {
        let dir = out.join(format!("determinism_sweep_{k}"));
        let status = Process::new(bin)
            .args(["sweep", "--config", sweep_cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--jobs", jobs])
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("sweep run {k} exited with {status}"))?;
        let files: Vec<Vec<u8>> = (0..3)
            .map(|j| std::fs::read(dir.join(format!("job_{j:02}/branch.csv"))).unwrap())
            .collect();
        sweeps.push(files);
    }
    ensure(sweeps[0] == sweeps[1], || "variant sweeps differ between --jobs 1 and --jobs 3".into())?;
    Ok(format!(
        "trace branch.csv identical across 2 runs ({} bytes); 3-variant sweep identical for --jobs 1 and 3",
        runs[0].len()
    ))
}

// ----------------------------------------------------------------------------

fn main() {
    let out = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(usize, &str, Duration, Box<dyn Fn() -> Check>)> = vec![
        (1, "AD Jacobian vs central differences", Duration::from_secs(10), Box::new(criterion_1)),
        (2, "linear closed-form response", Duration::from_secs(60), Box::new(criterion_2)),
        (3, "Duffing hysteresis", Duration::from_secs(60), Box::new(criterion_3)),
        (4, "SFD rotor vs Newmark", Duration::from_secs(300), Box::new(criterion_4)),
        (5, "dual-frequency resonance structure", Duration::from_secs(600), Box::new(|| criterion_5(out.path()))),
        (6, "HB vs Newmark speed", Duration::from_secs(600), Box::new(|| criterion_6(out.path()))),
        (7, "Floquet identities", Duration::from_secs(300), Box::new(criterion_7)),
        (8, "determinism", Duration::from_secs(300), Box::new(|| criterion_8(out.path()))),
    ];
    let mut failed = Vec::new();
    for (n, name, budget, f) in &criteria {
        let t0 = Instant::now();
        let result = f();
        let secs = t0.elapsed();
        let result = result.and_then(|msg| {
            if secs <= *budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; exceeded budget of {} s", budget.as_secs()))
            }
        });
        match result {
            Ok(msg) => println!("criterion {n} ({name}): PASS in {:.1} s: {msg}", secs.as_secs_f64()),
            Err(msg) => {
                println!("criterion {n} ({name}): FAIL in {:.1} s: {msg}", secs.as_secs_f64());
                failed.push(*n);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 8 criteria PASS");
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        std::process::exit(1);
    }
}
