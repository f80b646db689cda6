//! Time stepping of `u_t = Δu + v(x) u` under piecewise-constant controls.
//!
//! 1-D stages use Crank–Nicolson with a Thomas solve. 2-D stages use the
//! Peaceman–Rachford splitting; when the control is a sum `f(x1) + g(x2)`
//! each part goes to its own direction so the two factors commute and
//! separable eigenmodes evolve exactly as under Crank–Nicolson. The first
//! steps of every stage are replaced by pairs of backward-Euler half steps
//! (Rannacher startup), which damps the high-frequency ringing that
//! Crank–Nicolson leaves behind after a rough initial state or a control
//! switch.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Result, SteerError};
use crate::grid::{fmt_sig, inner_product, l2_norm, Grid, GridFunction};
use crate::spectral::SpectralBasisND;
use crate::tridiag::thomas;

/// Solutions with a larger L2 norm abort the run.
pub const BLOW_UP_NORM: f64 = 1e12;

/// Undershoot allowance for nonnegative data, relative to `max|u0|`.
pub const MAX_PRINCIPLE_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Stage {
    pub field: GridFunction,
    pub duration: f64,
    pub label: String,
}

impl Stage {
    pub fn new(field: GridFunction, duration: f64, label: impl Into<String>) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(SteerError::InvalidArgument(format!(
                "stage duration must be positive, got {duration}"
            )));
        }
        if field.values().iter().any(|x| !x.is_finite()) {
            return Err(SteerError::InvalidArgument("stage field is not finite".into()));
        }
        Ok(Stage {
            field,
            duration,
            label: label.into(),
        })
    }

    pub fn max_abs_field(&self) -> f64 {
        self.field.max_abs()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ControlSchedule {
    stages: Vec<Stage>,
}

impl ControlSchedule {
    pub fn new() -> Self {
        ControlSchedule::default()
    }

    pub fn single(stage: Stage) -> Self {
        ControlSchedule { stages: vec![stage] }
    }

    pub fn push(&mut self, stage: Stage) -> Result<()> {
        if let Some(first) = self.stages.first() {
            first.field.check_same_grid(&stage.field)?;
        }
        self.stages.push(stage);
        Ok(())
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Requested step; each stage caps it further.
    pub dt: f64,
    /// Extra snapshot times, absolute.
    pub record_times: Vec<f64>,
    /// Steps replaced by backward-Euler half-step pairs at each stage start.
    pub rannacher_steps: usize,
    /// Record per-step diagnostics every this many steps (0 = never).
    pub monitor_stride: usize,
}

impl SimOptions {
    pub fn new(dt: f64) -> Self {
        SimOptions {
            dt,
            record_times: Vec::new(),
            rannacher_steps: 2,
            monitor_stride: 1,
        }
    }

    pub fn with_record_times(mut self, times: Vec<f64>) -> Self {
        self.record_times = times;
        self
    }

    pub fn plain_crank_nicolson(mut self) -> Self {
        self.rannacher_steps = 0;
        self
    }
}

/// `n` equispaced times in `(0, t]`.
pub fn uniform_times(t: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| t * k as f64 / n as f64).collect()
}

/// Step cap for one stage.
pub fn stage_dt(dt: f64, duration: f64, max_abs_v: f64) -> f64 {
    let mut h = dt.min(1e-3).min(duration / 50.0);
    if max_abs_v > 0.0 {
        h = h.min(0.1 / max_abs_v);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostic {
    pub time: f64,
    pub l2: f64,
    pub counts: Vec<usize>,
    pub min_value: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: GridFunction,
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    /// Stage index in force when each snapshot was taken (0 for `t = 0`).
    pub snapshot_stage: Vec<usize>,
    /// Snapshot index at the end of each stage.
    pub stage_ends: Vec<usize>,
    pub stage_labels: Vec<String>,
    pub stage_starts: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostic>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridFunction {
        self.snapshots.last().expect("at least the initial snapshot")
    }

    pub fn stage_end(&self, stage: usize) -> &GridFunction {
        &self.snapshots[self.stage_ends[stage]]
    }

    /// Maximum-principle checks: sign preservation for nonnegative data and
    /// non-increasing per-axis interface counts.
    pub fn max_principle(&self) -> MaxPrincipleReport {
        let scale = self.initial.max_abs();
        let nonneg = self.initial.values().iter().all(|&x| x >= 0.0);
        let worst = self
            .diagnostics
            .iter()
            .map(|d| d.min_value)
            .chain(self.snapshots.iter().map(GridFunction::min))
            .fold(f64::INFINITY, f64::min);
        let undershoot = if scale > 0.0 { (-worst).max(0.0) / scale } else { 0.0 };
        let counts: Vec<Vec<usize>> = self.diagnostics.iter().map(|d| d.counts.clone()).collect();
        MaxPrincipleReport {
            nonnegative_initial: nonneg,
            relative_undershoot: undershoot,
            sign_preserved: !nonneg || undershoot <= MAX_PRINCIPLE_EPS,
            counts_monotone: crate::sign::counts_monotone(&counts),
            max_counts: counts.iter().fold(vec![0; self.initial.grid().dim()], |m, c| {
                m.iter().zip(c).map(|(a, b)| *a.max(b)).collect()
            }),
        }
    }

    /// One CSV per snapshot plus `index.csv` with
    /// `time,file,l2_norm,interface_counts` (counts joined by `;`).
    pub fn write_snapshots(&self, dir: &Path, prefix: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut index = String::from("time,file,l2_norm,interface_counts\n");
        for (k, (t, s)) in self.times.iter().zip(&self.snapshots).enumerate() {
            let name = format!("{prefix}{k:04}.csv");
            s.write_csv(fs::File::create(dir.join(&name))?)?;
            let counts = crate::sign::axis_interface_counts(s, None);
            let c: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(
                index,
                "{},{},{},{}",
                fmt_sig(*t),
                name,
                fmt_sig(l2_norm(s)),
                c.join(";")
            );
        }
        fs::write(dir.join(format!("{prefix}index.csv")), index)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrincipleReport {
    pub nonnegative_initial: bool,
    pub relative_undershoot: f64,
    pub sign_preserved: bool,
    pub counts_monotone: bool,
    pub max_counts: Vec<usize>,
}

impl MaxPrincipleReport {
    pub fn passed(&self) -> bool {
        self.sign_preserved && self.counts_monotone
    }
}

/// Interior-node stepper for one stage segment with fixed step `h`.
struct Stepper {
    dims: Vec<usize>,
    r: Vec<f64>,
    h: f64,
    /// Per-direction potential part on the interior lattice.
    parts: Vec<Vec<f64>>,
    /// Per-direction left-hand diagonals, same layout as `parts`.
    diags: Vec<Vec<f64>>,
    sub: Vec<f64>,
    sup: Vec<f64>,
    line: Vec<f64>,
    scratch: Vec<f64>,
    tmp: Vec<f64>,
}

fn interior_values(f: &GridFunction) -> (Vec<usize>, Vec<f64>) {
    let g = f.grid();
    let dims: Vec<usize> = g.axes().iter().map(|a| a.cells() - 1).collect();
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let mut rest = k;
        let idx: Vec<usize> = dims
            .iter()
            .map(|&d| {
                let i = rest % d + 1;
                rest /= d;
                i
            })
            .collect();
        out.push(f.values()[g.flat(&idx)]);
    }
    (dims, out)
}

fn to_full(grid: &Arc<Grid>, dims: &[usize], interior: &[f64]) -> GridFunction {
    let mut vals = vec![0.0; grid.len()];
    for (k, &x) in interior.iter().enumerate() {
        let mut rest = k;
        let idx: Vec<usize> = dims
            .iter()
            .map(|&d| {
                let i = rest % d + 1;
                rest /= d;
                i
            })
            .collect();
        vals[grid.flat(&idx)] = x;
    }
    GridFunction::from_values(grid.clone(), vals)
        .expect("lattice size")
        .with_dirichlet()
}

/// Split `v` into per-direction parts; additive separability is detected.
fn split_potential(dims: &[usize], v: &[f64]) -> Vec<Vec<f64>> {
    if dims.len() == 1 {
        return vec![v.to_vec()];
    }
    let (nx, ny) = (dims[0], dims[1]);
    let at = |i: usize, j: usize| v[i + nx * j];
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let base = at(0, 0);
    let separable = (0..ny).all(|j| (0..nx).all(|i| (at(i, j) - at(i, 0) - at(0, j) + base).abs() <= 1e-12 * scale));
    let mut px = vec![0.0; v.len()];
    let mut py = vec![0.0; v.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = i + nx * j;
            if separable {
                px[k] = at(i, 0) - 0.5 * base;
                py[k] = at(0, j) - 0.5 * base;
            } else {
                px[k] = 0.5 * v[k];
                py[k] = 0.5 * v[k];
            }
        }
    }
    vec![px, py]
}

impl Stepper {
    fn new(grid: &Grid, dims: &[usize], v: &[f64], h: f64) -> Self {
        let r: Vec<f64> = grid.axes().iter().map(|a| h / (2.0 * a.dx() * a.dx())).collect();
        let parts = split_potential(dims, v);
        let diags = parts
            .iter()
            .zip(&r)
            .map(|(p, &ri)| p.iter().map(|&pv| 1.0 + 2.0 * ri - 0.5 * h * pv).collect())
            .collect();
        let maxn = *dims.iter().max().expect("dims");
        let total: usize = dims.iter().product();
        Stepper {
            dims: dims.to_vec(),
            r,
            h,
            parts,
            diags,
            sub: vec![0.0; maxn],
            sup: vec![0.0; maxn],
            line: vec![0.0; maxn],
            scratch: vec![0.0; maxn],
            tmp: vec![0.0; total],
        }
    }

    fn stride(&self, axis: usize) -> usize {
        self.dims[..axis].iter().product()
    }

    /// `out = (I + h/2 A_axis) u`.
    fn explicit(&self, axis: usize, u: &[f64], out: &mut [f64]) {
        let n = self.dims[axis];
        let s = self.stride(axis);
        let r = self.r[axis];
        let p = &self.parts[axis];
        let half = 0.5 * self.h;
        for k in 0..u.len() {
            let i = (k / s) % n;
            let left = if i > 0 { u[k - s] } else { 0.0 };
            let right = if i + 1 < n { u[k + s] } else { 0.0 };
            out[k] = u[k] + r * (left - 2.0 * u[k] + right) + half * p[k] * u[k];
        }
    }

    /// Solve `(I − h/2 A_axis) x = b` in place along every line of `axis`.
    fn implicit(&mut self, axis: usize, b: &mut [f64]) {
        let n = self.dims[axis];
        let s = self.stride(axis);
        let r = self.r[axis];
        for x in self.sub[..n].iter_mut() {
            *x = -r;
        }
        for x in self.sup[..n].iter_mut() {
            *x = -r;
        }
        let total = b.len();
        let block = s * n;
        let diag = &self.diags[axis];
        let mut d = vec![0.0; n];
        for outer in 0..total / block {
            for inner in 0..s {
                let base = outer * block + inner;
                for i in 0..n {
                    self.line[i] = b[base + i * s];
                    d[i] = diag[base + i * s];
                }
                thomas(
                    &self.sub[..n],
                    &d,
                    &self.sup[..n],
                    &mut self.line[..n],
                    &mut self.scratch[..n],
                );
                for i in 0..n {
                    b[base + i * s] = self.line[i];
                }
            }
        }
    }

    fn crank_nicolson(&mut self, u: &mut Vec<f64>) {
        let mut tmp = std::mem::take(&mut self.tmp);
        if self.dims.len() == 1 {
            self.explicit(0, u, &mut tmp);
            self.implicit(0, &mut tmp);
            std::mem::swap(u, &mut tmp);
        } else {
            self.explicit(1, u, &mut tmp);
            self.implicit(0, &mut tmp);
            self.explicit(0, &tmp, u);
            self.implicit(1, u);
        }
        self.tmp = tmp;
    }

    /// Two backward-Euler steps of size `h/2`, factored per direction.
    fn rannacher(&mut self, u: &mut [f64]) {
        for _ in 0..2 {
            for axis in 0..self.dims.len() {
                self.implicit(axis, u);
            }
        }
    }
}

fn interior_counts(dims: &[usize], u: &[f64], tol: f64) -> Vec<usize> {
    let total = u.len();
    let mut out = Vec::with_capacity(dims.len());
    for axis in 0..dims.len() {
        let n = dims[axis];
        let s: usize = dims[..axis].iter().product();
        let block = s * n;
        let mut best = 0;
        for outer in 0..total / block {
            for inner in 0..s {
                let base = outer * block + inner;
                let mut prev = 0i8;
                let mut c = 0;
                for i in 0..n {
                    let x = u[base + i * s];
                    let sg = if x > tol {
                        1
                    } else if x < -tol {
                        -1
                    } else {
                        0
                    };
                    if sg != 0 {
                        if prev != 0 && sg != prev {
                            c += 1;
                        }
                        prev = sg;
                    }
                }
                best = best.max(c);
            }
        }
        out.push(best);
    }
    out
}

fn interior_l2(grid: &Grid, u: &[f64]) -> f64 {
    let w: f64 = grid.axes().iter().map(|a| a.dx()).product();
    (w * u.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Run `schedule` from `u0`. Boundary values are held at zero.
pub fn simulate(u0: &GridFunction, schedule: &ControlSchedule, opts: &SimOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0) {
        return Err(SteerError::InvalidArgument("time step must be positive".into()));
    }
    if schedule.is_empty() {
        return Err(SteerError::InvalidArgument("empty schedule".into()));
    }
    let grid = u0.grid().clone();
    if grid.dim() > 2 {
        return Err(SteerError::InvalidArgument(
            "the time stepper handles one or two dimensions".into(),
        ));
    }
    if !u0.vanishes_on_boundary() {
        return Err(SteerError::InvalidArgument(
            "initial state must vanish on the boundary".into(),
        ));
    }
    for s in schedule.stages() {
        u0.check_same_grid(&s.field)?;
    }

    let (dims, mut u) = interior_values(u0);
    let mut record: Vec<f64> = opts.record_times.iter().copied().filter(|t| *t > 0.0).collect();
    record.sort_by(f64::total_cmp);

    let mut traj = Trajectory {
        initial: u0.clone(),
        times: vec![0.0],
        snapshots: vec![u0.with_dirichlet()],
        snapshot_stage: vec![0],
        stage_ends: Vec::new(),
        stage_labels: Vec::new(),
        stage_starts: Vec::new(),
        diagnostics: Vec::new(),
    };
    let monitor = |t: f64, u: &[f64], traj: &mut Trajectory| {
        let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        traj.diagnostics.push(StepDiagnostic {
            time: t,
            l2: interior_l2(&grid, u),
            counts: interior_counts(&dims, u, crate::sign::DEFAULT_REL_TOL * scale),
            min_value: u.iter().copied().fold(0.0, f64::min),
        });
    };
    if opts.monitor_stride > 0 {
        monitor(0.0, &u, &mut traj);
    }

    let mut t0 = 0.0;
    let mut step_count = 0usize;
    for (si, stage) in schedule.stages().iter().enumerate() {
        let (_, v) = interior_values(&stage.field);
        let t_end = t0 + stage.duration;
        let cap = stage_dt(opts.dt, stage.duration, stage.max_abs_field());
        let mut marks: Vec<f64> = record
            .iter()
            .copied()
            .filter(|&t| t > t0 + 1e-12 * stage.duration && t < t_end - 1e-12 * stage.duration)
            .collect();
        marks.push(t_end);
        traj.stage_labels.push(stage.label.clone());
        traj.stage_starts.push(t0);

        let mut seg_start = t0;
        let mut startup = opts.rannacher_steps;
        let mut stepper: Option<(f64, Stepper)> = None;
        for &mark in &marks {
            let len = mark - seg_start;
            let n = (len / cap - 1e-9).ceil().max(1.0) as usize;
            let h = len / n as f64;
            let reuse = matches!(&stepper, Some((hh, _)) if (hh - h).abs() <= 1e-14 * h);
            if !reuse {
                stepper = Some((h, Stepper::new(&grid, &dims, &v, h)));
            }
            let st = &mut stepper.as_mut().expect("stepper").1;
            for k in 0..n {
                if startup > 0 {
                    st.rannacher(&mut u);
                    startup -= 1;
                } else {
                    st.crank_nicolson(&mut u);
                }
                step_count += 1;
                let t = seg_start + (k + 1) as f64 * h;
                let norm = interior_l2(&grid, &u);
                if !(norm <= BLOW_UP_NORM) {
                    return Err(SteerError::BlowUp {
                        stage: stage.label.clone(),
                        time: t,
                        norm,
                    });
                }
                if opts.monitor_stride > 0 && step_count % opts.monitor_stride == 0 {
                    monitor(t, &u, &mut traj);
                }
            }
            seg_start = mark;
            traj.times.push(mark);
            traj.snapshots.push(to_full(&grid, &dims, &u));
            traj.snapshot_stage.push(si);
        }
        traj.stage_ends.push(traj.snapshots.len() - 1);
        t0 = t_end;
    }
    Ok(traj)
}

/// Fourier coefficients along a trajectory and, where a stage control is
/// the basis potential plus a constant, the exponential-law check.
#[derive(Debug, Clone)]
pub struct FourierTrace {
    pub times: Vec<f64>,
    /// `coefficients[s][l] = ∫ u(t_s) ω_l`.
    pub coefficients: Vec<Vec<f64>>,
    pub law: Vec<LawCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawCheck {
    pub stage: usize,
    /// The constant `a` in `v = potential + a`.
    pub shift: f64,
    /// Largest relative deviation from `c_l(t_s) e^{(λ_l + a)(t − t_s)}`
    /// over snapshots in the stage and significant modes.
    pub max_relative_error: f64,
    /// The same deviation divided by the elapsed stage time.
    pub per_unit_time: f64,
}

/// Offset `a` when `field = potential + a` on interior nodes.
pub fn constant_offset(field: &GridFunction, potential: &GridFunction) -> Option<f64> {
    let g = field.grid();
    let idx: Vec<usize> = (0..g.len()).filter(|&k| !g.is_boundary(k)).collect();
    let first = *idx.first()?;
    let a = field.values()[first] - potential.values()[first];
    let scale = field.max_abs().max(potential.max_abs()).max(1.0);
    idx.iter()
        .all(|&k| (field.values()[k] - potential.values()[k] - a).abs() <= 1e-10 * scale)
        .then_some(a)
}

pub fn fourier_trace(
    traj: &Trajectory,
    basis: &SpectralBasisND,
    m: usize,
    schedule: &ControlSchedule,
) -> Result<FourierTrace> {
    let m = m.min(basis.len());
    let coefficients = traj
        .snapshots
        .iter()
        .map(|s| basis.coefficients(s, m))
        .collect::<Result<Vec<_>>>()?;
    let potential = basis.potential();
    let lambdas = basis.eigenvalues();
    let mut law = Vec::new();
    for (si, stage) in schedule.stages().iter().enumerate() {
        let Some(a) = constant_offset(&stage.field, &potential) else {
            continue;
        };
        let start = if si == 0 { 0 } else { traj.stage_ends[si - 1] };
        let end = traj.stage_ends[si];
        let t_s = traj.times[start];
        let c0 = &coefficients[start];
        let mut worst = 0.0f64;
        let mut worst_rate = 0.0f64;
        for s in start + 1..=end {
            let dt = traj.times[s] - t_s;
            let pred: Vec<f64> = (0..m).map(|l| c0[l] * ((lambdas[l] + a) * dt).exp()).collect();
            let big = pred.iter().fold(0.0f64, |x, p| x.max(p.abs()));
            for l in 0..m {
                if pred[l].abs() > 1e-6 * big {
                    let e = (coefficients[s][l] - pred[l]).abs() / pred[l].abs();
                    worst = worst.max(e);
                    worst_rate = worst_rate.max(e / dt);
                }
            }
        }
        law.push(LawCheck {
            stage: si,
            shift: a,
            max_relative_error: worst,
            per_unit_time: worst_rate,
        });
    }
    Ok(FourierTrace {
        times: traj.times.clone(),
        coefficients,
        law,
    })
}

/// Energy-bound diagnostic for a static log control `v = v0 / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBoundReport {
    /// `∫_Ω (∫_0^T e^{v0 (T−τ)/T} Δu dτ)² dx` by trapezoidal time quadrature.
    pub lhs: f64,
    /// The same quantity through `‖u(T) − e^{v0} u0‖²`.
    pub lhs_identity: f64,
    /// `(T/2)∫|∇u0|² + (T/2) max|Δv0| T ∫u0²`.
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

fn discrete_laplacian(f: &GridFunction) -> Vec<f64> {
    let g = f.grid();
    let vals = f.values();
    let mut out = vec![0.0; g.len()];
    for k in 0..g.len() {
        if g.is_boundary(k) {
            continue;
        }
        let mut acc = 0.0;
        for axis in 0..g.dim() {
            let s = g.stride(axis);
            let dx = g.axis(axis).dx();
            acc += (vals[k - s] - 2.0 * vals[k] + vals[k + s]) / (dx * dx);
        }
        out[k] = acc;
    }
    out
}

fn gradient_energy(f: &GridFunction) -> f64 {
    let g = f.grid();
    let vals = f.values();
    let mut total = 0.0;
    for axis in 0..g.dim() {
        let s = g.stride(axis);
        let ax = g.axis(axis);
        for k in 0..g.len() {
            let idx = g.multi(k);
            if idx[axis] == ax.cells() {
                continue;
            }
            // cell in `axis`, trapezoid across the other axes
            let w: f64 = idx
                .iter()
                .enumerate()
                .map(|(a, &i)| if a == axis { ax.dx() } else { g.axis(a).weight(i) })
                .product();
            let d = (vals[k + s] - vals[k]) / ax.dx();
            total += w * d * d;
        }
    }
    total
}

/// Check the energy bound on a trajectory driven by `v0 / T` alone.
pub fn energy_bound_check(traj: &Trajectory, v0: &GridFunction, t_final: f64, slack: f64) -> Result<EnergyBoundReport> {
    let u0 = &traj.initial;
    u0.check_same_grid(v0)?;
    let g = u0.grid().clone();
    let n = g.len();
    let mut acc = vec![0.0; n];
    let k_end = traj
        .times
        .iter()
        .rposition(|&t| t <= t_final * (1.0 + 1e-12))
        .unwrap_or(0);
    for s in 0..=k_end {
        let lap = discrete_laplacian(&traj.snapshots[s]);
        let w = if s == 0 {
            0.5 * (traj.times[1.min(k_end)] - traj.times[0])
        } else if s == k_end {
            0.5 * (traj.times[s] - traj.times[s - 1])
        } else {
            0.5 * (traj.times[s + 1] - traj.times[s - 1])
        };
        let tau = traj.times[s];
        for k in 0..n {
            let e = (v0.values()[k] * (t_final - tau) / t_final).exp();
            acc[k] += w * e * lap[k];
        }
    }
    let weights = g.weights();
    let lhs: f64 = acc.iter().zip(&weights).map(|(a, w)| w * a * a).sum();
    let ut = &traj.snapshots[k_end];
    let resid: Vec<f64> = (0..n)
        .map(|k| ut.values()[k] - v0.values()[k].exp() * u0.values()[k])
        .collect();
    let lhs_identity: f64 = resid.iter().zip(&weights).map(|(r, w)| w * r * r).sum();
    let max_lap_v0 = discrete_laplacian(v0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let u0_sq = inner_product(u0, u0)?;
    let rhs = 0.5 * t_final * gradient_energy(u0) + 0.5 * t_final * max_lap_v0 * t_final * u0_sq;
    Ok(EnergyBoundReport {
        lhs,
        lhs_identity,
        rhs,
        slack,
        passed: lhs <= rhs * (1.0 + slack),
    })
}
