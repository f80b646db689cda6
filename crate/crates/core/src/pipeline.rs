//! The four-step steering plan: pre-steer to a tensor moment profile,
//! relax onto the target eigenfunction under a shifted potential, then fix
//! the magnitude with a log control.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Result, SteerError};
use crate::grid::{fmt_sig, l2_norm, relative_l2, tensor_product_on, Grid, Grid1D, GridFunction};
use crate::profile::FlankProfile;
use crate::sign::{detect_pattern, same_pattern, SignPattern};
use crate::solver::{
    fourier_trace, simulate, ControlSchedule, FourierTrace, MaxPrincipleReport, SimOptions, Stage, Trajectory,
};
use crate::spectral::{
    assemble_nd, locate_target_mode, potential_from_target, solve_1d, SpectralBasis1D, SpectralBasisND, TargetMode,
};
use crate::synthesis::{
    amplification_stage, log_control_field, select_probe_point_with, shift_constant, solve_moment_cone,
    spectral_shift_schedule, MomentProblemSpec, MomentSolution, LOG_BAND,
};

#[derive(Debug, Clone)]
pub struct PlanParams {
    /// Eigenpairs per axis.
    pub axis_modes: usize,
    /// Eigenpairs kept in the assembled basis.
    pub modes: usize,
    pub h: f64,
    /// Pre-steering time `T_*` (the coupling rule may halve it).
    pub t_star: f64,
    /// Spectral stage length `T_i`.
    pub t_shift: f64,
    /// Magnitude adjustment time.
    pub t_final: f64,
    pub alpha: f64,
    /// Amplification lasts this fraction of the log stage it precedes.
    pub amplify_fraction: f64,
    /// `L = margin · max |target / u|` when amplification is needed.
    pub amplify_margin: f64,
    /// Relative size of the sign-carrying floor added to the moment profile.
    pub floor: f64,
    pub probe_candidates: usize,
    /// Shift of the probe candidate set, as a fraction of a slot.
    pub probe_offset: f64,
    pub profile: FlankProfile,
    /// Band half-width for the potential, in grid cells.
    pub band_cells: f64,
    pub dt: f64,
    /// Largest number of `T_*` halvings the coupling rule may try.
    pub max_halvings: usize,
    /// Coupling bound must fall below `envelope / (1 + index)`.
    pub envelope: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            axis_modes: 6,
            modes: 8,
            h: 0.01,
            t_star: 3e-7,
            t_shift: 4.0,
            t_final: 3e-5,
            alpha: 1.0,
            amplify_fraction: 0.25,
            amplify_margin: 1.25,
            floor: 1e-5,
            probe_candidates: 64,
            probe_offset: 0.0,
            profile: FlankProfile::default(),
            band_cells: crate::spectral::DEFAULT_BAND_CELLS,
            dt: 1e-3,
            max_halvings: 8,
            envelope: 0.5,
        }
    }
}

impl PlanParams {
    fn validate(&self) -> Result<()> {
        let pos = [
            ("h", self.h),
            ("t_star", self.t_star),
            ("t_shift", self.t_shift),
            ("t_final", self.t_final),
            ("alpha", self.alpha),
            ("amplify_fraction", self.amplify_fraction),
            ("floor", self.floor),
            ("dt", self.dt),
            ("envelope", self.envelope),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SteerError::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.amplify_margin < 1.0 {
            return Err(SteerError::InvalidArgument("amplify_margin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-axis ingredients of the plan.
#[derive(Debug, Clone)]
pub struct AxisPlan {
    pub axis: usize,
    /// Target profile `w_i`; `None` on axes without interfaces (`w_i ≡ 1`).
    pub target: Option<GridFunction>,
    pub potential: GridFunction,
    pub basis: SpectralBasis1D,
    pub moment: MomentSolution,
    /// Factor of `u_*` on this axis: the moment profile plus its floor, or
    /// the first eigenfunction when the axis has no interfaces.
    pub factor: GridFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    /// Equal patterns: one log control, amplified first if needed.
    Direct,
    /// Moment pre-steering, spectral shift, magnitude adjustment.
    FourStep,
}

#[derive(Debug, Clone)]
pub struct SteeringPlan {
    pub kind: PlanKind,
    pub u0: GridFunction,
    pub u1: GridFunction,
    pub pattern0: SignPattern,
    pub pattern1: SignPattern,
    pub params: PlanParams,
    pub axes: Vec<AxisPlan>,
    pub basis: Option<SpectralBasisND>,
    pub target: Option<TargetMode>,
    /// Pre-steering target `Π u_i` plus the sign-carrying floor.
    pub u_star: Option<GridFunction>,
}

fn max_dx(g: &Grid) -> f64 {
    g.axes().iter().fold(0.0f64, |m, a| m.max(a.dx()))
}

fn line_function(g: &Grid1D, values: Vec<f64>) -> Result<GridFunction> {
    let grid = Arc::new(Grid::new(vec![g.clone()])?);
    GridFunction::from_values(grid, values)
}

/// Detect both patterns and lay out the stages.
pub fn build_plan(u0: &GridFunction, u1: &GridFunction, params: &PlanParams) -> Result<SteeringPlan> {
    params.validate()?;
    u0.check_same_grid(u1)?;
    let grid = u0.grid().clone();
    let p0 = detect_pattern(u0, None)?;
    let p1 = detect_pattern(u1, None)?;
    if p0.counts() != p1.counts() {
        return Err(SteerError::PatternMismatch(format!(
            "interface counts differ: {:?} vs {:?}",
            p0.counts(),
            p1.counts()
        )));
    }
    if same_pattern(&p0, &p1, 2.0 * max_dx(&grid)) {
        return Ok(SteeringPlan {
            kind: PlanKind::Direct,
            u0: u0.clone(),
            u1: u1.clone(),
            pattern0: p0,
            pattern1: p1,
            params: params.clone(),
            axes: Vec::new(),
            basis: None,
            target: None,
            u_star: None,
        });
    }

    let mut axes = Vec::with_capacity(grid.dim());
    for i in 0..grid.dim() {
        let g1 = grid.axis(i);
        let zeros = p1.changes(i);
        let (target, potential) = if zeros.is_empty() {
            (None, GridFunction::from_fn_1d(g1, |_| 0.0))
        } else {
            let w = params.profile.build(g1, zeros)?;
            let v = potential_from_target(&w, Some(params.band_cells * g1.dx()), None)?;
            (Some(w), v)
        };
        let basis = solve_1d(&potential, params.axis_modes)?;
        let points = p0.changes(i).to_vec();
        let k = points.len() + 1;
        let fail = |detail: String| SteerError::AssumptionFailure { axis: i + 1, detail };
        let probe = select_probe_point_with(
            &basis,
            &points,
            k,
            params.probe_candidates,
            params.h,
            2.0 * g1.dx(),
            params.probe_offset,
        )
        .map_err(|e| fail(e.to_string()))?;
        // the product of the axis profiles carries first_sign once
        let sign = if i == 0 { p0.first_sign() } else { 1 };
        let spec = MomentProblemSpec::new(i, basis.clone(), points, probe.s, params.h, sign)
            .map_err(|e| fail(e.to_string()))?;
        let moment = solve_moment_cone(&spec).map_err(|e| fail(e.to_string()))?;
        let factor = if moment.spec.points.is_empty() {
            // the trivial moment problem: ω_1 > 0 and ∫ω_1 ω_1 = 1
            basis.mode(1).clone()
        } else {
            moment.profile.clone()
        };
        axes.push(AxisPlan {
            axis: i,
            target,
            potential,
            basis,
            moment,
            factor,
        });
    }
    let bases: Vec<SpectralBasis1D> = axes.iter().map(|a| a.basis.clone()).collect();
    let nd = assemble_nd(&bases, params.modes)?;
    // the target eigenfunction must carry u1's interfaces
    let target = locate_target_mode(&nd, &p1)?;

    let u_star = floored_product(&grid, &mut axes, params.floor)?;

    Ok(SteeringPlan {
        kind: PlanKind::FourStep,
        u0: u0.clone(),
        u1: u1.clone(),
        pattern0: p0,
        pattern1: p1,
        params: params.clone(),
        axes,
        basis: Some(nd),
        target: Some(target),
        u_star: Some(u_star),
    })
}

const FLOOR_TAPER_MIN: f64 = 0.2;

/// Unit-height sign carrier of an axis pattern: `±1` by cell, tapered to
/// `FLOOR_TAPER_MIN` near change points and the ends.
fn sign_carrier(spec: &MomentProblemSpec) -> Vec<f64> {
    let g = spec.basis.grid();
    let len = g.b() - g.a();
    g.nodes()
        .iter()
        .map(|&x| {
            let d = spec
                .points
                .iter()
                .chain([g.a(), g.b()].iter())
                .fold(f64::INFINITY, |m, &p| m.min((x - p).abs()));
            spec.cell_sign(x) as f64 * (d / (0.05 * len)).clamp(FLOOR_TAPER_MIN, 1.0)
        })
        .collect()
}

/// `u_* = Π_i (u_i + ε_i · carrier_i)` with the floor filling the zeros of
/// each moment profile so that the log control toward `u_*` is defined
/// everywhere. The floor starts at `floor` (split evenly in the exponent
/// across the floored axes) and doubles until every interior node of `u_*`
/// clears four times the log band.
fn floored_product(grid: &Arc<Grid>, axes: &mut [AxisPlan], floor: f64) -> Result<GridFunction> {
    let floored: Vec<usize> = (0..axes.len())
        .filter(|&i| !axes[i].moment.spec.points.is_empty())
        .collect();
    let mut eps = floor.powf(1.0 / floored.len().max(1) as f64);
    let carriers: Vec<Vec<f64>> = axes.iter().map(|a| sign_carrier(&a.moment.spec)).collect();
    for _ in 0..40 {
        for &i in &floored {
            let p = &axes[i].moment.profile;
            let m = p.max_abs();
            let vals: Vec<f64> = p
                .values()
                .iter()
                .zip(&carriers[i])
                .map(|(&u, &c)| if u != 0.0 { u } else { eps * m * c })
                .collect();
            axes[i].factor = GridFunction::from_values(p.grid().clone(), vals)?.with_dirichlet();
        }
        let factors: Vec<GridFunction> = axes.iter().map(|a| a.factor.clone()).collect();
        let u = tensor_product_on(grid, &factors)?;
        let m = u.max_abs();
        let low = (0..u.len())
            .filter(|&k| !grid.is_boundary(k))
            .map(|k| u.values()[k].abs())
            .fold(f64::INFINITY, f64::min);
        if low > 4.0 * LOG_BAND * m || floored.is_empty() {
            return Ok(u.with_dirichlet());
        }
        eps *= 2.0;
    }
    Err(SteerError::InvalidArgument("floor cannot clear the log band".into()))
}

impl SteeringPlan {
    /// Label and nominal duration of each planned stage; amplification
    /// stages are decided at run time and listed as optional.
    pub fn outline(&self) -> Vec<(String, f64)> {
        let p = &self.params;
        let amp = |t: f64| ("amplify (if needed)".to_string(), p.amplify_fraction * t);
        match self.kind {
            PlanKind::Direct => vec![amp(p.t_final), ("log-control".into(), p.t_final)],
            PlanKind::FourStep => vec![
                amp(p.t_star),
                ("log-control to moment profile".into(), p.t_star),
                ("spectral-shift".into(), p.t_shift),
                amp(p.t_final),
                ("log-control to target".into(), p.t_final),
            ],
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {:?}", self.kind);
        let _ = writeln!(s, "dim = {}", self.u0.grid().dim());
        let _ = writeln!(s, "shape = {:?}", self.u0.grid().shape());
        for (tag, p) in [("initial", &self.pattern0), ("target", &self.pattern1)] {
            for line in p.to_string().lines() {
                let _ = writeln!(s, "{tag}.{line}");
            }
        }
        if let Some(t) = &self.target {
            let _ = writeln!(s, "k_star = {}", t.k_star());
            let _ = writeln!(s, "k_star_index = {:?}", t.multi_index);
            let _ = writeln!(s, "lambda_k_star = {}", fmt_sig(t.lambda));
            let _ = writeln!(s, "gap = {}", fmt_sig(t.gap));
            let _ = writeln!(s, "lead = {}", fmt_sig(t.lead));
        }
        for a in &self.axes {
            let _ = writeln!(s, "[axis {}]", a.axis + 1);
            let _ = writeln!(s, "max_potential = {}", fmt_sig(a.potential.max_abs()));
            let lam: Vec<String> = a.basis.eigenvalues().iter().map(|&l| fmt_sig(l)).collect();
            let _ = writeln!(s, "eigenvalues = {}", lam.join(" "));
            s.push_str(&a.moment.to_text());
        }
        let _ = writeln!(s, "[stages]");
        for (label, t) in self.outline() {
            let _ = writeln!(s, "{label} = {}", fmt_sig(t));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct StageRecord {
    pub label: String,
    pub start: f64,
    pub duration: f64,
    pub end_state: GridFunction,
    /// Relative L² distance to the state this stage aims at, if any.
    pub target_distance: Option<f64>,
    pub max_principle: MaxPrincipleReport,
}

#[derive(Debug, Clone)]
pub struct CouplingRecord {
    pub t_star: f64,
    pub halvings: usize,
    /// `‖u(T_*) − u_*‖`.
    pub residual: f64,
    /// `(k_* − 1) e^{(λ_1 − λ_{k_*} + a) T_i} ‖r‖`.
    pub bound: f64,
    pub envelope: f64,
    /// Coefficients of `u(T_*)` on modes above `k_*`.
    pub forbidden: Vec<f64>,
    /// The same coefficients of `u_*` (the `O(h)` moment residuals).
    pub star_forbidden: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SteeringReport {
    pub kind: PlanKind,
    pub stages: Vec<StageRecord>,
    pub schedule: ControlSchedule,
    pub fourier: Option<FourierTrace>,
    pub coupling: Option<CouplingRecord>,
    /// `∫ u(T_*) ω_{k_*}` and the resulting shift constant.
    pub c0: Option<f64>,
    pub shift: Option<f64>,
    pub final_state: GridFunction,
    pub final_error: f64,
    pub final_pattern: Option<SignPattern>,
    pub pattern_match: bool,
    /// Named invariant verdicts.
    pub checks: Vec<(String, bool)>,
    pub trajectories: Vec<Trajectory>,
}

impl SteeringReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {:?}", self.kind);
        for (i, st) in self.stages.iter().enumerate() {
            let _ = writeln!(s, "[stage {}]", i + 1);
            let _ = writeln!(s, "label = {}", st.label);
            let _ = writeln!(s, "start = {}", fmt_sig(st.start));
            let _ = writeln!(s, "duration = {}", fmt_sig(st.duration));
            let _ = writeln!(s, "end_norm = {}", fmt_sig(l2_norm(&st.end_state)));
            if let Some(d) = st.target_distance {
                let _ = writeln!(s, "target_distance = {}", fmt_sig(d));
            }
            let _ = writeln!(s, "max_principle = {}", st.max_principle.passed());
        }
        if let Some(c) = &self.coupling {
            let _ = writeln!(s, "[coupling]");
            let _ = writeln!(s, "t_star = {}", fmt_sig(c.t_star));
            let _ = writeln!(s, "halvings = {}", c.halvings);
            let _ = writeln!(s, "residual = {}", fmt_sig(c.residual));
            let _ = writeln!(s, "bound = {}", fmt_sig(c.bound));
            let _ = writeln!(s, "envelope = {}", fmt_sig(c.envelope));
            let f: Vec<String> = c.forbidden.iter().map(|&x| fmt_sig(x)).collect();
            let _ = writeln!(s, "forbidden = {}", f.join(" "));
            let f: Vec<String> = c.star_forbidden.iter().map(|&x| fmt_sig(x)).collect();
            let _ = writeln!(s, "star_forbidden = {}", f.join(" "));
        }
        let _ = writeln!(s, "[result]");
        if let Some(c0) = self.c0 {
            let _ = writeln!(s, "c0 = {}", fmt_sig(c0));
        }
        if let Some(a) = self.shift {
            let _ = writeln!(s, "shift = {}", fmt_sig(a));
        }
        let _ = writeln!(s, "final_error = {}", fmt_sig(self.final_error));
        let _ = writeln!(s, "pattern_match = {}", self.pattern_match);
        for (name, ok) in &self.checks {
            let _ = writeln!(s, "check.{name} = {ok}");
        }
        s
    }
}

/// Accumulates stages as they run.
struct Runner<'a> {
    opts: SimOptions,
    params: &'a PlanParams,
    clock: f64,
    state: GridFunction,
    stages: Vec<StageRecord>,
    schedule: ControlSchedule,
    trajectories: Vec<Trajectory>,
}

impl<'a> Runner<'a> {
    fn new(u0: &GridFunction, params: &'a PlanParams) -> Self {
        Runner {
            opts: SimOptions::new(params.dt),
            params,
            clock: 0.0,
            state: u0.clone(),
            stages: Vec::new(),
            schedule: ControlSchedule::new(),
            trajectories: Vec::new(),
        }
    }

    fn run(&mut self, stage: Stage, target: Option<&GridFunction>) -> Result<()> {
        let sched = ControlSchedule::single(stage.clone());
        let traj = simulate(&self.state, &sched, &self.opts).map_err(|e| match e {
            SteerError::BlowUp { time, norm, .. } => SteerError::BlowUp {
                stage: stage.label.clone(),
                time: self.clock + time,
                norm,
            },
            other => other,
        })?;
        let end = traj.final_state().clone();
        let target_distance = match target {
            Some(t) => Some(relative_l2(&end, t)?),
            None => None,
        };
        self.stages.push(StageRecord {
            label: stage.label.clone(),
            start: self.clock,
            duration: stage.duration,
            end_state: end.clone(),
            target_distance,
            max_principle: traj.max_principle(),
        });
        self.clock += stage.duration;
        self.state = end;
        self.schedule.push(stage)?;
        self.trajectories.push(traj);
        Ok(())
    }

    /// Amplify if `|target| > |u|` somewhere on the retained set, then
    /// apply the lenient log control over `t`.
    fn steer_to(&mut self, target: &GridFunction, t: f64, label: &str) -> Result<()> {
        let ratio = max_ratio(&self.state, target)?;
        if ratio >= 1.0 {
            let l = self.params.amplify_margin * ratio;
            let mut st = amplification_stage(&self.state, l, self.params.amplify_fraction * t)?;
            st.label = format!("amplify before {label}");
            self.run(st, None)?;
        }
        let f = log_control_field(&self.state, target, LOG_BAND)?;
        let st = Stage::new(f.v0.scale(1.0 / t), t, label)?;
        self.run(st, Some(target))
    }

    fn rewind(&mut self, stages: usize, state: GridFunction, clock: f64, sched: ControlSchedule) {
        self.stages.truncate(stages);
        self.trajectories.truncate(stages);
        self.state = state;
        self.clock = clock;
        self.schedule = sched;
    }
}

/// `max |target / u|` over nodes retained by the log-control band.
fn max_ratio(u: &GridFunction, target: &GridFunction) -> Result<f64> {
    u.check_same_grid(target)?;
    let (mu, mt) = (u.max_abs(), target.max_abs());
    let mut r = 0.0f64;
    for (&a, &b) in u.values().iter().zip(target.values()) {
        if a.abs() > LOG_BAND * mu && b.abs() > LOG_BAND * mt && a.signum() == b.signum() {
            r = r.max(b / a);
        }
    }
    Ok(r)
}

/// Run the plan with the coupling envelope of sweep index 0.
pub fn execute_plan(plan: &SteeringPlan) -> Result<SteeringReport> {
    execute_indexed(plan, 0)
}

fn execute_indexed(plan: &SteeringPlan, index: usize) -> Result<SteeringReport> {
    let p = &plan.params;
    let mut run = Runner::new(&plan.u0, p);
    let mut coupling = None;
    let mut c0_rec = None;
    let mut shift_rec = None;
    let mut fourier = None;

    match plan.kind {
        PlanKind::Direct => run.steer_to(&plan.u1, p.t_final, "log-control")?,
        PlanKind::FourStep => {
            let basis = plan.basis.as_ref().expect("four-step plan has a basis");
            let target = plan.target.as_ref().expect("four-step plan has a target");
            let u_star = plan.u_star.as_ref().expect("four-step plan has u_star");
            let omega = basis.function(target.position);
            let envelope = p.envelope / (1 + index) as f64;

            // Step 2 with T_* halved until the coupling bound clears the envelope
            let mut t_star = p.t_star;
            let mut halvings = 0;
            let (c0, shift) = loop {
                run.steer_to(u_star, t_star, "log-control to moment profile")?;
                let r = run.state.sub(u_star)?;
                let residual = l2_norm(&r);
                let c0 = crate::grid::inner_product(&run.state, omega)?;
                let a = shift_constant(c0.abs(), p.alpha, p.t_shift)?;
                let growth = ((target.lead + a) * p.t_shift).exp();
                let bound = target.position as f64 * growth * residual;
                coupling = Some(CouplingRecord {
                    t_star,
                    halvings,
                    residual,
                    bound,
                    envelope,
                    forbidden: basis.coefficients(&run.state, target.position)?,
                    star_forbidden: basis.coefficients(u_star, target.position)?,
                });
                if bound <= envelope {
                    break (c0, a);
                }
                if halvings >= p.max_halvings {
                    return Err(SteerError::CouplingInfeasible {
                        index,
                        best: bound,
                        envelope,
                    });
                }
                halvings += 1;
                t_star *= 0.5;
                run.rewind(0, plan.u0.clone(), 0.0, ControlSchedule::new());
            };
            c0_rec = Some(c0);
            shift_rec = Some(shift);

            // Step 3: the orientation of ω_{k*} follows the sign of c0
            let orient = c0.signum();
            let v0 = basis.potential();
            let st = spectral_shift_schedule(&v0, target, c0.abs(), p.alpha, p.t_shift)?;
            let aim = omega.scale(orient * p.alpha);
            run.opts.record_times = crate::solver::uniform_times(p.t_shift, 8);
            run.run(st.clone(), Some(&aim))?;
            run.opts.record_times.clear();
            let traced = run.trajectories.last().expect("stage just ran");
            fourier = Some(fourier_trace(traced, basis, p.modes, &ControlSchedule::single(st))?);

            // Step 4
            run.steer_to(&plan.u1, p.t_final, "log-control to target")?;
        }
    }

    let final_state = run.state.clone();
    let final_error = relative_l2(&final_state, &plan.u1)?;
    let final_pattern = detect_pattern(&final_state, None).ok();
    let dx2 = 2.0 * max_dx(final_state.grid());
    let pattern_match = final_pattern
        .as_ref()
        .is_some_and(|fp| same_pattern(fp, &plan.pattern1, dx2));
    let mut checks = vec![
        (
            "max_principle".to_string(),
            run.stages.iter().all(|s| s.max_principle.passed()),
        ),
        ("final_pattern".to_string(), pattern_match),
    ];
    if let Some(c) = &coupling {
        checks.push(("coupling".into(), c.bound <= c.envelope));
        // |c_j(u(T_*))| ≤ |c_j(u_*)| + ‖r‖ for unit ω_j
        let ok = c
            .forbidden
            .iter()
            .zip(&c.star_forbidden)
            .all(|(f, s)| f.abs() <= s.abs() + c.residual * (1.0 + 1e-9));
        checks.push(("forbidden_below_residual".into(), ok));
    }
    Ok(SteeringReport {
        kind: plan.kind,
        stages: run.stages,
        schedule: run.schedule,
        fourier,
        coupling,
        c0: c0_rec,
        shift: shift_rec,
        final_state,
        final_error,
        final_pattern,
        pattern_match,
        checks,
        trajectories: run.trajectories,
    })
}

/// One sweep index: `T_*` shrinking, `T_i` growing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub h: f64,
    pub t_star: f64,
    pub t_shift: f64,
    pub t_final: f64,
}

/// Build and run one plan per sweep point, in parallel. Index `i` must
/// meet the coupling envelope `envelope / (1 + i)`.
pub fn sweep(
    u0: &GridFunction,
    u1: &GridFunction,
    template: &PlanParams,
    points: &[SweepPoint],
) -> Result<Vec<Result<SteeringReport>>> {
    if points.is_empty() {
        return Err(SteerError::InvalidArgument("empty sweep".into()));
    }
    for w in points.windows(2) {
        if !(w[1].t_star <= w[0].t_star && w[1].t_shift > w[0].t_shift) {
            return Err(SteerError::InvalidArgument(
                "sweep needs T_* non-increasing and T_i increasing".into(),
            ));
        }
    }
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, pt)| {
            let params = PlanParams {
                h: pt.h,
                t_star: pt.t_star,
                t_shift: pt.t_shift,
                t_final: pt.t_final,
                ..template.clone()
            };
            let plan = build_plan(u0, u1, &params)?;
            execute_indexed(&plan, i)
        })
        .collect())
}

/// Final errors non-increasing, allowing one rise of at most 10 %.
pub fn monotone_errors(errors: &[f64]) -> bool {
    let mut slips = 0;
    for w in errors.windows(2) {
        if w[1] > w[0] {
            if w[1] > 1.1 * w[0] {
                return false;
            }
            slips += 1;
        }
    }
    slips <= 1
}

/// Convenience: the piecewise-linear "tent" state with the given zeros,
/// `first_sign` in the first cell and unit height.
pub fn zigzag(grid: &Grid1D, zeros: &[f64], first_sign: i8) -> Result<GridFunction> {
    let mut pts = vec![grid.a()];
    pts.extend_from_slice(zeros);
    pts.push(grid.b());
    if pts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SteerError::InvalidArgument(
            "zeros must be interior and increasing".into(),
        ));
    }
    let vals = grid
        .nodes()
        .iter()
        .map(|&x| {
            let j = pts.windows(2).position(|w| x <= w[1]).unwrap_or(pts.len() - 2);
            let (a, b) = (pts[j], pts[j + 1]);
            let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            first_sign as f64 * s * (1.0 - (2.0 * t - 1.0).abs())
        })
        .collect();
    Ok(line_function(grid, vals)?.with_dirichlet())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn state(n: usize, zero: f64) -> GridFunction {
        let g = Grid1D::unit(n).unwrap();
        GridFunction::from_fn_1d(&g, |x| (PI * x).sin() * (zero - x)).with_dirichlet()
    }

    #[test]
    fn mismatched_counts_rejected() {
        let g = Grid1D::unit(100).unwrap();
        let a = zigzag(&g, &[0.5], 1).unwrap();
        let b = zigzag(&g, &[0.3, 0.6], 1).unwrap();
        assert!(matches!(
            build_plan(&a, &b, &PlanParams::default()),
            Err(SteerError::PatternMismatch(_))
        ));
    }

    #[test]
    fn same_pattern_is_direct() {
        let u0 = state(100, 0.4).scale(2.0);
        let u1 = state(100, 0.4);
        let plan = build_plan(&u0, &u1, &PlanParams::default()).unwrap();
        assert_eq!(plan.kind, PlanKind::Direct);
        let errs: Vec<f64> = [1e-3, 3e-4, 1e-4]
            .iter()
            .map(|&t| {
                let p = PlanParams {
                    t_final: t,
                    ..PlanParams::default()
                };
                let plan = build_plan(&u0, &u1, &p).unwrap();
                let r = execute_plan(&plan).unwrap();
                assert_eq!(r.stages.len(), 1);
                r.final_error
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn four_step_plan_layout() {
        let u0 = state(200, 0.3);
        let u1 = state(200, 0.6);
        let plan = build_plan(&u0, &u1, &PlanParams::default()).unwrap();
        assert_eq!(plan.kind, PlanKind::FourStep);
        let t = plan.target.as_ref().unwrap();
        assert_eq!(t.multi_index, vec![2]);
        assert!(t.gap > 0.0);
        let us = plan.u_star.as_ref().unwrap();
        let p = detect_pattern(us, None).unwrap();
        assert!(same_pattern(&p, &plan.pattern0, 0.02));
        assert_eq!(plan.outline().len(), 5);
        assert!(plan.to_text().contains("k_star = 2"));
    }

    #[test]
    fn zigzag_shape() {
        let g = Grid1D::unit(10).unwrap();
        let z = zigzag(&g, &[0.5], -1).unwrap();
        assert_eq!(z.values()[0], 0.0);
        assert!((z.values()[2] + 0.8).abs() < 1e-12);
        assert!((z.values()[7] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn monotone_rule() {
        assert!(monotone_errors(&[0.3, 0.2, 0.1]));
        assert!(monotone_errors(&[0.3, 0.31, 0.1]));
        assert!(!monotone_errors(&[0.3, 0.5, 0.1]));
        assert!(!monotone_errors(&[0.3, 0.31, 0.32]));
    }

    #[test]
    fn sweep_rejects_bad_sequences() {
        let u0 = state(64, 0.3);
        let pts = [
            SweepPoint {
                h: 0.02,
                t_star: 1e-6,
                t_shift: 4.0,
                t_final: 1e-4,
            },
            SweepPoint {
                h: 0.02,
                t_star: 1e-6,
                t_shift: 2.0,
                t_final: 1e-4,
            },
        ];
        assert!(sweep(&u0, &u0, &PlanParams::default(), &pts).is_err());
    }
}
