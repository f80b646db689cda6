//! Experiment configs and the runner behind the binary.
//!
//! A config is flat `key = value` text. `#` starts a comment. `[stage]` and
//! `[point]` open repeated sections whose keys apply until the next header.
//! See `configs/` for one annotated file per mode.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Result, SteerError};
use crate::grid::{fmt_sig, inner_product, l2_norm, relative_l2, BoxDomain, Grid, GridFunction, Interval};
use crate::pipeline::{build_plan, execute_plan, monotone_errors, sweep, PlanKind, PlanParams, SweepPoint};
use crate::sign::{detect_pattern, SignPattern};
use crate::solver::{energy_bound_check, simulate, uniform_times, ControlSchedule, SimOptions, Stage, Trajectory};
use crate::spectral::{assemble_nd, potential_from_target, solve_1d, SpectralBasis1D};
use crate::synthesis::{
    amplification_stage, check_mode_off_span, check_point_rank, mode_off_span_residual, point_rank_ratio,
    select_probe_point_with, solve_moment_cone, static_log_control, MomentProblemSpec, LOG_BAND,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eigensolve,
    Simulate,
    Moment,
    Steer,
    Sweep,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "eigensolve" => Mode::Eigensolve,
            "simulate" => Mode::Simulate,
            "moment" => Mode::Moment,
            "steer" => Mode::Steer,
            "sweep" => Mode::Sweep,
            other => {
                return Err(format!(
                    "unknown mode '{other}' (eigensolve, simulate, moment, steer, sweep)"
                ))
            }
        })
    }
}

/// Built-in state families. Every family vanishes on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `Π_i sin(k_i π t_i)`, `t_i` the unit coordinate on axis `i`.
    Sines(Vec<usize>),
    /// Tent profile with the listed zeros on `axis`, times `sin(π t)` on the
    /// other axes.
    Piecewise { axis: usize, zeros: Vec<f64>, sign: i8 },
    /// `Π_i sin(π t_i) · Π_j (z_j − x_axis)`.
    SineCut { axis: usize, zeros: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub family: Family,
    pub scale: f64,
    /// Multiplies by `1 + tilt · t_1`.
    pub tilt: f64,
}

impl StateDef {
    pub fn build(&self, grid: &Arc<Grid>) -> Result<GridFunction> {
        let dom = grid.domain();
        let unit = |p: &[f64], i: usize| (p[i] - dom.axis(i).a) / dom.axis(i).length();
        let f = match &self.family {
            Family::Sines(k) => {
                let k = k.clone();
                GridFunction::from_fn(grid.clone(), move |p| {
                    (0..p.len())
                        .map(|i| (k[i] as f64 * std::f64::consts::PI * unit(p, i)).sin())
                        .product()
                })
            }
            Family::Piecewise { axis, zeros, sign } => {
                let tent = crate::pipeline::zigzag(grid.axis(*axis), zeros, *sign)?;
                let ax = *axis;
                GridFunction::from_fn(grid.clone(), move |p| {
                    let others: f64 = (0..p.len())
                        .filter(|&i| i != ax)
                        .map(|i| (std::f64::consts::PI * unit(p, i)).sin())
                        .product();
                    tent.interpolate(&[p[ax]]) * others
                })
            }
            Family::SineCut { axis, zeros } => {
                let (ax, z) = (*axis, zeros.clone());
                GridFunction::from_fn(grid.clone(), move |p| {
                    let s: f64 = (0..p.len())
                        .map(|i| (std::f64::consts::PI * unit(p, i)).sin())
                        .product();
                    s * z.iter().map(|&c| c - p[ax]).product::<f64>()
                })
            }
        };
        let (scale, tilt) = (self.scale, self.tilt);
        let tilted = GridFunction::from_fn(grid.clone(), move |p| 1.0 + tilt * unit(p, 0));
        Ok(f.zip_with(&tilted, |a, b| scale * a * b)?.with_dirichlet())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Zero,
    Constant(f64),
    /// Potential of the flank profile with these zeros.
    Target(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    Constant(f64),
    /// Constant `ln(L)/τ`.
    Amplify(f64),
    /// Static log control from the current state to `target`.
    Log,
    /// Axis-1 basis potential plus a constant.
    Shift(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageDef {
    pub field: FieldSpec,
    pub duration: f64,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub key: String,
    pub cmp: Cmp,
    pub value: f64,
    pub line: usize,
}

impl Assertion {
    fn holds(&self, x: f64) -> bool {
        match self.cmp {
            Cmp::Lt => x < self.value,
            Cmp::Le => x <= self.value,
            Cmp::Gt => x > self.value,
            Cmp::Ge => x >= self.value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub domain: BoxDomain,
    pub cells: usize,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub initial: Option<StateDef>,
    pub target: Option<StateDef>,
    pub potential: PotentialSpec,
    pub modes: usize,
    pub dt: f64,
    /// Extra snapshots per stage in simulate mode.
    pub snapshots: usize,
    pub points: Vec<f64>,
    pub probe: Option<f64>,
    pub h_values: Vec<f64>,
    pub first_sign: i8,
    pub plan: PlanParams,
    pub stages: Vec<StageDef>,
    pub sweep: Vec<SweepPoint>,
    pub assertions: Vec<Assertion>,
    /// Line of each top-level key, for diagnostics.
    key_lines: Vec<(String, usize)>,
}

fn cfg_err(line: usize, message: impl Into<String>) -> SteerError {
    SteerError::Config {
        line,
        message: message.into(),
    }
}

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| cfg_err(line, format!("{key}: '{v}' is not a number")))
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| cfg_err(line, format!("{key}: '{v}' is not a non-negative integer")))
}

fn nums(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| num(line, key, t)).collect()
}

fn sign(line: usize, key: &str, v: &str) -> Result<i8> {
    match v.trim() {
        "1" | "+1" | "+" => Ok(1),
        "-1" | "-" => Ok(-1),
        other => Err(cfg_err(line, format!("{key}: sign must be +1 or -1, got '{other}'"))),
    }
}

fn parse_family(line: usize, key: &str, v: &str, axis: usize, sgn: i8) -> Result<Family> {
    let mut it = v.split_whitespace();
    let name = it.next().ok_or_else(|| cfg_err(line, format!("{key}: empty state")))?;
    let rest: Vec<&str> = it.collect();
    match name {
        "sines" => {
            let k = rest.iter().map(|t| count(line, key, t)).collect::<Result<Vec<_>>>()?;
            if k.is_empty() || k.contains(&0) {
                return Err(cfg_err(line, format!("{key}: sines needs positive mode numbers")));
            }
            Ok(Family::Sines(k))
        }
        "piecewise" => Ok(Family::Piecewise {
            axis,
            zeros: nums(line, key, &rest.join(" "))?,
            sign: sgn,
        }),
        "sine_cut" => Ok(Family::SineCut {
            axis,
            zeros: nums(line, key, &rest.join(" "))?,
        }),
        other => Err(cfg_err(
            line,
            format!("{key}: unknown state family '{other}' (sines, piecewise, sine_cut)"),
        )),
    }
}

fn parse_potential(line: usize, v: &str) -> Result<PotentialSpec> {
    let mut it = v.split_whitespace();
    match it.next() {
        Some("zero") => Ok(PotentialSpec::Zero),
        Some("constant") => Ok(PotentialSpec::Constant(num(
            line,
            "potential",
            &it.collect::<Vec<_>>().join(" "),
        )?)),
        Some("target") => Ok(PotentialSpec::Target(nums(
            line,
            "potential",
            &it.collect::<Vec<_>>().join(" "),
        )?)),
        _ => Err(cfg_err(
            line,
            format!("potential: expected zero | constant c | target z..., got '{v}'"),
        )),
    }
}

fn parse_field(line: usize, v: &str) -> Result<FieldSpec> {
    let mut it = v.split_whitespace();
    let head = it.next();
    let arg = it.collect::<Vec<_>>().join(" ");
    match head {
        Some("zero") => Ok(FieldSpec::Zero),
        Some("constant") => Ok(FieldSpec::Constant(num(line, "field", &arg)?)),
        Some("amplify") => Ok(FieldSpec::Amplify(num(line, "field", &arg)?)),
        Some("log") => Ok(FieldSpec::Log),
        Some("shift") => Ok(FieldSpec::Shift(num(line, "field", &arg)?)),
        _ => Err(cfg_err(
            line,
            format!("field: expected zero | constant c | amplify L | log | shift a, got '{v}'"),
        )),
    }
}

fn parse_assertion(line: usize, v: &str) -> Result<Assertion> {
    let t: Vec<&str> = v.split_whitespace().collect();
    if t.len() != 3 {
        return Err(cfg_err(line, format!("assert: expected 'key op value', got '{v}'")));
    }
    let cmp = match t[1] {
        "<" => Cmp::Lt,
        "<=" => Cmp::Le,
        ">" => Cmp::Gt,
        ">=" => Cmp::Ge,
        other => return Err(cfg_err(line, format!("assert: unknown comparison '{other}'"))),
    };
    Ok(Assertion {
        key: t[0].to_string(),
        cmp,
        value: num(line, "assert", t[2])?,
        line,
    })
}

fn state_key(k: &str) -> Option<(usize, &str)> {
    for (idx, prefix) in ["initial", "target"].iter().enumerate() {
        if k == *prefix {
            return Some((idx, ""));
        }
        if let Some(rest) = k.strip_prefix(prefix).and_then(|r| r.strip_prefix('_')) {
            return Some((idx, rest));
        }
    }
    None
}

#[derive(Default)]
struct RawState {
    spec: Option<(usize, String)>,
    scale: f64,
    tilt: f64,
    axis: usize,
    sign: i8,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut mode = None;
        let mut dim = 1usize;
        let mut box_vals: Option<(usize, Vec<f64>)> = None;
        let mut cells = 100usize;
        let mut out = None;
        let mut seed = None;
        let mut raw = [
            RawState {
                scale: 1.0,
                sign: 1,
                ..Default::default()
            },
            RawState {
                scale: 1.0,
                sign: 1,
                ..Default::default()
            },
        ];
        let mut potential = PotentialSpec::Zero;
        let mut modes = 5usize;
        let mut dt = 1e-3;
        let mut snapshots = 0usize;
        let mut points = Vec::new();
        let mut probe = None;
        let mut h_values = vec![0.01];
        let mut first_sign = 1i8;
        let mut plan = PlanParams::default();
        let mut stages: Vec<StageDef> = Vec::new();
        let mut sweep_pts: Vec<(usize, [Option<f64>; 4])> = Vec::new();
        let mut assertions = Vec::new();
        let mut key_lines = Vec::new();

        enum Section {
            Top,
            Stage,
            Point,
        }
        let mut section = Section::Top;
        let mut stage_raw: Option<(usize, Option<FieldSpec>, Option<f64>)> = None;
        let mut finish_stage = |st: &mut Option<(usize, Option<FieldSpec>, Option<f64>)>| -> Result<()> {
            if let Some((line, f, d)) = st.take() {
                let field = f.ok_or_else(|| cfg_err(line, "[stage] without field"))?;
                let duration = d.ok_or_else(|| cfg_err(line, "[stage] without duration"))?;
                stages.push(StageDef { field, duration, line });
            }
            Ok(())
        };

        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                finish_stage(&mut stage_raw)?;
                section = match content {
                    "[stage]" => {
                        stage_raw = Some((line, None, None));
                        Section::Stage
                    }
                    "[point]" => {
                        sweep_pts.push((line, [None; 4]));
                        Section::Point
                    }
                    other => return Err(cfg_err(line, format!("unknown section {other}"))),
                };
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| cfg_err(line, format!("expected 'key = value', got '{content}'")))?;
            if value.is_empty() {
                return Err(cfg_err(line, format!("{key}: missing value")));
            }
            match section {
                Section::Stage => {
                    let st = stage_raw.as_mut().expect("stage section open");
                    match key {
                        "field" => st.1 = Some(parse_field(line, value)?),
                        "duration" => st.2 = Some(num(line, key, value)?),
                        _ => return Err(cfg_err(line, format!("unknown stage key '{key}'"))),
                    }
                    continue;
                }
                Section::Point => {
                    let pt = &mut sweep_pts.last_mut().expect("point section open").1;
                    let slot = match key {
                        "h" => 0,
                        "t_star" => 1,
                        "t_shift" => 2,
                        "t_final" => 3,
                        _ => return Err(cfg_err(line, format!("unknown point key '{key}'"))),
                    };
                    pt[slot] = Some(num(line, key, value)?);
                    continue;
                }
                Section::Top => {}
            }
            key_lines.push((key.to_string(), line));
            if let Some((idx, field)) = state_key(key) {
                let r = &mut raw[idx];
                match field {
                    "" => r.spec = Some((line, value.to_string())),
                    "scale" => r.scale = num(line, key, value)?,
                    "tilt" => r.tilt = num(line, key, value)?,
                    "axis" => {
                        let a = count(line, key, value)?;
                        if a == 0 {
                            return Err(cfg_err(line, format!("{key}: axes are numbered from 1")));
                        }
                        r.axis = a - 1;
                    }
                    "sign" => r.sign = sign(line, key, value)?,
                    _ => return Err(cfg_err(line, format!("unknown key '{key}'"))),
                }
                continue;
            }
            match key {
                "mode" => mode = Some(value.parse::<Mode>().map_err(|m| cfg_err(line, m))?),
                "dim" => dim = count(line, key, value)?,
                "box" => box_vals = Some((line, nums(line, key, value)?)),
                "cells" => cells = count(line, key, value)?,
                "out" => out = Some(PathBuf::from(value)),
                "seed" => {
                    seed = Some(
                        value
                            .parse::<u64>()
                            .map_err(|_| cfg_err(line, "seed: expected an integer"))?,
                    )
                }
                "potential" => potential = parse_potential(line, value)?,
                "modes" => modes = count(line, key, value)?,
                "dt" => dt = num(line, key, value)?,
                "snapshots" => snapshots = count(line, key, value)?,
                "points" => points = nums(line, key, value)?,
                "probe" => probe = Some(num(line, key, value)?),
                "h" => h_values = nums(line, key, value)?,
                "first_sign" => first_sign = sign(line, key, value)?,
                "axis_modes" => plan.axis_modes = count(line, key, value)?,
                "basis_modes" => plan.modes = count(line, key, value)?,
                "t_star" => plan.t_star = num(line, key, value)?,
                "t_shift" => plan.t_shift = num(line, key, value)?,
                "t_final" => plan.t_final = num(line, key, value)?,
                "alpha" => plan.alpha = num(line, key, value)?,
                "amplify_fraction" => plan.amplify_fraction = num(line, key, value)?,
                "amplify_margin" => plan.amplify_margin = num(line, key, value)?,
                "floor" => plan.floor = num(line, key, value)?,
                "candidates" => plan.probe_candidates = count(line, key, value)?,
                "kappa" => plan.profile.kappa = num(line, key, value)?,
                "linear_cells" => plan.profile.linear_cells = num(line, key, value)?,
                "band_cells" => plan.band_cells = num(line, key, value)?,
                "max_halvings" => plan.max_halvings = count(line, key, value)?,
                "envelope" => plan.envelope = num(line, key, value)?,
                "assert" => assertions.push(parse_assertion(line, value)?),
                _ => return Err(cfg_err(line, format!("unknown key '{key}'"))),
            }
        }
        finish_stage(&mut stage_raw)?;

        let mode = mode.ok_or_else(|| cfg_err(0, "missing 'mode'"))?;
        if !(1..=2).contains(&dim) {
            return Err(cfg_err(0, format!("dim must be 1 or 2, got {dim}")));
        }
        let domain = match box_vals {
            None => BoxDomain::unit(dim),
            Some((line, v)) => {
                if v.len() != 2 * dim {
                    return Err(cfg_err(line, format!("box needs {} numbers for dim = {dim}", 2 * dim)));
                }
                let axes = v
                    .chunks(2)
                    .map(|c| Interval::new(c[0], c[1]))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| cfg_err(line, e.to_string()))?;
                BoxDomain::new(axes).map_err(|e| cfg_err(line, e.to_string()))?
            }
        };
        let mut states = [None, None];
        for (idx, r) in raw.iter().enumerate() {
            if let Some((line, spec)) = &r.spec {
                let family = parse_family(*line, ["initial", "target"][idx], spec, r.axis, r.sign)?;
                states[idx] = Some(StateDef {
                    family,
                    scale: r.scale,
                    tilt: r.tilt,
                });
            }
        }
        let [initial, target] = states;
        let sweep = sweep_pts
            .into_iter()
            .map(|(line, p)| match p {
                [Some(h), Some(t_star), Some(t_shift), Some(t_final)] => Ok(SweepPoint {
                    h,
                    t_star,
                    t_shift,
                    t_final,
                }),
                _ => Err(cfg_err(line, "[point] needs h, t_star, t_shift and t_final")),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentConfig {
            mode,
            domain,
            cells,
            out,
            seed,
            initial,
            target,
            potential,
            modes,
            dt,
            snapshots,
            points,
            probe,
            h_values,
            first_sign,
            plan,
            stages,
            sweep,
            assertions,
            key_lines,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn line_of(&self, key: &str) -> usize {
        self.key_lines.iter().find(|(k, _)| k == key).map_or(0, |(_, l)| *l)
    }

    /// Invariant violations, without running anything.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let dim = self.domain.dim();
        if self.cells < 16 {
            v.push(format!(
                "line {}: cells must be at least 16, got {}",
                self.line_of("cells"),
                self.cells
            ));
        }
        if !(self.dt > 0.0) {
            v.push(format!("line {}: dt must be positive", self.line_of("dt")));
        }
        let interior = |axis: usize, z: f64| self.domain.axis(axis).contains_interior(z);
        for (name, st) in [("initial", &self.initial), ("target", &self.target)] {
            let Some(st) = st else { continue };
            match &st.family {
                Family::Sines(k) => {
                    if k.len() != dim {
                        v.push(format!(
                            "line {}: {name}: sines needs {dim} mode numbers",
                            self.line_of(name)
                        ));
                    }
                }
                Family::Piecewise { axis, zeros, .. } | Family::SineCut { axis, zeros } => {
                    if *axis >= dim {
                        v.push(format!(
                            "line {}: {name}_axis {} exceeds dim {dim}",
                            self.line_of(name),
                            axis + 1
                        ));
                    } else {
                        for &z in zeros {
                            if !interior(*axis, z) {
                                v.push(format!(
                                    "line {}: {name}: zero {z} lies outside the box",
                                    self.line_of(name)
                                ));
                            }
                        }
                        if zeros.windows(2).any(|w| w[0] >= w[1]) {
                            v.push(format!("line {}: {name}: zeros must increase", self.line_of(name)));
                        }
                    }
                }
            }
            if st.scale == 0.0 {
                v.push(format!("line {}: {name}_scale must be nonzero", self.line_of(name)));
            }
        }
        if let PotentialSpec::Target(z) = &self.potential {
            for &x in z {
                if !interior(0, x) {
                    v.push(format!(
                        "line {}: potential zero {x} lies outside the box",
                        self.line_of("potential")
                    ));
                }
            }
        }
        for &p in &self.points {
            if !interior(0, p) {
                v.push(format!(
                    "line {}: point {p} lies outside the box",
                    self.line_of("points")
                ));
            }
        }
        let need = |v: &mut Vec<String>, ok: bool, what: &str| {
            if !ok {
                v.push(format!("mode {:?} needs {what}", self.mode));
            }
        };
        match self.mode {
            Mode::Eigensolve => need(
                &mut v,
                self.modes >= 1 && self.modes <= self.cells / 4,
                "1 ≤ modes ≤ cells/4",
            ),
            Mode::Simulate => {
                need(&mut v, self.initial.is_some(), "an initial state");
                need(&mut v, !self.stages.is_empty(), "at least one [stage]");
                for s in &self.stages {
                    if !(s.duration > 0.0) {
                        v.push(format!("line {}: stage duration must be positive", s.line));
                    }
                    if s.field == FieldSpec::Log && self.target.is_none() {
                        v.push(format!("line {}: a log stage needs a target state", s.line));
                    }
                    if let FieldSpec::Amplify(l) = s.field {
                        if l < 1.0 {
                            v.push(format!("line {}: amplification factor must be at least 1", s.line));
                        }
                    }
                }
            }
            Mode::Moment => {
                need(&mut v, dim == 1, "dim = 1");
                need(
                    &mut v,
                    !self.h_values.is_empty() && self.h_values.iter().all(|&h| h > 0.0),
                    "positive h values",
                );
                if let Some(s) = self.probe {
                    if !interior(0, s) {
                        v.push(format!(
                            "line {}: probe {s} lies outside the box",
                            self.line_of("probe")
                        ));
                    }
                }
            }
            Mode::Steer | Mode::Sweep => {
                need(
                    &mut v,
                    self.initial.is_some() && self.target.is_some(),
                    "initial and target states",
                );
                if self.mode == Mode::Sweep {
                    need(&mut v, !self.sweep.is_empty(), "at least one [point]");
                    for w in self.sweep.windows(2) {
                        if !(w[1].t_star <= w[0].t_star && w[1].t_shift > w[0].t_shift) {
                            v.push("sweep needs t_star non-increasing and t_shift increasing".into());
                        }
                    }
                }
            }
        }
        if self.plan.probe_candidates < 16 {
            v.push(format!(
                "line {}: candidates must be at least 16",
                self.line_of("candidates")
            ));
        }
        v
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::on_box(&self.domain, self.cells)?))
    }

    fn probe_offset(&self) -> f64 {
        self.seed.map_or(0.0, |s| StdRng::seed_from_u64(s).random::<f64>())
    }
}

/// One `key = value [pass|fail]` line.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub key: String,
    pub value: String,
    pub verdict: Option<bool>,
    numeric: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub lines: Vec<SummaryLine>,
}

impl Summary {
    pub fn value(&mut self, key: impl Into<String>, x: f64) {
        self.lines.push(SummaryLine {
            key: key.into(),
            value: fmt_sig(x),
            verdict: None,
            numeric: Some(x),
        });
    }

    pub fn text(&mut self, key: impl Into<String>, s: impl Into<String>) {
        self.lines.push(SummaryLine {
            key: key.into(),
            value: s.into(),
            verdict: None,
            numeric: None,
        });
    }

    pub fn check(&mut self, key: impl Into<String>, x: f64, ok: bool) {
        self.lines.push(SummaryLine {
            key: key.into(),
            value: fmt_sig(x),
            verdict: Some(ok),
            numeric: Some(x),
        });
    }

    pub fn flag(&mut self, key: impl Into<String>, ok: bool) {
        self.lines.push(SummaryLine {
            key: key.into(),
            value: ok.to_string(),
            verdict: Some(ok),
            numeric: None,
        });
    }

    pub fn get(&self, key: &str) -> Option<&SummaryLine> {
        self.lines.iter().find(|l| l.key == key)
    }

    /// Mark lines named by config assertions; a missing key fails.
    fn apply(&mut self, assertions: &[Assertion]) {
        for a in assertions {
            match self.lines.iter_mut().find(|l| l.key == a.key) {
                Some(l) => {
                    let ok = l.numeric.is_some_and(|x| a.holds(x));
                    l.verdict = Some(l.verdict.unwrap_or(true) && ok);
                }
                None => self.flag(format!("assert.{}.missing", a.key), false),
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.verdict != Some(false))
    }

    pub fn failures(&self) -> Vec<String> {
        self.lines
            .iter()
            .filter(|l| l.verdict == Some(false))
            .map(|l| l.key.clone())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            match l.verdict {
                Some(ok) => {
                    let _ = writeln!(s, "{} = {} [{}]", l.key, l.value, if ok { "pass" } else { "fail" });
                }
                None => {
                    let _ = writeln!(s, "{} = {}", l.key, l.value);
                }
            }
        }
        s
    }
}

/// Files produced by a run, written only after the computation succeeds.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, String)>,
    trajectories: Vec<(PathBuf, String, Trajectory)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<PathBuf>, body: String) {
        self.files.push((name.into(), body));
    }

    fn write(&self, out: &Path) -> Result<()> {
        fs::create_dir_all(out)?;
        for (name, body) in &self.files {
            let path = out.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, body)?;
        }
        for (dir, prefix, t) in &self.trajectories {
            t.write_snapshots(&out.join(dir), prefix)?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub out: PathBuf,
}

/// Validate, compute, write artifacts, then write `summary.txt` last.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(SteerError::InvalidArgument(problems.join("; ")));
    }
    let mut art = Artifacts::default();
    let mut summary = Summary::default();
    summary.text("mode", format!("{:?}", cfg.mode).to_lowercase());
    match cfg.mode {
        Mode::Eigensolve => run_eigensolve(cfg, &mut summary, &mut art)?,
        Mode::Simulate => run_simulate(cfg, &mut summary, &mut art)?,
        Mode::Moment => run_moment(cfg, &mut summary, &mut art)?,
        Mode::Steer => run_steer(cfg, &mut summary, &mut art)?,
        Mode::Sweep => run_sweep(cfg, &mut summary, &mut art)?,
    }
    summary.apply(&cfg.assertions);
    art.write(out)?;
    fs::write(out.join("summary.txt"), summary.to_text())?;
    Ok(RunOutcome {
        summary,
        out: out.to_path_buf(),
    })
}

fn axis_potential(cfg: &ExperimentConfig, grid: &Grid, axis: usize) -> Result<GridFunction> {
    let g = grid.axis(axis);
    if axis > 0 {
        return Ok(GridFunction::from_fn_1d(g, |_| 0.0));
    }
    match &cfg.potential {
        PotentialSpec::Zero => Ok(GridFunction::from_fn_1d(g, |_| 0.0)),
        PotentialSpec::Constant(c) => {
            let c = *c;
            Ok(GridFunction::from_fn_1d(g, move |_| c))
        }
        PotentialSpec::Target(z) => {
            let w = cfg.plan.profile.build(g, z)?;
            potential_from_target(&w, Some(cfg.plan.band_cells * g.dx()), None)
        }
    }
}

fn bases(cfg: &ExperimentConfig, grid: &Grid, m: usize) -> Result<Vec<SpectralBasis1D>> {
    (0..grid.dim())
        .map(|i| solve_1d(&axis_potential(cfg, grid, i)?, m))
        .collect()
}

fn gram_error(fs: &[GridFunction]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, f) in fs.iter().enumerate() {
        for (j, g) in fs.iter().enumerate() {
            let d = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner_product(f, g)? - d).abs());
        }
    }
    Ok(worst)
}

fn run_eigensolve(cfg: &ExperimentConfig, s: &mut Summary, art: &mut Artifacts) -> Result<()> {
    let grid = cfg.grid()?;
    let bs = bases(cfg, &grid, cfg.modes)?;
    for (i, b) in bs.iter().enumerate() {
        let ax = i + 1;
        for k in 1..=b.len() {
            s.value(format!("axis{ax}.lambda.{k}"), b.lambda(k));
            let zc = b.zeros(k).len();
            s.check(format!("axis{ax}.zero_count.{k}"), zc as f64, zc == k - 1);
        }
        let interlaced = (1..b.len()).all(|k| {
            let (lo, hi) = (b.zeros(k), b.zeros(k + 1));
            lo.iter().enumerate().all(|(j, &z)| hi[j] < z && z < hi[j + 1])
        });
        s.flag(format!("axis{ax}.interlaced"), interlaced);
        let ge = gram_error(b.eigenfunctions())?;
        s.check(format!("axis{ax}.orthonormality"), ge, ge <= 1e-8);
        art.add(format!("basis_axis{ax}.csv"), b.to_csv());
        for k in 1..=b.len() {
            art.add(format!("mode_axis{ax}_{k}.csv"), b.mode(k).to_csv());
        }
    }
    if grid.dim() > 1 {
        let nd = assemble_nd(&bs, cfg.modes)?;
        for (l, e) in nd.entries().iter().enumerate() {
            s.value(format!("lambda.{}", l + 1), e.lambda);
            let idx: Vec<String> = e.multi_index.iter().map(|k| k.to_string()).collect();
            s.text(format!("multi_index.{}", l + 1), idx.join(" "));
        }
        art.add("basis.csv", nd.to_csv());
    }
    Ok(())
}

fn run_simulate(cfg: &ExperimentConfig, s: &mut Summary, art: &mut Artifacts) -> Result<()> {
    let grid = cfg.grid()?;
    let u0 = cfg.initial.as_ref().expect("validated").build(&grid)?;
    let target = cfg.target.as_ref().map(|t| t.build(&grid)).transpose()?;
    let shift_basis = if cfg.stages.iter().any(|st| matches!(st.field, FieldSpec::Shift(_))) {
        Some(bases(cfg, &grid, 1)?)
    } else {
        None
    };
    let mut state = u0.clone();
    let mut clock = 0.0;
    art.add("initial.csv", u0.to_csv());
    for (i, st) in cfg.stages.iter().enumerate() {
        let label = format!("stage{}", i + 1);
        let stage = match &st.field {
            FieldSpec::Zero => Stage::new(GridFunction::zeros(grid.clone()), st.duration, &label)?,
            FieldSpec::Constant(c) => Stage::new(GridFunction::constant(grid.clone(), *c), st.duration, &label)?,
            FieldSpec::Amplify(l) => amplification_stage(&state, *l, st.duration)?,
            FieldSpec::Log => static_log_control(&state, target.as_ref().expect("validated"), st.duration, LOG_BAND)?,
            FieldSpec::Shift(a) => {
                let b = shift_basis.as_ref().expect("built above");
                let nd = assemble_nd(b, 1)?;
                Stage::new(nd.potential().map(|x| x + a), st.duration, &label)?
            }
        };
        let mut opts = SimOptions::new(cfg.dt);
        if cfg.snapshots > 0 {
            opts.record_times = uniform_times(st.duration, cfg.snapshots);
        }
        let traj = simulate(&state, &ControlSchedule::single(stage.clone()), &opts)?;
        let mp = traj.max_principle();
        let p = format!("stage.{}", i + 1);
        s.value(format!("{p}.start"), clock);
        s.value(format!("{p}.duration"), st.duration);
        s.value(format!("{p}.end_norm"), l2_norm(traj.final_state()));
        s.flag(format!("{p}.max_principle"), mp.passed());
        if st.field == FieldSpec::Log {
            let v0 = stage.field.scale(st.duration);
            let rep = energy_bound_check(&traj, &v0, st.duration, 0.1)?;
            s.value(format!("{p}.energy_lhs"), rep.lhs);
            s.check(format!("{p}.energy_rhs"), rep.rhs, rep.passed);
        }
        clock += st.duration;
        state = traj.final_state().clone();
        art.trajectories
            .push(("snapshots".into(), format!("stage{}_", i + 1), traj));
    }
    s.value("final_norm", l2_norm(&state));
    if let Some(t) = &target {
        s.value("final_error", relative_l2(&state, t)?);
    }
    if let Ok(p) = detect_pattern(&state, None) {
        s.text("final_counts", fmt_counts(&p));
    }
    art.add("final.csv", state.to_csv());
    Ok(())
}

fn fmt_counts(p: &SignPattern) -> String {
    p.counts().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

fn run_moment(cfg: &ExperimentConfig, s: &mut Summary, art: &mut Artifacts) -> Result<()> {
    let grid = cfg.grid()?;
    let k = cfg.points.len() + 1;
    let basis = solve_1d(&axis_potential(cfg, &grid, 0)?, cfg.modes.max(k + 1))?;
    let rank = point_rank_ratio(&basis, &cfg.points);
    s.value("point_rank.ratio", rank);
    s.text("point_rank", check_point_rank(&basis, &cfg.points).to_string());
    s.value("mode_off_span.residual", mode_off_span_residual(&basis, &cfg.points, k));
    s.text("mode_off_span", check_mode_off_span(&basis, &cfg.points, k).to_string());
    let mut rho = Vec::new();
    for (i, &h) in cfg.h_values.iter().enumerate() {
        let probe = match cfg.probe {
            Some(p) => p,
            None => {
                select_probe_point_with(
                    &basis,
                    &cfg.points,
                    k,
                    cfg.plan.probe_candidates,
                    h,
                    2.0 * grid.axis(0).dx(),
                    cfg.probe_offset(),
                )?
                .s
            }
        };
        let spec = MomentProblemSpec::new(0, basis.clone(), cfg.points.clone(), probe, h, cfg.first_sign)?;
        let sol = solve_moment_cone(&spec)?;
        let p = format!("h.{}", i + 1);
        s.value(format!("{p}.h"), h);
        s.value(format!("{p}.probe"), probe);
        s.value(format!("{p}.max_residual"), sol.max_residual());
        s.check(
            format!("{p}.payoff"),
            sol.payoff.abs(),
            (sol.payoff.abs() - 1.0).abs() < 1e-9,
        );
        s.flag(format!("{p}.sign_compatible"), sol.sign_compatible());
        rho.push(sol.max_residual());
        art.add(format!("moment_h{}.txt", i + 1), sol.to_text());
        art.add(format!("profile_h{}.csv", i + 1), sol.profile.to_csv());
    }
    for (i, w) in rho.windows(2).enumerate() {
        let r = w[1] / w[0];
        s.value(format!("residual_ratio.{}", i + 1), r);
    }
    Ok(())
}

fn plan_params(cfg: &ExperimentConfig) -> PlanParams {
    PlanParams {
        dt: cfg.dt,
        probe_offset: cfg.probe_offset(),
        ..cfg.plan.clone()
    }
}

fn report_lines(s: &mut Summary, prefix: &str, r: &crate::pipeline::SteeringReport) {
    s.value(format!("{prefix}final_error"), r.final_error);
    s.flag(format!("{prefix}pattern_match"), r.pattern_match);
    if let Some(c0) = r.c0 {
        s.value(format!("{prefix}c0"), c0);
    }
    if let Some(c) = &r.coupling {
        s.value(format!("{prefix}t_star"), c.t_star);
        s.value(format!("{prefix}coupling_residual"), c.residual);
        s.check(format!("{prefix}coupling_bound"), c.bound, c.bound <= c.envelope);
        s.value(format!("{prefix}coupling_envelope"), c.envelope);
    }
    for (name, ok) in &r.checks {
        if name != "coupling" && name != "final_pattern" {
            s.flag(format!("{prefix}{name}"), *ok);
        }
    }
}

fn run_steer(cfg: &ExperimentConfig, s: &mut Summary, art: &mut Artifacts) -> Result<()> {
    let grid = cfg.grid()?;
    let u0 = cfg.initial.as_ref().expect("validated").build(&grid)?;
    let u1 = cfg.target.as_ref().expect("validated").build(&grid)?;
    let plan = build_plan(&u0, &u1, &plan_params(cfg))?;
    s.text("plan", format!("{:?}", plan.kind));
    if let Some(t) = &plan.target {
        s.value("k_star", t.k_star() as f64);
        s.value("lambda_k_star", t.lambda);
        s.check("gap", t.gap, t.gap > 0.0);
    }
    for a in &plan.axes {
        if !a.moment.spec.points.is_empty() {
            let p = format!("axis{}.", a.axis + 1);
            s.value(format!("{p}moment_residual"), a.moment.max_residual());
            s.value(format!("{p}probe"), a.moment.spec.probe);
        }
    }
    let r = execute_plan(&plan)?;
    report_lines(s, "", &r);
    art.add("plan.txt", plan.to_text());
    art.add("report.txt", r.to_text());
    art.add("initial.csv", u0.to_csv());
    art.add("target.csv", u1.to_csv());
    art.add("final.csv", r.final_state.to_csv());
    if let Some(us) = &plan.u_star {
        art.add("u_star.csv", us.to_csv());
    }
    for (i, st) in r.stages.iter().enumerate() {
        art.add(format!("stage{}_end.csv", i + 1), st.end_state.to_csv());
    }
    if plan.kind == PlanKind::FourStep {
        if let Some(f) = &r.fourier {
            let mut csv = String::from("time");
            for l in 0..f.coefficients.first().map_or(0, Vec::len) {
                let _ = write!(csv, ",c{}", l + 1);
            }
            csv.push('\n');
            for (t, c) in f.times.iter().zip(&f.coefficients) {
                csv.push_str(&fmt_sig(*t));
                for x in c {
                    let _ = write!(csv, ",{}", fmt_sig(*x));
                }
                csv.push('\n');
            }
            art.add("fourier.csv", csv);
        }
    }
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, s: &mut Summary, art: &mut Artifacts) -> Result<()> {
    let grid = cfg.grid()?;
    let u0 = cfg.initial.as_ref().expect("validated").build(&grid)?;
    let u1 = cfg.target.as_ref().expect("validated").build(&grid)?;
    let reports = sweep(&u0, &u1, &plan_params(cfg), &cfg.sweep)?;
    let mut errors = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let prefix = format!("index.{}.", i + 1);
        match r {
            Ok(r) => {
                report_lines(s, &prefix, r);
                errors.push(r.final_error);
                art.add(format!("index{}/report.txt", i + 1), r.to_text());
                art.add(format!("index{}/final.csv", i + 1), r.final_state.to_csv());
            }
            Err(e) => {
                s.text(format!("{prefix}error"), e.to_string());
                s.flag(format!("{prefix}completed"), false);
            }
        }
    }
    if errors.len() == reports.len() {
        s.flag("errors_monotone", monotone_errors(&errors));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EIGEN: &str = "mode = eigensolve\ncells = 200\nmodes = 5\n";

    #[test]
    fn parses_minimal_eigensolve() {
        let c = ExperimentConfig::parse(EIGEN).unwrap();
        assert_eq!(c.mode, Mode::Eigensolve);
        assert_eq!(c.cells, 200);
        assert!(c.validate().is_empty());
    }

    #[test]
    fn unknown_mode_is_named() {
        let e = ExperimentConfig::parse("mode = fly\n").unwrap_err();
        assert!(matches!(e, SteerError::Config { line: 1, .. }));
        assert!(e.to_string().contains("unknown mode"));
    }

    #[test]
    fn zero_outside_box_is_named() {
        let c = ExperimentConfig::parse("mode = steer\ninitial = piecewise 0.3\ntarget = piecewise 1.4\n").unwrap();
        let v = c.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("line 3") && v[0].contains("outside the box"));
    }

    #[test]
    fn sections_and_assertions() {
        let text = "mode = simulate\ninitial = sines 1\n[stage]\nfield = constant 2\nduration = 0.1\n\
                    [stage]\nfield = zero\nduration = 0.05\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.stages.len(), 2);
        assert_eq!(c.stages[0].field, FieldSpec::Constant(2.0));
        assert!(ExperimentConfig::parse("mode = simulate\n[stage]\nduration = 1\n").is_err());
        let a = ExperimentConfig::parse("mode = eigensolve\nassert = x < 3\n").unwrap();
        assert_eq!(a.assertions[0].cmp, Cmp::Lt);
        assert!(ExperimentConfig::parse("mode = eigensolve\nassert = x ~ 3\n").is_err());
    }

    #[test]
    fn line_context_in_errors() {
        let e = ExperimentConfig::parse("mode = eigensolve\n\ncells = many\n").unwrap_err();
        assert!(matches!(e, SteerError::Config { line: 3, .. }));
        let e = ExperimentConfig::parse("mode = eigensolve\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, SteerError::Config { line: 2, .. }));
    }

    #[test]
    fn summary_format() {
        let mut s = Summary::default();
        s.value("a", 1.0 / 3.0);
        s.flag("b", true);
        s.check("c", 2.0, false);
        assert_eq!(s.to_text(), "a = 0.333333333333\nb = true [pass]\nc = 2 [fail]\n");
        assert!(!s.passed());
        assert_eq!(s.failures(), vec!["c".to_string()]);
        s.apply(&[Assertion {
            key: "a".into(),
            cmp: Cmp::Lt,
            value: 0.5,
            line: 1,
        }]);
        assert_eq!(s.get("a").unwrap().verdict, Some(true));
    }

    #[test]
    fn states_vanish_on_boundary() {
        let grid = Arc::new(Grid::unit(2, 20).unwrap());
        for fam in [
            Family::Sines(vec![1, 2]),
            Family::Piecewise {
                axis: 1,
                zeros: vec![0.5],
                sign: -1,
            },
            Family::SineCut {
                axis: 0,
                zeros: vec![0.3],
            },
        ] {
            let st = StateDef {
                family: fam,
                scale: 2.0,
                tilt: 0.1,
            };
            assert!(st.build(&grid).unwrap().vanishes_on_boundary());
        }
    }

    #[test]
    fn eigensolve_run_writes_summary_last() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::parse(EIGEN).unwrap();
        let out = run(&c, dir.path()).unwrap();
        assert!(out.summary.passed());
        let text = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(text.contains("axis1.lambda.1 = -9.8"));
        assert!(dir.path().join("basis_axis1.csv").exists());
    }
}
