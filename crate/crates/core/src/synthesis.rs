//! Control construction: static log controls, the amplification stage,
//! the spectral shift stage, and the moment problem on a cone.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SteerError};
use crate::grid::{fmt_sig, Grid1D, GridFunction};
use crate::sign::{detect_pattern, same_pattern};
use crate::solver::Stage;
use crate::spectral::{SpectralBasis1D, TargetMode};

/// Nodes with `|u| ≤ LOG_BAND · max|u|` are left out of the log control.
pub const LOG_BAND: f64 = 1e-6;

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// Gap below which the spectral shift is refused.
pub const GAP_TOL: f64 = 1e-9;

/// `ln(u1/u0)` on the retained set and the bookkeeping around it.
#[derive(Debug, Clone)]
pub struct LogField {
    pub v0: GridFunction,
    pub retained: usize,
    /// Nodes zeroed because of the band or a sign mismatch.
    pub exceptional: usize,
    /// Retained nodes where `|u1| > |u0|`, i.e. `v0 > 0`.
    pub violations: usize,
    pub max_v0: f64,
}

impl LogField {
    pub fn violation_fraction(&self) -> f64 {
        if self.retained == 0 {
            0.0
        } else {
            self.violations as f64 / self.retained as f64
        }
    }
}

/// `v0 = ln(u1/u0)` where both states clear the relative band and agree in
/// sign; `0` on the rest (the exceptional set).
pub fn log_control_field(u0: &GridFunction, u1: &GridFunction, band: f64) -> Result<LogField> {
    u0.check_same_grid(u1)?;
    let (m0, m1) = (u0.max_abs(), u1.max_abs());
    let g = u0.grid();
    let mut v = vec![0.0; u0.len()];
    let (mut retained, mut exceptional, mut violations) = (0, 0, 0);
    let mut max_v0 = f64::NEG_INFINITY;
    for k in 0..u0.len() {
        if g.is_boundary(k) {
            continue;
        }
        let (a, b) = (u0.values()[k], u1.values()[k]);
        if a.abs() <= band * m0 || b.abs() <= band * m1 || a.signum() != b.signum() {
            exceptional += 1;
            continue;
        }
        let r = (b / a).ln();
        retained += 1;
        if r > 1e-12 {
            violations += 1;
        }
        max_v0 = max_v0.max(r);
        v[k] = r;
    }
    Ok(LogField {
        v0: GridFunction::from_values(g.clone(), v)?,
        retained,
        exceptional,
        violations,
        max_v0: if retained == 0 { 0.0 } else { max_v0 },
    })
}

/// The static log control `v = v0 / T` over `(0, T)`.
///
/// Requires matching sign patterns and `|u1| ≤ |u0|` on the retained set;
/// otherwise the caller has to amplify first.
pub fn static_log_control(u0: &GridFunction, u1: &GridFunction, t: f64, band: f64) -> Result<Stage> {
    let dx = u0.grid().axes().iter().fold(0.0f64, |m, a| m.max(a.dx()));
    let (p0, p1) = (detect_pattern(u0, None)?, detect_pattern(u1, None)?);
    if !same_pattern(&p0, &p1, 2.0 * dx) {
        return Err(SteerError::PatternMismatch(format!(
            "log control needs equal sign patterns:\n{p0}vs\n{p1}"
        )));
    }
    let f = log_control_field(u0, u1, band)?;
    if f.violations > 0 {
        return Err(SteerError::TargetExceedsState {
            fraction: f.violation_fraction(),
        });
    }
    Stage::new(f.v0.scale(1.0 / t), t, "log-control")
}

/// Constant control `m = ln(L) / t_star` over `(0, t_star)`.
pub fn amplification_stage(u0: &GridFunction, l: f64, t_star: f64) -> Result<Stage> {
    if !(l >= 1.0 && l.is_finite()) {
        return Err(SteerError::InvalidArgument(format!(
            "amplification factor must be at least 1, got {l}"
        )));
    }
    if !(t_star > 0.0) {
        return Err(SteerError::InvalidArgument("t_star must be positive".into()));
    }
    let m = l.ln() / t_star;
    Stage::new(GridFunction::constant(u0.grid().clone(), m), t_star, "amplify")
}

/// `a = ln(α / c0) / T`.
pub fn shift_constant(c0: f64, alpha: f64, t: f64) -> Result<f64> {
    if !(c0 > 0.0) {
        return Err(SteerError::WrongSignCoefficient { c0 });
    }
    if !(alpha > 0.0) || !(t > 0.0) {
        return Err(SteerError::InvalidArgument("alpha and T must be positive".into()));
    }
    Ok((alpha / c0).ln() / t)
}

/// Stage `v0 − λ_{k*} + a` over `(0, T)`; with `c0 = ∫ u ω_{k*}` the
/// `k_*` coefficient reaches `α` at `T` in the eigen-expansion.
pub fn spectral_shift_schedule(v0: &GridFunction, target: &TargetMode, c0: f64, alpha: f64, t: f64) -> Result<Stage> {
    if !(target.gap > GAP_TOL * target.lambda.abs().max(1.0)) {
        return Err(SteerError::DegenerateGap { gap: target.gap });
    }
    let a = shift_constant(c0, alpha, t)?;
    let shift = a - target.lambda;
    Stage::new(v0.map(|x| x + shift), t, "spectral-shift")
}

// ---------------------------------------------------------------------------
// moment problem

/// Integral over `[lo, hi]` of the piecewise-linear interpolant of `f`.
pub fn segment_integral(f: &GridFunction, lo: f64, hi: f64) -> f64 {
    let g = f.grid().axis(0);
    let antider = |x: f64| -> f64 {
        let (i, t) = g.locate(x);
        let v = f.values();
        let mut acc = 0.0;
        for j in 0..i {
            acc += 0.5 * g.dx() * (v[j] + v[j + 1]);
        }
        acc + g.dx() * (v[i] * t + 0.5 * (v[i + 1] - v[i]) * t * t)
    };
    antider(hi) - antider(lo)
}

#[derive(Debug, Clone)]
pub struct MomentProblemSpec {
    pub axis: usize,
    pub basis: SpectralBasis1D,
    /// Change points of the initial state on this axis.
    pub points: Vec<f64>,
    /// Target mode index (1-based), `points.len() + 1`.
    pub k: usize,
    pub probe: f64,
    pub h: f64,
    pub first_sign: i8,
}

impl MomentProblemSpec {
    pub fn new(
        axis: usize,
        basis: SpectralBasis1D,
        points: Vec<f64>,
        probe: f64,
        h: f64,
        first_sign: i8,
    ) -> Result<Self> {
        let g = basis.grid();
        let (a, b) = (g.a(), g.b());
        let bad = |m: String| Err(SteerError::InvalidArgument(m));
        if first_sign != 1 && first_sign != -1 {
            return bad("first-cell sign must be +1 or -1".into());
        }
        if !(h > 0.0) {
            return bad("h must be positive".into());
        }
        let k = points.len() + 1;
        if k > basis.len() {
            return bad(format!("basis has {} modes, target needs {k}", basis.len()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return bad("change points must be strictly increasing".into());
        }
        let mut intervals: Vec<(f64, f64)> = points.iter().map(|&x| (x - h, x + h)).collect();
        intervals.push((probe, probe + h));
        for &(lo, hi) in &intervals {
            if !(lo > a && hi < b) {
                return bad(format!("interval ({lo}, {hi}) leaves ({a}, {b})"));
            }
        }
        let mut sorted = intervals.clone();
        sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
        if sorted.windows(2).any(|w| w[0].1 > w[1].0) {
            return bad("moment intervals overlap".into());
        }
        Ok(MomentProblemSpec {
            axis,
            basis,
            points,
            k,
            probe,
            h,
            first_sign,
        })
    }

    /// Sign of the cell of the initial pattern that contains `x`.
    pub fn cell_sign(&self, x: f64) -> i8 {
        let flips = self.points.iter().filter(|&&p| p < x).count();
        if flips % 2 == 0 {
            self.first_sign
        } else {
            -self.first_sign
        }
    }
}

/// Which route produced the cone vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentBranch {
    /// No change points: a single bump.
    Trivial,
    /// Full rank: null vector of the probe-extended matrix.
    FullRank,
    /// Rank deficient but the target vector leaves the span: `P = 0`.
    SpanRescue,
}

#[derive(Debug, Clone)]
pub struct MomentSolution {
    pub spec: MomentProblemSpec,
    pub branch: MomentBranch,
    /// `V_j`, normalized so that `|μ| = 1`.
    pub v: Vec<f64>,
    pub p: f64,
    /// `-1` when the bump of `V_j` sits left of `x⁰_j`, `+1` right, `0` none.
    pub sides: Vec<i8>,
    /// Piecewise-constant profile as `(lo, hi, value)` segments.
    pub segments: Vec<(f64, f64, f64)>,
    /// Profile sampled on the basis grid (dual-cell averages).
    pub profile: GridFunction,
    /// `ρ_r = ∫ u^h ω_r`, `r < k`, exact for the interpolated eigenfunctions.
    pub residuals: Vec<f64>,
    /// `μ = ∫ u^h ω_k`.
    pub payoff: f64,
    /// `A[r][j] = ∫_{x⁰_j − h}^{x⁰_j} ω_r`, rows are modes `1..=k`.
    pub a: Vec<Vec<f64>>,
    /// `B[r][j] = ∫_{x⁰_j}^{x⁰_j + h} ω_r`.
    pub b: Vec<Vec<f64>>,
    /// `C[r] = ∫_s^{s+h} ω_r`.
    pub c: Vec<f64>,
}

impl MomentSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// Every nonzero sample carries the sign of its cell in the prescribed
    /// initial pattern.
    pub fn sign_compatible(&self) -> bool {
        let g = self.profile.grid().axis(0);
        self.profile
            .values()
            .iter()
            .enumerate()
            .all(|(i, &u)| u == 0.0 || u.signum() as i8 == self.spec.cell_sign(g.node(i)))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |xs: &[f64]| xs.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "axis = {}", self.spec.axis + 1);
        let _ = writeln!(s, "k = {}", self.spec.k);
        let _ = writeln!(s, "branch = {:?}", self.branch);
        let _ = writeln!(s, "points = {}", join(&self.spec.points));
        let _ = writeln!(s, "probe = {}", fmt_sig(self.spec.probe));
        let _ = writeln!(s, "h = {}", fmt_sig(self.spec.h));
        let _ = writeln!(s, "V = {}", join(&self.v));
        let _ = writeln!(s, "P = {}", fmt_sig(self.p));
        let _ = writeln!(s, "residuals = {}", join(&self.residuals));
        let _ = writeln!(s, "payoff = {}", fmt_sig(self.payoff));
        s
    }
}

fn eval_rows(basis: &SpectralBasis1D, modes: usize, xs: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(modes, xs.len(), |r, j| basis.eval(r + 1, xs[j]))
}

/// Component of `e` orthogonal to the numerical row span of `rows`.
fn off_span(rows: &DMatrix<f64>, e: &DVector<f64>) -> DVector<f64> {
    if rows.nrows() == 0 {
        return e.clone();
    }
    let svd = rows.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let mut r = e.clone();
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv > RANK_TOL * smax {
            let dir = vt.row(i).transpose();
            let c = dir.dot(e);
            r -= dir * c;
        }
    }
    r
}

/// Smallest over largest singular value of `ω_r(x⁰_j)`, `r, j < k`.
pub fn point_rank_ratio(basis: &SpectralBasis1D, points: &[f64]) -> f64 {
    if points.is_empty() {
        return 1.0;
    }
    let m = eval_rows(basis, points.len(), points);
    let s = m.singular_values();
    let smax = s.max();
    if smax == 0.0 {
        0.0
    } else {
        s.min() / smax
    }
}

/// Linear independence of the point-evaluation vectors of modes `1..k−1`.
pub fn check_point_rank(basis: &SpectralBasis1D, points: &[f64]) -> bool {
    point_rank_ratio(basis, points) > RANK_TOL
}

/// Relative residual of `(ω_k(x⁰_j))_j` after projection onto the row span.
pub fn mode_off_span_residual(basis: &SpectralBasis1D, points: &[f64], k: usize) -> f64 {
    if points.is_empty() {
        return 1.0;
    }
    let rows = eval_rows(basis, k - 1, points);
    let e = DVector::from_iterator(points.len(), points.iter().map(|&x| basis.eval(k, x)));
    let en = e.norm();
    if en == 0.0 {
        return 0.0;
    }
    off_span(&rows, &e).norm() / en
}

/// The mode-`k` evaluation vector leaves the span of the lower modes'.
pub fn check_mode_off_span(basis: &SpectralBasis1D, points: &[f64], k: usize) -> bool {
    points.is_empty() || mode_off_span_residual(basis, points, k) > RANK_TOL
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeChoice {
    pub s: f64,
    pub residual: f64,
    pub slot: usize,
}

/// Residual of the probe-extended mode-`k` vector off the span of the
/// extended lower-mode vectors.
pub fn probe_residual(basis: &SpectralBasis1D, points: &[f64], k: usize, s: f64) -> f64 {
    let mut xs = points.to_vec();
    xs.push(s);
    let rows = eval_rows(basis, k - 1, &xs);
    let e = DVector::from_iterator(xs.len(), xs.iter().map(|&x| basis.eval(k, x)));
    off_span(&rows, &e).norm()
}

/// Scan `candidates` equispaced probes and keep the largest residual.
/// Probes closer than `exclusion` to a change point are skipped; with
/// `h > 0` the probe interval `(s, s + h)` must also stay clear of every
/// `(x⁰ − h, x⁰ + h)` and inside the interval. `offset ∈ [0, 1)` shifts
/// the candidate set by that fraction of a slot.
pub fn select_probe_point_with(
    basis: &SpectralBasis1D,
    points: &[f64],
    k: usize,
    candidates: usize,
    h: f64,
    exclusion: f64,
    offset: f64,
) -> Result<ProbeChoice> {
    if !(0.0..1.0).contains(&offset) {
        return Err(SteerError::InvalidArgument("probe offset must lie in [0, 1)".into()));
    }
    if candidates < 16 {
        return Err(SteerError::InvalidArgument("need at least 16 probe candidates".into()));
    }
    if k == 0 || k > basis.len() || points.len() + 1 != k {
        return Err(SteerError::InvalidArgument(format!(
            "mode {k} does not match {} change points",
            points.len()
        )));
    }
    let g = basis.grid();
    let (a, b) = (g.a(), g.b());
    let mut best: Option<ProbeChoice> = None;
    let mut best_res = 0.0f64;
    for c in 0..candidates {
        let s = a + (b - a) * ((c + 1) as f64 + offset) / (candidates + 1) as f64;
        if s >= b {
            continue;
        }
        if points.iter().any(|&p| (s - p).abs() < exclusion.max(1e-12)) {
            continue;
        }
        if h > 0.0 {
            if s + h >= b || points.iter().any(|&p| s < p + h && s + h > p - h) {
                continue;
            }
        }
        let r = probe_residual(basis, points, k, s);
        best_res = best_res.max(r);
        if best.map_or(true, |bst| r > bst.residual) {
            best = Some(ProbeChoice {
                s,
                residual: r,
                slot: c,
            });
        }
    }
    match best {
        Some(p) if p.residual >= 1e-10 => Ok(p),
        _ => Err(SteerError::NoValidProbe { best: best_res }),
    }
}

/// [`select_probe_point_with`] skipping only exact collisions.
pub fn select_probe_point(basis: &SpectralBasis1D, points: &[f64], k: usize, candidates: usize) -> Result<ProbeChoice> {
    select_probe_point_with(basis, points, k, candidates, 0.0, 0.0, 0.0)
}

/// Null vector of the cone system, flipped into the admissible sign, turned
/// into a piecewise-constant profile and normalized to unit payoff.
pub fn solve_moment_cone(spec: &MomentProblemSpec) -> Result<MomentSolution> {
    let basis = &spec.basis;
    let k = spec.k;
    let km1 = k - 1;
    let h = spec.h;
    let s = spec.probe;
    let probe_sign = spec.cell_sign(s + 0.5 * h) as f64;

    let (mut v, mut p, branch) = if km1 == 0 {
        (Vec::new(), probe_sign, MomentBranch::Trivial)
    } else if check_point_rank(basis, &spec.points) {
        let mut xs = spec.points.clone();
        xs.push(s);
        let m = eval_rows(basis, km1, &xs);
        // pad to square so the full right singular basis is available
        let mut sq = DMatrix::zeros(k, k);
        sq.view_mut((0, 0), (km1, k)).copy_from(&m);
        let svd = sq.svd(false, true);
        let vt = svd.v_t.expect("v_t requested");
        let imin = svd.singular_values.imin();
        let z: Vec<f64> = vt.row(imin).iter().copied().collect();
        (z[..km1].to_vec(), z[km1], MomentBranch::FullRank)
    } else if check_mode_off_span(basis, &spec.points, k) {
        let rows = eval_rows(basis, km1, &spec.points);
        let e = DVector::from_iterator(km1, spec.points.iter().map(|&x| basis.eval(k, x)));
        let z = off_span(&rows, &e);
        let n = z.norm();
        (z.iter().map(|x| x / n).collect(), 0.0, MomentBranch::SpanRescue)
    } else {
        return Err(SteerError::RankDeficient { axis: spec.axis + 1 });
    };
    if branch == MomentBranch::FullRank && p * probe_sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        p = -p;
    }

    let sides: Vec<i8> = v
        .iter()
        .zip(&spec.points)
        .map(|(&vj, &x)| {
            if vj == 0.0 {
                0
            } else if vj.signum() as i8 == spec.cell_sign(x - 0.5 * h) {
                -1
            } else {
                1
            }
        })
        .collect();

    let fns = basis.eigenfunctions();
    let a: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            spec.points
                .iter()
                .map(|&x| segment_integral(&fns[r], x - h, x))
                .collect()
        })
        .collect();
    let b: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            spec.points
                .iter()
                .map(|&x| segment_integral(&fns[r], x, x + h))
                .collect()
        })
        .collect();
    let c: Vec<f64> = (0..k).map(|r| segment_integral(&fns[r], s, s + h)).collect();
    let moment = |r: usize, v: &[f64], p: f64| -> f64 {
        let mut acc = p / h * c[r];
        for (j, &vj) in v.iter().enumerate() {
            acc += match sides[j] {
                -1 => vj / h * a[r][j],
                1 => vj / h * b[r][j],
                _ => 0.0,
            };
        }
        acc
    };
    let mu = moment(k - 1, &v, p);
    if !(mu.abs() > 1e-10) {
        return Err(SteerError::PayoffDegenerate { payoff: mu.abs() });
    }
    let scale = 1.0 / mu.abs();
    v.iter_mut().for_each(|x| *x *= scale);
    p *= scale;
    let residuals: Vec<f64> = (0..km1).map(|r| moment(r, &v, p)).collect();
    let payoff = moment(k - 1, &v, p);

    let mut segments = Vec::new();
    for (j, &x) in spec.points.iter().enumerate() {
        match sides[j] {
            -1 => segments.push((x - h, x, v[j] / h)),
            1 => segments.push((x, x + h, v[j] / h)),
            _ => {}
        }
    }
    if p != 0.0 {
        segments.push((s, s + h, p / h));
    }
    let profile = sample_profile(basis.grid(), &segments, &spec.points, &sides)?;

    Ok(MomentSolution {
        spec: spec.clone(),
        branch,
        v,
        p,
        sides,
        segments,
        profile,
        residuals,
        payoff,
        a,
        b,
        c,
    })
}

/// Dual-cell averages of the segments. The node nearest each change point
/// is zeroed and its value handed to the neighbour on the bump side, so the
/// sampled profile changes sign exactly there without losing mass.
fn sample_profile(g: &Grid1D, segments: &[(f64, f64, f64)], points: &[f64], sides: &[i8]) -> Result<GridFunction> {
    let n = g.cells();
    let dx = g.dx();
    let mut u = vec![0.0; n + 1];
    for (i, ui) in u.iter_mut().enumerate().take(n).skip(1) {
        let (lo, hi) = (g.node(i) - 0.5 * dx, g.node(i) + 0.5 * dx);
        for &(a, b, val) in segments {
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            *ui += val * overlap / dx;
        }
    }
    for (&x, &side) in points.iter().zip(sides) {
        let i0 = g.nearest(x);
        if i0 == 0 || i0 >= n {
            continue;
        }
        let moved = u[i0];
        u[i0] = 0.0;
        let j = if side < 0 { i0 - 1 } else { i0 + 1 };
        if side != 0 && j > 0 && j < n {
            u[j] += moved;
        }
    }
    let grid = std::sync::Arc::new(crate::grid::Grid::new(vec![g.clone()])?);
    Ok(GridFunction::from_values(grid, u)?.with_dirichlet())
}
