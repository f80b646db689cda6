//! Dirichlet eigenproblems `ω'' + v ω = λ ω` and their tensor products.
//!
//! The 1-D operator is the standard three-point second difference plus the
//! diagonal potential on the interior nodes. Eigenvalues are ordered
//! decreasingly, so mode 1 has the largest eigenvalue and no interior zero.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Result, SteerError};
use crate::grid::{fmt_sig, inner_product, Grid, Grid1D, GridFunction};
use crate::sign::{axis_interface_counts, detect_pattern, SignPattern};
use crate::tridiag::{count_below, solve_pivoted};

/// Default cap on `|v|` for [`potential_from_target`].
pub const DEFAULT_POTENTIAL_CAP: f64 = 1e6;

/// Band half-width used by [`potential_from_target`] when none is given,
/// in units of `Δx`.
pub const DEFAULT_BAND_CELLS: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct SpectralBasis1D {
    grid: Grid1D,
    potential: GridFunction,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<GridFunction>,
    zeros: Vec<Vec<f64>>,
}

impl SpectralBasis1D {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn potential(&self) -> &GridFunction {
        &self.potential
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues, index 0 holding mode 1.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[GridFunction] {
        &self.eigenfunctions
    }

    /// Eigenvalue of mode `k` (1-based).
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k - 1]
    }

    /// Eigenfunction of mode `k` (1-based).
    pub fn mode(&self, k: usize) -> &GridFunction {
        &self.eigenfunctions[k - 1]
    }

    /// Interior zeros of mode `k` (1-based).
    pub fn zeros(&self, k: usize) -> &[f64] {
        &self.zeros[k - 1]
    }

    /// Value of mode `k` at `x`, by linear interpolation.
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        self.eigenfunctions[k - 1].interpolate(&[x])
    }

    /// CSV with columns `index,lambda,zero_count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,lambda,zero_count\n");
        for (j, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", j + 1, fmt_sig(*l), self.zeros[j].len());
        }
        s
    }
}

/// First `m` eigenpairs of the Dirichlet operator with potential `v`.
///
/// Eigenvalues come from Sturm-count bisection, eigenvectors from inverse
/// iteration followed by Gram–Schmidt against the earlier modes. Each
/// eigenfunction is normalized in the trapezoidal L2 norm and made positive
/// next to the left end.
pub fn solve_1d(v: &GridFunction, m: usize) -> Result<SpectralBasis1D> {
    if v.grid().dim() != 1 {
        return Err(SteerError::GridMismatch("solve_1d needs a 1-D potential".into()));
    }
    let grid = v.grid().axis(0).clone();
    let n = grid.cells();
    if m == 0 || m > n / 4 {
        return Err(SteerError::InvalidArgument(format!(
            "requested {m} modes; need 1 <= m <= N/4 = {}",
            n / 4
        )));
    }
    if v.values().iter().any(|x| !x.is_finite()) {
        return Err(SteerError::InvalidArgument("potential is not finite".into()));
    }
    let dx = grid.dx();
    let off = 1.0 / (dx * dx);
    let diag: Vec<f64> = v.values()[1..n].iter().map(|vi| -2.0 * off + vi).collect();
    let size = diag.len();

    let lo0 = diag.iter().fold(f64::INFINITY, |a, &d| a.min(d)) - 2.0 * off;
    let hi0 = diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d)) + 2.0 * off;

    let eigenvalues: Vec<f64> = (1..=m)
        .into_par_iter()
        .map(|k| {
            // the k-th largest has exactly size - k eigenvalues below it
            let target = size - k;
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(&diag, off, mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();

    let g = Arc::new(Grid::new(vec![grid.clone()])?);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &lam in &eigenvalues {
        let mut y = inverse_iteration(&diag, off, lam, vectors.len());
        for prev in &vectors {
            let c: f64 = y.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (yi, pi) in y.iter_mut().zip(prev) {
                *yi -= c * pi;
            }
        }
        let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        y.iter_mut().for_each(|a| *a /= norm);
        vectors.push(y);
    }

    let mut eigenfunctions = Vec::with_capacity(m);
    let mut zeros = Vec::with_capacity(m);
    for (j, y) in vectors.iter().enumerate() {
        let mut vals = vec![0.0; n + 1];
        vals[1..n].copy_from_slice(y);
        let scale = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let first = vals.iter().find(|x| x.abs() > 1e-8 * scale).copied().unwrap_or(1.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        // interior nodes all carry weight dx, boundary values are zero
        let norm = (dx * y.iter().map(|a| a * a).sum::<f64>()).sqrt();
        vals.iter_mut().for_each(|x| *x *= sign / norm);
        let f = GridFunction::from_values(g.clone(), vals)?.with_dirichlet();
        let found = axis_interface_counts(&f, None)[0];
        if found != j {
            return Err(SteerError::OscillationViolation {
                mode: j + 1,
                expected: j,
                found,
            });
        }
        let z = if j == 0 {
            Vec::new()
        } else {
            detect_pattern(&f, None)?.changes(0).to_vec()
        };
        zeros.push(z);
        eigenfunctions.push(f);
    }

    Ok(SpectralBasis1D {
        grid,
        potential: v.clone(),
        eigenvalues,
        eigenfunctions,
        zeros,
    })
}

fn inverse_iteration(diag: &[f64], off: f64, lam: f64, seed: usize) -> Vec<f64> {
    let n = diag.len();
    // shift a hair away so the factorization stays finite
    let shift = lam + 4.0 * f64::EPSILON * lam.abs().max(off);
    let d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
    let e = vec![off; n - 1];
    // deterministic, non-symmetric start vector
    let mut y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i * 7919 + seed * 104729) % 1013) as f64 / 1013.0)
        .collect();
    for _ in 0..3 {
        solve_pivoted(&e, &d, &e, &mut y);
        let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        y.iter_mut().for_each(|a| *a /= norm);
    }
    y
}

/// Potential `v = −w''/w` (central differences) for a target profile `w`.
///
/// Nodes within distance `band` of a zero of `w` (interior sign changes and
/// vanishing endpoints) get `v = 0`; `w` is expected to be linear there.
/// `band = None` uses `3Δx`. Errors when `|v|` exceeds `cap`.
pub fn potential_from_target(w: &GridFunction, band: Option<f64>, cap: Option<f64>) -> Result<GridFunction> {
    if w.grid().dim() != 1 {
        return Err(SteerError::GridMismatch("target profile must be 1-D".into()));
    }
    let grid = w.grid().axis(0).clone();
    let n = grid.cells();
    let dx = grid.dx();
    let band = band.unwrap_or(DEFAULT_BAND_CELLS * dx);
    let cap = cap.unwrap_or(DEFAULT_POTENTIAL_CAP);
    let vals = w.values();
    let scale = w.max_abs();
    if scale == 0.0 {
        return Err(SteerError::InvalidArgument(
            "target profile vanishes identically".into(),
        ));
    }
    let tiny = 1e-12 * scale;
    let mut zeros = Vec::new();
    if vals[0].abs() <= tiny {
        zeros.push(grid.a());
    }
    if vals[n].abs() <= tiny {
        zeros.push(grid.b());
    }
    let ws = GridFunction::from_values(w.grid().clone(), vals.to_vec())?;
    let counts = axis_interface_counts(&ws, Some(tiny));
    if counts[0] > 0 {
        zeros.extend_from_slice(detect_pattern(&ws, Some(tiny))?.changes(0));
    }
    // interior nodes that are exactly zero are zeros too
    for i in 1..n {
        if vals[i].abs() <= tiny {
            zeros.push(grid.node(i));
        }
    }

    let mut v = vec![0.0; n + 1];
    let mut worst = 0.0f64;
    for i in 1..n {
        let x = grid.node(i);
        if zeros.iter().any(|z| (x - z).abs() <= band + 1e-12 * dx) {
            continue;
        }
        let d2 = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (dx * dx);
        let vi = -d2 / vals[i];
        worst = worst.max(vi.abs());
        v[i] = vi;
    }
    if !worst.is_finite() || worst > cap {
        return Err(SteerError::UnboundedPotential { max_abs: worst, cap });
    }
    GridFunction::from_values(w.grid().clone(), v)
}

/// One assembled mode: 1-based per-axis indices and the summed eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEntry {
    pub multi_index: Vec<usize>,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralBasisND {
    bases: Vec<SpectralBasis1D>,
    grid: Arc<Grid>,
    entries: Vec<ModeEntry>,
    functions: Vec<GridFunction>,
}

/// Relative tolerance under which two eigenvalues count as equal.
pub const EIGEN_TIE_TOL: f64 = 1e-9;

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= EIGEN_TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// The `m` largest eigenpairs of the box built from per-axis bases.
/// Near-equal eigenvalues are ordered lexicographically by multi-index.
pub fn assemble_nd(bases: &[SpectralBasis1D], m: usize) -> Result<SpectralBasisND> {
    if bases.is_empty() {
        return Err(SteerError::InvalidArgument("no axis bases".into()));
    }
    let grid = Arc::new(Grid::new(bases.iter().map(|b| b.grid().clone()).collect())?);
    let mut entries: Vec<ModeEntry> = vec![ModeEntry {
        multi_index: Vec::new(),
        lambda: 0.0,
    }];
    for b in bases {
        entries = entries
            .into_iter()
            .flat_map(|e| {
                (1..=b.len()).map(move |k| {
                    let mut mi = e.multi_index.clone();
                    mi.push(k);
                    ModeEntry {
                        multi_index: mi,
                        lambda: e.lambda + b.lambda(k),
                    }
                })
            })
            .collect();
    }
    entries.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    let mut start = 0;
    while start < entries.len() {
        let mut end = start + 1;
        while end < entries.len() && near(entries[start].lambda, entries[end].lambda) {
            end += 1;
        }
        entries[start..end].sort_by(|a, b| a.multi_index.cmp(&b.multi_index));
        start = end;
    }
    entries.truncate(m.max(1));

    let functions = entries
        .par_iter()
        .map(|e| {
            let vals = (0..grid.len())
                .map(|k| {
                    grid.multi(k)
                        .iter()
                        .zip(bases)
                        .zip(&e.multi_index)
                        .map(|((&i, b), &mode)| b.mode(mode).values()[i])
                        .product()
                })
                .collect();
            GridFunction::from_values(grid.clone(), vals).map(|f| f.with_dirichlet())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SpectralBasisND {
        bases: bases.to_vec(),
        grid,
        entries,
        functions,
    })
}

impl SpectralBasisND {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn axis_basis(&self, axis: usize) -> &SpectralBasis1D {
        &self.bases[axis]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ModeEntry] {
        &self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// Assembled eigenfunction at sorted position `l` (0-based).
    pub fn function(&self, l: usize) -> &GridFunction {
        &self.functions[l]
    }

    pub fn functions(&self) -> &[GridFunction] {
        &self.functions
    }

    /// `Σ_i v_i(x_i)` on the box grid.
    pub fn potential(&self) -> GridFunction {
        let vals = (0..self.grid.len())
            .map(|k| {
                self.grid
                    .multi(k)
                    .iter()
                    .zip(&self.bases)
                    .map(|(&i, b)| b.potential().values()[i])
                    .sum()
            })
            .collect();
        GridFunction::from_values(self.grid.clone(), vals).expect("lattice size")
    }

    /// Coefficients `∫ u ω_l` for the first `m` assembled modes.
    pub fn coefficients(&self, u: &GridFunction, m: usize) -> Result<Vec<f64>> {
        self.functions.iter().take(m).map(|w| inner_product(u, w)).collect()
    }

    /// CSV with columns `index,lambda,zero_count`; `zero_count` sums the
    /// per-axis interior zeros.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,lambda,zero_count\n");
        for (l, e) in self.entries.iter().enumerate() {
            let zc: usize = e.multi_index.iter().map(|k| k - 1).sum();
            let _ = writeln!(s, "{},{},{}", l + 1, fmt_sig(e.lambda), zc);
        }
        s
    }
}

/// The target mode `k_*` selected by a sign pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMode {
    /// Sorted position, 0-based (`k_* − 1`).
    pub position: usize,
    pub multi_index: Vec<usize>,
    pub lambda: f64,
    /// `λ_{k*} − λ_{k*+1}`.
    pub gap: f64,
    /// `λ_1 − λ_{k*}`.
    pub lead: f64,
}

impl TargetMode {
    /// 1-based `k_*`.
    pub fn k_star(&self) -> usize {
        self.position + 1
    }
}

/// Pick the mode whose per-axis index is `interface count + 1`.
pub fn locate_target_mode(basis: &SpectralBasisND, pattern: &SignPattern) -> Result<TargetMode> {
    if pattern.dim() != basis.grid.dim() {
        return Err(SteerError::GridMismatch(format!(
            "pattern has {} axes, basis {}",
            pattern.dim(),
            basis.grid.dim()
        )));
    }
    let want: Vec<usize> = pattern.counts().iter().map(|c| c + 1).collect();
    let position = basis
        .entries
        .iter()
        .position(|e| e.multi_index == want)
        .ok_or_else(|| SteerError::ModeNotAssembled {
            multi_index: want.clone(),
            available: basis.len(),
        })?;
    let lambda = basis.entries[position].lambda;
    let next = basis
        .entries
        .get(position + 1)
        .ok_or_else(|| SteerError::ModeNotAssembled {
            multi_index: want.clone(),
            available: basis.len(),
        })?;
    let gap = lambda - next.lambda;
    let twin = basis
        .entries
        .iter()
        .enumerate()
        .any(|(l, e)| l != position && near(e.lambda, lambda));
    if gap <= 0.0 || twin {
        return Err(SteerError::DegenerateTarget {
            mode: position + 1,
            gap,
        });
    }
    Ok(TargetMode {
        position,
        multi_index: want,
        lambda,
        gap,
        lead: basis.entries[0].lambda - lambda,
    })
}
