//! Target profiles `w` with prescribed interior zeros.
//!
//! Between consecutive zeros (and the ends of the interval) the profile is
//! `σ_j L_j g((x − z_j)/L_j)`, where `L_j` is the cell length, the signs
//! `σ_j` alternate, and `g` on `[0, 1]` solves `g'' = q(t) g`, `g(0) = 0`,
//! `g'(0) = 1`, symmetric about `1/2`. The coefficient `q` vanishes on
//! `[0, β]`, so `w` is exactly linear with unit slope next to every zero,
//! rises to a barrier `κ²` on a flank, and equals `−ν` in the middle, with
//! `ν` picked by shooting so that `g'(1/2) = 0`.
//!
//! The barrier nearly decouples the cells, which keeps the top of the
//! spectrum of `−w''/w` tightly clustered while pushing the next eigenvalue
//! far down.

use std::collections::HashMap;

use crate::error::{Result, SteerError};
use crate::grid::{Grid1D, GridFunction};

const STEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlankProfile {
    /// Barrier height is `κ²` in cell units.
    pub kappa: f64,
    /// Flank width in cell units.
    pub flank: f64,
    /// Width of the smooth steps in cell units.
    pub blend: f64,
    /// Half-width of the linear window around each zero, in grid cells.
    pub linear_cells: f64,
}

impl Default for FlankProfile {
    fn default() -> Self {
        FlankProfile {
            kappa: 14.0,
            flank: 0.25,
            blend: 0.05,
            linear_cells: 4.0,
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Tabulated `g` on `[0, 1/2]` for one cell shape.
#[derive(Debug, Clone)]
pub struct CellShape {
    pub beta: f64,
    pub flank: f64,
    pub nu: f64,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl CellShape {
    fn q(&self, t: f64, kappa: f64, blend: f64) -> f64 {
        coefficient(t, self.beta, self.flank, kappa, blend, self.nu)
    }

    /// `g(t)` for `t ∈ [0, 1]`, cubic Hermite between table nodes.
    pub fn eval(&self, t: f64) -> f64 {
        let s = t.min(1.0 - t).clamp(0.0, 0.5);
        let h = 0.5 / STEPS as f64;
        let i = ((s / h).floor() as usize).min(STEPS - 1);
        let u = (s - i as f64 * h) / h;
        let (p0, p1) = (self.g[i], self.g[i + 1]);
        let (m0, m1) = (self.dg[i] * h, self.dg[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * p0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * p1 + (u3 - u2) * m1
    }
}

fn coefficient(t: f64, beta: f64, flank: f64, kappa: f64, blend: f64, nu: f64) -> f64 {
    let t = t.min(1.0 - t);
    let up = smoothstep((t - beta) / blend);
    let down = smoothstep((t - (beta + flank)) / blend);
    kappa * kappa * up * (1.0 - down) - nu * down
}

/// RK4 on `[0, 1/2]`; returns `(g, g')` tables.
fn shoot(beta: f64, flank: f64, kappa: f64, blend: f64, nu: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 0.5 / STEPS as f64;
    let q = |t: f64| coefficient(t, beta, flank, kappa, blend, nu);
    let mut g = Vec::with_capacity(STEPS + 1);
    let mut dg = Vec::with_capacity(STEPS + 1);
    let (mut y, mut z) = (0.0, 1.0);
    g.push(y);
    dg.push(z);
    for i in 0..STEPS {
        let t = i as f64 * h;
        let k1 = (z, q(t) * y);
        let k2 = (z + 0.5 * h * k1.1, q(t + 0.5 * h) * (y + 0.5 * h * k1.0));
        let k3 = (z + 0.5 * h * k2.1, q(t + 0.5 * h) * (y + 0.5 * h * k2.0));
        let k4 = (z + h * k3.1, q(t + h) * (y + h * k3.0));
        y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        z += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        g.push(y);
        dg.push(z);
    }
    (g, dg)
}

impl FlankProfile {
    /// Solve for the cell shape with linear window `beta` (cell units).
    pub fn cell_shape(&self, beta: f64) -> Result<CellShape> {
        let flank = self.flank.min(0.5 - beta - 2.0 * self.blend);
        if !(beta >= 0.0) || flank < self.blend {
            return Err(SteerError::InvalidArgument(format!(
                "cell too short for the linear window (beta = {beta:.4} in cell units)"
            )));
        }
        let end_slope = |nu: f64| *shoot(beta, flank, self.kappa, self.blend, nu).1.last().expect("table");
        // g'(1/2) falls as nu grows; double until it turns negative
        let (mut lo, mut hi) = (0.0, 1.0);
        if end_slope(lo) <= 0.0 {
            return Err(SteerError::InvalidArgument("profile shooting failed at nu = 0".into()));
        }
        while end_slope(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e8 {
                return Err(SteerError::InvalidArgument("profile shooting did not bracket".into()));
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if end_slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = 0.5 * (lo + hi);
        let (g, dg) = shoot(beta, flank, self.kappa, self.blend, nu);
        if g[1..].iter().any(|&x| x <= 0.0) {
            return Err(SteerError::InvalidArgument("profile shape changes sign".into()));
        }
        Ok(CellShape { beta, flank, nu, g, dg })
    }

    /// Profile on `grid` vanishing at the ends and at `zeros`, positive in
    /// the first cell.
    pub fn build(&self, grid: &Grid1D, zeros: &[f64]) -> Result<GridFunction> {
        let mut pts = Vec::with_capacity(zeros.len() + 2);
        pts.push(grid.a());
        for &z in zeros {
            if !(z > grid.a() && z < grid.b()) {
                return Err(SteerError::InvalidArgument(format!("zero {z} not interior")));
            }
            pts.push(z);
        }
        pts.push(grid.b());
        if pts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SteerError::InvalidArgument("zeros must be strictly increasing".into()));
        }
        let half = self.linear_cells * grid.dx();
        let mut cache: HashMap<u64, CellShape> = HashMap::new();
        let mut shapes = Vec::with_capacity(pts.len() - 1);
        for w in pts.windows(2) {
            let len = w[1] - w[0];
            let beta = half / len;
            let key = beta.to_bits();
            if !cache.contains_key(&key) {
                cache.insert(key, self.cell_shape(beta)?);
            }
            shapes.push((w[0], len, key));
        }
        let vals = grid
            .nodes()
            .iter()
            .map(|&x| {
                let j = shapes.iter().rposition(|&(z, _, _)| x >= z).unwrap_or(0);
                let (z, len, key) = shapes[j];
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * len * cache[&key].eval(((x - z) / len).clamp(0.0, 1.0))
            })
            .collect();
        let g = std::sync::Arc::new(crate::grid::Grid::new(vec![grid.clone()])?);
        Ok(GridFunction::from_values(g, vals)?.with_dirichlet())
    }

    /// Barrier coefficient `q(t)` of a solved cell shape (for diagnostics).
    pub fn coefficient(&self, shape: &CellShape, t: f64) -> f64 {
        shape.q(t, self.kappa, self.blend)
    }
}
