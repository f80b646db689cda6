//! Uniform tensor grids on boxes and the functions sampled on them.
//!
//! Node lattices are stored flat with axis 0 varying fastest, so in 2-D the
//! node `(i, j)` sits at `i + (n0 + 1) * j`. Quadrature is the tensor
//! trapezoidal rule throughout.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Result, SteerError};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(SteerError::InvalidArgument(format!(
                "interval needs a < b, got ({a}, {b})"
            )));
        }
        Ok(Interval { a, b })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Strictly inside, not touching either end.
    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }
}

/// `Ω = (a_1,b_1) × … × (a_n,b_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    axes: Vec<Interval>,
}

impl BoxDomain {
    pub fn new(axes: Vec<Interval>) -> Result<Self> {
        if axes.is_empty() {
            return Err(SteerError::InvalidArgument("box needs at least one axis".into()));
        }
        Ok(BoxDomain { axes })
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            axes: vec![Interval { a: 0.0, b: 1.0 }; dim.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> Interval {
        self.axes[i]
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }
}

/// Uniform grid on one interval: `N + 1` nodes, spacing `(b - a) / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    interval: Interval,
    cells: usize,
    dx: f64,
    nodes: Vec<f64>,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, cells: usize) -> Result<Self> {
        let interval = Interval::new(a, b)?;
        if cells < MIN_CELLS {
            return Err(SteerError::InvalidArgument(format!(
                "grid needs at least {MIN_CELLS} cells, got {cells}"
            )));
        }
        let dx = (b - a) / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|i| a + i as f64 * dx).collect();
        // pin the last node so it is exactly b
        nodes[cells] = b;
        Ok(Grid1D {
            interval,
            cells,
            dx,
            nodes,
        })
    }

    pub fn unit(cells: usize) -> Result<Self> {
        Grid1D::new(0.0, 1.0, cells)
    }

    pub fn a(&self) -> f64 {
        self.interval.a
    }

    pub fn b(&self) -> f64 {
        self.interval.b
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Number of nodes `N + 1`.
    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Trapezoidal weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Cell index and local coordinate in [0, 1] for linear interpolation.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.interval.a) / self.dx;
        let i = (s.floor().max(0.0) as usize).min(self.cells - 1);
        let t = (s - i as f64).clamp(0.0, 1.0);
        (i, t)
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let s = ((x - self.interval.a) / self.dx).round();
        (s.max(0.0) as usize).min(self.cells)
    }
}

/// Tensor product of 1-D grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Grid1D>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(axes: Vec<Grid1D>) -> Result<Self> {
        if axes.is_empty() {
            return Err(SteerError::InvalidArgument("grid needs at least one axis".into()));
        }
        let mut strides = Vec::with_capacity(axes.len());
        let mut len = 1usize;
        for g in &axes {
            strides.push(len);
            len *= g.len();
        }
        Ok(Grid { axes, strides, len })
    }

    /// Same number of cells on every axis of `domain`.
    pub fn on_box(domain: &BoxDomain, cells: usize) -> Result<Self> {
        let axes = domain
            .axes()
            .iter()
            .map(|iv| Grid1D::new(iv.a, iv.b, cells))
            .collect::<Result<Vec<_>>>()?;
        Grid::new(axes)
    }

    pub fn unit(dim: usize, cells: usize) -> Result<Self> {
        Grid::on_box(&BoxDomain::unit(dim), cells)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &Grid1D {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[Grid1D] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Grid1D::len).collect()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn domain(&self) -> BoxDomain {
        BoxDomain {
            axes: self.axes.iter().map(Grid1D::interval).collect(),
        }
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim());
        for g in &self.axes {
            out.push(flat % g.len());
            flat /= g.len();
        }
        out
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, g)| g.node(i))
            .collect()
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        self.multi(flat)
            .iter()
            .zip(&self.axes)
            .any(|(&i, g)| i == 0 || i == g.cells())
    }

    /// Tensor trapezoidal weight of a node.
    pub fn weight(&self, flat: usize) -> f64 {
        self.multi(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, g)| g.weight(i))
            .product()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.weight(k)).collect()
    }
}

/// Real values on every node of a grid. Immutable once built.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Arc<Vec<f64>>,
    dirichlet: bool,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values && self.dirichlet == other.dirichlet
    }
}

impl GridFunction {
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SteerError::GridMismatch(format!(
                "{} values for a lattice of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction {
            grid,
            values: Arc::new(values),
            dirichlet: false,
        })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.coords(k))).collect();
        GridFunction {
            grid,
            values: Arc::new(values),
            dirichlet: false,
        }
    }

    /// 1-D convenience: samples `f(x)` on a single-axis grid.
    pub fn from_fn_1d(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let g = Arc::new(Grid::new(vec![grid.clone()]).expect("one axis"));
        GridFunction::from_fn(g, |p| f(p[0]))
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: Arc::new(vec![c; n]),
            dirichlet: false,
        }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        GridFunction::constant(grid, 0.0).with_dirichlet()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    /// Copy with boundary nodes set to zero and the Dirichlet flag raised.
    pub fn with_dirichlet(&self) -> Self {
        let mut v = self.values.as_ref().clone();
        for (k, x) in v.iter_mut().enumerate() {
            if self.grid.is_boundary(k) {
                *x = 0.0;
            }
        }
        GridFunction {
            grid: self.grid.clone(),
            values: Arc::new(v),
            dirichlet: true,
        }
    }

    /// True when every boundary node is exactly zero.
    pub fn vanishes_on_boundary(&self) -> bool {
        (0..self.len()).all(|k| !self.grid.is_boundary(k) || self.values[k] == 0.0)
    }

    fn derived(&self, values: Vec<f64>) -> Self {
        let dirichlet = self.dirichlet && (0..values.len()).all(|k| !self.grid.is_boundary(k) || values[k] == 0.0);
        GridFunction {
            grid: self.grid.clone(),
            values: Arc::new(values),
            dirichlet,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.derived(self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let vals = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        let mut out = self.derived(vals);
        out.dirichlet = self.dirichlet && other.dirichlet && out.vanishes_on_boundary();
        Ok(out)
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(SteerError::GridMismatch("functions live on different grids".into()))
        }
    }

    /// Multilinear interpolation; points outside the box are clamped.
    pub fn interpolate(&self, p: &[f64]) -> f64 {
        let d = self.grid.dim();
        let loc: Vec<(usize, f64)> = (0..d).map(|i| self.grid.axis(i).locate(p[i])).collect();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for (axis, &(i, t)) in loc.iter().enumerate() {
                let up = (corner >> axis) & 1 == 1;
                w *= if up { t } else { 1.0 - t };
                flat += (i + up as usize) * self.grid.stride(axis);
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }

    /// Values along the line through `anchor` parallel to `axis`.
    /// `anchor[axis]` is ignored.
    pub fn axis_line(&self, axis: usize, anchor: &[usize]) -> Vec<f64> {
        let mut idx = anchor.to_vec();
        (0..self.grid.axis(axis).len())
            .map(|i| {
                idx[axis] = i;
                self.values[self.grid.flat(&idx)]
            })
            .collect()
    }

    /// CSV with header `x1[,x2,...],value`, one row per node, axis 1 fastest.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.grid.dim()).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},value", header.join(","))?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            for x in self.grid.coords(k) {
                let _ = write!(line, "{},", fmt_sig(x));
            }
            line.push_str(&fmt_sig(self.values[k]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Trapezoidal approximation of `∫_Ω f g dx`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(weighted_sum(&f.grid, |k| f.values[k] * g.values[k]))
}

pub fn l2_norm(f: &GridFunction) -> f64 {
    weighted_sum(&f.grid, |k| f.values[k] * f.values[k]).max(0.0).sqrt()
}

/// Relative L2 distance `‖f − g‖ / ‖g‖`.
pub fn relative_l2(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let d = f.sub(g)?;
    Ok(l2_norm(&d) / l2_norm(g))
}

pub fn integral(f: &GridFunction) -> f64 {
    weighted_sum(&f.grid, |k| f.values[k])
}

fn weighted_sum(grid: &Grid, term: impl Fn(usize) -> f64) -> f64 {
    // accumulate along axis 0 first, then scale, to keep the inner loop cheap
    let g0 = grid.axis(0);
    let n0 = g0.len();
    let mut total = 0.0;
    for outer in 0..grid.len() / n0 {
        let base = outer * n0;
        let mut line = 0.0;
        for i in 0..n0 {
            line += g0.weight(i) * term(base + i);
        }
        let mut w = 1.0;
        let mut rest = outer;
        for g in &grid.axes()[1..] {
            w *= g.weight(rest % g.len());
            rest /= g.len();
        }
        total += w * line;
    }
    total
}

/// Nodewise product of one 1-D factor per axis.
pub fn tensor_product(factors: &[GridFunction]) -> Result<GridFunction> {
    if factors.is_empty() {
        return Err(SteerError::InvalidArgument("tensor product of nothing".into()));
    }
    for (i, f) in factors.iter().enumerate() {
        if f.grid.dim() != 1 {
            return Err(SteerError::GridMismatch(format!(
                "factor {i} is {}-dimensional",
                f.grid.dim()
            )));
        }
    }
    if factors.len() == 1 {
        return Ok(factors[0].clone());
    }
    let axes: Vec<Grid1D> = factors.iter().map(|f| f.grid.axis(0).clone()).collect();
    let grid = Arc::new(Grid::new(axes)?);
    let vals = (0..grid.len())
        .map(|k| grid.multi(k).iter().zip(factors).map(|(&i, f)| f.values[i]).product())
        .collect();
    let mut out = GridFunction::from_values(grid, vals)?;
    out.dirichlet = factors.iter().any(|f| f.dirichlet) && out.vanishes_on_boundary();
    Ok(out)
}

/// Tensor product onto a given grid, checking each factor's axis.
pub fn tensor_product_on(grid: &Arc<Grid>, factors: &[GridFunction]) -> Result<GridFunction> {
    if factors.len() != grid.dim() {
        return Err(SteerError::GridMismatch(format!(
            "{} factors for a {}-dimensional grid",
            factors.len(),
            grid.dim()
        )));
    }
    for (i, f) in factors.iter().enumerate() {
        if f.grid.dim() != 1 || f.grid.axis(0) != grid.axis(i) {
            return Err(SteerError::GridMismatch(format!(
                "factor {i} does not live on axis {i}"
            )));
        }
    }
    let t = tensor_product(factors)?;
    let dirichlet = t.dirichlet;
    let mut out = GridFunction::from_values(grid.clone(), t.values.as_ref().clone())?;
    out.dirichlet = dirichlet;
    Ok(out)
}

/// `%g`-style formatting with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    const SIG: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade; let the formatter decide
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mant, e) = sci.split_once('e').expect("exponent");
    let e: i32 = e.parse().expect("int exponent");
    let exp = if e != exp { e } else { exp };
    if exp < -5 || exp >= SIG {
        format!("{}e{}", trim_zeros(mant), e)
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit1(n: usize) -> Arc<Grid> {
        Arc::new(Grid::unit(1, n).unwrap())
    }

    #[test]
    fn grid1d_endpoints_and_spacing() {
        let g = Grid1D::new(-1.0, 2.0, 30).unwrap();
        assert_eq!(g.node(0), -1.0);
        assert_eq!(g.node(30), 2.0);
        assert!((g.dx() - 0.1).abs() < 1e-15);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(Grid1D::new(0.0, 1.0, 7).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn normalized_mode_has_unit_norm() {
        let g = unit1(200);
        let f = GridFunction::from_fn(g, |p| 2f64.sqrt() * (PI * p[0]).sin());
        assert!((inner_product(&f, &f).unwrap() - 1.0).abs() < 1e-4);
        assert!((l2_norm(&f) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn sine_modes_are_orthogonal() {
        let g = unit1(200);
        let f = GridFunction::from_fn(g.clone(), |p| (PI * p[0]).sin());
        let h = GridFunction::from_fn(g, |p| (2.0 * PI * p[0]).sin());
        assert!(inner_product(&f, &h).unwrap().abs() < 1e-10);
    }

    #[test]
    fn linear_integrand_is_exact() {
        let g = unit1(200);
        let f = GridFunction::from_fn(g.clone(), |p| p[0]);
        let one = GridFunction::constant(g, 1.0);
        assert!((inner_product(&f, &one).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_function_norm() {
        assert_eq!(l2_norm(&GridFunction::zeros(unit1(16))), 0.0);
    }

    #[test]
    fn tensor_normalization_2d() {
        let g = Grid1D::unit(200).unwrap();
        let f = GridFunction::from_fn_1d(&g, |x| 2f64.sqrt() * (PI * x).sin());
        let t = tensor_product(&[f.clone(), f]).unwrap();
        assert!((l2_norm(&t) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn tensor_identity_and_pointwise() {
        let g = Grid1D::unit(200).unwrap();
        let f = GridFunction::from_fn_1d(&g, |x| (2.0 * PI * x).sin());
        assert_eq!(tensor_product(&[f.clone()]).unwrap(), f);
        let s = GridFunction::from_fn_1d(&g, |x| (PI * x).sin());
        let t = tensor_product(&[f, s]).unwrap();
        assert!((t.get(&[50, 100]) - 1.0).abs() < 1e-12);
        assert!((t.interpolate(&[0.25, 0.5]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_constant_along_second_axis() {
        let g = Grid1D::unit(20).unwrap();
        let f = GridFunction::from_fn_1d(&g, |x| (PI * x).sin());
        let one = GridFunction::from_fn_1d(&g, |_| 1.0);
        let t = tensor_product(&[f, one]).unwrap();
        for i in 0..=20 {
            let line = t.axis_line(1, &[i, 0]);
            assert!(line.iter().all(|&v| v == line[0]));
        }
    }

    #[test]
    fn tensor_product_on_checks_axes() {
        let grid = Arc::new(Grid::unit(2, 16).unwrap());
        let f = GridFunction::from_fn_1d(&Grid1D::unit(16).unwrap(), |x| x);
        let bad = GridFunction::from_fn_1d(&Grid1D::unit(20).unwrap(), |x| x);
        assert!(tensor_product_on(&grid, &[f.clone(), f.clone()]).is_ok());
        assert!(matches!(
            tensor_product_on(&grid, &[f.clone(), bad]),
            Err(SteerError::GridMismatch(_))
        ));
        assert!(tensor_product_on(&grid, &[f]).is_err());
    }

    #[test]
    fn mismatched_grids_error() {
        let f = GridFunction::constant(unit1(16), 1.0);
        let g = GridFunction::constant(unit1(32), 1.0);
        assert!(matches!(inner_product(&f, &g), Err(SteerError::GridMismatch(_))));
        assert!(GridFunction::from_values(unit1(16), vec![0.0; 3]).is_err());
    }

    #[test]
    fn dirichlet_flag() {
        let f = GridFunction::constant(unit1(16), 1.0);
        assert!(!f.is_dirichlet());
        let d = f.with_dirichlet();
        assert!(d.is_dirichlet());
        assert_eq!(d.values()[0], 0.0);
        assert_eq!(d.values()[16], 0.0);
        assert!(d.scale(2.0).is_dirichlet());
        assert!(!d.map(|x| x + 1.0).is_dirichlet());
    }

    #[test]
    fn flat_index_axis_one_fastest() {
        let grid = Grid::new(vec![Grid1D::unit(8).unwrap(), Grid1D::new(0.0, 2.0, 10).unwrap()]).unwrap();
        assert_eq!(grid.flat(&[3, 2]), 3 + 9 * 2);
        assert_eq!(grid.multi(3 + 9 * 2), vec![3, 2]);
        let c = grid.coords(grid.flat(&[8, 10]));
        assert_eq!(c, vec![1.0, 2.0]);
    }

    #[test]
    fn csv_layout() {
        let grid = Arc::new(Grid::unit(2, 8).unwrap());
        let f = GridFunction::from_fn(grid, |p| p[0] + 10.0 * p[1]);
        let csv = f.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,x2,value");
        assert_eq!(lines.len(), 82);
        assert_eq!(lines[2], "0.125,0,0.125");
        assert_eq!(lines[10], "0,0.125,1.25");
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-9.869604401089358), "-9.86960440109");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig(123456.0), "123456");
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
        assert_eq!(fmt_sig(9.99999999999999e5), "1000000");
    }

    #[test]
    fn interpolation_is_exact_for_bilinear() {
        let grid = Arc::new(Grid::unit(2, 10).unwrap());
        let f = GridFunction::from_fn(grid, |p| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1]);
        let (x, y) = (0.337, 0.781);
        let exact = 1.0 + 2.0 * x - y + 3.0 * x * y;
        assert!((f.interpolate(&[x, y]) - exact).abs() < 1e-12);
    }
}
