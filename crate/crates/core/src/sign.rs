//! Axis-aligned sign-change structure of grid functions.
//!
//! A pattern records, per axis, the ordered coordinates where the function
//! changes sign across a hyperplane `x_i = const`, plus the sign in the
//! first cell (below every first change point). Detection scans the axis
//! lines of the lattice and requires all parallel lines to agree.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SteerError};
use crate::grid::{fmt_sig, GridFunction};

/// Relative sign-neutral band used when no tolerance is given.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Interior neutral runs at least this long make a cell sign-neutral.
const NEUTRAL_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SignPattern {
    changes: Vec<Vec<f64>>,
    first_sign: i8,
}

impl SignPattern {
    pub fn new(changes: Vec<Vec<f64>>, first_sign: i8) -> Result<Self> {
        if first_sign != 1 && first_sign != -1 {
            return Err(SteerError::InvalidArgument(format!(
                "first-cell sign must be +1 or -1, got {first_sign}"
            )));
        }
        if changes.is_empty() {
            return Err(SteerError::InvalidArgument("pattern needs an axis".into()));
        }
        for (i, c) in changes.iter().enumerate() {
            if c.iter().any(|x| !x.is_finite()) || c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SteerError::InvalidArgument(format!(
                    "axis {} change points must be finite and strictly increasing",
                    i + 1
                )));
            }
        }
        Ok(SignPattern { changes, first_sign })
    }

    pub fn dim(&self) -> usize {
        self.changes.len()
    }

    pub fn changes(&self, axis: usize) -> &[f64] {
        &self.changes[axis]
    }

    pub fn all_changes(&self) -> &[Vec<f64>] {
        &self.changes
    }

    pub fn first_sign(&self) -> i8 {
        self.first_sign
    }

    /// `k_i − 1` for each axis.
    pub fn counts(&self) -> Vec<usize> {
        self.changes.iter().map(Vec::len).collect()
    }

    /// Sign of the cell containing `x`: alternates across every change.
    pub fn sign_at(&self, x: &[f64]) -> i8 {
        let flips: usize = self
            .changes
            .iter()
            .zip(x)
            .map(|(c, &xi)| c.iter().filter(|&&z| z < xi).count())
            .sum();
        if flips % 2 == 0 {
            self.first_sign
        } else {
            -self.first_sign
        }
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dim = {}", self.dim())?;
        writeln!(f, "first_sign = {}", if self.first_sign > 0 { "+1" } else { "-1" })?;
        for (i, c) in self.changes.iter().enumerate() {
            let xs: Vec<String> = c.iter().map(|&x| fmt_sig(x)).collect();
            writeln!(f, "axis{} = {}", i + 1, xs.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for SignPattern {
    type Err = SteerError;

    fn from_str(s: &str) -> Result<Self> {
        let mut dim = None;
        let mut sign = None;
        let mut axes: Vec<(usize, Vec<f64>)> = Vec::new();
        for (n, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| SteerError::Config {
                line: n + 1,
                message: m.to_string(),
            };
            let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad("bad dim"))?),
                "first_sign" => {
                    sign = Some(match v {
                        "+1" | "1" | "+" => 1,
                        "-1" | "-" => -1,
                        _ => return Err(bad("first_sign must be +1 or -1")),
                    })
                }
                _ if k.starts_with("axis") => {
                    let i: usize = k[4..].parse().map_err(|_| bad("bad axis key"))?;
                    let xs = v
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|_| bad("bad coordinate")))
                        .collect::<Result<Vec<_>>>()?;
                    axes.push((i, xs));
                }
                _ => return Err(bad(&format!("unknown key '{k}'"))),
            }
        }
        let dim = dim.ok_or_else(|| SteerError::InvalidArgument("missing dim".into()))?;
        let sign = sign.ok_or_else(|| SteerError::InvalidArgument("missing first_sign".into()))?;
        let mut changes = vec![None; dim];
        for (i, xs) in axes {
            if i == 0 || i > dim || changes[i - 1].is_some() {
                return Err(SteerError::InvalidArgument(format!("axis{i} out of place")));
            }
            changes[i - 1] = Some(xs);
        }
        let changes = changes
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| SteerError::InvalidArgument(format!("missing axis{}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        SignPattern::new(changes, sign)
    }
}

fn default_tol(f: &GridFunction) -> f64 {
    DEFAULT_REL_TOL * f.max_abs()
}

fn sgn(x: f64, tol: f64) -> i8 {
    if x > tol {
        1
    } else if x < -tol {
        -1
    } else {
        0
    }
}

/// Sign changes along one line: `(coordinate, sign after)` plus the first sign.
/// Neutral nodes are skipped; the crossing is interpolated between the two
/// straddling non-neutral nodes.
fn line_changes(xs: &[f64], vals: &[f64], tol: f64) -> (Vec<f64>, i8, usize) {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    let mut first = 0i8;
    let mut longest_run = 0usize;
    let mut run = 0usize;
    let last = vals.len() - 1;
    for i in 1..last {
        let s = sgn(vals[i], tol);
        if s == 0 {
            run += 1;
            longest_run = longest_run.max(run);
            continue;
        }
        run = 0;
        match prev {
            None => first = s,
            Some(p) => {
                if sgn(vals[p], tol) != s {
                    let (fp, fi) = (vals[p], vals[i]);
                    let x = xs[p] + (xs[i] - xs[p]) * fp / (fp - fi);
                    out.push(x);
                }
            }
        }
        prev = Some(i);
    }
    if prev.is_none() {
        // the whole line is neutral
        longest_run = 0;
    }
    (out, first, longest_run)
}

/// Anchors for every interior axis line parallel to `axis`.
fn interior_anchors(f: &GridFunction, axis: usize) -> Vec<Vec<usize>> {
    let g = f.grid();
    let mut anchors = vec![vec![0usize; g.dim()]];
    for other in 0..g.dim() {
        if other == axis {
            continue;
        }
        let n = g.axis(other).cells();
        anchors = anchors
            .into_iter()
            .flat_map(|a| {
                (1..n).map(move |j| {
                    let mut b = a.clone();
                    b[other] = j;
                    b
                })
            })
            .collect();
    }
    anchors
}

/// Detect the axis-aligned sign pattern of `f`. `tol` is the absolute
/// sign-neutral band; pass `None` for `1e-9 · max|f|`.
pub fn detect_pattern(f: &GridFunction, tol: Option<f64>) -> Result<SignPattern> {
    let tol = tol.unwrap_or_else(|| default_tol(f));
    let g = f.grid();
    let mut changes = Vec::with_capacity(g.dim());
    let mut first_sign = 0i8;
    for axis in 0..g.dim() {
        let ax = g.axis(axis);
        let mut reference: Option<Vec<f64>> = None;
        let mut sums: Vec<f64> = Vec::new();
        let mut lines = 0usize;
        for anchor in interior_anchors(f, axis) {
            let vals = f.axis_line(axis, &anchor);
            let (c, first, run) = line_changes(ax.nodes(), &vals, tol);
            if first == 0 {
                // line lies inside a zero hyperplane of another axis
                continue;
            }
            if run >= NEUTRAL_RUN {
                let mut cell = anchor.clone();
                cell[axis] = usize::MAX;
                return Err(SteerError::AmbiguousSign { cell });
            }
            if axis == 0 && first_sign == 0 {
                first_sign = first;
            }
            match &reference {
                None => {
                    sums = c.clone();
                    reference = Some(c);
                }
                Some(r) => {
                    if r.len() != c.len() {
                        return Err(SteerError::NonAxisAligned {
                            axis: axis + 1,
                            detail: format!("lines disagree on interface count ({} vs {})", r.len(), c.len()),
                        });
                    }
                    for (j, (&a, &b)) in r.iter().zip(&c).enumerate() {
                        if (a - b).abs() > 2.0 * ax.dx() {
                            return Err(SteerError::NonAxisAligned {
                                axis: axis + 1,
                                detail: format!(
                                    "interface {} moves from {} to {} between parallel lines",
                                    j + 1,
                                    fmt_sig(a),
                                    fmt_sig(b)
                                ),
                            });
                        }
                        sums[j] += b;
                    }
                }
            }
            lines += 1;
        }
        if lines == 0 {
            return Err(SteerError::AmbiguousSign { cell: vec![0; g.dim()] });
        }
        changes.push(sums.iter().map(|s| s / lines as f64).collect());
    }
    SignPattern::new(changes, first_sign)
}

/// Equal counts, equal first sign, matched coordinates within `tol`.
pub fn same_pattern(p: &SignPattern, q: &SignPattern, tol: f64) -> bool {
    p.dim() == q.dim()
        && p.first_sign == q.first_sign
        && p.changes
            .iter()
            .zip(&q.changes)
            .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol))
}

/// Per-axis interface counts never increase along the sequence.
pub fn interface_count_monotone(trajectory: &[SignPattern]) -> bool {
    let counts: Vec<Vec<usize>> = trajectory.iter().map(SignPattern::counts).collect();
    counts_monotone(&counts)
}

pub fn counts_monotone(counts: &[Vec<usize>]) -> bool {
    counts
        .windows(2)
        .all(|w| w[0].len() == w[1].len() && w[0].iter().zip(&w[1]).all(|(a, b)| b <= a))
}

/// Per-axis maximum over interior lines of the number of sign changes.
/// Unlike [`detect_pattern`] this never fails, so it suits per-step
/// monitoring of states whose nodal set is not axis-aligned.
pub fn axis_interface_counts(f: &GridFunction, tol: Option<f64>) -> Vec<usize> {
    let tol = tol.unwrap_or_else(|| default_tol(f));
    let g = f.grid();
    (0..g.dim())
        .map(|axis| {
            interior_anchors(f, axis)
                .iter()
                .map(|a| line_changes(g.axis(axis).nodes(), &f.axis_line(axis, a), tol).0.len())
                .max()
                .unwrap_or(0)
        })
        .collect()
}
