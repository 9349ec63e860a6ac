//! Real functions sampled on uniform lattices over boxes.
//!
//! Values are stored in row-major order: the last axis varies fastest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::{self, Op};
use crate::error::{Error, Result};

/// Default upper bound on the number of lattice points.
pub const MAX_POINTS: usize = 1 << 24;

/// Uniform lattice over the box `[lower, upper]`, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    points: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

/// Serializable description of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::new(s.lower, s.upper, s.points)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            lower: g.lower,
            upper: g.upper,
            points: g.points,
        }
    }
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        Grid::with_cap(lower, upper, points, MAX_POINTS)
    }

    pub fn with_cap(lower: Vec<f64>, upper: Vec<f64>, points: Vec<usize>, cap: usize) -> Result<Self> {
        let n = points.len();
        if n == 0 || lower.len() != n || upper.len() != n {
            return Err(Error::invalid("grid lower/upper/points must have the same nonzero length"));
        }
        let mut total: usize = 1;
        for (axis, &p) in points.iter().enumerate() {
            if p < 2 {
                return Err(Error::invalid(format!("axis {axis} needs at least 2 points")));
            }
            if !(lower[axis].is_finite() && upper[axis].is_finite() && upper[axis] > lower[axis]) {
                return Err(Error::invalid(format!("axis {axis} has an empty or non-finite range")));
            }
            total = total
                .checked_mul(p)
                .filter(|t| *t <= cap)
                .ok_or_else(|| Error::invalid(format!("grid exceeds the point cap {cap}")))?;
        }
        let spacing = (0..n)
            .map(|i| (upper[i] - lower[i]) / (points[i] - 1) as f64)
            .collect();
        let mut strides = vec![1; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * points[i + 1];
        }
        Ok(Grid {
            lower,
            upper,
            points,
            spacing,
            strides,
        })
    }

    /// The cube `[-half, half]ⁿ` with `points` nodes per axis.
    pub fn cube(n: usize, half: f64, points: usize) -> Result<Self> {
        Grid::new(vec![-half; n], vec![half; n], vec![points; n])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = flat / s;
            flat %= s;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        // Exact at the last node.
        if i + 1 == self.points[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing[axis]
        }
    }

    pub fn point_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for axis in 0..self.dim() {
            let i = rem / self.strides[axis];
            rem %= self.strides[axis];
            out[axis] = self.coordinate(axis, i);
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(flat, &mut p);
        p
    }

    /// Index of the lattice node closest to `x` (clamped to the box).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let mut flat = 0;
        for axis in 0..self.dim() {
            let t = ((x[axis] - self.lower[axis]) / self.spacing[axis]).round();
            let i = t.clamp(0.0, (self.points[axis] - 1) as f64) as usize;
            flat += i * self.strides[axis];
        }
        flat
    }

    /// One-dimensional trapezoid weight of node `i` on `axis`.
    pub fn axis_weight(&self, axis: usize, i: usize) -> f64 {
        let h = self.spacing[axis];
        if i == 0 || i + 1 == self.points[axis] {
            0.5 * h
        } else {
            h
        }
    }

    /// Tensor-product trapezoid weights for every node.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut idx = vec![0; self.dim()];
        (0..self.len())
            .map(|flat| {
                self.multi_index(flat, &mut idx);
                idx.iter()
                    .enumerate()
                    .map(|(axis, i)| self.axis_weight(axis, *i))
                    .product()
            })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }
}

/// Values of a function on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Sampling {
                point: grid.point(i),
                value: values[i],
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![0.0; grid.len()];
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?} points",
                self.grid.points, other.grid.points
            )));
        }
        Ok(())
    }

    /// Value at the lattice node nearest to `x`.
    pub fn nearest_value(&self, x: &[f64]) -> f64 {
        self.values[self.grid.nearest_index(x)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Samples `f` at every lattice node.
pub fn sample(f: impl Fn(&[f64]) -> f64, grid: &Grid) -> Result<GridFunction> {
    coverage::touch(Op::Sample);
    let mut x = vec![0.0; grid.dim()];
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        grid.point_into(flat, &mut x);
        let v = f(&x);
        if !v.is_finite() {
            return Err(Error::Sampling { point: x, value: v });
        }
        values.push(v);
    }
    Ok(GridFunction {
        grid: grid.clone(),
        values,
    })
}

/// Tensor-product trapezoid rule.
pub fn integrate(f: &GridFunction) -> f64 {
    coverage::touch(Op::Integrate);
    weighted_sum(&f.grid, |i| f.values[i])
}

fn weighted_sum(grid: &Grid, g: impl Fn(usize) -> f64) -> f64 {
    let n = grid.dim();
    let last = grid.points[n - 1];
    let mut idx = vec![0; n];
    let mut total = 0.0;
    for row in 0..grid.len() / last {
        grid.multi_index(row * last, &mut idx);
        let outer: f64 = (0..n - 1).map(|a| grid.axis_weight(a, idx[a])).product();
        let mut acc = 0.0;
        for j in 0..last {
            acc += grid.axis_weight(n - 1, j) * g(row * last + j);
        }
        total += outer * acc;
    }
    total
}

/// `(∫ |f|^p)^{1/p}` for `p ≥ 1`.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    coverage::touch(Op::LpNorm);
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("Lp exponent must be >= 1, got {p}")));
    }
    let scale = f.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    // Normalizing by the sup keeps |f|^p in range for large p.
    let s = weighted_sum(&f.grid, |i| (f.values[i].abs() / scale).powf(p));
    Ok(scale * s.powf(1.0 / p))
}

fn join(v: impl IntoIterator<Item = String>) -> String {
    v.into_iter().collect::<Vec<_>>().join(",")
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `# n=.. axes=.. lower=.. upper=..` followed by one
/// `x1,...,xn,value` row per node in row-major order.
pub fn write_csv(f: &GridFunction, path: impl AsRef<Path>) -> Result<()> {
    coverage::touch(Op::WriteCsv);
    let path = path.as_ref();
    fs::write(path, to_csv_string(f)).map_err(|e| Error::io(path, e))
}

pub fn to_csv_string(f: &GridFunction) -> String {
    let g = &f.grid;
    let mut out = format!(
        "# n={} axes={} lower={} upper={}\n",
        g.dim(),
        join(g.points.iter().map(|p| p.to_string())),
        join(g.lower.iter().map(|v| fmt17(*v))),
        join(g.upper.iter().map(|v| fmt17(*v))),
    );
    let mut x = vec![0.0; g.dim()];
    for (flat, v) in f.values.iter().enumerate() {
        g.point_into(flat, &mut x);
        for c in &x {
            out.push_str(&fmt17(*c));
            out.push(',');
        }
        let _ = writeln!(out, "{}", fmt17(*v));
    }
    out
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<GridFunction> {
    coverage::touch(Op::ReadCsv);
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_csv_str(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_list<T: std::str::FromStr>(line: usize, field: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| parse_err(line, format!("bad value `{t}` in field `{field}`")))
        })
        .collect()
}

pub fn from_csv_str(text: &str) -> Result<GridFunction> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, "header must start with `#`"))?;
    let mut fields = std::collections::HashMap::new();
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("malformed header token `{tok}`")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| parse_err(1, format!("missing header field `{k}`")))
    };
    let n: usize = get("n")?
        .parse()
        .map_err(|_| parse_err(1, "bad value in field `n`"))?;
    let axes: Vec<usize> = parse_list(1, "axes", get("axes")?)?;
    let lower: Vec<f64> = parse_list(1, "lower", get("lower")?)?;
    let upper: Vec<f64> = parse_list(1, "upper", get("upper")?)?;
    if axes.len() != n || lower.len() != n || upper.len() != n {
        return Err(parse_err(1, format!("header fields disagree with n={n}")));
    }
    let grid = Grid::new(lower, upper, axes).map_err(|e| parse_err(1, e.to_string()))?;

    let mut values = Vec::with_capacity(grid.len());
    let mut last_line = 1;
    for (line, row) in lines {
        if row.trim().is_empty() {
            continue;
        }
        last_line = line;
        let cols: Vec<f64> = parse_list(line, "row", row)?;
        if cols.len() != n + 1 {
            return Err(parse_err(line, format!("expected {} columns, found {}", n + 1, cols.len())));
        }
        let v = cols[n];
        if !v.is_finite() || cols[..n].iter().any(|c| !c.is_finite()) {
            return Err(parse_err(line, "non-finite entry"));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(parse_err(
            last_line,
            format!("row count mismatch: expected {}, found {}", grid.len(), values.len()),
        ));
    }
    Ok(GridFunction { grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_invariants() {
        let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![3, 5]).unwrap();
        assert_eq!(g.spacing(), &[0.5, 0.5]);
        assert_eq!(g.len(), 15);
        assert_eq!(g.point(7), vec![0.5, 0.0]);
        assert!(Grid::new(vec![0.0], vec![0.0], vec![3]).is_err());
        assert!(Grid::new(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(Grid::with_cap(vec![0.0, 0.0], vec![1.0, 1.0], vec![100, 100], 9999).is_err());
    }

    #[test]
    fn sample_examples() {
        let g = Grid::cube(2, 1.0, 5).unwrap();
        assert!(sample(|_| 1.0, &g).unwrap().values().iter().all(|v| *v == 1.0));
        let g01 = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![3, 3]).unwrap();
        let f = sample(|x| x[0], &g01).unwrap();
        assert_eq!(f.values()[0], 0.0);
        assert_eq!(f.values()[3], 0.5);
        assert_eq!(f.values()[6], 1.0);
        let gauss = sample(|x| (-x.iter().map(|v| v * v).sum::<f64>()).exp(), &g).unwrap();
        assert_eq!(gauss.nearest_value(&[0.0, 0.0]), 1.0);
        match sample(|x| 1.0 / x[0], &g) {
            Err(Error::Sampling { point, .. }) => assert_eq!(point[0], 0.0),
            other => panic!("expected sampling error, got {other:?}"),
        }
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(vec![-1.0, 0.0], vec![2.0, 0.5], vec![7, 4]).unwrap();
        assert!((integrate(&sample(|_| 1.0, &g).unwrap()) - 1.5).abs() < 1e-12);
        let g01 = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![9, 9]).unwrap();
        assert!((integrate(&sample(|x| x[0], &g01).unwrap()) - 0.5).abs() < 1e-12);
        let g6 = Grid::cube(2, 6.0, 257).unwrap();
        let gauss = sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp(), &g6).unwrap();
        assert!((integrate(&gauss) - PI).abs() < 1e-6);
    }

    #[test]
    fn trapezoid_order_is_two() {
        let f = |x: &[f64]| (x[0] * 1.3).sin() * (x[1] * 0.7).cos() + x[0] * x[0] * x[1];
        // exact integral over [0,1]^2
        let exact = {
            let a = (1.0 - (1.3f64).cos()) / 1.3;
            let b = (0.7f64).sin() / 0.7;
            a * b + 1.0 / 6.0
        };
        let err = |p| {
            let g = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![p, p]).unwrap();
            (integrate(&sample(f, &g).unwrap()) - exact).abs()
        };
        let order = (err(17) / err(33)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn lp_norm_examples() {
        let g = Grid::cube(2, 1.0, 201).unwrap();
        // indicator of [-0.5, 0.5]^2, measure 1
        let ind = sample(|x| if x[0].abs() < 0.5 && x[1].abs() < 0.5 { 1.0 } else { 0.0 }, &g).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert!((lp_norm(&ind, p).unwrap() - 1.0).abs() < 0.03);
        }
        let f = sample(|x| x[0].sin() + 0.3, &g).unwrap();
        let n = lp_norm(&f, 2.0).unwrap();
        assert!((lp_norm(&f.scale(-3.0), 2.0).unwrap() - 3.0 * n).abs() < 1e-12 * n);
        assert_eq!(lp_norm(&GridFunction::zeros(g.clone()), 2.0).unwrap(), 0.0);
        assert!(lp_norm(&f, 0.5).is_err());
    }

    #[test]
    fn csv_errors() {
        let g = Grid::cube(2, 1.0, 3).unwrap();
        let text = to_csv_string(&sample(|x| x[0], &g).unwrap());
        let no_axes = text.replacen("axes=3,3 ", "", 1);
        match from_csv_str(&no_axes) {
            Err(Error::Parse { line: 1, message }) => assert!(message.contains("axes"), "{message}"),
            other => panic!("{other:?}"),
        }
        let short: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        match from_csv_str(&short) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("expected 9") && message.contains("found 7"), "{message}")
            }
            other => panic!("{other:?}"),
        }
        let nan = text.replacen("0.0000000000000000e0\n", "NaN\n", 1);
        assert!(matches!(from_csv_str(&nan), Err(Error::Parse { .. })));
    }
}
