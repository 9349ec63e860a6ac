//! Truncated singular integrals `K_ε f(x) = ∫_{ρ(x−y)>ε} k(x; x−y) f(y) dy`
//! on lattices, commutators with multipliers, series reconstruction from
//! harmonic expansions, and Hörmander-condition estimators.
//!
//! Evaluation points are lattice nodes, so `x − y` always lies on the offset
//! lattice `{(j_1 h_1, …, j_n h_n)}`. For kernels that do not depend on `x`
//! (or do so through a scalar factor) the kernel is tabulated once on that
//! offset lattice and every output value is a sum of table rows against
//! rows of `w·f`, where `w` are the trapezoid weights.
//!
//! Cells are the boxes `y + [−h/2, h/2]ⁿ`. A cell whose every point has
//! `ρ(x − ·) > ε` contributes the node value of the kernel, a cell with no
//! such point contributes nothing, and the remaining straddle cells
//! contribute the mean of the kernel over a regular subsample of the cell,
//! with the excluded subsamples counted as zero.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coverage::{self, Op};
use crate::error::{Error, Result};
use crate::gridfn::{Grid, GridFunction};
use crate::harmonics::{hsm_kernel, HarmonicBasis, HarmonicCoefficients, HsmKernel, SphereTable};
use crate::kernel::{KernelStructure, VariableKernel};
use crate::metric::{gauss_legendre, sphere_quadrature, AnisotropyProfile, Ellipsoid};
use crate::rng::{random_in_unit_ball, random_unit_vector};

/// Inner cutoff and evaluation region of a truncated transform.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationPolicy {
    /// Cutoff `ε` in ρ-distance.
    pub epsilon: f64,
    /// Evaluation points must lie at ρ-distance at least `margin` from the
    /// box boundary. `None` means `ε + 2h`.
    pub margin: Option<f64>,
}

impl TruncationPolicy {
    pub fn new(epsilon: f64) -> Self {
        TruncationPolicy { epsilon, margin: None }
    }

    pub fn with_margin(epsilon: f64, margin: f64) -> Self {
        TruncationPolicy {
            epsilon,
            margin: Some(margin),
        }
    }

    pub fn margin_for(&self, grid: &Grid) -> f64 {
        self.margin.unwrap_or(self.epsilon + 2.0 * grid.max_spacing())
    }

    fn validate(&self, grid: &Grid, profile: &AnisotropyProfile) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        let minimum = 2.0 * grid.max_spacing();
        if self.epsilon < minimum * (1.0 - 1e-12) {
            return Err(Error::UnderResolved {
                epsilon: self.epsilon,
                minimum,
            });
        }
        let inradius = (0..grid.dim())
            .map(|i| (0.5 * (grid.upper()[i] - grid.lower()[i])).powf(1.0 / profile.exponents()[i]))
            .fold(f64::INFINITY, f64::min);
        if self.epsilon >= inradius {
            return Err(Error::invalid(format!(
                "epsilon {} is not below the box inradius {inradius}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Counts and error estimates gathered while discretizing the cutoff.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QuadratureDiagnostics {
    /// Offset cells straddling `ρ = ε`.
    pub straddle_cells: usize,
    /// Offset cells excluded entirely.
    pub excluded_cells: usize,
    pub evaluated_points: usize,
    /// Bound on the change of any output value when the straddle cells are
    /// resampled at twice the density per axis.
    pub cutoff_error_estimate: f64,
}

/// Output of an operator on a grid. Values outside `mask` are zero.
#[derive(Clone, Debug)]
pub struct OperatorResult {
    pub output: GridFunction,
    pub mask: Vec<bool>,
    pub diagnostics: QuadratureDiagnostics,
}

impl OperatorResult {
    /// `max |self − other|` over the common mask.
    pub fn max_difference(&self, other: &OperatorResult) -> f64 {
        self.output
            .values()
            .iter()
            .zip(other.output.values())
            .zip(self.mask.iter().zip(&other.mask))
            .filter(|(_, (a, b))| **a && **b)
            .map(|((u, v), _)| (u - v).abs())
            .fold(0.0, f64::max)
    }
}

/// Nodes at ρ-distance at least `margin` from the complement of the box.
pub fn evaluation_mask(grid: &Grid, profile: &AnisotropyProfile, margin: f64) -> Vec<bool> {
    let n = grid.dim();
    let mut x = vec![0.0; n];
    (0..grid.len())
        .map(|flat| {
            grid.point_into(flat, &mut x);
            let d = (0..n)
                .map(|i| {
                    let side = (x[i] - grid.lower()[i]).min(grid.upper()[i] - x[i]).max(0.0);
                    side.powf(1.0 / profile.exponents()[i])
                })
                .fold(f64::INFINITY, f64::min);
            d >= margin * (1.0 - 1e-12)
        })
        .collect()
}

pub(crate) fn subsamples_per_axis(n: usize) -> usize {
    // At least 16 subsamples per cell.
    if n == 2 {
        4
    } else {
        3
    }
}

pub(crate) fn subsample_offsets(spacing: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let n = spacing.len();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut k| {
            let mut p = vec![0.0; n];
            for i in (0..n).rev() {
                let j = k % per_axis;
                k /= per_axis;
                p[i] = ((j as f64 + 0.5) / per_axis as f64 - 0.5) * spacing[i];
            }
            p
        })
        .collect()
}

#[derive(Clone, Debug)]
enum CellClass {
    Inside,
    Excluded,
    /// Range into [`CutoffGeometry::included`].
    Straddle { start: usize, len: usize },
}

/// Classification of every offset cell against the cutoff `ρ = ε`.
#[derive(Clone, Debug)]
struct CutoffGeometry {
    points: Vec<usize>,
    spacing: Vec<f64>,
    /// `2N_i − 1` per axis.
    dims: Vec<usize>,
    strides: Vec<usize>,
    classes: Vec<CellClass>,
    /// Included subsample offsets, relative to the cell center.
    included: Vec<Vec<f64>>,
    per_cell: usize,
    fine_included: Vec<Vec<f64>>,
    fine_ranges: Vec<(usize, usize)>,
    fine_per_cell: usize,
}

impl CutoffGeometry {
    fn new(grid: &Grid, profile: &AnisotropyProfile, epsilon: f64) -> Self {
        let n = grid.dim();
        let points = grid.points().to_vec();
        let spacing = grid.spacing().to_vec();
        let dims: Vec<usize> = points.iter().map(|p| 2 * p - 1).collect();
        let mut strides = vec![1; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total: usize = dims.iter().product();
        let per_axis = subsamples_per_axis(n);
        let subs = subsample_offsets(&spacing, per_axis);
        let fine = subsample_offsets(&spacing, 2 * per_axis);
        let mut geometry = CutoffGeometry {
            points,
            spacing,
            dims,
            strides,
            classes: Vec::with_capacity(total),
            included: Vec::new(),
            per_cell: subs.len(),
            fine_included: Vec::new(),
            fine_ranges: Vec::new(),
            fine_per_cell: fine.len(),
        };
        let mut d = vec![0.0; n];
        let mut near = vec![0.0; n];
        let mut far = vec![0.0; n];
        let mut p = vec![0.0; n];
        for t in 0..total {
            geometry.offset_into(t, &mut d);
            for i in 0..n {
                let half = 0.5 * geometry.spacing[i];
                near[i] = (d[i].abs() - half).max(0.0);
                far[i] = d[i].abs() + half;
            }
            // ρ is nondecreasing in each |x_i|, so the extreme corners bound it.
            let class = if profile.rho(&near) > epsilon {
                CellClass::Inside
            } else if profile.rho(&far) <= epsilon {
                CellClass::Excluded
            } else {
                let start = geometry.included.len();
                for s in &subs {
                    for i in 0..n {
                        p[i] = d[i] + s[i];
                    }
                    if profile.rho(&p) > epsilon {
                        geometry.included.push(p.clone());
                    }
                }
                let fine_start = geometry.fine_included.len();
                for s in &fine {
                    for i in 0..n {
                        p[i] = d[i] + s[i];
                    }
                    if profile.rho(&p) > epsilon {
                        geometry.fine_included.push(p.clone());
                    }
                }
                geometry
                    .fine_ranges
                    .push((fine_start, geometry.fine_included.len() - fine_start));
                CellClass::Straddle {
                    start,
                    len: geometry.included.len() - start,
                }
            };
            geometry.classes.push(class);
        }
        geometry
    }

    /// Offset vector of table entry `t`.
    fn offset_into(&self, mut t: usize, out: &mut [f64]) {
        for i in 0..self.dims.len() {
            let j = t / self.strides[i];
            t %= self.strides[i];
            out[i] = (j as f64 - (self.points[i] - 1) as f64) * self.spacing[i];
        }
    }

    fn counts(&self) -> (usize, usize) {
        let straddle = self.fine_ranges.len();
        let excluded = self
            .classes
            .iter()
            .filter(|c| matches!(c, CellClass::Excluded))
            .count();
        (straddle, excluded)
    }

    /// Cell weight of `k` at table entry `t`: node value, zero, or
    /// subsample mean.
    fn cell_value(&self, t: usize, d: &[f64], k: &dyn Fn(&[f64]) -> f64) -> f64 {
        match &self.classes[t] {
            CellClass::Inside => k(d),
            CellClass::Excluded => 0.0,
            CellClass::Straddle { start, len } => {
                let sum: f64 = self.included[*start..start + len].iter().map(|p| k(p)).sum();
                sum / self.per_cell as f64
            }
        }
    }

    /// Tabulates a constant kernel and the total variation of the table
    /// under straddle-cell refinement.
    fn table(&self, k: &dyn Fn(&[f64]) -> f64) -> (OffsetTable, f64) {
        let n = self.dims.len();
        let total = self.classes.len();
        let mut values = vec![0.0; total];
        let mut d = vec![0.0; n];
        let mut refinement = 0.0;
        let mut straddle_index = 0;
        for (t, v) in values.iter_mut().enumerate() {
            self.offset_into(t, &mut d);
            *v = self.cell_value(t, &d, k);
            if matches!(self.classes[t], CellClass::Straddle { .. }) {
                let (start, len) = self.fine_ranges[straddle_index];
                straddle_index += 1;
                let fine: f64 = self.fine_included[start..start + len].iter().map(|p| k(p)).sum::<f64>()
                    / self.fine_per_cell as f64;
                refinement += (fine - *v).abs();
            }
        }
        (OffsetTable::new(values, self.dims[n - 1], self.strides.clone()), refinement)
    }
}

/// Kernel values on the offset lattice, reversed along the last axis so
/// that each output row sum is a forward dot product.
#[derive(Clone, Debug)]
struct OffsetTable {
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl OffsetTable {
    fn new(mut values: Vec<f64>, last: usize, strides: Vec<usize>) -> Self {
        for row in values.chunks_mut(last) {
            row.reverse();
        }
        OffsetTable { values, strides }
    }

    fn axpy(&mut self, c: f64, other: &OffsetTable) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    fn scaled(&self, c: f64) -> OffsetTable {
        OffsetTable {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Σ_y t_y (a_y − a_x) g_y`, the difference form used by commutators.
#[inline]
fn dot_difference(t: &[f64], a: &[f64], ax: f64, g: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = t.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += t[i] * ((a[i] - ax) * g[i]);
        acc[1] += t[i + 1] * ((a[i + 1] - ax) * g[i + 1]);
        acc[2] += t[i + 2] * ((a[i + 2] - ax) * g[i + 2]);
        acc[3] += t[i + 3] * ((a[i + 3] - ax) * g[i + 3]);
    }
    let mut tail = 0.0;
    for i in 4 * chunks..t.len() {
        tail += t[i] * ((a[i] - ax) * g[i]);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Weighted operand `w·f` with the row structure of the grid.
struct Operand<'a> {
    grid: &'a Grid,
    g: Vec<f64>,
    /// Rows of `g` that are not identically zero.
    live_rows: Vec<usize>,
}

impl<'a> Operand<'a> {
    fn new(f: &'a GridFunction) -> Self {
        let grid = f.grid();
        let w = grid.trapezoid_weights();
        let g: Vec<f64> = f.values().iter().zip(&w).map(|(v, w)| v * w).collect();
        let last = *grid.points().last().expect("n >= 2");
        let live_rows = g
            .chunks(last)
            .enumerate()
            .filter(|(_, row)| row.iter().any(|v| *v != 0.0))
            .map(|(r, _)| r)
            .collect();
        Operand { grid, g, live_rows }
    }

    /// Table row start for output node `ix` against operand row `row`.
    #[inline]
    fn table_start(&self, table: &OffsetTable, ix: &[usize], row: usize) -> usize {
        let n = ix.len();
        let points = self.grid.points();
        let mut rem = row;
        let mut start = 0;
        for i in (0..n - 1).rev() {
            let iy = rem % points[i];
            rem /= points[i];
            start += (points[i] - 1 + ix[i] - iy) * table.strides[i];
        }
        start + (points[n - 1] - 1 - ix[n - 1])
    }

    fn convolve(&self, table: &OffsetTable, ix: &[usize]) -> f64 {
        let last = *self.grid.points().last().expect("n >= 2");
        let mut total = 0.0;
        for &row in &self.live_rows {
            let s = self.table_start(table, ix, row);
            total += dot(&table.values[s..s + last], &self.g[row * last..(row + 1) * last]);
        }
        total
    }

    fn convolve_difference(&self, table: &OffsetTable, ix: &[usize], a: &[f64], ax: f64) -> f64 {
        let last = *self.grid.points().last().expect("n >= 2");
        let mut total = 0.0;
        for &row in &self.live_rows {
            let s = self.table_start(table, ix, row);
            let r = row * last..(row + 1) * last;
            total += dot_difference(&table.values[s..s + last], &a[r.clone()], ax, &self.g[r]);
        }
        total
    }
}

fn check_dims(k: &VariableKernel, f: &GridFunction) -> Result<()> {
    if k.dim() != f.grid().dim() {
        return Err(Error::GridMismatch(format!(
            "kernel dimension {} differs from grid dimension {}",
            k.dim(),
            f.grid().dim()
        )));
    }
    Ok(())
}

fn masked_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect()
}

/// Runs `eval` at every masked node in parallel and assembles the output.
fn assemble(
    grid: &Grid,
    mask: Vec<bool>,
    mut diagnostics: QuadratureDiagnostics,
    eval: impl Fn(usize, &[usize], &[f64]) -> f64 + Sync,
) -> Result<OperatorResult> {
    let n = grid.dim();
    let points = masked_indices(&mask);
    let computed: Vec<f64> = points
        .par_iter()
        .map(|&flat| {
            let mut ix = vec![0; n];
            grid.multi_index(flat, &mut ix);
            let x = grid.point(flat);
            eval(flat, &ix, &x)
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    for (flat, v) in points.iter().zip(computed) {
        values[*flat] = v;
    }
    diagnostics.evaluated_points = points.len();
    let output = GridFunction::from_values(grid.clone(), values)
        .map_err(|_| Error::invalid("operator produced a non-finite value"))?;
    Ok(OperatorResult {
        output,
        mask,
        diagnostics,
    })
}

enum Plan {
    /// `c(x)·(T ⋆ g)(x)`; `c ≡ 1` for constant kernels.
    Tabulated {
        table: OffsetTable,
        factor: Option<crate::kernel::BaseFn>,
    },
    General(crate::kernel::KernelFn),
}

struct Prepared {
    geometry: CutoffGeometry,
    plan: Plan,
    mask: Vec<bool>,
    diagnostics: QuadratureDiagnostics,
}

fn prepare(k: &VariableKernel, grid: &Grid, pol: &TruncationPolicy) -> Result<Prepared> {
    pol.validate(grid, k.profile())?;
    let geometry = CutoffGeometry::new(grid, k.profile(), pol.epsilon);
    let mask = evaluation_mask(grid, k.profile(), pol.margin_for(grid));
    let (straddle_cells, excluded_cells) = geometry.counts();
    let mut diagnostics = QuadratureDiagnostics {
        straddle_cells,
        excluded_cells,
        ..Default::default()
    };
    let plan = match k.structure() {
        KernelStructure::Constant(base) => {
            let (table, refinement) = geometry.table(base.as_ref());
            diagnostics.cutoff_error_estimate = refinement;
            Plan::Tabulated { table, factor: None }
        }
        KernelStructure::Separable { factor, base } => {
            let (table, refinement) = geometry.table(base.as_ref());
            diagnostics.cutoff_error_estimate = refinement;
            Plan::Tabulated {
                table,
                factor: Some(factor.clone()),
            }
        }
        KernelStructure::General(kf) => Plan::General(kf.clone()),
    };
    Ok(Prepared {
        geometry,
        plan,
        mask,
        diagnostics,
    })
}

/// Direct sum for kernels with general `x`-dependence; `a` switches to the
/// commutator difference form.
fn general_point(
    geometry: &CutoffGeometry,
    kf: &crate::kernel::KernelFn,
    op: &Operand,
    ix: &[usize],
    x: &[f64],
    a: Option<&[f64]>,
) -> f64 {
    let grid = op.grid;
    let n = grid.dim();
    let points = grid.points();
    let k = |xi: &[f64]| kf(x, xi);
    let mut iy = vec![0; n];
    let mut d = vec![0.0; n];
    let mut total = 0.0;
    let ax = a.map(|a| a[grid.flat_index(ix)]).unwrap_or(0.0);
    for (flat, g) in op.g.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        grid.multi_index(flat, &mut iy);
        let mut t = 0;
        for i in 0..n {
            t += (points[i] - 1 + ix[i] - iy[i]) * geometry.strides[i];
        }
        geometry.offset_into(t, &mut d);
        let kv = geometry.cell_value(t, &d, &k);
        total += match a {
            Some(a) => kv * ((a[flat] - ax) * g),
            None => kv * g,
        };
    }
    total
}

fn run_transform(k: &VariableKernel, f: &GridFunction, pol: &TruncationPolicy, a: Option<&GridFunction>) -> Result<OperatorResult> {
    check_dims(k, f)?;
    if let Some(a) = a {
        a.same_grid(f)?;
    }
    let grid = f.grid();
    let prepared = prepare(k, grid, pol)?;
    let op = Operand::new(f);
    let a_values = a.map(|a| a.values());
    let max_g = op.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut diagnostics = prepared.diagnostics.clone();
    diagnostics.cutoff_error_estimate *= max_g;
    match &prepared.plan {
        Plan::Tabulated { table, factor } => assemble(grid, prepared.mask.clone(), diagnostics, |flat, ix, x| {
            let c = factor.as_ref().map(|c| c(x)).unwrap_or(1.0);
            let s = match a_values {
                Some(a) => op.convolve_difference(table, ix, a, a[flat]),
                None => op.convolve(table, ix),
            };
            c * s
        }),
        Plan::General(kf) => {
            let geometry = &prepared.geometry;
            assemble(grid, prepared.mask.clone(), diagnostics, |_, ix, x| {
                general_point(geometry, kf, &op, ix, x, a_values)
            })
        }
    }
}

/// `K_ε f` at every node of `f`'s grid at ρ-distance at least the policy
/// margin from the box boundary; `f` is extended by zero outside the box.
pub fn truncated_transform(k: &VariableKernel, f: &GridFunction, pol: &TruncationPolicy) -> Result<OperatorResult> {
    coverage::touch(Op::TruncatedTransform);
    run_transform(k, f, pol, None)
}

/// `C_ε[a, k] f(x) = ∫_{ρ(x−y)>ε} k(x; x−y) (a(y) − a(x)) f(y) dy`, summed
/// in that difference form.
pub fn commutator(a: &GridFunction, k: &VariableKernel, f: &GridFunction, pol: &TruncationPolicy) -> Result<OperatorResult> {
    coverage::touch(Op::Commutator);
    a.same_grid(f)
        .map_err(|e| Error::invalid(format!("commutator operands: {e}")))?;
    run_transform(k, f, pol, Some(a))
}

/// `K_ε(a f) − a K_ε f`, the operator form of the commutator, for
/// cross-checking [`commutator`].
pub fn commutator_operator_form(
    a: &GridFunction,
    k: &VariableKernel,
    f: &GridFunction,
    pol: &TruncationPolicy,
) -> Result<OperatorResult> {
    let af = a.zip_with(f, |u, v| u * v)?;
    let kaf = run_transform(k, &af, pol, None)?;
    let kf = run_transform(k, f, pol, None)?;
    let values: Vec<f64> = kaf
        .output
        .values()
        .iter()
        .zip(kf.output.values())
        .zip(a.values())
        .map(|((u, v), a)| u - a * v)
        .collect();
    Ok(OperatorResult {
        output: GridFunction::from_values(f.grid().clone(), values)?,
        ..kaf
    })
}

/// `K_{sm,ε} f` with the constant kernel `H_sm`.
pub fn constant_transform(
    basis: &HarmonicBasis,
    s: usize,
    m: usize,
    profile: &AnisotropyProfile,
    f: &GridFunction,
    pol: &TruncationPolicy,
) -> Result<OperatorResult> {
    coverage::touch(Op::ConstantTransform);
    if m == 0 {
        return Err(Error::InvalidIndex { s, m });
    }
    let h = hsm_kernel(basis, s, m, profile)?;
    run_transform(&h.to_kernel(), f, pol, None)
}

/// Sphere rule used to expand kernels in [`series_transform`].
pub fn expansion_quadrature(n: usize, max_degree: usize) -> Result<crate::metric::SphereQuadrature> {
    match n {
        2 => sphere_quadrature(2, (8 * max_degree).max(256)),
        3 => sphere_quadrature(3, (2 * max_degree + 2).max(32)),
        other => Err(Error::UnsupportedDimension(other)),
    }
}

/// `b_sm(x) = ∫_{Σₙ} k(x; ξ) Y_sm(ξ) dσ_ξ`.
pub fn kernel_coefficients(k: &VariableKernel, x: &[f64], table: &SphereTable) -> HarmonicCoefficients {
    table.expand(|u| k.evaluate(x, u))
}

/// Series reconstruction and what was dropped from it.
#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub result: OperatorResult,
    /// Coefficients of the `x`-independent part of the kernel (for
    /// separable kernels, of the base kernel); `None` for general kernels.
    pub coefficients: Option<HarmonicCoefficients>,
    /// Largest `|b_{1,0}|` seen; the degree-zero term is left out because
    /// it carries no cancellation.
    pub degree_zero_coefficient: f64,
}

/// `Σ_{1≤m≤M} Σ_s b_sm(x) K_{sm,ε} f(x)`.
pub fn series_transform(k: &VariableKernel, f: &GridFunction, pol: &TruncationPolicy, max_degree: usize) -> Result<SeriesResult> {
    coverage::touch(Op::SeriesTransform);
    check_dims(k, f)?;
    if max_degree < 2 {
        return Err(Error::invalid(format!("series degree must be >= 2, got {max_degree}")));
    }
    let n = k.dim();
    let basis = HarmonicBasis::new(n, max_degree)?;
    let q = expansion_quadrature(n, max_degree)?;
    let sphere = SphereTable::new(&basis, &q)?;
    let grid = f.grid();
    let harmonics: Vec<HsmKernel> = basis
        .indices()
        .iter()
        .filter(|(_, m)| *m >= 1)
        .map(|(s, m)| hsm_kernel(&basis, *s, *m, k.profile()))
        .collect::<Result<_>>()?;

    let (base, factor) = match k.structure() {
        KernelStructure::Constant(b) => (Some(b.clone()), None),
        KernelStructure::Separable { factor, base } => (Some(base.clone()), Some(factor.clone())),
        KernelStructure::General(_) => (None, None),
    };

    if let Some(base) = base {
        let c = sphere.expand(|u| base(u));
        let mut combined: Option<OffsetTable> = None;
        pol.validate(grid, k.profile())?;
        let geometry = CutoffGeometry::new(grid, k.profile(), pol.epsilon);
        for h in &harmonics {
            let b = c.get(h.s(), h.m());
            let (t, _) = geometry.table(&|xi: &[f64]| h.value(xi));
            match combined.as_mut() {
                Some(acc) => acc.axpy(b, &t),
                None => combined = Some(t.scaled(b)),
            }
        }
        let table = combined.expect("max_degree >= 2 gives harmonics");
        let mask = evaluation_mask(grid, k.profile(), pol.margin_for(grid));
        let (straddle_cells, excluded_cells) = geometry.counts();
        let diagnostics = QuadratureDiagnostics {
            straddle_cells,
            excluded_cells,
            ..Default::default()
        };
        let op = Operand::new(f);
        let result = assemble(grid, mask, diagnostics, |_, ix, x| {
            let scale = factor.as_ref().map(|c| c(x)).unwrap_or(1.0);
            scale * op.convolve(&table, ix)
        })?;
        return Ok(SeriesResult {
            result,
            degree_zero_coefficient: c.get(1, 0).abs(),
            coefficients: Some(c),
        });
    }

    let parts: Vec<OperatorResult> = harmonics
        .iter()
        .map(|h| run_transform(&h.to_kernel(), f, pol, None))
        .collect::<Result<_>>()?;
    let mask = parts[0].mask.clone();
    let diagnostics = parts[0].diagnostics.clone();
    let points = masked_indices(&mask);
    let per_point: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&flat| {
            let x = grid.point(flat);
            let c = kernel_coefficients(k, &x, &sphere);
            let v = harmonics
                .iter()
                .zip(&parts)
                .map(|(h, part)| c.get(h.s(), h.m()) * part.output.values()[flat])
                .sum();
            (v, c.get(1, 0).abs())
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    let mut b0 = 0.0f64;
    for (flat, (v, c0)) in points.iter().zip(per_point) {
        values[*flat] = v;
        b0 = b0.max(c0);
    }
    Ok(SeriesResult {
        result: OperatorResult {
            output: GridFunction::from_values(grid.clone(), values)?,
            mask,
            diagnostics,
        },
        coefficients: None,
        degree_zero_coefficient: b0,
    })
}

/// Estimate of
/// `sup |H(x−y) − H(x₀−y)| ρ(x₀−y)^{α+1} / (m^{n/2} ρ(x₀−x))`
/// over `x ∈ e` and `2r < ρ(y − x₀) ≤ 64r`, where `x₀, r` are the center
/// and radius of `e`.
///
/// `samples` random pairs are drawn; the best few are then refined by a
/// shrinking random local search, which never leaves the admissible set.
/// The result is always attained by some admissible pair, so it is a lower
/// bound for the true supremum.
pub fn hormander_pointwise(
    basis: &HarmonicBasis,
    s: usize,
    m: usize,
    profile: &AnisotropyProfile,
    e: &Ellipsoid,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    coverage::touch(Op::HormanderPointwise);
    if samples < 1000 {
        return Err(Error::invalid(format!("need at least 1000 samples, got {samples}")));
    }
    let h = hsm_kernel(basis, s, m, profile)?;
    let n = profile.dim();
    let alpha = profile.homogeneous_dimension();
    let r = e.radius();
    let scale = (m.max(1) as f64).powf(n as f64 / 2.0);
    // A pair is (u, τ, θ): x = x₀ + r∘u with |u| ≤ 1, and y = x₀ + t∘θ with
    // t = 2r·32^τ, τ ∈ (0, 1], θ ∈ Σₙ.
    let ratio = |u: &[f64], tau: f64, theta: &[f64]| -> f64 {
        let dx = profile.dilate(r, u);
        let rho_dx = profile.rho(&dx);
        if rho_dx == 0.0 {
            return 0.0;
        }
        let t = 2.0 * r * 32f64.powf(tau);
        let dy = profile.dilate(t, theta);
        // With x = x₀ + dx and y = x₀ + dy: x − y = dx − dy, x₀ − y = −dy.
        let xy: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a - b).collect();
        let x0y: Vec<f64> = dy.iter().map(|b| -b).collect();
        let diff = (h.value(&xy) - h.value(&x0y)).abs();
        diff * t.powf(alpha + 1.0) / (scale * rho_dx)
    };
    const KEEP: usize = 24;
    const STEPS: usize = 300;
    let mut best: Vec<(f64, Vec<f64>, f64, Vec<f64>)> = Vec::with_capacity(KEEP + 1);
    for _ in 0..samples {
        let u = random_in_unit_ball(rng, n);
        // Open at 2r: 1 − U lies in (0, 1].
        let tau = 1.0 - rng.gen::<f64>();
        let theta = random_unit_vector(rng, n);
        let v = ratio(&u, tau, &theta);
        if best.len() < KEEP || v > best[KEEP - 1].0 {
            let at = best.iter().position(|b| v > b.0).unwrap_or(best.len());
            best.insert(at, (v, u, tau, theta));
            best.truncate(KEEP);
        }
    }
    let mut sup = 0.0f64;
    for (mut v, mut u, mut tau, mut theta) in best {
        let mut step = 0.1;
        for _ in 0..STEPS {
            let mut u2: Vec<f64> = u.iter().map(|c| c + step * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let norm = u2.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1.0 {
                u2.iter_mut().for_each(|c| *c /= norm);
            }
            let tau2 = (tau + step * (2.0 * rng.gen::<f64>() - 1.0)).clamp(f64::MIN_POSITIVE, 1.0);
            let mut th2: Vec<f64> = theta.iter().map(|c| c + step * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let tn = th2.iter().map(|c| c * c).sum::<f64>().sqrt();
            th2.iter_mut().for_each(|c| *c /= tn);
            let v2 = ratio(&u2, tau2, &th2);
            if v2 > v {
                (v, u, tau, theta) = (v2, u2, tau2, th2);
            } else {
                step = (step * 0.97).max(1e-4);
            }
        }
        sup = sup.max(v);
    }
    Ok(sup)
}

/// Values of the Hörmander integral `∫_{4ρ(x) ≤ ρ(y) ≤ R} |H(y−x) − H(y)| dy`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HormanderIntegral {
    /// Truncated at `R = r_max`.
    pub value: f64,
    /// Truncated at `R = r_max/2`.
    pub half_radius_value: f64,
    /// Estimate of the untruncated integral, assuming the leading tail
    /// behaviour `c/R`: `2·value − half_radius_value`.
    pub tail_corrected: f64,
}

/// Quadrature in anisotropic polar coordinates `y = t∘θ`, `θ ∈ Σₙ`, where
/// `dy = J(θ) t^{α−1} dt dσ(θ)` with `J(θ) = Σ α_i θ_i²`.
pub fn hormander_integral(
    basis: &HarmonicBasis,
    s: usize,
    m: usize,
    profile: &AnisotropyProfile,
    x: &[f64],
    r_max: f64,
) -> Result<HormanderIntegral> {
    coverage::touch(Op::HormanderIntegral);
    let h = hsm_kernel(basis, s, m, profile)?;
    let n = profile.dim();
    let rx = profile.rho(x);
    if rx <= 0.0 {
        return Err(Error::invalid("hormander_integral needs rho(x) > 0"));
    }
    let inner = 4.0 * rx;
    if r_max <= 2.0 * inner {
        return Err(Error::invalid(format!("r_max must exceed 8 rho(x) = {}", 2.0 * inner)));
    }
    let q = match n {
        2 => sphere_quadrature(2, 512)?,
        _ => sphere_quadrature(n, 32)?,
    };
    let alpha = profile.homogeneous_dimension();
    let jac: Vec<f64> = q
        .nodes()
        .iter()
        .map(|th| th.iter().zip(profile.exponents()).map(|(t, a)| a * t * t).sum())
        .collect();
    let (gl_x, gl_w) = gauss_legendre(16);
    // Panels of width ln(2)/2 in ln t, so both r_max and r_max/2 are panel ends.
    let panel = 0.5 * std::f64::consts::LN_2;
    let span = (r_max / inner).ln();
    let panels = (span / panel).ceil() as usize;
    let width = span / panels as f64;
    let half_cut = panels - (std::f64::consts::LN_2 / width).round() as usize;
    let mut totals = Vec::with_capacity(panels);
    let mut y = vec![0.0; n];
    let mut yx = vec![0.0; n];
    for p in 0..panels {
        let a = inner.ln() + p as f64 * width;
        let mut acc = 0.0;
        for (gx, gw) in gl_x.iter().zip(&gl_w) {
            let lt = a + 0.5 * width * (gx + 1.0);
            let t = lt.exp();
            let radial = 0.5 * width * gw * t.powf(alpha);
            let mut ang = 0.0;
            for ((th, w), j) in q.nodes().iter().zip(q.weights()).zip(&jac) {
                for i in 0..n {
                    y[i] = t.powf(profile.exponents()[i]) * th[i];
                    yx[i] = y[i] - x[i];
                }
                ang += w * j * (h.value(&yx) - h.value(&y)).abs();
            }
            acc += radial * ang;
        }
        totals.push(acc);
    }
    let value: f64 = totals.iter().sum();
    let half_radius_value: f64 = totals[..half_cut].iter().sum();
    Ok(HormanderIntegral {
        value,
        half_radius_value,
        tail_corrected: 2.0 * value - half_radius_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sample;
    use crate::kernel::builtin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn bump(x: &[f64]) -> f64 {
        (-(x[0] * x[0] + x[1] * x[1]) / 0.5).exp()
    }

    #[test]
    fn constant_input_cancels_at_center() {
        let grid = Grid::cube(2, 2.0, 41).unwrap();
        let f = sample(|_| 3.0, &grid).unwrap();
        let k = builtin("CZ2").unwrap();
        let out = truncated_transform(&k, &f, &TruncationPolicy::new(0.25)).unwrap();
        let c = grid.nearest_index(&[0.0, 0.0]);
        assert!(out.mask[c]);
        assert!(out.output.values()[c].abs() < 3e-3);
    }

    #[test]
    fn under_resolved_epsilon_is_rejected() {
        let grid = Grid::cube(2, 2.0, 41).unwrap();
        let f = sample(bump, &grid).unwrap();
        let k = builtin("CZ2").unwrap();
        let err = truncated_transform(&k, &f, &TruncationPolicy::new(0.1)).unwrap_err();
        assert!(matches!(err, Error::UnderResolved { .. }));
    }

    #[test]
    fn linear_in_f() {
        let grid = Grid::cube(2, 2.0, 33).unwrap();
        let f = sample(bump, &grid).unwrap();
        let g = sample(|x| x[0] * (-x[1] * x[1]).exp(), &grid).unwrap();
        let fg = f.zip_with(&g, |a, b| a + b).unwrap();
        let k = builtin("MIX12").unwrap();
        let pol = TruncationPolicy::new(0.3);
        let a = truncated_transform(&k, &f, &pol).unwrap();
        let b = truncated_transform(&k, &g, &pol).unwrap();
        let ab = truncated_transform(&k, &fg, &pol).unwrap();
        let scale = ab.output.max_abs();
        for i in 0..grid.len() {
            let d = ab.output.values()[i] - a.output.values()[i] - b.output.values()[i];
            assert!(d.abs() <= 1e-12 * scale);
        }
    }

    /// Polar-coordinate oracle: `∫_ε^R r^{-1} ∫ cos 2θ/√π f(x − rθ) dθ dr`.
    fn polar_oracle(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64, r_max: f64) -> f64 {
        let (gx, gw) = gauss_legendre(32);
        let panels = 200;
        let width = (r_max / eps).ln() / panels as f64;
        let angles = 720;
        let mut total = 0.0;
        for p in 0..panels {
            let a = eps.ln() + p as f64 * width;
            for (u, w) in gx.iter().zip(&gw) {
                let r = (a + 0.5 * width * (u + 1.0)).exp();
                let mut ang = 0.0;
                for j in 0..angles {
                    let th = 2.0 * PI * j as f64 / angles as f64;
                    ang += (2.0 * th).cos() * f(&[x[0] - r * th.cos(), x[1] - r * th.sin()]);
                }
                total += 0.5 * width * w * ang * 2.0 * PI / angles as f64 / PI.sqrt();
            }
        }
        total
    }

    #[test]
    fn modulated_bump_matches_polar_oracle() {
        let f = |x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let c2 = if r2 > 0.0 { (x[0] * x[0] - x[1] * x[1]) / r2 } else { 0.0 };
            r2 * c2 * (-r2).exp()
        };
        let grid = Grid::cube(2, 6.0, 241).unwrap();
        let fg = sample(f, &grid).unwrap();
        let k = builtin("CZ2").unwrap();
        let eps = 0.2;
        let out = truncated_transform(&k, &fg, &TruncationPolicy::new(eps)).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.25], [-1.0, 0.75]] {
            let i = grid.nearest_index(&x);
            let p = grid.point(i);
            let oracle = polar_oracle(f, &p, eps, 8.0 * 2f64.sqrt());
            let got = out.output.values()[i];
            assert!((got - oracle).abs() <= 1e-2 * oracle.abs().max(0.05), "{p:?}: {got} vs {oracle}");
        }
    }

    #[test]
    fn commutator_forms_agree_and_constant_multiplier_vanishes() {
        let grid = Grid::cube(2, 2.0, 33).unwrap();
        let f = sample(bump, &grid).unwrap();
        let pol = TruncationPolicy::new(0.3);
        for name in ["CZ2", "VAR-CZ2"] {
            let k = builtin(name).unwrap();
            let a = sample(|x| x[0], &grid).unwrap();
            let d = commutator(&a, &k, &f, &pol).unwrap();
            let o = commutator_operator_form(&a, &k, &f, &pol).unwrap();
            let scale = d.output.max_abs();
            assert!(d.max_difference(&o) <= 1e-10 * scale);
            let a2 = a.scale(-2.5);
            let d2 = commutator(&a2, &k, &f, &pol).unwrap();
            for (u, v) in d2.output.values().iter().zip(d.output.values()) {
                assert!((u + 2.5 * v).abs() <= 1e-12 * 2.5 * scale);
            }
            let c = sample(|_| 1.7, &grid).unwrap();
            assert_eq!(commutator(&c, &k, &f, &pol).unwrap().output.max_abs(), 0.0);
        }
        let other = sample(bump, &Grid::cube(2, 2.0, 17).unwrap()).unwrap();
        let k = builtin("CZ2").unwrap();
        assert!(commutator(&other, &k, &f, &pol).is_err());
    }

    #[test]
    fn general_kernel_matches_separable_path() {
        let grid = Grid::cube(2, 1.5, 21).unwrap();
        let f = sample(bump, &grid).unwrap();
        let pol = TruncationPolicy::new(0.3);
        let sep = builtin("VAR-CZ2").unwrap();
        let cz = builtin("CZ2").unwrap();
        let gen = VariableKernel::general("gen", cz.profile().clone(), usize::MAX, move |x, xi| {
            (2.0 + x[0].sin()) * cz.evaluate(x, xi)
        });
        let a = truncated_transform(&sep, &f, &pol).unwrap();
        let b = truncated_transform(&gen, &f, &pol).unwrap();
        assert!(a.max_difference(&b) <= 1e-12 * a.output.max_abs());
    }

    #[test]
    fn constant_transform_matches_cz2() {
        let grid = Grid::cube(2, 2.0, 33).unwrap();
        let f = sample(bump, &grid).unwrap();
        let pol = TruncationPolicy::new(0.3);
        let basis = HarmonicBasis::new(2, 4).unwrap();
        let iso = AnisotropyProfile::isotropic(2).unwrap();
        let a = constant_transform(&basis, 1, 2, &iso, &f, &pol).unwrap();
        let b = truncated_transform(&builtin("CZ2").unwrap(), &f, &pol).unwrap();
        assert!(a.max_difference(&b) <= 1e-12 * b.output.max_abs());
        assert!(matches!(
            constant_transform(&basis, 1, 0, &iso, &f, &pol),
            Err(Error::InvalidIndex { .. })
        ));
        let zero = GridFunction::zeros(grid.clone());
        assert_eq!(constant_transform(&basis, 2, 3, &iso, &zero, &pol).unwrap().output.max_abs(), 0.0);
    }

    #[test]
    fn series_reproduces_single_harmonic_kernels() {
        let grid = Grid::cube(2, 2.0, 33).unwrap();
        let f = sample(bump, &grid).unwrap();
        let pol = TruncationPolicy::new(0.3);
        for name in ["CZ2", "VAR-CZ2"] {
            let k = builtin(name).unwrap();
            let direct = truncated_transform(&k, &f, &pol).unwrap();
            let series = series_transform(&k, &f, &pol, 4).unwrap();
            assert!(series.result.max_difference(&direct) <= 1e-10 * direct.output.max_abs(), "{name}");
        }
    }

    #[test]
    fn hormander_pointwise_is_dilation_invariant() {
        let basis = HarmonicBasis::new(2, 2).unwrap();
        let iso = AnisotropyProfile::isotropic(2).unwrap();
        let e1 = Ellipsoid::new(vec![0.0, 0.0], 1.0, iso.clone()).unwrap();
        let e2 = Ellipsoid::new(vec![0.0, 0.0], 2.0, iso.clone()).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = hormander_pointwise(&basis, 1, 1, &iso, &e1, 2000, &mut r1).unwrap();
        let b = hormander_pointwise(&basis, 1, 1, &iso, &e2, 2000, &mut r2).unwrap();
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn hormander_integral_scales_exactly_in_isotropic_case() {
        let basis = HarmonicBasis::new(2, 2).unwrap();
        let iso = AnisotropyProfile::isotropic(2).unwrap();
        let a = hormander_integral(&basis, 1, 1, &iso, &[0.6, 0.8], 64.0).unwrap();
        let b = hormander_integral(&basis, 1, 1, &iso, &[1.2, 1.6], 128.0).unwrap();
        assert!((a.value - b.value).abs() <= 1e-3 * a.value);
        assert!(a.tail_corrected > a.value);
    }
}
