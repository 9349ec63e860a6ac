//! Maximal and sharp maximal functions, generalized Morrey norms, weight
//! conditions, and BMO moduli on sampled functions.
//!
//! The domain is the grid box `Ω`. Every average is over `E ∩ Ω` and is
//! normalized by the discrete measure of `E ∩ Ω`, so constants average to
//! themselves exactly. A node contributes its trapezoid weight times the
//! fraction of its cell `y + [−h/2, h/2]ⁿ` inside the ellipsoid; fractions of
//! cells cut by the boundary are estimated by regular subsampling.
//!
//! Suprema over ellipsoids are discretized by a radius ladder and, for
//! Morrey norms and BMO moduli, a sublattice of centers.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{self, Op};
use crate::error::{Error, Result};
use crate::gridfn::{Grid, GridFunction};
use crate::metric::{gauss_legendre, AnisotropyProfile, Ellipsoid};
use crate::numeric::{geometric_ladder, loglog_slope};
use crate::operators::{subsample_offsets, subsamples_per_axis};

type WeightFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A weight `ω(x, r) > 0`, with `ω(E) = ω(center, radius)`.
#[derive(Clone)]
pub struct Weight {
    name: String,
    eval: WeightFn,
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Weight").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Named weight as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    /// `const`, `power` or `power_log`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl WeightSpec {
    pub fn constant() -> Self {
        WeightSpec {
            kind: "const".into(),
            lambda: None,
        }
    }

    pub fn power(lambda: f64) -> Self {
        WeightSpec {
            kind: "power".into(),
            lambda: Some(lambda),
        }
    }

    pub fn power_log(lambda: f64) -> Self {
        WeightSpec {
            kind: "power_log".into(),
            lambda: Some(lambda),
        }
    }
}

impl Weight {
    pub fn new(name: impl Into<String>, eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Weight {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// `ω ≡ 1`.
    pub fn constant() -> Self {
        Weight::new("const", |_, _| 1.0)
    }

    /// `ω(x, r) = r^λ`.
    pub fn power(lambda: f64) -> Self {
        Weight::new(format!("power({lambda})"), move |_, r| r.powf(lambda))
    }

    /// `ω(x, r) = r^λ ln(r + 2)`.
    pub fn power_log(lambda: f64) -> Self {
        Weight::new(format!("power_log({lambda})"), move |_, r| r.powf(lambda) * (r + 2.0).ln())
    }

    pub fn from_spec(spec: &WeightSpec) -> Result<Self> {
        let lambda = || {
            spec.lambda
                .filter(|l| l.is_finite())
                .ok_or_else(|| Error::invalid(format!("weight `{}` needs a finite lambda", spec.kind)))
        };
        match spec.kind.as_str() {
            "const" => Ok(Weight::constant()),
            "power" => Ok(Weight::power(lambda()?)),
            "power_log" => Ok(Weight::power_log(lambda()?)),
            other => Err(Error::UnknownWeight(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: &[f64], r: f64) -> f64 {
        (self.eval)(x, r)
    }
}

/// Geometric radius ladder with ratio `√2`, from `max_i (2h_i)^{1/α_i}`
/// until an ellipsoid centered anywhere in the box covers the box.
pub fn default_radii(grid: &Grid, profile: &AnisotropyProfile) -> Vec<f64> {
    let n = grid.dim();
    let a = profile.exponents();
    let start = (0..n)
        .map(|i| (2.0 * grid.spacing()[i]).powf(1.0 / a[i]))
        .fold(0.0, f64::max);
    let stop = (0..n)
        .map(|i| ((n as f64).sqrt() * (grid.upper()[i] - grid.lower()[i])).powf(1.0 / a[i]))
        .fold(0.0, f64::max);
    geometric_ladder(start, stop, std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug)]
struct StencilRow {
    /// Offsets along all axes but the last.
    lead: Vec<isize>,
    /// Cells entirely inside, `[lo, hi)` along the last axis.
    full: (isize, isize),
    /// Cut cells and their inside fractions.
    partial: Vec<(isize, f64)>,
}

/// Cells of an ellipsoid relative to a lattice node `c`, for an ellipsoid
/// centered at `c + δ`.
#[derive(Clone, Debug)]
pub struct Stencil {
    rows: Vec<StencilRow>,
}

impl Stencil {
    fn new(spacing: &[f64], profile: &AnisotropyProfile, radius: f64, delta: &[f64]) -> Self {
        let n = spacing.len();
        let semi: Vec<f64> = profile.exponents().iter().map(|a| radius.powf(*a)).collect();
        let reach: Vec<isize> = (0..n)
            .map(|i| ((semi[i] + delta[i].abs()) / spacing[i]).ceil() as isize + 1)
            .collect();
        let subs = subsample_offsets(spacing, subsamples_per_axis(n));
        let bounds = |i: usize, j: isize| {
            let z = (j as f64 * spacing[i] - delta[i]).abs();
            let half = 0.5 * spacing[i];
            let lo = (z - half).max(0.0) / semi[i];
            let hi = (z + half) / semi[i];
            (lo * lo, hi * hi)
        };
        let last = n - 1;
        let mut rows = Vec::new();
        let mut lead = vec![0isize; last];
        for (i, l) in lead.iter_mut().enumerate() {
            *l = -reach[i];
        }
        'rows: loop {
            let (mut lmin, mut lmax) = (0.0, 0.0);
            for (i, j) in lead.iter().enumerate() {
                let (a, b) = bounds(i, *j);
                lmin += a;
                lmax += b;
            }
            if lmin < 1.0 {
                let mut full: Option<(isize, isize)> = None;
                let mut partial = Vec::new();
                for j in -reach[last]..=reach[last] {
                    let (a, b) = bounds(last, j);
                    if lmax + b < 1.0 {
                        full = Some(match full {
                            None => (j, j + 1),
                            Some((lo, _)) => (lo, j + 1),
                        });
                    } else if lmin + a < 1.0 {
                        let inside = subs
                            .iter()
                            .filter(|s| {
                                let mut q = 0.0;
                                for i in 0..n {
                                    let j_i = if i == last { j } else { lead[i] };
                                    let z = (j_i as f64 * spacing[i] - delta[i] + s[i]) / semi[i];
                                    q += z * z;
                                }
                                q < 1.0
                            })
                            .count();
                        if inside > 0 {
                            partial.push((j, inside as f64 / subs.len() as f64));
                        }
                    }
                }
                if full.is_some() || !partial.is_empty() {
                    rows.push(StencilRow {
                        lead: lead.clone(),
                        full: full.unwrap_or((0, 0)),
                        partial,
                    });
                }
            }
            // Next leading multi-index.
            let mut axis = last;
            loop {
                if axis == 0 {
                    break 'rows;
                }
                axis -= 1;
                lead[axis] += 1;
                if lead[axis] <= reach[axis] {
                    break;
                }
                lead[axis] = -reach[axis];
            }
        }
        Stencil { rows }
    }

    /// Visits the stencil placed at node `c`, clipped to the grid.
    fn visit(&self, grid: &Grid, c: &[usize], mut piece: impl FnMut(Piece)) {
        let n = grid.dim();
        let points = grid.points();
        let strides = grid.strides();
        let last = n - 1;
        let len = points[last] as isize;
        'rows: for row in &self.rows {
            let mut start = 0;
            for i in 0..last {
                let idx = c[i] as isize + row.lead[i];
                if idx < 0 || idx >= points[i] as isize {
                    continue 'rows;
                }
                start += idx as usize * strides[i];
            }
            let base = c[last] as isize;
            let lo = (base + row.full.0).max(0);
            let hi = (base + row.full.1).min(len);
            if lo < hi {
                piece(Piece::Run {
                    row_start: start,
                    lo: lo as usize,
                    hi: hi as usize,
                });
            }
            for (j, frac) in &row.partial {
                let idx = base + j;
                if idx >= 0 && idx < len {
                    piece(Piece::Cut {
                        flat: start + idx as usize,
                        fraction: *frac,
                    });
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Piece {
    /// Whole cells `row_start + lo .. row_start + hi`.
    Run { row_start: usize, lo: usize, hi: usize },
    /// One cut cell.
    Cut { flat: usize, fraction: f64 },
}

/// Trapezoid-weighted values with per-row prefix sums.
struct Prefix {
    wv: Vec<f64>,
    prefix: Vec<f64>,
    row_len: usize,
}

impl Prefix {
    fn new(grid: &Grid, w: &[f64], values: impl Fn(usize) -> f64) -> Self {
        let row_len = *grid.points().last().expect("n >= 2");
        let wv: Vec<f64> = (0..grid.len()).map(|i| w[i] * values(i)).collect();
        let mut prefix = Vec::with_capacity(grid.len() / row_len * (row_len + 1));
        for row in wv.chunks(row_len) {
            let mut acc = 0.0;
            prefix.push(0.0);
            for v in row {
                acc += v;
                prefix.push(acc);
            }
        }
        Prefix { wv, prefix, row_len }
    }

    fn sum(&self, grid: &Grid, stencil: &Stencil, c: &[usize]) -> f64 {
        let mut total = 0.0;
        stencil.visit(grid, c, |piece| match piece {
            Piece::Run { row_start, lo, hi } => {
                let row = row_start / self.row_len;
                let p = &self.prefix[row * (self.row_len + 1)..];
                total += p[hi] - p[lo];
            }
            Piece::Cut { flat, fraction } => total += fraction * self.wv[flat],
        });
        total
    }
}

/// Precomputed ellipsoid geometry for one grid, profile and radius ladder.
pub struct EllipsoidSampler<'g> {
    grid: &'g Grid,
    profile: AnisotropyProfile,
    weights: Vec<f64>,
    radii: Vec<f64>,
    node_stencils: Vec<Stencil>,
    measure: Prefix,
}

impl<'g> EllipsoidSampler<'g> {
    pub fn new(grid: &'g Grid, profile: &AnisotropyProfile, radii: &[f64]) -> Result<Self> {
        if profile.dim() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "profile dimension {} differs from grid dimension {}",
                profile.dim(),
                grid.dim()
            )));
        }
        if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("radii must be finite and positive"));
        }
        let zero = vec![0.0; grid.dim()];
        let weights = grid.trapezoid_weights();
        let measure = Prefix::new(grid, &weights, |_| 1.0);
        Ok(EllipsoidSampler {
            grid,
            node_stencils: radii
                .iter()
                .map(|r| Stencil::new(grid.spacing(), profile, *r, &zero))
                .collect(),
            profile: profile.clone(),
            weights,
            radii: radii.to_vec(),
            measure,
        })
    }

    pub fn with_default_radii(grid: &'g Grid, profile: &AnisotropyProfile) -> Result<Self> {
        Self::new(grid, profile, &default_radii(grid, profile))
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    fn node(&self, flat: usize) -> Vec<usize> {
        let mut c = vec![0; self.grid.dim()];
        self.grid.multi_index(flat, &mut c);
        c
    }

    /// Stencil of `E_r(x)` anchored at the node nearest to `x`.
    fn anchored(&self, x: &[f64], r: f64) -> (Vec<usize>, Stencil) {
        let flat = self.grid.nearest_index(x);
        let p = self.grid.point(flat);
        let delta: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
        (self.node(flat), Stencil::new(self.grid.spacing(), &self.profile, r, &delta))
    }

    fn prefix(&self, values: impl Fn(usize) -> f64) -> Prefix {
        Prefix::new(self.grid, &self.weights, values)
    }

    /// `(∫_{E∩Ω} v, |E ∩ Ω|)` with the discrete measure.
    fn integral(&self, p: &Prefix, stencil: &Stencil, c: &[usize]) -> (f64, f64) {
        (p.sum(self.grid, stencil, c), self.measure.sum(self.grid, stencil, c))
    }

    /// Mean of `v` and mean of `|v − mean|^q` over the stencil.
    fn oscillation(&self, v: &[f64], stencil: &Stencil, c: &[usize], q: f64) -> (f64, f64) {
        let mut cells: Vec<(usize, f64)> = Vec::new();
        stencil.visit(self.grid, c, |piece| match piece {
            Piece::Run { row_start, lo, hi } => cells.extend((row_start + lo..row_start + hi).map(|i| (i, 1.0))),
            Piece::Cut { flat, fraction } => cells.push((flat, fraction)),
        });
        // Offsets from a reference value keep constants exact.
        let base = cells.first().map_or(0.0, |(i, _)| v[*i]);
        let mut mass = 0.0;
        let mut sum = 0.0;
        for (i, frac) in &cells {
            let w = frac * self.weights[*i];
            mass += w;
            sum += w * (v[*i] - base);
        }
        if mass == 0.0 {
            return (0.0, 0.0);
        }
        let mean = base + sum / mass;
        let mut osc = 0.0;
        for (i, frac) in &cells {
            let d = (v[*i] - mean).abs();
            osc += frac * self.weights[*i] * if q == 1.0 { d } else { d.powf(q) };
        }
        (mean, osc / mass)
    }

    /// `sup_r |E_r(x)|^{-1} ∫_{E_r(x)} |f|^s` over the ladder.
    fn power_maximal_at(&self, p: &Prefix, stencils: &[Stencil], c: &[usize]) -> f64 {
        stencils
            .iter()
            .map(|st| {
                let (num, den) = self.integral(p, st, c);
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    fn stencils_at(&self, x: &[f64]) -> (Vec<usize>, Vec<Stencil>) {
        let c = self.node(self.grid.nearest_index(x));
        let stencils = self.radii.iter().map(|r| self.anchored(x, *r).1).collect();
        (c, stencils)
    }

    /// `M_s f(x)` at an arbitrary point of the box.
    pub fn m_s_at(&self, f: &GridFunction, x: &[f64], s: f64) -> f64 {
        let v = f.values();
        let p = self.prefix(|i| v[i].abs().powf(s));
        let (c, stencils) = self.stencils_at(x);
        self.power_maximal_at(&p, &stencils, &c).powf(1.0 / s)
    }

    /// `f♯(x)` at an arbitrary point of the box.
    pub fn sharp_at(&self, f: &GridFunction, x: &[f64]) -> f64 {
        let (c, stencils) = self.stencils_at(x);
        stencils
            .iter()
            .map(|st| self.oscillation(f.values(), st, &c, 1.0).1)
            .fold(0.0, f64::max)
    }

    /// `M_s f` at every node.
    pub fn m_s_field(&self, f: &GridFunction, s: f64) -> Result<GridFunction> {
        check_grid(self.grid, f)?;
        let v = f.values();
        let p = self.prefix(|i| v[i].abs().powf(s));
        let out: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|flat| {
                let c = self.node(flat);
                self.power_maximal_at(&p, &self.node_stencils, &c).powf(1.0 / s)
            })
            .collect();
        GridFunction::from_values(self.grid.clone(), out)
    }

    /// `f♯` at every node.
    pub fn sharp_field(&self, f: &GridFunction) -> Result<GridFunction> {
        check_grid(self.grid, f)?;
        let out: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|flat| {
                let c = self.node(flat);
                self.node_stencils
                    .iter()
                    .map(|st| self.oscillation(f.values(), st, &c, 1.0).1)
                    .fold(0.0, f64::max)
            })
            .collect();
        GridFunction::from_values(self.grid.clone(), out)
    }

    fn centers(&self, centers: &Centers) -> Vec<usize> {
        match centers {
            Centers::Every(step) => {
                let step = (*step).max(1);
                let mut c = vec![0; self.grid.dim()];
                (0..self.grid.len())
                    .filter(|flat| {
                        self.grid.multi_index(*flat, &mut c);
                        c.iter().all(|i| i % step == 0)
                    })
                    .collect()
            }
            Centers::Nodes(list) => list.clone(),
        }
    }

    /// Generalized Morrey norm over the center set and radius ladder. The
    /// best [`MORREY_CANDIDATES`] coarse optima are then refined over every
    /// node between neighbouring lattice centers and over radii between
    /// neighbouring ladder radii, so the discrete sup tracks the continuous one.
    pub fn morrey_norm(&self, f: &GridFunction, p: f64, w: &Weight, centers: &Centers) -> Result<MorreyNorm> {
        check_grid(self.grid, f)?;
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("Morrey exponent must lie in (1, inf), got {p}")));
        }
        let v = f.values();
        let pre = self.prefix(|i| v[i].abs().powf(p));
        let nodes = self.centers(centers);
        let mut coarse: Vec<(f64, usize, usize)> = nodes
            .par_iter()
            .map(|&flat| {
                let c = self.node(flat);
                let x = self.grid.point(flat);
                let mut best = (0.0f64, flat, 0usize);
                for (k, st) in self.node_stencils.iter().enumerate() {
                    let value = pre.sum(self.grid, st, &c) / w.eval(&x, self.radii[k]);
                    if value > best.0 {
                        best = (value, flat, k);
                    }
                }
                best
            })
            .collect();
        // Ties resolve to the earliest center so the result is deterministic.
        coarse.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let Some(&first) = coarse.first() else {
            return Ok(MorreyNorm {
                value: 0.0,
                argmax_center: Vec::new(),
                argmax_radius: 0.0,
            });
        };
        let reach = match centers {
            Centers::Every(step) => (*step).max(1) - 1,
            Centers::Nodes(_) => 0,
        };
        let zero = vec![0.0; self.grid.dim()];
        let mut best = (first.0, first.1, self.radii[first.2]);
        let argmax = |a: (f64, usize, f64), b: (f64, usize, f64)| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a };
        let search = |around: usize, reach: usize, ladder: &[(f64, &Stencil)]| {
            self.neighbourhood(around, reach)
                .par_iter()
                .map(|&cf| {
                    let c = self.node(cf);
                    let x = self.grid.point(cf);
                    let mut b = (0.0f64, cf, 0.0);
                    for (r, st) in ladder {
                        let value = pre.sum(self.grid, st, &c) / w.eval(&x, *r);
                        if value > b.0 {
                            b = (value, cf, *r);
                        }
                    }
                    b
                })
                .reduce(|| (0.0, usize::MAX, 0.0), argmax)
        };
        let ladder: Vec<(f64, &Stencil)> = self.radii.iter().copied().zip(&self.node_stencils).collect();
        for &(_, flat, _) in coarse.iter().take(MORREY_CANDIDATES) {
            // First the center, between lattice neighbours, then the radius.
            let moved = search(flat, reach, &ladder);
            let k = self.radii.iter().position(|r| *r == moved.2).unwrap_or(0);
            let lo = self.radii[k.saturating_sub(1)];
            let hi = self.radii[(k + 1).min(self.radii.len() - 1)];
            let fine: Vec<(f64, Stencil)> = (0..=2 * RADIUS_SUBDIVISIONS)
                .map(|j| {
                    let r = lo * (hi / lo).powf(j as f64 / (2 * RADIUS_SUBDIVISIONS) as f64);
                    (r, Stencil::new(self.grid.spacing(), &self.profile, r, &zero))
                })
                .collect();
            let fine: Vec<(f64, &Stencil)> = fine.iter().map(|(r, st)| (*r, st)).collect();
            best = argmax(best, argmax(moved, search(moved.1, reach.min(1), &fine)));
        }
        Ok(MorreyNorm {
            value: best.0.powf(1.0 / p),
            argmax_center: self.grid.point(best.1),
            argmax_radius: best.2,
        })
    }

    /// Nodes within `reach` index steps of `flat` along every axis.
    fn neighbourhood(&self, flat: usize, reach: usize) -> Vec<usize> {
        let c = self.node(flat);
        let n = c.len();
        let lo: Vec<usize> = c.iter().map(|i| i.saturating_sub(reach)).collect();
        let hi: Vec<usize> = c
            .iter()
            .zip(self.grid.points())
            .map(|(i, m)| (i + reach).min(m - 1))
            .collect();
        let mut out = Vec::new();
        let mut idx = lo.clone();
        loop {
            out.push(self.grid.flat_index(&idx));
            let mut axis = n;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if idx[axis] < hi[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = lo[axis];
            }
        }
    }

    /// `γ_a` on the ladder, with the sup over the given centers.
    pub fn bmo_modulus(&self, a: &GridFunction, centers: &Centers) -> Result<BmoModulus> {
        check_grid(self.grid, a)?;
        let nodes = self.centers(centers);
        let osc: Vec<f64> = self
            .node_stencils
            .iter()
            .map(|st| {
                nodes
                    .par_iter()
                    .map(|&flat| self.oscillation(a.values(), st, &self.node(flat), 1.0).1)
                    .reduce(|| 0.0, f64::max)
            })
            .collect();
        Ok(BmoModulus::from_oscillations(self.radii.clone(), &osc))
    }

    /// Average of `f` over `E ∩ Ω`.
    pub fn average(&self, f: &GridFunction, e: &Ellipsoid) -> Result<f64> {
        check_grid(self.grid, f)?;
        let (c, st) = self.anchored(e.center(), e.radius());
        Ok(self.oscillation(f.values(), &st, &c, 1.0).0)
    }

    /// `(|E|^{-1} ∫_E |f − f_E|^q)^{1/q}` over `E ∩ Ω`.
    pub fn mean_oscillation(&self, f: &GridFunction, e: &Ellipsoid, q: f64) -> Result<f64> {
        check_grid(self.grid, f)?;
        let (c, st) = self.anchored(e.center(), e.radius());
        Ok(self.oscillation(f.values(), &st, &c, q).1.powf(1.0 / q))
    }
}

fn check_grid(grid: &Grid, f: &GridFunction) -> Result<()> {
    if f.grid() != grid {
        return Err(Error::GridMismatch("function is sampled on a different grid".into()));
    }
    Ok(())
}

/// Ellipsoid centers for suprema.
#[derive(Clone, Debug, PartialEq)]
pub enum Centers {
    /// Nodes whose every index is a multiple of the step.
    Every(usize),
    /// Explicit flat node indices.
    Nodes(Vec<usize>),
}

impl Default for Centers {
    fn default() -> Self {
        Centers::Every(4)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorreyNorm {
    pub value: f64,
    pub argmax_center: Vec<f64>,
    pub argmax_radius: f64,
}

/// `Mf(x)`: the largest average of `|f|` over `E_r(x) ∩ Ω`, `r` in `radii`.
pub fn maximal(f: &GridFunction, profile: &AnisotropyProfile, x: &[f64], radii: &[f64]) -> Result<f64> {
    coverage::touch(Op::Maximal);
    let s = EllipsoidSampler::new(f.grid(), profile, radii)?;
    Ok(s.m_s_at(f, x, 1.0))
}

/// `f♯(x)`: the largest mean oscillation over `E_r(x) ∩ Ω`.
pub fn sharp(f: &GridFunction, profile: &AnisotropyProfile, x: &[f64], radii: &[f64]) -> Result<f64> {
    coverage::touch(Op::Sharp);
    let s = EllipsoidSampler::new(f.grid(), profile, radii)?;
    Ok(s.sharp_at(f, x))
}

/// `M_s f(x) = (M|f|^s(x))^{1/s}`.
pub fn m_s(f: &GridFunction, profile: &AnisotropyProfile, x: &[f64], s: f64, radii: &[f64]) -> Result<f64> {
    coverage::touch(Op::MaximalS);
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Error::invalid(format!("s must be >= 1, got {s}")));
    }
    let sampler = EllipsoidSampler::new(f.grid(), profile, radii)?;
    Ok(sampler.m_s_at(f, x, s))
}

/// `(sup_E ω(E)^{-1} ∫_{E∩Ω} |f|^p)^{1/p}` over `centers × radii`.
pub fn morrey_norm(
    f: &GridFunction,
    p: f64,
    w: &Weight,
    profile: &AnisotropyProfile,
    centers: &Centers,
    radii: &[f64],
) -> Result<MorreyNorm> {
    coverage::touch(Op::MorreyNorm);
    EllipsoidSampler::new(f.grid(), profile, radii)?.morrey_norm(f, p, w, centers)
}

/// Empirical constants of the doubling and integral conditions on a weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightCheck {
    /// Extremes of `ω(x, t)/ω(x, r)` over `r ≤ t ≤ 2r`.
    pub doubling_bounds: (f64, f64),
    /// Largest `(r^{σα}/ω(x, r)) ∫_r^∞ ω(x, t) t^{-σα-1} dt`; infinite
    /// when the integral diverges.
    pub integral_constant: f64,
    pub pass: bool,
    pub diagnostic: String,
}

/// Decay margin below which the tail of the integral is declared divergent.
pub const DIVERGENCE_MARGIN: f64 = 1e-3;

/// `∫_r^∞ ω(x, t) t^{-β-1} dt` by Gauss–Legendre panels in `ln t` up to
/// `10⁶ r`, plus a power-law tail fitted over the last decade. `None` when
/// the fitted tail does not decay.
fn weight_tail_integral(w: &Weight, x: &[f64], r: f64, beta: f64) -> Option<f64> {
    let (gx, gw) = gauss_legendre(8);
    let decades = 6.0;
    let panels = 12;
    let width = decades * std::f64::consts::LN_10 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = r.ln() + p as f64 * width;
        for (u, wt) in gx.iter().zip(&gw) {
            let lt = a + 0.5 * width * (u + 1.0);
            let t = lt.exp();
            total += 0.5 * width * wt * w.eval(x, t) * t.powf(-beta);
        }
    }
    let top = r * 10f64.powf(decades);
    let q = (w.eval(x, top) / w.eval(x, top / 10.0)).log10();
    if !(beta - q > DIVERGENCE_MARGIN) {
        return None;
    }
    Some(total + w.eval(x, top) * top.powf(-beta) / (beta - q))
}

/// Checks the doubling condition and the integral condition with exponent
/// `σα` (`σ = 1` is the plain condition) at every center and radius.
pub fn check_weight(
    w: &Weight,
    profile: &AnisotropyProfile,
    centers: &[Vec<f64>],
    radii: &[f64],
    sigma: f64,
) -> Result<WeightCheck> {
    coverage::touch(Op::CheckWeight);
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::invalid(format!("sigma must lie in (0, 1], got {sigma}")));
    }
    let (rmin, rmax) = radii
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    if !(rmin > 0.0) || rmax / rmin < 1e3 {
        return Err(Error::invalid("weight radii must be positive and span at least 3 decades"));
    }
    if centers.is_empty() {
        return Err(Error::invalid("no centers given"));
    }
    let beta = sigma * profile.homogeneous_dimension();
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    let mut constant = 0.0f64;
    let mut diagnostic = String::new();
    let mut finite_weight = true;
    for x in centers {
        for &r in radii {
            let base = w.eval(x, r);
            if !(base > 0.0 && base.is_finite()) {
                finite_weight = false;
                diagnostic = format!("weight is not positive and finite at r={r}");
                continue;
            }
            for j in 0..=8 {
                let t = r * 2f64.powf(j as f64 / 8.0);
                let ratio = w.eval(x, t) / base;
                c1 = c1.min(ratio);
                c2 = c2.max(ratio);
            }
            match weight_tail_integral(w, x, r, beta) {
                Some(i) => constant = constant.max(i * r.powf(beta) / base),
                None => {
                    constant = f64::INFINITY;
                    if diagnostic.is_empty() {
                        diagnostic = format!("integral diverges: tail of omega(x,t)/t^(sigma*alpha+1) does not decay (r={r})");
                    }
                }
            }
        }
    }
    let pass = finite_weight && c1 > 0.0 && c2.is_finite() && constant.is_finite();
    Ok(WeightCheck {
        doubling_bounds: (c1, c2),
        integral_constant: constant,
        pass,
        diagnostic,
    })
}

/// The modulus `γ_a(R) = sup_{r ≤ R} sup_E |E|^{-1} ∫_E |a − a_E|` on a ladder.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BmoModulus {
    /// Increasing radii.
    pub radii: Vec<f64>,
    /// `γ_a` at each radius; nondecreasing.
    pub values: Vec<f64>,
    pub bmo_norm: f64,
    /// Grid-scale proxy for `γ_a(R) → 0`: at the two smallest radii the
    /// modulus is below [`VMO_THRESHOLD`] times the norm and still falling.
    pub vmo_flag: bool,
    /// Log-log slope of `γ_a` over the four smallest radii.
    pub trend_slope: Option<f64>,
}

pub const VMO_THRESHOLD: f64 = 0.2;

/// Coarse optima refined locally by [`EllipsoidSampler::morrey_norm`].
pub const MORREY_CANDIDATES: usize = 8;
/// Radii tried per ladder step when refining.
const RADIUS_SUBDIVISIONS: usize = 4;

impl BmoModulus {
    fn from_oscillations(radii: Vec<f64>, osc: &[f64]) -> Self {
        let mut values = Vec::with_capacity(osc.len());
        let mut running = 0.0f64;
        for v in osc {
            running = running.max(*v);
            values.push(running);
        }
        let bmo_norm = running;
        let vmo_flag = values.len() >= 2
            && bmo_norm > 0.0
            && values[0] < VMO_THRESHOLD * bmo_norm
            && values[1] < VMO_THRESHOLD * bmo_norm
            && values[0] < values[1];
        let k = values.len().min(4);
        BmoModulus {
            trend_slope: loglog_slope(&radii[..k], &values[..k]),
            radii,
            values,
            bmo_norm,
            vmo_flag,
        }
    }

    /// `γ_a(R)` for the largest ladder radius `≤ R`.
    pub fn at(&self, r: f64) -> f64 {
        self.radii
            .iter()
            .zip(&self.values)
            .take_while(|(rr, _)| **rr <= r * (1.0 + 1e-12))
            .last()
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }
}

pub fn bmo_modulus(a: &GridFunction, profile: &AnisotropyProfile, radii: &[f64], centers: &Centers) -> Result<BmoModulus> {
    coverage::touch(Op::BmoModulus);
    EllipsoidSampler::new(a.grid(), profile, radii)?.bmo_modulus(a, centers)
}

/// `(|E|^{-1} ∫_E |a − a_E|^p)^{1/p} / ‖a‖_*`, zero when `‖a‖_* = 0`.
pub fn john_nirenberg_ratio(a: &GridFunction, p: f64, e: &Ellipsoid, bmo: &BmoModulus) -> Result<f64> {
    coverage::touch(Op::JohnNirenbergRatio);
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be >= 1, got {p}")));
    }
    if bmo.bmo_norm == 0.0 {
        return Ok(0.0);
    }
    let sampler = EllipsoidSampler::new(a.grid(), e.profile(), &[e.radius()])?;
    Ok(sampler.mean_oscillation(a, e, p)? / bmo.bmo_norm)
}

fn inside_box(grid: &Grid, e: &Ellipsoid) -> bool {
    e.semi_axes()
        .iter()
        .enumerate()
        .all(|(i, s)| e.center()[i] - s >= grid.lower()[i] - 1e-12 && e.center()[i] + s <= grid.upper()[i] + 1e-12)
}

/// `|a_{2^k E} − a_E|`.
pub fn nested_average_drift(a: &GridFunction, e: &Ellipsoid, k: u32) -> Result<f64> {
    coverage::touch(Op::NestedAverageDrift);
    let big = e.scaled(2f64.powi(k as i32))?;
    if !inside_box(a.grid(), &big) {
        return Err(Error::invalid(format!("2^{k} E leaves the grid box")));
    }
    let sampler = EllipsoidSampler::new(a.grid(), e.profile(), &[e.radius()])?;
    Ok((sampler.average(a, &big)? - sampler.average(a, e)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{lp_norm, sample};
    use crate::metric::unit_ball_volume;

    fn iso() -> AnisotropyProfile {
        AnisotropyProfile::isotropic(2).unwrap()
    }

    #[test]
    fn stencil_measure_matches_ellipsoid() {
        let grid = Grid::cube(2, 4.0, 161).unwrap();
        let p = AnisotropyProfile::new(vec![1.0, 2.0]).unwrap();
        let s = EllipsoidSampler::new(&grid, &p, &[1.3]).unwrap();
        let c = s.node(grid.nearest_index(&[0.0, 0.0]));
        let (_, m) = s.integral(&s.measure, &s.node_stencils[0], &c);
        let exact = unit_ball_volume(2) * 1.3f64.powi(3);
        assert!((m - exact).abs() < 2e-3 * exact, "{m} vs {exact}");
        // Off-node center.
        let (c2, st) = s.anchored(&[0.013, -0.021], 1.3);
        let (_, m2) = s.integral(&s.measure, &st, &c2);
        assert!((m2 - exact).abs() < 2e-3 * exact);
    }

    #[test]
    fn constants() {
        let grid = Grid::cube(2, 2.0, 33).unwrap();
        let f = sample(|_| -2.5, &grid).unwrap();
        let radii = default_radii(&grid, &iso());
        for x in [[0.0, 0.0], [1.9, -2.0], [0.31, 0.7]] {
            assert!((maximal(&f, &iso(), &x, &radii).unwrap() - 2.5).abs() < 1e-12);
            assert!(sharp(&f, &iso(), &x, &radii).unwrap() < 1e-12);
            assert!((m_s(&f, &iso(), &x, 2.0, &radii).unwrap() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_relations() {
        let grid = Grid::cube(2, 2.0, 33).unwrap();
        let f = sample(|x| (x[0] * 1.7).sin() + x[1] * x[1], &grid).unwrap();
        let s = EllipsoidSampler::with_default_radii(&grid, &iso()).unwrap();
        let m1 = s.m_s_field(&f, 1.0).unwrap();
        let m2 = s.m_s_field(&f, 2.0).unwrap();
        let sh = s.sharp_field(&f).unwrap();
        // Lipschitz constant of f is below 6; the smallest ellipsoid has radius r0.
        let slack = 6.0 * s.radii()[0];
        for i in 0..grid.len() {
            let v = f.values()[i].abs();
            assert!(v <= m1.values()[i] + slack);
            assert!(m1.values()[i] <= m2.values()[i] + 1e-12);
            assert!(sh.values()[i] <= 2.0 * m1.values()[i] + 1e-12);
        }
        let x = grid.point(100);
        assert_eq!(m_s(&f, &iso(), &x, 1.0, s.radii()).unwrap(), maximal(&f, &iso(), &x, s.radii()).unwrap());
    }

    #[test]
    fn sharp_of_step_at_interface() {
        let grid = Grid::cube(2, 4.0, 129).unwrap();
        let f = sample(|x| 1.0 + if x[0] >= 0.0 { 3.0 } else { 0.0 }, &grid).unwrap();
        let radii = default_radii(&grid, &iso());
        let v = sharp(&f, &iso(), &[0.0, 0.0], &radii).unwrap();
        assert!((v - 1.5).abs() < 1.5 * 4.0 * grid.max_spacing(), "{v}");
        // Brute force over the ladder with fresh stencils.
        let s = EllipsoidSampler::new(&grid, &iso(), &radii).unwrap();
        let brute = radii
            .iter()
            .map(|r| {
                let e = Ellipsoid::new(vec![0.0, 0.0], *r, iso()).unwrap();
                s.mean_oscillation(&f, &e, 1.0).unwrap()
            })
            .fold(0.0, f64::max);
        assert_eq!(v, brute);
    }

    #[test]
    fn morrey_refinement_finds_off_lattice_optima() {
        // A narrow bump between lattice centers, seen by coarse and dense searches.
        let grid = Grid::cube(2, 2.0, 65).unwrap();
        let f = sample(|x| (-40.0 * ((x[0] - 0.09).powi(2) + (x[1] + 0.15).powi(2))).exp(), &grid).unwrap();
        let w = Weight::power(1.0);
        let radii = default_radii(&grid, &iso());
        let dense: Vec<f64> = (0..=64).map(|k| radii[0] * 2f64.powf(k as f64 / 16.0)).collect();
        let coarse = morrey_norm(&f, 2.0, &w, &iso(), &Centers::Every(4), &radii).unwrap();
        let full = morrey_norm(&f, 2.0, &w, &iso(), &Centers::Every(1), &dense).unwrap();
        assert!((coarse.value / full.value - 1.0).abs() < 5e-3, "{:?} vs {:?} {radii:?}", coarse, full);
        let s = EllipsoidSampler::new(&grid, &iso(), &radii).unwrap();
        let pre = s.prefix(|i| f.values()[i].powi(2));
        let mut lattice_only = 0.0f64;
        for flat in s.centers(&Centers::Every(4)) {
            let (c, x) = (s.node(flat), grid.point(flat));
            for (st, r) in s.node_stencils.iter().zip(&radii) {
                lattice_only = lattice_only.max(pre.sum(&grid, st, &c) / w.eval(&x, *r));
            }
        }
        let lattice_only = lattice_only.sqrt();
        assert!(coarse.value >= lattice_only);
    }

    #[test]
    fn morrey_examples() {
        let grid = Grid::cube(2, 3.0, 97).unwrap();
        let f = sample(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), &grid).unwrap();
        let p = 2.0;
        let radii = default_radii(&grid, &iso());
        let m = morrey_norm(&f, p, &Weight::constant(), &iso(), &Centers::default(), &radii).unwrap();
        let l = lp_norm(&f, p).unwrap();
        assert!((m.value - l).abs() <= 0.02 * l);
        let scaled = morrey_norm(&f.scale(-3.0), p, &Weight::constant(), &iso(), &Centers::default(), &radii).unwrap();
        assert!((scaled.value - 3.0 * m.value).abs() <= 1e-12 * scaled.value);

        // Indicator of the unit disk with ω = r^λ peaks at r = 1, center 0.
        let chi = sample(|x| if x[0] * x[0] + x[1] * x[1] < 1.0 { 1.0 } else { 0.0 }, &grid).unwrap();
        let ladder: Vec<f64> = (0..12).map(|k| 0.25 * 2f64.powf(k as f64 / 4.0)).collect();
        let w = Weight::power(1.0);
        let got = morrey_norm(&chi, p, &w, &iso(), &Centers::default(), &ladder).unwrap();
        assert!((got.argmax_radius - 1.0).abs() < 1e-12);
        assert!(got.argmax_center.iter().all(|c| c.abs() < 1e-12));
        let s = EllipsoidSampler::new(&grid, &iso(), &ladder).unwrap();
        let c = s.node(grid.nearest_index(&[0.0, 0.0]));
        let pre = s.prefix(|i| chi.values()[i]);
        let brute = ladder
            .iter()
            .zip(&s.node_stencils)
            .map(|(r, st)| pre.sum(&grid, st, &c) / r)
            .fold(0.0, f64::max);
        assert!((got.value - brute.sqrt()).abs() <= 1e-12);
        assert!((got.value - std::f64::consts::PI.sqrt()).abs() < 0.03);
    }

    #[test]
    fn weight_checks() {
        let p = AnisotropyProfile::new(vec![1.0, 2.0]).unwrap();
        let alpha = 3.0;
        let centers = vec![vec![0.0, 0.0], vec![1.0, -2.0]];
        let radii: Vec<f64> = (0..13).map(|k| 1e-3 * 10f64.powf(k as f64 / 3.0)).collect();
        for lambda in [0.0, 1.0, 2.5] {
            let c = check_weight(&Weight::power(lambda), &p, &centers, &radii, 1.0).unwrap();
            assert!(c.pass);
            let exact = 1.0 / (alpha - lambda);
            assert!((c.integral_constant - exact).abs() < 1e-3 * exact, "{lambda}: {}", c.integral_constant);
            assert!((c.doubling_bounds.1 - 2f64.powf(lambda)).abs() < 1e-12);
        }
        assert!(check_weight(&Weight::power_log(1.5), &p, &centers, &radii, 1.0).unwrap().pass);
        let bad = check_weight(&Weight::power(alpha), &p, &centers, &radii, 1.0).unwrap();
        assert!(!bad.pass && bad.integral_constant.is_infinite() && !bad.diagnostic.is_empty());
        // σ-variant: r^λ needs λ < σα.
        assert!(!check_weight(&Weight::power(2.0), &p, &centers, &radii, 0.5).unwrap().pass);
        assert!(check_weight(&Weight::power(1.0), &p, &centers, &radii, 0.5).unwrap().pass);
        assert!(check_weight(&Weight::power(1.0), &p, &centers, &radii[..5], 1.0).is_err());
        assert!(matches!(
            Weight::from_spec(&WeightSpec { kind: "exotic".into(), lambda: None }),
            Err(Error::UnknownWeight(_))
        ));
    }

    #[test]
    fn bmo_examples() {
        let grid = Grid::cube(2, 4.0, 65).unwrap();
        let radii = default_radii(&grid, &iso());
        let c = sample(|_| 4.0, &grid).unwrap();
        let m = bmo_modulus(&c, &iso(), &radii, &Centers::default()).unwrap();
        assert!(m.values.iter().all(|v| *v < 1e-12));
        let e = Ellipsoid::new(vec![0.5, 0.5], 1.0, iso()).unwrap();
        assert_eq!(john_nirenberg_ratio(&c, 2.0, &e, &m).unwrap(), 0.0);

        let fine = Grid::cube(2, 4.0, 129).unwrap();
        let s = sample(|x| x[0].sin(), &fine).unwrap();
        let ms = bmo_modulus(&s, &iso(), &default_radii(&fine, &iso()), &Centers::default()).unwrap();
        for w in ms.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for (r, v) in ms.radii.iter().zip(&ms.values) {
            assert!(*v <= *r + 1e-9);
        }
        assert!(ms.vmo_flag);
        let jn1 = john_nirenberg_ratio(&s, 1.0, &e, &ms).unwrap();
        assert!(jn1 <= 1.05);
    }

    #[test]
    fn drift_examples() {
        let grid = Grid::cube(2, 4.0, 129).unwrap();
        let e = Ellipsoid::new(vec![0.0, 0.0], 0.5, iso()).unwrap();
        let c = sample(|_| 1.0, &grid).unwrap();
        assert!(nested_average_drift(&c, &e, 2).unwrap() < 1e-12);
        assert!(nested_average_drift(&c, &e, 4).is_err());

        // a = c·χ_{2E∖E}: the two averages by brute-force cell sums.
        let a = sample(|x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if (0.5..1.0).contains(&r) { 2.0 } else { 0.0 }
        }, &grid)
        .unwrap();
        let drift = nested_average_drift(&a, &e, 1).unwrap();
        let s = EllipsoidSampler::new(&grid, &iso(), &[0.5]).unwrap();
        let brute = |r: f64| {
            let st = Stencil::new(grid.spacing(), &iso(), r, &[0.0, 0.0]);
            let c = s.node(grid.nearest_index(&[0.0, 0.0]));
            let w = grid.trapezoid_weights();
            let (mut num, mut den) = (0.0, 0.0);
            st.visit(&grid, &c, |piece| match piece {
                Piece::Run { row_start, lo, hi } => {
                    for i in row_start + lo..row_start + hi {
                        num += w[i] * a.values()[i];
                        den += w[i];
                    }
                }
                Piece::Cut { flat, fraction } => {
                    num += fraction * w[flat] * a.values()[flat];
                    den += fraction * w[flat];
                }
            });
            num / den
        };
        assert!((drift - (brute(1.0) - brute(0.5)).abs()).abs() < 1e-14);
    }
}
