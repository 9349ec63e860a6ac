//! Real orthonormal spherical harmonics on `Σₙ` for `n = 2, 3`, expansions
//! of sphere functions, and the constant kernels `H_sm(ξ) = Y_sm(ξ̄) ρ(ξ)^{-α}`.
//!
//! Each `Y_sm` is evaluated as a harmonic homogeneous polynomial of degree
//! `m`, so gradients come out exactly from dual-number arithmetic and there
//! are no coordinate singularities at the poles.
//!
//! Index conventions. For `n = 2`: `Y_{1,0} = 1/√(2π)`, `Y_{1,m} = cos(mθ)/√π`,
//! `Y_{2,m} = sin(mθ)/√π`. For `n = 3`, degree `m` has `2m + 1` functions:
//! `s = 1` is the zonal one, `s = 2k` carries `cos(kφ)` and `s = 2k + 1`
//! carries `sin(kφ)`, with associated Legendre factors in the polar angle.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::coverage::{self, Op};
use crate::error::{Error, Result};
use crate::kernel::{finite_difference, VariableKernel};
use crate::metric::{AnisotropyProfile, SphereQuadrature};
use crate::numeric::{loglog_slope, Dual, Scalar};

fn binomial(n: i64, k: i64) -> u64 {
    if k < 0 || n < k || n < 0 {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Dimension `g_m` of the degree-`m` spherical harmonics on `Σₙ`.
pub fn basis_dim(n: usize, m: usize) -> Result<usize> {
    coverage::touch(Op::BasisDim);
    if n != 2 && n != 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    Ok(harmonic_count(n, m))
}

fn harmonic_count(n: usize, m: usize) -> usize {
    match m {
        0 => 1,
        1 => n,
        _ => {
            let (n, m) = (n as i64, m as i64);
            (binomial(m + n - 1, n - 1) - binomial(m + n - 3, n - 1)) as usize
        }
    }
}

/// Solid harmonic `r^m Y_sm(x/r)`, a polynomial in the coordinates.
fn solid_harmonic<T: Scalar>(n: usize, s: usize, m: usize, x: &[T]) -> T {
    match n {
        2 => {
            if m == 0 {
                return T::constant(1.0 / (2.0 * PI).sqrt());
            }
            let (re, im) = complex_power(x[0], x[1], m);
            let part = if s == 1 { re } else { im };
            part.scale(1.0 / PI.sqrt())
        }
        3 => {
            let k = s / 2;
            let l = m;
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let q = legendre_solid(k, l, x[2], r2);
            // sqrt((2l+1)/(4π) · (l−k)!/(l+k)!)
            let mut ratio = 1.0;
            for j in (l - k + 1)..=(l + k) {
                ratio /= j as f64;
            }
            let mut norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
            if k == 0 {
                return q.scale(norm);
            }
            norm *= 2f64.sqrt();
            let (re, im) = complex_power(x[0], x[1], k);
            let part = if s % 2 == 0 { re } else { im };
            (q * part).scale(norm)
        }
        _ => unreachable!("dimension checked by the caller"),
    }
}

/// Real and imaginary parts of `(x + iy)^k`.
fn complex_power<T: Scalar>(x: T, y: T, k: usize) -> (T, T) {
    let (mut re, mut im) = (T::constant(1.0), T::constant(0.0));
    for _ in 0..k {
        let next_re = re * x - im * y;
        im = re * y + im * x;
        re = next_re;
    }
    (re, im)
}

/// `Q_l^k(z, r²)` with `r^l P_l^k(z/r) = Q_l^k · (x² + y²)^{k/2}`, where
/// `P_l^k` is the associated Legendre function without the
/// Condon–Shortley phase.
fn legendre_solid<T: Scalar>(k: usize, l: usize, z: T, r2: T) -> T {
    let mut dfact = 1.0;
    for j in 1..=k {
        dfact *= (2 * j - 1) as f64;
    }
    let mut prev = T::constant(dfact);
    if l == k {
        return prev;
    }
    let mut cur = z.scale((2 * k + 1) as f64 * dfact);
    for j in (k + 2)..=l {
        let next = (z * cur).scale((2 * j - 1) as f64) - (r2 * prev).scale((j + k - 1) as f64);
        let next = next.scale(1.0 / (j - k) as f64);
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal basis `{Y_sm : 0 ≤ m ≤ M, 1 ≤ s ≤ g_m}` of harmonics on `Σₙ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicBasis {
    dim: usize,
    max_degree: usize,
    indices: Vec<(usize, usize)>,
}

impl HarmonicBasis {
    pub fn new(n: usize, max_degree: usize) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        let indices = (0..=max_degree)
            .flat_map(|m| (1..=harmonic_count(n, m)).map(move |s| (s, m)))
            .collect();
        Ok(HarmonicBasis {
            dim: n,
            max_degree,
            indices,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// All `(s, m)` pairs, by degree then `s`.
    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn check_index(&self, s: usize, m: usize) -> Result<()> {
        if m > self.max_degree || s == 0 || s > harmonic_count(self.dim, m) {
            return Err(Error::InvalidIndex { s, m });
        }
        Ok(())
    }

    /// `Y_sm(u)` for `u` on the unit sphere (not checked).
    #[inline]
    pub fn value(&self, s: usize, m: usize, u: &[f64]) -> f64 {
        solid_harmonic(self.dim, s, m, u)
    }

    /// Value and tangential gradient of `Y_sm` at `u ∈ Σₙ`.
    pub fn value_and_gradient(&self, s: usize, m: usize, u: &[f64]) -> (f64, Vec<f64>) {
        let vars: Vec<Dual> = u.iter().enumerate().map(|(i, v)| Dual::variable(*v, i)).collect();
        let p = solid_harmonic(self.dim, s, m, &vars);
        // Euler: x·∇P = m P, so the tangential part is ∇P − m P u on Σₙ.
        let grad = (0..self.dim)
            .map(|i| p.grad[i] - m as f64 * p.value * u[i])
            .collect();
        (p.value, grad)
    }

    /// Gradient of the degree-zero extension `x ↦ Y_sm(x/|x|)` at any `x ≠ 0`.
    pub fn extension_gradient(&self, s: usize, m: usize, x: &[f64]) -> Vec<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u: Vec<f64> = x.iter().map(|v| v / r).collect();
        let (_, g) = self.value_and_gradient(s, m, &u);
        g.into_iter().map(|v| v / r).collect()
    }

    /// Every basis function at `u`, in [`indices`](Self::indices) order.
    pub fn values(&self, u: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|(s, m)| self.value(*s, *m, u)).collect()
    }
}

fn on_sphere(u: &[f64], n: usize) -> Result<()> {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if u.len() != n || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("point {u:?} is not on the unit sphere")));
    }
    Ok(())
}

/// `Y_sm(u)` with index and point validation.
pub fn eval_harmonic(basis: &HarmonicBasis, s: usize, m: usize, u: &[f64]) -> Result<f64> {
    coverage::touch(Op::EvalHarmonic);
    basis.check_index(s, m)?;
    on_sphere(u, basis.dim())?;
    Ok(basis.value(s, m, u))
}

/// Expansion coefficients `b_sm = ∫_{Σₙ} φ Y_sm dσ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicCoefficients {
    pub dim: usize,
    pub max_degree: usize,
    /// `table[m][s - 1] = b_sm`.
    pub table: Vec<Vec<f64>>,
    /// `sup_norms[m] = max_s |b_sm|`.
    pub sup_norms: Vec<f64>,
}

impl HarmonicCoefficients {
    fn from_flat(basis: &HarmonicBasis, flat: &[f64]) -> Self {
        let mut table: Vec<Vec<f64>> = vec![Vec::new(); basis.max_degree() + 1];
        for ((_, m), b) in basis.indices().iter().zip(flat) {
            table[*m].push(*b);
        }
        let sup_norms = table
            .iter()
            .map(|row| row.iter().fold(0.0f64, |a, b| a.max(b.abs())))
            .collect();
        HarmonicCoefficients {
            dim: basis.dim(),
            max_degree: basis.max_degree(),
            table,
            sup_norms,
        }
    }

    pub fn get(&self, s: usize, m: usize) -> f64 {
        self.table[m][s - 1]
    }

    /// Multiplies every coefficient by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        HarmonicCoefficients {
            table: self.table.iter().map(|r| r.iter().map(|b| c * b).collect()).collect(),
            sup_norms: self.sup_norms.iter().map(|v| c.abs() * v).collect(),
            ..self.clone()
        }
    }

    /// `Σ_{m ≤ degree} Σ_s b_sm Y_sm(u)`.
    pub fn reconstruct(&self, basis: &HarmonicBasis, u: &[f64], degree: usize) -> f64 {
        let mut acc = 0.0;
        for m in 0..=degree.min(self.max_degree) {
            for (s0, b) in self.table[m].iter().enumerate() {
                acc += b * basis.value(s0 + 1, m, u);
            }
        }
        acc
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.table.iter().flatten().map(|b| b * b).sum()
    }

    /// CSV with columns `m,s,b_sm`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("m,s,b_sm\n");
        for (m, row) in self.table.iter().enumerate() {
            for (s0, b) in row.iter().enumerate() {
                let _ = writeln!(out, "{m},{},{b:.16e}", s0 + 1);
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Basis values tabulated at the nodes of a sphere quadrature, for
/// repeated expansions on the same rule.
#[derive(Clone, Debug)]
pub struct SphereTable {
    basis: HarmonicBasis,
    quadrature: SphereQuadrature,
    /// `values[node][basis index]`.
    values: Vec<Vec<f64>>,
}

impl SphereTable {
    pub fn new(basis: &HarmonicBasis, q: &SphereQuadrature) -> Result<Self> {
        if q.dim() != basis.dim() {
            return Err(Error::invalid("quadrature and basis dimensions differ"));
        }
        Ok(SphereTable {
            basis: basis.clone(),
            quadrature: q.clone(),
            values: q.nodes().iter().map(|u| basis.values(u)).collect(),
        })
    }

    pub fn basis(&self) -> &HarmonicBasis {
        &self.basis
    }

    pub fn quadrature(&self) -> &SphereQuadrature {
        &self.quadrature
    }

    /// Coefficients of the function whose node values are `phi`.
    pub fn expand_values(&self, phi: &[f64]) -> HarmonicCoefficients {
        let mut flat = vec![0.0; self.basis.len()];
        for ((row, w), f) in self.values.iter().zip(self.quadrature.weights()).zip(phi) {
            let wf = w * f;
            for (acc, y) in flat.iter_mut().zip(row) {
                *acc += wf * y;
            }
        }
        HarmonicCoefficients::from_flat(&self.basis, &flat)
    }

    pub fn expand(&self, phi: impl Fn(&[f64]) -> f64) -> HarmonicCoefficients {
        let vals: Vec<f64> = self.quadrature.nodes().iter().map(|u| phi(u)).collect();
        self.expand_values(&vals)
    }

    /// Gram matrix `∫ Y_i Y_j dσ` of the tabulated basis.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let k = self.basis.len();
        let mut g = vec![vec![0.0; k]; k];
        for (row, w) in self.values.iter().zip(self.quadrature.weights()) {
            for i in 0..k {
                let wi = w * row[i];
                for j in i..k {
                    g[i][j] += wi * row[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                g[i][j] = g[j][i];
            }
        }
        g
    }

    /// `max_node |φ − Σ_{m ≤ degree} b_sm Y_sm|`.
    pub fn reconstruction_error(&self, phi: &[f64], c: &HarmonicCoefficients, degree: usize) -> f64 {
        self.values
            .iter()
            .zip(phi)
            .map(|(row, f)| {
                let approx: f64 = self
                    .basis
                    .indices()
                    .iter()
                    .zip(row)
                    .filter(|((_, m), _)| *m <= degree)
                    .map(|((s, m), y)| c.get(*s, *m) * y)
                    .sum();
                (f - approx).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Coefficients of `φ` by quadrature.
pub fn expand(
    phi: impl Fn(&[f64]) -> f64,
    basis: &HarmonicBasis,
    q: &SphereQuadrature,
) -> Result<HarmonicCoefficients> {
    coverage::touch(Op::Expand);
    Ok(SphereTable::new(basis, q)?.expand(phi))
}

/// Result of fitting `max_s |b_sm| ≈ C m^{slope}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// `None` when fewer than two degrees have coefficients above the floor.
    pub slope: Option<f64>,
    pub degrees_used: Vec<usize>,
    pub degenerate: bool,
}

impl DecayFit {
    /// At least quadratic decay.
    pub fn passes(&self) -> bool {
        matches!(self.slope, Some(s) if s <= -2.0)
    }
}

/// Coefficients below this are treated as zero by [`decay_fit`].
pub const DECAY_FLOOR: f64 = 1e-14;

/// Least-squares slope of `ln max_s |b_sm|` against `ln m`, `m ≥ 1`.
pub fn decay_fit(c: &HarmonicCoefficients) -> Result<DecayFit> {
    coverage::touch(Op::DecayFit);
    if c.max_degree < 16 {
        return Err(Error::invalid(format!(
            "decay fit needs coefficients up to degree >= 16, got {}",
            c.max_degree
        )));
    }
    let degrees: Vec<usize> = (1..=c.max_degree).filter(|m| c.sup_norms[*m] > DECAY_FLOOR).collect();
    let xs: Vec<f64> = degrees.iter().map(|m| *m as f64).collect();
    let ys: Vec<f64> = degrees.iter().map(|m| c.sup_norms[*m]).collect();
    let slope = loglog_slope(&xs, &ys);
    Ok(DecayFit {
        degenerate: slope.is_none(),
        slope,
        degrees_used: degrees,
    })
}

/// Constant kernel `H_sm(ξ) = Y_sm(ξ̄) ρ(ξ)^{-α}`, `ξ̄_i = ξ_i ρ(ξ)^{-α_i}`.
#[derive(Clone, Debug)]
pub struct HsmKernel {
    basis: HarmonicBasis,
    s: usize,
    m: usize,
    profile: AnisotropyProfile,
}

impl HsmKernel {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn profile(&self) -> &AnisotropyProfile {
        &self.profile
    }

    #[inline]
    pub fn value(&self, xi: &[f64]) -> f64 {
        let (r, bar) = self.profile.polar(xi);
        self.basis.value(self.s, self.m, &bar) * r.powf(-self.profile.homogeneous_dimension())
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.iter().all(|v| *v == 0.0) {
            return Err(Error::SingularPoint);
        }
        Ok(self.value(xi))
    }

    /// The closed-form gradient obtained by differentiating `F(x, ρ(x)) = 1`
    /// implicitly.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::SingularPoint);
        }
        let a = self.profile.exponents();
        let alpha = self.profile.homogeneous_dimension();
        let (r, bar) = self.profile.polar(x);
        let (y, g) = self.basis.value_and_gradient(self.s, self.m, &bar);
        let weighted: f64 = bar.iter().zip(a).map(|(b, aj)| aj * b * b).sum();
        let tangential: f64 = g.iter().zip(&bar).zip(a).map(|((gk, bk), ak)| ak * gk * bk).sum();
        Ok((0..x.len())
            .map(|i| {
                let bracket = -alpha * y * bar[i] / weighted + g[i] - bar[i] * tangential / weighted;
                bracket * r.powf(-alpha - a[i])
            })
            .collect())
    }

    pub fn to_kernel(&self) -> VariableKernel {
        let me = self.clone();
        VariableKernel::constant(
            format!("H({},{})", self.s, self.m),
            self.profile.clone(),
            usize::MAX,
            move |xi| me.value(xi),
        )
    }
}

pub fn hsm_kernel(basis: &HarmonicBasis, s: usize, m: usize, profile: &AnisotropyProfile) -> Result<HsmKernel> {
    coverage::touch(Op::HsmKernel);
    basis.check_index(s, m)?;
    if profile.dim() != basis.dim() {
        return Err(Error::invalid("profile and basis dimensions differ"));
    }
    Ok(HsmKernel {
        basis: basis.clone(),
        s,
        m,
        profile: profile.clone(),
    })
}

/// `∇H_sm(x)` in closed form.
pub fn hsm_gradient(
    basis: &HarmonicBasis,
    s: usize,
    m: usize,
    profile: &AnisotropyProfile,
    x: &[f64],
) -> Result<Vec<f64>> {
    coverage::touch(Op::HsmGradient);
    hsm_kernel(basis, s, m, profile)?.gradient(x)
}

/// `sup |D^β Y_sm|` over `|β| = order`, all `s` of degree `m`, and the
/// given points, for the degree-zero extension of `Y_sm`. Order 0 and 1
/// are exact; order 2 differentiates the exact gradient numerically.
pub fn derivative_sup(basis: &HarmonicBasis, m: usize, order: usize, points: &[Vec<f64>]) -> f64 {
    let n = basis.dim();
    let mut sup = 0.0f64;
    for s in 1..=harmonic_count(n, m) {
        for u in points {
            match order {
                0 => sup = sup.max(basis.value(s, m, u).abs()),
                1 => {
                    let g = basis.extension_gradient(s, m, u);
                    sup = sup.max(g.iter().fold(0.0f64, |a, v| a.max(v.abs())));
                }
                2 => {
                    for i in 0..n {
                        let gi = |x: &[f64]| basis.extension_gradient(s, m, x)[i];
                        for j in i..n {
                            let mut beta = vec![0; n];
                            beta[j] = 1;
                            sup = sup.max(finite_difference(&gi, u, &beta).abs());
                        }
                    }
                }
                _ => panic!("derivative order {order} not supported"),
            }
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::sphere_quadrature;

    #[test]
    fn basis_dim_examples() {
        assert_eq!(basis_dim(2, 0).unwrap(), 1);
        assert_eq!(basis_dim(2, 5).unwrap(), 2);
        assert_eq!(basis_dim(3, 2).unwrap(), 5);
        assert_eq!(basis_dim(3, 1).unwrap(), 3);
        assert!(matches!(basis_dim(4, 2), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn eval_examples() {
        let b = HarmonicBasis::new(2, 4).unwrap();
        let u = [0.6, 0.8];
        assert!((eval_harmonic(&b, 1, 0, &u).unwrap() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((eval_harmonic(&b, 1, 2, &[1.0, 0.0]).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-15);
        let theta = 0.8f64.atan2(0.6);
        assert!((eval_harmonic(&b, 2, 3, &u).unwrap() - (3.0 * theta).sin() / PI.sqrt()).abs() < 1e-14);
        assert!(matches!(eval_harmonic(&b, 3, 2, &u), Err(Error::InvalidIndex { s: 3, m: 2 })));
        assert!(matches!(eval_harmonic(&b, 1, 5, &u), Err(Error::InvalidIndex { .. })));
        assert!(eval_harmonic(&b, 1, 1, &[1.0, 1.0]).is_err());
        let q = sphere_quadrature(2, 64).unwrap();
        let cross = q.integrate(|u| b.value(1, 2, u) * b.value(2, 2, u));
        assert!(cross.abs() < 1e-12);
    }

    #[test]
    fn n3_matches_textbook_forms() {
        let b = HarmonicBasis::new(3, 2).unwrap();
        let u = [0.48, -0.6, 0.64];
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        assert!((b.value(1, 1, &u) - c1 * u[2]).abs() < 1e-15);
        assert!((b.value(2, 1, &u) - c1 * u[0]).abs() < 1e-15);
        assert!((b.value(3, 1, &u) - c1 * u[1]).abs() < 1e-15);
        let y20 = 0.25 * (5.0 / PI).sqrt() * (3.0 * u[2] * u[2] - 1.0);
        assert!((b.value(1, 2, &u) - y20).abs() < 1e-15);
        let y22 = 0.25 * (15.0 / PI).sqrt() * (u[0] * u[0] - u[1] * u[1]);
        assert!((b.value(4, 2, &u) - y22).abs() < 1e-15);
    }

    #[test]
    fn gradient_is_tangential_and_matches_differences() {
        let b = HarmonicBasis::new(3, 6).unwrap();
        let u = [0.48, -0.6, 0.64];
        for &(s, m) in b.indices() {
            let g = b.extension_gradient(s, m, &u);
            let radial: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!(radial.abs() < 1e-12);
            for i in 0..3 {
                let mut beta = [0, 0, 0];
                beta[i] = 1;
                let fd = finite_difference(
                    &|x: &[f64]| {
                        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
                        b.value(s, m, &y)
                    },
                    &u,
                    &beta,
                );
                assert!((fd - g[i]).abs() < 1e-8, "({s},{m}) axis {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn expand_examples() {
        let basis = HarmonicBasis::new(2, 16).unwrap();
        let q = sphere_quadrature(2, 64).unwrap();
        let theta = |u: &[f64]| u[1].atan2(u[0]);
        let c = expand(|u| (2.0 * theta(u)).cos(), &basis, &q).unwrap();
        assert!((c.get(1, 2) - PI.sqrt()).abs() < 1e-12);
        for &(s, m) in basis.indices() {
            if (s, m) != (1, 2) {
                assert!(c.get(s, m).abs() < 1e-12);
            }
        }
        let one = expand(|_| 1.0, &basis, &q).unwrap();
        assert!((one.get(1, 0) - (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!(one.table.iter().skip(1).flatten().all(|b| b.abs() < 1e-12));
        let cz = expand(|u| (2.0 * theta(u)).cos() / PI.sqrt(), &basis, &q).unwrap();
        assert!((cz.get(1, 2) - 1.0).abs() < 1e-12);
        let csv = cz.to_csv_string();
        assert!(csv.starts_with("m,s,b_sm\n0,1,"));
        assert_eq!(csv.lines().count(), 1 + basis.len());
    }

    #[test]
    fn reconstruction_error_decreases() {
        let basis = HarmonicBasis::new(2, 16).unwrap();
        let q = sphere_quadrature(2, 128).unwrap();
        let table = SphereTable::new(&basis, &q).unwrap();
        let phi: Vec<f64> = q.nodes().iter().map(|u| (u[0] + 0.5 * u[1] * u[1]).exp()).collect();
        let c = table.expand_values(&phi);
        let errs: Vec<f64> = (2..=16).map(|d| table.reconstruction_error(&phi, &c, d)).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= 1.1 * w[0] || w[1] < 1e-13, "{errs:?}");
        }
        assert!(errs.last().unwrap() < &1e-12);
        // Parseval
        let norm2 = q.integrate(|u| (u[0] + 0.5 * u[1] * u[1]).exp().powi(2));
        assert!((c.sum_of_squares() - norm2).abs() < 1e-8);
    }

    #[test]
    fn decay_examples() {
        let basis = HarmonicBasis::new(2, 16).unwrap();
        let q = sphere_quadrature(2, 4096).unwrap();
        let theta = |u: &[f64]| u[1].atan2(u[0]);
        let single = expand(|u| (2.0 * theta(u)).cos(), &basis, &q).unwrap();
        assert!(decay_fit(&single).unwrap().degenerate);
        let analytic = expand(|u| u[0].exp(), &basis, &q).unwrap();
        let fit = decay_fit(&analytic).unwrap();
        assert!(fit.passes() && fit.slope.unwrap() < -4.0, "{fit:?}");

        // Oracle: the Fourier coefficients of |cos θ| against cos(mθ)/√π are
        // 4√π (−1)^{m/2+1} / (π (m² − 1)) for even m, zero for odd m.
        let abs_cos = expand(|u| u[0].abs(), &basis, &q).unwrap();
        for m in (2..=16).step_by(2) {
            let sign = if (m / 2) % 2 == 1 { 1.0 } else { -1.0 };
            let exact = sign * 4.0 * PI.sqrt() / (PI * ((m * m - 1) as f64));
            assert!((abs_cos.get(1, m) - exact).abs() < 1e-5, "m={m}");
        }
        let fit = decay_fit(&abs_cos).unwrap();
        let slope = fit.slope.unwrap();
        assert!(fit.passes() && slope > -2.3, "{slope}");

        let short = expand(|u| u[0], &HarmonicBasis::new(2, 8).unwrap(), &q).unwrap();
        assert!(decay_fit(&short).is_err());
    }

    #[test]
    fn hsm_examples() {
        let basis = HarmonicBasis::new(2, 4).unwrap();
        let iso = AnisotropyProfile::isotropic(2).unwrap();
        let h = hsm_kernel(&basis, 1, 2, &iso).unwrap();
        assert!((h.evaluate(&[1.0, 0.0]).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!(matches!(h.evaluate(&[0.0, 0.0]), Err(Error::SingularPoint)));
        assert!(matches!(h.gradient(&[0.0, 0.0]), Err(Error::SingularPoint)));
        let h0 = hsm_kernel(&basis, 1, 0, &iso).unwrap();
        assert!(h0.evaluate(&[0.3, 0.1]).unwrap() > 0.0);
        assert!(hsm_kernel(&basis, 2, 0, &iso).is_err());

        // m = 0: ∇(c ρ^{-α}) = −α c ρ^{-α-1} ∇ρ
        let p = AnisotropyProfile::new(vec![1.0, 2.0]).unwrap();
        let h0 = hsm_kernel(&basis, 1, 0, &p).unwrap();
        let x = [0.7, -0.4];
        let g = h0.gradient(&x).unwrap();
        let (r, _) = p.polar(&x);
        let s: f64 = x.iter().zip(p.exponents()).map(|(v, a)| a * v * v * r.powf(-2.0 * a)).sum();
        let c = 1.0 / (2.0 * PI).sqrt();
        for i in 0..2 {
            let drho = x[i] * r.powf(1.0 - 2.0 * p.exponents()[i]) / s;
            let expect = -3.0 * c * r.powf(-4.0) * drho;
            assert!((g[i] - expect).abs() < 1e-13 * expect.abs().max(1.0));
        }
    }
}
