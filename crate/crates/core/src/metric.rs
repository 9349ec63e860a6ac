//! Anisotropic quasi-distance, dilations, ellipsoids and quadrature on the
//! unit sphere.
//!
//! For exponents `α_i ≥ 1` the distance `ρ(x)` is the unique positive root of
//! `Σ x_i² ρ^{-2α_i} = 1`. Its balls are the ellipsoids
//! `Σ x_i² / r^{2α_i} < 1`, whose Lebesgue measure scales like `r^α` with
//! `α = Σ α_i`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coverage::{self, Op};
use crate::error::{Error, Result};

/// The exponents `α_1..α_n` of the mixed homogeneity and their sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AnisotropyProfile {
    exponents: Vec<f64>,
    homogeneous_dimension: f64,
    isotropic: bool,
}

impl TryFrom<Vec<f64>> for AnisotropyProfile {
    type Error = Error;

    fn try_from(exponents: Vec<f64>) -> Result<Self> {
        AnisotropyProfile::new(exponents)
    }
}

impl From<AnisotropyProfile> for Vec<f64> {
    fn from(p: AnisotropyProfile) -> Self {
        p.exponents
    }
}

impl AnisotropyProfile {
    pub fn new(exponents: Vec<f64>) -> Result<Self> {
        if exponents.len() < 2 {
            return Err(Error::invalid(format!(
                "anisotropy profile needs n >= 2 exponents, got {}",
                exponents.len()
            )));
        }
        if let Some(a) = exponents.iter().find(|a| !a.is_finite() || **a < 1.0) {
            return Err(Error::invalid(format!(
                "anisotropy exponents must be finite and >= 1, got {a}"
            )));
        }
        let homogeneous_dimension = exponents.iter().sum();
        let isotropic = exponents.iter().all(|a| *a == 1.0);
        Ok(AnisotropyProfile {
            exponents,
            homogeneous_dimension,
            isotropic,
        })
    }

    /// All exponents equal to one: `ρ` is the Euclidean norm.
    pub fn isotropic(n: usize) -> Result<Self> {
        AnisotropyProfile::new(vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// `α = Σ α_i`.
    pub fn homogeneous_dimension(&self) -> f64 {
        self.homogeneous_dimension
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    pub fn min_exponent(&self) -> f64 {
        self.exponents.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_exponent(&self) -> f64 {
        self.exponents.iter().copied().fold(0.0, f64::max)
    }

    /// `F(x, ρ) = Σ x_i² ρ^{-2α_i}`.
    pub fn defining_function(&self, x: &[f64], rho: f64) -> f64 {
        x.iter()
            .zip(&self.exponents)
            .map(|(xi, a)| xi * xi * rho.powf(-2.0 * a))
            .sum()
    }

    /// Quasi-distance of `x` from the origin. Assumes `x` is finite and of
    /// matching length; see [`rho`] for the checked entry point.
    pub fn rho(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            return 0.0;
        }
        if self.isotropic {
            return norm2.sqrt();
        }
        let (a_min, a_max) = (self.min_exponent(), self.max_exponent());
        let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let norm = norm2.sqrt();
        // F(lo) >= 1 >= F(hi); see the bracket argument in the tests.
        let lo = sup.powf(1.0 / a_min).min(sup.powf(1.0 / a_max));
        let hi = norm.powf(1.0 / a_min).max(norm.powf(1.0 / a_max));
        let r = self.solve_log_rho(x, lo.ln(), hi.ln()).exp();
        // One Newton step in ρ itself removes the ulp-level error of exp().
        let (mut f, mut df) = (-1.0, 0.0);
        for (xi, a) in x.iter().zip(&self.exponents) {
            let term = xi * xi * r.powf(-2.0 * a);
            f += term;
            df -= 2.0 * a * term / r;
        }
        let polished = r - f / df;
        if polished.is_finite() && polished > 0.0 {
            polished
        } else {
            r
        }
    }

    /// Safeguarded Newton iteration on `g(t) = F(x, e^t) - 1`, which is
    /// convex and strictly decreasing in `t`.
    fn solve_log_rho(&self, x: &[f64], mut lo: f64, mut hi: f64) -> f64 {
        let eval = |t: f64| {
            let mut g = -1.0;
            let mut dg = 0.0;
            for (xi, a) in x.iter().zip(&self.exponents) {
                let term = xi * xi * (-2.0 * a * t).exp();
                g += term;
                dg -= 2.0 * a * term;
            }
            (g, dg)
        };
        let mut t = hi;
        for _ in 0..200 {
            let (g, dg) = eval(t);
            if g == 0.0 {
                return t;
            }
            if g > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - g / dg;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - t).abs();
            t = next;
            if step <= 2.0 * f64::EPSILON * t.abs().max(1.0) || hi - lo <= f64::EPSILON * t.abs().max(1.0) {
                break;
            }
        }
        t
    }

    /// Anisotropic dilation `μ∘x = (μ^{α_1} x_1, …, μ^{α_n} x_n)`.
    pub fn dilate(&self, mu: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.exponents)
            .map(|(xi, a)| mu.powf(*a) * xi)
            .collect()
    }

    /// Splits `ξ ≠ 0` into `ρ(ξ)` and the point `ξ̄` of the unit sphere with
    /// `ξ = ρ(ξ)∘ξ̄`.
    pub fn polar(&self, xi: &[f64]) -> (f64, Vec<f64>) {
        let r = self.rho(xi);
        let bar = xi
            .iter()
            .zip(&self.exponents)
            .map(|(v, a)| v * r.powf(-a))
            .collect();
        (r, bar)
    }
}

fn check_point(x: &[f64], profile: &AnisotropyProfile) -> Result<()> {
    if x.len() != profile.dim() {
        return Err(Error::invalid(format!(
            "point has {} coordinates, profile has {}",
            x.len(),
            profile.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite point {x:?}")));
    }
    Ok(())
}

/// Quasi-distance `ρ(x)`: zero at the origin, otherwise the root of
/// `F(x, ρ) = 1`.
pub fn rho(x: &[f64], profile: &AnisotropyProfile) -> Result<f64> {
    coverage::touch(Op::Rho);
    check_point(x, profile)?;
    Ok(profile.rho(x))
}

pub fn dilate(mu: f64, x: &[f64], profile: &AnisotropyProfile) -> Result<Vec<f64>> {
    coverage::touch(Op::Dilate);
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("dilation factor must be positive, got {mu}")));
    }
    check_point(x, profile)?;
    Ok(profile.dilate(mu, x))
}

/// Volume of the Euclidean unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_n = 2π/n · V_{n-2}
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Surface area of the Euclidean unit sphere `Σₙ ⊂ ℝⁿ`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Open ball `{y : ρ(y − center) < radius}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    center: Vec<f64>,
    radius: f64,
    profile: AnisotropyProfile,
}

/// Points on the boundary within this tolerance count as outside.
pub const BOUNDARY_TOL: f64 = 1e-12;

impl Ellipsoid {
    pub fn new(center: Vec<f64>, radius: f64, profile: AnisotropyProfile) -> Result<Self> {
        check_point(&center, &profile)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("ellipsoid radius must be positive, got {radius}")));
        }
        Ok(Ellipsoid {
            center,
            radius,
            profile,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn profile(&self) -> &AnisotropyProfile {
        &self.profile
    }

    /// Semi-axis lengths `r^{α_i}`.
    pub fn semi_axes(&self) -> Vec<f64> {
        self.profile
            .exponents()
            .iter()
            .map(|a| self.radius.powf(*a))
            .collect()
    }

    /// Same center, radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ellipsoid::new(self.center.clone(), self.radius * factor, self.profile.clone())
    }

    /// `Σ (x_i − c_i)² / r^{2α_i}`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .zip(self.profile.exponents())
            .map(|((xi, ci), a)| {
                let d = (xi - ci) / self.radius.powf(*a);
                d * d
            })
            .sum()
    }

    /// Membership via `ρ(x − center) < radius`; agrees with
    /// [`ellipsoid_contains`].
    pub fn contains_by_rho(&self, x: &[f64]) -> bool {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.profile.rho(&d) < self.radius * (1.0 - BOUNDARY_TOL)
    }

    pub fn measure(&self) -> f64 {
        unit_ball_volume(self.profile.dim()) * self.radius.powf(self.profile.homogeneous_dimension())
    }
}

/// `|E_r| = V_n r^α`.
pub fn ellipsoid_measure(e: &Ellipsoid) -> f64 {
    coverage::touch(Op::EllipsoidMeasure);
    e.measure()
}

/// Strict membership in the open ellipsoid.
pub fn ellipsoid_contains(e: &Ellipsoid, x: &[f64]) -> bool {
    coverage::touch(Op::EllipsoidContains);
    x.len() == e.profile.dim() && e.quadratic_form(x) < 1.0 - BOUNDARY_TOL
}

/// Quadrature rule for `∫_{Σₙ} · dσ`.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    dim: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

/// Uniform trapezoid rule in angle for `n = 2`; Gauss–Legendre in the
/// polar cosine times a uniform azimuthal rule for `n = 3`.
///
/// For `n = 3` the rule uses `resolution` polar and `2·resolution` azimuthal
/// nodes, which integrates products of harmonics up to total degree
/// `2·resolution − 1` exactly.
pub fn sphere_quadrature(n: usize, resolution: usize) -> Result<SphereQuadrature> {
    coverage::touch(Op::SphereQuadrature);
    if resolution < 8 {
        return Err(Error::invalid(format!("sphere quadrature resolution must be >= 8, got {resolution}")));
    }
    match n {
        2 => {
            let w = 2.0 * PI / resolution as f64;
            let nodes = (0..resolution)
                .map(|j| {
                    let t = w * j as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            Ok(SphereQuadrature {
                dim: 2,
                nodes,
                weights: vec![w; resolution],
            })
        }
        3 => {
            let (z, wz) = gauss_legendre(resolution);
            let naz = 2 * resolution;
            let waz = 2.0 * PI / naz as f64;
            let mut nodes = Vec::with_capacity(resolution * naz);
            let mut weights = Vec::with_capacity(resolution * naz);
            for (zi, wi) in z.iter().zip(&wz) {
                let s = (1.0 - zi * zi).max(0.0).sqrt();
                for j in 0..naz {
                    let phi = waz * j as f64;
                    nodes.push(vec![s * phi.cos(), s * phi.sin(), *zi]);
                    weights.push(wi * waz);
                }
            }
            Ok(SphereQuadrature {
                dim: 3,
                nodes,
                weights,
            })
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(k, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn profile(a: &[f64]) -> AnisotropyProfile {
        AnisotropyProfile::new(a.to_vec()).unwrap()
    }

    /// Plain bisection on F(x, ρ) = 1, used as an independent oracle.
    fn rho_bisection(x: &[f64], p: &AnisotropyProfile) -> f64 {
        let (mut lo, mut hi) = (1e-12f64, 1e12f64);
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if p.defining_function(x, mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn rho_examples() {
        assert!((rho(&[3.0, 4.0], &profile(&[1.0, 1.0])).unwrap() - 5.0).abs() < 1e-13);
        let p12 = profile(&[1.0, 2.0]);
        assert!((rho(&[0.0, 4.0], &p12).unwrap() - 2.0).abs() < 1e-13);
        assert!((rho_bisection(&[0.0, 4.0], &p12) - 2.0).abs() < 1e-10);
        assert_eq!(rho(&[0.0, 0.0, 0.0], &profile(&[1.0, 2.0, 3.0])).unwrap(), 0.0);
    }

    #[test]
    fn rho_rejects_non_finite() {
        assert!(matches!(
            rho(&[f64::NAN, 1.0], &profile(&[1.0, 2.0])),
            Err(Error::InvalidArgument(_))
        ));
        assert!(rho(&[1.0], &profile(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn profile_invariants() {
        assert!(AnisotropyProfile::new(vec![1.0]).is_err());
        assert!(AnisotropyProfile::new(vec![0.5, 1.0]).is_err());
        let p = profile(&[1.0, 2.5, 1.5]);
        assert_eq!(p.homogeneous_dimension(), 5.0);
    }

    #[test]
    fn rho_matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = profile(&[1.0, 2.0, 3.5]);
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1e3..1e3) * rng.gen::<f64>().powi(6)).collect();
            let a = p.rho(&x);
            let b = rho_bisection(&x, &p);
            assert!((a - b).abs() <= 1e-10 * b.max(1.0), "{x:?}: {a} vs {b}");
            assert!((p.defining_function(&x, a) - 1.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn initial_bracket_encloses_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = profile(&[1.0, 1.7, 3.0]);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-50.0..50.0) * rng.gen::<f64>().powi(4)).collect();
            let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let lo = sup.powf(1.0 / 1.0).min(sup.powf(1.0 / 3.0));
            let hi = norm.powf(1.0 / 1.0).max(norm.powf(1.0 / 3.0));
            assert!(p.defining_function(&x, lo) >= 1.0 - 1e-12);
            assert!(p.defining_function(&x, hi) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn dilate_examples() {
        let p12 = profile(&[1.0, 2.0]);
        assert_eq!(dilate(1.0, &[0.3, -0.7], &p12).unwrap(), vec![0.3, -0.7]);
        let d = dilate(2.0, &[0.0, 4.0], &p12).unwrap();
        assert_eq!(d, vec![0.0, 16.0]);
        assert!((p12.rho(&d) - 4.0).abs() < 1e-12);
        assert_eq!(dilate(3.0, &[1.0, 1.0], &profile(&[1.0, 1.0])).unwrap(), vec![3.0, 3.0]);
        assert!(dilate(0.0, &[1.0, 1.0], &p12).is_err());
        assert!(dilate(-1.0, &[1.0, 1.0], &p12).is_err());
    }

    #[test]
    fn ellipsoid_examples() {
        let p12 = profile(&[1.0, 2.0]);
        let e = Ellipsoid::new(vec![0.0, 0.0], 2.0, p12.clone()).unwrap();
        assert!((ellipsoid_measure(&e) - 8.0 * PI).abs() < 1e-12);
        let unit = Ellipsoid::new(vec![0.0, 0.0], 1.0, profile(&[1.0, 1.0])).unwrap();
        assert!((ellipsoid_measure(&unit) - PI).abs() < 1e-15);
        let twice = e.scaled(2.0).unwrap();
        assert!((twice.measure() / e.measure() - 8.0).abs() < 1e-12);

        assert!(ellipsoid_contains(&e, &[0.0, 0.0]));
        assert!(!ellipsoid_contains(&e, &[0.0, 4.0]));
        let e5 = Ellipsoid::new(vec![0.0, 0.0], 5.0, profile(&[1.0, 1.0])).unwrap();
        assert!(!ellipsoid_contains(&e5, &[3.0, 4.0]));
        assert!(Ellipsoid::new(vec![0.0, 0.0], 0.0, p12).is_err());
    }

    #[test]
    fn ellipsoid_measure_matches_monte_carlo() {
        let p = profile(&[1.0, 2.0]);
        let e = Ellipsoid::new(vec![0.5, -0.25], 1.3, p).unwrap();
        let ax = e.semi_axes();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| {
                let x = [0.5 + ax[0] * rng.gen_range(-1.0..1.0), -0.25 + ax[1] * rng.gen_range(-1.0..1.0)];
                e.contains_by_rho(&x)
            })
            .count();
        let mc = 4.0 * ax[0] * ax[1] * hits as f64 / trials as f64;
        assert!((mc / e.measure() - 1.0).abs() < 0.01);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn sphere_quadrature_examples() {
        let q2 = sphere_quadrature(2, 64).unwrap();
        assert!((q2.weights().iter().sum::<f64>() - 2.0 * PI).abs() < 1e-12);
        let c2 = q2.integrate(|x| {
            let t = x[1].atan2(x[0]);
            (2.0 * t).cos()
        });
        assert!(c2.abs() < 1e-12);
        let q3 = sphere_quadrature(3, 32).unwrap();
        assert!((q3.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
        for x in q3.nodes().iter().chain(q2.nodes()) {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        // ∫ z² dσ = 4π/3
        assert!((q3.integrate(|x| x[2] * x[2]) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(matches!(sphere_quadrature(4, 16), Err(Error::UnsupportedDimension(4))));
        assert!(sphere_quadrature(2, 4).is_err());
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((integral - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn polar_lands_on_unit_sphere() {
        let p = profile(&[1.0, 2.0, 1.5]);
        let (r, bar) = p.polar(&[0.3, -2.0, 0.7]);
        let norm2: f64 = bar.iter().map(|v| v * v).sum();
        assert!((norm2 - 1.0).abs() < 1e-13);
        let back = p.dilate(r, &bar);
        assert!((back[1] + 2.0).abs() < 1e-12);
    }
}
