//! Variable kernels `k(x; ξ)` of mixed homogeneity, their validation, and
//! the built-in examples.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coverage::{self, Op};
use crate::error::{Error, Result};
use crate::metric::{sphere_quadrature, AnisotropyProfile, SphereQuadrature};
use crate::rng::{random_unit_vector, SeedStream};

pub type KernelFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type BaseFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// How a kernel depends on its first argument. Operators use this to
/// reuse work across evaluation points.
#[derive(Clone)]
pub enum KernelStructure {
    /// `k(x; ξ) = k₀(ξ)`.
    Constant(BaseFn),
    /// `k(x; ξ) = c(x)·k₀(ξ)`.
    Separable { factor: BaseFn, base: BaseFn },
    /// Arbitrary dependence on `x`.
    General(KernelFn),
}

/// An evaluatable kernel `k(x; ξ)`, `ξ ≠ 0`.
#[derive(Clone)]
pub struct VariableKernel {
    name: String,
    profile: AnisotropyProfile,
    smoothness_order: usize,
    structure: KernelStructure,
}

impl fmt::Debug for VariableKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VariableKernel")
            .field("name", &self.name)
            .field("profile", &self.profile)
            .field("smoothness_order", &self.smoothness_order)
            .finish_non_exhaustive()
    }
}

impl VariableKernel {
    pub fn new(
        name: impl Into<String>,
        profile: AnisotropyProfile,
        smoothness_order: usize,
        structure: KernelStructure,
    ) -> Self {
        VariableKernel {
            name: name.into(),
            profile,
            smoothness_order,
            structure,
        }
    }

    pub fn constant(
        name: impl Into<String>,
        profile: AnisotropyProfile,
        smoothness_order: usize,
        base: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, profile, smoothness_order, KernelStructure::Constant(Arc::new(base)))
    }

    pub fn general(
        name: impl Into<String>,
        profile: AnisotropyProfile,
        smoothness_order: usize,
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, profile, smoothness_order, KernelStructure::General(Arc::new(eval)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn profile(&self) -> &AnisotropyProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }

    pub fn smoothness_order(&self) -> usize {
        self.smoothness_order
    }

    pub fn structure(&self) -> &KernelStructure {
        &self.structure
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64], xi: &[f64]) -> f64 {
        match &self.structure {
            KernelStructure::Constant(base) => base(xi),
            KernelStructure::Separable { factor, base } => factor(x) * base(xi),
            KernelStructure::General(k) => k(x, xi),
        }
    }

    /// Like [`evaluate`](Self::evaluate) but rejects non-finite values.
    pub fn try_evaluate(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        let v = self.evaluate(x, xi);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                kernel: self.name.clone(),
                x: x.to_vec(),
                xi: xi.to_vec(),
            })
        }
    }

    /// Multiplies the kernel by `c(x)`.
    pub fn with_factor(self, name: impl Into<String>, c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let c: BaseFn = Arc::new(c);
        let structure = match self.structure {
            KernelStructure::Constant(base) => KernelStructure::Separable { factor: c, base },
            KernelStructure::Separable { factor, base } => KernelStructure::Separable {
                factor: Arc::new(move |x| c(x) * factor(x)),
                base,
            },
            KernelStructure::General(k) => KernelStructure::General(Arc::new(move |x, xi| c(x) * k(x, xi))),
        };
        VariableKernel {
            name: name.into(),
            structure,
            ..self
        }
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["CZ2", "MIX12", "VAR-CZ2", "RIESZ3"];

/// Built-in kernels:
///
/// * `CZ2`: `(ξ₁² − ξ₂²)/(√π |ξ|⁴)` on ℝ², isotropic.
/// * `MIX12`: `ξ₁ξ₂/ρ(ξ)⁶` on ℝ² with exponents `(1, 2)`.
/// * `VAR-CZ2`: `CZ2` times `2 + sin x₁`.
/// * `RIESZ3`: `ξ₁ξ₂/|ξ|⁵` on ℝ³, isotropic.
pub fn builtin(name: &str) -> Result<VariableKernel> {
    coverage::touch(Op::Builtin);
    let k = match name {
        "CZ2" => cz2(),
        "MIX12" => {
            let p = AnisotropyProfile::new(vec![1.0, 2.0])?;
            let q = p.clone();
            VariableKernel::constant("MIX12", p, usize::MAX, move |xi| {
                let r = q.rho(xi);
                xi[0] * xi[1] / r.powi(6)
            })
        }
        "VAR-CZ2" => cz2().with_factor("VAR-CZ2", |x| 2.0 + x[0].sin()),
        "RIESZ3" => VariableKernel::constant("RIESZ3", AnisotropyProfile::isotropic(3)?, usize::MAX, |xi| {
            let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            xi[0] * xi[1] / (r2 * r2 * r2.sqrt())
        }),
        other => return Err(Error::UnknownKernel(other.to_string())),
    };
    Ok(k)
}

fn cz2() -> VariableKernel {
    let norm = 1.0 / PI.sqrt();
    VariableKernel::constant(
        "CZ2",
        AnisotropyProfile::isotropic(2).expect("n=2"),
        usize::MAX,
        move |xi| {
            let r2 = xi[0] * xi[0] + xi[1] * xi[1];
            norm * (xi[0] * xi[0] - xi[1] * xi[1]) / (r2 * r2)
        },
    )
}

/// `1/(1 + |ξ|²)`: smooth but not homogeneous.
pub fn non_homogeneous_example(profile: AnisotropyProfile) -> VariableKernel {
    VariableKernel::constant("non-homogeneous", profile, usize::MAX, |xi| {
        1.0 / (1.0 + xi.iter().map(|v| v * v).sum::<f64>())
    })
}

/// `c/ρ(ξ)^α`: homogeneous, without cancellation for `c ≠ 0`.
pub fn radial_example(profile: AnisotropyProfile, c: f64) -> VariableKernel {
    let q = profile.clone();
    VariableKernel::constant("radial", profile, usize::MAX, move |xi| {
        c / q.rho(xi).powf(q.homogeneous_dimension())
    })
}

/// `ξ̄₁ exp(ξ̄₂)/ρ(ξ)^α`: a smooth kernel whose restriction to `Σₙ` has
/// infinitely many nonzero harmonic coefficients, decaying factorially.
/// Cancels because it is odd in `ξ₁`.
pub fn smooth_series_example(profile: AnisotropyProfile) -> VariableKernel {
    let q = profile.clone();
    VariableKernel::constant("smooth-series", profile, usize::MAX, move |xi| {
        let (r, bar) = q.polar(xi);
        bar[0] * bar[1].exp() / r.powf(q.homogeneous_dimension())
    })
}

/// Residual of a check against its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub residual: f64,
    pub passed: bool,
}

/// Random parameter points `x`; uniform in `[-π, π]ⁿ`.
fn random_x(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-PI..PI)).collect()
}

/// Max over random `x`, `ξ ∈ Σₙ` and `μ ∈ [0.1, 10]` (log-uniform) of
/// `|k(x; μ∘ξ) − μ^{-α} k(x; ξ)| / (1 + |k(x; ξ)|)`.
pub fn check_homogeneity(k: &VariableKernel, sample_count: usize, tol: f64, seed: u64) -> Result<CheckOutcome> {
    coverage::touch(Op::CheckHomogeneity);
    if sample_count < 100 {
        return Err(Error::invalid(format!("homogeneity check needs >= 100 samples, got {sample_count}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = k.profile();
    let alpha = p.homogeneous_dimension();
    let mut worst = 0.0f64;
    for _ in 0..sample_count {
        let x = random_x(&mut rng, p.dim());
        let xi = random_unit_vector(&mut rng, p.dim());
        let mu = (rng.gen_range((0.1f64).ln()..(10.0f64).ln())).exp();
        let base = k.try_evaluate(&x, &xi)?;
        let scaled = k.try_evaluate(&x, &p.dilate(mu, &xi))?;
        let r = (scaled - mu.powf(-alpha) * base).abs() / (1.0 + base.abs());
        worst = worst.max(r);
    }
    Ok(CheckOutcome {
        residual: worst,
        passed: worst <= tol,
    })
}

/// Sphere integrals of `k(x; ·)`: `(|∫ k dσ|, ∫ |k| dσ)`.
pub fn check_cancellation(k: &VariableKernel, x: &[f64], q: &SphereQuadrature) -> Result<(f64, f64)> {
    coverage::touch(Op::CheckCancellation);
    if q.dim() != k.dim() {
        return Err(Error::invalid(format!(
            "quadrature dimension {} does not match kernel dimension {}",
            q.dim(),
            k.dim()
        )));
    }
    let mut mean = 0.0;
    let mut abs = 0.0;
    for (xi, w) in q.nodes().iter().zip(q.weights()) {
        let v = k.try_evaluate(x, xi)?;
        mean += w * v;
        abs += w * v.abs();
    }
    Ok((mean.abs(), abs))
}

/// Multiindex `β`, one order per axis.
pub type Multiindex = Vec<usize>;

/// All multiindices of length `n` with `|β| ≤ max_order`, ordered by total
/// order then lexicographically.
pub fn multiindices(n: usize, max_order: usize) -> Vec<Multiindex> {
    let mut out = Vec::new();
    for total in 0..=max_order {
        let mut cur = vec![0; n];
        fill_multiindices(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill_multiindices(out: &mut Vec<Multiindex>, cur: &mut Vec<usize>, axis: usize, remaining: usize) {
    if axis + 1 == cur.len() {
        cur[axis] = remaining;
        out.push(cur.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        cur[axis] = k;
        fill_multiindices(out, cur, axis + 1, remaining - k);
    }
}

/// Central-difference stencils of fourth-order accuracy:
/// (offsets in units of h, coefficients before dividing by h^order).
fn stencil(order: usize) -> (&'static [i32], &'static [f64]) {
    match order {
        0 => (&[0], &[1.0]),
        1 => (&[-2, -1, 1, 2], &[1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0]),
        2 => (&[-2, -1, 0, 1, 2], &[-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0]),
        3 => (
            &[-3, -2, -1, 1, 2, 3],
            &[1.0 / 8.0, -1.0, 13.0 / 8.0, -13.0 / 8.0, 1.0, -1.0 / 8.0],
        ),
        4 => (
            &[-3, -2, -1, 0, 1, 2, 3],
            &[-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0],
        ),
        _ => panic!("no stencil for derivative order {order}"),
    }
}

/// Highest per-axis derivative order with a built-in stencil.
pub const MAX_STENCIL_ORDER: usize = 4;

/// Step for a derivative of total order `k`: `1e-4` for first derivatives,
/// `ε_mach^{1/(k+4)}` above that to balance truncation and round-off.
pub fn difference_step(total_order: usize) -> f64 {
    if total_order <= 1 {
        1e-4
    } else {
        f64::EPSILON.powf(1.0 / (total_order as f64 + 4.0))
    }
}

/// `D^β g(p)` by tensor-product central differences.
pub fn finite_difference(g: &dyn Fn(&[f64]) -> f64, p: &[f64], beta: &[usize]) -> f64 {
    let total: usize = beta.iter().sum();
    if total == 0 {
        return g(p);
    }
    let h = difference_step(total);
    let stencils: Vec<_> = beta.iter().map(|b| stencil(*b)).collect();
    let mut idx = vec![0usize; p.len()];
    let mut q = p.to_vec();
    let mut acc = 0.0;
    'outer: loop {
        let mut coef = 1.0;
        for (axis, (offs, cs)) in stencils.iter().enumerate() {
            q[axis] = p[axis] + offs[idx[axis]] as f64 * h;
            coef *= cs[idx[axis]];
        }
        acc += coef * g(&q);
        for axis in (0..p.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < stencils[axis].0.len() {
                continue 'outer;
            }
            idx[axis] = 0;
        }
        break;
    }
    acc / h.powi(total as i32)
}

/// Empirical `sup |D^β_ξ k(x; ξ)|` over `sample_count` random `x` and the
/// nodes of a sphere quadrature, for every `|β| ≤ max_order`.
pub fn check_derivative_bounds(
    k: &VariableKernel,
    max_order: usize,
    sample_count: usize,
    seed: u64,
) -> Result<BTreeMap<Multiindex, f64>> {
    coverage::touch(Op::CheckDerivativeBounds);
    if max_order > k.smoothness_order() || max_order > MAX_STENCIL_ORDER {
        return Err(Error::invalid(format!(
            "derivative order {max_order} exceeds the available smoothness of `{}`",
            k.name()
        )));
    }
    let n = k.dim();
    let q = sphere_quadrature(n, if n == 2 { 64 } else { 12 })?;
    let betas = multiindices(n, max_order);
    let mut sups: BTreeMap<Multiindex, f64> = betas.iter().map(|b| (b.clone(), 0.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // x-independent kernels need only one parameter sample.
    let x_samples = match k.structure() {
        KernelStructure::Constant(_) => 1,
        _ => sample_count.max(1),
    };
    for _ in 0..x_samples {
        let x = random_x(&mut rng, n);
        let g = |xi: &[f64]| k.evaluate(&x, xi);
        for node in q.nodes() {
            for beta in &betas {
                let d = finite_difference(&g, node, beta);
                let entry = sups.get_mut(beta).expect("present");
                if !d.is_finite() {
                    *entry = f64::INFINITY;
                } else {
                    *entry = entry.max(d.abs());
                }
            }
        }
    }
    Ok(sups)
}

/// Thresholds used by [`validate`].
#[derive(Clone, Debug, Serialize)]
pub struct ValidationConfig {
    pub homogeneity_tol: f64,
    pub cancellation_tol: f64,
    pub homogeneity_samples: usize,
    pub cancellation_points: usize,
    pub max_order: usize,
    pub derivative_samples: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            homogeneity_tol: 1e-10,
            cancellation_tol: 1e-10,
            homogeneity_samples: 1000,
            cancellation_points: 16,
            max_order: 4,
            derivative_samples: 20,
            seed: 0x5eed,
        }
    }
}

/// Outcome of checking every kernel axiom.
#[derive(Clone, Debug, Serialize)]
pub struct KernelValidationReport {
    pub kernel: String,
    pub homogeneity_max_residual: f64,
    pub cancellation_residual: f64,
    pub mean_absolute_integral: f64,
    /// Derivatives are checked up to this total order only.
    pub max_order: usize,
    pub derivative_sup_estimates: BTreeMap<String, f64>,
    pub pass: bool,
}

pub fn format_multiindex(beta: &[usize]) -> String {
    beta.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")
}

/// Runs homogeneity, cancellation and derivative checks.
pub fn validate(k: &VariableKernel, cfg: &ValidationConfig) -> Result<KernelValidationReport> {
    let mut seeds = SeedStream::new(cfg.seed);
    let homogeneity = check_homogeneity(k, cfg.homogeneity_samples, cfg.homogeneity_tol, seeds.next_seed())?;
    let q = sphere_quadrature(k.dim(), if k.dim() == 2 { 256 } else { 32 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.next_seed());
    let mut cancellation = 0.0f64;
    let mut abs_integral = 0.0f64;
    for _ in 0..cfg.cancellation_points {
        let x = random_x(&mut rng, k.dim());
        let (m, a) = check_cancellation(k, &x, &q)?;
        cancellation = cancellation.max(m);
        abs_integral = abs_integral.max(a);
    }
    let max_order = cfg.max_order.min(k.smoothness_order());
    let sups = check_derivative_bounds(k, max_order, cfg.derivative_samples, seeds.next_seed())?;
    let derivatives_finite = sups.values().all(|v| v.is_finite());
    let pass = homogeneity.passed
        && cancellation <= cfg.cancellation_tol
        && abs_integral.is_finite()
        && derivatives_finite;
    Ok(KernelValidationReport {
        kernel: k.name().to_string(),
        homogeneity_max_residual: homogeneity.residual,
        cancellation_residual: cancellation,
        mean_absolute_integral: abs_integral,
        max_order,
        derivative_sup_estimates: sups.into_iter().map(|(b, v)| (format_multiindex(&b), v)).collect(),
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEED: u64 = 42;

    #[test]
    fn homogeneity_examples() {
        for name in BUILTIN_NAMES {
            let k = builtin(name).unwrap();
            let out = check_homogeneity(&k, 1000, 1e-12, SEED).unwrap();
            assert!(out.passed, "{name}: {}", out.residual);
        }
        let bad = non_homogeneous_example(AnisotropyProfile::isotropic(2).unwrap());
        let out = check_homogeneity(&bad, 200, 1e-10, SEED).unwrap();
        assert!(!out.passed && out.residual > 1e-2);
        assert!(check_homogeneity(&bad, 10, 1e-10, SEED).is_err());
    }

    #[test]
    fn homogeneity_reports_evaluation_failure() {
        let k = VariableKernel::constant("nan", AnisotropyProfile::isotropic(2).unwrap(), 4, |xi| {
            if xi[0] > 0.9 {
                f64::NAN
            } else {
                1.0
            }
        });
        match check_homogeneity(&k, 1000, 1e-10, SEED) {
            Err(Error::Evaluation { kernel, xi, .. }) => {
                assert_eq!(kernel, "nan");
                assert!(xi[0] > 0.9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cancellation_examples() {
        // Oracle: ∫₀^{2π} |cos 2θ| dθ / √π = 4/√π, by composite Simpson
        // on the four smooth pieces.
        let oracle = {
            let pieces = 4.0;
            let n = 2000;
            let (a, b) = (-PI / 4.0, PI / 4.0);
            let h = (b - a) / n as f64;
            let mut s = 0.0;
            for i in 0..=n {
                let t = a + i as f64 * h;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * (2.0 * t).cos();
            }
            pieces * s * h / 3.0 / PI.sqrt()
        };
        assert!((oracle - 4.0 / PI.sqrt()).abs() < 1e-12);

        let cz2 = builtin("CZ2").unwrap();
        let q = sphere_quadrature(2, 64).unwrap();
        let (mean, _) = check_cancellation(&cz2, &[0.3, 0.1], &q).unwrap();
        assert!(mean <= 1e-12);
        // |cos 2θ| has kinks; the trapezoid rule needs many nodes for 1e-10.
        let fine = sphere_quadrature(2, 1 << 20).unwrap();
        let (_, abs) = check_cancellation(&cz2, &[0.3, 0.1], &fine).unwrap();
        assert!((abs - oracle).abs() < 1e-10, "{abs} vs {oracle}");

        let mix = builtin("MIX12").unwrap();
        let (mean, abs) = check_cancellation(&mix, &[1.0, 2.0], &q).unwrap();
        assert!(mean <= 1e-10 && abs.is_finite());

        let radial = radial_example(AnisotropyProfile::isotropic(2).unwrap(), 0.5);
        let (mean, _) = check_cancellation(&radial, &[0.0, 0.0], &q).unwrap();
        assert!((mean - 0.5 * 2.0 * PI).abs() < 1e-12);

        let q3 = sphere_quadrature(3, 16).unwrap();
        assert!(check_cancellation(&cz2, &[0.0, 0.0], &q3).is_err());
    }

    #[test]
    fn derivative_bound_examples() {
        let cz2 = builtin("CZ2").unwrap();
        let sups = check_derivative_bounds(&cz2, 2, 10, SEED).unwrap();
        assert!((sups[&vec![0, 0]] - 1.0 / PI.sqrt()).abs() < 0.02 / PI.sqrt());
        let var = builtin("VAR-CZ2").unwrap();
        let sups = check_derivative_bounds(&var, 0, 100, SEED).unwrap();
        let s0 = sups[&vec![0, 0]];
        assert!((s0 - 3.0 / PI.sqrt()).abs() < 0.02 * 3.0 / PI.sqrt(), "{s0}");
    }

    #[test]
    fn derivative_sups_are_stable_when_samples_double() {
        let var = builtin("VAR-CZ2").unwrap();
        let a = check_derivative_bounds(&var, 4, 50, SEED).unwrap();
        let b = check_derivative_bounds(&var, 4, 100, SEED + 1).unwrap();
        for (beta, va) in &a {
            let vb = b[beta];
            assert!(va.is_finite() && vb.is_finite());
            assert!((va - vb).abs() <= 0.1 * va.max(vb), "{beta:?}: {va} vs {vb}");
        }
    }

    #[test]
    fn finite_differences_match_analytic_derivatives() {
        let g = |p: &[f64]| (p[0] * 1.3).sin() * (0.7 * p[1]).exp();
        let p = [0.4f64, -0.2];
        let exact = |a: usize, b: usize| {
            let s = match a % 4 {
                0 => (p[0] * 1.3).sin(),
                1 => (p[0] * 1.3).cos(),
                2 => -(p[0] * 1.3).sin(),
                _ => -(p[0] * 1.3).cos(),
            };
            1.3f64.powi(a as i32) * s * 0.7f64.powi(b as i32) * (0.7 * p[1]).exp()
        };
        for beta in multiindices(2, 4) {
            let d = finite_difference(&g, &p, &beta);
            let e = exact(beta[0], beta[1]);
            assert!((d - e).abs() < 1e-6, "{beta:?}: {d} vs {e}");
        }
    }

    #[test]
    fn multiindex_enumeration() {
        assert_eq!(multiindices(2, 4).len(), 15);
        assert_eq!(multiindices(3, 4).len(), 35);
        assert_eq!(multiindices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn builtin_examples() {
        assert!(matches!(builtin("NOPE"), Err(Error::UnknownKernel(_))));
        let var = builtin("VAR-CZ2").unwrap();
        let xi = [0.3, 0.8];
        let (x1, x2) = ([0.4, 0.0], [-1.1, 5.0]);
        let ratio = var.evaluate(&x1, &xi) / var.evaluate(&x2, &xi);
        assert!((ratio - (2.0 + 0.4f64.sin()) / (2.0 + (-1.1f64).sin())).abs() < 1e-14);
        // degree -α homogeneity along rays from the sphere
        let mix = builtin("MIX12").unwrap();
        let p = mix.profile().clone();
        let bar = [0.6, 0.8];
        for r in [0.1, 0.5, 3.0, 10.0] {
            let v = mix.evaluate(&[0.0, 0.0], &p.dilate(r, &bar)) * r.powf(3.0);
            assert!((v - mix.evaluate(&[0.0, 0.0], &bar)).abs() < 1e-12);
        }
    }

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            let report = validate(&builtin(name).unwrap(), &ValidationConfig::default()).unwrap();
            assert!(report.pass, "{report:?}");
            assert_eq!(report.max_order, 4);
        }
        let radial = radial_example(AnisotropyProfile::isotropic(2).unwrap(), 1.0);
        assert!(!validate(&radial, &ValidationConfig::default()).unwrap().pass);
    }
}
