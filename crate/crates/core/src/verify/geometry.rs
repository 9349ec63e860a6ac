//! Experiments on the metric, the kernels, the harmonics and the smoothness
//! conditions of the constant kernels.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::harmonics::{basis_dim, decay_fit, derivative_sup, eval_harmonic, expand, hsm_gradient, hsm_kernel, HarmonicBasis};
use crate::kernel::{
    builtin, check_cancellation, check_derivative_bounds, check_homogeneity, non_homogeneous_example, radial_example,
    validate, ValidationConfig, BUILTIN_NAMES,
};
use crate::metric::{
    dilate, ellipsoid_contains, ellipsoid_measure, rho, sphere_quadrature, unit_ball_volume, unit_sphere_area,
    AnisotropyProfile, Ellipsoid,
};
use crate::numeric::{loglog_slope, max_of, min_of};
use crate::operators::{hormander_integral, hormander_pointwise};
use crate::rng::{random_unit_vector, standard_normal, SeedStream};

use super::config::ExperimentConfig;
use super::report::VerificationReport;

fn label(p: &AnisotropyProfile) -> String {
    let parts: Vec<String> = p.exponents().iter().map(|a| format!("{a}")).collect();
    format!("({})", parts.join(","))
}

fn profiles(cfg: &ExperimentConfig, defaults: &[&[f64]]) -> Result<Vec<AnisotropyProfile>> {
    match &cfg.profile {
        Some(p) => Ok(vec![AnisotropyProfile::new(p.clone())?]),
        None => defaults.iter().map(|e| AnisotropyProfile::new(e.to_vec())).collect(),
    }
}

/// A random point with log-uniform magnitude over four decades.
fn random_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    (0..n).map(|_| scale * standard_normal(rng)).collect()
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub(super) fn metric_axioms(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    const SAMPLES: usize = 10_000;
    const TRIPLES: usize = 1_000;
    for p in profiles(cfg, &[&[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0, 2.0], &[1.0, 1.5, 3.0]])? {
        let n = p.dim();
        let tag = label(&p);
        let mut rng = seeds.next_rng();
        rep.check(&format!("metric.homogeneity{tag}"), "rho(mu o x) = mu rho(x)", |c| {
            let mut worst = 0.0f64;
            for _ in 0..SAMPLES {
                let x = random_point(&mut rng, n);
                let mu = 10f64.powf(rng.gen_range(-2.0..2.0));
                let lhs = rho(&dilate(mu, &x, &p)?, &p)?;
                let rhs = mu * rho(&x, &p)?;
                worst = worst.max((lhs - rhs).abs() / rhs);
            }
            c.constant("max_relative_residual", worst).constant("samples", SAMPLES as f64);
            c.require(worst <= 1e-10);
            Ok(())
        });
        rep.check(&format!("metric.unit-sphere{tag}"), "rho = 1 exactly on the Euclidean unit sphere", |c| {
            let mut worst = 0.0f64;
            for _ in 0..SAMPLES {
                let theta = random_unit_vector(&mut rng, n);
                worst = worst.max((p.rho(&theta) - 1.0).abs());
                // Conversely the polar projection lands on the sphere.
                let (_, bar) = p.polar(&random_point(&mut rng, n));
                let norm = bar.iter().map(|v| v * v).sum::<f64>().sqrt();
                worst = worst.max((norm - 1.0).abs());
            }
            c.constant("max_residual", worst);
            c.require(worst <= 1e-10);
            Ok(())
        });
        rep.check(&format!("metric.triangle{tag}"), "rho(x - z) <= rho(x - y) + rho(y - z)", |c| {
            let mut violations = 0usize;
            let mut worst = 0.0f64;
            for _ in 0..TRIPLES {
                let x = random_point(&mut rng, n);
                let y = random_point(&mut rng, n);
                let z = random_point(&mut rng, n);
                let lhs = p.rho(&sub(&x, &z));
                let rhs = p.rho(&sub(&x, &y)) + p.rho(&sub(&y, &z));
                worst = worst.max(lhs / rhs);
                if lhs > rhs * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
            c.constant("violations", violations as f64).constant("max_ratio", worst);
            c.require(violations == 0);
            Ok(())
        });
        rep.check(&format!("metric.ellipsoid{tag}"), "ellipsoid measure and membership", |c| {
            let center = random_point(&mut rng, n);
            let radius = 10f64.powf(rng.gen_range(-1.0..1.0));
            let e = Ellipsoid::new(center.clone(), radius, p.clone())?;
            let measure = ellipsoid_measure(&e);
            let closed = unit_ball_volume(n) * radius.powf(p.homogeneous_dimension());
            // Monte Carlo over the bounding box as an independent oracle.
            let axes = e.semi_axes();
            let box_volume: f64 = axes.iter().map(|a| 2.0 * a).product();
            let draws = 20_000;
            let mut hits = 0usize;
            let mut mismatches = 0usize;
            for _ in 0..draws {
                let y: Vec<f64> = (0..n).map(|i| center[i] + axes[i] * rng.gen_range(-1.0..1.0)).collect();
                let inside = ellipsoid_contains(&e, &y);
                hits += inside as usize;
                let q = e.quadratic_form(&y);
                if (q - 1.0).abs() > 1e-9 && inside != (q < 1.0) {
                    mismatches += 1;
                }
            }
            let frac = hits as f64 / draws as f64;
            let mc = frac * box_volume;
            let sigma = ((1.0 - frac) / (frac * draws as f64)).sqrt();
            let q = sphere_quadrature(n, if n == 2 { 64 } else { 16 })?;
            let area_err = (q.integrate(|_| 1.0) - unit_sphere_area(n)).abs();
            c.constant("measure", measure)
                .constant("closed_form", closed)
                .constant("monte_carlo", mc)
                .constant("monte_carlo_sigma", sigma)
                .constant("membership_mismatches", mismatches as f64)
                .constant("sphere_area_error", area_err);
            c.require(
                (measure - closed).abs() <= 1e-12 * closed
                    && (mc - measure).abs() <= 5.0 * sigma * measure
                    && mismatches == 0
                    && area_err <= 1e-12,
            );
            Ok(())
        });
    }
    Ok(())
}

/// Composite trapezoid values at `N` and `2N` nodes, combined to cancel the
/// `h²` error term that kinks at the nodes produce.
fn richardson_abs_integral(k: &crate::kernel::VariableKernel, x: &[f64], n: usize) -> Result<f64> {
    let coarse = check_cancellation(k, x, &sphere_quadrature(2, n)?)?.1;
    let fine = check_cancellation(k, x, &sphere_quadrature(2, 2 * n)?)?.1;
    Ok((4.0 * fine - coarse) / 3.0)
}

pub(super) fn kernel_axioms(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let names: Vec<String> = match &cfg.kernel {
        Some(k) => vec![k.clone()],
        None => BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    for name in &names {
        let seed = seeds.next_seed();
        rep.check(&format!("kernel.axioms[{name}]"), "homogeneity, cancellation and bounded derivatives", |c| {
            let k = builtin(name)?;
            let vc = ValidationConfig {
                seed,
                ..ValidationConfig::default()
            };
            let v = validate(&k, &vc)?;
            let dmax = max_of(v.derivative_sup_estimates.values().copied());
            c.constant("homogeneity_residual", v.homogeneity_max_residual)
                .constant("cancellation_residual", v.cancellation_residual)
                .constant("abs_integral", v.mean_absolute_integral)
                .constant("max_order", v.max_order as f64)
                .constant("max_derivative_sup", dmax);
            c.ratios(v.derivative_sup_estimates.values().copied());
            // Doubling the number of parameter samples must not move the sups.
            let more = check_derivative_bounds(&k, v.max_order, 2 * vc.derivative_samples, seed)?;
            let drift = max_of(
                more.iter()
                    .map(|(b, s2)| {
                        let s1 = v.derivative_sup_estimates[&crate::kernel::format_multiindex(b)];
                        if s2.abs() <= 1e-8 * dmax {
                            0.0
                        } else {
                            (s2 - s1).abs() / s2.abs()
                        }
                    }),
            );
            c.constant("sample_doubling_drift", drift);
            c.require(v.pass && v.max_order >= 4 && dmax.is_finite() && drift <= 0.1);
            Ok(())
        });
    }
    let cz2 = builtin("CZ2")?;
    rep.check("kernel.cz2-values", "CZ2: sup and absolute sphere integral", |c| {
        let abs = richardson_abs_integral(&cz2, &[0.3, -0.2], 4096)?;
        let exact = 4.0 / PI.sqrt();
        let sup = check_derivative_bounds(&cz2, 0, 1, seeds.next_seed())?;
        let sup0 = sup[&vec![0, 0]];
        c.constant("abs_integral", abs)
            .constant("abs_integral_exact", exact)
            .constant("sup", sup0)
            .constant("sup_exact", 1.0 / PI.sqrt());
        c.note("absolute integral of |cos 2θ|/√π over the circle is 4/√π");
        c.require((abs - exact).abs() <= 1e-10 && (sup0 * PI.sqrt() - 1.0).abs() <= 0.02);
        Ok(())
    });
    rep.check("kernel.var-cz2-values", "VAR-CZ2: sup over x and kernel ratio", |c| {
        let k = builtin("VAR-CZ2")?;
        let sup = check_derivative_bounds(&k, 0, 400, seeds.next_seed())?[&vec![0, 0]];
        let (x1, x2) = ([0.7, 0.1], [-1.2, 2.0]);
        let xi = [0.6, 0.8];
        let ratio = k.evaluate(&x1, &xi) / k.evaluate(&x2, &xi);
        let expected = (2.0 + 0.7f64.sin()) / (2.0 + (-1.2f64).sin());
        c.constant("sup", sup).constant("sup_exact", 3.0 / PI.sqrt()).constant("ratio_error", (ratio - expected).abs());
        c.require((sup * PI.sqrt() / 3.0 - 1.0).abs() <= 0.02 && (ratio - expected).abs() <= 1e-12);
        Ok(())
    });
    let iso = AnisotropyProfile::isotropic(2)?;
    rep.check("kernel.negative-homogeneity", "1/(1 + |ξ|²) is rejected as non-homogeneous", |c| {
        let k = non_homogeneous_example(iso.clone());
        let out = check_homogeneity(&k, 1000, 1e-10, seeds.next_seed())?;
        c.constant("residual", out.residual);
        c.require(!out.passed && out.residual > 1e-3);
        Ok(())
    });
    rep.check("kernel.negative-cancellation", "c/ρ^α is rejected for lack of cancellation", |c| {
        let cval = 1.5;
        let k = radial_example(iso.clone(), cval);
        let q = sphere_quadrature(2, 256)?;
        let (mean, _) = check_cancellation(&k, &[0.0, 0.0], &q)?;
        let expected = cval * unit_sphere_area(2);
        let v = validate(&k, &ValidationConfig::default())?;
        c.constant("mean_residual", mean).constant("expected", expected);
        c.require(!v.pass && (mean - expected).abs() <= 1e-10 * expected);
        Ok(())
    });
    Ok(())
}

/// `C(a, b)` by Pascal's triangle; zero outside `0 ≤ b ≤ a`.
fn pascal(a: i64, b: i64) -> u64 {
    if a < 0 || b < 0 || b > a {
        return 0;
    }
    let a = a as usize;
    let mut row = vec![1u64];
    for _ in 0..a {
        let mut next = vec![1u64; row.len() + 1];
        for j in 1..row.len() {
            next[j] = row[j - 1] + row[j];
        }
        row = next;
    }
    row[b as usize]
}

fn sphere_points(rng: &mut impl Rng, n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    pts.extend((0..count).map(|_| random_unit_vector(rng, n)));
    pts
}

pub(super) fn harmonic_decay(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    rep.check("harmonics.dimension", "g_m = C(m+n-1, n-1) - C(m+n-3, n-1)", |c| {
        let mut mismatches = 0;
        for n in [2usize, 3] {
            for m in 0..=24usize {
                let (nn, mm) = (n as i64, m as i64);
                let expected = (pascal(mm + nn - 1, nn - 1) - pascal(mm + nn - 3, nn - 1)) as usize;
                if basis_dim(n, m)? != expected {
                    mismatches += 1;
                }
            }
        }
        c.constant("mismatches", mismatches as f64);
        c.require(mismatches == 0);
        Ok(())
    });
    let cases: [(usize, usize, usize); 2] = [(2, 24, 256), (3, 12, 32)];
    for (n, degree, res) in cases {
        let basis = HarmonicBasis::new(n, degree)?;
        let q = sphere_quadrature(n, res)?;
        rep.check(&format!("harmonics.gram[n={n}]"), "orthonormality of the basis", |c| {
            let table = crate::harmonics::SphereTable::new(&basis, &q)?;
            let g = table.gram();
            let mut worst = 0.0f64;
            for (i, row) in g.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            // The checked evaluator agrees with the raw one.
            let u = random_unit_vector(&mut seeds.next_rng(), n);
            let (s, m) = basis.indices()[basis.len() / 2];
            let eval_err = (eval_harmonic(&basis, s, m, &u)? - basis.value(s, m, &u)).abs();
            c.constant("max_gram_error", worst).constant("basis_size", basis.len() as f64).constant("eval_error", eval_err);
            c.require(worst <= 1e-8 && eval_err == 0.0);
            Ok(())
        });
    }
    let degrees = [2usize, 3, 4, 6, 8, 12, 16];
    for n in [2usize, 3] {
        let basis = HarmonicBasis::new(n, 16)?;
        let pts = sphere_points(&mut seeds.next_rng(), n, if n == 2 { 256 } else { 128 });
        for order in 0..=2usize {
            rep.check(
                &format!("harmonics.derivative-growth[n={n},order={order}]"),
                "sup |D^β Y_sm| grows like m^{|β| + (n-2)/2}",
                |c| {
                    let sups: Vec<f64> = degrees.iter().map(|m| derivative_sup(&basis, *m, order, &pts)).collect();
                    let xs: Vec<f64> = degrees.iter().map(|m| *m as f64).collect();
                    let slope = loglog_slope(&xs, &sups).unwrap_or(f64::INFINITY);
                    let bound = order as f64 + (n as f64 - 2.0) / 2.0 + 0.25;
                    c.constant("slope", slope).constant("bound", bound).ratios(sups);
                    c.require(slope <= bound);
                    Ok(())
                },
            );
        }
    }
    let degree = cfg.max_degree.unwrap_or(24).max(16);
    rep.check("harmonics.decay[exp-cos]", "coefficients of a smooth function decay at least like m^-2", |c| {
        let basis = HarmonicBasis::new(2, degree)?;
        let coeffs = expand(|u| u[0].exp(), &basis, &sphere_quadrature(2, 512)?)?;
        let fit = decay_fit(&coeffs)?;
        let slope = fit.slope.unwrap_or(f64::NEG_INFINITY);
        c.constant("slope", slope).constant("degrees_used", fit.degrees_used.len() as f64);
        c.ratios(coeffs.sup_norms.clone());
        c.require(fit.passes());
        Ok(())
    });
    rep.check("harmonics.decay[exp-z,n=3]", "coefficients of a smooth function on the 2-sphere", |c| {
        let basis = HarmonicBasis::new(3, 16)?;
        let coeffs = expand(|u| u[2].exp(), &basis, &sphere_quadrature(3, 32)?)?;
        let fit = decay_fit(&coeffs)?;
        c.constant("slope", fit.slope.unwrap_or(f64::NEG_INFINITY));
        c.ratios(coeffs.sup_norms.clone());
        c.require(fit.passes());
        Ok(())
    });
    rep.check("harmonics.decay[abs-cos]", "a Lipschitz function decays like m^-2", |c| {
        let basis = HarmonicBasis::new(2, degree)?;
        let coeffs = expand(|u| u[0].abs(), &basis, &sphere_quadrature(2, 4096)?)?;
        let fit = decay_fit(&coeffs)?;
        let slope = fit.slope.unwrap_or(f64::NAN);
        // ∫ |cos θ| cos 2θ dθ = 4/3, against Y = cos 2θ/√π.
        let b2 = coeffs.get(1, 2);
        let exact = 4.0 / (3.0 * PI.sqrt());
        c.constant("slope", slope).constant("b_2", b2).constant("b_2_exact", exact);
        c.require((slope + 2.0).abs() <= 0.2 && (b2 - exact).abs() <= 1e-5);
        Ok(())
    });
    Ok(())
}

/// Fourth-order central difference of `f` along axis `i` with step `h`.
fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let at = |t: f64| {
        let mut y = x.to_vec();
        y[i] += t * h;
        f(&y)
    };
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

pub(super) fn hormander(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let gradient_profiles = profiles(cfg, &[&[1.0, 2.0], &[1.0, 1.0, 2.0]])?;
    for p in &gradient_profiles {
        let n = p.dim();
        let tag = label(p);
        let basis = HarmonicBasis::new(n, 4)?;
        let mut rng = seeds.next_rng();
        rep.check(&format!("gradient.finite-difference{tag}"), "closed-form gradient of H_sm", |c| {
            let points = 1000;
            let indices: Vec<(usize, usize)> = basis.indices().iter().copied().filter(|(_, m)| *m > 0).collect();
            let mut worst = 0.0f64;
            for j in 0..points {
                let (s, m) = indices[j % indices.len()];
                let h = hsm_kernel(&basis, s, m, p)?;
                let t = rng.gen_range((0.5f64).ln()..2f64.ln()).exp();
                let x = p.dilate(t, &random_unit_vector(&mut rng, n));
                let g = hsm_gradient(&basis, s, m, p, &x)?;
                let f = |y: &[f64]| h.value(y);
                let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for i in 0..n {
                    let step = 2e-3 * t.powf(p.exponents()[i]);
                    let d = central_difference(&f, &x, i, step);
                    worst = worst.max((d - g[i]).abs() / scale);
                }
            }
            c.constant("max_relative_error", worst).constant("points", points as f64);
            c.require(worst <= 1e-6);
            Ok(())
        });
        rep.check(&format!("gradient.degree-scaling{tag}"), "|∂_i H_sm| ρ^{α+α_i} / m^{n/2} stays bounded in m", |c| {
            let degrees = [1usize, 2, 4, 8];
            let big = HarmonicBasis::new(n, 8)?;
            let pts = sphere_points(&mut rng, n, 256);
            let alpha = p.homogeneous_dimension();
            let mut consts = Vec::new();
            for &m in &degrees {
                let mut sup = 0.0f64;
                for s in 1..=basis_dim(n, m)? {
                    for u in &pts {
                        // Points on Σₙ have ρ = 1; scale away from it to
                        // exercise the homogeneity as well.
                        let x = p.dilate(0.7, u);
                        let g = hsm_gradient(&big, s, m, p, &x)?;
                        for i in 0..n {
                            sup = sup.max(g[i].abs() * 0.7f64.powf(alpha + p.exponents()[i]));
                        }
                    }
                }
                consts.push(sup / (m as f64).powf(n as f64 / 2.0));
            }
            let xs: Vec<f64> = degrees.iter().map(|m| *m as f64).collect();
            let slope = loglog_slope(&xs, &consts).unwrap_or(f64::INFINITY);
            c.constant("slope", slope).constant("max_constant", max_of(consts.iter().copied()));
            c.ratios(consts.clone());
            c.require(slope <= 0.25 && consts.iter().all(|v| v.is_finite()));
            Ok(())
        });
    }

    let p = cfg.profile_or(&[1.0, 2.0])?;
    let n = p.dim();
    let basis = HarmonicBasis::new(n, 4)?;
    let kernels: Vec<(usize, usize)> = vec![(1, 1), (2, 2), (1, 4)];
    for &(s, m) in &kernels {
        let tag = format!("[s={s},m={m}]");
        rep.check(&format!("hormander.pointwise{tag}"), "sup ratio of the pointwise smoothness condition", |c| {
            let samples = 4000;
            let at = |r: f64, samples: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Result<f64> {
                // Off-origin centers: the ratio must not depend on x₀ either.
                let center: Vec<f64> = (0..n).map(|i| r * (0.5 + i as f64)).collect();
                let e = Ellipsoid::new(center, r, p.clone())?;
                hormander_pointwise(&basis, s, m, &p, &e, samples, rng)
            };
            let base = at(1.0, samples, &mut seeds.next_rng())?;
            let doubled = at(1.0, 2 * samples, &mut seeds.next_rng())?;
            let small = at(0.5, samples, &mut seeds.next_rng())?;
            let large = at(2.0, samples, &mut seeds.next_rng())?;
            let all = [base, doubled, small, large];
            let worst = max_of(all.iter().map(|v| (v / base - 1.0).abs()));
            c.constant("sup_ratio", base)
                .constant("doubled_samples", doubled)
                .constant("radius_0.5", small)
                .constant("radius_2", large)
                .constant("max_relative_change", worst);
            c.ratios(all);
            c.require(all.iter().all(|v| v.is_finite() && *v > 0.0) && worst <= 0.2);
            Ok(())
        });
    }
    for &(s, m) in &kernels[..2] {
        let tag = format!("[s={s},m={m}]");
        rep.check(&format!("hormander.integral{tag}"), "integral smoothness condition, uniformly in x", |c| {
            let mut rng = seeds.next_rng();
            let dirs: Vec<Vec<f64>> = (0..3).map(|_| random_unit_vector(&mut rng, n)).collect();
            let mut spread = 0.0f64;
            let mut tail_change = 0.0f64;
            let mut raw_change = 0.0f64;
            let mut all = Vec::new();
            for d in &dirs {
                let mut values = Vec::new();
                for t in [0.25, 1.0, 4.0] {
                    let x = p.dilate(t, d);
                    let r_max = 64.0 * t;
                    let a = hormander_integral(&basis, s, m, &p, &x, r_max)?;
                    let b = hormander_integral(&basis, s, m, &p, &x, 2.0 * r_max)?;
                    tail_change = tail_change.max((b.tail_corrected - a.tail_corrected).abs() / a.tail_corrected);
                    raw_change = raw_change.max((b.value - a.value).abs() / a.value);
                    values.push(a.tail_corrected);
                }
                spread = spread.max(max_of(values.iter().copied()) / min_of(values.iter().copied()) - 1.0);
                all.extend(values);
            }
            let (lo, hi) = (min_of(all.iter().copied()), max_of(all.iter().copied()));
            c.constant("spread_along_rays", spread)
                .constant("min", lo)
                .constant("max", hi)
                .constant("spread_across_directions", hi / lo - 1.0)
                .constant("tail_change", tail_change)
                .constant("raw_tail_change", raw_change);
            c.note(
                "spread is over rho(x) in [0.25, 4] along fixed directions; values are tail-corrected \
                 and raw_tail_change is the uncorrected change from R = 64 rho(x) to 128 rho(x)",
            );
            c.ratios(all.clone());
            c.require(spread <= 0.25 && tail_change <= 0.01 && hi.is_finite());
            Ok(())
        });
    }
    Ok(())
}
