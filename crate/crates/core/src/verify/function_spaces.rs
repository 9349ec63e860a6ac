//! Experiments on weights, maximal functions, Morrey norms and BMO.

use crate::error::Result;
use crate::gridfn::{integrate, lp_norm, sample, Grid, GridFunction};
use crate::metric::{AnisotropyProfile, Ellipsoid};
use crate::numeric::{geometric_ladder, max_of, min_of};
use crate::rng::{random_unit_vector, SeedStream};
use crate::spaces::{
    bmo_modulus, check_weight, john_nirenberg_ratio, m_s, maximal, morrey_norm, nested_average_drift, sharp,
    Centers, EllipsoidSampler, Weight, WeightSpec,
};

use super::config::ExperimentConfig;
use super::report::VerificationReport;
use super::suites::{a_suite, f_suite, log_rho};

pub(super) fn weights(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let p = cfg.profile_or(&[1.0, 2.0])?;
    let alpha = p.homogeneous_dimension();
    let radii = cfg.radii.clone().unwrap_or_else(|| geometric_ladder(1e-2, 1e2, 2.0));
    let mut rng = seeds.next_rng();
    let centers: Vec<Vec<f64>> = std::iter::once(vec![0.0; p.dim()])
        .chain((0..3).map(|_| random_unit_vector(&mut rng, p.dim()).iter().map(|v| 2.0 * v).collect()))
        .collect();
    for sigma in [1.0, 0.5] {
        let beta = sigma * alpha;
        for lambda in [0.0, beta / 3.0, 2.0 * beta / 3.0] {
            rep.check(
                &format!("weights.power[lambda={lambda:.3},sigma={sigma}]"),
                "r^λ with λ < σα: integral constant 1/(σα − λ)",
                |c| {
                    let w = Weight::power(lambda);
                    let out = check_weight(&w, &p, &centers, &radii, sigma)?;
                    let exact = 1.0 / (beta - lambda);
                    let rel = (out.integral_constant - exact).abs() / exact;
                    c.constant("integral_constant", out.integral_constant)
                        .constant("exact", exact)
                        .constant("relative_error", rel)
                        .constant("doubling_lower", out.doubling_bounds.0)
                        .constant("doubling_upper", out.doubling_bounds.1);
                    c.require(out.pass && rel <= 0.01);
                    Ok(())
                },
            );
        }
    }
    rep.check("weights.power-log", "r^λ ln(r + 2) with 0 < λ < α passes", |c| {
        let out = check_weight(&Weight::power_log(0.5 * alpha), &p, &centers, &radii, 1.0)?;
        c.constant("integral_constant", out.integral_constant)
            .constant("doubling_upper", out.doubling_bounds.1);
        c.require(out.pass);
        Ok(())
    });
    rep.check("weights.power-critical", "r^α fails the integral condition", |c| {
        let out = check_weight(&Weight::power(alpha), &p, &centers, &radii, 1.0)?;
        c.constant("integral_constant", out.integral_constant);
        c.note(out.diagnostic.clone());
        c.require(!out.pass && out.integral_constant.is_infinite());
        Ok(())
    });
    if let Some(spec) = &cfg.weight {
        rep.check("weights.configured", "the configured weight", |c| {
            let out = check_weight(&Weight::from_spec(spec)?, &p, &centers, &radii, 1.0)?;
            c.constant("integral_constant", out.integral_constant);
            c.note(out.diagnostic.clone());
            c.require(out.pass);
            Ok(())
        });
    }
    Ok(())
}

/// Largest suite ratio of `‖M_s f‖` to `‖f‖` and of `‖f‖` to `‖f♯‖` on one
/// grid, in the weighted Morrey norm.
struct SuiteRatios {
    maximal: Vec<f64>,
    sharp: f64,
}

fn suite_ratios(grid: &Grid, profile: &AnisotropyProfile, p: f64, w: &Weight, exponents: &[f64], seed: u64) -> Result<SuiteRatios> {
    let sampler = EllipsoidSampler::with_default_radii(grid, profile)?;
    let centers = Centers::default();
    let suite = f_suite(grid, profile, 0.6, seed)?;
    let mut maximal = vec![0.0f64; exponents.len()];
    let mut sharp = 0.0f64;
    for f in &suite {
        let nf = sampler.morrey_norm(&f.values, p, w, &centers)?.value;
        for (j, s) in exponents.iter().enumerate() {
            let m = sampler.m_s_field(&f.values, *s)?;
            maximal[j] = maximal[j].max(sampler.morrey_norm(&m, p, w, &centers)?.value / nf);
        }
        let sh = sampler.sharp_field(&f.values)?;
        sharp = sharp.max(nf / sampler.morrey_norm(&sh, p, w, &centers)?.value);
    }
    Ok(SuiteRatios { maximal, sharp })
}

/// Largest difference of neighbouring node values.
fn lipschitz(f: &GridFunction) -> f64 {
    let g = f.grid();
    let mut idx = vec![0; g.dim()];
    let mut best = 0.0f64;
    for flat in 0..g.len() {
        g.multi_index(flat, &mut idx);
        for i in 0..g.dim() {
            if idx[i] + 1 < g.points()[i] {
                let d = (f.values()[flat + g.strides()[i]] - f.values()[flat]).abs() / g.spacing()[i];
                best = best.max(d);
            }
        }
    }
    best
}

/// A box whose smallest ladder radius is about 0.2 along every axis, with
/// spacings coarsened by `coarsen`.
fn resolving_grid(profile: &AnisotropyProfile, half: f64, coarsen: f64) -> Result<Grid> {
    let n = profile.dim();
    let (h_max, cap) = if n == 2 { (1.0 / 32.0, 257) } else { (half / 16.0, 33) };
    let points = profile
        .exponents()
        .iter()
        .map(|a| {
            let h = coarsen * h_max.min(0.5 * 0.2f64.powf(*a));
            ((2.0 * half / h).ceil() as usize + 1).min(cap)
        })
        .collect();
    Grid::new(vec![-half; n], vec![half; n], points)
}

pub(super) fn spaces_inequalities(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let profile = cfg.profile_or(&[1.0, 2.0])?;
    let n = profile.dim();
    let alpha = profile.homogeneous_dimension();
    let p = cfg.p.unwrap_or(3.0);
    let w = cfg.weight_or(WeightSpec::power(alpha / 2.0))?;
    let exponents = [1.0, p / 2.0];
    let coarse = cfg.grid_or(Grid::cube(n, 2.0, if n == 2 { 49 } else { 13 })?)?;
    let fine_points: Vec<usize> = coarse.points().iter().map(|m| (m - 1) * 3 / 2 + 1).collect();
    let fine = Grid::new(coarse.lower().to_vec(), coarse.upper().to_vec(), fine_points)?;
    let seed = seeds.next_seed();
    let mut runs = Vec::new();
    let outcome = (|| -> Result<()> {
        runs.push(suite_ratios(&coarse, &profile, p, &w, &exponents, seed)?);
        runs.push(suite_ratios(&fine, &profile, p, &w, &exponents, seed)?);
        Ok(())
    })();
    rep.check("spaces.maximal-suite", "‖M_s f‖ / ‖f‖ is finite and stable under refinement", |c| {
        outcome.as_ref().map_err(|e| crate::Error::invalid(e.to_string()))?;
        let mut ok = true;
        for (j, s) in exponents.iter().enumerate() {
            let (a, b) = (runs[0].maximal[j], runs[1].maximal[j]);
            c.constant(format!("s={s}:coarse"), a).constant(format!("s={s}:fine"), b);
            ok &= a.is_finite() && b.is_finite() && (b / a - 1.0).abs() <= 0.25;
        }
        c.ratios(runs.iter().flat_map(|r| r.maximal.clone()));
        c.require(ok);
        Ok(())
    });
    rep.check("spaces.sharp-suite", "‖f‖ / ‖f♯‖ is finite and stable under refinement", |c| {
        outcome.as_ref().map_err(|e| crate::Error::invalid(e.to_string()))?;
        let (a, b) = (runs[0].sharp, runs[1].sharp);
        c.constant("coarse", a).constant("fine", b).ratios([a, b]);
        c.note("non-constant suite members only; the inequality holds modulo constants");
        c.require(a.is_finite() && b.is_finite() && (b / a - 1.0).abs() <= 0.25);
        Ok(())
    });

    let grid = &fine;
    let radii = crate::spaces::default_radii(grid, &profile);
    let h = grid.max_spacing();
    rep.check("spaces.indicator-maximal", "Mχ_E(x) ≤ r^α/(ρ(x − x₀) − r)^α away from E", |c| {
        let r = 0.3;
        let e = Ellipsoid::new(vec![0.0; n], r, profile.clone())?;
        let chi = sample(|x| if e.contains_by_rho(x) { 1.0 } else { 0.0 }, grid)?;
        let slack = 2.0 * alpha * h.powf(1.0 / profile.max_exponent()) / r;
        let mut rng = seeds.next_rng();
        let mut worst = f64::NEG_INFINITY;
        for t in [0.75, 0.9, 1.1, 1.3] {
            for _ in 0..4 {
                let x = profile.dilate(t, &random_unit_vector(&mut rng, n));
                let bound = (r / (t - r)).powf(alpha);
                worst = worst.max(maximal(&chi, &profile, &x, &radii)? - bound);
            }
        }
        c.constant("max_excess", worst).constant("slack", slack);
        c.require(worst <= slack);
        Ok(())
    });
    rep.check("spaces.pointwise", "|f| ≤ Mf, f♯ ≤ 2Mf and M_1 f ≤ M_2 f at every node", |c| {
        let sampler = EllipsoidSampler::new(grid, &profile, &radii)?;
        let suite = f_suite(grid, &profile, 0.6, seed)?;
        let r0 = radii[0];
        let reach = profile.exponents().iter().map(|a| r0.powf(*a)).fold(0.0, f64::max);
        let (mut lower, mut sharp_excess, mut power_excess) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for f in suite.iter().filter(|f| !f.name.starts_with("indicator")) {
            let m1 = sampler.m_s_field(&f.values, 1.0)?;
            let m2 = sampler.m_s_field(&f.values, 2.0)?;
            let sh = sampler.sharp_field(&f.values)?;
            let slack = lipschitz(&f.values) * reach;
            for i in 0..grid.len() {
                lower = lower.max(f.values.values()[i].abs() - m1.values()[i] - slack);
                sharp_excess = sharp_excess.max(sh.values()[i] - 2.0 * m1.values()[i]);
                power_excess = power_excess.max(m1.values()[i] - m2.values()[i]);
            }
        }
        // The point evaluators agree with the fields at a node.
        let f = &suite[0].values;
        let node = grid.point(grid.len() / 2 + 3);
        let mx = maximal(f, &profile, &node, &radii)?;
        let sx = sharp(f, &profile, &node, &radii)?;
        let m1x = m_s(f, &profile, &node, 1.0, &radii)?;
        c.constant("max_f_minus_mf", lower)
            .constant("max_sharp_minus_2mf", sharp_excess)
            .constant("max_m1_minus_m2", power_excess)
            .constant("point_evaluator_gap", (mx - m1x).abs());
        c.require(lower <= 0.0 && sharp_excess <= 1e-12 && power_excess <= 1e-12 && mx == m1x && sx.is_finite());
        Ok(())
    });
    rep.check("spaces.sup-discretization", "doubling the center and radius density changes Morrey norms by < 2%", |c| {
        let suite = f_suite(grid, &profile, 0.6, seed)?;
        let dense: Vec<f64> = radii
            .windows(2)
            .flat_map(|r| [r[0], (r[0] * r[1]).sqrt()])
            .chain(radii.last().copied())
            .collect();
        let mut worst = 0.0f64;
        let mut changes = Vec::with_capacity(suite.len());
        for f in &suite {
            let a = morrey_norm(&f.values, p, &w, &profile, &Centers::Every(4), &radii)?.value;
            let b = morrey_norm(&f.values, p, &w, &profile, &Centers::Every(2), &dense)?.value;
            changes.push(b / a - 1.0);
            worst = worst.max((b / a - 1.0).abs());
        }
        c.constant("max_relative_change", worst).ratios(changes);
        c.require(worst < 0.02);
        Ok(())
    });
    rep.check("spaces.lebesgue-limit", "with ω ≡ 1 the Morrey norm is the L^p norm", |c| {
        let f = &f_suite(grid, &profile, 0.6, seed)?[2].values;
        let morrey = morrey_norm(f, p, &Weight::constant(), &profile, &Centers::default(), &radii)?.value;
        let lp = lp_norm(f, p)?;
        // Trapezoid integral of a Gaussian against its closed form.
        let g = sample(|x| (-4.0 * x.iter().map(|v| v * v).sum::<f64>()).exp(), grid)?;
        let exact = (std::f64::consts::PI / 4.0).powf(n as f64 / 2.0);
        let gauss_err = (integrate(&g) - exact).abs() / exact;
        c.constant("morrey", morrey).constant("lp", lp).constant("gaussian_integral_error", gauss_err);
        c.require((morrey / lp - 1.0).abs() <= 0.02 && gauss_err <= 1e-3);
        Ok(())
    });

    // BMO on a larger box so that dilated ellipsoids stay inside.
    let big = resolving_grid(&profile, 2.5, 1.0)?;
    let hb = big.max_spacing();
    let big_radii = crate::spaces::default_radii(&big, &profile);
    let half = resolving_grid(&profile, 2.5, 2.0)?;
    let half_radii = crate::spaces::default_radii(&half, &profile);
    // Both resolutions sample the same function, regularized below the
    // smallest radius either ladder resolves.
    let floor = 0.5 * half_radii[0];
    let log_a = sample(|x| log_rho(&profile, x, floor), &big)?;
    let log_bmo = bmo_modulus(&log_a, &profile, &big_radii, &Centers::default());
    let log_half = sample(|x| log_rho(&profile, x, floor), &half)
        .and_then(|a| bmo_modulus(&a, &profile, &half_radii, &Centers::Every(2)));
    rep.check("spaces.bmo-modulus", "γ_a: zero for constants, vanishing for sin x₁, plateau for log ρ", |c| {
        let log_bmo = log_bmo.as_ref().map_err(|e| crate::Error::invalid(e.to_string()))?;
        let suite = a_suite(&big, &profile)?;
        let constant = bmo_modulus(&suite[0].values, &profile, &big_radii, &Centers::default())?;
        let sin = bmo_modulus(&suite[1].values, &profile, &big_radii, &Centers::default())?;
        let log_half = log_half.as_ref().map_err(|e| crate::Error::invalid(e.to_string()))?;
        let monotone = [&constant, &sin, log_bmo].iter().all(|m| m.values.windows(2).all(|w| w[0] <= w[1]));
        // The plateau is a property of log ρ, not of the grid.
        let resolution_gap = (log_half.bmo_norm / log_bmo.bmo_norm - 1.0).abs();
        c.constant("sin_norm", sin.bmo_norm)
            .constant("sin_second", sin.values[1])
            .constant("log_norm_half_resolution", log_half.bmo_norm)
            .constant("log_resolution_gap", resolution_gap)
            .constant("sin_smallest", sin.values[0])
            .constant("log_norm", log_bmo.bmo_norm)
            .constant("log_smallest", log_bmo.values[0])
            .constant("log_trend_slope", log_bmo.trend_slope.unwrap_or(f64::NAN));
        c.ratios(log_bmo.values.clone());
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        c.constant("constant_norm", constant.bmo_norm)
            .constant("sin_vmo_flag", flag(sin.vmo_flag))
            .constant("log_vmo_flag", flag(log_bmo.vmo_flag))
            .constant("monotone", flag(monotone));
        c.require(constant.bmo_norm == 0.0 && sin.vmo_flag && !log_bmo.vmo_flag && monotone && resolution_gap <= 0.1);
        Ok(())
    });
    rep.check("spaces.john-nirenberg", "L^p mean oscillation of log ρ against ‖a‖_*", |c| {
        let log_bmo = log_bmo.as_ref().map_err(|e| crate::Error::invalid(e.to_string()))?;
        let mut ratios = Vec::new();
        let mut p1 = 0.0f64;
        // Every ellipsoid contains the singularity; away from it log ρ is smooth.
        for (center, r) in [(0.0, 0.5), (0.0, 1.0), (0.2, 0.5), (-0.4, 0.8), (0.1, 0.3)] {
            let mut x = vec![0.0; n];
            x[0] = center;
            let e = Ellipsoid::new(x, r, profile.clone())?;
            ratios.push(john_nirenberg_ratio(&log_a, 2.0, &e, log_bmo)?);
            p1 = p1.max(john_nirenberg_ratio(&log_a, 1.0, &e, log_bmo)?);
        }
        let (lo, hi) = (min_of(ratios.iter().copied()), max_of(ratios.iter().copied()));
        c.constant("min_p2", lo).constant("max_p2", hi).constant("max_p1", p1);
        c.ratios(ratios.clone());
        c.require(hi.is_finite() && hi <= 2.0 * lo && p1 <= 1.05);
        Ok(())
    });
    rep.check("spaces.nested-drift", "|a_{2^k E} − a_E| grows linearly in k", |c| {
        let log_bmo = log_bmo.as_ref().map_err(|e| crate::Error::invalid(e.to_string()))?;
        let e = Ellipsoid::new(vec![0.0; n], 0.35, profile.clone())?;
        let mut ok = true;
        let mut drifts = Vec::new();
        for k in 1..=2u32 {
            let d = nested_average_drift(&log_a, &e, k)?;
            // Over E_r(0), the average of log ρ is log r − 1/α.
            let exact = k as f64 * std::f64::consts::LN_2;
            let bound = 2f64.powf(alpha) * k as f64 * log_bmo.bmo_norm + hb;
            ok &= (d - exact).abs() <= 0.1 * exact && d <= bound;
            c.constant(format!("k={k}:drift"), d).constant(format!("k={k}:exact"), exact).constant(format!("k={k}:bound"), bound);
            drifts.push(d);
        }
        let constant = sample(|_| 2.0, &big)?;
        let zero = nested_average_drift(&constant, &e, 2)?;
        c.constant("constant_drift", zero);
        c.ratios(drifts);
        c.require(ok && zero.abs() <= 1e-12);
        Ok(())
    });
    Ok(())
}
