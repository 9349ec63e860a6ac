//! Experiments on truncated transforms, commutators and series expansions.

use std::fs;

use crate::error::{Error, Result};
use crate::gridfn::{read_csv, sample, write_csv, Grid, GridFunction};
use crate::harmonics::{HarmonicBasis, SphereTable};
use crate::kernel::{builtin, smooth_series_example, VariableKernel};
use crate::metric::{AnisotropyProfile, Ellipsoid};
use crate::numeric::{max_of, min_of};
use crate::operators::{
    commutator, commutator_operator_form, constant_transform, expansion_quadrature, kernel_coefficients, series_transform,
    truncated_transform, OperatorResult, TruncationPolicy,
};
use crate::rng::SeedStream;
use crate::spaces::{default_radii, Centers, EllipsoidSampler, Weight, WeightSpec};

use super::config::ExperimentConfig;
use super::report::VerificationReport;
use super::suites::{a_suite, f_suite, log_rho, Member};

fn kernel_of(cfg: &ExperimentConfig) -> Result<VariableKernel> {
    builtin(cfg.kernel.as_deref().unwrap_or("CZ2"))
}

fn default_grid(n: usize, points_2d: usize) -> Result<Grid> {
    Grid::cube(n, 3.0, if n == 2 { points_2d } else { 25 })
}

fn check_grid(grid: &Grid, k: &VariableKernel) -> Result<()> {
    if grid.dim() != k.dim() {
        return Err(Error::GridMismatch(format!(
            "grid has dimension {} but kernel `{}` has dimension {}",
            grid.dim(),
            k.name(),
            k.dim()
        )));
    }
    Ok(())
}

fn radii_for(cfg: &ExperimentConfig, grid: &Grid, profile: &AnisotropyProfile) -> Vec<f64> {
    cfg.radii.clone().unwrap_or_else(|| default_radii(grid, profile))
}

fn epsilon_ladder(cfg: &ExperimentConfig, grid: &Grid) -> Vec<f64> {
    let mut m = cfg.epsilon_multiples.clone().unwrap_or_else(|| vec![4.0, 8.0, 16.0]);
    m.sort_by(f64::total_cmp);
    m.iter().map(|v| v * grid.max_spacing()).collect()
}

struct Norms<'g> {
    sampler: EllipsoidSampler<'g>,
    p: f64,
    weight: Weight,
    centers: Centers,
}

impl Norms<'_> {
    fn of(&self, f: &GridFunction) -> Result<f64> {
        Ok(self.sampler.morrey_norm(f, self.p, &self.weight, &self.centers)?.value)
    }
}

fn difference(a: &OperatorResult, b: &OperatorResult) -> Result<GridFunction> {
    a.output.zip_with(&b.output, |u, v| u - v)
}

pub(super) fn operator_bound(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let k = kernel_of(cfg)?;
    let profile = k.profile().clone();
    let grid = cfg.grid_or(default_grid(k.dim(), 193)?)?;
    check_grid(&grid, &k)?;
    let eps = epsilon_ladder(cfg, &grid);
    // The finest suite feature spans the coarsest truncation.
    let scale = 4.0 * eps.last().copied().unwrap_or(0.0);
    let margin = eps.last().copied().unwrap_or(0.0) + 2.0 * grid.max_spacing();
    let norms = Norms {
        sampler: EllipsoidSampler::new(&grid, &profile, &radii_for(cfg, &grid, &profile))?,
        p: cfg.p.unwrap_or(2.0),
        weight: cfg.weight_or(WeightSpec::power(1.0))?,
        centers: Centers::default(),
    };
    let suite = f_suite(&grid, &profile, scale, seeds.next_seed())?;
    let mut kept: Option<GridFunction> = None;
    for member in &suite {
        rep.check(
            &format!("operator.ladder[{}]", member.name),
            "weighted Morrey norm of K_ε f over that of f, across the ε ladder",
            |c| {
                let nf = norms.of(&member.values)?;
                let outs: Vec<OperatorResult> = eps
                    .iter()
                    .map(|e| truncated_transform(&k, &member.values, &TruncationPolicy::with_margin(*e, margin)))
                    .collect::<Result<_>>()?;
                let ratios: Vec<f64> = outs.iter().map(|o| Ok(norms.of(&o.output)? / nf)).collect::<Result<_>>()?;
                let deltas: Vec<f64> = outs
                    .windows(2)
                    .map(|w| Ok(norms.of(&difference(&w[0], &w[1])?)? / nf))
                    .collect::<Result<_>>()?;
                let (lo, hi) = (min_of(ratios.iter().copied()), max_of(ratios.iter().copied()));
                // Smaller truncations change the output less and less.
                let cauchy = deltas.windows(2).all(|d| d[0] <= 1.1 * d[1]);
                let cutoff = max_of(outs.iter().map(|o| o.diagnostics.cutoff_error_estimate));
                c.constant("min_ratio", lo)
                    .constant("max_ratio", hi)
                    .constant("spread_factor", hi / lo)
                    .constant("cutoff_error_estimate", cutoff);
                for (j, d) in deltas.iter().enumerate() {
                    c.constant(format!("delta{j}"), *d);
                }
                c.ratios(ratios.iter().chain(&deltas).copied());
                c.require(hi.is_finite() && lo > 0.0 && hi <= 2.0 * lo && cauchy);
                if kept.is_none() {
                    kept = Some(outs[0].output.clone());
                }
                Ok(())
            },
        );
    }
    rep.check("operator.csv-round-trip", "transform output survives a CSV round trip bit for bit", |c| {
        let f = kept.clone().ok_or_else(|| Error::invalid("no transform output to round-trip"))?;
        let path = std::env::temp_dir().join(format!("aniso-sio-{}-round-trip.csv", std::process::id()));
        write_csv(&f, &path)?;
        let back = read_csv(&path);
        let _ = fs::remove_file(&path);
        let back = back?;
        let same = back.grid() == f.grid() && back.values() == f.values();
        c.constant("points", f.values().len() as f64);
        c.require(same);
        Ok(())
    });
    Ok(())
}

fn bmo_norm_of(sampler: &EllipsoidSampler, a: &Member) -> Result<f64> {
    Ok(sampler.bmo_modulus(&a.values, &Centers::default())?.bmo_norm)
}

pub(super) fn commutator_bound(cfg: &ExperimentConfig, seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let k = kernel_of(cfg)?;
    let profile = k.profile().clone();
    let grid = cfg.grid_or(default_grid(k.dim(), 97)?)?;
    check_grid(&grid, &k)?;
    let pol = TruncationPolicy::new(epsilon_ladder(cfg, &grid)[0]);
    let norms = Norms {
        sampler: EllipsoidSampler::new(&grid, &profile, &radii_for(cfg, &grid, &profile))?,
        p: cfg.p.unwrap_or(2.0),
        weight: cfg.weight_or(WeightSpec::power(1.0))?,
        centers: Centers::default(),
    };
    let fs_ = f_suite(&grid, &profile, 1.0, seeds.next_seed())?;
    let f_norms: Vec<f64> = fs_.iter().map(|f| norms.of(&f.values)).collect::<Result<_>>()?;
    let a_s = a_suite(&grid, &profile)?;
    for a in &a_s {
        rep.check(
            &format!("commutator.ratio[{}]", a.name),
            "Morrey norm of C_ε[a,k]f over ‖a‖_* times that of f",
            |c| {
                let bmo = bmo_norm_of(&norms.sampler, a)?;
                let mut ratios = Vec::with_capacity(fs_.len());
                let mut all_zero = true;
                for (f, nf) in fs_.iter().zip(&f_norms) {
                    let out = commutator(&a.values, &k, &f.values, &pol)?;
                    all_zero &= out.output.max_abs() == 0.0;
                    let num = norms.of(&out.output)?;
                    ratios.push(if num == 0.0 { 0.0 } else { num / (bmo * nf) });
                }
                let hi = max_of(ratios.iter().copied());
                c.constant("bmo_norm", bmo).constant("max_ratio", hi);
                c.ratios(ratios);
                if a.name == "constant" {
                    c.note("constant coefficient: the commutator vanishes identically");
                    c.require(all_zero && bmo == 0.0);
                } else {
                    c.require(hi.is_finite() && bmo > 0.0);
                }
                Ok(())
            },
        );
    }
    rep.check("commutator.linearity", "C_ε[a,k]f is linear in a", |c| {
        let (a1, a2) = (&a_s[1].values, &a_s[2].values);
        let combo = a1.zip_with(a2, |u, v| 2.0 * u - 3.0 * v)?;
        let mut worst = 0.0f64;
        let mut form_gap = 0.0f64;
        for f in [&fs_[1].values, &fs_[9].values] {
            let lhs = commutator(&combo, &k, f, &pol)?;
            let r1 = commutator(a1, &k, f, &pol)?;
            let r2 = commutator(a2, &k, f, &pol)?;
            let rhs = r1.output.zip_with(&r2.output, |u, v| 2.0 * u - 3.0 * v)?;
            let scale = lhs.output.max_abs();
            let gap = lhs.output.zip_with(&rhs, |u, v| u - v)?.max_abs();
            worst = worst.max(gap / scale);
            let other = commutator_operator_form(&combo, &k, f, &pol)?;
            form_gap = form_gap.max(lhs.max_difference(&other) / scale);
        }
        c.constant("max_relative_gap", worst).constant("operator_form_gap", form_gap);
        c.require(worst <= 1e-12 && form_gap <= 1e-10);
        Ok(())
    });
    Ok(())
}

/// The ball `E_ϱ(0)` sampled on a box of half-widths `(1.5ϱ)^{α_i}`, so that
/// all grids are dilates of each other.
struct Localized {
    grid: Grid,
    ellipsoid: Ellipsoid,
    epsilon: f64,
    floor: f64,
}

impl Localized {
    fn new(profile: &AnisotropyProfile, varrho: f64, points: usize, multiple: f64) -> Result<Self> {
        let half: Vec<f64> = profile.exponents().iter().map(|a| (1.5 * varrho).powf(*a)).collect();
        let grid = Grid::new(half.iter().map(|v| -v).collect(), half.clone(), vec![points; profile.dim()])?;
        // Spacing of the ϱ = 1 grid, dilated: keeps ε covariant with the box.
        let h1 = profile
            .exponents()
            .iter()
            .map(|a| 2.0 * 1.5f64.powf(*a) / (points - 1) as f64)
            .fold(0.0, f64::max);
        Ok(Localized {
            ellipsoid: Ellipsoid::new(vec![0.0; profile.dim()], varrho, profile.clone())?,
            grid,
            epsilon: multiple * varrho * h1,
            floor: 0.5 * varrho * h1,
        })
    }

    fn restrict(&self, f: &GridFunction) -> Result<GridFunction> {
        let g = &self.grid;
        let values = (0..g.len())
            .map(|i| {
                if self.ellipsoid.contains_by_rho(&g.point(i)) {
                    f.values()[i]
                } else {
                    0.0
                }
            })
            .collect();
        GridFunction::from_values(g.clone(), values)
    }
}

pub(super) fn vmo_localization(cfg: &ExperimentConfig, _seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let k = kernel_of(cfg)?;
    let profile = k.profile().clone();
    let points = cfg.grid.as_ref().map(|g| g.points[0]).unwrap_or(if k.dim() == 2 { 129 } else { 25 });
    let multiple = cfg.epsilon_multiples.as_ref().map(|m| m[0]).unwrap_or(4.0);
    let weight = cfg.weight_or(WeightSpec::power(1.0))?;
    let p = cfg.p.unwrap_or(2.0);
    let scales = [1.0, 0.5, 0.25];
    let coefficients: [(&str, bool); 2] = [("sin-x1", true), ("log-rho", false)];
    let mut decay = Vec::new();
    for (name, vmo) in coefficients {
        let mut per_f: Vec<Vec<f64>> = vec![Vec::new(); 2];
        let mut run = || -> Result<()> {
            for &varrho in &scales {
                let loc = Localized::new(&profile, varrho, points, multiple)?;
                let g = &loc.grid;
                let a = if vmo {
                    sample(|x| x[0].sin(), g)?
                } else {
                    sample(|x| log_rho(&profile, x, loc.floor), g)?
                };
                let shift: Vec<f64> = profile.exponents().iter().map(|e| 0.3 * varrho.powf(*e)).collect();
                let inv = 1.0 / varrho;
                let fs_ = [
                    sample(|_| 1.0, g)?,
                    sample(
                        |x| {
                            let d: Vec<f64> = x.iter().zip(&shift).map(|(u, s)| u - s).collect();
                            (-profile.rho(&profile.dilate(inv, &d)).powi(2)).exp()
                        },
                        g,
                    )?,
                ];
                let sampler = EllipsoidSampler::with_default_radii(g, &profile)?;
                let pol = TruncationPolicy::new(loc.epsilon);
                for (j, f) in fs_.iter().enumerate() {
                    let f = loc.restrict(f)?;
                    let out = commutator(&a, &k, &f, &pol)?;
                    let num = sampler.morrey_norm(&loc.restrict(&out.output)?, p, &weight, &Centers::default())?;
                    let den = sampler.morrey_norm(&f, p, &weight, &Centers::default())?;
                    per_f[j].push(num.value / den.value);
                }
            }
            Ok(())
        };
        let outcome = run();
        rep.check(
            &format!("vmo.shrinking[{name}]"),
            "localized commutator ratio over E_ϱ for ϱ = 1, 1/2, 1/4",
            |c| {
                outcome?;
                let strictly = per_f.iter().all(|r| r.windows(2).all(|w| w[1] < w[0]));
                for (j, r) in per_f.iter().enumerate() {
                    c.constant(format!("decay_f{j}"), r[2] / r[0]);
                }
                c.ratios(per_f.iter().flatten().copied());
                if vmo {
                    c.require(strictly);
                } else {
                    c.note("BMO but not VMO: no decrease is required");
                    c.require(per_f.iter().flatten().all(|v| v.is_finite()));
                }
                decay.push(max_of(per_f.iter().map(|r| r[2] / r[0])));
                Ok(())
            },
        );
    }
    rep.check("vmo.contrast", "VMO coefficient localizes, the BMO one does not", |c| {
        if decay.len() != 2 {
            return Err(Error::invalid("localization runs failed"));
        }
        // Cross-check the VMO coefficient against its modulus.
        let loc = Localized::new(&profile, 1.0, points, multiple)?;
        let a = sample(|x| x[0].sin(), &loc.grid)?;
        let modulus = crate::spaces::bmo_modulus(&a, &profile, &scales.iter().rev().copied().collect::<Vec<_>>(), &Centers::default())?;
        let modulus_falls = modulus.values.windows(2).all(|w| w[0] < w[1]);
        c.constant("vmo_decay", decay[0])
            .constant("bmo_decay", decay[1])
            .constant("contrast", (decay[0] < 0.75 * decay[1]) as u8 as f64);
        c.ratios(modulus.values.clone());
        c.note("contrast = 1 when the VMO ratio falls by a clearly larger factor than the BMO ratio");
        c.require(modulus_falls);
        Ok(())
    });
    Ok(())
}

/// Largest output difference relative to the largest direct output.
fn discrepancy(series: &OperatorResult, direct: &OperatorResult) -> f64 {
    series.max_difference(direct) / direct.output.max_abs()
}

pub(super) fn series_reconstruction(cfg: &ExperimentConfig, _seeds: &mut SeedStream, rep: &mut VerificationReport) -> Result<()> {
    let degree = cfg.max_degree.unwrap_or(4);
    let grid = cfg.grid_or(Grid::cube(2, 2.0, 65)?)?;
    let iso = AnisotropyProfile::isotropic(2)?;
    let pol = TruncationPolicy::new(epsilon_ladder(cfg, &grid)[0]);
    let f = sample(|x| (-(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.2).powi(2)).exp(), &grid)?;
    rep.check("series.cz2", "series of CZ2 equals the direct transform", |c| {
        let k = builtin("CZ2")?;
        let direct = truncated_transform(&k, &f, &pol)?;
        let series = series_transform(&k, &f, &pol, degree)?;
        let basis = HarmonicBasis::new(2, 2)?;
        // CZ2 restricted to the circle is the harmonic cos 2θ/√π itself.
        let single = constant_transform(&basis, 1, 2, &iso, &f, &pol)?;
        let (d1, d2) = (series.result.max_difference(&direct), single.max_difference(&direct));
        c.constant("series_gap", d1)
            .constant("single_harmonic_gap", d2)
            .constant("degree_zero_coefficient", series.degree_zero_coefficient)
            .constant("max_output", direct.output.max_abs());
        c.require(d1 <= 1e-10 && d2 <= 1e-10);
        Ok(())
    });
    rep.check("series.var-cz2", "coefficients of VAR-CZ2 are (2 + sin x₁) on one harmonic", |c| {
        let k = builtin("VAR-CZ2")?;
        let basis = HarmonicBasis::new(2, degree)?;
        let table = SphereTable::new(&basis, &expansion_quadrature(2, degree)?)?;
        let mut worst = 0.0f64;
        for x in [[0.0, 0.0], [0.7, -1.1], [-2.5, 0.4], [1.6, 3.0], [3.1, -0.2]] {
            let b = kernel_coefficients(&k, &x, &table);
            for &(s, m) in basis.indices() {
                let expected = if (s, m) == (1, 2) { 2.0 + x[0].sin() } else { 0.0 };
                worst = worst.max((b.get(s, m) - expected).abs());
            }
        }
        let direct = truncated_transform(&k, &f, &pol)?;
        let series = series_transform(&k, &f, &pol, degree)?;
        let gap = series.result.max_difference(&direct);
        c.constant("coefficient_error", worst).constant("series_gap", gap);
        c.require(worst <= 1e-10 && gap <= 1e-10);
        Ok(())
    });
    let degrees = [2usize, 4, 8, 16];
    let floor = 1e-12;
    let kernels = [
        ("MIX12", builtin("MIX12")?),
        ("smooth-series", smooth_series_example(AnisotropyProfile::new(vec![1.0, 2.0])?)),
    ];
    for (name, k) in kernels {
        rep.check(
            &format!("series.convergence[{name}]"),
            "series discrepancy is nonincreasing in the degree",
            |c| {
                let direct = truncated_transform(&k, &f, &pol)?;
                let gaps: Vec<f64> = degrees
                    .iter()
                    .map(|m| Ok(discrepancy(&series_transform(&k, &f, &pol, *m)?.result, &direct)))
                    .collect::<Result<_>>()?;
                let monotone = gaps.windows(2).all(|w| w[1] < w[0] || w[1] <= floor);
                c.constant("first_gap", gaps[0]).constant("last_gap", gaps[gaps.len() - 1]).constant("floor", floor);
                c.ratios(gaps);
                c.require(monotone);
                Ok(())
            },
        );
    }
    Ok(())
}
