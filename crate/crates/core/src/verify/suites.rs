//! Fixed, seeded families of test functions.

use rand::Rng;

use crate::error::Result;
use crate::gridfn::{sample, Grid, GridFunction};
use crate::metric::AnisotropyProfile;
use crate::rng::SeedStream;

/// A sampled test function with a short label.
#[derive(Clone, Debug)]
pub struct Member {
    pub name: String,
    pub values: GridFunction,
}

/// `exp(−|σ^{-1}∘(x − c)|²)`: a Gaussian shaped like the ellipsoids.
fn bump<'a>(profile: &'a AnisotropyProfile, c: &[f64], sigma: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let c = c.to_vec();
    move |x: &[f64]| {
        let q: f64 = x
            .iter()
            .zip(&c)
            .zip(profile.exponents())
            .map(|((xi, ci), a)| {
                let v = (xi - ci) / sigma.powf(*a);
                v * v
            })
            .sum();
        (-q).exp()
    }
}

fn indicator<'a>(profile: &'a AnisotropyProfile, c: &[f64], r: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let c = c.to_vec();
    move |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        if profile.rho(&d) < r {
            1.0
        } else {
            0.0
        }
    }
}

/// A point whose ρ-distance from the origin is at most `reach` times the
/// ρ-inradius of the grid box.
fn offset(rng: &mut impl Rng, grid: &Grid, profile: &AnisotropyProfile, reach: f64) -> Vec<f64> {
    (0..grid.dim())
        .map(|i| {
            let half = 0.5 * (grid.upper()[i] - grid.lower()[i]);
            let mid = 0.5 * (grid.upper()[i] + grid.lower()[i]);
            let inradius = half.powf(1.0 / profile.exponents()[i]);
            let r = reach * inradius.min(1.0);
            mid + rng.gen_range(-1.0..1.0) * r.powf(profile.exponents()[i])
        })
        .collect()
}

/// Twelve functions: Gaussians at three scales (centered and offset), two
/// oscillating bumps, two ellipsoid indicators and two sums of offset bumps.
/// Offsets are drawn from `seed`; scales are relative to `scale`, which
/// should be a fraction of the box size.
pub fn f_suite(grid: &Grid, profile: &AnisotropyProfile, scale: f64, seed: u64) -> Result<Vec<Member>> {
    let mut rng = SeedStream::new(seed).next_rng();
    let n = grid.dim();
    let origin: Vec<f64> = (0..n).map(|i| 0.5 * (grid.lower()[i] + grid.upper()[i])).collect();
    let mut out = Vec::with_capacity(12);
    let mut push = |name: String, f: &dyn Fn(&[f64]) -> f64| -> Result<()> {
        out.push(Member {
            name,
            values: sample(f, grid)?,
        });
        Ok(())
    };
    for (k, sigma) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let s = sigma * scale;
        push(format!("gauss{k}-centered"), &bump(profile, &origin, s))?;
        let c = offset(&mut rng, grid, profile, 0.3 * scale);
        push(format!("gauss{k}-offset"), &bump(profile, &c, s))?;
    }
    let b = bump(profile, &origin, 0.7 * scale);
    let w = 3.0 / scale;
    push("cos-bump".into(), &|x: &[f64]| b(x) * (w * x[0]).cos())?;
    push("sin-bump".into(), &|x: &[f64]| b(x) * (w * (x[0] + x[n - 1])).sin())?;
    push("indicator-centered".into(), &indicator(profile, &origin, 0.5 * scale))?;
    let c = offset(&mut rng, grid, profile, 0.2 * scale);
    push("indicator-offset".into(), &indicator(profile, &c, 0.4 * scale))?;
    for k in 0..2 {
        let c1 = offset(&mut rng, grid, profile, 0.4 * scale);
        let c2 = offset(&mut rng, grid, profile, 0.4 * scale);
        let (b1, b2) = (bump(profile, &c1, 0.3 * scale), bump(profile, &c2, 0.4 * scale));
        push(format!("bump-pair{k}"), &|x: &[f64]| b1(x) - 0.5 * b2(x))?;
    }
    Ok(out)
}

/// Coefficient functions spanning the BMO/VMO boundary: a constant,
/// `sin x₁`, a clamped ramp in `x₁` and `log ρ(x)` (regularized to
/// `log max(ρ, h/2)` at the grid scale).
pub fn a_suite(grid: &Grid, profile: &AnisotropyProfile) -> Result<Vec<Member>> {
    let floor = 0.5 * grid.max_spacing();
    let make = |name: &str, f: &dyn Fn(&[f64]) -> f64| -> Result<Member> {
        Ok(Member {
            name: name.into(),
            values: sample(f, grid)?,
        })
    };
    Ok(vec![
        make("constant", &|_| 1.5)?,
        make("sin-x1", &|x| x[0].sin())?,
        make("ramp-x1", &|x| x[0].clamp(-1.0, 1.0))?,
        make("log-rho", &|x| log_rho(profile, x, floor))?,
    ])
}

pub(crate) fn log_rho(profile: &AnisotropyProfile, x: &[f64], floor: f64) -> f64 {
    profile.rho(x).max(floor).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_seeded_and_sized() {
        let g = Grid::cube(2, 3.0, 33).unwrap();
        let p = AnisotropyProfile::new(vec![1.0, 2.0]).unwrap();
        let a = f_suite(&g, &p, 1.0, 3).unwrap();
        let b = f_suite(&g, &p, 1.0, 3).unwrap();
        let c = f_suite(&g, &p, 1.0, 4).unwrap();
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values.values(), y.values.values());
        }
        assert!(a.iter().zip(&c).any(|(x, y)| x.values.values() != y.values.values()));
        assert!(a.iter().all(|m| m.values.max_abs() > 0.0));
        assert_eq!(a_suite(&g, &p).unwrap().len(), 4);
    }
}
