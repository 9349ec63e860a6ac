//! Invariants of the public API as property tests.

use proptest::prelude::*;

use aniso_sio::gridfn::{integrate, lp_norm, sample, Grid, GridFunction};
use aniso_sio::harmonics::{HarmonicBasis, SphereTable};
use aniso_sio::kernel::{builtin, BUILTIN_NAMES};
use aniso_sio::metric::{ellipsoid_contains, sphere_quadrature, AnisotropyProfile, Ellipsoid};
use aniso_sio::operators::{commutator, commutator_operator_form, truncated_transform, TruncationPolicy};
use aniso_sio::rng::SeedStream;
use aniso_sio::spaces::{bmo_modulus, default_radii, Centers};

fn profile_strategy() -> impl Strategy<Value = AnisotropyProfile> {
    prop_oneof![
        prop::collection::vec(1.0f64..3.0, 2),
        prop::collection::vec(1.0f64..3.0, 3),
    ]
    .prop_map(|a| AnisotropyProfile::new(a).unwrap())
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n).prop_filter("nonzero", |x| x.iter().any(|v| v.abs() > 1e-3))
}

fn profile_and_points(k: usize) -> impl Strategy<Value = (AnisotropyProfile, Vec<Vec<f64>>)> {
    profile_strategy().prop_flat_map(move |p| {
        let n = p.dim();
        (Just(p), prop::collection::vec(point(n), k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rho_is_homogeneous((p, xs) in profile_and_points(1), mu in 1e-3f64..10.0) {
        let x = &xs[0];
        let r = p.rho(x);
        let lhs = p.rho(&p.dilate(mu, x));
        prop_assert!((lhs - mu * r).abs() <= 1e-10 * (1.0 + mu * r));
    }

    #[test]
    fn rho_satisfies_the_triangle_inequality((p, xs) in profile_and_points(3)) {
        let d = |a: &[f64], b: &[f64]| p.rho(&a.iter().zip(b).map(|(u, v)| u - v).collect::<Vec<_>>());
        let (x, y, z) = (&xs[0], &xs[1], &xs[2]);
        prop_assert!(d(x, y) <= d(x, z) + d(z, y) + 1e-10);
    }

    #[test]
    fn unit_sphere_is_the_euclidean_sphere((p, xs) in profile_and_points(1)) {
        let norm = xs[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        let u: Vec<f64> = xs[0].iter().map(|v| v / norm).collect();
        prop_assert!((p.rho(&u) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn polar_form_reconstructs_the_point((p, xs) in profile_and_points(1)) {
        let (r, bar) = p.polar(&xs[0]);
        let back = p.dilate(r, &bar);
        let norm = bar.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-10);
        for (a, b) in back.iter().zip(&xs[0]) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn quadratic_form_agrees_with_rho((p, xs) in profile_and_points(2), r in 0.1f64..4.0) {
        let e = Ellipsoid::new(xs[0].clone(), r, p.clone()).unwrap();
        let y = &xs[1];
        let d = p.rho(&y.iter().zip(&xs[0]).map(|(u, v)| u - v).collect::<Vec<_>>());
        prop_assume!((d - r).abs() > 1e-9 * r);
        prop_assert_eq!(ellipsoid_contains(&e, y), d < r);
        prop_assert_eq!(e.contains_by_rho(y), d < r);
    }

    #[test]
    fn builtin_kernels_are_homogeneous(which in 0usize..BUILTIN_NAMES.len(), seed in any::<u64>(), r in 0.1f64..10.0) {
        let k = builtin(BUILTIN_NAMES[which]).unwrap();
        let p = k.profile().clone();
        let mut rng = SeedStream::new(seed).next_rng();
        let x: Vec<f64> = aniso_sio::rng::random_in_unit_ball(&mut rng, p.dim());
        let u = aniso_sio::rng::random_unit_vector(&mut rng, p.dim());
        let base = k.evaluate(&x, &u);
        let scaled = k.evaluate(&x, &p.dilate(r, &u)) * r.powf(p.homogeneous_dimension());
        prop_assert!((scaled - base).abs() <= 1e-10 * (1.0 + base.abs()));
    }

    #[test]
    fn norms_are_absolutely_homogeneous(values in prop::collection::vec(-3.0f64..3.0, 81), c in -4.0f64..4.0, p in 1.0f64..4.0) {
        let g = Grid::cube(2, 1.0, 9).unwrap();
        let f = GridFunction::from_values(g, values).unwrap();
        let a = lp_norm(&f, p).unwrap();
        let b = lp_norm(&f.scale(c), p).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + b));
        prop_assert_eq!(a == 0.0, f.max_abs() == 0.0);
    }

    #[test]
    fn bmo_modulus_is_nondecreasing(values in prop::collection::vec(-3.0f64..3.0, 625)) {
        let p = AnisotropyProfile::new(vec![1.0, 2.0]).unwrap();
        let g = Grid::cube(2, 1.0, 25).unwrap();
        let a = GridFunction::from_values(g.clone(), values).unwrap();
        let m = bmo_modulus(&a, &p, &default_radii(&g, &p), &Centers::Every(2)).unwrap();
        prop_assert!(m.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(m.bmo_norm, *m.values.last().unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn commutator_forms_agree(seed in any::<u64>()) {
        let k = builtin("VAR-CZ2").unwrap();
        let g = Grid::cube(2, 2.0, 33).unwrap();
        let mut s = SeedStream::new(seed);
        let (c1, c2) = (s.next_seed() as f64 / u64::MAX as f64, s.next_seed() as f64 / u64::MAX as f64);
        let a = sample(|x| (2.0 * x[0] + c1).sin() + c2 * x[1], &g).unwrap();
        let f = sample(|x| (-(x[0] - c1).powi(2) - 2.0 * x[1].powi(2)).exp(), &g).unwrap();
        let pol = TruncationPolicy::new(4.0 * g.max_spacing());
        let direct = commutator(&a, &k, &f, &pol).unwrap();
        let split = commutator_operator_form(&a, &k, &f, &pol).unwrap();
        let scale = split.output.max_abs().max(1e-300);
        prop_assert!(direct.max_difference(&split) <= 1e-10 * scale);
    }

    #[test]
    fn truncated_transform_is_linear(seed in any::<u64>(), c in -3.0f64..3.0) {
        let k = builtin("CZ2").unwrap();
        let g = Grid::cube(2, 2.0, 33).unwrap();
        let shift = SeedStream::new(seed).next_seed() as f64 / u64::MAX as f64;
        let f1 = sample(|x| (-(x[0] - shift).powi(2) - x[1].powi(2)).exp(), &g).unwrap();
        let f2 = sample(|x| (x[0] + x[1] * shift).cos(), &g).unwrap();
        let pol = TruncationPolicy::new(4.0 * g.max_spacing());
        let combined = truncated_transform(&k, &f1.zip_with(&f2.scale(c), |u, v| u + v).unwrap(), &pol).unwrap();
        let t1 = truncated_transform(&k, &f1, &pol).unwrap();
        let t2 = truncated_transform(&k, &f2, &pol).unwrap();
        let sum = t1.output.zip_with(&t2.output.scale(c), |u, v| u + v).unwrap();
        let gap = combined.output.zip_with(&sum, |u, v| u - v).unwrap().max_abs();
        prop_assert!(gap <= 1e-10 * (1.0 + sum.max_abs()));
    }
}

#[test]
fn harmonics_have_zero_mean_beyond_degree_zero() {
    for (n, m, res) in [(2usize, 24usize, 256usize), (3, 12, 32)] {
        let basis = HarmonicBasis::new(n, m).unwrap();
        let q = sphere_quadrature(n, res).unwrap();
        for &(s, deg) in basis.indices().iter().filter(|(_, deg)| *deg > 0) {
            let mean = q.integrate(|u| basis.value(s, deg, u));
            assert!(mean.abs() <= 1e-10, "n={n} s={s} m={deg}: {mean}");
        }
    }
}

#[test]
fn parseval_holds_for_polynomials_on_the_sphere() {
    let mut seeds = SeedStream::new(7);
    for (n, res) in [(2usize, 256usize), (3, 32)] {
        let basis = HarmonicBasis::new(n, 8).unwrap();
        let q = sphere_quadrature(n, res).unwrap();
        let table = SphereTable::new(&basis, &q).unwrap();
        for _ in 0..5 {
            let mut rng = seeds.next_rng();
            let c: Vec<f64> = (0..n + 2).map(|_| aniso_sio::rng::standard_normal(&mut rng)).collect();
            // Degree four at most, so degree eight captures it completely.
            let phi = |u: &[f64]| c[0] + c[1] * u[0] * u[1] + c[2] * u[0].powi(4) + c[3] * u[n - 1].powi(3) + c[n + 1] * u[1];
            let coefs = table.expand(phi);
            let energy = q.integrate(|u| phi(u).powi(2));
            assert!((coefs.sum_of_squares() - energy).abs() <= 1e-8 * energy, "n={n}");
        }
    }
}

#[test]
fn trapezoid_rule_is_second_order() {
    let err = |points: usize| {
        let g = Grid::cube(2, 1.0, points).unwrap();
        let f = sample(|x| (x[0] + 0.5 * x[1]).cos() * (1.0 + x[1] * x[1]), &g).unwrap();
        // The odd part in x drops out, leaving 2 sin 1 · (16 cos ½ − 24 sin ½).
        let exact = 2.0 * 1f64.sin() * (16.0 * 0.5f64.cos() - 24.0 * 0.5f64.sin());
        (integrate(&f) - exact).abs()
    };
    let order = (err(33) / err(65)).log2();
    assert!(order >= 1.9, "order {order}");
}

#[test]
fn seed_streams_are_reproducible() {
    let a: Vec<u64> = {
        let mut s = SeedStream::new(42);
        (0..8).map(|_| s.next_seed()).collect()
    };
    let b: Vec<u64> = {
        let mut s = SeedStream::new(42);
        (0..8).map(|_| s.next_seed()).collect()
    };
    assert_eq!(a, b);
    assert_ne!(a[0], SeedStream::new(43).next_seed());
}
