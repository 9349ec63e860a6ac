//! Maximal functions, weighted Morrey norms, weight conditions and the
//! BMO modulus.

use aniso_sio::gridfn::{sample, Grid};
use aniso_sio::metric::{AnisotropyProfile, Ellipsoid};
use aniso_sio::spaces::{
    bmo_modulus, check_weight, default_radii, john_nirenberg_ratio, m_s, maximal, morrey_norm, nested_average_drift, sharp,
    Centers, Weight,
};

fn main() -> aniso_sio::Result<()> {
    let p = AnisotropyProfile::new(vec![1.0, 2.0])?;
    let alpha = p.homogeneous_dimension();
    let grid = Grid::cube(2, 2.0, 81)?;
    let radii = default_radii(&grid, &p);
    let f = sample(|x| (-4.0 * x[0] * x[0] - 2.0 * x[1] * x[1]).exp(), &grid)?;
    let x = [0.5, 0.25];
    println!(
        "at {x:?}: Mf = {:.4}, M_2 f = {:.4}, f♯ = {:.4}",
        maximal(&f, &p, &x, &radii)?,
        m_s(&f, &p, &x, 2.0, &radii)?,
        sharp(&f, &p, &x, &radii)?
    );
    let w = Weight::power(alpha / 2.0);
    let n = morrey_norm(&f, 3.0, &w, &p, &Centers::default(), &radii)?;
    println!("‖f‖ in L^(3,ω), ω = r^(α/2): {:.4}, attained at {:?} with r = {:.3}", n.value, n.argmax_center, n.argmax_radius);

    let wide: Vec<f64> = (0..=20).map(|k| 1e-2 * 2f64.powi(k)).collect();
    for w in [Weight::power(alpha / 2.0), Weight::power_log(alpha / 2.0), Weight::power(alpha)] {
        let c = check_weight(&w, &p, &[vec![0.0, 0.0]], &wide, 1.0)?;
        println!("{:<24} pass={} integral constant {:.4}", w.name(), c.pass, c.integral_constant);
    }

    // Finer along the second axis, whose exponent is larger, so that the
    // smallest resolvable radius is the same along both axes.
    let grid = Grid::new(vec![-2.0; 2], vec![2.0; 2], vec![129, 201])?;
    let radii = default_radii(&grid, &p);
    let log_rho = sample(|x| p.rho(x).max(0.1).ln(), &grid)?;
    let sin = sample(|x| x[0].sin(), &grid)?;
    for (name, a) in [("log ρ", &log_rho), ("sin x₁", &sin)] {
        let m = bmo_modulus(a, &p, &radii, &Centers::default())?;
        println!("{name}: ‖a‖_* = {:.4}, smallest-radius modulus {:.4}, VMO flag {}", m.bmo_norm, m.values[0], m.vmo_flag);
    }
    let m = bmo_modulus(&log_rho, &p, &radii, &Centers::default())?;
    let e = Ellipsoid::new(vec![0.0, 0.0], 0.3, p.clone())?;
    println!("L² oscillation of log ρ over E / ‖a‖_*: {:.4}", john_nirenberg_ratio(&log_rho, 2.0, &e, &m)?);
    println!("|a_(2E) − a_E| for log ρ: {:.4} (log 2 = {:.4})", nested_average_drift(&log_rho, &e, 1)?, 2f64.ln());
    Ok(())
}
