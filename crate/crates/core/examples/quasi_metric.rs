//! The anisotropic quasi-distance: dilations, polar form and ellipsoids.

use aniso_sio::metric::{ellipsoid_contains, ellipsoid_measure, AnisotropyProfile, Ellipsoid};

fn main() -> aniso_sio::Result<()> {
    let p = AnisotropyProfile::new(vec![1.0, 2.0])?;
    let x = [0.3, -1.2];
    let r = p.rho(&x);
    println!("rho({x:?}) = {r:.12}");
    for mu in [0.5, 2.0, 7.0] {
        println!("rho(dilate({mu}, x)) / rho(x) = {:.12}", p.rho(&p.dilate(mu, &x)) / r);
    }
    let (rho, bar) = p.polar(&x);
    println!("polar form: rho = {rho:.6}, point on the unit sphere = {bar:.6?}");

    let e = Ellipsoid::new(vec![0.0, 0.0], 1.5, p.clone())?;
    println!("semi-axes of E_1.5(0): {:?}", e.semi_axes());
    println!("|E_1.5(0)| = {:.6} (homogeneous dimension {})", ellipsoid_measure(&e), p.homogeneous_dimension());
    println!("x inside E_1.5(0): {}", ellipsoid_contains(&e, &x));
    Ok(())
}
