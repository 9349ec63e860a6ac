//! Smoothness of the harmonic kernels: closed-form gradient and the
//! pointwise and integral smoothness conditions.

use aniso_sio::harmonics::{hsm_gradient, hsm_kernel, HarmonicBasis};
use aniso_sio::metric::{AnisotropyProfile, Ellipsoid};
use aniso_sio::operators::{hormander_integral, hormander_pointwise};
use aniso_sio::rng::SeedStream;

fn main() -> aniso_sio::Result<()> {
    let p = AnisotropyProfile::new(vec![1.0, 2.0])?;
    let basis = HarmonicBasis::new(2, 8)?;
    let x = [0.4, -0.7];
    let h = hsm_kernel(&basis, 1, 2, &p)?;
    println!("H_12(x) = {:.6}, ∇H_12(x) = {:.6?}", h.evaluate(&x)?, hsm_gradient(&basis, 1, 2, &p, &x)?);

    let mut rng = SeedStream::new(11).next_rng();
    for m in [1, 2, 4] {
        let e = Ellipsoid::new(vec![0.5, 0.5], 1.0, p.clone())?;
        let sup = hormander_pointwise(&basis, 1, m, &p, &e, 4000, &mut rng)?;
        println!("m = {m}: pointwise ratio (lower bound of the sup) = {sup:.4}");
    }
    for rho in [0.25, 1.0, 4.0] {
        let y = p.dilate(rho, &[0.6, 0.8]);
        let i = hormander_integral(&basis, 1, 2, &p, &y, 64.0 * rho)?;
        println!("ρ(x) = {rho}: integral {:.6}, tail-corrected {:.6}", i.value, i.tail_corrected);
    }
    Ok(())
}
