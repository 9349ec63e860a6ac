//! Commutators with a BMO coefficient, in both forms.

use aniso_sio::gridfn::{sample, Grid};
use aniso_sio::kernel::builtin;
use aniso_sio::operators::{commutator, commutator_operator_form, TruncationPolicy};
use aniso_sio::spaces::{bmo_modulus, default_radii, morrey_norm, Centers, Weight};

fn main() -> aniso_sio::Result<()> {
    let k = builtin("VAR-CZ2")?;
    let p = k.profile().clone();
    let grid = Grid::cube(2, 3.0, 81)?;
    let radii = default_radii(&grid, &p);
    let a = sample(|x| x[0].sin(), &grid)?;
    let f = sample(|x| (-(x[0] - 0.3).powi(2) - x[1] * x[1]).exp(), &grid)?;
    let pol = TruncationPolicy::new(4.0 * grid.max_spacing());
    let c = commutator(&a, &k, &f, &pol)?;
    let split = commutator_operator_form(&a, &k, &f, &pol)?;
    println!("max gap between the two forms: {:.1e}", c.max_difference(&split));

    let w = Weight::power(1.0);
    let bmo = bmo_modulus(&a, &p, &radii, &Centers::default())?;
    let num = morrey_norm(&c.output, 2.0, &w, &p, &Centers::default(), &radii)?.value;
    let den = morrey_norm(&f, 2.0, &w, &p, &Centers::default(), &radii)?.value;
    println!("‖a‖_* = {:.4}, VMO at grid scale: {}", bmo.bmo_norm, bmo.vmo_flag);
    println!("‖C_ε f‖ / (‖a‖_* ‖f‖) = {:.4}", num / (bmo.bmo_norm * den));
    Ok(())
}
