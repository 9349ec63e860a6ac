//! Expanding a function on the unit circle in harmonics and fitting the
//! decay of its coefficients.

use aniso_sio::harmonics::{decay_fit, expand, HarmonicBasis};
use aniso_sio::metric::sphere_quadrature;

fn main() -> aniso_sio::Result<()> {
    let basis = HarmonicBasis::new(2, 24)?;
    let q = sphere_quadrature(2, 512)?;
    for (label, phi) in [
        ("exp(cos θ)", Box::new(|u: &[f64]| u[0].exp()) as Box<dyn Fn(&[f64]) -> f64>),
        ("|cos θ|", Box::new(|u: &[f64]| u[0].abs())),
    ] {
        let c = expand(phi, &basis, &q)?;
        let fit = decay_fit(&c)?;
        let sups: Vec<String> = c.sup_norms[1..=8].iter().map(|b| format!("{b:.2e}")).collect();
        println!("{label}: sup_s |b_sm| for m = 1..8: {}", sups.join(" "));
        println!("    fitted decay slope {:?}, at least quadratic: {}", fit.slope, fit.passes());
    }
    Ok(())
}
