//! Truncated singular integrals across a truncation ladder, measured in a
//! weighted Morrey norm.

use aniso_sio::gridfn::{sample, Grid};
use aniso_sio::kernel::builtin;
use aniso_sio::operators::{truncated_transform, TruncationPolicy};
use aniso_sio::spaces::{default_radii, morrey_norm, Centers, Weight};

fn main() -> aniso_sio::Result<()> {
    let k = builtin("CZ2")?;
    let p = k.profile().clone();
    let grid = Grid::cube(2, 3.0, 97)?;
    let f = sample(|x| (-(x[0] * x[0]) - x[1] * x[1] / 2.0).exp(), &grid)?;
    let radii = default_radii(&grid, &p);
    let w = Weight::power(1.0);
    let nf = morrey_norm(&f, 2.0, &w, &p, &Centers::default(), &radii)?.value;
    let h = grid.max_spacing();
    let margin = 18.0 * h;
    for m in [4.0, 8.0, 16.0] {
        let out = truncated_transform(&k, &f, &TruncationPolicy::with_margin(m * h, margin))?;
        let norm = morrey_norm(&out.output, 2.0, &w, &p, &Centers::default(), &radii)?.value;
        println!(
            "ε = {m:>2}h: ‖K_ε f‖ / ‖f‖ = {:.4}  (straddle cells {}, cutoff error ≤ {:.1e})",
            norm / nf,
            out.diagnostics.straddle_cells,
            out.diagnostics.cutoff_error_estimate
        );
    }
    Ok(())
}
