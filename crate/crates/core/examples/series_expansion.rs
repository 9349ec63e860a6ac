//! Reconstructing a transform from the harmonic series of its kernel.

use aniso_sio::gridfn::{sample, Grid};
use aniso_sio::kernel::{builtin, smooth_series_example};
use aniso_sio::metric::AnisotropyProfile;
use aniso_sio::operators::{series_transform, truncated_transform, TruncationPolicy};

fn main() -> aniso_sio::Result<()> {
    let grid = Grid::cube(2, 2.0, 49)?;
    let f = sample(|x| (-2.0 * x[0] * x[0] - x[1] * x[1]).exp(), &grid)?;
    let pol = TruncationPolicy::new(4.0 * grid.max_spacing());
    let smooth = smooth_series_example(AnisotropyProfile::new(vec![1.0, 2.0])?);
    for k in [builtin("VAR-CZ2")?, smooth] {
        let direct = truncated_transform(&k, &f, &pol)?;
        let scale = direct.output.max_abs();
        for m in [2, 4, 8, 16] {
            let series = series_transform(&k, &f, &pol, m)?;
            println!("{:<14} M = {m:>2}: relative gap {:.2e}", k.name(), series.result.max_difference(&direct) / scale);
        }
    }
    Ok(())
}
