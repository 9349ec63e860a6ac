//! Validating variable kernels: homogeneity, cancellation and smoothness,
//! with the two kernels that are built to fail.

use aniso_sio::kernel::{builtin, non_homogeneous_example, radial_example, validate, ValidationConfig, BUILTIN_NAMES};
use aniso_sio::metric::AnisotropyProfile;

fn main() -> aniso_sio::Result<()> {
    let cfg = ValidationConfig::default();
    for name in BUILTIN_NAMES {
        let r = validate(&builtin(name)?, &cfg)?;
        println!(
            "{:<8} pass={} homogeneity={:.1e} cancellation={:.1e} mean |k| on the sphere={:.6}",
            r.kernel, r.pass, r.homogeneity_max_residual, r.cancellation_residual, r.mean_absolute_integral
        );
    }
    let p = AnisotropyProfile::new(vec![1.0, 2.0])?;
    for k in [non_homogeneous_example(p.clone()), radial_example(p, 1.5)] {
        let r = validate(&k, &cfg)?;
        println!("{:<24} pass={}", r.kernel, r.pass);
    }
    Ok(())
}
