//! Process-wide record of which public operations have been invoked.
//!
//! The verification harness uses this to list operations that no experiment
//! exercised. Flags only ever go from unset to set, so concurrent callers
//! never interfere with each other.

use std::sync::atomic::{AtomicBool, Ordering};

macro_rules! operations {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Every tracked public operation.
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        #[repr(usize)]
        pub enum Op { $($variant),* }

        impl Op {
            pub const ALL: &'static [Op] = &[$(Op::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Op::$variant => $name),* }
            }
        }
    };
}

operations! {
    Rho => "metric::rho",
    Dilate => "metric::dilate",
    EllipsoidMeasure => "metric::ellipsoid_measure",
    EllipsoidContains => "metric::ellipsoid_contains",
    SphereQuadrature => "metric::sphere_quadrature",
    CheckHomogeneity => "kernel::check_homogeneity",
    CheckCancellation => "kernel::check_cancellation",
    CheckDerivativeBounds => "kernel::check_derivative_bounds",
    Builtin => "kernel::builtin",
    BasisDim => "harmonics::basis_dim",
    EvalHarmonic => "harmonics::eval_harmonic",
    Expand => "harmonics::expand",
    DecayFit => "harmonics::decay_fit",
    HsmKernel => "harmonics::hsm_kernel",
    HsmGradient => "harmonics::hsm_gradient",
    Sample => "gridfn::sample",
    Integrate => "gridfn::integrate",
    LpNorm => "gridfn::lp_norm",
    ReadCsv => "gridfn::read_csv",
    WriteCsv => "gridfn::write_csv",
    TruncatedTransform => "operators::truncated_transform",
    Commutator => "operators::commutator",
    ConstantTransform => "operators::constant_transform",
    SeriesTransform => "operators::series_transform",
    HormanderPointwise => "operators::hormander_pointwise",
    HormanderIntegral => "operators::hormander_integral",
    Maximal => "spaces::maximal",
    Sharp => "spaces::sharp",
    MaximalS => "spaces::m_s",
    MorreyNorm => "spaces::morrey_norm",
    CheckWeight => "spaces::check_weight",
    BmoModulus => "spaces::bmo_modulus",
    JohnNirenbergRatio => "spaces::john_nirenberg_ratio",
    NestedAverageDrift => "spaces::nested_average_drift",
    Run => "verify::run",
    ReportToCsv => "verify::report_to_csv",
}

static TOUCHED: [AtomicBool; Op::ALL.len()] = [const { AtomicBool::new(false) }; Op::ALL.len()];

#[inline]
pub(crate) fn touch(op: Op) {
    TOUCHED[op as usize].store(true, Ordering::Relaxed);
}

pub fn was_invoked(op: Op) -> bool {
    TOUCHED[op as usize].load(Ordering::Relaxed)
}

/// Names of operations never invoked in this process.
pub fn uninvoked() -> Vec<&'static str> {
    Op::ALL
        .iter()
        .filter(|op| !was_invoked(**op))
        .map(|op| op.name())
        .collect()
}
