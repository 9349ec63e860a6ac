//! Experiment harness: named experiments that compose the library into
//! empirical checks of the expected inequalities, with JSON/CSV reports.
//!
//! Check ids are `<group>.<check>`; the group names the property family
//! (`metric`, `kernel`, `harmonics`, `gradient`, `hormander`, `operator`,
//! `commutator`, `series`, `weights`, `spaces`, `vmo`).

mod config;
mod geometry;
mod report;
mod suites;
mod transforms;
mod function_spaces;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

pub use config::ExperimentConfig;
pub use report::{read_report_csv, report_to_csv, report_to_csv_string, CheckRecord, Environment, VerificationReport, CSV_HEADER};
pub use suites::{a_suite, f_suite, Member};

/// Environment variable capping the worker threads used by [`run`].
pub const THREADS_ENV: &str = "ANISO_SIO_THREADS";

type ExperimentFn = fn(&ExperimentConfig, &mut SeedStream, &mut VerificationReport) -> Result<()>;

/// Every experiment, in the order `all` runs them, with a one-line summary.
pub(crate) const EXPERIMENTS: &[(&str, &str)] = &[
    ("metric-axioms", "homogeneity, unit sphere and triangle inequality of the quasi-distance"),
    ("kernel-axioms", "homogeneity, cancellation and smoothness of the built-in kernels"),
    ("harmonic-decay", "harmonic dimensions, orthonormality, derivative growth and coefficient decay"),
    ("hormander", "gradient formula and the pointwise and integral smoothness conditions"),
    ("operator-bound", "weighted Morrey bound of truncated singular integrals across the truncation ladder"),
    ("commutator-bound", "commutator norms against the BMO norm of the coefficient"),
    ("vmo-localization", "commutator norms over shrinking ellipsoids for VMO and non-VMO coefficients"),
    ("series-reconstruction", "harmonic series of the kernel against the direct transform"),
    ("weights", "doubling and integral conditions on weights"),
    ("spaces-inequalities", "maximal, sharp, BMO and nested-average inequalities"),
    ("all", "every experiment above, with default settings"),
];

fn experiment_fn(name: &str) -> Option<ExperimentFn> {
    let f: ExperimentFn = match name {
        "metric-axioms" => geometry::metric_axioms,
        "kernel-axioms" => geometry::kernel_axioms,
        "harmonic-decay" => geometry::harmonic_decay,
        "hormander" => geometry::hormander,
        "operator-bound" => transforms::operator_bound,
        "commutator-bound" => transforms::commutator_bound,
        "vmo-localization" => transforms::vmo_localization,
        "series-reconstruction" => transforms::series_reconstruction,
        "weights" => function_spaces::weights,
        "spaces-inequalities" => function_spaces::spaces_inequalities,
        _ => return None,
    };
    Some(f)
}

/// Names and summaries of the available experiments.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    EXPERIMENTS.to_vec()
}

/// Thread count requested through [`THREADS_ENV`], if any.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Runs the configured experiment and writes the report if an output path
/// is set. Check failures are recorded in the report; only configuration
/// and I/O problems are returned as errors.
pub fn run(config: &ExperimentConfig) -> Result<VerificationReport> {
    crate::coverage::touch(crate::coverage::Op::Run);
    config.validate()?;
    let report = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| run_inner(config))?,
        None => run_inner(config)?,
    };
    if let Some(path) = &config.output {
        report.write_json(path.with_extension("json"))?;
        report_to_csv(&report, path.with_extension("csv"))?;
    }
    Ok(report)
}

fn run_inner(config: &ExperimentConfig) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(&config.experiment, config.seed);
    let mut seeds = SeedStream::new(config.seed);
    if config.experiment == "all" {
        for (name, _) in EXPERIMENTS.iter().filter(|(n, _)| *n != "all") {
            let sub = ExperimentConfig {
                seed: seeds.next_seed(),
                ..ExperimentConfig::new(*name)
            };
            let mut sub_seeds = SeedStream::new(sub.seed);
            experiment_fn(name).expect("listed")(&sub, &mut sub_seeds, &mut report)?;
        }
    } else {
        let f = experiment_fn(&config.experiment).ok_or_else(|| Error::UnknownExperiment(config.experiment.clone()))?;
        f(config, &mut seeds, &mut report)?;
    }
    Ok(report)
}
