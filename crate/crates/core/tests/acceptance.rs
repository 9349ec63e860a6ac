//! Acceptance run: every experiment with default settings, grouped into the
//! eleven acceptance criteria. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::process::ExitCode;

use aniso_sio::coverage;
use aniso_sio::verify::{read_report_csv, report_to_csv_string, run, ExperimentConfig, VerificationReport};

const SEED: u64 = 20240601;

/// Criterion number, title, and the check-id groups it covers.
const CRITERIA: &[(u32, &str, &[&str])] = &[
    (1, "metric axioms", &["metric"]),
    (2, "kernel axioms", &["kernel"]),
    (3, "spherical harmonics", &["harmonics"]),
    (4, "gradient formula and degree scaling", &["gradient"]),
    (5, "pointwise and integral smoothness conditions", &["hormander"]),
    (6, "truncated operator bound across the truncation ladder", &["operator"]),
    (7, "commutator bound against the BMO norm", &["commutator"]),
    (8, "harmonic series reconstruction", &["series"]),
    (9, "weights, maximal and sharp inequalities, BMO machinery", &["weights", "spaces"]),
    (10, "VMO localization", &["vmo"]),
];

fn group(id: &str) -> &str {
    id.split('.').next().unwrap_or(id)
}

fn criterion_line(n: u32, title: &str, pass: bool, detail: &str) -> bool {
    println!("criterion {n:>2} {} {title} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

fn grouped(report: &VerificationReport) -> bool {
    let mut all = true;
    for (n, title, groups) in CRITERIA {
        let checks: Vec<_> = report.checks.iter().filter(|c| groups.contains(&group(&c.id))).collect();
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
        let pass = !checks.is_empty() && failed.is_empty();
        let mut detail = format!("{}/{} checks", checks.len() - failed.len(), checks.len());
        if !failed.is_empty() {
            detail.push_str(&format!("; failing: {}", failed.join(", ")));
        }
        all &= criterion_line(*n, title, pass, &detail);
    }
    let unmapped: Vec<&str> = report
        .checks
        .iter()
        .map(|c| c.id.as_str())
        .filter(|id| !CRITERIA.iter().any(|(_, _, g)| g.contains(&group(id))))
        .collect();
    if !unmapped.is_empty() {
        println!("checks outside every criterion: {}", unmapped.join(", "));
        all = false;
    }
    all
}

fn determinism_and_coverage(first: &VerificationReport, written_csv: &str) -> aniso_sio::Result<(bool, String)> {
    let second = run(&ExperimentConfig { seed: SEED, ..ExperimentConfig::new("all") })?;
    let (a, b) = (first.without_timing(), second.without_timing());
    let json_same = a.to_json()? == b.to_json()?;
    let csv_same = report_to_csv_string(&a)? == report_to_csv_string(&b)?;
    let csv_rows = read_report_csv(written_csv)?.len() == first.checks.len();
    let missing = coverage::uninvoked();
    let pass = json_same && csv_same && csv_rows && missing.is_empty();
    let detail = format!(
        "json identical: {json_same}, csv identical: {csv_same}, written csv complete: {csv_rows}, uninvoked: [{}]",
        missing.join(", ")
    );
    Ok((pass, detail))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = dir.path().join("all");
    let config = ExperimentConfig {
        seed: SEED,
        output: Some(out.clone()),
        ..ExperimentConfig::new("all")
    };
    let first = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut pass = grouped(&first);
    let written = std::fs::read_to_string(out.with_extension("csv")).unwrap_or_default();
    pass &= match determinism_and_coverage(&first, &written) {
        Ok((ok, detail)) => criterion_line(11, "determinism and coverage", ok, &detail),
        Err(e) => criterion_line(11, "determinism and coverage", false, &format!("error: {e}")),
    };
    println!("acceptance: {}", if pass { "PASS" } else { "FAIL" });
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
