//! Running a named experiment from a JSON config and reading back its
//! CSV report.

use aniso_sio::verify::{list_experiments, read_report_csv, run, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, summary) in list_experiments() {
        println!("{name:<24}{summary}");
    }
    let out = std::env::temp_dir().join("aniso-sio-example-metric");
    let cfg = ExperimentConfig::from_json(&format!(
        r#"{{"experiment": "metric-axioms", "seed": 3, "output": {}}}"#,
        serde_json::to_string(&out)?
    ))?;
    let report = run(&cfg)?;
    for c in &report.checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.id);
    }
    let rows = read_report_csv(&std::fs::read_to_string(out.with_extension("csv"))?)?;
    println!("{} rows in {}", rows.len(), out.with_extension("csv").display());
    Ok(())
}
