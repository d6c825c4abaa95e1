//! The batch driver used by the binary: a configuration with overrides, the
//! `demo-counterexample` pipeline and its manifest.

use hornlab::run::{run, Command, RunConfig};

fn main() -> hornlab::Result<()> {
    let overrides = vec!["heat.coeffs=[1.0, 0.5]".to_string(), "eigs.count=4".to_string()];
    let cfg = RunConfig::from_json_str(r#"{"eigs": {"r_out": 4.0}}"#, &overrides)?;
    let out = std::env::temp_dir().join("hornlab-batch-example");
    let manifest = run(Command::DemoCounterexample, &cfg, &out);
    println!("status {:?} (exit code {}), stage {}", manifest.status, manifest.exit_code, manifest.stage);
    for check in &manifest.checks {
        println!("  {:<28} {:>12.4e} {} {:?}  {}", check.name, check.value, check.relation, check.limit, check.passed);
    }
    println!("artifacts in {}: {:?}", out.display(), manifest.files);
    Ok(())
}
