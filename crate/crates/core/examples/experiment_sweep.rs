//! Configured runs and a seeded sweep through the experiment runner, writing
//! CSVs and run records under a temporary directory.

use qchaos::runner::{run, sweep, ExperimentConfig};

fn main() -> qchaos::Result<()> {
    let root = std::env::temp_dir().join("qchaos-example");
    let cfg = ExperimentConfig::build(
        "standard-map",
        &[("K".into(), "5".into()), ("trajectories".into(), "20000".into())],
        Some(3),
        Some(root.join("single")),
    )?;
    let rec = run(&cfg)?;
    println!("{}", cfg.echo());
    println!("summary {:?}, {:.2}s", rec.summary, rec.wall_time_s);

    let template = ExperimentConfig::build("standard-map", &[("trajectories".into(), "20000".into())], Some(3), None)?;
    let values: Vec<String> = ["2", "5", "10", "20"].iter().map(|s| s.to_string()).collect();
    for p in sweep(&template, "K", &values, &root.join("sweep"))? {
        let d = p.record.as_ref().map(|r| r.summary["diffusion_over_K2_half"]);
        println!("K = {:>3}: seed {:>20}, D/(K^2/2) = {d:.3?}", p.value, p.seed);
    }
    Ok(())
}
