//! The 3P4S reference scenario: drive cycle, then rest with the balancer.
//! Prints the summary and writes the trace and charts to `out/example`.

use std::fs;

use flycap::cli::write_report;
use flycap::scenarios::reference_scenario;
use flycap::sim::{simulate, SimOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = simulate(&reference_scenario(), &SimOptions::default())?;
    let dir = std::path::Path::new("out/example");
    fs::create_dir_all(dir)?;
    out.trace.write_csv(dir.join("trace.csv"))?;
    let summary = write_report(&out.trace, 0.02, dir)?;
    print!("{}", summary.to_text());
    println!("{} switch events; wrote {}", out.trace.events.len(), dir.display());
    Ok(())
}
