//! Runs a pack through a current profile read from a two-column CSV
//! (`time_s,current_a`, discharge positive). Pass the file path as the first
//! argument; without one a short constant-current file is generated.

use std::fs;
use std::path::PathBuf;

use flycap::cell::CellParams;
use flycap::metrics::Summary;
use flycap::pack::PackConfig;
use flycap::profile::load_profile;
use flycap::scenarios::reference_balancer;
use flycap::sim::{simulate, Scenario, SimOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("flycap_profile.csv");
            fs::write(&p, "0,6.0\n900,6.0\n900.1,-3.0\n1200,-3.0\n")?;
            p
        }
    };
    let profile = load_profile(&path)?.with_rest(4.0 * 3600.0)?;
    let scenario = Scenario {
        pack: PackConfig::perturbed(2, 4, CellParams::default(), 0.05, 3),
        initial_soc: vec![0.60, 0.61, 0.59, 0.60, 0.62, 0.60, 0.60, 0.58],
        profile,
        balancer: Some(reference_balancer()),
    };
    let out = simulate(&scenario, &SimOptions::default())?;
    print!("{}", Summary::from_trace(&out.trace, 0.02).to_text());
    Ok(())
}
