//! One cell at 64 %, two low cells at 58 % and 56 %: which cells the
//! balancer picks first, and how long it takes to get under 2 %.

use flycap::metrics::soc_spread;
use flycap::scenarios::{extreme_scenario, settle_options};
use flycap::sim::simulate;

fn main() -> flycap::Result<()> {
    let out = simulate(&extreme_scenario(48.0), &settle_options(48.0))?;
    let m = out.trace.cells_per_string;
    for e in out.trace.events.iter().take(6) {
        println!(
            "{:>8.1} s  {} -> {}  v_cap {:.4} V",
            e.time,
            e.from_cell.label(m),
            e.to_cell.label(m),
            e.v_cap
        );
    }
    let z: Vec<f64> = out.final_state.socs().collect();
    println!(
        "balanced: {}, spread {:.2} % after {:.2} h",
        out.stopped_balanced,
        100.0 * soc_spread(&z),
        out.final_state.time / 3600.0
    );
    Ok(())
}
