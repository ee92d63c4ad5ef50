//! Settling time against capacitance, resistance and switching factor on the
//! reference pack.

use flycap::scenarios::{capacitor_sweep, resistor_sweep, switch_factor_sweep};
use flycap::sweep::{run_sweep, trend_summary};

fn main() -> flycap::Result<()> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for spec in [capacitor_sweep(), resistor_sweep(), switch_factor_sweep()] {
        let rows = run_sweep(&spec, workers)?;
        for r in &rows {
            println!(
                "C {:>5} F  R {:>5} Ω  δ {:>3}  settling {}",
                r.cap, r.res, r.delta, r.settling
            );
        }
        print!("{}", trend_summary(&spec, &rows));
        println!();
    }
    Ok(())
}
