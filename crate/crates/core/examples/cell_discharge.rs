//! Discharges one cell at 1C for 20 minutes, then lets it relax, printing the
//! terminal voltage once a minute.

use flycap::cell::{advance_cell, terminal_voltage, CellParams, CellState, SOC_EPSILON};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = CellParams::default();
    let mut s = CellState::relaxed(0.8);
    let dt = 1.0;
    println!("{:>5} {:>7} {:>8}", "min", "SoC %", "V");
    for k in 0..=40 * 60 {
        let i = if k < 20 * 60 { p.capacity } else { 0.0 };
        if k % 60 == 0 {
            println!("{:>5} {:>7.2} {:>8.4}", k / 60, 100.0 * s.z, terminal_voltage(&s, &p, i)?);
        }
        s = advance_cell(&s, &p, i, dt, SOC_EPSILON).map_err(|z| format!("SoC left [0, 1]: {z}"))?;
    }
    Ok(())
}
