//! Two cells in series, one 9.5 points above the other: transfer efficiency
//! across the capacitor, resistor and switching-factor grid.

use flycap::sweep::{efficiency_csv_string, run_efficiency_study, EfficiencyStudy};

fn main() -> flycap::Result<()> {
    let study = EfficiencyStudy {
        cap_values: vec![50.0],
        ..EfficiencyStudy::default()
    };
    let rows = run_efficiency_study(&study, 4)?;
    print!("{}", efficiency_csv_string(&rows));
    Ok(())
}
