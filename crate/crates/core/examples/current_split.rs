//! Three mismatched strings sharing a pulsed load: how the current divides
//! and the mesh current that keeps flowing once the load stops.

use flycap::cell::CellParams;
use flycap::pack::{step_pack, PackConfig, PackState};

fn main() -> flycap::Result<()> {
    let cfg = PackConfig::perturbed(3, 4, CellParams::default(), 0.05, 1);
    let soc = [0.62, 0.60, 0.61, 0.60, 0.58, 0.59, 0.60, 0.58, 0.60, 0.60, 0.61, 0.63];
    let mut st = PackState::relaxed(&cfg, &soc)?;
    let dt = 0.1;
    println!("{:>6} {:>7} {:>9} {:>9} {:>9}", "t (s)", "I (A)", "a0", "a1", "a2");
    for k in 0..=3000 {
        let t = k as f64 * dt;
        let current = if t < 120.0 { 20.0 } else { 0.0 };
        st = step_pack(&st, &cfg, current, dt, &[])?;
        if k % 200 == 0 {
            println!(
                "{t:>6.0} {current:>7.1} {:>9.4} {:>9.4} {:>9.4}",
                st.alpha[0], st.alpha[1], st.alpha[2]
            );
        }
    }
    Ok(())
}
