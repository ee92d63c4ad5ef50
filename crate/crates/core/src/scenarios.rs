//! Ready-made scenarios: the perturbed 3P4S reference pack, an extreme
//! imbalance case, and the capacitor, resistor and switching-factor sweeps
//! built on the reference pack.

use crate::balancer::BalancerConfig;
use crate::cell::CellParams;
use crate::pack::PackConfig;
use crate::profile::{synth_drive_cycle, CurrentProfile, DriveCycle};
use crate::sim::{InitialSoc, Scenario, SimOptions};
use crate::sweep::SweepSpec;

pub const REFERENCE_SEED: u64 = 7;

/// 50 F, 50 mΩ, connections of half a time constant.
pub fn reference_balancer() -> BalancerConfig {
    BalancerConfig::new(50.0, 0.05, 0.5)
}

/// 3P4S pack with ±5 % cell parameter spread and ±2 % initial SoC around 60 %,
/// driven through the synthetic drive cycle and then 12 h of rest. The spread
/// at rest onset is close to 4 %.
pub fn reference_scenario() -> Scenario {
    let pack = PackConfig::perturbed(3, 4, CellParams::default(), 0.05, REFERENCE_SEED);
    let initial_soc = InitialSoc::Random {
        base: 0.6,
        half_width: 0.02,
        seed: REFERENCE_SEED,
    }
    .resolve(pack.n_cells())
    .expect("valid reference SoC");
    let profile = synth_drive_cycle(&DriveCycle {
        seed: REFERENCE_SEED,
        ..DriveCycle::default()
    })
    .expect("valid reference drive cycle");
    Scenario {
        pack,
        initial_soc,
        profile,
        balancer: Some(reference_balancer()),
    }
}

pub const EXTREME_SOC: [f64; 12] = [
    0.64, 0.60, 0.60, 0.60, 0.60, 0.60, 0.60, 0.60, 0.60, 0.58, 0.56, 0.60,
];

/// Identical cells at rest with one cell at 64 %, one at 58 % and one at 56 %,
/// the rest at 60 %. The balancer runs from the first step.
pub fn extreme_scenario(rest_hours: f64) -> Scenario {
    Scenario {
        pack: PackConfig::uniform(3, 4, CellParams::default()),
        initial_soc: EXTREME_SOC.to_vec(),
        profile: CurrentProfile::rest(rest_hours * 3600.0),
        balancer: Some(reference_balancer()),
    }
}

/// Options that end a run half an hour after the pack is first reported
/// balanced at rest.
pub fn settle_options(max_hours: f64) -> SimOptions {
    SimOptions {
        dt: 0.1,
        record_every: 100,
        horizon: Some(max_hours * 3600.0),
        stop_after_balanced: Some(1800.0),
    }
}

fn reference_sweep() -> SweepSpec {
    SweepSpec::new(reference_scenario(), reference_balancer())
}

/// Capacitor sweep at 50 mΩ and δ = 0.5.
pub fn capacitor_sweep() -> SweepSpec {
    SweepSpec {
        cap_values: vec![20.0, 30.0, 50.0, 100.0, 150.0],
        ..reference_sweep()
    }
}

/// Resistor sweep at 50 F and δ = 0.5.
pub fn resistor_sweep() -> SweepSpec {
    SweepSpec {
        res_values: vec![0.05, 0.1, 0.2],
        ..reference_sweep()
    }
}

/// Switching-factor sweep at 50 F and 50 mΩ.
pub fn switch_factor_sweep() -> SweepSpec {
    SweepSpec {
        delta_values: vec![0.5, 1.0, 2.0],
        ..reference_sweep()
    }
}
