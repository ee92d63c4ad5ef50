//! Flying-capacitor equalizer.
//!
//! A single capacitor `C` behind a resistor `R` is switched across one cell at
//! a time. The controller alternates two legs: charge the capacitor from the
//! highest-SoC cell, then discharge it into the lowest-SoC cell. Each
//! connection lasts `δ·R·C` seconds and the extremes are re-selected at every
//! leg boundary. Balancing only runs while the pack is at rest.
//!
//! Within a connection the loop is a plain RC circuit driven by the cell's
//! terminal voltage `v_b`, so currents, capacitor voltage, transferred charge
//! and resistive loss all have closed forms.

use serde::{Deserialize, Serialize};

use crate::cell;
use crate::error::{Error, Result};
use crate::pack::{CellIndex, Injection, PackConfig, PackState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancerConfig {
    /// Farads.
    pub cap: f64,
    /// Ohms.
    pub res: f64,
    /// Connection length as a multiple of `res·cap`.
    pub switch_factor: f64,
    /// Spread at or above which an idle balancer starts.
    #[serde(default = "defaults::soc_threshold")]
    pub soc_threshold: f64,
    /// A running balancer stops once the spread is below
    /// `soc_threshold - release_margin`.
    #[serde(default = "defaults::release_margin")]
    pub release_margin: f64,
    #[serde(default)]
    pub v_cap_init: f64,
    /// Optional limit on the loop current magnitude (A).
    #[serde(default)]
    pub inrush_limit: Option<f64>,
    /// Disconnected interval between two connections (s).
    #[serde(default = "defaults::dead_time")]
    pub dead_time: f64,
    /// Pack currents at or below this magnitude count as no load (A).
    #[serde(default = "defaults::no_load_threshold")]
    pub no_load_threshold: f64,
}

mod defaults {
    pub fn soc_threshold() -> f64 {
        0.02
    }
    pub fn release_margin() -> f64 {
        1e-3
    }
    pub fn dead_time() -> f64 {
        0.1
    }
    pub fn no_load_threshold() -> f64 {
        1e-3
    }
}

impl BalancerConfig {
    pub fn new(cap: f64, res: f64, switch_factor: f64) -> Self {
        BalancerConfig {
            cap,
            res,
            switch_factor,
            soc_threshold: defaults::soc_threshold(),
            release_margin: defaults::release_margin(),
            v_cap_init: 0.0,
            inrush_limit: None,
            dead_time: defaults::dead_time(),
            no_load_threshold: defaults::no_load_threshold(),
        }
    }

    pub fn release_level(&self) -> f64 {
        self.soc_threshold - self.release_margin
    }

    pub fn time_constant(&self) -> f64 {
        self.res * self.cap
    }

    pub fn phase_duration(&self) -> f64 {
        self.switch_factor * self.res * self.cap
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cap > 0.0 && self.res > 0.0 && self.switch_factor > 0.0) {
            return Err(Error::config(
                "balancer cap, res and switch_factor must all be > 0",
            ));
        }
        if !(self.soc_threshold > 0.0 && self.soc_threshold < 1.0) {
            return Err(Error::config("balancer soc_threshold must lie in (0, 1)"));
        }
        if !(self.release_margin >= 0.0 && self.release_margin < self.soc_threshold) {
            return Err(Error::config(
                "balancer release_margin must lie in [0, soc_threshold)",
            ));
        }
        if !self.v_cap_init.is_finite() {
            return Err(Error::config("balancer v_cap_init must be finite"));
        }
        if let Some(limit) = self.inrush_limit {
            if !(limit > 0.0) {
                return Err(Error::config("balancer inrush_limit must be > 0"));
            }
        }
        if !(self.dead_time >= 0.0) || !(self.no_load_threshold >= 0.0) {
            return Err(Error::config(
                "balancer dead_time and no_load_threshold must be >= 0",
            ));
        }
        Ok(())
    }

    /// The timestep must resolve one connection.
    pub fn check_timestep(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::config(format!("timestep {dt} s must be > 0")));
        }
        let period = self.phase_duration();
        if dt > period {
            return Err(Error::config(format!(
                "timestep {dt} s exceeds the switch period δ·R·C = {period} s"
            )));
        }
        Ok(())
    }
}

/// Which way charge moves during a connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    ChargingFromMax,
    DischargingIntoMin,
}

impl Leg {
    fn other(self) -> Leg {
        match self {
            Leg::ChargingFromMax => Leg::DischargingIntoMin,
            Leg::DischargingIntoMin => Leg::ChargingFromMax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Connected(Leg),
    /// Between connections; the next target is already chosen.
    Switching(Leg),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancerState {
    pub v_cap: f64,
    /// Present iff `phase` is not `Idle`.
    pub target: Option<CellIndex>,
    pub phase: Phase,
    pub phase_elapsed: f64,
    pub v_cap_at_phase_start: f64,
}

impl BalancerState {
    pub fn new(cfg: &BalancerConfig) -> Self {
        BalancerState {
            v_cap: cfg.v_cap_init,
            target: None,
            phase: Phase::Idle,
            phase_elapsed: 0.0,
            v_cap_at_phase_start: cfg.v_cap_init,
        }
    }

    fn idle(self) -> Self {
        BalancerState {
            target: None,
            phase: Phase::Idle,
            phase_elapsed: 0.0,
            v_cap_at_phase_start: self.v_cap,
            ..self
        }
    }

    fn connect(self, leg: Leg, target: CellIndex) -> Self {
        BalancerState {
            target: Some(target),
            phase: Phase::Connected(leg),
            phase_elapsed: 0.0,
            v_cap_at_phase_start: self.v_cap,
            ..self
        }
    }
}

/// The capacitor moved from one cell to another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub time: f64,
    pub from_cell: CellIndex,
    pub to_cell: CellIndex,
    pub v_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Pack under load; balancing suspended.
    Blocked,
    /// SoC spread below threshold; nothing to do.
    Balanced,
    Active,
}

/// Result of one controller step.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancerStep {
    pub state: BalancerState,
    /// Step-averaged currents drawn from connected cells.
    pub injections: Vec<Injection>,
    pub events: Vec<SwitchEvent>,
    pub status: Status,
    /// Energy drawn from source cells on charging legs (J).
    pub source_energy: f64,
    /// Energy dissipated in the balancing resistor (J).
    pub loss_energy: f64,
}

impl BalancerStep {
    /// Net current out of the connected cells into the capacitor, averaged
    /// over the step.
    pub fn loop_current(&self) -> f64 {
        self.injections.iter().map(|i| i.current).sum()
    }
}

/// Cells with maximum and minimum SoC; ties go to the lowest (string, pos).
pub fn select_extreme_cells(pack: &PackState, config: &PackConfig) -> (CellIndex, CellIndex) {
    let mut max = 0;
    let mut min = 0;
    for (k, c) in pack.cells.iter().enumerate() {
        if c.z > pack.cells[max].z {
            max = k;
        }
        if c.z < pack.cells[min].z {
            min = k;
        }
    }
    (config.index(max), config.index(min))
}

pub fn soc_spread(pack: &PackState) -> f64 {
    let (lo, hi) = pack
        .socs()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

pub fn is_balanced(pack: &PackState, threshold: f64) -> bool {
    soc_spread(pack) < threshold
}

/// Loop current `t_in_phase` seconds into a connection. Positive current flows
/// out of the cell into the capacitor.
pub fn capacitor_current(v_b: f64, v_cap_start: f64, res: f64, cap: f64, t_in_phase: f64) -> f64 {
    (v_b - v_cap_start) / res * (-t_in_phase / (res * cap)).exp()
}

pub fn capacitor_voltage_update(
    v_cap_start: f64,
    v_b: f64,
    res: f64,
    cap: f64,
    t_in_phase: f64,
) -> f64 {
    v_b - (v_b - v_cap_start) * (-t_in_phase / (res * cap)).exp()
}

/// Outcome of holding one connection for a fixed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub v_cap_end: f64,
    /// Charge that left the cell (C); equals `cap·(v_cap_end − v_cap_start)`.
    pub charge: f64,
    /// Energy dissipated in the resistor (J).
    pub loss: f64,
}

/// Closed-form connection of a capacitor at `v_cap` to a source at `v_b` for
/// `duration` seconds, optionally current-limited to `limit` amps.
pub fn transfer(v_b: f64, v_cap: f64, res: f64, cap: f64, duration: f64, limit: Option<f64>) -> Transfer {
    let gap = v_b - v_cap;
    if let Some(limit) = limit {
        if gap.abs() > limit * res {
            let sign = gap.signum();
            let t_sat = cap * (gap.abs() - limit * res) / limit;
            if t_sat >= duration {
                let charge = sign * limit * duration;
                return Transfer {
                    v_cap_end: v_cap + charge / cap,
                    charge,
                    loss: limit * limit * res * duration,
                };
            }
            let v_mid = v_b - sign * limit * res;
            let tail = transfer(v_b, v_mid, res, cap, duration - t_sat, None);
            return Transfer {
                v_cap_end: tail.v_cap_end,
                charge: tail.charge + sign * limit * t_sat,
                loss: tail.loss + limit * limit * res * t_sat,
            };
        }
    }
    let v_end = capacitor_voltage_update(v_cap, v_b, res, cap, duration);
    let gap_end = v_b - v_end;
    Transfer {
        v_cap_end: v_end,
        charge: cap * (v_end - v_cap),
        loss: 0.5 * cap * (gap - gap_end) * (gap + gap_end),
    }
}

/// Advances the controller and the capacitor over one pack timestep.
///
/// The pack is read at the start of the step; cell terminal voltages use the
/// string currents of the previous step and are held for the whole step. A
/// connection boundary may fall inside the step, in which case the step is
/// split and more than one cell can receive an injection.
pub fn balancer_step(
    bal: &BalancerState,
    cfg: &BalancerConfig,
    pack: &PackState,
    pack_cfg: &PackConfig,
    dt: f64,
    pack_current: f64,
) -> Result<BalancerStep> {
    let mut out = BalancerStep {
        state: *bal,
        injections: Vec::new(),
        events: Vec::new(),
        status: Status::Active,
        source_energy: 0.0,
        loss_energy: 0.0,
    };

    if pack_current.abs() > cfg.no_load_threshold {
        out.state = bal.idle();
        out.status = Status::Blocked;
        return Ok(out);
    }

    let period = cfg.phase_duration();
    let mut st = *bal;
    let mut remaining = dt;
    let mut charge_by_cell: Vec<(CellIndex, f64)> = Vec::new();

    // slivers left by rounding at a boundary are not worth a segment
    let sliver = 1e-9 * dt;
    while remaining > sliver {
        match st.phase {
            Phase::Idle => {
                if is_balanced(pack, cfg.soc_threshold) {
                    out.status = Status::Balanced;
                    break;
                }
                let (max, _) = select_extreme_cells(pack, pack_cfg);
                st = st.connect(Leg::ChargingFromMax, max);
            }
            Phase::Switching(leg) => {
                let left = cfg.dead_time - st.phase_elapsed;
                let done = remaining >= left - sliver;
                let seg = if done { left.max(0.0) } else { remaining };
                st.phase_elapsed = if done { cfg.dead_time } else { st.phase_elapsed + seg };
                remaining -= seg;
                if done {
                    let target = st.target.expect("switching without a target");
                    st = st.connect(leg, target);
                }
            }
            Phase::Connected(leg) => {
                let target = st.target.expect("connected without a target");
                let left = period - st.phase_elapsed;
                let done = remaining >= left - sliver;
                let seg = if done { left.max(0.0) } else { remaining };
                let v_b = {
                    let p = pack_cfg.cell(target);
                    cell::terminal_voltage(pack.cell(pack_cfg, target), p, pack.alpha[target.string])?
                };
                let tr = transfer(v_b, st.v_cap, cfg.res, cfg.cap, seg, cfg.inrush_limit);
                match charge_by_cell.iter_mut().find(|(c, _)| *c == target) {
                    Some((_, q)) => *q += tr.charge,
                    None => charge_by_cell.push((target, tr.charge)),
                }
                if leg == Leg::ChargingFromMax {
                    out.source_energy += v_b * tr.charge;
                }
                out.loss_energy += tr.loss;
                st.v_cap = tr.v_cap_end;
                st.phase_elapsed = if done { period } else { st.phase_elapsed + seg };
                remaining -= seg;

                if done {
                    let time = pack.time + (dt - remaining);
                    if is_balanced(pack, cfg.release_level()) {
                        st = st.idle();
                        out.status = Status::Balanced;
                        break;
                    }
                    let next_leg = leg.other();
                    let (max, min) = select_extreme_cells(pack, pack_cfg);
                    let next = match next_leg {
                        Leg::ChargingFromMax => max,
                        Leg::DischargingIntoMin => min,
                    };
                    if next != target {
                        out.events.push(SwitchEvent {
                            time,
                            from_cell: target,
                            to_cell: next,
                            v_cap: st.v_cap,
                        });
                    }
                    st = if cfg.dead_time > 0.0 {
                        BalancerState {
                            target: Some(next),
                            phase: Phase::Switching(next_leg),
                            phase_elapsed: 0.0,
                            ..st
                        }
                    } else {
                        st.connect(next_leg, next)
                    };
                }
            }
        }
    }

    out.injections = charge_by_cell
        .into_iter()
        .map(|(cell, q)| Injection {
            cell,
            current: q / dt,
        })
        .collect();
    out.state = st;
    Ok(out)
}
