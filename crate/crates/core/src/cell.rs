//! Single-cell equivalent-circuit model.
//!
//! A cell is an open-circuit voltage source driven by its state of charge, in
//! series with an ohmic resistance `r0` and two parallel RC branches. Current
//! is positive when the cell discharges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance before an out-of-range state of charge becomes a fault.
pub const SOC_EPSILON: f64 = 1e-6;

/// Coefficients of the double-exponential open-circuit voltage curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcvParams {
    pub v0: f64,
    pub alpha_o: f64,
    pub beta_o: f64,
    pub gamma_o: f64,
    pub zeta_o: f64,
    pub epsilon_o: f64,
}

impl Default for OcvParams {
    fn default() -> Self {
        OcvParams {
            v0: 2.9,
            alpha_o: 0.2,
            beta_o: 10.0,
            gamma_o: 0.3,
            zeta_o: 0.2,
            epsilon_o: 0.05,
        }
    }
}

impl OcvParams {
    /// Accepts only coefficient sets whose curve is finite and strictly
    /// increasing on (0, 1).
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.v0,
            self.alpha_o,
            self.beta_o,
            self.gamma_o,
            self.zeta_o,
            self.epsilon_o,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("OCV coefficients must be finite"));
        }
        if self.beta_o <= 0.0 || self.epsilon_o <= 0.0 {
            return Err(Error::config("OCV beta_o and epsilon_o must be > 0"));
        }
        if self.alpha_o < 0.0 || self.gamma_o < 0.0 || self.zeta_o < 0.0 {
            return Err(Error::config(
                "OCV alpha_o, gamma_o and zeta_o must be >= 0",
            ));
        }
        if self.alpha_o == 0.0 && self.gamma_o == 0.0 && self.zeta_o == 0.0 {
            return Err(Error::config("OCV curve must depend on state of charge"));
        }
        Ok(())
    }
}

/// Static electrical characteristics of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellParams {
    pub r0: f64,
    pub r1: f64,
    /// Rate of the first RC branch, 1/(R1·C1).
    pub beta1: f64,
    pub r2: f64,
    pub beta2: f64,
    /// Ampere-hours.
    pub capacity: f64,
    pub ocv: OcvParams,
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            r0: 0.05,
            r1: 0.02,
            beta1: 0.1,
            r2: 0.01,
            beta2: 0.01,
            capacity: 10.0,
            ocv: OcvParams::default(),
        }
    }
}

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 >= 0.0 && self.r1 >= 0.0 && self.r2 >= 0.0) {
            return Err(Error::config("cell resistances must be >= 0"));
        }
        if !(self.beta1 > 0.0 && self.beta2 > 0.0) {
            return Err(Error::config("cell RC rates beta1, beta2 must be > 0"));
        }
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::config("cell capacity must be > 0"));
        }
        self.ocv.validate()
    }

    /// Scales `r0`, `r1`, `r2` and `capacity` by independent factors drawn
    /// uniformly from `[1 - spread, 1 + spread]`.
    pub fn perturbed<R: Rng + ?Sized>(&self, rng: &mut R, spread: f64) -> CellParams {
        let mut factor = || {
            if spread > 0.0 {
                rng.gen_range(1.0 - spread..=1.0 + spread)
            } else {
                1.0
            }
        };
        CellParams {
            r0: self.r0 * factor(),
            r1: self.r1 * factor(),
            r2: self.r2 * factor(),
            capacity: self.capacity * factor(),
            ..*self
        }
    }

    /// Voltage drop across the series resistance and both RC branches when a
    /// constant current is held for `horizon` seconds from relaxed branches.
    pub fn step_resistance(&self, horizon: f64) -> f64 {
        self.r0
            + self.r1 * (1.0 - (-self.beta1 * horizon).exp())
            + self.r2 * (1.0 - (-self.beta2 * horizon).exp())
    }
}

/// Dynamic state of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub z: f64,
    pub vc1: f64,
    pub vc2: f64,
}

impl CellState {
    /// A relaxed cell at the given state of charge.
    pub fn relaxed(z: f64) -> Self {
        CellState {
            z,
            vc1: 0.0,
            vc2: 0.0,
        }
    }
}

pub fn open_circuit_voltage(z: f64, p: &OcvParams) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::SocDomain { z });
    }
    Ok(p.v0
        + p.alpha_o * (1.0 - (-p.beta_o * z).exp())
        + p.gamma_o * z
        + p.zeta_o * (1.0 - (-p.epsilon_o / (1.0 - z)).exp()))
}

/// Coulomb-counted SoC after `dt` seconds at constant current `i_b`.
///
/// Results within `epsilon` outside `[0, 1]` are saturated; anything further
/// out is returned as the raw value in `Err`.
pub fn soc_step(z: f64, i_b: f64, dt: f64, capacity: f64, epsilon: f64) -> Result<f64, f64> {
    let next = z - i_b * dt / (3600.0 * capacity);
    if (0.0..=1.0).contains(&next) {
        Ok(next)
    } else if next >= -epsilon && next <= 1.0 + epsilon {
        Ok(next.clamp(0.0, 1.0))
    } else {
        Err(next)
    }
}

/// Exact update of one RC branch voltage under constant current over `dt`.
pub fn rc_branch_step(vck: f64, i_b: f64, dt: f64, rk: f64, betak: f64) -> f64 {
    let decay = (-betak * dt).exp();
    vck * decay + rk * i_b * (1.0 - decay)
}

pub fn terminal_voltage(s: &CellState, p: &CellParams, i_b: f64) -> Result<f64> {
    Ok(open_circuit_voltage(s.z, &p.ocv)? - i_b * p.r0 - s.vc1 - s.vc2)
}

/// Advances a cell by `dt` seconds at constant current `i_b`.
pub fn advance_cell(
    s: &CellState,
    p: &CellParams,
    i_b: f64,
    dt: f64,
    epsilon: f64,
) -> Result<CellState, f64> {
    Ok(CellState {
        z: soc_step(s.z, i_b, dt, p.capacity, epsilon)?,
        vc1: rc_branch_step(s.vc1, i_b, dt, p.r1, p.beta1),
        vc2: rc_branch_step(s.vc2, i_b, dt, p.r2, p.beta2),
    })
}
