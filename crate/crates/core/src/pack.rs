//! Parallel/series pack: `n` strings in parallel, each of `m` cells in series.
//!
//! Every timestep the commanded pack current is divided among the strings so
//! that all string terminal voltages agree at the end of the step and the
//! string currents sum to the pack current. String `i` presents itself to the
//! split as a Thevenin pair `(Γ_i, Φ_i)` with terminal voltage `Γ_i − Φ_i·α_i`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{self, CellParams, CellState, SOC_EPSILON};
use crate::error::{Error, Result};

/// Position of a cell: `string` in `0..n`, `pos` in `0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub string: usize,
    pub pos: usize,
}

impl CellIndex {
    pub fn new(string: usize, pos: usize) -> Self {
        CellIndex { string, pos }
    }

    /// One-based battery label in string-major order (B1, B2, ...).
    pub fn label(&self, cells_per_string: usize) -> String {
        format!("B{}", self.string * cells_per_string + self.pos + 1)
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.string, self.pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackConfig {
    pub n_strings: usize,
    pub cells_per_string: usize,
    /// String-major grid of cell parameters.
    pub cells: Vec<CellParams>,
    pub rng_seed: u64,
}

impl PackConfig {
    pub fn uniform(n_strings: usize, cells_per_string: usize, base: CellParams) -> Self {
        PackConfig {
            n_strings,
            cells_per_string,
            cells: vec![base; n_strings * cells_per_string],
            rng_seed: 0,
        }
    }

    /// Every cell is `base` with independent multiplicative perturbations of
    /// its resistances and capacity (see [`CellParams::perturbed`]).
    pub fn perturbed(
        n_strings: usize,
        cells_per_string: usize,
        base: CellParams,
        spread: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (0..n_strings * cells_per_string)
            .map(|_| base.perturbed(&mut rng, spread))
            .collect();
        PackConfig {
            n_strings,
            cells_per_string,
            cells,
            rng_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_strings == 0 || self.cells_per_string == 0 {
            return Err(Error::config("pack needs at least one string of one cell"));
        }
        if self.cells.len() != self.n_strings * self.cells_per_string {
            return Err(Error::config(format!(
                "pack grid is {}x{} but {} cell parameter sets were given",
                self.n_strings,
                self.cells_per_string,
                self.cells.len()
            )));
        }
        self.cells.iter().try_for_each(CellParams::validate)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn flat(&self, idx: CellIndex) -> usize {
        idx.string * self.cells_per_string + idx.pos
    }

    pub fn index(&self, flat: usize) -> CellIndex {
        CellIndex::new(flat / self.cells_per_string, flat % self.cells_per_string)
    }

    pub fn cell(&self, idx: CellIndex) -> &CellParams {
        &self.cells[self.flat(idx)]
    }

    pub fn string(&self, i: usize) -> &[CellParams] {
        let m = self.cells_per_string;
        &self.cells[i * m..(i + 1) * m]
    }

    pub fn indices(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.n_cells()).map(|k| self.index(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackState {
    /// String-major grid, same layout as [`PackConfig::cells`].
    pub cells: Vec<CellState>,
    pub time: f64,
    /// String currents applied over the most recent step.
    pub alpha: Vec<f64>,
}

impl PackState {
    /// Relaxed pack with the given per-cell SoC (string-major).
    pub fn relaxed(config: &PackConfig, soc: &[f64]) -> Result<Self> {
        if soc.len() != config.n_cells() {
            return Err(Error::config(format!(
                "{} initial SoC values for a pack of {} cells",
                soc.len(),
                config.n_cells()
            )));
        }
        if let Some(z) = soc.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
            return Err(Error::config(format!(
                "initial SoC {z} is outside (0, 1)"
            )));
        }
        Ok(PackState {
            cells: soc.iter().map(|&z| CellState::relaxed(z)).collect(),
            time: 0.0,
            alpha: vec![0.0; config.n_strings],
        })
    }

    pub fn cell(&self, config: &PackConfig, idx: CellIndex) -> &CellState {
        &self.cells[config.flat(idx)]
    }

    pub fn socs(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSplit {
    pub alpha: Vec<f64>,
}

impl CurrentSplit {
    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Balancer current drawn from one cell, averaged over the step (A, positive
/// discharges the cell).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub cell: CellIndex,
    pub current: f64,
}

/// Effective series resistance of string `i` for a current held for
/// `t_since_load_change` seconds from relaxed branches.
pub fn string_phi(string_index: usize, config: &PackConfig, t_since_load_change: f64) -> f64 {
    config
        .string(string_index)
        .iter()
        .map(|p| p.step_resistance(t_since_load_change))
        .sum()
}

/// Open-circuit part of string `i`'s terminal voltage `horizon` seconds ahead:
/// the OCVs less the RC branch voltages, each decayed over the horizon.
pub fn string_gamma(
    string_index: usize,
    state: &PackState,
    config: &PackConfig,
    horizon: f64,
) -> Result<f64> {
    let m = config.cells_per_string;
    let params = config.string(string_index);
    let states = &state.cells[string_index * m..(string_index + 1) * m];
    params.iter().zip(states).try_fold(0.0, |acc, (p, s)| {
        let e = cell::open_circuit_voltage(s.z, &p.ocv)?;
        Ok(acc - s.vc1 * (-p.beta1 * horizon).exp() - s.vc2 * (-p.beta2 * horizon).exp() + e)
    })
}

/// Solves for the string currents: rows `0..n-1` equate neighbouring string
/// voltages, `Φ_i α_i − Φ_{i+1} α_{i+1} = Γ_i − Γ_{i+1}`, and the last row is
/// Kirchhoff's current law `Σ α = I`.
pub fn solve_current_split(phis: &[f64], gammas: &[f64], total_current: f64) -> Result<CurrentSplit> {
    let n = phis.len();
    if n == 0 || gammas.len() != n {
        return Err(Error::SingularSystem {
            reason: format!("{} resistances and {} voltages", n, gammas.len()),
        });
    }
    if phis.iter().chain(gammas).any(|v| !v.is_finite()) || !total_current.is_finite() {
        return Err(Error::SingularSystem {
            reason: "non-finite string resistance or voltage".into(),
        });
    }
    if n == 1 {
        return Ok(CurrentSplit {
            alpha: vec![total_current],
        });
    }

    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n - 1 {
        a[i][i] = phis[i];
        a[i][i + 1] = -phis[i + 1];
        b[i] = gammas[i] - gammas[i + 1];
    }
    a[n - 1].iter_mut().for_each(|v| *v = 1.0);
    b[n - 1] = total_current;

    let alpha = solve_dense(a, b).ok_or_else(|| Error::SingularSystem {
        reason: format!("string resistances {phis:?}"),
    })?;
    Ok(CurrentSplit { alpha })
}

/// Gaussian elimination with partial pivoting. `None` when a pivot vanishes
/// relative to the largest matrix entry.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let tiny = scale * 1e-13;

    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[pivot][col].abs() <= tiny {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// The string split for one step of length `dt`, accounting for balancer
/// currents already committed on individual cells.
pub fn current_split(
    state: &PackState,
    config: &PackConfig,
    total_current: f64,
    dt: f64,
    injections: &[Injection],
) -> Result<CurrentSplit> {
    let n = config.n_strings;
    let phis: Vec<f64> = (0..n).map(|i| string_phi(i, config, dt)).collect();
    let mut gammas = (0..n)
        .map(|i| string_gamma(i, state, config, dt))
        .collect::<Result<Vec<f64>>>()?;
    for inj in injections {
        gammas[inj.cell.string] -= config.cell(inj.cell).step_resistance(dt) * inj.current;
    }
    solve_current_split(&phis, &gammas, total_current)
}

/// Advances the pack by `dt` seconds under a commanded pack current and any
/// balancer injections.
pub fn step_pack(
    state: &PackState,
    config: &PackConfig,
    total_current: f64,
    dt: f64,
    injections: &[Injection],
) -> Result<PackState> {
    let split = current_split(state, config, total_current, dt, injections)?;
    let time = state.time + dt;

    let mut currents: Vec<f64> = config
        .indices()
        .map(|idx| split.alpha[idx.string])
        .collect();
    for inj in injections {
        currents[config.flat(inj.cell)] += inj.current;
    }

    let cells = state
        .cells
        .iter()
        .zip(&config.cells)
        .zip(&currents)
        .enumerate()
        .map(|(k, ((s, p), &i_b))| {
            cell::advance_cell(s, p, i_b, dt, SOC_EPSILON).map_err(|z| Error::SocOutOfRange {
                cell: config.index(k),
                z,
                time,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PackState {
        cells,
        time,
        alpha: split.alpha,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn ref_cell() -> CellParams {
        CellParams::default()
    }

    fn three_by_four() -> PackConfig {
        PackConfig::uniform(3, 4, ref_cell())
    }

    #[test]
    fn phi_at_zero_is_series_resistance() {
        let cfg = three_by_four();
        assert_relative_eq!(string_phi(1, &cfg, 0.0), 4.0 * 0.05, epsilon = 1e-15);
    }

    #[test]
    fn phi_saturates() {
        let cfg = three_by_four();
        assert_relative_eq!(string_phi(0, &cfg, 1e6), 4.0 * 0.08, epsilon = 1e-12);
    }

    #[test]
    fn phi_after_ten_seconds() {
        let cfg = three_by_four();
        assert_relative_eq!(string_phi(2, &cfg, 10.0), 0.25437614798484626, epsilon = 1e-15);
    }

    #[test]
    fn gamma_of_relaxed_string_is_ocv_sum() {
        let cfg = three_by_four();
        let st = PackState::relaxed(&cfg, &[0.6; 12]).unwrap();
        let g = string_gamma(0, &st, &cfg, 0.1).unwrap();
        assert_relative_eq!(g, 4.0 * 3.303004869047748, epsilon = 1e-12);
    }

    #[test]
    fn gamma_tracks_branch_voltage() {
        let cfg = three_by_four();
        let mut st = PackState::relaxed(&cfg, &[0.6; 12]).unwrap();
        let before = string_gamma(0, &st, &cfg, 0.0).unwrap();
        st.cells[2].vc1 += 0.01;
        let after = string_gamma(0, &st, &cfg, 0.0).unwrap();
        assert_relative_eq!(before - after, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn identical_strings_share_equally() {
        let s = solve_current_split(&[0.3; 3], &[13.2; 3], 30.0).unwrap();
        for a in s.alpha {
            assert_relative_eq!(a, 10.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_string_takes_everything() {
        let s = solve_current_split(&[0.0], &[13.2], -7.5).unwrap();
        assert_eq!(s.alpha, vec![-7.5]);
    }

    #[test]
    fn no_load_mesh_current() {
        // 0.2·α1 − 0.3·α2 = 13.20 − 13.21, α1 + α2 = 0: the higher string
        // discharges into the lower one.
        let s = solve_current_split(&[0.2, 0.3], &[13.20, 13.21], 0.0).unwrap();
        assert_relative_eq!(s.alpha[0], -0.02, epsilon = 1e-12);
        assert_relative_eq!(s.alpha[1], 0.02, epsilon = 1e-12);
    }

    #[test]
    fn zero_resistance_strings_are_singular() {
        let err = solve_current_split(&[0.0, 0.0], &[13.2, 13.2], 1.0).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }));
        let err = solve_current_split(&[0.2, 0.0, 0.0], &[13.2; 3], 1.0).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }));
    }

    #[test]
    fn one_zero_resistance_string_is_solvable() {
        let s = solve_current_split(&[0.0, 0.2], &[13.2, 13.2], 3.0).unwrap();
        assert_relative_eq!(s.alpha[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.alpha[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rest_is_equilibrium() {
        let cfg = three_by_four();
        let st = PackState::relaxed(&cfg, &[0.6; 12]).unwrap();
        let next = step_pack(&st, &cfg, 0.0, 0.1, &[]).unwrap();
        assert_eq!(next.cells, st.cells);
        assert_relative_eq!(next.time, 0.1);
    }

    #[test]
    fn symmetric_load_step() {
        let cfg = three_by_four();
        let st = PackState::relaxed(&cfg, &[0.6; 12]).unwrap();
        let next = step_pack(&st, &cfg, 12.0, 0.1, &[]).unwrap();
        for c in &next.cells {
            assert_relative_eq!(0.6 - c.z, 4.0 * 0.1 / 36000.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn higher_string_discharges_into_the_others() {
        let mut ocv_hi = ref_cell();
        ocv_hi.ocv.v0 += 0.0025; // four cells: +10 mV on the string
        let mut cfg = three_by_four();
        for p in &mut cfg.cells[4..8] {
            *p = ocv_hi;
        }
        let st = PackState::relaxed(&cfg, &[0.6; 12]).unwrap();
        let next = step_pack(&st, &cfg, 0.0, 0.1, &[]).unwrap();
        assert!(next.alpha[1] > 0.0);
        assert!(next.alpha[0] < 0.0 && next.alpha[2] < 0.0);
        for k in 4..8 {
            assert!(next.cells[k].z < 0.6);
        }
        for k in (0..4).chain(8..12) {
            assert!(next.cells[k].z > 0.6);
        }
        let dq: f64 = next
            .cells
            .iter()
            .zip(&cfg.cells)
            .map(|(c, p)| p.capacity * (c.z - 0.6))
            .sum();
        assert!(dq.abs() < 1e-12);
    }

    #[test]
    fn injection_lowers_the_string_and_draws_mesh_current() {
        let cfg = three_by_four();
        let st = PackState::relaxed(&cfg, &[0.6; 12]).unwrap();
        let inj = [Injection {
            cell: CellIndex::new(0, 1),
            current: 1.0,
        }];
        let next = step_pack(&st, &cfg, 0.0, 0.1, &inj).unwrap();
        // the other strings push charge into the depressed one
        assert!(next.alpha[0] < 0.0);
        assert_relative_eq!(next.alpha.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        assert!(next.cells[1].z < next.cells[0].z);
    }

    #[test]
    fn soc_fault_names_the_cell() {
        let cfg = PackConfig::uniform(1, 2, ref_cell());
        let st = PackState::relaxed(&cfg, &[0.6, 0.01]).unwrap();
        let err = step_pack(&st, &cfg, 0.0, 1.0, &[Injection {
            cell: CellIndex::new(0, 1),
            current: 1000.0,
        }])
        .unwrap_err();
        match err {
            Error::SocOutOfRange { cell, .. } => assert_eq!(cell, CellIndex::new(0, 1)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn pack_validation() {
        assert!(three_by_four().validate().is_ok());
        let mut cfg = three_by_four();
        cfg.cells.pop();
        assert!(cfg.validate().is_err());
        assert!(PackConfig::uniform(0, 4, ref_cell()).validate().is_err());
    }

    #[test]
    fn labels_are_string_major() {
        assert_eq!(CellIndex::new(0, 0).label(4), "B1");
        assert_eq!(CellIndex::new(1, 0).label(4), "B5");
        assert_eq!(CellIndex::new(2, 3).label(4), "B12");
    }
}
