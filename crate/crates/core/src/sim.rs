//! The simulation loop: profile lookup, balancer controller, current split and
//! cell updates, once per timestep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::balancer::{self, BalancerConfig, BalancerState, BalancerStep, Status};
use crate::cell;
use crate::error::{Error, Result};
use crate::pack::{self, PackConfig, PackState};
use crate::profile::CurrentProfile;
use crate::trace::{SimTrace, TraceRow, REST_CURRENT};

/// Initial per-cell state of charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSoc {
    /// Every cell at the same SoC.
    Uniform { value: f64 },
    /// `base` plus a seeded uniform offset in `[-half_width, half_width]`.
    Random {
        base: f64,
        half_width: f64,
        /// Set from the run seed, not read from config files.
        #[serde(skip)]
        seed: u64,
    },
    /// One value per cell, string-major.
    Explicit { values: Vec<f64> },
}

impl InitialSoc {
    pub fn resolve(&self, n_cells: usize) -> Result<Vec<f64>> {
        let socs = match self {
            InitialSoc::Uniform { value } => vec![*value; n_cells],
            InitialSoc::Random {
                base,
                half_width,
                seed,
            } => {
                if !(*half_width >= 0.0) {
                    return Err(Error::config("initial SoC half_width must be >= 0"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n_cells)
                    .map(|_| {
                        if *half_width > 0.0 {
                            base + rng.gen_range(-half_width..=*half_width)
                        } else {
                            *base
                        }
                    })
                    .collect()
            }
            InitialSoc::Explicit { values } => {
                if values.len() != n_cells {
                    return Err(Error::config(format!(
                        "{} explicit initial SoC values for {} cells",
                        values.len(),
                        n_cells
                    )));
                }
                values.clone()
            }
        };
        Ok(socs)
    }
}

/// Everything that defines one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pack: PackConfig,
    pub initial_soc: Vec<f64>,
    pub profile: CurrentProfile,
    /// `None` runs the pack without an equalizer.
    pub balancer: Option<BalancerConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    /// Record every n-th step (the first and last states are always kept).
    pub record_every: u64,
    /// Simulated span in seconds; the profile is extended at zero current if
    /// this is longer than it. `None` runs exactly the profile.
    pub horizon: Option<f64>,
    /// Stop once the balancer has reported a balanced pack at rest for this
    /// many seconds.
    pub stop_after_balanced: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 0.1,
            record_every: 10,
            horizon: None,
            stop_after_balanced: None,
        }
    }
}

/// What an observer sees after each step.
pub struct StepView<'a> {
    pub step: u64,
    pub pack_current: f64,
    pub state: &'a PackState,
    pub balancer: Option<&'a BalancerStep>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: SimTrace,
    pub final_state: PackState,
    pub steps: u64,
    /// Largest `|Σα − I| / max(1, |I|)` over all steps.
    pub max_kcl_residual: f64,
    /// True if the run ended early on a sustained balanced pack.
    pub stopped_balanced: bool,
}

pub fn simulate(scenario: &Scenario, opts: &SimOptions) -> Result<SimOutput> {
    simulate_with(scenario, opts, |_| {})
}

pub fn validate(scenario: &Scenario, opts: &SimOptions) -> Result<()> {
    scenario.pack.validate()?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::config(format!("timestep {} s must be > 0", opts.dt)));
    }
    if opts.record_every == 0 {
        return Err(Error::config("record_every must be >= 1"));
    }
    if let Some(b) = &scenario.balancer {
        b.validate()?;
        b.check_timestep(opts.dt)?;
        if scenario.pack.n_cells() < 2 {
            return Err(Error::config("balancing needs at least two cells"));
        }
    }
    Ok(())
}

/// Runs a scenario, calling `observer` after every step.
pub fn simulate_with<F>(scenario: &Scenario, opts: &SimOptions, mut observer: F) -> Result<SimOutput>
where
    F: FnMut(&StepView<'_>),
{
    validate(scenario, opts)?;
    let cfg = &scenario.pack;
    let dt = opts.dt;
    let mut state = PackState::relaxed(cfg, &scenario.initial_soc)?;

    let span = opts
        .horizon
        .map_or(scenario.profile.duration(), |h| h.max(scenario.profile.duration()));
    let n_steps = (span / dt - 1e-9).ceil().max(0.0) as u64;
    let rest_from = scenario.profile.rest_onset().unwrap_or(scenario.profile.duration());

    let mut bal = scenario.balancer.as_ref().map(BalancerState::new);
    let mut trace = SimTrace::new(cfg.n_strings, cfg.cells_per_string);
    let mut source_energy = 0.0;
    let mut loss_energy = 0.0;

    trace
        .rows
        .push(snapshot(&state, cfg, scenario.profile.current_at(0.0), dt, bal.as_ref(), 0.0, 0.0, 0.0)?);

    let mut max_kcl: f64 = 0.0;
    let mut balanced_since: Option<f64> = None;
    let mut stopped_balanced = false;
    let mut steps = 0;

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let current = scenario.profile.current_at(t);

        let bstep = match (&scenario.balancer, &bal) {
            (Some(bcfg), Some(b)) => Some(balancer::balancer_step(b, bcfg, &state, cfg, dt, current)?),
            _ => None,
        };
        let injections = bstep.as_ref().map_or(&[][..], |b| &b.injections[..]);
        let mut next = pack::step_pack(&state, cfg, current, dt, injections)?;
        next.time = (k + 1) as f64 * dt;

        let residual = (next.alpha.iter().sum::<f64>() - current).abs() / current.abs().max(1.0);
        max_kcl = max_kcl.max(residual);

        if let Some(b) = &bstep {
            bal = Some(b.state);
            source_energy += b.source_energy;
            loss_energy += b.loss_energy;
            trace.events.extend_from_slice(&b.events);
        }
        steps = k + 1;

        observer(&StepView {
            step: k,
            pack_current: current,
            state: &next,
            balancer: bstep.as_ref(),
        });

        if let (Some(hold), Some(b)) = (opts.stop_after_balanced, &bstep) {
            if t >= rest_from && b.status == Status::Balanced {
                let since = *balanced_since.get_or_insert(t);
                stopped_balanced = next.time - since >= hold;
            } else {
                balanced_since = None;
            }
        }

        let last = k + 1 == n_steps || stopped_balanced;
        let t_next = next.time;
        let goes_to_rest = current.abs() > REST_CURRENT
            && scenario.profile.current_at(t_next).abs() <= REST_CURRENT;
        if (k + 1) % opts.record_every == 0 || last || goes_to_rest {
            trace.rows.push(snapshot(
                &next,
                cfg,
                scenario.profile.current_at(t_next),
                dt,
                bal.as_ref(),
                bstep.as_ref().map_or(0.0, BalancerStep::loop_current),
                source_energy,
                loss_energy,
            )?);
        }
        state = next;
        if stopped_balanced {
            break;
        }
    }

    Ok(SimOutput {
        trace,
        final_state: state,
        steps,
        max_kcl_residual: max_kcl,
        stopped_balanced,
    })
}

/// Trace row for the pack at `state.time`: the split of `current` with the
/// balancer disconnected and the terminal voltages under it.
#[allow(clippy::too_many_arguments)]
fn snapshot(
    state: &PackState,
    cfg: &PackConfig,
    current: f64,
    dt: f64,
    bal: Option<&BalancerState>,
    i_c: f64,
    source_energy: f64,
    loss_energy: f64,
) -> Result<TraceRow> {
    let split = pack::current_split(state, cfg, current, dt, &[])?;
    let currents: Vec<f64> = cfg.indices().map(|c| split.alpha[c.string]).collect();
    Ok(TraceRow {
        time: state.time,
        z: state.socs().collect(),
        v: terminal_voltages(state, cfg, &currents)?,
        alpha: split.alpha,
        v_cap: bal.map_or(0.0, |b| b.v_cap),
        i_c,
        target: bal.and_then(|b| b.target),
        source_energy,
        loss_energy,
    })
}

fn terminal_voltages(state: &PackState, cfg: &PackConfig, currents: &[f64]) -> Result<Vec<f64>> {
    state
        .cells
        .iter()
        .zip(&cfg.cells)
        .zip(currents)
        .map(|((s, p), &i)| cell::terminal_voltage(s, p, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellParams;

    #[test]
    fn initial_soc_variants() {
        assert_eq!(InitialSoc::Uniform { value: 0.6 }.resolve(3).unwrap(), vec![0.6; 3]);
        let r = InitialSoc::Random {
            base: 0.6,
            half_width: 0.02,
            seed: 1,
        };
        let a = r.resolve(12).unwrap();
        assert_eq!(a, r.resolve(12).unwrap());
        assert!(a.iter().all(|z| (z - 0.6).abs() <= 0.02));
        assert!(InitialSoc::Explicit { values: vec![0.5; 2] }.resolve(3).is_err());
    }

    #[test]
    fn rest_without_balancer_is_static() {
        let pack = PackConfig::uniform(2, 2, CellParams::default());
        let sc = Scenario {
            pack,
            initial_soc: vec![0.6; 4],
            profile: CurrentProfile::rest(10.0),
            balancer: None,
        };
        let out = simulate(&sc, &SimOptions::default()).unwrap();
        assert_eq!(out.steps, 100);
        assert_eq!(out.trace.rows.len(), 11);
        assert!(out.final_state.cells.iter().all(|c| c.z == 0.6));
        assert!(out.trace.events.is_empty());
    }

    #[test]
    fn rejects_coarse_timestep() {
        let pack = PackConfig::uniform(1, 2, CellParams::default());
        let sc = Scenario {
            pack,
            initial_soc: vec![0.6, 0.7],
            profile: CurrentProfile::rest(10.0),
            balancer: Some(BalancerConfig::new(1.0, 0.05, 0.5)),
        };
        let opts = SimOptions {
            dt: 0.1,
            ..SimOptions::default()
        };
        assert!(matches!(simulate(&sc, &opts), Err(Error::Config(_))));
    }
}
