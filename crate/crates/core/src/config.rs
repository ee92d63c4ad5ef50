//! TOML run configuration.
//!
//! ```toml
//! seed = 7              # cell perturbation, random initial SoC, drive cycle
//! dt = 0.1              # s
//! record_every = 10     # trace row every n steps
//! out = "out/reference" # relative to the working directory
//!
//! [pack]
//! n_strings = 3
//! cells_per_string = 4
//! spread = 0.05         # ±5 % on r0, r1, r2 and capacity; 0 = identical cells
//! [pack.cell]           # any CellParams field; the rest keep their defaults
//! capacity = 10.0
//!
//! [initial_soc]
//! kind = "random"       # or "uniform" (value) / "explicit" (values)
//! base = 0.6
//! half_width = 0.02
//!
//! [profile]
//! kind = "drive_cycle"  # or "csv" (path, optional rest_hours) / "rest" (hours)
//! rest_hours = 12.0
//!
//! [balancer]            # omit to run without an equalizer
//! cap = 50.0
//! res = 0.05
//! switch_factor = 0.5
//!
//! [sweep]               # optional; each list defaults to the balancer value
//! cap_values = [20.0, 30.0, 50.0, 100.0, 150.0]
//!
//! [efficiency]          # optional two-cell study; every field has a default
//! res_values = [0.05, 0.1]
//! ```
//!
//! A CSV profile path is resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::balancer::BalancerConfig;
use crate::cell::CellParams;
use crate::error::{Error, Result};
use crate::pack::PackConfig;
use crate::profile::{load_profile, synth_drive_cycle, CurrentProfile, DriveCycle};
use crate::sim::{self, InitialSoc, Scenario, SimOptions};
use crate::sweep::{EfficiencyStudy, SweepSpec};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub pack: PackSpec,
    pub initial_soc: InitialSoc,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub balancer: Option<BalancerConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub efficiency: Option<EfficiencyStudy>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_dt() -> f64 {
    0.1
}

fn default_record_every() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackSpec {
    pub n_strings: usize,
    pub cells_per_string: usize,
    #[serde(default)]
    pub spread: f64,
    #[serde(default)]
    pub cell: CellParams,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    DriveCycle(DriveCycle),
    Csv {
        path: PathBuf,
        #[serde(default)]
        rest_hours: Option<f64>,
    },
    Rest {
        hours: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub cap_values: Option<Vec<f64>>,
    #[serde(default)]
    pub res_values: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_values: Option<Vec<f64>>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_max_sim_hours")]
    pub max_sim_hours: f64,
    #[serde(default = "default_settle_hold")]
    pub settle_hold_s: f64,
    #[serde(default = "default_sweep_record_every")]
    pub record_every: u64,
}

fn default_max_sim_hours() -> f64 {
    48.0
}

fn default_settle_hold() -> f64 {
    1800.0
}

fn default_sweep_record_every() -> u64 {
    100
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses a config from text; relative CSV paths resolve against the
    /// working directory.
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::Parse {
                path: PathBuf::from("<config>"),
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn pack(&self) -> Result<PackConfig> {
        let p = &self.pack;
        if !(p.spread >= 0.0 && p.spread < 1.0) {
            return Err(Error::config("pack spread must lie in [0, 1)"));
        }
        p.cell.validate()?;
        let pack = if p.spread > 0.0 {
            PackConfig::perturbed(p.n_strings, p.cells_per_string, p.cell, p.spread, self.seed)
        } else {
            PackConfig::uniform(p.n_strings, p.cells_per_string, p.cell)
        };
        pack.validate()?;
        Ok(pack)
    }

    pub fn initial_soc(&self, n_cells: usize) -> Result<Vec<f64>> {
        let spec = match &self.initial_soc {
            InitialSoc::Random {
                base, half_width, ..
            } => InitialSoc::Random {
                base: *base,
                half_width: *half_width,
                seed: self.seed,
            },
            other => other.clone(),
        };
        spec.resolve(n_cells)
    }

    pub fn profile(&self) -> Result<CurrentProfile> {
        match &self.profile {
            ProfileSpec::DriveCycle(cycle) => synth_drive_cycle(&DriveCycle {
                seed: self.seed,
                ..*cycle
            }),
            ProfileSpec::Csv { path, rest_hours } => {
                let p = load_profile(self.base_dir.join(path))?;
                match rest_hours {
                    Some(h) => p.with_rest(h * 3600.0),
                    None => Ok(p),
                }
            }
            ProfileSpec::Rest { hours } => {
                if !(*hours > 0.0) {
                    return Err(Error::config("rest profile hours must be > 0"));
                }
                Ok(CurrentProfile::rest(hours * 3600.0))
            }
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let pack = self.pack()?;
        let scenario = Scenario {
            initial_soc: self.initial_soc(pack.n_cells())?,
            pack,
            profile: self.profile()?,
            balancer: self.balancer,
        };
        sim::validate(&scenario, &self.options())?;
        Ok(scenario)
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt,
            record_every: self.record_every,
            horizon: None,
            stop_after_balanced: None,
        }
    }

    /// The `[sweep]` section over this config's scenario, if present.
    pub fn sweep_spec(&self) -> Result<Option<SweepSpec>> {
        let Some(section) = &self.sweep else {
            return Ok(None);
        };
        let balancer = self
            .balancer
            .ok_or_else(|| Error::config("a [sweep] section needs a [balancer] template"))?;
        let base = SweepSpec::new(self.scenario()?, balancer);
        let spec = SweepSpec {
            cap_values: section.cap_values.clone().unwrap_or(base.cap_values.clone()),
            res_values: section.res_values.clone().unwrap_or(base.res_values.clone()),
            delta_values: section.delta_values.clone().unwrap_or(base.delta_values.clone()),
            threshold: section.threshold.unwrap_or(base.threshold),
            max_sim_hours: section.max_sim_hours,
            settle_hold_s: section.settle_hold_s,
            record_every: section.record_every,
            dt: self.dt,
            ..base
        };
        spec.validate()?;
        Ok(Some(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [pack]
        n_strings = 1
        cells_per_string = 2
        [initial_soc]
        kind = "uniform"
        value = 0.6
        [profile]
        kind = "rest"
        hours = 1.0
    "#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.dt, 0.1);
        assert_eq!(cfg.seed, 0);
        assert!(cfg.balancer.is_none());
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.initial_soc, vec![0.6, 0.6]);
        assert_eq!(sc.profile.duration(), 3600.0);
    }

    #[test]
    fn unknown_key_names_the_line() {
        let text = format!("{MINIMAL}\n[balancer]\ncap = 1.0\nres = 0.1\nswitch_factor = 1.0\ncolour = 3\n");
        match RunConfig::parse(&text) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, text.lines().position(|l| l.starts_with("colour")).unwrap() as u64 + 1);
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seed_reaches_soc_and_profile() {
        let text = r#"
            seed = 3
            [pack]
            n_strings = 2
            cells_per_string = 2
            spread = 0.05
            [initial_soc]
            kind = "random"
            base = 0.6
            half_width = 0.02
            [profile]
            kind = "drive_cycle"
            rest_hours = 1.0
        "#;
        let a = RunConfig::parse(text).unwrap();
        let mut b = a.clone();
        b.seed = 4;
        let (sa, sb) = (a.scenario().unwrap(), b.scenario().unwrap());
        assert_ne!(sa.initial_soc, sb.initial_soc);
        assert_ne!(sa.profile, sb.profile);
        assert_ne!(sa.pack, sb.pack);
    }

    #[test]
    fn coarse_timestep_is_rejected() {
        let text = format!(
            "dt = 1.0\n{MINIMAL}\n[balancer]\ncap = 1.0\nres = 0.1\nswitch_factor = 1.0\n"
        );
        let err = RunConfig::parse(&text).unwrap().scenario().unwrap_err();
        assert!(err.to_string().contains("δ·R·C"), "{err}");
    }

    #[test]
    fn sweep_needs_a_balancer() {
        let text = format!("{MINIMAL}\n[sweep]\ncap_values = [1.0]\n");
        assert!(RunConfig::parse(&text).unwrap().sweep_spec().is_err());
    }
}
