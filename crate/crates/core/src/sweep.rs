//! Parameter sweeps over the balancer's capacitor, resistor and switching
//! factor. Every grid point is an independent simulation of the same
//! scenario; points run on a worker pool and come back in grid order.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Deserialize;

use crate::balancer::BalancerConfig;
use crate::cell::CellParams;
use crate::error::{Error, Result};
use crate::metrics::{self, Settling};
use crate::pack::PackConfig;
use crate::profile::CurrentProfile;
use crate::sim::{self, Scenario, SimOptions};

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub cap_values: Vec<f64>,
    pub res_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    /// Pack, profile and initial SoC; its balancer supplies every setting
    /// except `cap`, `res` and `switch_factor`.
    pub scenario: Scenario,
    pub balancer: BalancerConfig,
    pub threshold: f64,
    pub max_sim_hours: f64,
    pub dt: f64,
    pub record_every: u64,
    /// A point stops early once balanced at rest for this long (s).
    pub settle_hold_s: f64,
}

impl SweepSpec {
    pub fn new(scenario: Scenario, balancer: BalancerConfig) -> Self {
        SweepSpec {
            cap_values: vec![balancer.cap],
            res_values: vec![balancer.res],
            delta_values: vec![balancer.switch_factor],
            scenario,
            balancer,
            threshold: balancer.soc_threshold,
            max_sim_hours: 48.0,
            dt: 0.1,
            record_every: 100,
            settle_hold_s: 1800.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("cap_values", &self.cap_values),
            ("res_values", &self.res_values),
            ("delta_values", &self.delta_values),
        ] {
            if list.is_empty() {
                return Err(Error::config(format!("sweep {name} is empty")));
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("sweep threshold must lie in (0, 1)"));
        }
        if !(self.max_sim_hours > 0.0) {
            return Err(Error::config("sweep max_sim_hours must be > 0"));
        }
        for (cap, res, delta) in self.grid() {
            let cfg = self.point_balancer(cap, res, delta);
            cfg.validate()?;
            cfg.check_timestep(self.dt)?;
        }
        Ok(())
    }

    /// Grid points, capacitor outermost and switching factor innermost.
    pub fn grid(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &c in &self.cap_values {
            for &r in &self.res_values {
                for &d in &self.delta_values {
                    out.push((c, r, d));
                }
            }
        }
        out
    }

    pub fn point_balancer(&self, cap: f64, res: f64, delta: f64) -> BalancerConfig {
        BalancerConfig {
            cap,
            res,
            switch_factor: delta,
            soc_threshold: self.threshold,
            ..self.balancer
        }
    }

    pub fn point_scenario(&self, cap: f64, res: f64, delta: f64) -> Scenario {
        Scenario {
            balancer: Some(self.point_balancer(cap, res, delta)),
            ..self.scenario.clone()
        }
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt,
            record_every: self.record_every,
            horizon: Some(self.max_sim_hours * 3600.0),
            stop_after_balanced: Some(self.settle_hold_s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Settled,
    NotSettled,
    Fault(String),
}

impl PointStatus {
    pub fn as_str(&self) -> String {
        match self {
            PointStatus::Settled => "settled".into(),
            PointStatus::NotSettled => "not_settled".into(),
            PointStatus::Fault(msg) => format!("fault: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cap: f64,
    pub res: f64,
    pub delta: f64,
    pub settling: Settling,
    pub efficiency: Option<f64>,
    pub final_spread: f64,
    pub status: PointStatus,
}

impl SweepRow {
    pub fn settling_hours(&self) -> Option<f64> {
        self.settling.hours()
    }
}

fn run_point(spec: &SweepSpec, (cap, res, delta): (f64, f64, f64)) -> SweepRow {
    let scenario = spec.point_scenario(cap, res, delta);
    match sim::simulate(&scenario, &spec.options()) {
        Ok(out) => {
            let settling = metrics::settling_time(&out.trace, spec.threshold);
            SweepRow {
                cap,
                res,
                delta,
                settling,
                efficiency: metrics::energy_efficiency(&out.trace).ok(),
                final_spread: out
                    .trace
                    .rows
                    .last()
                    .map_or(0.0, |r| metrics::soc_spread(&r.z)),
                status: match settling {
                    Settling::Settled(_) => PointStatus::Settled,
                    Settling::NotSettled => PointStatus::NotSettled,
                },
            }
        }
        Err(e) => SweepRow {
            cap,
            res,
            delta,
            settling: Settling::NotSettled,
            efficiency: None,
            final_spread: f64::NAN,
            status: PointStatus::Fault(e.to_string()),
        },
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Runs every grid point on `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let grid = spec.grid();
    Ok(pool(workers)?.install(|| grid.par_iter().map(|&p| run_point(spec, p)).collect()))
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::from("cap_F,res_ohm,delta,settling_h,efficiency,final_spread,status\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.cap,
            r.res,
            r.delta,
            r.settling.hours().map(|h| h.to_string()).unwrap_or_default(),
            r.efficiency.map(|e| e.to_string()).unwrap_or_default(),
            r.final_spread,
            csv_field(&r.status.as_str()),
        )
        .unwrap();
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// How settling time moves along one axis with the others held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    StrictlyIncreasing,
    StrictlyDecreasing,
    InteriorMinimum,
    Other,
    Incomplete,
}

/// Classifies a sequence of settling times ordered by the swept parameter.
pub fn classify(values: &[Option<f64>]) -> Trend {
    let Some(v) = values.iter().copied().collect::<Option<Vec<f64>>>() else {
        return Trend::Incomplete;
    };
    if v.len() < 2 {
        return Trend::Other;
    }
    if v.windows(2).all(|w| w[1] > w[0]) {
        return Trend::StrictlyIncreasing;
    }
    if v.windows(2).all(|w| w[1] < w[0]) {
        return Trend::StrictlyDecreasing;
    }
    let argmin = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    if argmin != 0 && argmin != v.len() - 1 && v[argmin] < v[0] && v[argmin] < v[v.len() - 1] {
        Trend::InteriorMinimum
    } else {
        Trend::Other
    }
}

type Axis<'a> = (&'static str, &'a Vec<f64>, fn(&SweepRow) -> f64);

/// One line per swept axis with more than one value.
pub fn trend_summary(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let axes: [Axis; 3] = [
        ("cap_F", &spec.cap_values, |r| r.cap),
        ("res_ohm", &spec.res_values, |r| r.res),
        ("delta", &spec.delta_values, |r| r.delta),
    ];
    for (k, (name, values, key)) in axes.iter().enumerate() {
        if values.len() < 2 {
            continue;
        }
        // group rows by the other two coordinates
        let mut seen: Vec<(f64, f64)> = Vec::new();
        for r in rows {
            let coords = [r.cap, r.res, r.delta];
            let other = match k {
                0 => (coords[1], coords[2]),
                1 => (coords[0], coords[2]),
                _ => (coords[0], coords[1]),
            };
            if seen.contains(&other) {
                continue;
            }
            seen.push(other);
            let line: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| {
                    let c = [r.cap, r.res, r.delta];
                    let o = match k {
                        0 => (c[1], c[2]),
                        1 => (c[0], c[2]),
                        _ => (c[0], c[1]),
                    };
                    o == other
                })
                .collect();
            let settling: Vec<Option<f64>> = line.iter().map(|r| r.settling_hours()).collect();
            let cells: Vec<String> = line
                .iter()
                .map(|r| {
                    format!(
                        "{}={}",
                        key(r),
                        r.settling_hours().map_or("-".into(), |h| format!("{h:.3}h"))
                    )
                })
                .collect();
            writeln!(
                out,
                "{name} sweep at {other:?}: {} -> {:?}",
                cells.join(" "),
                classify(&settling)
            )
            .unwrap();
        }
    }
    out
}

/// Two cells in series at rest, one above the other, shuttled for a fixed
/// window with a pre-charged capacitor.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyStudy {
    pub cap_values: Vec<f64>,
    pub res_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub cell: CellParams,
    pub soc: [f64; 2],
    pub v_cap_init: f64,
    pub window_hours: f64,
    pub dt: f64,
    pub threshold: f64,
    /// Disconnected interval between connections (s).
    pub dead_time: f64,
}

impl Default for EfficiencyStudy {
    fn default() -> Self {
        EfficiencyStudy {
            cap_values: vec![30.0, 50.0, 100.0, 180.0],
            res_values: vec![0.05, 0.1, 0.2, 0.5],
            delta_values: vec![0.5, 1.0, 2.0, 3.0],
            cell: CellParams::default(),
            soc: [0.60, 0.695],
            v_cap_init: 3.3,
            window_hours: 1.0,
            dt: 0.1,
            threshold: 0.02,
            dead_time: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRow {
    pub cap: f64,
    pub res: f64,
    pub delta: f64,
    pub efficiency: Option<f64>,
    pub final_spread: f64,
    pub time_to_converge: Settling,
    pub status: PointStatus,
}

impl EfficiencyStudy {
    pub fn grid(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &c in &self.cap_values {
            for &r in &self.res_values {
                for &d in &self.delta_values {
                    out.push((c, r, d));
                }
            }
        }
        out
    }

    pub fn scenario(&self, cap: f64, res: f64, delta: f64) -> Scenario {
        let mut bal = BalancerConfig::new(cap, res, delta);
        bal.v_cap_init = self.v_cap_init;
        bal.soc_threshold = self.threshold;
        bal.dead_time = self.dead_time;
        Scenario {
            pack: PackConfig::uniform(1, 2, self.cell),
            initial_soc: self.soc.to_vec(),
            profile: CurrentProfile::rest(self.window_hours * 3600.0),
            balancer: Some(bal),
        }
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt,
            record_every: 10,
            horizon: None,
            stop_after_balanced: None,
        }
    }

    fn run_point(&self, (cap, res, delta): (f64, f64, f64)) -> EfficiencyRow {
        match sim::simulate(&self.scenario(cap, res, delta), &self.options()) {
            Ok(out) => {
                let settle = metrics::settling_time(&out.trace, self.threshold);
                EfficiencyRow {
                    cap,
                    res,
                    delta,
                    efficiency: metrics::energy_efficiency(&out.trace).ok(),
                    final_spread: metrics::soc_spread(&out.trace.rows.last().unwrap().z),
                    time_to_converge: settle,
                    status: match settle {
                        Settling::Settled(_) => PointStatus::Settled,
                        Settling::NotSettled => PointStatus::NotSettled,
                    },
                }
            }
            Err(e) => EfficiencyRow {
                cap,
                res,
                delta,
                efficiency: None,
                final_spread: f64::NAN,
                time_to_converge: Settling::NotSettled,
                status: PointStatus::Fault(e.to_string()),
            },
        }
    }
}

pub fn run_efficiency_study(study: &EfficiencyStudy, workers: usize) -> Result<Vec<EfficiencyRow>> {
    if study.cap_values.is_empty() || study.res_values.is_empty() || study.delta_values.is_empty() {
        return Err(Error::config("efficiency study grid lists must be nonempty"));
    }
    for (c, r, d) in study.grid() {
        let s = study.scenario(c, r, d);
        sim::validate(&s, &study.options())?;
    }
    let grid = study.grid();
    Ok(pool(workers)?.install(|| grid.par_iter().map(|&p| study.run_point(p)).collect()))
}

pub fn efficiency_csv_string(rows: &[EfficiencyRow]) -> String {
    let mut out =
        String::from("cap_F,res_ohm,delta,efficiency,final_spread,time_to_converge_h,status\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.cap,
            r.res,
            r.delta,
            r.efficiency.map(|e| e.to_string()).unwrap_or_default(),
            r.final_spread,
            r.time_to_converge.hours().map(|h| h.to_string()).unwrap_or_default(),
            csv_field(&r.status.as_str()),
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_shapes() {
        let s = |v: &[f64]| classify(&v.iter().map(|x| Some(*x)).collect::<Vec<_>>());
        assert_eq!(s(&[1.0, 2.0, 3.0]), Trend::StrictlyIncreasing);
        assert_eq!(s(&[3.0, 2.0, 1.0]), Trend::StrictlyDecreasing);
        assert_eq!(s(&[11.7, 10.9, 10.4, 10.7, 11.0]), Trend::InteriorMinimum);
        assert_eq!(s(&[1.0, 1.0, 2.0]), Trend::Other);
        assert_eq!(classify(&[Some(1.0), None]), Trend::Incomplete);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let scenario = Scenario {
            pack: PackConfig::uniform(1, 2, CellParams::default()),
            initial_soc: vec![0.6, 0.65],
            profile: CurrentProfile::rest(60.0),
            balancer: None,
        };
        let mut spec = SweepSpec::new(scenario, BalancerConfig::new(50.0, 0.05, 0.5));
        spec.res_values.clear();
        assert!(matches!(run_sweep(&spec, 1), Err(Error::Config(_))));
    }

    #[test]
    fn grid_order_is_cap_major() {
        let scenario = Scenario {
            pack: PackConfig::uniform(1, 2, CellParams::default()),
            initial_soc: vec![0.6, 0.65],
            profile: CurrentProfile::rest(60.0),
            balancer: None,
        };
        let mut spec = SweepSpec::new(scenario, BalancerConfig::new(50.0, 0.05, 0.5));
        spec.cap_values = vec![20.0, 30.0];
        spec.delta_values = vec![0.5, 1.0];
        assert_eq!(
            spec.grid(),
            vec![
                (20.0, 0.05, 0.5),
                (20.0, 0.05, 1.0),
                (30.0, 0.05, 0.5),
                (30.0, 0.05, 1.0)
            ]
        );
    }
}
