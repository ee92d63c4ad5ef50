//! Post-hoc analysis of simulation traces.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::trace::SimTrace;

pub fn soc_spread(snapshot: &[f64]) -> f64 {
    match snapshot.iter().copied().reduce(f64::max) {
        Some(hi) => hi - snapshot.iter().copied().fold(hi, f64::min),
        None => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settling {
    /// Hours from rest onset.
    Settled(f64),
    NotSettled,
}

impl Settling {
    pub fn hours(&self) -> Option<f64> {
        match self {
            Settling::Settled(h) => Some(*h),
            Settling::NotSettled => None,
        }
    }
}

impl fmt::Display for Settling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Settling::Settled(h) => write!(f, "{h}"),
            Settling::NotSettled => f.write_str("not settled"),
        }
    }
}

/// Time from rest onset until the SoC spread drops below `threshold` for good.
pub fn settling_time(trace: &SimTrace, threshold: f64) -> Settling {
    let Some(onset) = trace.first_rest_row() else {
        return Settling::NotSettled;
    };
    let rows = &trace.rows[onset..];
    let unsettled = |k: usize| soc_spread(&rows[k].z) >= threshold;
    match (0..rows.len()).rev().find(|&k| unsettled(k)) {
        None => Settling::Settled(0.0),
        Some(k) if k + 1 == rows.len() => Settling::NotSettled,
        Some(k) => Settling::Settled((rows[k + 1].time - rows[0].time) / 3600.0),
    }
}

/// Fraction of the energy drawn from source cells that was not dissipated in
/// the balancing resistor.
pub fn energy_efficiency(trace: &SimTrace) -> Result<f64> {
    let last = trace.rows.last().ok_or(Error::NoTransfer)?;
    let moved = last.source_energy;
    if !(moved > 0.0) {
        return Err(Error::NoTransfer);
    }
    Ok((moved - last.loss_energy) / moved)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub label: String,
    pub initial_v: f64,
    pub final_v: f64,
    pub delta_mv: f64,
    /// `|final − initial| / final`, in percent.
    pub percent: f64,
}

/// Per-cell terminal voltage at rest onset against the end of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    fn band(values: impl Iterator<Item = f64> + Clone) -> f64 {
        let hi = values.clone().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.fold(f64::INFINITY, f64::min);
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// max − min of the initial voltages (V).
    pub fn initial_band(&self) -> f64 {
        Self::band(self.rows.iter().map(|r| r.initial_v))
    }

    pub fn final_band(&self) -> f64 {
        Self::band(self.rows.iter().map(|r| r.final_v))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("battery,initial_V,final_V,delta_mV,percent_difference\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.label, r.initial_v, r.final_v, r.delta_mv, r.percent
            )
            .unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8}{:>14}{:>14}{:>12}{:>14}\n",
            "Battery", "Initial (V)", "Final (V)", "Delta (mV)", "% difference"
        );
        for r in &self.rows {
            writeln!(
                out,
                "{:<8}{:>14.4}{:>14.4}{:>12.3}{:>14.4}",
                r.label, r.initial_v, r.final_v, r.delta_mv, r.percent
            )
            .unwrap();
        }
        writeln!(
            out,
            "voltage band: {:.3} mV -> {:.3} mV",
            self.initial_band() * 1e3,
            self.final_band() * 1e3
        )
        .unwrap();
        out
    }
}

pub fn voltage_convergence_report(trace: &SimTrace) -> ConvergenceReport {
    let (Some(first), Some(last)) = (
        trace.first_rest_row().or(if trace.rows.is_empty() { None } else { Some(0) }),
        trace.rows.last(),
    ) else {
        return ConvergenceReport { rows: Vec::new() };
    };
    let first = &trace.rows[first];
    let rows = (0..trace.n_cells())
        .map(|k| {
            let initial_v = first.v[k];
            let final_v = last.v[k];
            let delta = (final_v - initial_v).abs();
            ConvergenceRow {
                label: trace.cell_index(k).label(trace.cells_per_string),
                initial_v,
                final_v,
                delta_mv: delta * 1e3,
                percent: 100.0 * delta / final_v,
            }
        })
        .collect();
    ConvergenceReport { rows }
}

/// Headline numbers for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rest_onset_h: Option<f64>,
    pub spread_at_rest: Option<f64>,
    pub final_spread: f64,
    pub threshold: f64,
    pub settling: Settling,
    pub efficiency: Option<f64>,
    pub source_energy_j: f64,
    pub loss_energy_j: f64,
    pub convergence: ConvergenceReport,
}

impl Summary {
    pub fn from_trace(trace: &SimTrace, threshold: f64) -> Summary {
        let onset = trace.first_rest_row().map(|k| &trace.rows[k]);
        let last = trace.rows.last();
        Summary {
            rest_onset_h: onset.map(|r| r.time / 3600.0),
            spread_at_rest: onset.map(|r| soc_spread(&r.z)),
            final_spread: last.map_or(0.0, |r| soc_spread(&r.z)),
            threshold,
            settling: settling_time(trace, threshold),
            efficiency: energy_efficiency(trace).ok(),
            source_energy_j: last.map_or(0.0, |r| r.source_energy),
            loss_energy_j: last.map_or(0.0, |r| r.loss_energy),
            convergence: voltage_convergence_report(trace),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("metric,value\n");
        let rows = [
            ("rest_onset_h", opt(self.rest_onset_h)),
            ("spread_at_rest", opt(self.spread_at_rest)),
            ("final_spread", self.final_spread.to_string()),
            ("threshold", self.threshold.to_string()),
            ("settling_h", opt(self.settling.hours())),
            ("efficiency", opt(self.efficiency)),
            ("source_energy_J", self.source_energy_j.to_string()),
            ("loss_energy_J", self.loss_energy_j.to_string()),
            ("initial_voltage_band_V", self.convergence.initial_band().to_string()),
            ("final_voltage_band_V", self.convergence.final_band().to_string()),
        ];
        for (k, v) in rows {
            writeln!(out, "{k},{v}").unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.3} %", 100.0 * x));
        let mut out = String::new();
        writeln!(
            out,
            "rest onset:          {}",
            self.rest_onset_h
                .map_or("none".to_string(), |h| format!("{h:.4} h"))
        )
        .unwrap();
        writeln!(out, "SoC spread at rest:  {}", pct(self.spread_at_rest)).unwrap();
        writeln!(out, "final SoC spread:    {}", pct(Some(self.final_spread))).unwrap();
        let settle = match self.settling {
            Settling::Settled(h) => format!("{h:.4} h"),
            Settling::NotSettled => "not settled".to_string(),
        };
        writeln!(
            out,
            "settling ({:.1} %):    {settle}",
            100.0 * self.threshold
        )
        .unwrap();
        writeln!(
            out,
            "energy efficiency:   {}",
            self.efficiency
                .map_or("n/a (no transfer)".to_string(), |e| format!("{e:.6}"))
        )
        .unwrap();
        writeln!(
            out,
            "balancer energy:     {:.3} J drawn, {:.3} J dissipated",
            self.source_energy_j, self.loss_energy_j
        )
        .unwrap();
        out.push('\n');
        out.push_str(&self.convergence.to_text());
        out
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::trace::TraceRow;

    fn trace_with(rows: &[(f64, f64, Vec<f64>)]) -> SimTrace {
        let n = rows[0].2.len();
        let mut t = SimTrace::new(1, n);
        t.rows = rows
            .iter()
            .map(|(time, current, z)| TraceRow {
                time: *time,
                z: z.clone(),
                v: z.iter().map(|z| 3.0 + 0.5 * z).collect(),
                alpha: vec![*current],
                v_cap: 0.0,
                i_c: 0.0,
                target: None,
                source_energy: 0.0,
                loss_energy: 0.0,
            })
            .collect();
        t
    }

    #[test]
    fn spread_cases() {
        assert_eq!(soc_spread(&[0.6; 12]), 0.0);
        let mut z = vec![0.6; 12];
        z[0] = 0.64;
        z[9] = 0.58;
        z[10] = 0.56;
        assert_relative_eq!(soc_spread(&z), 0.08, epsilon = 1e-15);
        assert_eq!(soc_spread(&[0.3]), 0.0);
        assert_eq!(soc_spread(&[]), 0.0);
    }

    #[test]
    fn settled_at_onset_is_zero() {
        let t = trace_with(&[
            (0.0, 5.0, vec![0.6, 0.6]),
            (3600.0, 0.0, vec![0.6, 0.61]),
            (7200.0, 0.0, vec![0.6, 0.61]),
        ]);
        assert_eq!(settling_time(&t, 0.02), Settling::Settled(0.0));
    }

    #[test]
    fn settling_counts_from_final_crossing() {
        let t = trace_with(&[
            (0.0, 5.0, vec![0.6, 0.65]),
            (3600.0, 0.0, vec![0.6, 0.61]),
            (7200.0, 0.0, vec![0.6, 0.63]),
            (10800.0, 0.0, vec![0.6, 0.61]),
            (14400.0, 0.0, vec![0.6, 0.605]),
        ]);
        assert_eq!(settling_time(&t, 0.02), Settling::Settled(2.0));
    }

    #[test]
    fn no_rest_window_is_not_settled() {
        let t = trace_with(&[(0.0, 5.0, vec![0.6, 0.6]), (10.0, 5.0, vec![0.6, 0.6])]);
        assert_eq!(settling_time(&t, 0.02), Settling::NotSettled);
        let t = trace_with(&[(0.0, 0.0, vec![0.6, 0.7]), (10.0, 0.0, vec![0.6, 0.7])]);
        assert_eq!(settling_time(&t, 0.02), Settling::NotSettled);
    }

    #[test]
    fn efficiency_needs_transfer() {
        let t = trace_with(&[(0.0, 0.0, vec![0.6])]);
        assert!(matches!(energy_efficiency(&t), Err(Error::NoTransfer)));
        let mut t = t;
        t.rows[0].source_energy = 100.0;
        t.rows[0].loss_energy = 0.0;
        assert_eq!(energy_efficiency(&t).unwrap(), 1.0);
        t.rows[0].loss_energy = 2.5;
        assert_relative_eq!(energy_efficiency(&t).unwrap(), 0.975);
    }

    #[test]
    fn convergence_of_static_pack() {
        let t = trace_with(&[(0.0, 0.0, vec![0.6, 0.6]), (10.0, 0.0, vec![0.6, 0.6])]);
        let r = voltage_convergence_report(&t);
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|r| r.delta_mv == 0.0 && r.percent == 0.0));
        assert_eq!(r.rows[1].label, "B2");
    }

    #[test]
    fn single_cell_report() {
        let t = trace_with(&[(0.0, 0.0, vec![0.6]), (10.0, 0.0, vec![0.6])]);
        let r = voltage_convergence_report(&t);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].delta_mv, 0.0);
        assert_eq!(r.final_band(), 0.0);
    }

    #[test]
    fn percent_is_relative_to_final() {
        let mut t = trace_with(&[(0.0, 0.0, vec![0.6]), (10.0, 0.0, vec![0.6])]);
        t.rows[0].v[0] = 3.276;
        t.rows[1].v[0] = 3.279;
        let r = voltage_convergence_report(&t);
        assert_relative_eq!(r.rows[0].delta_mv, 3.0, epsilon = 1e-9);
        assert_relative_eq!(r.rows[0].percent, 0.0915, epsilon = 1e-4);
    }
}
