//! Pack current profiles: CSV ingestion and a synthetic charge-depleting
//! drive cycle followed by rest.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant pack current (A, positive = discharge).
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentProfile {
    samples: Vec<(f64, f64)>,
    duration: f64,
}

impl CurrentProfile {
    /// Times must start at 0 and increase strictly; the last sample time is the
    /// profile duration.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::config("current profile has no samples"))?;
        if first.0 != 0.0 {
            return Err(Error::config(format!(
                "current profile must start at t = 0, not {}",
                first.0
            )));
        }
        if let Some(k) = samples.windows(2).position(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::config(format!(
                "current profile times must increase (sample {})",
                k + 1
            )));
        }
        if samples.iter().any(|(t, i)| !t.is_finite() || !i.is_finite()) {
            return Err(Error::config("current profile contains non-finite values"));
        }
        let duration = samples.last().map(|s| s.0).unwrap_or(0.0);
        Ok(CurrentProfile { samples, duration })
    }

    /// Zero current for `seconds`.
    pub fn rest(seconds: f64) -> Self {
        CurrentProfile {
            samples: vec![(0.0, 0.0), (seconds, 0.0)],
            duration: seconds,
        }
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Zero-order hold lookup; holds the last value past the end.
    pub fn current_at(&self, t: f64) -> f64 {
        let k = self.samples.partition_point(|(ts, _)| *ts <= t);
        if k == 0 {
            self.samples[0].1
        } else {
            self.samples[k - 1].1
        }
    }

    /// The same profile followed by `seconds` at zero current.
    pub fn with_rest(&self, seconds: f64) -> Result<Self> {
        if !(seconds > 0.0) {
            return Err(Error::config("appended rest must be > 0 s"));
        }
        // the last sample's current only ever applied past the end
        let mut samples = self.samples.clone();
        if let Some(last) = samples.last_mut() {
            last.1 = 0.0;
        }
        samples.push((self.duration + seconds, 0.0));
        CurrentProfile::new(samples)
    }

    /// Start of the trailing zero-current segment, if the profile ends at rest.
    pub fn rest_onset(&self) -> Option<f64> {
        let mut onset = None;
        for &(t, i) in self.samples.iter().rev() {
            if i != 0.0 {
                break;
            }
            onset = Some(t);
        }
        onset
    }
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<CurrentProfile> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut samples: Vec<(f64, f64)> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(k as u64 + 1);
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let t = rec[0].parse::<f64>();
        let i = rec[1].parse::<f64>();
        match (t, i) {
            (Ok(t), Ok(i)) => {
                if !t.is_finite() || !i.is_finite() {
                    return Err(parse_err(line, "non-finite value".into()));
                }
                if let Some(&(prev, _)) = samples.last() {
                    if !(t > prev) {
                        return Err(parse_err(
                            line,
                            format!("time {t} does not increase past {prev}"),
                        ));
                    }
                } else if t != 0.0 {
                    return Err(parse_err(line, format!("profile must start at t = 0, not {t}")));
                }
                samples.push((t, i));
            }
            // a non-numeric first row is a header
            _ if k == 0 => continue,
            _ => {
                return Err(parse_err(
                    line,
                    format!("cannot parse '{}', '{}' as numbers", &rec[0], &rec[1]),
                ))
            }
        }
    }
    if samples.is_empty() {
        return Err(parse_err(1, "profile contains no samples".into()));
    }
    CurrentProfile::new(samples)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Parameters of the synthetic drive cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveCycle {
    pub active_hours: f64,
    pub rest_hours: f64,
    /// Mean pack current over the active segment (A).
    pub mean_depletion_a: f64,
    pub pulse_period_s: f64,
    /// Nominal pulse swing around the mean (A); each pulse pair is scaled by a
    /// seeded factor in [0.5, 1.5].
    pub pulse_amplitude_a: f64,
    /// Set from the run seed, not read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DriveCycle {
    fn default() -> Self {
        DriveCycle {
            active_hours: 0.5,
            rest_hours: 12.0,
            mean_depletion_a: 2.4,
            pulse_period_s: 60.0,
            pulse_amplitude_a: 20.0,
            seed: 0,
        }
    }
}

/// Square pulses alternating above and below the mean current, then exactly
/// zero current for the rest window. Each pulse pair averages to the mean, and
/// a trailing partial period is held at the mean.
pub fn synth_drive_cycle(spec: &DriveCycle) -> Result<CurrentProfile> {
    if !(spec.active_hours > 0.0 && spec.rest_hours > 0.0 && spec.pulse_period_s > 0.0) {
        return Err(Error::config(
            "drive cycle active_hours, rest_hours and pulse_period_s must be > 0",
        ));
    }
    if !spec.mean_depletion_a.is_finite() || !(spec.pulse_amplitude_a >= 0.0) {
        return Err(Error::config("drive cycle currents must be finite, amplitude >= 0"));
    }
    let active = spec.active_hours * 3600.0;
    let total = active + spec.rest_hours * 3600.0;
    let period = spec.pulse_period_s;
    let half = 0.5 * period;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut samples = Vec::new();
    let mut k = 0u64;
    loop {
        let start = k as f64 * period;
        if start + period > active {
            if start < active {
                samples.push((start, spec.mean_depletion_a));
            }
            break;
        }
        let swing = spec.pulse_amplitude_a * rng.gen_range(0.5..=1.5);
        samples.push((start, spec.mean_depletion_a + swing));
        samples.push((start + half, spec.mean_depletion_a - swing));
        k += 1;
    }
    samples.push((active, 0.0));
    samples.push((total, 0.0));
    CurrentProfile::new(samples)
}
