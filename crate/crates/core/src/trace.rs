//! Time-indexed simulation record and its CSV forms.
//!
//! Trace columns: `time_s`, `z_{i}_{j}` for every cell, `v_{i}_{j}`,
//! `alpha_{i}`, `v_cap_V`, `i_c_A`, `target_i`, `target_j`, then the running
//! balancer energy totals `e_source_J` and `e_loss_J`. Each row is the pack at
//! `time_s`: `alpha` is the split of the profile current at that instant with
//! the balancer disconnected, and the voltages are taken under that split. An
//! idle balancer leaves
//! both target columns empty. Floats are written in shortest round-trip form,
//! so a trace read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::balancer::SwitchEvent;
use crate::error::{Error, Result};
use crate::pack::CellIndex;
use crate::profile::csv_error;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    /// Per-cell SoC, string-major.
    pub z: Vec<f64>,
    /// Per-cell terminal voltage under `alpha`.
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub v_cap: f64,
    /// Balancer loop current averaged over the step ending at `time`.
    pub i_c: f64,
    pub target: Option<CellIndex>,
    /// Cumulative energy drawn from source cells on charging legs (J).
    pub source_energy: f64,
    /// Cumulative resistive loss in the balancer (J).
    pub loss_energy: f64,
}

impl TraceRow {
    pub fn pack_current(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub n_strings: usize,
    pub cells_per_string: usize,
    pub rows: Vec<TraceRow>,
    pub events: Vec<SwitchEvent>,
}

/// Pack currents at or below this magnitude count as rest.
pub const REST_CURRENT: f64 = 1e-3;

impl SimTrace {
    pub fn new(n_strings: usize, cells_per_string: usize) -> Self {
        SimTrace {
            n_strings,
            cells_per_string,
            rows: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_strings * self.cells_per_string
    }

    pub fn cell_index(&self, flat: usize) -> CellIndex {
        CellIndex::new(flat / self.cells_per_string, flat % self.cells_per_string)
    }

    /// Row at which the trailing rest window begins: the last row whose step
    /// still carried load, or the first row if the pack never carried load.
    /// `None` if the trace ends under load.
    pub fn rest_onset_row(&self) -> Option<usize> {
        let loaded = |r: &TraceRow| r.pack_current().abs() > REST_CURRENT;
        match self.rows.iter().rposition(loaded) {
            None if self.rows.is_empty() => None,
            None => Some(0),
            Some(k) if k + 1 == self.rows.len() => None,
            Some(k) => Some(k),
        }
    }

    /// First row recorded at rest after the last loaded row.
    pub fn first_rest_row(&self) -> Option<usize> {
        let loaded = |r: &TraceRow| r.pack_current().abs() > REST_CURRENT;
        match self.rest_onset_row()? {
            0 if !loaded(&self.rows[0]) => Some(0),
            k => Some(k + 1),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["time_s".to_string()];
        let cells: Vec<CellIndex> = (0..self.n_cells()).map(|k| self.cell_index(k)).collect();
        h.extend(cells.iter().map(|c| format!("z_{}_{}", c.string, c.pos)));
        h.extend(cells.iter().map(|c| format!("v_{}_{}", c.string, c.pos)));
        h.extend((0..self.n_strings).map(|i| format!("alpha_{i}")));
        for s in [
            "v_cap_V",
            "i_c_A",
            "target_i",
            "target_j",
            "e_source_J",
            "e_loss_J",
        ] {
            h.push(s.to_string());
        }
        h
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.rows {
            write!(out, "{}", r.time).unwrap();
            for x in r.z.iter().chain(&r.v).chain(&r.alpha) {
                write!(out, ",{x}").unwrap();
            }
            write!(out, ",{},{}", r.v_cap, r.i_c).unwrap();
            match r.target {
                Some(c) => write!(out, ",{},{}", c.string, c.pos).unwrap(),
                None => out.push_str(",,"),
            }
            writeln!(out, ",{},{}", r.source_energy, r.loss_energy).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn events_csv_string(&self) -> String {
        let mut out = String::from("time_s,from_string,from_pos,to_string,to_pos,v_cap_V\n");
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.time, e.from_cell.string, e.from_cell.pos, e.to_cell.string, e.to_cell.pos, e.v_cap
            )
            .unwrap();
        }
        out
    }

    pub fn write_events_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.events_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Reads a trace written by [`SimTrace::write_csv`]. The event log is left
    /// empty; see [`read_events_csv`].
    pub fn read_csv(path: impl AsRef<Path>) -> Result<SimTrace> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };

        let (n, m) = grid_from_header(&header).ok_or_else(|| {
            parse_err(1, "header has no z_<string>_<pos> columns".to_string())
        })?;
        let mut trace = SimTrace::new(n, m);
        if header != trace.header() {
            return Err(parse_err(
                1,
                format!("header does not match a {n}x{m} pack trace"),
            ));
        }
        let cells = trace.n_cells();

        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() < header.len() {
                return Err(parse_err(
                    line,
                    format!("row ends before column '{}'", header[rec.len()]),
                ));
            }
            if rec.len() > header.len() {
                return Err(parse_err(line, format!("row has {} fields", rec.len())));
            }
            let num = |k: usize| -> Result<f64> {
                rec[k].parse::<f64>().map_err(|_| {
                    parse_err(line, format!("column '{}': cannot parse '{}'", header[k], &rec[k]))
                })
            };
            let nums = |from: usize, len: usize| -> Result<Vec<f64>> {
                (from..from + len).map(num).collect()
            };
            let base = 1 + 2 * cells + n;
            let target = match (&rec[base + 2], &rec[base + 3]) {
                ("", "") => None,
                (i, j) => match (i.parse::<usize>(), j.parse::<usize>()) {
                    (Ok(i), Ok(j)) if i < n && j < m => Some(CellIndex::new(i, j)),
                    _ => return Err(parse_err(line, format!("bad target '{i}','{j}'"))),
                },
            };
            trace.rows.push(TraceRow {
                time: num(0)?,
                z: nums(1, cells)?,
                v: nums(1 + cells, cells)?,
                alpha: nums(1 + 2 * cells, n)?,
                v_cap: num(base)?,
                i_c: num(base + 1)?,
                target,
                source_energy: num(base + 4)?,
                loss_energy: num(base + 5)?,
            });
        }
        Ok(trace)
    }
}

fn grid_from_header(header: &[String]) -> Option<(usize, usize)> {
    let mut n = 0;
    let mut m = 0;
    let mut any = false;
    for h in header {
        let Some(rest) = h.strip_prefix("z_") else { continue };
        let (i, j) = rest.split_once('_')?;
        n = n.max(i.parse::<usize>().ok()? + 1);
        m = m.max(j.parse::<usize>().ok()? + 1);
        any = true;
    }
    any.then_some((n, m))
}

pub fn read_events_csv(path: impl AsRef<Path>) -> Result<Vec<SwitchEvent>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut events = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("cannot parse {what}"),
        };
        if rec.len() != 6 {
            return Err(bad("a 6-column event row"));
        }
        let u = |k: usize| rec[k].parse::<usize>().map_err(|_| bad("cell index"));
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad("number"));
        events.push(SwitchEvent {
            time: f(0)?,
            from_cell: CellIndex::new(u(1)?, u(2)?),
            to_cell: CellIndex::new(u(3)?, u(4)?),
            v_cap: f(5)?,
        });
    }
    Ok(events)
}
