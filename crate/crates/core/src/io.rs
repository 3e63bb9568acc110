//! CSV reading and writing for measurements, state sets and results.
//!
//! A scan with no entries is written as a row carrying only the scan number,
//! so every scan appears in the file and readers can recover empty scans.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ospa::Ospa;
use crate::sim::{BenchRow, ScanMeasurements, TruthFrame};
use crate::state::{Measurement, State};

pub const MEASUREMENTS_HEADER: [&str; 3] = ["scan", "range", "bearing"];
pub const TRUTH_HEADER: [&str; 6] = ["scan", "target_id", "px", "vx", "py", "vy"];
pub const ESTIMATES_HEADER: [&str; 6] = ["scan", "target_index", "px", "vx", "py", "vy"];
pub const RESULTS_HEADER: [&str; 7] =
    ["scan", "ospa_mbm", "ospa_loc_mbm", "ospa_card_mbm", "ospa_phd", "card_mean_mbm", "card_true"];
pub const EVAL_HEADER: [&str; 4] = ["scan", "ospa", "ospa_loc", "ospa_card"];

/// A labelled state set at one scan; labels are target ids for truth and
/// zero-based indices for estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFrame {
    pub scan: usize,
    pub states: Vec<(usize, State<f64>)>,
}

impl StateFrame {
    pub fn states(&self) -> Vec<State<f64>> {
        self.states.iter().map(|(_, s)| *s).collect()
    }
}

impl From<&TruthFrame<f64>> for StateFrame {
    fn from(f: &TruthFrame<f64>) -> Self {
        StateFrame { scan: f.scan, states: f.states.clone() }
    }
}

#[derive(Serialize, Deserialize)]
struct MeasurementRow {
    scan: usize,
    range: Option<f64>,
    bearing: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateRow {
    scan: usize,
    label: Option<usize>,
    px: Option<f64>,
    vx: Option<f64>,
    py: Option<f64>,
    vy: Option<f64>,
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn row_error(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Input(format!("row {}: {}", p.line(), e.kind_message())),
        None => Error::Input(e.to_string()),
    }
}

trait KindMessage {
    fn kind_message(&self) -> String;
}

impl KindMessage for csv::Error {
    fn kind_message(&self) -> String {
        match self.kind() {
            csv::ErrorKind::Deserialize { err, .. } => match err.field() {
                Some(f) => format!("field {}: {}", f + 1, err.kind()),
                None => err.kind().to_string(),
            },
            other => format!("{other:?}"),
        }
    }
}

fn reader<R: Read>(input: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found = r.headers().map_err(row_error)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Input(format!(
            "row 1: expected header `{}`, found `{}`",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(r)
}

/// Deserializes a record positionally so the label column name may differ
/// between file kinds.
fn parse_row<T: serde::de::DeserializeOwned>(rec: csv::Result<csv::StringRecord>) -> Result<(T, u64)> {
    let rec = rec.map_err(row_error)?;
    let line = rec.position().map_or(0, |p| p.line());
    let row = rec.deserialize(None).map_err(|e| match e.kind() {
        csv::ErrorKind::Deserialize { .. } => Error::Input(format!("row {line}: {}", e.kind_message())),
        _ => row_error(e),
    })?;
    Ok((row, line))
}

fn check_scan_order(prev: Option<usize>, scan: usize, line: u64) -> Result<()> {
    if scan == 0 {
        return Err(Error::Input(format!("row {line}: scan numbers start at 1")));
    }
    if prev.is_some_and(|p| scan < p) {
        return Err(Error::Input(format!("row {line}: scan {scan} out of order")));
    }
    Ok(())
}

pub fn write_measurements<W: Write>(out: W, scans: &[ScanMeasurements<f64>]) -> Result<()> {
    let mut w = writer(out, &MEASUREMENTS_HEADER)?;
    for s in scans {
        if s.measurements.is_empty() {
            w.serialize(MeasurementRow { scan: s.scan, range: None, bearing: None })?;
        }
        for z in &s.measurements {
            w.serialize(MeasurementRow { scan: s.scan, range: Some(z.range), bearing: Some(z.bearing) })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a measurements file. Scans missing from the file between 1 and the
/// largest scan present are returned empty.
pub fn read_measurements<R: Read>(input: R) -> Result<Vec<ScanMeasurements<f64>>> {
    let mut r = reader(input, &MEASUREMENTS_HEADER)?;
    let mut scans: Vec<ScanMeasurements<f64>> = Vec::new();
    let mut prev = None;
    for rec in r.records() {
        let (row, line): (MeasurementRow, u64) = parse_row(rec)?;
        check_scan_order(prev, row.scan, line)?;
        prev = Some(row.scan);
        while scans.len() < row.scan {
            scans.push(ScanMeasurements { scan: scans.len() + 1, measurements: Vec::new() });
        }
        match (row.range, row.bearing) {
            (Some(range), Some(bearing)) => {
                if !(range.is_finite() && bearing.is_finite() && range >= 0.0) {
                    return Err(Error::Input(format!("row {line}: invalid measurement ({range}, {bearing})")));
                }
                scans[row.scan - 1].measurements.push(Measurement::new(range, bearing));
            }
            (None, None) => {}
            _ => return Err(Error::Input(format!("row {line}: range and bearing must both be present"))),
        }
    }
    Ok(scans)
}

fn write_frames<W: Write>(out: W, header: &[&str], frames: &[StateFrame]) -> Result<()> {
    let mut w = writer(out, header)?;
    for f in frames {
        if f.states.is_empty() {
            w.serialize(StateRow { scan: f.scan, label: None, px: None, vx: None, py: None, vy: None })?;
        }
        for (label, s) in &f.states {
            w.serialize(StateRow {
                scan: f.scan,
                label: Some(*label),
                px: Some(s.px()),
                vx: Some(s.vx()),
                py: Some(s.py()),
                vy: Some(s.vy()),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_frames<R: Read>(input: R, header: &[&str]) -> Result<Vec<StateFrame>> {
    let mut r = reader(input, header)?;
    let mut frames: Vec<StateFrame> = Vec::new();
    for rec in r.records() {
        let (row, line): (StateRow, u64) = parse_row(rec)?;
        check_scan_order(frames.last().map(|f| f.scan), row.scan, line)?;
        if frames.last().is_none_or(|f| f.scan != row.scan) {
            frames.push(StateFrame { scan: row.scan, states: Vec::new() });
        }
        match (row.label, row.px, row.vx, row.py, row.vy) {
            (Some(label), Some(px), Some(vx), Some(py), Some(vy)) => {
                let s = State::new(px, vx, py, vy);
                if !s.is_finite() {
                    return Err(Error::Input(format!("row {line}: non-finite state")));
                }
                frames.last_mut().expect("frame pushed").states.push((label, s));
            }
            (None, None, None, None, None) => {}
            _ => return Err(Error::Input(format!("row {line}: incomplete state row"))),
        }
    }
    Ok(frames)
}

pub fn write_truth<W: Write>(out: W, frames: &[StateFrame]) -> Result<()> {
    write_frames(out, &TRUTH_HEADER, frames)
}

pub fn read_truth<R: Read>(input: R) -> Result<Vec<StateFrame>> {
    read_frames(input, &TRUTH_HEADER)
}

pub fn write_estimates<W: Write>(out: W, frames: &[StateFrame]) -> Result<()> {
    write_frames(out, &ESTIMATES_HEADER, frames)
}

pub fn read_estimates<R: Read>(input: R) -> Result<Vec<StateFrame>> {
    read_frames(input, &ESTIMATES_HEADER)
}

pub fn write_results<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = writer(out, &RESULTS_HEADER)?;
    for r in rows {
        w.serialize((r.scan, r.ospa_mbm, r.ospa_loc_mbm, r.ospa_card_mbm, r.ospa_phd, r.card_mean_mbm, r.card_true))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eval<W: Write>(out: W, rows: &[(usize, Ospa<f64>)]) -> Result<()> {
    let mut w = writer(out, &EVAL_HEADER)?;
    for (scan, o) in rows {
        w.serialize((scan, o.total, o.localization, o.cardinality))?;
    }
    w.flush()?;
    Ok(())
}
