//! CSV and text formats for data exchange, plus atomic file output.

use std::io::Write;
use std::path::Path;

use crate::adc::IntensityHistogram;
use crate::error::{Error, Result};
use crate::laser::PulseTrace;
use crate::phasesim::{CalibrationGrid, SizeRow};
use crate::qualify::AcceptanceMap;

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, msg: e.to_string() }
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

pub fn histogram_csv(hist: &IntensityHistogram) -> String {
    let mut w = writer();
    w.write_record(["code", "count"]).unwrap();
    for (code, count) in hist.counts().iter().enumerate() {
        w.write_record([code.to_string(), count.to_string()]).unwrap();
    }
    finish(w)
}

/// One row per (cell, rep).
pub fn calibration_csv(grid: &CalibrationGrid) -> String {
    let mut w = writer();
    w.write_record(["noise", "fraction", "rep", "d_stat"]).unwrap();
    for cell in &grid.cells {
        for (rep, d) in cell.d_stats.iter().enumerate() {
            w.write_record([cell.noise.to_string(), cell.fraction.to_string(), rep.to_string(), d.to_string()])
                .unwrap();
        }
    }
    finish(w)
}

/// Per-cell mean and spread.
pub fn calibration_summary_csv(grid: &CalibrationGrid) -> String {
    let mut w = writer();
    w.write_record(["noise", "fraction", "mean", "std"]).unwrap();
    for cell in &grid.cells {
        w.write_record([
            cell.noise.to_string(),
            cell.fraction.to_string(),
            cell.mean.to_string(),
            cell.std.to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

pub fn convergence_csv(rows: &[SizeRow]) -> String {
    let mut w = writer();
    w.write_record(["size", "mean", "std"]).unwrap();
    for r in rows {
        w.write_record([r.size.to_string(), r.mean.to_string(), r.std.to_string()]).unwrap();
    }
    finish(w)
}

pub fn acceptance_map_csv(map: &AcceptanceMap) -> String {
    let mut w = writer();
    w.write_record([
        map.grid.axis1.name(),
        map.grid.axis2.name(),
        "d_stat",
        "c1_db",
        "pass_statdist",
        "pass_autocorr",
        "pass_overall",
        "error",
        "rep",
    ])
    .unwrap();
    for cell in &map.cells {
        for run in &cell.runs {
            w.write_record([
                cell.value1.to_string(),
                cell.value2.to_string(),
                run.d_stat.to_string(),
                run.c1_db.map_or(String::new(), |c| c.to_string()),
                run.pass_statdist.to_string(),
                run.pass_autocorr.to_string(),
                run.pass_overall.to_string(),
                run.error.clone().unwrap_or_default(),
                run.rep.to_string(),
            ])
            .unwrap();
        }
    }
    finish(w)
}

const SAMPLE_RATE_KEY: &str = "# sample_rate_hz=";
const TRACE_COLUMNS: [&str; 4] = ["drive_mA", "photon_density", "phase_rad", "interfered_intensity"];

/// Simulator trace with its interferometer output. The first line carries the
/// sample rate as a comment.
pub fn trace_csv(trace: &PulseTrace, interfered: &[f64]) -> Result<String> {
    if interfered.len() != trace.len() {
        return Err(Error::InvalidInput(format!(
            "interfered trace has {} samples, simulator trace {}",
            interfered.len(),
            trace.len()
        )));
    }
    let mut w = writer();
    w.write_record(TRACE_COLUMNS).unwrap();
    for (k, x) in interfered.iter().enumerate() {
        w.write_record([
            trace.drive_ma[k].to_string(),
            trace.photon_density[k].to_string(),
            trace.phase[k].to_string(),
            x.to_string(),
        ])
        .unwrap();
    }
    Ok(format!("{SAMPLE_RATE_KEY}{}\n{}", trace.sample_rate, finish(w)))
}

/// Waveform read from disk: the detected intensity and, when present, the drive.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: f64,
    pub intensity: Vec<f64>,
    pub drive: Option<Vec<f64>>,
}

fn parse_f64(s: &str, line: usize, column: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("column {column}: {e}") })
}

/// Accepts the simulator trace format or a two-column `time_s,value` CSV
/// (sample rate taken from the time step).
pub fn read_waveform(text: &str) -> Result<Waveform> {
    let first = text.lines().next().ok_or(Error::EmptyInput)?;
    if let Some(rate) = first.strip_prefix(SAMPLE_RATE_KEY) {
        let sample_rate = parse_f64(rate, 1, "sample_rate_hz")?;
        if !(sample_rate > 0.0) {
            return Err(Error::Parse { line: 1, msg: "sample rate must be positive".into() });
        }
        let body = &text[first.len()..].trim_start_matches(['\r', '\n']);
        let cols = read_columns(body, &["interfered_intensity", "drive_mA"], 1)?;
        let mut cols = cols.into_iter();
        let intensity = cols.next().unwrap();
        let drive = cols.next().unwrap();
        return Ok(Waveform { sample_rate, intensity, drive: Some(drive) });
    }
    let cols = read_columns(text, &["time_s", "value"], 0)?;
    let (time, value) = (&cols[0], &cols[1]);
    if time.len() < 2 {
        return Err(Error::TraceTooShort { have: time.len(), need: 2 });
    }
    let step = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Parse { line: 2, msg: "time column must increase".into() });
    }
    Ok(Waveform { sample_rate: 1.0 / step, intensity: value.clone(), drive: None })
}

/// Named numeric columns; `line_offset` accounts for lines consumed before `text`.
fn read_columns(text: &str, names: &[&str], line_offset: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| Error::Parse { line: 1 + line_offset, msg: format!("missing column {n:?}") })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize) + line_offset;
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize) + line_offset;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).ok_or_else(|| Error::Parse { line, msg: "missing field".into() })?;
            out[c].push(parse_f64(field, line, names[c])?);
        }
    }
    if out[0].is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

/// ADC codes, either one integer per line or a CSV with a `code` column.
/// Blank lines are skipped.
pub fn read_codes(text: &str) -> Result<Vec<u32>> {
    let first = text.lines().find(|l| !l.trim().is_empty()).ok_or(Error::EmptyInput)?;
    if first.split(',').any(|h| h.trim() == "code") {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let idx = headers.iter().position(|h| h == "code").expect("header checked");
        let mut codes = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let field = rec.get(idx).ok_or_else(|| Error::Parse { line, msg: "missing code field".into() })?;
            codes.push(parse_code(field, line)?);
        }
        if codes.is_empty() {
            return Err(Error::EmptyInput);
        }
        return Ok(codes);
    }
    let mut codes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        codes.push(parse_code(t, i + 1)?);
    }
    Ok(codes)
}

fn parse_code(s: &str, line: usize) -> Result<u32> {
    s.trim().parse::<u32>().map_err(|e| Error::Parse { line, msg: format!("invalid code {s:?}: {e}") })
}

pub fn codes_text(codes: &[u32]) -> String {
    let mut out = String::with_capacity(codes.len() * 4);
    for c in codes {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}
