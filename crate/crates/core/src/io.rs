//! Record files, CSV result tables, configuration files and plot scripts.
//!
//! # Binary record layout (little-endian)
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `BBDOAREC`                        |
//! | 8      | 4    | format version, `1`                     |
//! | 12     | 4    | kind: `1` real32, `2` complex64         |
//! | 16     | 4    | channel count `M`                       |
//! | 20     | 8    | sample count `N`                        |
//! | 28     | 8    | sample rate in Hz (f64), `0` if none    |
//! | 36     | ...  | payload, channel-major, `M * N` values  |
//!
//! Complex values are stored as `re, im` pairs of f32.
//!
//! # CSV records
//!
//! A header line `# channels=M samples=N rate=fs kind=real|complex`
//! (`rate=none` for narrowband snapshots) followed by one line per
//! channel. Complex rows hold `re,im` pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::SpatialSpectrum;
use crate::fusion::BearingTimeRecord;
use crate::montecarlo::BenchResult;
use crate::sim::{SnapshotData, SnapshotMatrix};

pub const MAGIC: &[u8; 8] = b"BBDOAREC";
const VERSION: u32 = 1;
const HEADER_LEN: u64 = 36;
const KIND_REAL32: u32 = 1;
const KIND_COMPLEX64: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Binary,
    Csv,
}

impl RecordFormat {
    /// `.csv` selects CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => RecordFormat::Csv,
            _ => RecordFormat::Binary,
        }
    }
}

/// Encodes a record. Samples are narrowed to f32.
pub fn encode_record(record: &SnapshotMatrix) -> Vec<u8> {
    let (m, n) = (record.channels(), record.samples());
    let (kind, width) = match record.data() {
        SnapshotData::Time(_) => (KIND_REAL32, 4),
        SnapshotData::Narrowband(_) => (KIND_COMPLEX64, 8),
    };
    let mut out = Vec::with_capacity(HEADER_LEN as usize + m * n * width);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&record.sample_rate().unwrap_or(0.0).to_le_bytes());
    match record.data() {
        SnapshotData::Time(d) => {
            for ch in 0..m {
                for t in 0..n {
                    out.extend_from_slice(&(d[(ch, t)] as f32).to_le_bytes());
                }
            }
        }
        SnapshotData::Narrowband(d) => {
            for ch in 0..m {
                for t in 0..n {
                    let v = d[(ch, t)];
                    out.extend_from_slice(&(v.re as f32).to_le_bytes());
                    out.extend_from_slice(&(v.im as f32).to_le_bytes());
                }
            }
        }
    }
    out
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn read_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn read_f32(b: &[u8], at: usize) -> f64 {
    f64::from(f32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes")))
}

/// Decodes a binary record; any inconsistency is a parse error naming the
/// offending byte offset.
pub fn decode_record(bytes: &[u8]) -> Result<SnapshotMatrix> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(Error::parse(0, "bad magic"));
    }
    if (bytes.len() as u64) < HEADER_LEN {
        return Err(Error::parse(bytes.len() as u64, "truncated header"));
    }
    let version = read_u32(bytes, 8);
    if version != VERSION {
        return Err(Error::parse(8, format!("unsupported version {version}")));
    }
    let kind = read_u32(bytes, 12);
    let width: u64 = match kind {
        KIND_REAL32 => 4,
        KIND_COMPLEX64 => 8,
        other => return Err(Error::parse(12, format!("unknown data kind {other}"))),
    };
    let m = read_u32(bytes, 16) as u64;
    if m < 2 {
        return Err(Error::parse(16, format!("channel count {m} below 2")));
    }
    let n = read_u64(bytes, 20);
    if n == 0 {
        return Err(Error::parse(20, "zero samples"));
    }
    let rate = f64::from_le_bytes(bytes[28..36].try_into().expect("8 bytes"));
    let expected = m
        .checked_mul(n)
        .and_then(|v| v.checked_mul(width))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::parse(16, "header sizes overflow"))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::parse(actual, format!("truncated payload: expected {expected} bytes")));
    }
    if actual > expected {
        return Err(Error::parse(expected, format!("{} bytes beyond the declared payload", actual - expected)));
    }
    let (m, n) = (m as usize, n as usize);
    let base = HEADER_LEN as usize;
    match kind {
        KIND_REAL32 => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::parse(28, "time records need a positive sample rate"));
            }
            let data = DMatrix::from_fn(m, n, |ch, t| read_f32(bytes, base + 4 * (ch * n + t)));
            SnapshotMatrix::time(data, rate)
        }
        _ => {
            let data = DMatrix::from_fn(m, n, |ch, t| {
                let at = base + 8 * (ch * n + t);
                Complex64::new(read_f32(bytes, at), read_f32(bytes, at + 4))
            });
            SnapshotMatrix::narrowband(data)
        }
    }
    .map_err(|e| Error::parse(HEADER_LEN, e.to_string()))
}

/// CSV text of a record; values use the shortest round-trip representation.
pub fn record_to_csv(record: &SnapshotMatrix) -> String {
    let (m, n) = (record.channels(), record.samples());
    let rate = record
        .sample_rate()
        .map_or_else(|| "none".to_string(), |r| r.to_string());
    let mut out = String::new();
    match record.data() {
        SnapshotData::Time(d) => {
            let _ = writeln!(out, "# channels={m} samples={n} rate={rate} kind=real");
            for ch in 0..m {
                let row: Vec<String> = (0..n).map(|t| d[(ch, t)].to_string()).collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        SnapshotData::Narrowband(d) => {
            let _ = writeln!(out, "# channels={m} samples={n} rate={rate} kind=complex");
            for ch in 0..m {
                let row: Vec<String> = (0..n)
                    .map(|t| format!("{},{}", d[(ch, t)].re, d[(ch, t)].im))
                    .collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
    }
    out
}

/// Parses [`record_to_csv`] output. Offsets in errors are byte offsets of
/// the offending line.
pub fn record_from_csv(text: &str) -> Result<SnapshotMatrix> {
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| Error::parse(0, "empty file"))?;
    let body = header
        .trim_end()
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(0, "missing '# channels=...' header"))?;
    let (mut m, mut n, mut rate, mut kind) = (None, None, None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(0, format!("malformed header field '{field}'")))?;
        match key {
            "channels" => m = value.parse::<usize>().ok(),
            "samples" => n = value.parse::<usize>().ok(),
            "rate" => rate = Some(if value == "none" { None } else { value.parse::<f64>().ok() }),
            "kind" => kind = Some(value.to_string()),
            other => return Err(Error::parse(0, format!("unknown header field '{other}'"))),
        }
    }
    let (Some(m), Some(n)) = (m, n) else {
        return Err(Error::parse(0, "header lacks valid channels/samples"));
    };
    let complex = match kind.as_deref() {
        Some("real") | None => false,
        Some("complex") => true,
        Some(other) => return Err(Error::parse(0, format!("unknown kind '{other}'"))),
    };
    let width = if complex { 2 * n } else { n };
    let mut values = Vec::with_capacity(m * width);
    let mut offset = header.len() as u64;
    let mut rows = 0;
    for line in lines {
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            offset += line.len() as u64;
            continue;
        }
        if rows == m {
            return Err(Error::parse(offset, format!("more than {m} channel rows")));
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(offset, format!("bad number: {e}")))?;
        if row.len() != width {
            return Err(Error::parse(offset, format!("expected {width} values, found {}", row.len())));
        }
        values.extend(row);
        rows += 1;
        offset += line.len() as u64;
    }
    if rows != m {
        return Err(Error::parse(offset, format!("expected {m} channel rows, found {rows}")));
    }
    let record = if complex {
        let data = DMatrix::from_fn(m, n, |ch, t| {
            Complex64::new(values[ch * width + 2 * t], values[ch * width + 2 * t + 1])
        });
        SnapshotMatrix::narrowband(data)
    } else {
        let rate = rate
            .flatten()
            .ok_or_else(|| Error::parse(0, "time records need a numeric rate"))?;
        SnapshotMatrix::time(DMatrix::from_fn(m, n, |ch, t| values[ch * width + t]), rate)
    };
    record.map_err(|e| Error::parse(0, e.to_string()))
}

pub fn save_record(record: &SnapshotMatrix, path: &Path, format: RecordFormat) -> Result<()> {
    let bytes = match format {
        RecordFormat::Binary => encode_record(record),
        RecordFormat::Csv => record_to_csv(record).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_record(path: &Path, format: RecordFormat) -> Result<SnapshotMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        RecordFormat::Binary => decode_record(&bytes),
        RecordFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| Error::parse(e.valid_up_to() as u64, "file is not UTF-8"))?;
            record_from_csv(text)
        }
    }
}

/// Formats with nine significant digits: fixed notation for magnitudes in
/// `[1e-4, 1e9)`, scientific otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

/// Provenance line written at the top of every table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub estimator: String,
}

impl Manifest {
    pub fn line(&self) -> String {
        format!(
            "# manifest config_sha256={} seed={} estimator={}\n",
            self.config_hash, self.seed, self.estimator
        )
    }
}

/// Something that renders as a CSV table.
pub trait Table {
    fn to_csv(&self, manifest: &Manifest) -> String;
}

impl Table for SpatialSpectrum {
    fn to_csv(&self, manifest: &Manifest) -> String {
        let mut out = manifest.line();
        out.push_str("angle_deg,power,power_db\n");
        for ((a, p), db) in self.angles.iter().zip(&self.power).zip(self.db()) {
            let _ = writeln!(out, "{},{},{}", fmt_sig(*a), fmt_sig(*p), fmt_sig(db));
        }
        out
    }
}

impl Table for BearingTimeRecord {
    fn to_csv(&self, manifest: &Manifest) -> String {
        let mut out = manifest.line();
        out.push_str("time_s");
        for a in &self.angles {
            let _ = write!(out, ",{}", fmt_sig(*a));
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.power_db) {
            out.push_str(&fmt_sig(*t));
            for v in row {
                let _ = write!(out, ",{}", fmt_sig(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Accuracy table. Runtimes are machine-dependent and go to
/// [`bench_timing_csv`] so that this table is reproducible byte for byte.
impl Table for BenchResult {
    fn to_csv(&self, manifest: &Manifest) -> String {
        let mut out = manifest.line();
        out.push_str("scenario,estimator,elements,position_error,snapshots,snr_db,rmse_deg,success_pct,trials,failures\n");
        for r in &self.rows {
            let p = &r.point;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.scenario,
                r.estimator,
                p.elements,
                fmt_sig(p.position_error),
                p.snapshots,
                fmt_sig(p.snr_db),
                fmt_sig(r.rmse_deg),
                fmt_sig(r.success_pct),
                r.trials,
                r.failures
            );
        }
        out
    }
}

/// Mean runtime per estimator and sweep point, with the ratio to
/// q-SPICE-GNR² at the same point.
pub fn bench_timing_csv(result: &BenchResult, manifest: &Manifest) -> String {
    let mut out = manifest.line();
    out.push_str("scenario,estimator,elements,position_error,snapshots,snr_db,mean_runtime_s,ratio_to_gnr2\n");
    for r in &result.rows {
        let p = &r.point;
        let ratio = result.runtime_ratio(r).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            result.scenario,
            r.estimator,
            p.elements,
            fmt_sig(p.position_error),
            p.snapshots,
            fmt_sig(p.snr_db),
            fmt_sig(r.mean_runtime_s),
            fmt_sig(ratio)
        );
    }
    out
}

pub fn save_table(table: &impl Table, manifest: &Manifest, path: &Path) -> Result<()> {
    write_text(path, &table.to_csv(manifest))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a TOML (default) or JSON (`.json`) configuration file.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Spectrum,
    Btr,
    Bench,
}

/// A gnuplot script that plots `csv_name` (as written by [`save_table`]).
pub fn gnuplot_script(kind: PlotKind, csv_name: &str) -> String {
    let head = format!("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\nfile = '{csv_name}'\n");
    let body = match kind {
        PlotKind::Spectrum => {
            "set xlabel 'angle (deg)'\nset ylabel 'power (dB)'\nplot file using 1:3 with lines title 'spectrum'\n"
                .to_string()
        }
        PlotKind::Btr => "set xlabel 'angle (deg)'\nset ylabel 'time (s)'\nset view map\n\
             plot file nonuniform matrix using 2:1:3 with image notitle\n"
            .to_string(),
        PlotKind::Bench => "set xlabel 'SNR (dB)'\nset ylabel 'RMSE (deg)'\nset logscale y\n\
             estimators = system(\"tail -n +3 \".file.\" | cut -d, -f2 | sort -u\")\n\
             plot for [e in estimators] file using (strcol(2) eq e ? $6 : NaN):7 with linespoints title e\n"
            .to_string(),
    };
    head + &body
}
