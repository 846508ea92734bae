//! Accelerometer CSV: header `t_ms,x,y,z`, one sample per row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Location, Result};
use crate::signal::VibrationWindow;

pub const CSV_HEADER: &str = "t_ms,x,y,z";

/// Parsed rows; may be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccelSeries {
    pub t_ms: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl AccelSeries {
    pub fn len(&self) -> usize {
        self.t_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ms.is_empty()
    }

    /// Rate implied by the median timestamp step.
    pub fn inferred_rate_hz(&self) -> Option<u32> {
        let mut steps: Vec<f64> = self
            .t_ms
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 0.0)
            .collect();
        if steps.is_empty() {
            return None;
        }
        steps.sort_by(f64::total_cmp);
        let hz = (1000.0 / steps[steps.len() / 2]).round();
        (hz >= 1.0 && hz <= f64::from(u32::MAX)).then_some(hz as u32)
    }

    pub fn into_window(self, sample_rate_hz: u32) -> Result<VibrationWindow> {
        let start = self.t_ms.first().map_or(0, |t| t.max(0.0).round() as u64);
        VibrationWindow::new(self.x, self.y, self.z, sample_rate_hz, start)
    }
}

/// Decimal text with six significant digits, no exponent.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() {
            "0".into()
        } else {
            v.to_string()
        };
    }
    let exp = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - exp);
    let rounded = (v * scale).round() / scale;
    // Rounding may carry into the next decade (9.999995 -> 10.0000).
    let exp = if rounded != 0.0 {
        rounded.abs().log10().floor() as i32
    } else {
        exp
    };
    let decimals = (5 - exp).max(0) as usize;
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(t);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn format_ms(t: f64) -> String {
    let mut s = format!("{t:.3}");
    let t = s.trim_end_matches('0').trim_end_matches('.').len();
    s.truncate(t);
    s
}

pub fn accel_csv_string(t_ms: &[f64], axes: [&[f64]; 3]) -> Result<String> {
    if axes.iter().any(|a| a.len() != t_ms.len()) {
        return Err(Error::invalid("column lengths differ"));
    }
    if t_ms.windows(2).any(|w| w[1] < w[0])
        || t_ms
            .iter()
            .chain(axes.iter().flat_map(|a| a.iter()))
            .any(|v| !v.is_finite())
    {
        return Err(Error::invalid(
            "timestamps must be non-decreasing and all values finite",
        ));
    }
    let mut out = String::with_capacity(32 * (t_ms.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..t_ms.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_ms(t_ms[i]),
            format_sig6(axes[0][i]),
            format_sig6(axes[1][i]),
            format_sig6(axes[2][i])
        );
    }
    Ok(out)
}

/// Timestamps are the window start plus the sample offset.
pub fn write_accel_csv(path: &Path, win: &VibrationWindow) -> Result<()> {
    let rate = f64::from(win.sample_rate_hz());
    let t: Vec<f64> = (0..win.len())
        .map(|i| win.start_ts_ms() as f64 + i as f64 * 1000.0 / rate)
        .collect();
    fs::write(path, accel_csv_string(&t, win.axes())?)?;
    Ok(())
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    let msg = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            len, expected_len, ..
        } => format!("expected {expected_len} columns, found {len}"),
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => e.to_string(),
    };
    Error::format(Location::Line(line.max(1)), msg)
}

fn check_header(header: &csv::StringRecord) -> Result<()> {
    if header.iter().collect::<Vec<_>>() != CSV_HEADER.split(',').collect::<Vec<_>>() {
        return Err(Error::format(
            Location::Line(1),
            format!(
                "expected header '{CSV_HEADER}', found '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

fn parse_row(record: &csv::StringRecord) -> Result<[f64; 4]> {
    let line_no = record.position().map_or(0, |p| p.line() as usize);
    let err = |m: String| Error::format(Location::Line(line_no), m);
    let mut vals = [0.0; 4];
    for (k, (cell, name)) in record.iter().zip(["t_ms", "x", "y", "z"]).enumerate() {
        let v: f64 = cell
            .parse()
            .map_err(|_| err(format!("{name}: '{cell}' is not a number")))?;
        if !v.is_finite() {
            return Err(err(format!("{name}: non-finite value")));
        }
        vals[k] = v;
    }
    Ok(vals)
}

fn builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(true).trim(csv::Trim::All);
    b
}

pub fn parse_accel_bytes(bytes: &[u8]) -> Result<AccelSeries> {
    let mut reader = builder().from_reader(bytes);
    check_header(reader.headers().map_err(|e| csv_error(&e))?)?;
    let mut s = AccelSeries::default();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let vals = parse_row(&record)?;
        if s.t_ms.last().is_some_and(|&prev| vals[0] < prev) {
            let line_no = record.position().map_or(0, |p| p.line() as usize);
            return Err(Error::format(
                Location::Line(line_no),
                format!("t_ms {} goes backwards", vals[0]),
            ));
        }
        s.t_ms.push(vals[0]);
        s.x.push(vals[1]);
        s.y.push(vals[2]);
        s.z.push(vals[3]);
    }
    Ok(s)
}

/// Row-by-row reader for pipes. A malformed row yields an error and the
/// stream continues with the next row.
pub struct AccelStream<R> {
    reader: csv::Reader<R>,
    record: csv::StringRecord,
}

impl<R: std::io::Read> AccelStream<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut reader = builder().flexible(true).from_reader(inner);
        check_header(reader.headers().map_err(|e| csv_error(&e))?)?;
        Ok(Self {
            reader,
            record: csv::StringRecord::new(),
        })
    }
}

impl<R: std::io::Read> Iterator for AccelStream<R> {
    /// `[t_ms, x, y, z]`
    type Item = Result<[f64; 4]>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.reader.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) if self.record.len() != 4 => {
                let line = self.record.position().map_or(0, |p| p.line() as usize);
                Some(Err(Error::format(
                    Location::Line(line),
                    format!("expected 4 columns, found {}", self.record.len()),
                )))
            }
            Ok(true) => Some(parse_row(&self.record)),
            Err(e) if e.is_io_error() => {
                let msg = e.to_string();
                match e.into_kind() {
                    csv::ErrorKind::Io(io) => Some(Err(Error::Io(io))),
                    _ => Some(Err(Error::invalid(msg))),
                }
            }
            Err(e) => Some(Err(csv_error(&e))),
        }
    }
}

pub fn parse_accel_csv(text: &str) -> Result<AccelSeries> {
    parse_accel_bytes(text.as_bytes())
}

pub fn read_accel_csv(path: &Path) -> Result<AccelSeries> {
    parse_accel_bytes(&fs::read(path)?)
}
