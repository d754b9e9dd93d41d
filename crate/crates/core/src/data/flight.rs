//! Recorded flights and their CSV form.
//!
//! One row per timestep, comma separated, header row required. Columns are
//! matched by name, so order and extra columns do not matter:
//!
//! | column | unit |
//! |---|---|
//! | `indicated_airspeed` | kt |
//! | `true_airspeed` | kt |
//! | `elevator_input` | fraction of full pilot input, -1..1 |
//! | `aileron_input` | fraction, -1..1 |
//! | `rudder_input` | fraction, -1..1 |
//! | `pitch` | deg |
//! | `roll` | deg |
//! | `angle_of_attack` | deg |
//! | `throttle_1`, `throttle_2` | fraction 0..1 |
//! | `thrust_1`, `thrust_2` | N |
//! | `rpm_1`, `rpm_2` | rev/min |
//! | `elevator_deflection` | deg |
//! | `vertical_speed` | ft/min |
//! | `stall_warning` | 0 or 1 |
//! | `time_s` (optional) | s, uniformly spaced |

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::StringRecord;

use crate::error::{Error, Result};
use crate::synth::FlightKind;

pub const FEATURE_COUNT: usize = 16;

/// Flight-parameter columns, in feature order.
pub const CHANNELS: [&str; FEATURE_COUNT] = [
    "indicated_airspeed",
    "true_airspeed",
    "elevator_input",
    "aileron_input",
    "rudder_input",
    "pitch",
    "roll",
    "angle_of_attack",
    "throttle_1",
    "throttle_2",
    "thrust_1",
    "thrust_2",
    "rpm_1",
    "rpm_2",
    "elevator_deflection",
    "vertical_speed",
];

pub const WARNING_COLUMN: &str = "stall_warning";
pub const TIME_COLUMN: &str = "time_s";

/// Index of a channel in [`CHANNELS`].
pub fn channel_index(name: &str) -> Option<usize> {
    CHANNELS.iter().position(|c| *c == name)
}

pub type Row = [f64; FEATURE_COUNT];

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub sample_rate_hz: f64,
    pub rows: Vec<Row>,
    pub stall_warning: Vec<bool>,
    /// Set for generated flights.
    pub kind: Option<FlightKind>,
}

impl TimeSeries {
    pub fn new(
        name: impl Into<String>,
        sample_rate_hz: f64,
        rows: Vec<Row>,
        stall_warning: Vec<bool>,
    ) -> Result<Self> {
        if rows.len() != stall_warning.len() {
            return Err(Error::invalid(format!(
                "{} parameter rows but {} warning values",
                rows.len(),
                stall_warning.len()
            )));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid(format!("sample rate {sample_rate_hz} Hz")));
        }
        Ok(TimeSeries {
            name: name.into(),
            sample_rate_hz,
            rows,
            stall_warning,
            kind: None,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        FEATURE_COUNT
    }

    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let i = channel_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn warning_count(&self) -> usize {
        self.stall_warning.iter().filter(|&&w| w).count()
    }

    pub fn first_warning(&self) -> Option<usize> {
        self.stall_warning.iter().position(|&w| w)
    }
}

/// Maps CSV header positions onto channels.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    channels: [usize; FEATURE_COUNT],
    warning: Option<usize>,
    time: Option<usize>,
}

impl ColumnMap {
    /// Fails with a schema error naming the first missing column.
    pub fn from_header(header: &StringRecord, require_warning: bool) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let mut channels = [0; FEATURE_COUNT];
        for (slot, name) in channels.iter_mut().zip(CHANNELS) {
            *slot = find(name).ok_or_else(|| Error::Schema(name.to_string()))?;
        }
        let warning = find(WARNING_COLUMN);
        if require_warning && warning.is_none() {
            return Err(Error::Schema(WARNING_COLUMN.to_string()));
        }
        Ok(ColumnMap {
            channels,
            warning,
            time: find(TIME_COLUMN),
        })
    }

    pub fn has_time(&self) -> bool {
        self.time.is_some()
    }

    /// Parses one data record. `line` is the 1-based file line for messages.
    pub fn parse(&self, record: &StringRecord, line: usize) -> Result<ParsedRow> {
        let cell = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                column: column.to_string(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Validation {
                    line,
                    message: format!("`{column}` is not finite"),
                });
            }
            Ok(v)
        };
        let mut values = [0.0; FEATURE_COUNT];
        for ((v, &idx), name) in values.iter_mut().zip(&self.channels).zip(CHANNELS) {
            *v = cell(idx, name)?;
        }
        let warning = match self.warning {
            Some(idx) => {
                let w = cell(idx, WARNING_COLUMN)?;
                if w == 0.0 {
                    Some(false)
                } else if w == 1.0 {
                    Some(true)
                } else {
                    return Err(Error::Validation {
                        line,
                        message: format!("`{WARNING_COLUMN}` must be 0 or 1, got {w}"),
                    });
                }
            }
            None => None,
        };
        let time = match self.time {
            Some(idx) => Some(cell(idx, TIME_COLUMN)?),
            None => None,
        };
        Ok(ParsedRow {
            values,
            warning,
            time,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub values: Row,
    pub warning: Option<bool>,
    pub time: Option<f64>,
}

/// Reads a flight recording from CSV. The sample rate comes from `time_s`
/// when present and is 1 Hz otherwise.
pub fn parse_flight_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_flight_reader(file, name)
}

pub fn parse_flight_reader(reader: impl Read, name: impl Into<String>) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    let map = ColumnMap::from_header(&header, true)?;
    let mut rows = Vec::new();
    let mut warning = Vec::new();
    let mut times = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = map.parse(&record, line)?;
        rows.push(row.values);
        warning.push(row.warning.unwrap_or(false));
        if let Some(t) = row.time {
            times.push((line, t));
        }
    }
    let sample_rate_hz = if times.len() >= 2 {
        let dt = times[1].1 - times[0].1;
        if dt <= 0.0 {
            return Err(Error::Format(format!(
                "line {}: `{TIME_COLUMN}` must increase",
                times[1].0
            )));
        }
        let tol = 1e-6 * dt.max(1.0);
        for pair in times.windows(2) {
            if ((pair[1].1 - pair[0].1) - dt).abs() > tol {
                return Err(Error::Format(format!(
                    "line {}: non-uniform `{TIME_COLUMN}` spacing",
                    pair[1].0
                )));
            }
        }
        1.0 / dt
    } else {
        1.0
    };
    TimeSeries::new(name, sample_rate_hz, rows, warning)
}

/// Writes the CSV schema [`parse_flight_csv`] reads, including `time_s`.
pub fn write_flight_csv(ts: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_flight_writer(ts, file).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_flight_writer(ts: &TimeSeries, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec![TIME_COLUMN];
    header.extend(CHANNELS);
    header.push(WARNING_COLUMN);
    w.write_record(&header).map_err(fmt)?;
    for (t, (row, warn)) in ts.rows.iter().zip(&ts.stall_warning).enumerate() {
        let mut rec = Vec::with_capacity(FEATURE_COUNT + 2);
        rec.push((t as f64 / ts.sample_rate_hz).to_string());
        rec.extend(row.iter().map(f64::to_string));
        rec.push(if *warn { "1" } else { "0" }.to_string());
        w.write_record(&rec).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_text(rows: usize, drop: Option<&str>, warn_value: &str) -> String {
        let cols: Vec<&str> = CHANNELS
            .iter()
            .copied()
            .filter(|c| Some(*c) != drop)
            .chain([WARNING_COLUMN])
            .collect();
        let mut s = cols.join(",");
        s.push('\n');
        for t in 0..rows {
            let vals: Vec<String> = cols
                .iter()
                .map(|c| {
                    if *c == WARNING_COLUMN {
                        warn_value.to_string()
                    } else {
                        format!("{}.5", t)
                    }
                })
                .collect();
            s.push_str(&vals.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_seventeen_columns() {
        let ts = parse_flight_reader(csv_text(100, None, "0").as_bytes(), "f").unwrap();
        assert_eq!(ts.len(), 100);
        assert_eq!(ts.sample_rate_hz, 1.0);
        assert_eq!(ts.rows[3][7], 3.5);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_flight_reader(csv_text(5, Some("angle_of_attack"), "0").as_bytes(), "f")
            .unwrap_err();
        match err {
            Error::Schema(col) => assert_eq!(col, "angle_of_attack"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn warning_outside_boolean_domain_is_rejected() {
        let err = parse_flight_reader(csv_text(3, None, "2").as_bytes(), "f").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let mut text = csv_text(4, None, "0");
        text = text.replacen("2.5", "abc", 1);
        match parse_flight_reader(text.as_bytes(), "f").unwrap_err() {
            Error::Parse { line, value, .. } => {
                assert_eq!(line, 4);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn time_column_sets_rate_and_must_be_uniform() {
        let mut ts = parse_flight_reader(csv_text(6, None, "0").as_bytes(), "f").unwrap();
        ts.sample_rate_hz = 4.0;
        let mut buf = Vec::new();
        write_flight_writer(&ts, &mut buf).unwrap();
        let back = parse_flight_reader(buf.as_slice(), "f").unwrap();
        assert_eq!(back.sample_rate_hz, 4.0);
        assert_eq!(back.rows, ts.rows);

        let text = String::from_utf8(buf).unwrap().replacen("\n0.75,", "\n0.8,", 1);
        assert!(matches!(
            parse_flight_reader(text.as_bytes(), "f"),
            Err(Error::Format(_))
        ));
    }
}
