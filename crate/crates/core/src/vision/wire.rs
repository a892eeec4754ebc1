//! Newline-delimited text records, one measurement per line:
//! `rig_id,t_capture,t_arrival,zx,zy,zz,sigma`.

use std::io::{self, BufRead, Write};

use nalgebra::Vector3;
use thiserror::Error;

use super::Measurement;
use crate::scalar::Real;

pub const FIELD_COUNT: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("expected {FIELD_COUNT} fields, found {0}")]
    FieldCount(usize),
    #[error("field {index}: cannot parse {text:?}")]
    Parse { index: usize, text: String },
    #[error("field {0}: value is not finite")]
    NonFinite(usize),
    #[error("arrival time precedes capture time")]
    ArrivalBeforeCapture,
    #[error("sigma must be positive")]
    NonPositiveSigma,
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<WireError> },
    #[error("i/o: {0}")]
    Io(String),
}

/// Timestamps are written with six decimals; positions and sigma use the
/// shortest text that parses back to the same value.
pub fn encode_measurement<T: Real>(m: &Measurement<T>) -> String {
    format!(
        "{},{:.6},{:.6},{:?},{:?},{:?},{:?}",
        m.rig_id,
        m.t_capture.as_f64(),
        m.t_arrival.as_f64(),
        m.z.x.as_f64(),
        m.z.y.as_f64(),
        m.z.z.as_f64(),
        m.sigma.as_f64()
    )
}

pub fn decode_measurement<T: Real>(record: &str) -> Result<Measurement<T>, WireError> {
    let fields: Vec<&str> = record.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() != FIELD_COUNT {
        return Err(WireError::FieldCount(fields.len()));
    }
    let rig_id =
        fields[0].trim().parse::<u32>().map_err(|_| WireError::Parse { index: 0, text: fields[0].to_string() })?;
    let mut vals = [0.0f64; FIELD_COUNT - 1];
    for (i, slot) in vals.iter_mut().enumerate() {
        let text = fields[i + 1].trim();
        let v: f64 = text.parse().map_err(|_| WireError::Parse { index: i + 1, text: text.to_string() })?;
        if !v.is_finite() {
            return Err(WireError::NonFinite(i + 1));
        }
        *slot = v;
    }
    let [t_capture, t_arrival, zx, zy, zz, sigma] = vals;
    if t_arrival < t_capture {
        return Err(WireError::ArrivalBeforeCapture);
    }
    if sigma <= 0.0 {
        return Err(WireError::NonPositiveSigma);
    }
    Ok(Measurement {
        rig_id,
        t_capture: T::lit(t_capture),
        t_arrival: T::lit(t_arrival),
        z: Vector3::new(T::lit(zx), T::lit(zy), T::lit(zz)),
        sigma: T::lit(sigma),
    })
}

pub fn write_records<T: Real, W: Write>(mut out: W, ms: &[Measurement<T>]) -> io::Result<()> {
    for m in ms {
        writeln!(out, "{}", encode_measurement(m))?;
    }
    Ok(())
}

/// Reads records until end of input, skipping blank lines.
pub fn read_records<T: Real, R: BufRead>(input: R) -> Result<Vec<Measurement<T>>, WireError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| WireError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(decode_measurement(&line).map_err(|e| WireError::Line { line: i + 1, source: Box::new(e) })?);
    }
    Ok(out)
}
