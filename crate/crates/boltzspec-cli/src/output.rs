//! Machine-readable outputs: JSON with a fixed 17-significant-digit float
//! format (rejecting non-finite values) and CSV writers with the same float
//! policy.

use serde::Serialize;
use serde_json::ser::Formatter;
use std::io::{self, Write};

/// Formats every float with 17 significant digits so outputs are stable and
/// lossless; refuses NaN and infinities.
struct SciFormatter;

impl Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        if !value.is_finite() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "refusing to serialize a non-finite float",
            ));
        }
        write!(writer, "{}", format_f64(value))
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// 17 significant digits in scientific notation (a valid JSON number).
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Serializes to JSON text with the fixed float format, failing on NaN.
pub fn to_json_string<T: Serialize>(value: &T) -> io::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> io::Result<()> {
    let text = to_json_string(value)?;
    std::fs::write(path, text)
}

/// Minimal CSV writer: header plus rows of formatted fields.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv {
            buf: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[CsvField<'_>]) {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            match f {
                CsvField::Float(x) => self.buf.push_str(&format_f64(*x)),
                CsvField::Int(i) => self.buf.push_str(&i.to_string()),
                CsvField::Str(s) => self.buf.push_str(s),
            }
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub enum CsvField<'a> {
    Float(f64),
    Int(i64),
    Str(&'a str),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        let s = format_f64(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        // round trip
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn json_rejects_nan() {
        #[derive(Serialize)]
        struct Bad {
            x: f64,
        }
        assert!(to_json_string(&Bad { x: f64::NAN }).is_err());
        let ok = to_json_string(&Bad { x: 0.5 }).unwrap();
        assert!(ok.contains("5.0000000000000000e-1"));
    }
}
