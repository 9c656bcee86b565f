//! JSON output with every float written at 17 significant digits.
//!
//! All persisted artifacts (datasets, checkpoints, formulations, certificates)
//! go through these helpers so that identical values always produce identical
//! bytes and every `f64` survives a write/read cycle exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// Compact JSON formatter that prints floats as `d.dddddddddddddddde±x`.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17Formatter;

impl Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        // serde_json routes non-finite values to write_null before we get here.
        writer.write_all(format_sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Formats a finite float with 17 significant digits in scientific notation.
pub fn format_sig17(value: f64) -> String {
    if value == 0.0 {
        // keep the sign of negative zero out of persisted files
        return "0.0000000000000000e0".to_string();
    }
    format!("{:.16e}", value)
}

/// Serializes `value` as a single compact JSON line.
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Serializes `value` as JSON followed by a trailing newline.
pub fn to_document<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut s = to_line(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[1.0, 0.1, -2.5e-300, 1.0 / 3.0, 6.02214076e23, f64::MAX, f64::MIN_POSITIVE] {
            let s = to_line(&x).unwrap();
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(to_line(&1.5f64).unwrap(), "1.5000000000000000e0");
        assert_eq!(to_line(&-0.0f64).unwrap(), "0.0000000000000000e0");
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(to_line(&f64::INFINITY).unwrap(), "null");
    }
}
