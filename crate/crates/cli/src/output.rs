//! JSON serialization with round-trip floats.
//!
//! Every float is printed with 17 significant digits so that parsing the
//! output recovers the exact bit pattern, which keeps runs comparable
//! byte for byte.

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};
use std::io::{self, Write};

/// Compact JSON formatter that prints `f64` values in scientific notation
/// with 17 significant digits.
pub struct RoundTripFormatter;

impl Formatter for RoundTripFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        // Fall back to the default shortest representation; nothing in the
        // public types carries f32.
        CompactFormatter.write_f32(writer, value)
    }
}

/// Serializes `value` as a single compact JSON line.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTripFormatter);
    value
        .serialize(&mut ser)
        .expect("serialization of plain data types cannot fail");
    String::from_utf8(buf).expect("serializer emits UTF-8")
}
