//! JSON output with floats printed at 17 significant digits so every value
//! round-trips exactly through text.

use serde::Serialize;
use serde_json::ser::Formatter;
use std::io;

struct SigFigFormatter;

impl Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        // serde_json routes non-finite values to write_null before this.
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serializes a value to a JSON string with 17-significant-digit floats
/// and a trailing newline.
pub fn to_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serializer emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_roundtrip_exactly() {
        #[derive(Serialize)]
        struct S {
            x: f64,
            none: Option<f64>,
            inf: f64,
        }
        let x = 1.0 / 3.0;
        let s = to_string(&S { x, none: None, inf: f64::INFINITY }).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["x"].as_f64().unwrap(), x);
        assert!(parsed["none"].is_null());
        assert!(parsed["inf"].is_null());
    }
}
