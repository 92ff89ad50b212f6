//! Reproducible text encodings.
//!
//! All floating-point output is fixed at 17 significant digits, which is
//! enough to round-trip any f64 bit-exactly through its decimal string.
//! JSON goes through a formatter that applies the same rule, so identical
//! runs diff byte-for-byte.

use std::io;

use serde::Serialize;

/// 17-significant-digit scientific encoding; round-trips f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// serde_json formatter that renders every float via [`fmt_f64`].
pub struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to a JSON string with 17-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("report types serialize without error");
    String::from_utf8(out).expect("serde_json emits utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips_bit_exactly() {
        let mut stream = crate::rng::Stream::from_key(&[42]);
        for _ in 0..10_000 {
            let x = (stream.next_f64() - 0.5) * stream.next_f64().recip();
            let parsed: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(parsed.to_bits(), x.to_bits(), "{x:?}");
        }
    }

    #[test]
    fn json_floats_use_scientific_form() {
        #[derive(Serialize)]
        struct S {
            v: f64,
        }
        let s = to_json_string(&S { v: 0.1 });
        assert_eq!(s, "{\"v\":1.0000000000000001e-1}");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["v"].as_f64().unwrap(), 0.1);
    }
}
