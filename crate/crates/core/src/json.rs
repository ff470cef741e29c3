//! JSON output with full-precision reals.
//!
//! serde_json's default float output is the shortest round-trip form, which
//! can be as short as one significant digit. Files written here always carry
//! 17 significant digits in scientific notation.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

pub struct PreciseFormatter<F> {
    inner: F,
}

macro_rules! forward {
    ($($name:ident),*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.inner.$name(w)
            }
        )*
    };
}

macro_rules! forward_first {
    ($($name:ident),*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
                self.inner.$name(w, first)
            }
        )*
    };
}

impl<F: Formatter> Formatter for PreciseFormatter<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    forward!(begin_array, end_array, begin_object, end_object, end_array_value, end_object_value, begin_object_value);
    forward_first!(begin_array_value, begin_object_key);
}

fn write_with<T: Serialize + ?Sized, F: Formatter>(value: &T, formatter: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter { inner: formatter });
    value
        .serialize(&mut ser)
        .expect("serializing in-memory values cannot fail");
    String::from_utf8(buf).expect("serde_json emits utf-8")
}

pub fn to_string_precise<T: Serialize + ?Sized>(value: &T) -> String {
    write_with(value, CompactFormatter)
}

pub fn to_string_precise_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    write_with(value, PrettyFormatter::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_keep_seventeen_digits() {
        let s = to_string_precise(&vec![0.1_f64, 1.0 / 3.0]);
        assert_eq!(s, "[1.0000000000000001e-1,3.3333333333333331e-1]");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0 / 3.0]);
    }

    #[test]
    fn integers_untouched() {
        #[derive(Serialize)]
        struct S {
            n: usize,
            x: f64,
        }
        assert_eq!(to_string_precise(&S { n: 3, x: 2.0 }), r#"{"n":3,"x":2.0000000000000000e0}"#);
    }
}
