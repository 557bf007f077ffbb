//! Complex scalar helpers: the `{re, im}` wire form, literal parsing and printing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Complex number as serialized in JSON outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cplx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cplx {
    fn from(z: C64) -> Self {
        Cplx { re: z.re, im: z.im }
    }
}

impl From<Cplx> for C64 {
    fn from(z: Cplx) -> Self {
        C64::new(z.re, z.im)
    }
}

/// Prints `z` as a literal accepted by [`parse_complex`], 17 significant digits per part.
pub fn format_complex(z: C64) -> String {
    format!("{:.16e}{:+.16e}i", z.re, z.im)
}

/// Formats a float with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses `[±]float[±]floati`, `[±]float` or `[±]floati` (no spaces).
pub fn parse_complex(text: &str) -> Result<C64> {
    let bad = || Error::InvalidInput(format!("malformed complex literal '{text}'"));
    let s = text.trim();
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return parse_real(s).map(|re| C64::new(re, 0.0)).ok_or_else(bad);
    };
    // Split at the last sign that is not leading and not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = parse_real(&body[..k]).ok_or_else(bad)?;
            let im = parse_imag(&body[k..]).ok_or_else(bad)?;
            Ok(C64::new(re, im))
        }
        None => parse_imag(body).map(|im| C64::new(0.0, im)).ok_or_else(bad),
    }
}

fn parse_real(s: &str) -> Option<f64> {
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.to_ascii_lowercase().contains("inf") {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_imag(s: &str) -> Option<f64> {
    match s {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => parse_real(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn literal_forms() {
        assert_eq!(parse_complex("1+2i").unwrap(), C64::new(1.0, 2.0));
        assert_eq!(parse_complex("-0.5i").unwrap(), C64::new(0.0, -0.5));
        assert_eq!(parse_complex("3").unwrap(), C64::new(3.0, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("1e-3-2E+5i").unwrap(), C64::new(1e-3, -2e5));
        let lam = parse_complex("5.250721274740938+6.750931815875402i").unwrap();
        assert_eq!(lam, C64::new(5.250721274740938, 6.750931815875402));
    }

    #[test]
    fn malformed_literals_rejected() {
        for s in ["", "1 + 2i", "abc", "1+2j", "1++2i", "nani", "1+infi"] {
            assert!(parse_complex(s).is_err(), "{s}");
        }
    }

    proptest! {
        #[test]
        fn print_parse_round_trip_is_bit_exact(re in -1e300f64..1e300, im in -1e300f64..1e300) {
            let z = C64::new(re, im);
            let back = parse_complex(&format_complex(z)).unwrap();
            prop_assert_eq!(back.re.to_bits(), z.re.to_bits());
            prop_assert_eq!(back.im.to_bits(), z.im.to_bits());
        }
    }
}
