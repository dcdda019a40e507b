//! Exact scalar helpers.
//!
//! Every price, quantity and emission figure in the crate is a [`Rational`].
//! Text input accepts `"7"`, `"-3/4"` and `"2.4"`; all three parse exactly.
//! Output uses `num/den` (or a bare integer), with [`to_decimal`] for
//! human-readable mirrors that are never parsed back.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `n / d`, reduced. Panics on a zero denominator.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

impl fmt::Display for ParseRationalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse {:?} as an exact number: {}", self.input, self.reason)
    }
}

impl std::error::Error for ParseRationalError {}

pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let err = |reason| ParseRationalError { input: input.to_string(), reason };
    let s = input.trim();
    if s.is_empty() {
        return Err(err("empty"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let num = parse_int(n.trim()).ok_or_else(|| err("bad numerator"))?;
        let den = parse_int(d.trim()).ok_or_else(|| err("bad denominator"))?;
        if den.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("bad fractional part"));
        }
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("bad integer part"));
        }
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let whole_part = if digits.is_empty() { BigInt::zero() } else { digits.parse::<BigInt>().unwrap() };
        let frac_part = frac.parse::<BigInt>().unwrap();
        let magnitude = Rational::new(whole_part * &scale + frac_part, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    parse_int(s).map(Rational::from_integer).ok_or_else(|| err("not a number"))
}

fn parse_int(s: &str) -> Option<BigInt> {
    let body = s.trim_start_matches(['-', '+']);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) || s.len() - body.len() > 1 {
        return None;
    }
    s.parse().ok()
}

/// `num/den`, or just `num` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Fixed-point rendering rounded half away from zero.
pub fn to_decimal(r: &Rational, places: usize) -> String {
    let scale = BigInt::from(10u32).pow(places as u32);
    let scaled = r.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + ratio(1, 2)).floor().to_integer();
    let (whole, frac) = rounded.div_rem(&scale);
    let sign = if r.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if places == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{:0>width$}", frac.to_string(), width = places)
    }
}

/// Lossy conversion for plotting and logging only.
pub fn to_f64(r: &Rational) -> f64 {
    to_decimal(r, 12).parse().unwrap_or(f64::NAN)
}
