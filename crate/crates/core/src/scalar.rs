//! Scalar abstraction shared by feature spaces, classifiers and distances.
//!
//! Everything numeric in the crate is generic over [`Scalar`], so the same
//! model can be evaluated in `f32`, `f64` or exactly over [`BigRational`].
//! Solver-facing code always converts to rationals first, which is how
//! boundary-sensitive thresholds stay exact even for float models.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Absolute slack used by tolerant comparisons. Zero for exact types.
    fn slack() -> Self;

    fn is_exact() -> bool;

    /// Exact rational value. Floats go through their shortest round-trip
    /// decimal text, so `0.7_f64` becomes `7/10` rather than the binary
    /// expansion.
    fn to_rational(&self) -> BigRational;

    fn from_rational(r: &BigRational) -> Self;

    /// Parses decimal (`-1.25e-3`) or fraction (`3/8`) text.
    fn parse_decimal(s: &str) -> Option<Self>;

    fn sqrt(&self) -> Self;
    fn round(&self) -> Self;
    fn floor(&self) -> Self;

    /// Smallest meaningful difference near `self`; zero for exact types.
    fn resolution(&self) -> Self;

    fn le_tol(&self, other: &Self) -> bool {
        *self <= other.clone() + Self::slack()
    }

    fn eq_tol(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::slack()
    }

    fn from_i64_exact(v: i64) -> Self {
        Self::from_i64(v).expect("every scalar type represents small integers")
    }
}

/// Parses decimal or `p/q` text into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if all.is_empty() { "0" } else { &all }).ok()?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Decimal text for an exact rational when its expansion terminates,
/// `p/q` otherwise.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let scaled = r * BigRational::from_integer(num_traits::pow(BigInt::from(10u32), digits));
    let n = scaled.to_integer();
    let negative = n.is_negative();
    let mut text = n.abs().to_string();
    if text.len() <= digits {
        text = format!("{}{}", "0".repeat(digits + 1 - text.len()), text);
    }
    let (i, f) = text.split_at(text.len() - digits);
    format!("{}{}.{}", if negative { "-" } else { "" }, i, f)
}

macro_rules! float_scalar {
    ($t:ty, $slack:expr) => {
        impl Scalar for $t {
            fn slack() -> Self {
                $slack
            }
            fn is_exact() -> bool {
                false
            }
            fn to_rational(&self) -> BigRational {
                // `{}` prints the shortest text that round-trips.
                parse_rational(&format!("{}", self)).expect("finite float")
            }
            fn from_rational(r: &BigRational) -> Self {
                match r.to_f64() {
                    Some(v) => v as $t,
                    None => {
                        let n = r.numer().to_f64().unwrap_or(0.0);
                        let d = r.denom().to_f64().unwrap_or(1.0);
                        (n / d) as $t
                    }
                }
            }
            fn parse_decimal(s: &str) -> Option<Self> {
                if s.contains('/') {
                    return parse_rational(s).map(|r| Self::from_rational(&r));
                }
                s.trim().parse::<$t>().ok().filter(|v| v.is_finite())
            }
            fn sqrt(&self) -> Self {
                <$t>::sqrt(*self)
            }
            fn round(&self) -> Self {
                <$t>::round(*self)
            }
            fn floor(&self) -> Self {
                <$t>::floor(*self)
            }
            fn resolution(&self) -> Self {
                <$t>::EPSILON * self.abs().max(1.0) * 4.0
            }
        }
    };
}

float_scalar!(f64, 1e-9);
float_scalar!(f32, 1e-5);

impl Scalar for BigRational {
    fn slack() -> Self {
        BigRational::zero()
    }
    fn is_exact() -> bool {
        true
    }
    fn to_rational(&self) -> BigRational {
        self.clone()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn parse_decimal(s: &str) -> Option<Self> {
        parse_rational(s)
    }
    fn sqrt(&self) -> Self {
        // Only used for reporting l2 magnitudes; comparisons square instead.
        let approx = self.to_f64().unwrap_or(0.0).sqrt();
        BigRational::from_float(approx).unwrap_or_else(BigRational::zero)
    }
    fn round(&self) -> Self {
        BigRational::round(self)
    }
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }
    fn resolution(&self) -> Self {
        BigRational::zero()
    }
}

/// Text form of a scalar suitable for model files: exact for rationals,
/// shortest round-trip for floats.
pub fn scalar_text<S: Scalar>(v: &S) -> String {
    if S::is_exact() {
        format_rational(&v.to_rational())
    } else {
        format!("{}", v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.93198992"), Some(q(93198992, 100000000)));
        assert_eq!(parse_rational("-1.5e-3"), Some(q(-3, 2000)));
        assert_eq!(parse_rational("2E2"), Some(q(200, 1)));
        assert_eq!(parse_rational("3/6"), Some(q(1, 2)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("-"), None);
    }

    #[test]
    fn float_to_rational_uses_shortest_decimal() {
        assert_eq!(0.7f64.to_rational(), q(7, 10));
        assert_eq!(1e-6f64.to_rational(), q(1, 1_000_000));
        assert_eq!((-0.25f32).to_rational(), q(-1, 4));
    }

    #[test]
    fn formats_rationals() {
        assert_eq!(format_rational(&q(7, 10)), "0.7");
        assert_eq!(format_rational(&q(-3, 2000)), "-0.0015");
        assert_eq!(format_rational(&q(1, 3)), "1/3");
        assert_eq!(format_rational(&q(5, 1)), "5");
    }

    #[test]
    fn tolerant_comparisons() {
        assert!(0.1f64.le_tol(&(0.1 - 1e-12)));
        assert!(!q(1, 10).le_tol(&(q(1, 10) - q(1, 1_000_000_000_000))));
        assert!(0.3f64.eq_tol(&(0.1 + 0.2)));
    }
}
