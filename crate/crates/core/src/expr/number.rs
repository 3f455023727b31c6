use std::cmp::Ordering;
use std::fmt;

use num::complex::Complex64;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// An exact Gaussian rational `re + im·i`.
///
/// Every literal in an expression is held in this form, so constant folding
/// never rounds and the polynomial zero test can evaluate exactly.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Number {
    re: BigRational,
    im: BigRational,
}

impl Number {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Number { re, im }
    }

    pub fn zero() -> Self {
        Number::from_integer(0)
    }

    pub fn one() -> Self {
        Number::from_integer(1)
    }

    pub fn i() -> Self {
        Number::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Number::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Number::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(re: BigRational) -> Self {
        Number::new(re, BigRational::zero())
    }

    /// Exact value of a finite `f64`; `None` for NaN or infinities.
    pub fn from_f64(value: f64) -> Option<Self> {
        BigRational::from_float(value).map(Number::from_rational)
    }

    /// Exact value of an unsigned decimal literal such as `12`, `0.5` or `3.`.
    pub fn parse_decimal(text: &str) -> Option<Self> {
        let (int_part, frac_part) = match text.split_once('.') {
            Some((a, b)) => (a, b),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = digits.parse().ok()?;
        let denom = num::pow(BigInt::from(10u32), frac_part.len());
        Some(Number::from_rational(BigRational::new(numer, denom)))
    }

    pub fn re(&self) -> &BigRational {
        &self.re
    }

    pub fn im(&self) -> &BigRational {
        &self.im
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_minus_one(&self) -> bool {
        self.im.is_zero() && (-&self.re).is_one()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.is_real() && self.re.is_integer()
    }

    pub fn neg(&self) -> Number {
        Number::new(-&self.re, -&self.im)
    }

    pub fn add(&self, other: &Number) -> Number {
        Number::new(&self.re + &other.re, &self.im + &other.im)
    }

    pub fn sub(&self, other: &Number) -> Number {
        Number::new(&self.re - &other.re, &self.im - &other.im)
    }

    pub fn mul(&self, other: &Number) -> Number {
        if self.im.is_zero() && other.im.is_zero() {
            return Number::from_rational(&self.re * &other.re);
        }
        Number::new(
            &self.re * &other.re - &self.im * &other.im,
            &self.re * &other.im + &self.im * &other.re,
        )
    }

    /// `None` when dividing by zero.
    pub fn recip(&self) -> Option<Number> {
        if self.is_zero() {
            return None;
        }
        if self.im.is_zero() {
            return Some(Number::from_rational(self.re.recip()));
        }
        let norm = &self.re * &self.re + &self.im * &self.im;
        Some(Number::new(&self.re / &norm, -&self.im / &norm))
    }

    pub fn div(&self, other: &Number) -> Option<Number> {
        other.recip().map(|r| self.mul(&r))
    }

    /// Integer power; `None` for zero raised to a negative exponent.
    pub fn powi(&self, exp: i64) -> Option<Number> {
        if exp < 0 {
            return self.recip()?.powi(exp.checked_neg()?);
        }
        let mut base = self.clone();
        let mut acc = Number::one();
        let mut e = exp as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Some(acc)
    }

    pub fn to_complex64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on `(re, im)`. Used only to give sums and products a
/// deterministic term order.
impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        self.re.cmp(&other.re).then_with(|| self.im.cmp(&other.im))
    }
}

fn fmt_rational(r: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

/// Prints in the expression grammar, e.g. `3`, `-1/2`, `1/2+3*i`, `-i`.
impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return fmt_rational(&self.re, f);
        }
        if !self.re.is_zero() {
            fmt_rational(&self.re, f)?;
            if self.im.is_positive() {
                write!(f, "+")?;
            }
        }
        if self.im.is_one() {
            write!(f, "i")
        } else if (-&self.im).is_one() {
            write!(f, "-i")
        } else {
            fmt_rational(&self.im, f)?;
            write!(f, "*i")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(Number::parse_decimal("0.5"), Some(Number::from_ratio(1, 2)));
        assert_eq!(Number::parse_decimal("12"), Some(Number::from_integer(12)));
        assert_eq!(Number::parse_decimal("1.25"), Some(Number::from_ratio(5, 4)));
        assert_eq!(Number::parse_decimal("."), None);
    }

    #[test]
    fn gaussian_arithmetic() {
        let i = Number::i();
        assert_eq!(i.mul(&i), Number::from_integer(-1));
        let z = Number::new(BigRational::from_integer(3.into()), BigRational::from_integer(4.into()));
        let w = z.recip().unwrap();
        assert!(z.mul(&w).is_one());
        assert_eq!(z.powi(2).unwrap(), z.mul(&z));
        assert_eq!(Number::zero().powi(-1), None);
        assert_eq!(Number::from_integer(2).powi(-3), Some(Number::from_ratio(1, 8)));
    }

    #[test]
    fn display() {
        assert_eq!(Number::from_ratio(-1, 2).to_string(), "-1/2");
        assert_eq!(Number::i().neg().to_string(), "-i");
        let z = Number::new(BigRational::new(1.into(), 2.into()), BigRational::from_integer(3.into()));
        assert_eq!(z.to_string(), "1/2+3*i");
    }
}
