//! Exact rational numbers used for every length, volume and cost.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::PackError;

/// An arbitrary-precision rational. Serialized as a `"p/q"` string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `num / den`, reduced. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Self {
        Rational(BigRational::new(num, den))
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Self {
        Rational(BigRational::new(BigInt::one(), BigInt::one() << k as usize))
    }

    /// `2^k`.
    pub fn pow2(k: u32) -> Self {
        Rational(BigRational::from_integer(BigInt::one() << k as usize))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn ceil(&self) -> Rational {
        Rational(self.0.ceil())
    }

    pub fn floor(&self) -> Rational {
        Rational(self.0.floor())
    }

    pub fn recip(&self) -> Rational {
        Rational(self.0.recip())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Integer value, if this is a non-negative integer that fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.is_integer() {
            self.0.numer().to_u64()
        } else {
            None
        }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Rational) -> Rational {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }
}

impl From<usize> for Rational {
    fn from(n: usize) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

/// Size class of a length `x` in `(0, 1]`: the unique `j >= 1` with
/// `x ∈ (2^-j, 2^-(j-1)]`.
///
/// Returns `None` when `x` is not in `(0, 1]`.
pub fn size_class(x: &Rational) -> Option<u32> {
    if !x.is_positive() || *x > Rational::one() {
        return None;
    }
    // j - 1 = floor(log2(q / p)) for x = p / q.
    let p = x.numer();
    let q = x.denom();
    let mut b = q.bits() as i64 - p.bits() as i64;
    if b > 0 && (p << b as usize) > *q {
        b -= 1;
    } else if b == 0 && p > q {
        // cannot happen for x <= 1
        return None;
    }
    debug_assert!(b >= 0);
    Some(b as u32 + 1)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = PackError;

    /// Accepts `p/q`, integers and finite decimals (`0.125`, `-3.5`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PackError::Parse(format!("not a rational: {s:?}"));
        let s = s.trim();
        if s.is_empty() {
            return Err(bad());
        }
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Rational(BigRational::new(n, d)));
        }
        let (neg, body) = match s.as_bytes()[0] {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let all_digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let num = BigInt::parse_bytes(digits.as_bytes(), 10).ok_or_else(bad)?;
        let den = num_traits::pow(BigInt::from(10u32), frac_part.len());
        let num = if neg { -num } else { num };
        Ok(Rational(BigRational::new(num, den)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Rational> for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

/// `a + b <= c` by cross-multiplication, without reducing the sum.
pub fn sum_le(a: &Rational, b: &Rational, c: &Rational) -> bool {
    let (an, ad) = (a.0.numer(), a.0.denom());
    let (bn, bd) = (b.0.numer(), b.0.denom());
    let (cn, cd) = (c.0.numer(), c.0.denom());
    if ad == bd && bd == cd {
        return an + bn <= *cn;
    }
    (an * bd + bn * ad) * cd <= cn * (ad * bd)
}

/// Adds fractions over a running common denominator and reduces once at the
/// end. Cheap when the denominators divide each other, as grid sizes do.
fn sum_ratios<'a>(iter: impl Iterator<Item = &'a BigRational>) -> Rational {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for x in iter {
        let (xn, xd) = (x.numer(), x.denom());
        if xd == &den {
            num += xn;
        } else if (&den % xd).is_zero() {
            num += xn * (&den / xd);
        } else if (xd % &den).is_zero() {
            num = num * (xd / &den) + xn;
            den = xd.clone();
        } else {
            let l = den.lcm(xd);
            num = num * (&l / &den) + xn * (&l / xd);
            den = l;
        }
    }
    Rational(BigRational::new(num, den))
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        let items: Vec<Rational> = iter.collect();
        sum_ratios(items.iter().map(|r| &r.0))
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        sum_ratios(iter.map(|r| &r.0))
    }
}

/// Least common multiple of the denominators, useful for scaling a set of
/// rationals onto an integer grid.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// `value * scale` as an integer; `None` if the product is not integral or
/// does not fit in an `i128`.
pub fn scaled_i128(value: &Rational, scale: &BigInt) -> Option<i128> {
    let scaled = &value.0 * BigRational::from_integer(scale.clone());
    if !scaled.is_integer() {
        return None;
    }
    scaled.numer().to_i128()
}
