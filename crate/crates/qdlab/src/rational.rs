//! Exact rationals: parsing of exact decimal strings, conversions to and from
//! `f64`, logarithms of huge values, serde as strings, and positive surds.

use std::cmp::Ordering;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `-12`, `3/8`, `0.125`, `1e-3`, `2.5E+4`.
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    let bad = || Error::Parse(s.to_string());
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((a, b)) = t.split_once('/') {
        let n = BigInt::from_str(a.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(b.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if exp.abs() > 100_000 {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    if neg {
        n = -n;
    }
    let scale = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        Q::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Q::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}

pub fn parse_qvec(items: &[String]) -> Result<Vec<Q>> {
    items.iter().map(|s| parse_q(s)).collect()
}

/// Exact nonnegative integer from a decimal string such as `1e6`.
pub fn parse_count(s: &str) -> Result<u64> {
    let q = parse_q(s)?;
    if !q.is_integer() || q.is_negative() {
        return Err(Error::Parse(s.to_string()));
    }
    q.to_integer()
        .to_u64()
        .ok_or_else(|| Error::Parse(s.to_string()))
}

pub fn fmt_q(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exact value of a finite float.
pub fn q_from_f64(x: f64) -> Q {
    Q::from_float(x).expect("finite float")
}

pub fn to_f64(q: &Q) -> f64 {
    match q.to_f64() {
        Some(v) if v.is_finite() => v,
        _ => {
            if q.is_zero() {
                0.0
            } else {
                let l = ln_abs(q);
                let v = l.exp();
                if q.is_negative() {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

pub fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().map(|v| v.abs().ln()).unwrap_or(f64::NAN)
    } else {
        let shift = bits - 64;
        let top: BigInt = n.magnitude().clone().into();
        let top = top >> shift;
        top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// ln|q|; `-inf` at zero.
pub fn ln_abs(q: &Q) -> f64 {
    if q.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(q.numer()) - ln_bigint(q.denom())
}

pub fn pow_q(q: &Q, e: u32) -> Q {
    num_traits::pow(q.clone(), e as usize)
}

/// `2^k` for any integer k.
pub fn pow2(k: i64) -> Q {
    let two = BigInt::from(2);
    if k >= 0 {
        Q::from_integer(num_traits::pow(two, k as usize))
    } else {
        Q::new(BigInt::one(), num_traits::pow(two, (-k) as usize))
    }
}

pub fn floor_q(q: &Q) -> BigInt {
    q.floor().to_integer()
}

/// Nearest integer, ties rounded down.
pub fn round_q(q: &Q) -> BigInt {
    let half = qr(1, 2);
    (q + half).floor().to_integer()
}

/// `x ≈ hi + lo` with |lo| ≤ ulp(hi)/2, for fast high-precision fractional parts.
pub fn split_q(q: &Q) -> (f64, f64) {
    let hi = to_f64(q);
    if !hi.is_finite() {
        return (hi, 0.0);
    }
    let lo = to_f64(&(q - q_from_f64(hi)));
    (hi, lo)
}

pub fn gcd_big(a: &BigInt, b: &BigInt) -> BigInt {
    a.gcd(b)
}

pub fn sign_of(q: &Q) -> Sign {
    if q.is_zero() {
        Sign::NoSign
    } else if q.is_positive() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Positive real `radicand^(1/index)`; exact comparisons by raising to common powers.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Surd {
    #[serde(with = "serde_q")]
    pub radicand: Q,
    pub index: u32,
}

impl Surd {
    pub fn new(radicand: Q, index: u32) -> Result<Self> {
        if !radicand.is_positive() || index == 0 {
            return Err(Error::invalid("surd needs a positive radicand and index"));
        }
        Ok(Surd { radicand, index })
    }

    pub fn rational(q: Q) -> Result<Self> {
        Surd::new(q, 1)
    }

    /// Square root of a positive rational.
    pub fn sqrt(q: Q) -> Result<Self> {
        Surd::new(q, 2)
    }

    pub fn mul(&self, other: &Surd) -> Surd {
        let l = lcm(self.index, other.index);
        let a = pow_q(&self.radicand, l / self.index);
        let b = pow_q(&other.radicand, l / other.index);
        Surd { radicand: a * b, index: l }
    }

    pub fn recip(&self) -> Surd {
        Surd { radicand: self.radicand.recip(), index: self.index }
    }

    pub fn div(&self, other: &Surd) -> Surd {
        self.mul(&other.recip())
    }

    pub fn scale(&self, q: &Q) -> Result<Surd> {
        Ok(self.mul(&Surd::rational(q.clone())?))
    }

    pub fn powi(&self, e: u32) -> Surd {
        Surd { radicand: pow_q(&self.radicand, e), index: self.index }
    }

    pub fn ln(&self) -> f64 {
        ln_abs(&self.radicand) / self.index as f64
    }

    pub fn to_f64(&self) -> f64 {
        self.ln().exp()
    }

    /// Compare with another surd exactly.
    pub fn cmp_surd(&self, other: &Surd) -> Ordering {
        let a = pow_q(&self.radicand, other.index);
        let b = pow_q(&other.radicand, self.index);
        a.cmp(&b)
    }

    /// Compare with `sqrt(q)` for a nonnegative rational `q`.
    pub fn cmp_sqrt(&self, q: &Q) -> Ordering {
        if q.is_zero() {
            return Ordering::Greater;
        }
        self.cmp_surd(&Surd { radicand: q.clone(), index: 2 })
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / a.gcd(&b) * b
}

pub mod serde_q {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_qvec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(fmt_q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_q(s).map_err(serde::de::Error::custom)).collect()
    }
}

pub mod serde_qmat {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Q>], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<Q>>, D::Error> {
        let m = Vec::<Vec<String>>::deserialize(d)?;
        m.iter()
            .map(|r| r.iter().map(|s| parse_q(s).map_err(serde::de::Error::custom)).collect())
            .collect()
    }
}

pub mod serde_bigvec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BigInt>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| BigInt::from_str(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_exact_decimals() {
        assert_eq!(parse_q("0.125").unwrap(), qr(1, 8));
        assert_eq!(parse_q("-3/6").unwrap(), qr(-1, 2));
        assert_eq!(parse_q("1e-3").unwrap(), qr(1, 1000));
        assert_eq!(parse_q("2.5E+2").unwrap(), qi(250));
        assert_eq!(parse_q(".5").unwrap(), qr(1, 2));
        assert!(parse_q("abc").is_err());
        assert!(parse_q("1/0").is_err());
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert!(parse_count("1.5").is_err());
    }

    #[test]
    fn float_round_trip_is_exact() {
        for x in [0.1, -2.75, 1e-300, 12345.678] {
            assert_eq!(to_f64(&q_from_f64(x)), x);
        }
    }

    #[test]
    fn logs_of_huge_values() {
        let big = pow2(5000);
        assert!((ln_abs(&big) - 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((ln_abs(&big.recip()) + 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn surd_comparisons() {
        let a = Surd::sqrt(qi(2)).unwrap();
        let b = Surd::new(qi(3), 3).unwrap();
        // sqrt 2 < cbrt 3
        assert_eq!(a.cmp_surd(&b), Ordering::Less);
        assert_eq!(a.mul(&a).cmp_surd(&Surd::rational(qi(2)).unwrap()), Ordering::Equal);
        assert_eq!(a.cmp_sqrt(&qi(2)), Ordering::Equal);
    }

    #[test]
    fn split_captures_residual() {
        let third = qr(1, 3);
        let (hi, lo) = split_q(&third);
        assert!(lo != 0.0);
        assert!((3.0f64.mul_add(hi, -1.0) + 3.0 * lo).abs() < 1e-30);
    }
}
