//! Exact rationals used for every gauge value and quasi-geodesic parameter.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serializer};

pub type Q = Ratio<i64>;

pub fn int(n: i64) -> Q {
    Q::from_integer(n)
}

pub fn frac(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// Parses `3`, `-7/2` or a finite decimal such as `0.25` exactly.
pub fn parse_q(text: &str) -> Result<Q, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty rational".into());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| format!("bad numerator in {t:?}"))?;
        let d: i64 = d.trim().parse().map_err(|_| format!("bad denominator in {t:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {t:?}"));
        }
        return Ok(Q::new(n, d));
    }
    if let Some((whole, fracpart)) = t.split_once('.') {
        let neg = whole.starts_with('-');
        let w: i64 = if whole.is_empty() || whole == "-" {
            0
        } else {
            whole.parse().map_err(|_| format!("bad decimal {t:?}"))?
        };
        if fracpart.is_empty() || !fracpart.bytes().all(|b| b.is_ascii_digit()) || fracpart.len() > 12 {
            return Err(format!("bad decimal {t:?}"));
        }
        let scale = 10i64.pow(fracpart.len() as u32);
        let f: i64 = fracpart.parse().map_err(|_| format!("bad decimal {t:?}"))?;
        let mag = Q::from_integer(w.abs()) + Q::new(f, scale);
        return Ok(if neg { -mag } else { mag });
    }
    t.parse::<i64>().map(Q::from_integer).map_err(|_| format!("bad rational {t:?}"))
}

pub fn fmt_q(q: &Q) -> String {
    if q.is_integer() {
        q.to_integer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Smallest integer n with n >= q, clamped below at zero.
pub fn ceil_nonneg(q: &Q) -> u64 {
    if q.is_negative() || q.is_zero() {
        return 0;
    }
    q.ceil().to_integer() as u64
}

pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
    if q.is_integer() {
        s.serialize_i64(q.to_integer())
    } else {
        s.serialize_str(&fmt_q(q))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQ {
    Int(i64),
    Float(f64),
    Text(String),
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
    match RawQ::deserialize(d)? {
        RawQ::Int(n) => Ok(int(n)),
        RawQ::Float(f) => parse_q(&format!("{f}")).map_err(serde::de::Error::custom),
        RawQ::Text(t) => parse_q(&t).map_err(serde::de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_q("3").unwrap(), int(3));
        assert_eq!(parse_q("-7/2").unwrap(), frac(-7, 2));
        assert_eq!(parse_q("0.25").unwrap(), frac(1, 4));
        assert_eq!(parse_q("-1.5").unwrap(), frac(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn ceil_behaviour() {
        assert_eq!(ceil_nonneg(&frac(7, 2)), 4);
        assert_eq!(ceil_nonneg(&int(4)), 4);
        assert_eq!(ceil_nonneg(&int(-3)), 0);
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_q(&frac(10, 4)), "5/2");
        assert_eq!(fmt_q(&int(-2)), "-2");
    }
}
