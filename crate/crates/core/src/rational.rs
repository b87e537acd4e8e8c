//! Parameter values that may carry an exact rational representation.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `1 - 1/sqrt(2)`, the parameter with the piecewise-linear equilibrium.
pub const MU_VOLCANO: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// A real parameter, exact when given as `p/q` or an integer-free decimal.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamValue {
    pub value: f64,
    pub exact: Option<BigRational>,
    text: String,
}

impl ParamValue {
    pub fn from_f64(value: f64) -> Self {
        ParamValue {
            value,
            exact: None,
            text: format!("{value}"),
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        let r = BigRational::new(BigInt::from(num), BigInt::from(den));
        ParamValue {
            value: r.to_f64().unwrap_or(f64::NAN),
            text: format!("{num}/{den}"),
            exact: Some(r),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for ParamValue {
    type Err = Error;

    /// Accepts decimals (`0.25`), exact ratios (`2/3`) and `1-1/sqrt2`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let compact: String = t.chars().filter(|c| !c.is_whitespace()).collect();
        if matches!(compact.as_str(), "1-1/sqrt2" | "1-1/sqrt(2)") {
            return Ok(ParamValue {
                value: MU_VOLCANO,
                exact: None,
                text: "1-1/sqrt2".into(),
            });
        }
        if let Some((p, q)) = compact.split_once('/') {
            let num: BigInt = p
                .parse()
                .map_err(|_| Error::Parse(format!("bad numerator in {t:?}")))?;
            let den: BigInt = q
                .parse()
                .map_err(|_| Error::Parse(format!("bad denominator in {t:?}")))?;
            if den.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {t:?}")));
            }
            let r = BigRational::new(num, den);
            return Ok(ParamValue {
                value: r.to_f64().unwrap_or(f64::NAN),
                exact: Some(r),
                text: compact,
            });
        }
        let value: f64 = compact
            .parse()
            .map_err(|_| Error::Parse(format!("cannot parse {t:?} as a number")))?;
        Ok(ParamValue {
            value,
            exact: decimal_to_ratio(&compact),
            text: compact,
        })
    }
}

/// Exact value of a plain decimal literal such as `0.75`.
fn decimal_to_ratio(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, den);
    Some(if neg { -r } else { r })
}
