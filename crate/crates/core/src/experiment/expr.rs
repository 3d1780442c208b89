//! Monomials in `n` and `eps`, e.g. `0.5*eps^2*n^2` or `2*n^1.5`.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Atom {
    Number(f64),
    N,
    Eps,
}

#[derive(Debug, Clone, PartialEq)]
struct Factor {
    atom: Atom,
    power: f64,
}

/// A product of factors `atom[^power]` separated by `*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    factors: Vec<Factor>,
}

fn parse_number(s: &str, whole: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("bad number `{s}` in expression `{whole}`")))
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let source = s.trim().to_string();
        if source.is_empty() {
            return Err(Error::Config("empty expression".into()));
        }
        let factors = source
            .split('*')
            .map(|part| {
                let part = part.trim();
                let (base, power) = match part.split_once('^') {
                    Some((b, p)) => (b.trim(), parse_number(p.trim(), &source)?),
                    None => (part, 1.0),
                };
                let atom = match base {
                    "n" => Atom::N,
                    "eps" => Atom::Eps,
                    "" => return Err(Error::Config(format!("missing factor in `{source}`"))),
                    num => Atom::Number(parse_number(num, &source)?),
                };
                Ok(Factor { atom, power })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { source, factors })
    }
}

impl Expr {
    pub fn constant(value: u64) -> Self {
        value.to_string().parse().expect("integer literal parses")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, n: usize, eps: f64) -> f64 {
        self.factors
            .iter()
            .map(|f| {
                let base = match f.atom {
                    Atom::Number(v) => v,
                    Atom::N => n as f64,
                    Atom::Eps => eps,
                };
                base.powf(f.power)
            })
            .product()
    }

    /// `floor(x + 1e-9)`, so values meant to be integral survive rounding.
    pub fn eval_floor(&self, n: usize, eps: f64) -> Result<usize> {
        self.to_count(self.eval(n, eps) + 1e-9, f64::floor)
    }

    /// `ceil(x - 1e-9)`.
    pub fn eval_ceil(&self, n: usize, eps: f64) -> Result<usize> {
        self.to_count(self.eval(n, eps) - 1e-9, f64::ceil)
    }

    fn to_count(&self, x: f64, round: fn(f64) -> f64) -> Result<usize> {
        if !x.is_finite() || x < -1e-6 {
            return Err(Error::Config(format!("`{}` evaluates to {x}", self.source)));
        }
        Ok(round(x).max(0.0) as usize)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ExprVisitor;

        impl Visitor<'_> for ExprVisitor {
            type Value = Expr;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or an expression such as \"0.5*eps^2*n^2\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Expr, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Expr, E> {
                Ok(Expr::constant(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Expr, E> {
                v.to_string().parse().map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Expr, E> {
                v.to_string().parse().map_err(E::custom)
            }
        }

        d.deserialize_any(ExprVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let e: Expr = "0.5*eps^2*n^2".parse().unwrap();
        assert_eq!(e.eval_floor(400, 0.1).unwrap(), 800);
        let e: Expr = "n^0.6".parse().unwrap();
        assert_eq!(e.eval_ceil(1000, 0.2).unwrap(), 64);
        let e: Expr = "0.3 * n".parse().unwrap();
        assert_eq!(e.eval_ceil(1000, 0.2).unwrap(), 300);
        assert_eq!(Expr::constant(17).eval_floor(5, 0.1).unwrap(), 17);
        let e: Expr = "2*n^1.5".parse().unwrap();
        assert_eq!(e.eval_floor(100, 0.1).unwrap(), 2000);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "n*", "m", "n^x", "2**n", "eps^"] {
            assert!(bad.parse::<Expr>().is_err(), "{bad}");
        }
        let neg: Expr = "-3".parse().unwrap();
        assert!(neg.eval_floor(1, 0.1).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let e: Expr = serde_json::from_str("\"0.5*eps^2*n^2\"").unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<Expr>(&s).unwrap(), e);
        let c: Expr = serde_json::from_str("800").unwrap();
        assert_eq!(c.eval_floor(1, 0.1).unwrap(), 800);
    }
}
