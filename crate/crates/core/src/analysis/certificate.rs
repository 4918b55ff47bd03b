//! Integer parameters `(a, m, N = a^{m+1})` that make the counting upper
//! bound `C m^{1/p} N` fall below the lower bound `m N / 2`.

use num_bigint::BigUint;
use num_traits::{FromPrimitive, One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N` is written out in full while it has at most this many digits.
const MAX_EXACT_DIGITS: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c: f64,
    /// `null` stands for `p = ∞`.
    pub p: Option<f64>,
    pub q: f64,
    /// `(2C)^q`.
    pub threshold: f64,
    /// Decimal strings; these can exceed every machine integer.
    pub a: String,
    pub m: String,
    pub exponent: String,
    pub n: Option<String>,
    pub log10_n: f64,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    /// `log10(C m^{1/p})` and `log10(m / 2)`; the common factor `N` cancels.
    pub log10_upper_over_n: f64,
    pub log10_lower_over_n: f64,
    pub contradiction: bool,
    /// `m > (2C)^q`.
    pub predicate: bool,
    pub decided_by: String,
}

fn log10_big(x: &BigUint) -> f64 {
    if let Some(v) = x.to_f64().filter(|v| v.is_finite()) {
        return v.log10();
    }
    let bits = x.bits();
    let shift = bits - 60;
    let top = (x >> shift).to_f64().unwrap_or(1.0);
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Least integer strictly above `x`, with near-integers snapped first.
fn least_above(x: f64) -> Result<BigUint> {
    let r = x.round();
    let snapped = if (x - r).abs() <= 1e-12 * x.abs().max(1.0) { r } else { x };
    BigUint::from_f64(snapped.floor())
        .map(|f| f + 1u32)
        .ok_or_else(|| Error::InvalidParameter(format!("(2C)^q = {x} is not representable")))
}

fn check(c: f64, p: f64) -> Result<f64> {
    if !(c.is_finite() && c >= 1.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be a finite number at least 1")));
    }
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(if p.is_infinite() { 1.0 } else { p / (p - 1.0) })
}

/// Minimal `a` and `m`.
pub fn certificate(c: f64, p: f64) -> Result<Certificate> {
    certificate_with(c, p, None, None)
}

/// Certificate with optional overrides for `a` and `m`.
pub fn certificate_with(c: f64, p: f64, a: Option<BigUint>, m: Option<BigUint>) -> Result<Certificate> {
    let q = check(c, p)?;
    let threshold = (2.0 * c).powf(q);
    if !threshold.is_finite() {
        return Err(Error::InvalidParameter(format!("(2C)^q overflows for C = {c}, p = {p}")));
    }
    let minimal = least_above(threshold)?;
    let a = a.unwrap_or_else(|| minimal.clone());
    let m = m.unwrap_or_else(|| minimal.clone());
    if a < BigUint::from(2u32) || m < BigUint::one() {
        return Err(Error::InvalidParameter("need a >= 2 and m >= 1".into()));
    }
    let exponent = &m + 1u32;
    let log_a = log10_big(&a);
    let log_m = log10_big(&m);
    let log10_n = log_a * exponent.to_f64().unwrap_or(f64::INFINITY);
    let n = match exponent.to_u32() {
        Some(e) if log10_n <= MAX_EXACT_DIGITS => Some(a.pow(e)),
        _ => None,
    };
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let lu = c.log10() + log_m * inv_p;
    let ll = log_m - std::f64::consts::LOG10_2;
    let predicate = m >= minimal;
    let gap = ll - lu;
    let (contradiction, decided_by) = if gap.abs() > 1e-12 * ll.abs().max(1.0) {
        (gap > 0.0, "floating-point".to_string())
    } else {
        (predicate, "algebraic".to_string())
    };
    let nf = n.as_ref().and_then(|n| n.to_f64()).filter(|v| v.is_finite());
    let mf = m.to_f64().filter(|v| v.is_finite());
    let (upper, lower) = match (nf, mf) {
        (Some(nv), Some(mv)) => (Some(c * mv.powf(inv_p) * nv), Some(mv * nv / 2.0)),
        _ => (None, None),
    };
    Ok(Certificate {
        c,
        p: p.is_finite().then_some(p),
        q,
        threshold,
        a: a.to_string(),
        m: m.to_string(),
        exponent: exponent.to_string(),
        n: n.map(|n| n.to_string()),
        log10_n,
        upper,
        lower,
        log10_upper_over_n: lu,
        log10_lower_over_n: ll,
        contradiction,
        predicate,
        decided_by,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c1_p2() {
        let cert = certificate(1.0, 2.0).unwrap();
        assert_eq!((cert.a.as_str(), cert.m.as_str()), ("5", "5"));
        assert_eq!(cert.n.as_deref(), Some("15625"));
        assert!((cert.upper.unwrap() - 5f64.sqrt() * 15625.0).abs() < 1e-9);
        assert_eq!(cert.lower, Some(39062.5));
        assert!(cert.contradiction && cert.predicate);
    }

    #[test]
    fn c2_p2_is_exact() {
        let cert = certificate(2.0, 2.0).unwrap();
        assert_eq!(cert.a, "17");
        assert_eq!(cert.n.unwrap(), BigUint::from(17u32).pow(18).to_string());
        assert!(cert.contradiction);
    }

    #[test]
    fn p_infinity() {
        let cert = certificate(1.0, f64::INFINITY).unwrap();
        assert_eq!(cert.q, 1.0);
        assert_eq!((cert.a.as_str(), cert.m.as_str(), cert.n.as_deref()), ("3", "3", Some("81")));
    }

    #[test]
    fn boundary_override_is_not_a_contradiction() {
        let cert = certificate_with(1.0, 2.0, None, Some(BigUint::from(4u32))).unwrap();
        assert!(!cert.predicate);
        assert!(!cert.contradiction);
        assert_eq!(cert.decided_by, "algebraic");
    }

    #[test]
    fn rejects_bad_exponent() {
        assert_eq!(certificate(1.0, 1.0), Err(Error::InvalidExponent(1.0)));
        assert!(certificate(0.5, 2.0).is_err());
    }
}
